"""Meta-RL with evolved Gaussian distributions over actor and critic parameters."""

from ._core import (
    ACTION_DIM,
    OBS_DIM,
    ConfigError,
    FlatParams,
    GaussianParamDist,
    InvalidArgument,
    InvalidState,
    IoError,
    MetaSnapshot,
    NetLayout,
    NumericFailure,
    RunConfig,
    actor_backward,
    actor_forward,
    actor_layout,
    critic_backward,
    critic_forward,
    critic_layout,
    initial_distributions,
    load_checkpoint,
    load_config,
    parse_config,
    rollout_return,
    run_eval,
    run_train,
    sample,
    sample_k_and_mean,
    save_checkpoint,
    search_gradient,
    sgd_step,
    shape_fitness,
    train,
    xavier_init,
)

__all__ = [name for name in dir() if not name.startswith("_")]
