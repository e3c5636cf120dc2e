#ifndef ESMETA_EXPERIMENT_HPP_
#define ESMETA_EXPERIMENT_HPP_

// Operator surface: key=value configs, binary checkpoints, CSV metrics,
// held-out evaluation and the train driver used by the CLI.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "esmeta/errors.hpp"
#include "esmeta/trainer.hpp"

namespace esmeta {

struct RunConfig {
  MetaConfig meta;
  std::filesystem::path output_dir = "runs/default";
  std::size_t checkpoint_every = 10;
  std::size_t eval_tasks = 25;
};

// Parses `key = value` lines ('#' starts a comment), then applies overrides
// ("key=value", later wins). Unknown keys and malformed values throw
// ConfigError naming the key.
RunConfig parse_config_text(std::string_view text, const std::vector<std::string>& overrides = {});
RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::string>& overrides = {});
// Fully-resolved config in the same key=value syntax; parses back to itself.
std::string format_config(const RunConfig& cfg);
std::string_view shaping_name(FitnessShaping mode);

// ---- checkpoints ----

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'E', 'S', 'M', 'L'};
// obs_dim, action_dim, hidden, iteration, master_seed as u64 LE.
inline constexpr std::size_t kCheckpointHeaderBytes = 5 * 8;

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  std::uint64_t obs_dim = kObsDim;
  std::uint64_t action_dim = kActionDim;
  std::uint64_t hidden = 0;
  std::uint64_t iteration = 0;  // iterations completed
  std::uint64_t master_seed = 0;
  std::vector<double> mu_a;
  std::vector<double> sigma_a;
  std::vector<double> mu_c;
  std::vector<double> sigma_c;

  nn::NetLayout actor_layout() const;
  nn::NetLayout critic_layout() const;
  bool operator==(const Checkpoint&) const = default;
};

class CheckpointError : public IoError {
 public:
  enum class Kind { kBadMagic, kUnsupportedVersion, kTruncated, kInvalid, kIo };
  CheckpointError(Kind kind, const std::string& message) : IoError(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

Checkpoint make_checkpoint(const MetaSnapshot& snapshot, std::uint64_t iteration,
                           std::uint64_t master_seed);
// Sigma bounds are widened as needed to contain the stored sigmas.
MetaSnapshot snapshot_from_checkpoint(const Checkpoint& ckpt, SigmaBounds bounds = {});

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---- metrics ----

inline constexpr std::string_view kMetricsHeader =
    "iteration,fitness_mean,fitness_max,fitness_min,fitness_std,sigma_mean_actor,"
    "sigma_mean_critic,wall_seconds";

std::string format_metrics(const std::vector<IterationStats>& series);
std::vector<IterationStats> parse_metrics(std::string_view csv);
// Throws InvalidArgument on an empty series, IoError if the file cannot be written.
void emit_metrics(const std::vector<IterationStats>& series, const std::filesystem::path& path);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

// ---- evaluation ----

struct EvalRow {
  std::size_t task_index = 0;
  Task task;
  double pre_return = 0.0;
  double post_return = 0.0;

  bool operator==(const EvalRow&) const = default;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_pre = 0.0;
  double mean_post = 0.0;

  bool operator==(const EvalReport&) const = default;
};

// Held-out tasks drawn from `seed`. For each task: sample K actors and a
// critic, explore, then report the return of the mean-of-K actor before and
// after `adapt_steps` adaptation rounds (0 means no adaptation).
EvalReport run_eval(const MetaSnapshot& snapshot, const MetaConfig& cfg, std::size_t eval_tasks,
                    std::size_t adapt_steps, std::uint64_t seed);
std::string format_eval_csv(const EvalReport& report);
std::string format_eval_summary(const EvalReport& report);

// ---- train driver ----

struct RunOutputs {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
  TrainResult result;
};

// Trains per cfg, writing config.resolved, checkpoint.bin (every
// checkpoint_every iterations and at the end) and metrics.csv into output_dir.
RunOutputs run_train(const RunConfig& cfg,
                     const std::function<void(const std::string&)>& log = {});

// ESMETA_THREADS if set and positive, else hardware concurrency.
std::size_t threads_from_env();

}  // namespace esmeta

#endif  // ESMETA_EXPERIMENT_HPP_
