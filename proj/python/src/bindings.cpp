#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "esmeta/experiment.hpp"

namespace py = pybind11;
using namespace esmeta;

namespace {

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw InvalidArgument("expected a 1-d array");
  return std::vector<double>(a.data(), a.data() + a.size());
}

py::array_t<double> to_array(std::span<const double> v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

nn::LayoutPtr share(nn::NetLayout layout) {
  return std::make_shared<const nn::NetLayout>(std::move(layout));
}

py::dict stats_dict(const IterationStats& s) {
  py::dict d;
  d["iteration"] = s.iteration;
  d["fitness_mean"] = s.fitness_mean;
  d["fitness_max"] = s.fitness_max;
  d["fitness_min"] = s.fitness_min;
  d["fitness_std"] = s.fitness_std;
  d["sigma_mean_actor"] = s.sigma_mean_actor;
  d["sigma_mean_critic"] = s.sigma_mean_critic;
  d["wall_seconds"] = s.wall_seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Meta-RL with evolved Gaussian parameter distributions (C++ core)";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<InvalidState>(m, "InvalidState", PyExc_RuntimeError);
  py::register_exception<NumericFailure>(m, "NumericFailure", PyExc_ArithmeticError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.attr("OBS_DIM") = kObsDim;
  m.attr("ACTION_DIM") = kActionDim;

  py::class_<nn::NetLayout, std::shared_ptr<nn::NetLayout>>(m, "NetLayout")
      .def_property_readonly("total_params", &nn::NetLayout::total_params)
      .def_property_readonly("input_dim", &nn::NetLayout::input_dim)
      .def("__repr__", [](const nn::NetLayout& l) {
        return "<NetLayout layers=" + std::to_string(l.layers().size()) +
               " params=" + std::to_string(l.total_params()) + ">";
      });

  m.def("actor_layout", [](std::size_t obs, std::size_t act, std::size_t hidden) {
        return std::make_shared<nn::NetLayout>(nn::build_actor_layout(obs, act, hidden));
      }, py::arg("obs_dim"), py::arg("action_dim"), py::arg("hidden"));
  m.def("critic_layout", [](std::size_t obs, std::size_t act, std::size_t hidden) {
        return std::make_shared<nn::NetLayout>(nn::build_critic_layout(obs, act, hidden));
      }, py::arg("obs_dim"), py::arg("action_dim"), py::arg("hidden"));

  py::class_<nn::FlatParams>(m, "FlatParams")
      .def(py::init([](const std::shared_ptr<nn::NetLayout>& layout, py::object values) {
             if (values.is_none()) return nn::FlatParams(layout);
             return nn::FlatParams(layout, to_vector(values.cast<py::array_t<double>>()));
           }),
           py::arg("layout"), py::arg("values") = py::none())
      .def_property_readonly("values", [](const nn::FlatParams& p) { return to_array(p.values()); })
      .def("__len__", &nn::FlatParams::size)
      .def("__eq__", &nn::FlatParams::operator==);

  m.def("xavier_init", [](const std::shared_ptr<nn::NetLayout>& layout, std::uint64_t seed) {
        Rng rng(seed);
        return nn::xavier_init(layout, rng);
      }, py::arg("layout"), py::arg("seed"));
  m.def("actor_forward", [](const nn::FlatParams& p, const py::array_t<double>& obs) {
        return to_array(nn::actor_forward(p, to_vector(obs)));
      }, py::arg("params"), py::arg("obs"));
  m.def("critic_forward", [](const nn::FlatParams& p, const py::array_t<double>& obs,
                             const py::array_t<double>& action) {
        return nn::critic_forward(p, to_vector(obs), to_vector(action));
      }, py::arg("params"), py::arg("obs"), py::arg("action"));
  m.def("actor_backward", [](const nn::FlatParams& p, const py::array_t<double>& obs,
                             const py::array_t<double>& upstream) {
        return to_array(nn::actor_backward(p, to_vector(obs), to_vector(upstream)));
      }, py::arg("params"), py::arg("obs"), py::arg("upstream"));
  m.def("critic_backward", [](const nn::FlatParams& p, const py::array_t<double>& obs,
                              const py::array_t<double>& action, double upstream) {
        const auto r = nn::critic_backward(p, to_vector(obs), to_vector(action), upstream);
        return py::make_tuple(to_array(r.param_grads), to_array(r.input_grads));
      }, py::arg("params"), py::arg("obs"), py::arg("action"), py::arg("upstream") = 1.0);

  py::class_<GaussianParamDist>(m, "GaussianParamDist")
      .def(py::init([](const nn::FlatParams& mu, py::object sigma, double sigma_min, double sigma_max) {
             const SigmaBounds bounds{sigma_min, sigma_max};
             if (py::isinstance<py::float_>(sigma) || py::isinstance<py::int_>(sigma)) {
               return GaussianParamDist(mu, sigma.cast<double>(), bounds);
             }
             return GaussianParamDist(mu, to_vector(sigma.cast<py::array_t<double>>()), bounds);
           }),
           py::arg("mu"), py::arg("sigma"), py::arg("sigma_min") = 1e-4, py::arg("sigma_max") = 1.0)
      .def_property_readonly("mu", &GaussianParamDist::mu)
      .def_property_readonly("sigma", [](const GaussianParamDist& d) { return to_array(d.sigma()); })
      .def_property_readonly("sigma_mean", &GaussianParamDist::sigma_mean)
      .def("__len__", &GaussianParamDist::size);

  m.def("sample", [](const GaussianParamDist& d, std::uint32_t worker, std::uint32_t member,
                     std::uint64_t seed) { return sample(d, {worker, member, seed}); },
        py::arg("dist"), py::arg("worker_index"), py::arg("member_index"), py::arg("seed"));
  m.def("sample_k_and_mean", [](const GaussianParamDist& d, std::uint32_t worker, std::size_t k,
                                std::uint64_t seed) {
        std::vector<PerturbationSeed> seeds;
        for (std::size_t j = 0; j < k; ++j) seeds.push_back({worker, static_cast<std::uint32_t>(j), seed});
        KSamples r = sample_k_and_mean(d, seeds);
        return py::make_tuple(r.samples, r.mean);
      }, py::arg("dist"), py::arg("worker_index"), py::arg("k"), py::arg("seed"));
  m.def("search_gradient", [](const std::vector<nn::FlatParams>& samples, const std::vector<double>& fitness,
                              const GaussianParamDist& d) {
        const MetaGradients g = nes_gradient_critic(samples, fitness, d);
        return py::make_tuple(to_array(g.grad_mu), to_array(g.grad_sigma));
      }, py::arg("samples"), py::arg("fitness"), py::arg("dist"),
        "One sample per worker; returns (grad_mu, grad_sigma).");
  m.def("shape_fitness", [](const std::vector<double>& raw, const std::string& mode) {
        if (mode != "none" && mode != "centered_rank") throw InvalidArgument("unknown shaping mode " + mode);
        return shape_fitness(raw, mode == "none" ? FitnessShaping::kNone : FitnessShaping::kCenteredRank);
      }, py::arg("raw"), py::arg("mode") = "centered_rank");
  m.def("sgd_step", [](const GaussianParamDist& d, const py::array_t<double>& grad_mu,
                       const py::array_t<double>& grad_sigma, double lr_mu, double lr_sigma) {
        return sgd_step(d, {to_vector(grad_mu), to_vector(grad_sigma)}, lr_mu, lr_sigma);
      }, py::arg("dist"), py::arg("grad_mu"), py::arg("grad_sigma"), py::arg("lr_mu"), py::arg("lr_sigma"));

  m.def("rollout_return", [](const nn::FlatParams& actor, const std::string& family,
                             std::pair<double, double> goal, std::size_t horizon) {
        const PointEnv env;
        Rng rng(0);
        const Task task{parse_task_family(family), {goal.first, goal.second}, 0};
        return env.rollout(actor, task, horizon, rng).episode_return;
      }, py::arg("actor"), py::arg("family"), py::arg("goal"), py::arg("horizon") = 200);

  py::class_<RunConfig>(m, "RunConfig")
      .def_property_readonly("text", [](const RunConfig& c) { return format_config(c); })
      .def_property_readonly("output_dir", [](const RunConfig& c) { return c.output_dir; })
      .def_property_readonly("iterations", [](const RunConfig& c) { return c.meta.iterations; })
      .def_property_readonly("hidden", [](const RunConfig& c) { return c.meta.hidden; });
  m.def("parse_config", [](const std::string& text, const std::vector<std::string>& overrides) {
        return parse_config_text(text, overrides);
      }, py::arg("text") = "", py::arg("overrides") = std::vector<std::string>{});
  m.def("load_config", [](const std::filesystem::path& path, const std::vector<std::string>& overrides) {
        return parse_config(path, overrides);
      }, py::arg("path"), py::arg("overrides") = std::vector<std::string>{});

  py::class_<MetaSnapshot>(m, "MetaSnapshot")
      .def_readonly("actor", &MetaSnapshot::actor)
      .def_readonly("critic", &MetaSnapshot::critic);
  m.def("initial_distributions", [](const RunConfig& c) { return initial_distributions(c.meta); });

  m.def("train", [](const RunConfig& c, std::size_t threads,
                    const std::function<void(py::dict)>& on_iteration) {
        MetaConfig meta = c.meta;
        meta.threads = threads;
        TrainHooks hooks;
        if (on_iteration) {
          hooks.on_iteration = [&](const MetaSnapshot&, const IterationStats& s) {
            py::gil_scoped_acquire gil;
            on_iteration(stats_dict(s));
          };
        }
        TrainResult r = [&] {
          py::gil_scoped_release release;
          return train(meta, hooks);
        }();
        py::list stats;
        for (const auto& s : r.stats) stats.append(stats_dict(s));
        return py::make_tuple(r.final_dists, stats);
      }, py::arg("config"), py::arg("threads") = 1, py::arg("on_iteration") = nullptr,
        "Returns (MetaSnapshot, list of per-iteration stats dicts).");
  m.def("run_train", [](const RunConfig& c, std::size_t threads) {
        RunConfig cfg = c;
        cfg.meta.threads = threads;
        py::gil_scoped_release release;
        return run_train(cfg).checkpoint;
      }, py::arg("config"), py::arg("threads") = 1);

  m.def("save_checkpoint", [](const MetaSnapshot& s, const std::filesystem::path& path,
                              std::uint64_t iteration, std::uint64_t master_seed) {
        save_checkpoint(make_checkpoint(s, iteration, master_seed), path);
      }, py::arg("snapshot"), py::arg("path"), py::arg("iteration") = 0, py::arg("master_seed") = 0);
  m.def("load_checkpoint", [](const std::filesystem::path& path) {
        const Checkpoint c = load_checkpoint(path);
        return py::make_tuple(snapshot_from_checkpoint(c), c.iteration, c.master_seed);
      }, py::arg("path"), "Returns (MetaSnapshot, iteration, master_seed).");

  m.def("run_eval", [](const MetaSnapshot& s, const RunConfig& c, std::size_t tasks,
                       std::size_t adapt_steps, std::uint64_t seed, std::size_t threads) {
        MetaConfig meta = c.meta;
        meta.threads = threads;
        const EvalReport r = [&] {
          py::gil_scoped_release release;
          return run_eval(s, meta, tasks, adapt_steps, seed);
        }();
        py::list rows;
        for (const EvalRow& row : r.rows) {
          py::dict d;
          d["task"] = row.task_index;
          d["family"] = std::string(task_family_name(row.task.family));
          d["goal"] = py::make_tuple(row.task.goal[0], row.task.goal[1]);
          d["pre_return"] = row.pre_return;
          d["post_return"] = row.post_return;
          rows.append(d);
        }
        return rows;
      }, py::arg("snapshot"), py::arg("config"), py::arg("tasks") = 25, py::arg("adapt_steps") = 1,
        py::arg("seed") = 0, py::arg("threads") = 1);
}
