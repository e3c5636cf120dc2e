#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>
#include <cmath>
#include <cstdlib>

#include "esmeta/experiment.hpp"

namespace esmeta {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t to_count(const std::string& key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return static_cast<std::size_t>(out);
}

double to_real(const std::string& key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key, "expected a finite number, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_flag(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true/false, got '" + std::string(v) + "'");
}

FitnessShaping to_shaping(const std::string& key, std::string_view v) {
  if (v == "none") return FitnessShaping::kNone;
  if (v == "centered_rank") return FitnessShaping::kCenteredRank;
  throw ConfigError(key, "expected none or centered_rank, got '" + std::string(v) + "'");
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Field>
Key count_key(std::string name, Field field) {
  return {std::move(name),
          [field](RunConfig& c, const std::string& k, std::string_view v) { field(c) = to_count(k, v); },
          [field](const RunConfig& c) { return std::to_string(field(c)); }};
}

template <typename Field>
Key real_key(std::string name, Field field) {
  return {std::move(name),
          [field](RunConfig& c, const std::string& k, std::string_view v) { field(c) = to_real(k, v); },
          [field](const RunConfig& c) { return format_double(field(c)); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> t;
    t.push_back(count_key("M", [](auto& c) -> auto& { return c.meta.workers; }));
    t.push_back(count_key("K", [](auto& c) -> auto& { return c.meta.k; }));
    t.push_back(count_key("tasks_per_iteration",
                          [](auto& c) -> auto& { return c.meta.tasks_per_iteration; }));
    t.push_back(count_key("trajectories_per_actor",
                          [](auto& c) -> auto& { return c.meta.trajectories_per_actor; }));
    t.push_back(count_key("horizon", [](auto& c) -> auto& { return c.meta.horizon; }));
    t.push_back(count_key("hidden", [](auto& c) -> auto& { return c.meta.hidden; }));
    t.push_back(count_key("iterations", [](auto& c) -> auto& { return c.meta.iterations; }));
    t.push_back({"master_seed",
                 [](RunConfig& c, const std::string& k, std::string_view v) {
                   c.meta.master_seed = to_count(k, v);
                 },
                 [](const RunConfig& c) { return std::to_string(c.meta.master_seed); }});
    t.push_back(real_key("lr_mu_actor", [](auto& c) -> auto& { return c.meta.lr_mu_actor; }));
    t.push_back(real_key("lr_sigma_actor", [](auto& c) -> auto& { return c.meta.lr_sigma_actor; }));
    t.push_back(real_key("lr_mu_critic", [](auto& c) -> auto& { return c.meta.lr_mu_critic; }));
    t.push_back(real_key("lr_sigma_critic", [](auto& c) -> auto& { return c.meta.lr_sigma_critic; }));
    t.push_back(real_key("sigma_init", [](auto& c) -> auto& { return c.meta.sigma_init; }));
    t.push_back(real_key("sigma_min", [](auto& c) -> auto& { return c.meta.sigma_bounds.min; }));
    t.push_back(real_key("sigma_max", [](auto& c) -> auto& { return c.meta.sigma_bounds.max; }));
    t.push_back({"actor_shaping",
                 [](RunConfig& c, const std::string& k, std::string_view v) {
                   c.meta.actor_shaping = to_shaping(k, v);
                 },
                 [](const RunConfig& c) { return std::string(shaping_name(c.meta.actor_shaping)); }});
    t.push_back({"critic_shaping",
                 [](RunConfig& c, const std::string& k, std::string_view v) {
                   c.meta.critic_shaping = to_shaping(k, v);
                 },
                 [](const RunConfig& c) { return std::string(shaping_name(c.meta.critic_shaping)); }});
    t.push_back(real_key("gamma", [](auto& c) -> auto& { return c.meta.adapt.gamma; }));
    t.push_back(real_key("critic_lr", [](auto& c) -> auto& { return c.meta.adapt.critic_lr; }));
    t.push_back(real_key("actor_lr", [](auto& c) -> auto& { return c.meta.adapt.actor_lr; }));
    t.push_back(count_key("batch_size", [](auto& c) -> auto& { return c.meta.adapt.batch_size; }));
    t.push_back(count_key("grad_steps_per_adapt",
                          [](auto& c) -> auto& { return c.meta.adapt.grad_steps_per_adapt; }));
    t.push_back({"use_target_nets",
                 [](RunConfig& c, const std::string& k, std::string_view v) {
                   c.meta.adapt.use_target_nets = to_flag(k, v);
                 },
                 [](const RunConfig& c) {
                   return std::string(c.meta.adapt.use_target_nets ? "true" : "false");
                 }});
    t.push_back(real_key("tau", [](auto& c) -> auto& { return c.meta.adapt.tau; }));
    t.push_back({"task",
                 [](RunConfig& c, const std::string& k, std::string_view v) {
                   try {
                     c.meta.family = parse_task_family(v);
                   } catch (const InvalidArgument& e) {
                     throw ConfigError(k, e.what());
                   }
                 },
                 [](const RunConfig& c) { return std::string(task_family_name(c.meta.family)); }});
    t.push_back({"goal",
                 [](RunConfig& c, const std::string& k, std::string_view v) {
                   if (v.empty() || v == "none") {
                     c.meta.fixed_goal.reset();
                     return;
                   }
                   const auto comma = v.find(',');
                   Vec2 g{to_real(k, trim(v.substr(0, comma))), 0.0};
                   if (comma != std::string_view::npos) g[1] = to_real(k, trim(v.substr(comma + 1)));
                   c.meta.fixed_goal = g;
                 },
                 [](const RunConfig& c) {
                   if (!c.meta.fixed_goal) return std::string("none");
                   return format_double((*c.meta.fixed_goal)[0]) + "," +
                          format_double((*c.meta.fixed_goal)[1]);
                 }});
    t.push_back(real_key("dt", [](auto& c) -> auto& { return c.meta.env.dt; }));
    t.push_back(real_key("a_max", [](auto& c) -> auto& { return c.meta.env.a_max; }));
    t.push_back(real_key("v_max", [](auto& c) -> auto& { return c.meta.env.v_max; }));
    t.push_back(real_key("velocity_goal_max",
                         [](auto& c) -> auto& { return c.meta.env.velocity_goal_max; }));
    t.push_back(real_key("position_goal_extent",
                         [](auto& c) -> auto& { return c.meta.env.position_goal_extent; }));
    t.push_back({"output_dir",
                 [](RunConfig& c, const std::string& k, std::string_view v) {
                   if (v.empty()) throw ConfigError(k, "must not be empty");
                   c.output_dir = std::string(v);
                 },
                 [](const RunConfig& c) { return c.output_dir.string(); }});
    t.push_back(count_key("checkpoint_every", [](auto& c) -> auto& { return c.checkpoint_every; }));
    t.push_back(count_key("eval_tasks", [](auto& c) -> auto& { return c.eval_tasks; }));
    return t;
  }();
  return table;
}

void apply(RunConfig& cfg, std::string_view line, bool from_flag) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    const std::string key(trim(line));
    throw ConfigError(key.empty() ? "<line>" : key, "expected key=value");
  }
  const std::string key(trim(line.substr(0, eq)));
  const std::string_view value = trim(line.substr(eq + 1));
  const auto& table = keys();
  const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
  if (it == table.end()) {
    throw ConfigError(key, from_flag ? "unknown override key" : "unknown config key");
  }
  it->set(cfg, key, value);
}

void validate(const RunConfig& cfg) {
  cfg.meta.validate();
  if (cfg.checkpoint_every == 0) throw ConfigError("checkpoint_every", "must be >= 1");
  if (cfg.meta.env.dt <= 0) throw ConfigError("dt", "must be > 0");
  if (cfg.meta.env.a_max <= 0) throw ConfigError("a_max", "must be > 0");
  if (cfg.meta.env.v_max <= 0) throw ConfigError("v_max", "must be > 0");
  if (cfg.meta.env.velocity_goal_max < 0) throw ConfigError("velocity_goal_max", "must be >= 0");
}

}  // namespace

std::string_view shaping_name(FitnessShaping mode) {
  return mode == FitnessShaping::kNone ? "none" : "centered_rank";
}

RunConfig parse_config_text(std::string_view text, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    if (!trim(line).empty()) apply(cfg, line, false);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  for (const auto& o : overrides) apply(cfg, o, true);
  validate(cfg);
  return cfg;
}

RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       const std::vector<std::string>& overrides) {
  std::string text;
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot read " + path->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config_text(text, overrides);
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const Key& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

std::size_t threads_from_env() {
  if (const char* v = std::getenv("ESMETA_THREADS")) {
    std::size_t n = 0;
    const std::string_view s(v);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc() && ptr == s.data() + s.size() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace esmeta
