#include <fstream>

#include "esmeta/experiment.hpp"

namespace esmeta {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

RunOutputs run_train(const RunConfig& cfg, const std::function<void(const std::string&)>& log) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.output_dir.string() + ": " + ec.message());
  write_text(cfg.output_dir / "config.resolved", format_config(cfg));

  const std::filesystem::path checkpoint = cfg.output_dir / "checkpoint.bin";
  const std::filesystem::path metrics = cfg.output_dir / "metrics.csv";
  std::vector<IterationStats> series;
  TrainHooks hooks;
  hooks.on_iteration = [&](const MetaSnapshot& snap, const IterationStats& stats) {
    series.push_back(stats);
    if (log) {
      log("iter " + std::to_string(stats.iteration) + " fitness mean " +
          format_double(stats.fitness_mean) + " max " + format_double(stats.fitness_max) +
          " sigma_a " + format_double(stats.sigma_mean_actor));
    }
    if ((stats.iteration + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(make_checkpoint(snap, stats.iteration + 1, cfg.meta.master_seed),
                      checkpoint);
      emit_metrics(series, metrics);
    }
  };
  hooks.on_warning = [&](std::size_t it, const std::string& msg) {
    if (log) log("warning: iter " + std::to_string(it) + ": " + msg);
  };

  RunOutputs outputs{checkpoint, metrics, train(cfg.meta, hooks)};
  const std::uint64_t done = outputs.result.stats.empty() ? 0 : outputs.result.stats.back().iteration + 1;
  save_checkpoint(make_checkpoint(outputs.result.final_dists, done, cfg.meta.master_seed),
                  checkpoint);
  if (!series.empty()) {
    emit_metrics(series, metrics);
  } else {
    write_text(metrics, std::string(kMetricsHeader) + "\n");
  }
  return outputs;
}

}  // namespace esmeta
