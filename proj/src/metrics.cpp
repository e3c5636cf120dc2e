#include <array>
#include <charconv>
#include <fstream>

#include "esmeta/experiment.hpp"

namespace esmeta {

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string format_metrics(const std::vector<IterationStats>& series) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const IterationStats& s : series) {
    out += std::to_string(s.iteration);
    for (double v : {s.fitness_mean, s.fitness_max, s.fitness_min, s.fitness_std,
                     s.sigma_mean_actor, s.sigma_mean_critic, s.wall_seconds}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::vector<IterationStats> parse_metrics(std::string_view csv) {
  std::vector<IterationStats> series;
  std::size_t pos = csv.find('\n');
  if (csv.substr(0, pos) != kMetricsHeader) throw InvalidArgument("metrics header mismatch");
  while (pos != std::string_view::npos && pos + 1 < csv.size()) {
    const std::size_t start = pos + 1;
    pos = csv.find('\n', start);
    const std::string_view line = csv.substr(start, pos == std::string_view::npos ? csv.size() - start : pos - start);
    if (line.empty()) continue;
    std::array<std::string_view, 8> cells;
    std::size_t c = 0;
    std::size_t from = 0;
    for (; c < cells.size(); ++c) {
      const std::size_t comma = line.find(',', from);
      cells[c] = line.substr(from, comma == std::string_view::npos ? line.size() - from : comma - from);
      if (comma == std::string_view::npos) break;
      from = comma + 1;
    }
    if (c != cells.size() - 1) throw InvalidArgument("metrics row needs 8 columns");
    IterationStats s;
    auto parse = [](std::string_view cell, auto& out) {
      const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
      if (ec != std::errc() || p != cell.data() + cell.size()) {
        throw InvalidArgument("bad metrics cell '" + std::string(cell) + "'");
      }
    };
    parse(cells[0], s.iteration);
    parse(cells[1], s.fitness_mean);
    parse(cells[2], s.fitness_max);
    parse(cells[3], s.fitness_min);
    parse(cells[4], s.fitness_std);
    parse(cells[5], s.sigma_mean_actor);
    parse(cells[6], s.sigma_mean_critic);
    parse(cells[7], s.wall_seconds);
    series.push_back(s);
  }
  return series;
}

void emit_metrics(const std::vector<IterationStats>& series, const std::filesystem::path& path) {
  if (series.empty()) throw InvalidArgument("no iterations to emit");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string csv = format_metrics(series);
  out.write(csv.data(), static_cast<std::streamsize>(csv.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace esmeta
