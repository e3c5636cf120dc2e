#include "esmeta/param_dist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

#include "esmeta/errors.hpp"

namespace esmeta {

namespace {

constexpr std::uint64_t kPerturbationTag = 0x5045525455524231ull;  // "PERTURB1"

void check_same_layout(const nn::FlatParams& p, const GaussianParamDist& dist) {
  if (p.size() != dist.size() || !(p.layout() == dist.layout())) {
    throw InvalidArgument("sample does not match the distribution layout");
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

GaussianParamDist::GaussianParamDist(nn::FlatParams mu, double sigma_init, SigmaBounds bounds)
    : GaussianParamDist(mu, std::vector<double>(mu.size(), sigma_init), bounds) {}

GaussianParamDist::GaussianParamDist(nn::FlatParams mu, std::vector<double> sigma,
                                     SigmaBounds bounds)
    : mu_(std::move(mu)), sigma_(std::move(sigma)), bounds_(bounds) {
  if (!(bounds_.min > 0.0) || bounds_.max < bounds_.min) {
    throw InvalidArgument("sigma bounds must satisfy 0 < min <= max");
  }
  if (sigma_.size() != mu_.size()) throw InvalidArgument("mu and sigma lengths differ");
  for (double s : sigma_) {
    if (!(s >= bounds_.min && s <= bounds_.max)) {
      throw InvalidArgument("sigma outside [sigma_min, sigma_max]");
    }
  }
}

double GaussianParamDist::sigma_mean() const {
  return std::accumulate(sigma_.begin(), sigma_.end(), 0.0) / static_cast<double>(sigma_.size());
}

std::uint64_t PerturbationSeed::key() const {
  return derive_seed({kPerturbationTag, master_seed, worker_index, member_index});
}

nn::FlatParams sample(const GaussianParamDist& dist, const PerturbationSeed& seed) {
  Rng rng(seed.key());
  const auto mu = dist.mu().values();
  const auto sigma = dist.sigma();
  std::vector<double> values(dist.size());
  for (std::size_t j = 0; j < values.size(); ++j) values[j] = mu[j] + sigma[j] * rng.normal();
  return nn::FlatParams(dist.layout_ptr(), std::move(values));
}

KSamples sample_k_and_mean(const GaussianParamDist& dist,
                           std::span<const PerturbationSeed> seeds) {
  if (seeds.empty()) throw InvalidArgument("K must be >= 1");
  std::set<std::pair<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>>> unique;
  for (const auto& s : seeds) {
    if (!unique.insert({s.master_seed, {s.worker_index, s.member_index}}).second) {
      throw InvalidArgument("duplicate perturbation seed");
    }
  }
  std::vector<nn::FlatParams> samples;
  samples.reserve(seeds.size());
  std::vector<double> mean(dist.size(), 0.0);
  for (const auto& s : seeds) {
    samples.push_back(sample(dist, s));
    const auto v = samples.back().values();
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += v[j];
  }
  const double inv_k = 1.0 / static_cast<double>(seeds.size());
  for (double& m : mean) m *= inv_k;
  return {std::move(samples), nn::FlatParams(dist.layout_ptr(), std::move(mean))};
}

NesAccumulator::NesAccumulator(const GaussianParamDist& dist)
    : dist_(&dist), grad_mu_(dist.size(), 0.0), grad_sigma_(dist.size(), 0.0) {}

void NesAccumulator::add(std::span<const nn::FlatParams> worker_samples, double fitness) {
  if (worker_samples.empty()) throw InvalidArgument("worker contributed no samples");
  for (const auto& s : worker_samples) check_same_layout(s, *dist_);
  ++workers_;
  if (fitness == 0.0) return;
  const auto mu = dist_->mu().values();
  const auto sigma = dist_->sigma();
  for (const auto& s : worker_samples) {
    const auto theta = s.values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double diff = theta[j] - mu[j];
      const double var = sigma[j] * sigma[j];
      grad_mu_[j] += fitness * diff / var;
      grad_sigma_[j] += fitness * (diff * diff - var) / (var * sigma[j]);
    }
  }
}

void NesAccumulator::merge(const NesAccumulator& other) {
  if (other.grad_mu_.size() != grad_mu_.size()) throw InvalidArgument("accumulator size mismatch");
  for (std::size_t j = 0; j < grad_mu_.size(); ++j) {
    grad_mu_[j] += other.grad_mu_[j];
    grad_sigma_[j] += other.grad_sigma_[j];
  }
  workers_ += other.workers_;
}

MetaGradients NesAccumulator::finish() const {
  if (workers_ == 0) throw InvalidState("no workers accumulated");
  const double inv_m = 1.0 / static_cast<double>(workers_);
  MetaGradients g{grad_mu_, grad_sigma_};
  for (double& x : g.grad_mu) x *= inv_m;
  for (double& x : g.grad_sigma) x *= inv_m;
  return g;
}

MetaGradients nes_gradient_actor(std::span<const std::vector<nn::FlatParams>> worker_samples,
                                 std::span<const double> fitness, const GaussianParamDist& dist) {
  if (worker_samples.empty()) throw InvalidArgument("M must be >= 1");
  if (worker_samples.size() != fitness.size()) {
    throw InvalidArgument("one fitness value per worker required");
  }
  NesAccumulator acc(dist);
  for (std::size_t i = 0; i < worker_samples.size(); ++i) acc.add(worker_samples[i], fitness[i]);
  return acc.finish();
}

MetaGradients nes_gradient_critic(std::span<const nn::FlatParams> samples,
                                  std::span<const double> fitness, const GaussianParamDist& dist) {
  if (samples.empty()) throw InvalidArgument("M must be >= 1");
  if (samples.size() != fitness.size()) {
    throw InvalidArgument("one fitness value per worker required");
  }
  NesAccumulator acc(dist);
  for (std::size_t i = 0; i < samples.size(); ++i) acc.add(samples[i], fitness[i]);
  return acc.finish();
}

std::vector<double> shape_fitness(std::span<const double> raw, FitnessShaping mode) {
  std::vector<double> out(raw.begin(), raw.end());
  if (mode == FitnessShaping::kNone || raw.empty()) return out;
  const std::size_t m = raw.size();
  if (m == 1) return {0.0};

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
  const double scale = 1.0 / static_cast<double>(m - 1);
  for (std::size_t lo = 0; lo < m;) {
    std::size_t hi = lo;
    while (hi + 1 < m && raw[order[hi + 1]] == raw[order[lo]]) ++hi;
    const double avg_rank = 0.5 * static_cast<double>(lo + hi);
    for (std::size_t k = lo; k <= hi; ++k) out[order[k]] = avg_rank * scale - 0.5;
    lo = hi + 1;
  }
  return out;
}

GaussianParamDist sgd_step(const GaussianParamDist& dist, const MetaGradients& grads,
                           double lr_mu, double lr_sigma) {
  if (lr_mu < 0.0 || lr_sigma < 0.0) throw InvalidArgument("learning rates must be >= 0");
  if (grads.grad_mu.size() != dist.size() || grads.grad_sigma.size() != dist.size()) {
    throw InvalidArgument("gradient length does not match the distribution");
  }
  if (!all_finite(grads.grad_mu) || !all_finite(grads.grad_sigma)) {
    throw NumericFailure("non-finite meta gradient");
  }
  std::vector<double> mu(dist.mu().values().begin(), dist.mu().values().end());
  std::vector<double> sigma(dist.sigma().begin(), dist.sigma().end());
  for (std::size_t j = 0; j < mu.size(); ++j) {
    mu[j] += lr_mu * grads.grad_mu[j];
    sigma[j] = std::clamp(sigma[j] + lr_sigma * grads.grad_sigma[j], dist.bounds().min,
                          dist.bounds().max);
  }
  if (!all_finite(mu)) throw NumericFailure("non-finite mean after update");
  return GaussianParamDist(nn::FlatParams(dist.layout_ptr(), std::move(mu)), std::move(sigma),
                           dist.bounds());
}

}  // namespace esmeta
