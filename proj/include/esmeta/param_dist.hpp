#ifndef ESMETA_PARAM_DIST_HPP_
#define ESMETA_PARAM_DIST_HPP_

// The meta-model: a diagonal Gaussian over a network's flat parameters,
// seed-keyed sampling, and the search-gradient estimators for (mu, sigma).

#include <cstdint>
#include <span>
#include <vector>

#include "esmeta/nn.hpp"

namespace esmeta {

struct SigmaBounds {
  double min = 1e-4;
  double max = 1.0;
};

class GaussianParamDist {
 public:
  // Broadcasts sigma_init to every coordinate.
  GaussianParamDist(nn::FlatParams mu, double sigma_init, SigmaBounds bounds = {});
  // Throws InvalidArgument on length mismatch or sigma outside bounds.
  GaussianParamDist(nn::FlatParams mu, std::vector<double> sigma, SigmaBounds bounds = {});

  const nn::FlatParams& mu() const { return mu_; }
  std::span<const double> sigma() const { return sigma_; }
  const SigmaBounds& bounds() const { return bounds_; }
  const nn::NetLayout& layout() const { return mu_.layout(); }
  const nn::LayoutPtr& layout_ptr() const { return mu_.layout_ptr(); }
  std::size_t size() const { return sigma_.size(); }
  double sigma_mean() const;

  bool operator==(const GaussianParamDist& other) const {
    return mu_ == other.mu_ && sigma_ == other.sigma_;
  }

 private:
  nn::FlatParams mu_;
  std::vector<double> sigma_;
  SigmaBounds bounds_;
};

// Identifies one sampled parameter vector. master_seed is the per-iteration
// seed; worker and member index select the stream within it.
struct PerturbationSeed {
  std::uint32_t worker_index = 0;
  std::uint32_t member_index = 0;
  std::uint64_t master_seed = 0;

  std::uint64_t key() const;
  bool operator==(const PerturbationSeed&) const = default;
};

struct MetaGradients {
  std::vector<double> grad_mu;
  std::vector<double> grad_sigma;
};

// mu + sigma * eps with eps drawn from the stream keyed by `seed`.
nn::FlatParams sample(const GaussianParamDist& dist, const PerturbationSeed& seed);

struct KSamples {
  std::vector<nn::FlatParams> samples;
  nn::FlatParams mean;
};

// Throws InvalidArgument on empty or duplicated seeds.
KSamples sample_k_and_mean(const GaussianParamDist& dist, std::span<const PerturbationSeed> seeds);

// Streaming form of the search-gradient estimator: one add() per worker with
// that worker's samples and (shaped) fitness, then finish() divides by the
// number of workers added.
class NesAccumulator {
 public:
  explicit NesAccumulator(const GaussianParamDist& dist);

  // Adds fitness * sum_j d log N(theta_j) / d(mu, sigma) over the worker's samples.
  void add(std::span<const nn::FlatParams> worker_samples, double fitness);
  void add(const nn::FlatParams& sample, double fitness) { add(std::span(&sample, 1), fitness); }
  // Adds another accumulator's sums. Merging per-worker accumulators in a
  // fixed order gives results independent of how workers were scheduled.
  void merge(const NesAccumulator& other);
  std::size_t workers() const { return workers_; }
  MetaGradients finish() const;

 private:
  const GaussianParamDist* dist_;
  std::vector<double> grad_mu_;
  std::vector<double> grad_sigma_;
  std::size_t workers_ = 0;
};

// Actor estimator: one list of K samples per worker, one fitness per worker.
MetaGradients nes_gradient_actor(std::span<const std::vector<nn::FlatParams>> worker_samples,
                                 std::span<const double> fitness, const GaussianParamDist& dist);
// Critic estimator: a single sample per worker.
MetaGradients nes_gradient_critic(std::span<const nn::FlatParams> samples,
                                  std::span<const double> fitness, const GaussianParamDist& dist);

enum class FitnessShaping { kNone, kCenteredRank };

// kCenteredRank maps ranks linearly onto [-0.5, 0.5]; tied values share the
// average of their ranks.
std::vector<double> shape_fitness(std::span<const double> raw, FitnessShaping mode);

// Gradient ascent: mu += lr_mu * grad_mu, sigma = clamp(sigma + lr_sigma * grad_sigma).
// Throws NumericFailure on non-finite gradients or results.
GaussianParamDist sgd_step(const GaussianParamDist& dist, const MetaGradients& grads,
                           double lr_mu, double lr_sigma);

}  // namespace esmeta

#endif  // ESMETA_PARAM_DIST_HPP_
