#ifndef ESMETA_NN_HPP_
#define ESMETA_NN_HPP_

// Fixed-architecture actor and critic MLPs with hand-written backward passes.
//
// Parameters live in one flat vector so the evolution-strategies code can
// treat a network as a point in R^n. Per layer the flat layout is the weight
// matrix in row-major [output][input] order followed by the bias vector.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "esmeta/rng.hpp"

namespace esmeta::nn {

enum class Activation { kRelu, kTanh, kIdentity };

struct LayerSpec {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::kIdentity;

  bool operator==(const LayerSpec&) const = default;
};

class NetLayout {
 public:
  // Throws InvalidArgument if dims are zero or do not chain. When
  // action_injection is set, that layer's input is the previous layer's
  // output concatenated with an action of length action_dim.
  NetLayout(std::vector<LayerSpec> layers,
            std::optional<std::size_t> action_injection = std::nullopt,
            std::size_t action_dim = 0);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::optional<std::size_t> action_injection() const { return action_injection_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t input_dim() const { return layers_.front().input_dim; }
  std::size_t output_dim() const { return layers_.back().output_dim; }
  std::size_t total_params() const { return total_params_; }
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + layers_[layer].input_dim * layers_[layer].output_dim;
  }

  bool operator==(const NetLayout& other) const {
    return layers_ == other.layers_ && action_injection_ == other.action_injection_ &&
           action_dim_ == other.action_dim_;
  }

 private:
  std::vector<LayerSpec> layers_;
  std::optional<std::size_t> action_injection_;
  std::size_t action_dim_ = 0;
  std::vector<std::size_t> offsets_;
  std::size_t total_params_ = 0;
};

using LayoutPtr = std::shared_ptr<const NetLayout>;

// obs -> hidden (relu) -> hidden (relu) -> action (tanh)
NetLayout build_actor_layout(std::size_t obs_dim, std::size_t action_dim, std::size_t hidden);
// obs -> hidden (relu) -> [hidden ++ action] -> hidden (relu) -> 1 (identity)
NetLayout build_critic_layout(std::size_t obs_dim, std::size_t action_dim, std::size_t hidden);

class FlatParams {
 public:
  // Zero-initialized parameters for the layout.
  explicit FlatParams(LayoutPtr layout);
  // Throws InvalidArgument on a length mismatch or a non-finite value.
  FlatParams(LayoutPtr layout, std::vector<double> values);

  const NetLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool operator==(const FlatParams& other) const {
    return *layout_ == *other.layout_ && values_ == other.values_;
  }

 private:
  LayoutPtr layout_;
  std::vector<double> values_;
};

// Structured per-layer view of a FlatParams, used for (de)serialization.
struct LayerParams {
  std::vector<double> weights;  // row-major [output][input]
  std::vector<double> bias;

  bool operator==(const LayerParams&) const = default;
};

std::vector<LayerParams> unflatten(const FlatParams& params);
FlatParams flatten(LayoutPtr layout, std::span<const LayerParams> layers);

// Glorot-uniform weights in (-L, L), L = sqrt(6 / (fan_in + fan_out)); zero biases.
FlatParams xavier_init(LayoutPtr layout, Rng& rng);

std::vector<double> actor_forward(const FlatParams& params, std::span<const double> obs);
double critic_forward(const FlatParams& params, std::span<const double> obs,
                      std::span<const double> action);

struct BackpropResult {
  std::vector<double> param_grads;
  std::vector<double> input_grads;  // d(upstream * q) / d(action) for the critic
};

BackpropResult critic_backward(const FlatParams& params, std::span<const double> obs,
                               std::span<const double> action, double upstream);

// Gradient of dot(upstream_action_grad, actor_forward(params, obs)) w.r.t. params.
std::vector<double> actor_backward(const FlatParams& params, std::span<const double> obs,
                                   std::span<const double> upstream_action_grad);

// Accumulating variants for batched updates: add into param_grads (and
// action_grads when non-empty) instead of allocating. Returns the forward value.
double critic_backward_accumulate(const FlatParams& params, std::span<const double> obs,
                                  std::span<const double> action, double upstream,
                                  std::span<double> param_grads,
                                  std::span<double> action_grads);
void actor_backward_accumulate(const FlatParams& params, std::span<const double> obs,
                               std::span<const double> upstream_action_grad,
                               std::span<double> param_grads);

}  // namespace esmeta::nn

#endif  // ESMETA_NN_HPP_
