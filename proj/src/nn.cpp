#include "esmeta/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "esmeta/errors.hpp"

namespace esmeta::nn {

namespace {

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw InvalidArgument(std::string(what) + ": expected length " + std::to_string(want) +
                          ", got " + std::to_string(got));
  }
}

double activate(Activation act, double z) {
  switch (act) {
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kTanh: return std::tanh(z);
    case Activation::kIdentity: return z;
  }
  return z;
}

// Derivative expressed through the activation output.
double activation_slope(Activation act, double out) {
  switch (act) {
    case Activation::kRelu: return out > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: return 1.0 - out * out;
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

// Per-layer inputs and outputs of one forward pass. Reused per thread so the
// hot loops in rollouts and batched updates do not allocate.
struct Trace {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> outputs;
  std::vector<double> delta;
  std::vector<double> upstream;
};

Trace& thread_trace() {
  thread_local Trace trace;
  return trace;
}

void forward_trace(const FlatParams& params, std::span<const double> obs,
                   std::span<const double> action, Trace& trace) {
  const NetLayout& layout = params.layout();
  const auto& layers = layout.layers();
  const auto injection = layout.action_injection();
  const std::span<const double> theta = params.values();

  trace.inputs.resize(layers.size());
  trace.outputs.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& spec = layers[l];
    std::vector<double>& in = trace.inputs[l];
    if (l == 0) {
      in.assign(obs.begin(), obs.end());
    } else {
      in.assign(trace.outputs[l - 1].begin(), trace.outputs[l - 1].end());
    }
    if (injection && *injection == l) in.insert(in.end(), action.begin(), action.end());

    std::vector<double>& out = trace.outputs[l];
    out.resize(spec.output_dim);
    const double* w = theta.data() + layout.weight_offset(l);
    const double* b = theta.data() + layout.bias_offset(l);
    for (std::size_t o = 0; o < spec.output_dim; ++o) {
      const double* row = w + o * spec.input_dim;
      double z = b[o];
      for (std::size_t i = 0; i < spec.input_dim; ++i) z += row[i] * in[i];
      out[o] = activate(spec.activation, z);
    }
  }
}

// Backpropagates `upstream` (gradient w.r.t. the network output) through a
// recorded trace. Adds parameter gradients into param_grads and, if
// action_grads is non-empty, the gradient w.r.t. the injected action.
void backward_trace(const FlatParams& params, Trace& trace, std::span<const double> upstream,
                    std::span<double> param_grads, std::span<double> action_grads) {
  const NetLayout& layout = params.layout();
  const auto& layers = layout.layers();
  const auto injection = layout.action_injection();
  const std::span<const double> theta = params.values();

  std::vector<double>& grad_out = trace.upstream;
  grad_out.assign(upstream.begin(), upstream.end());
  std::vector<double>& delta = trace.delta;

  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerSpec& spec = layers[l];
    const std::vector<double>& in = trace.inputs[l];
    const std::vector<double>& out = trace.outputs[l];
    delta.resize(spec.output_dim);
    for (std::size_t o = 0; o < spec.output_dim; ++o) {
      delta[o] = grad_out[o] * activation_slope(spec.activation, out[o]);
    }

    const std::size_t w_off = layout.weight_offset(l);
    const std::size_t b_off = layout.bias_offset(l);
    for (std::size_t o = 0; o < spec.output_dim; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* gw = param_grads.data() + w_off + o * spec.input_dim;
      for (std::size_t i = 0; i < spec.input_dim; ++i) gw[i] += d * in[i];
      param_grads[b_off + o] += d;
    }

    const bool need_input_grad = l > 0 || (injection && *injection == 0 && !action_grads.empty());
    if (!need_input_grad) break;

    const double* w = theta.data() + w_off;
    std::vector<double> grad_in(spec.input_dim, 0.0);
    for (std::size_t o = 0; o < spec.output_dim; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * spec.input_dim;
      for (std::size_t i = 0; i < spec.input_dim; ++i) grad_in[i] += row[i] * d;
    }
    if (injection && *injection == l) {
      const std::size_t hidden_part = spec.input_dim - layout.action_dim();
      if (!action_grads.empty()) {
        for (std::size_t k = 0; k < layout.action_dim(); ++k) {
          action_grads[k] += grad_in[hidden_part + k];
        }
      }
      grad_in.resize(hidden_part);
    }
    grad_out = std::move(grad_in);
  }
}

void check_inputs(const FlatParams& params, std::span<const double> obs,
                  std::span<const double> action) {
  const NetLayout& layout = params.layout();
  check_dim(obs.size(), layout.input_dim(), "observation");
  check_dim(action.size(), layout.action_injection() ? layout.action_dim() : 0, "action");
}

}  // namespace

NetLayout::NetLayout(std::vector<LayerSpec> layers, std::optional<std::size_t> action_injection,
                     std::size_t action_dim)
    : layers_(std::move(layers)), action_injection_(action_injection), action_dim_(action_dim) {
  if (layers_.empty()) throw InvalidArgument("layout needs at least one layer");
  if (action_injection_) {
    if (*action_injection_ >= layers_.size()) throw InvalidArgument("injection index out of range");
    if (action_dim_ == 0) throw InvalidArgument("action injection requires action_dim >= 1");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerSpec& spec = layers_[l];
    if (spec.input_dim == 0 || spec.output_dim == 0) {
      throw InvalidArgument("layer " + std::to_string(l) + " has a zero dimension");
    }
    if (l > 0) {
      std::size_t expected = layers_[l - 1].output_dim;
      if (action_injection_ && *action_injection_ == l) expected += action_dim_;
      if (spec.input_dim != expected) {
        throw InvalidArgument("layer " + std::to_string(l) + " input does not chain");
      }
    } else if (action_injection_ && *action_injection_ == 0 && spec.input_dim <= action_dim_) {
      throw InvalidArgument("first layer too narrow for injected action");
    }
    offsets_.push_back(offset);
    offset += spec.input_dim * spec.output_dim + spec.output_dim;
  }
  total_params_ = offset;
}

NetLayout build_actor_layout(std::size_t obs_dim, std::size_t action_dim, std::size_t hidden) {
  if (obs_dim == 0 || action_dim == 0 || hidden == 0) {
    throw InvalidArgument("actor layout dims must be >= 1");
  }
  return NetLayout({{obs_dim, hidden, Activation::kRelu},
                    {hidden, hidden, Activation::kRelu},
                    {hidden, action_dim, Activation::kTanh}});
}

NetLayout build_critic_layout(std::size_t obs_dim, std::size_t action_dim, std::size_t hidden) {
  if (obs_dim == 0 || action_dim == 0 || hidden == 0) {
    throw InvalidArgument("critic layout dims must be >= 1");
  }
  return NetLayout({{obs_dim, hidden, Activation::kRelu},
                    {hidden + action_dim, hidden, Activation::kRelu},
                    {hidden, 1, Activation::kIdentity}},
                   1, action_dim);
}

FlatParams::FlatParams(LayoutPtr layout)
    : layout_(std::move(layout)), values_(layout_->total_params(), 0.0) {}

FlatParams::FlatParams(LayoutPtr layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  check_dim(values_.size(), layout_->total_params(), "flat params");
  if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
    throw InvalidArgument("flat params contain a non-finite value");
  }
}

std::vector<LayerParams> unflatten(const FlatParams& params) {
  const NetLayout& layout = params.layout();
  const auto v = params.values();
  std::vector<LayerParams> out;
  for (std::size_t l = 0; l < layout.layers().size(); ++l) {
    const LayerSpec& spec = layout.layers()[l];
    const auto w = v.subspan(layout.weight_offset(l), spec.input_dim * spec.output_dim);
    const auto b = v.subspan(layout.bias_offset(l), spec.output_dim);
    out.push_back({{w.begin(), w.end()}, {b.begin(), b.end()}});
  }
  return out;
}

FlatParams flatten(LayoutPtr layout, std::span<const LayerParams> layers) {
  check_dim(layers.size(), layout->layers().size(), "layer count");
  std::vector<double> values;
  values.reserve(layout->total_params());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& spec = layout->layers()[l];
    check_dim(layers[l].weights.size(), spec.input_dim * spec.output_dim, "layer weights");
    check_dim(layers[l].bias.size(), spec.output_dim, "layer bias");
    values.insert(values.end(), layers[l].weights.begin(), layers[l].weights.end());
    values.insert(values.end(), layers[l].bias.begin(), layers[l].bias.end());
  }
  return FlatParams(std::move(layout), std::move(values));
}

FlatParams xavier_init(LayoutPtr layout, Rng& rng) {
  FlatParams params(layout);
  for (std::size_t l = 0; l < layout->layers().size(); ++l) {
    const LayerSpec& spec = layout->layers()[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(spec.input_dim + spec.output_dim));
    const std::size_t off = layout->weight_offset(l);
    for (std::size_t k = 0; k < spec.input_dim * spec.output_dim; ++k) {
      // uniform() is in [0, 1); reject the single point that maps to -limit.
      double w;
      do {
        w = rng.uniform(-limit, limit);
      } while (w == -limit);
      params[off + k] = w;
    }
  }
  return params;
}

std::vector<double> actor_forward(const FlatParams& params, std::span<const double> obs) {
  check_inputs(params, obs, {});
  Trace& trace = thread_trace();
  forward_trace(params, obs, {}, trace);
  return trace.outputs.back();
}

double critic_forward(const FlatParams& params, std::span<const double> obs,
                      std::span<const double> action) {
  check_inputs(params, obs, action);
  check_dim(params.layout().output_dim(), 1, "critic output");
  Trace& trace = thread_trace();
  forward_trace(params, obs, action, trace);
  return trace.outputs.back()[0];
}

double critic_backward_accumulate(const FlatParams& params, std::span<const double> obs,
                                  std::span<const double> action, double upstream,
                                  std::span<double> param_grads,
                                  std::span<double> action_grads) {
  check_inputs(params, obs, action);
  check_dim(params.layout().output_dim(), 1, "critic output");
  check_dim(param_grads.size(), params.size(), "param grads");
  if (!action_grads.empty()) check_dim(action_grads.size(), action.size(), "action grads");
  Trace& trace = thread_trace();
  forward_trace(params, obs, action, trace);
  const double q = trace.outputs.back()[0];
  const double up[1] = {upstream};
  backward_trace(params, trace, up, param_grads, action_grads);
  return q;
}

void actor_backward_accumulate(const FlatParams& params, std::span<const double> obs,
                               std::span<const double> upstream_action_grad,
                               std::span<double> param_grads) {
  check_inputs(params, obs, {});
  check_dim(upstream_action_grad.size(), params.layout().output_dim(), "upstream action grad");
  check_dim(param_grads.size(), params.size(), "param grads");
  Trace& trace = thread_trace();
  forward_trace(params, obs, {}, trace);
  backward_trace(params, trace, upstream_action_grad, param_grads, {});
}

BackpropResult critic_backward(const FlatParams& params, std::span<const double> obs,
                               std::span<const double> action, double upstream) {
  BackpropResult result{std::vector<double>(params.size(), 0.0),
                        std::vector<double>(action.size(), 0.0)};
  critic_backward_accumulate(params, obs, action, upstream, result.param_grads,
                             result.input_grads);
  return result;
}

std::vector<double> actor_backward(const FlatParams& params, std::span<const double> obs,
                                   std::span<const double> upstream_action_grad) {
  std::vector<double> grads(params.size(), 0.0);
  actor_backward_accumulate(params, obs, upstream_action_grad, grads);
  return grads;
}

}  // namespace esmeta::nn
