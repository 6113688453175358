#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "stepdad/rng.hpp"
#include "stepdad/tensor.hpp"

namespace stepdad {

enum class Activation { kIdentity, kRelu, kSoftplus, kSigmoid };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Fully connected layer: weight (out x in), bias (out), optional per-row
/// layer normalization applied before the activation.
struct DenseLayer {
  Tensor weight;
  Tensor bias;
  Activation activation = Activation::kIdentity;
  bool layer_norm = false;
  Tensor ln_gain;
  Tensor ln_bias;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

inline constexpr double kLayerNormEps = 1e-5;

struct LayerSpec {
  std::size_t width;
  Activation activation = Activation::kIdentity;
  bool layer_norm = false;
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  /// Weights and biases uniform in +-1/sqrt(fan_in).
  static MlpParams build(std::size_t in_dim, const std::vector<LayerSpec>& specs, Rng& rng);

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  std::size_t parameter_count() const;

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  /// Names parallel to tensors(), e.g. "decoder.1.weight".
  std::vector<std::string> tensor_names(const std::string& prefix) const;

  /// Same architecture, every parameter zero.
  MlpParams zeros_like() const;
};

/// Forward record. values[0] is the input; each layer appends its affine
/// pre-activation, then the normalized pre-activation when the layer uses
/// layer norm, then its post-activation. values.back() is the output.
struct MlpTrace {
  std::vector<Tensor> values;
  const Tensor& output() const { return values.back(); }
};

/// Batched forward pass over rows of `input` (batch x in).
MlpTrace mlp_forward(const MlpParams& params, const Tensor& input);

/// Reverse-mode pass for <output, out_grad>. Parameter gradients are added
/// into `param_grads` (which must share the architecture); the input
/// gradient is written to `input_grad` when non-null.
void mlp_backward(const MlpParams& params, const MlpTrace& trace, const Tensor& out_grad,
                  MlpParams& param_grads, Tensor* input_grad);

struct MlpGradients {
  MlpParams params;
  Tensor input;
};
MlpGradients mlp_backward(const MlpParams& params, const MlpTrace& trace, const Tensor& out_grad);

double apply_activation(Activation a, double x);
double activation_derivative(Activation a, double pre);

double softplus(double x);
double sigmoid(double x);

}  // namespace stepdad
