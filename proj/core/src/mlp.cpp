#include "stepdad/mlp.hpp"

#include <cmath>

#include "stepdad/errors.hpp"

namespace stepdad {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSoftplus: return "softplus";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "softplus") return Activation::kSoftplus;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::kIdentity: return x;
    case Activation::kRelu: return x > 0 ? x : 0.0;
    case Activation::kSoftplus: return softplus(x);
    case Activation::kSigmoid: return sigmoid(x);
  }
  return x;
}

double activation_derivative(Activation a, double pre) {
  switch (a) {
    case Activation::kIdentity: return 1.0;
    case Activation::kRelu: return pre > 0 ? 1.0 : 0.0;
    case Activation::kSoftplus: return sigmoid(pre);
    case Activation::kSigmoid: {
      const double s = sigmoid(pre);
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

MlpParams MlpParams::build(std::size_t in_dim, const std::vector<LayerSpec>& specs, Rng& rng) {
  MlpParams p;
  std::size_t fan_in = in_dim;
  for (const auto& spec : specs) {
    DenseLayer layer;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    layer.weight = Tensor::matrix(spec.width, fan_in);
    layer.bias = Tensor::vector(spec.width);
    for (double& w : layer.weight.values()) w = bound * (2.0 * rng.uniform() - 1.0);
    for (double& b : layer.bias.values()) b = bound * (2.0 * rng.uniform() - 1.0);
    layer.activation = spec.activation;
    layer.layer_norm = spec.layer_norm;
    if (spec.layer_norm) {
      layer.ln_gain = Tensor::vector(spec.width, 1.0);
      layer.ln_bias = Tensor::vector(spec.width, 0.0);
    }
    p.layers.push_back(std::move(layer));
    fan_in = spec.width;
  }
  return p;
}

std::size_t MlpParams::in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
std::size_t MlpParams::out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

std::vector<Tensor*> MlpParams::tensors() {
  std::vector<Tensor*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
    if (l.layer_norm) {
      out.push_back(&l.ln_gain);
      out.push_back(&l.ln_bias);
    }
  }
  return out;
}

std::vector<const Tensor*> MlpParams::tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
    if (l.layer_norm) {
      out.push_back(&l.ln_gain);
      out.push_back(&l.ln_bias);
    }
  }
  return out;
}

std::vector<std::string> MlpParams::tensor_names(const std::string& prefix) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i) + ".";
    out.push_back(base + "weight");
    out.push_back(base + "bias");
    if (layers[i].layer_norm) {
      out.push_back(base + "ln_gain");
      out.push_back(base + "ln_bias");
    }
  }
  return out;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z = *this;
  for (Tensor* t : z.tensors()) t->fill(0.0);
  return z;
}

namespace {

// y(b, o) = bias(o) + sum_i W(o, i) x(b, i), accumulated in ascending i.
// Works on the transposed input so the innermost loop runs over the batch.
Tensor affine_forward(const DenseLayer& layer, const Tensor& x) {
  const std::size_t batch = x.rows(), in = layer.in_dim(), out = layer.out_dim();
  const Tensor xt = transpose(x);
  Tensor yt = Tensor::matrix(out, batch);
  for (std::size_t o = 0; o < out; ++o) {
    double* y = yt.data() + o * batch;
    const double bo = layer.bias[o];
    for (std::size_t b = 0; b < batch; ++b) y[b] = bo;
    const double* w = layer.weight.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) {
      const double wi = w[i];
      const double* xi = xt.data() + i * batch;
      for (std::size_t b = 0; b < batch; ++b) y[b] += wi * xi[b];
    }
  }
  return transpose(yt);
}

// Fixed-order dot product with four interleaved partial sums so the loop
// vectorizes without reassociation flags.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

struct RowStats {
  double mean;
  double inv_std;
};

RowStats row_stats(std::span<const double> z) {
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= static_cast<double>(z.size());
  return {mean, 1.0 / std::sqrt(var + kLayerNormEps)};
}

}  // namespace

MlpTrace mlp_forward(const MlpParams& params, const Tensor& input) {
  if (params.layers.empty()) throw DimensionError("mlp_forward: network has no layers");
  if (input.rank() != 2) {
    throw DimensionError("mlp_forward: input must be batch x in, got " + shape_string(input.shape()));
  }
  MlpTrace trace;
  trace.values.reserve(1 + 3 * params.layers.size());
  trace.values.push_back(input);
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const DenseLayer& layer = params.layers[li];
    const Tensor& x = trace.values.back();
    if (x.cols() != layer.in_dim()) {
      throw DimensionError("mlp_forward: layer " + std::to_string(li) + " expects width " +
                           std::to_string(layer.in_dim()) + ", got " + std::to_string(x.cols()));
    }
    Tensor z = affine_forward(layer, x);
    trace.values.push_back(z);
    Tensor a = z;
    if (layer.layer_norm) {
      Tensor xhat = z;
      for (std::size_t b = 0; b < z.rows(); ++b) {
        const RowStats s = row_stats(z.row(b));
        auto row = xhat.row(b);
        auto arow = a.row(b);
        for (std::size_t o = 0; o < row.size(); ++o) {
          row[o] = (row[o] - s.mean) * s.inv_std;
          arow[o] = apply_activation(layer.activation, layer.ln_gain[o] * row[o] + layer.ln_bias[o]);
        }
      }
      trace.values.push_back(std::move(xhat));
    } else if (layer.activation != Activation::kIdentity) {
      for (double& v : a.values()) v = apply_activation(layer.activation, v);
    }
    trace.values.push_back(std::move(a));
  }
  return trace;
}

void mlp_backward(const MlpParams& params, const MlpTrace& trace, const Tensor& out_grad,
                  MlpParams& param_grads, Tensor* input_grad) {
  std::size_t expected = 1;
  for (const auto& l : params.layers) expected += l.layer_norm ? 3 : 2;
  if (trace.values.size() != expected || param_grads.layers.size() != params.layers.size()) {
    throw DimensionError("mlp_backward: trace or gradient buffers do not match the network");
  }
  if (!out_grad.same_shape(trace.output())) {
    throw DimensionError("mlp_backward: out_grad shape " + shape_string(out_grad.shape()) +
                         " does not match output " + shape_string(trace.output().shape()));
  }

  Tensor grad = out_grad;  // gradient w.r.t. the current layer's output
  std::size_t pos = trace.values.size() - 1;
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const DenseLayer& layer = params.layers[li];
    DenseLayer& g = param_grads.layers[li];
    const std::size_t batch = grad.rows(), out = layer.out_dim(), in = layer.in_dim();

    --pos;  // now at xhat (layer norm) or z
    Tensor dz = grad;
    if (layer.layer_norm) {
      const Tensor& xhat = trace.values[pos];
      --pos;  // z
      for (std::size_t b = 0; b < batch; ++b) {
        const RowStats s = row_stats(trace.values[pos].row(b));
        auto xrow = xhat.row(b);
        auto drow = dz.row(b);
        double mean_dx = 0.0, mean_dx_x = 0.0;
        for (std::size_t o = 0; o < out; ++o) {
          const double u = layer.ln_gain[o] * xrow[o] + layer.ln_bias[o];
          const double du = grad(b, o) * activation_derivative(layer.activation, u);
          g.ln_gain[o] += du * xrow[o];
          g.ln_bias[o] += du;
          drow[o] = du * layer.ln_gain[o];
          mean_dx += drow[o];
          mean_dx_x += drow[o] * xrow[o];
        }
        mean_dx /= static_cast<double>(out);
        mean_dx_x /= static_cast<double>(out);
        for (std::size_t o = 0; o < out; ++o) {
          drow[o] = s.inv_std * (drow[o] - mean_dx - xrow[o] * mean_dx_x);
        }
      }
    } else if (layer.activation != Activation::kIdentity) {
      const Tensor& z = trace.values[pos];
      for (std::size_t k = 0; k < dz.size(); ++k) dz[k] *= activation_derivative(layer.activation, z[k]);
    }
    --pos;  // layer input
    const Tensor& x = trace.values[pos];

    // Weight gradients as dot products over the batch on transposed copies.
    const Tensor dzt = transpose(dz);
    const Tensor xt = transpose(x);
    for (std::size_t o = 0; o < out; ++o) {
      const double* dzo = dzt.data() + o * batch;
      double bsum = 0.0;
      for (std::size_t b = 0; b < batch; ++b) bsum += dzo[b];
      g.bias[o] += bsum;
      double* gw = g.weight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gw[i] += dot(dzo, xt.data() + i * batch, batch);
      }
    }

    if (li == 0 && input_grad == nullptr) break;
    Tensor dxt = Tensor::matrix(in, batch);
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = layer.weight.data() + o * in;
      const double* dzo = dzt.data() + o * batch;
      for (std::size_t i = 0; i < in; ++i) {
        const double wi = w[i];
        if (wi == 0.0) continue;
        double* dxi = dxt.data() + i * batch;
        for (std::size_t b = 0; b < batch; ++b) dxi[b] += wi * dzo[b];
      }
    }
    grad = transpose(dxt);
  }
  if (input_grad != nullptr) *input_grad = std::move(grad);
}

MlpGradients mlp_backward(const MlpParams& params, const MlpTrace& trace, const Tensor& out_grad) {
  MlpGradients g{params.zeros_like(), {}};
  mlp_backward(params, trace, out_grad, g.params, &g.input);
  return g;
}

}  // namespace stepdad
