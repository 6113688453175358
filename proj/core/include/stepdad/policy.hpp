#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepdad/history.hpp"
#include "stepdad/mlp.hpp"
#include "stepdad/model.hpp"

namespace stepdad {

/// plain: one encoder over [raw design, outcome].
/// gated: trunk over the raw design, two heads mixed by a binary outcome
///        (y * H + (1 - y) * H').
/// split: separate layer-normed design and outcome embeddings, concatenated
///        and passed through the encoder.
enum class PolicyKind { kPlain, kGated, kSplit };

std::string_view to_string(PolicyKind k);
PolicyKind policy_kind_from_string(std::string_view s);

struct PolicySpec {
  PolicyKind kind = PolicyKind::kPlain;
  std::vector<std::size_t> encoder_hidden{64, 256};
  std::size_t representation = 16;
  std::vector<std::size_t> decoder_hidden{128, 16};
  Activation activation = Activation::kRelu;
  std::size_t embed_width = 32;  // split only

  nlohmann::json to_json() const;
  /// Keys absent from `j` keep the values in `defaults`.
  static PolicySpec from_json(const nlohmann::json& j, const PolicySpec& defaults);
};

/// Architecture tables per model; toy and linear-Gaussian get small plain nets.
PolicySpec default_policy_spec(const Model& model);

struct PolicyParams {
  PolicySpec spec;
  std::size_t design_dim = 0;
  MlpParams design_embed;   // split
  MlpParams outcome_embed;  // split
  MlpParams encoder;        // plain: whole encoder; gated: trunk; split: post-embedding
  MlpParams head_one;       // gated
  MlpParams head_zero;      // gated
  MlpParams decoder;

  static PolicyParams build(const PolicySpec& spec, std::size_t design_dim, Rng& rng);

  std::size_t representation_dim() const { return spec.representation; }
  std::size_t parameter_count() const;
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  std::vector<std::string> tensor_names() const;
  /// Tensors belonging to the history encoder (everything but the decoder).
  std::vector<bool> encoder_mask() const;
  PolicyParams zeros_like() const;
  /// FNV-1a over the parameter bytes; detects stale forward records.
  std::uint64_t fingerprint() const;
};

/// Batched per-pair encoder record.
struct PairTrace {
  MlpTrace design_embed, outcome_embed, encoder, head_one, head_zero;
  std::vector<double> outcomes;
  Tensor output;  // batch x representation
};

PairTrace encode_pairs(const PolicyParams& p, const Tensor& raw_designs, std::span<const double> outcomes);
/// Adds parameter gradients into `grads`; writes design/outcome input
/// gradients when the targets are non-null / non-empty.
void encode_pairs_backward(const PolicyParams& p, const PairTrace& trace, const Tensor& out_grad, PolicyParams& grads,
                           Tensor* d_designs, std::span<double> d_outcomes);

MlpTrace decode(const PolicyParams& p, const Tensor& pooled);
void decode_backward(const PolicyParams& p, const MlpTrace& trace, const Tensor& out_grad, PolicyParams& grads,
                     Tensor* d_pooled);

/// R(h): sum of per-pair encodings in sequence order; zero for h = empty.
Tensor encode_history(const PolicyParams& p, const History& history);
RawDesign next_design(const PolicyParams& p, const History& history);

struct PolicyForward {
  std::uint64_t fingerprint = 0;
  std::size_t pairs = 0;
  PairTrace pair_trace;
  MlpTrace decoder;
  RawDesign design;
};

struct PolicyBackward {
  PolicyParams grads;
  Tensor pair_design_grads;  // t x design_dim (raw designs)
  std::vector<double> pair_outcome_grads;
};

PolicyForward policy_forward(const PolicyParams& p, const History& history);
/// Throws NumericError when `forward` was recorded with different parameters.
PolicyBackward policy_backward(const PolicyParams& p, const PolicyForward& forward, std::span<const double> design_grad);

void save_policy(const std::filesystem::path& path, const PolicyParams& p, nlohmann::json metadata = nlohmann::json::object());
PolicyParams load_policy(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

}  // namespace stepdad
