#include "stepdad/policy.hpp"

#include <cstring>

#include "json_fields.hpp"
#include "stepdad/checkpoint.hpp"
#include "stepdad/errors.hpp"

namespace stepdad {

std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::kPlain: return "plain";
    case PolicyKind::kGated: return "gated";
    case PolicyKind::kSplit: return "split";
  }
  return "plain";
}

PolicyKind policy_kind_from_string(std::string_view s) {
  if (s == "plain") return PolicyKind::kPlain;
  if (s == "gated") return PolicyKind::kGated;
  if (s == "split") return PolicyKind::kSplit;
  throw ConfigError("unknown policy architecture '" + std::string(s) + "' (plain, gated, split)");
}

nlohmann::json PolicySpec::to_json() const {
  return {{"architecture", std::string(to_string(kind))},
          {"encoder_hidden", encoder_hidden},
          {"representation", representation},
          {"decoder_hidden", decoder_hidden},
          {"activation", std::string(stepdad::to_string(activation))},
          {"embed_width", embed_width}};
}

PolicySpec PolicySpec::from_json(const nlohmann::json& j, const PolicySpec& defaults) {
  const std::string ctx = "policy";
  detail::reject_unknown_keys(
      j, {"architecture", "encoder_hidden", "representation", "decoder_hidden", "activation", "embed_width"}, ctx);
  PolicySpec s = defaults;
  s.kind = policy_kind_from_string(detail::read_field(j, "architecture", std::string(to_string(s.kind)), ctx));
  s.encoder_hidden = detail::read_field(j, "encoder_hidden", s.encoder_hidden, ctx);
  s.representation = detail::read_field(j, "representation", s.representation, ctx);
  s.decoder_hidden = detail::read_field(j, "decoder_hidden", s.decoder_hidden, ctx);
  s.activation =
      activation_from_string(detail::read_field(j, "activation", std::string(stepdad::to_string(s.activation)), ctx));
  s.embed_width = detail::read_field(j, "embed_width", s.embed_width, ctx);
  detail::require(s.representation > 0, "policy.representation must be > 0");
  for (auto w : s.encoder_hidden) detail::require(w > 0, "policy.encoder_hidden widths must be > 0");
  for (auto w : s.decoder_hidden) detail::require(w > 0, "policy.decoder_hidden widths must be > 0");
  detail::require(s.kind != PolicyKind::kSplit || s.embed_width > 0, "policy.embed_width must be > 0");
  return s;
}

PolicySpec default_policy_spec(const Model& model) {
  PolicySpec s;
  const std::string name = model.name();
  if (name == "location-finding") return s;
  if (name == "hyperbolic-discounting") {
    s.kind = PolicyKind::kGated;
    s.encoder_hidden = {256, 256};
    s.decoder_hidden = {256, 256};
    s.activation = Activation::kSoftplus;
    return s;
  }
  if (name == "ces") {
    s.kind = PolicyKind::kSplit;
    s.embed_width = 32;
    s.encoder_hidden = {128};
    s.representation = 32;
    s.decoder_hidden = {128};
    return s;
  }
  s.encoder_hidden = {8};
  s.representation = 4;
  s.decoder_hidden = {8};
  return s;
}

PolicyParams PolicyParams::build(const PolicySpec& spec, std::size_t design_dim, Rng& rng) {
  PolicyParams p;
  p.spec = spec;
  p.design_dim = design_dim;
  const Activation act = spec.activation;
  std::vector<LayerSpec> enc;
  switch (spec.kind) {
    case PolicyKind::kPlain:
      for (auto w : spec.encoder_hidden) enc.push_back({w, act, false});
      enc.push_back({spec.representation, Activation::kIdentity, false});
      p.encoder = MlpParams::build(design_dim + 1, enc, rng);
      break;
    case PolicyKind::kGated: {
      for (auto w : spec.encoder_hidden) enc.push_back({w, act, false});
      std::size_t trunk_out = design_dim;
      if (!enc.empty()) {
        p.encoder = MlpParams::build(design_dim, enc, rng);
        trunk_out = spec.encoder_hidden.back();
      }
      p.head_one = MlpParams::build(trunk_out, {{spec.representation, Activation::kIdentity, false}}, rng);
      p.head_zero = MlpParams::build(trunk_out, {{spec.representation, Activation::kIdentity, false}}, rng);
      break;
    }
    case PolicyKind::kSplit:
      p.design_embed = MlpParams::build(design_dim, {{spec.embed_width, act, true}}, rng);
      p.outcome_embed = MlpParams::build(1, {{spec.embed_width, act, true}}, rng);
      for (auto w : spec.encoder_hidden) enc.push_back({w, act, true});
      enc.push_back({spec.representation, act, true});
      p.encoder = MlpParams::build(2 * spec.embed_width, enc, rng);
      break;
  }
  std::vector<LayerSpec> dec;
  for (auto w : spec.decoder_hidden) dec.push_back({w, act, false});
  dec.push_back({design_dim, Activation::kIdentity, false});
  p.decoder = MlpParams::build(spec.representation, dec, rng);
  return p;
}

namespace {

template <typename P, typename F>
void for_each_block(P& p, F&& f) {
  f(p.design_embed, "design_embed");
  f(p.outcome_embed, "outcome_embed");
  f(p.encoder, "encoder");
  f(p.head_one, "head_one");
  f(p.head_zero, "head_zero");
  f(p.decoder, "decoder");
}

}  // namespace

std::vector<Tensor*> PolicyParams::tensors() {
  std::vector<Tensor*> out;
  for_each_block(*this, [&](MlpParams& m, const char*) {
    for (Tensor* t : m.tensors()) out.push_back(t);
  });
  return out;
}

std::vector<const Tensor*> PolicyParams::tensors() const {
  std::vector<const Tensor*> out;
  for_each_block(*this, [&](const MlpParams& m, const char*) {
    for (const Tensor* t : m.tensors()) out.push_back(t);
  });
  return out;
}

std::vector<std::string> PolicyParams::tensor_names() const {
  std::vector<std::string> out;
  for_each_block(*this, [&](const MlpParams& m, const char* name) {
    for (auto& n : m.tensor_names(name)) out.push_back(n);
  });
  return out;
}

std::vector<bool> PolicyParams::encoder_mask() const {
  std::vector<bool> out;
  for_each_block(*this, [&](const MlpParams& m, const char* name) {
    for (std::size_t i = 0; i < m.tensors().size(); ++i) out.push_back(std::string(name) != "decoder");
  });
  return out;
}

std::size_t PolicyParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : tensors()) n += t->size();
  return n;
}

PolicyParams PolicyParams::zeros_like() const {
  PolicyParams z = *this;
  for (Tensor* t : z.tensors()) t->fill(0.0);
  return z;
}

std::uint64_t PolicyParams::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Tensor* t : tensors()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t->data());
    for (std::size_t i = 0; i < t->size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

PairTrace encode_pairs(const PolicyParams& p, const Tensor& raw, std::span<const double> y) {
  const std::size_t batch = raw.rows();
  if (raw.rank() != 2 || raw.cols() != p.design_dim || y.size() != batch) {
    throw DimensionError("encode_pairs: expected " + std::to_string(batch) + " x " + std::to_string(p.design_dim) +
                         " designs and matching outcomes, got " + shape_string(raw.shape()) + " and " +
                         std::to_string(y.size()) + " outcomes");
  }
  PairTrace tr;
  tr.outcomes.assign(y.begin(), y.end());
  switch (p.spec.kind) {
    case PolicyKind::kPlain: {
      Tensor in = Tensor::matrix(batch, p.design_dim + 1);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < p.design_dim; ++i) in(b, i) = raw(b, i);
        in(b, p.design_dim) = y[b];
      }
      tr.encoder = mlp_forward(p.encoder, in);
      tr.output = tr.encoder.output();
      break;
    }
    case PolicyKind::kGated: {
      const Tensor* trunk = &raw;
      if (!p.encoder.layers.empty()) {
        tr.encoder = mlp_forward(p.encoder, raw);
        trunk = &tr.encoder.output();
      }
      tr.head_one = mlp_forward(p.head_one, *trunk);
      tr.head_zero = mlp_forward(p.head_zero, *trunk);
      const Tensor& h1 = tr.head_one.output();
      const Tensor& h0 = tr.head_zero.output();
      tr.output = Tensor::matrix(batch, p.spec.representation);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < p.spec.representation; ++o) {
          tr.output(b, o) = y[b] * h1(b, o) + (1.0 - y[b]) * h0(b, o);
        }
      }
      break;
    }
    case PolicyKind::kSplit: {
      tr.design_embed = mlp_forward(p.design_embed, raw);
      Tensor yin = Tensor::matrix(batch, 1);
      for (std::size_t b = 0; b < batch; ++b) yin(b, 0) = y[b];
      tr.outcome_embed = mlp_forward(p.outcome_embed, yin);
      const std::size_t e = p.spec.embed_width;
      Tensor cat = Tensor::matrix(batch, 2 * e);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < e; ++i) {
          cat(b, i) = tr.design_embed.output()(b, i);
          cat(b, e + i) = tr.outcome_embed.output()(b, i);
        }
      }
      tr.encoder = mlp_forward(p.encoder, cat);
      tr.output = tr.encoder.output();
      break;
    }
  }
  return tr;
}

void encode_pairs_backward(const PolicyParams& p, const PairTrace& tr, const Tensor& g, PolicyParams& grads,
                           Tensor* d_designs, std::span<double> d_y) {
  const std::size_t batch = tr.output.rows();
  if (!g.same_shape(tr.output)) {
    throw DimensionError("encode_pairs_backward: gradient shape " + shape_string(g.shape()) + " vs output " +
                         shape_string(tr.output.shape()));
  }
  switch (p.spec.kind) {
    case PolicyKind::kPlain: {
      Tensor din;
      mlp_backward(p.encoder, tr.encoder, g, grads.encoder, (d_designs || !d_y.empty()) ? &din : nullptr);
      if (d_designs) {
        *d_designs = Tensor::matrix(batch, p.design_dim);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < p.design_dim; ++i) (*d_designs)(b, i) = din(b, i);
        }
      }
      if (!d_y.empty()) {
        for (std::size_t b = 0; b < batch; ++b) d_y[b] = din(b, p.design_dim);
      }
      break;
    }
    case PolicyKind::kGated: {
      const std::size_t r = p.spec.representation;
      Tensor g1 = Tensor::matrix(batch, r), g0 = Tensor::matrix(batch, r);
      const Tensor& h1 = tr.head_one.output();
      const Tensor& h0 = tr.head_zero.output();
      for (std::size_t b = 0; b < batch; ++b) {
        const double y = tr.outcomes[b];
        double dy = 0.0;
        for (std::size_t o = 0; o < r; ++o) {
          g1(b, o) = y * g(b, o);
          g0(b, o) = (1.0 - y) * g(b, o);
          dy += g(b, o) * (h1(b, o) - h0(b, o));
        }
        if (!d_y.empty()) d_y[b] = dy;
      }
      const bool has_trunk = !p.encoder.layers.empty();
      const bool need_input = has_trunk || d_designs;
      Tensor dt1, dt0;
      mlp_backward(p.head_one, tr.head_one, g1, grads.head_one, need_input ? &dt1 : nullptr);
      mlp_backward(p.head_zero, tr.head_zero, g0, grads.head_zero, need_input ? &dt0 : nullptr);
      if (!need_input) break;
      dt1 += dt0;
      if (has_trunk) {
        mlp_backward(p.encoder, tr.encoder, dt1, grads.encoder, d_designs);
      } else {
        *d_designs = std::move(dt1);
      }
      break;
    }
    case PolicyKind::kSplit: {
      const std::size_t e = p.spec.embed_width;
      Tensor dcat;
      mlp_backward(p.encoder, tr.encoder, g, grads.encoder, &dcat);
      Tensor dd = Tensor::matrix(batch, e), dy = Tensor::matrix(batch, e);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < e; ++i) {
          dd(b, i) = dcat(b, i);
          dy(b, i) = dcat(b, e + i);
        }
      }
      mlp_backward(p.design_embed, tr.design_embed, dd, grads.design_embed, d_designs);
      Tensor dyin;
      mlp_backward(p.outcome_embed, tr.outcome_embed, dy, grads.outcome_embed, d_y.empty() ? nullptr : &dyin);
      if (!d_y.empty()) {
        for (std::size_t b = 0; b < batch; ++b) d_y[b] = dyin(b, 0);
      }
      break;
    }
  }
}

MlpTrace decode(const PolicyParams& p, const Tensor& pooled) { return mlp_forward(p.decoder, pooled); }

void decode_backward(const PolicyParams& p, const MlpTrace& trace, const Tensor& g, PolicyParams& grads,
                     Tensor* d_pooled) {
  mlp_backward(p.decoder, trace, g, grads.decoder, d_pooled);
}

namespace {

void check_history(const PolicyParams& p, const History& h) {
  for (std::size_t t = 0; t < h.size(); ++t) {
    if (h[t].raw.values.size() != p.design_dim) {
      throw DimensionError("policy: history step " + std::to_string(t) + " has design width " +
                           std::to_string(h[t].raw.values.size()) + ", policy expects " +
                           std::to_string(p.design_dim));
    }
  }
}

Tensor history_designs(const PolicyParams& p, const History& h, std::vector<double>& y) {
  Tensor raw = Tensor::matrix(h.size(), p.design_dim);
  y.resize(h.size());
  for (std::size_t t = 0; t < h.size(); ++t) {
    for (std::size_t i = 0; i < p.design_dim; ++i) raw(t, i) = h[t].raw.values[i];
    y[t] = h[t].outcome.value;
  }
  return raw;
}

Tensor pool(const PolicyParams& p, const PairTrace* tr, std::size_t pairs) {
  Tensor r = Tensor::matrix(1, p.spec.representation);
  for (std::size_t t = 0; t < pairs; ++t) {
    for (std::size_t o = 0; o < p.spec.representation; ++o) r[o] += tr->output(t, o);
  }
  return r;
}

}  // namespace

Tensor encode_history(const PolicyParams& p, const History& history) {
  check_history(p, history);
  if (history.empty()) return Tensor::vector(p.spec.representation);
  std::vector<double> y;
  const Tensor raw = history_designs(p, history, y);
  const PairTrace tr = encode_pairs(p, raw, y);
  Tensor r = pool(p, &tr, history.size());
  return Tensor({p.spec.representation}, std::vector<double>(r.values().begin(), r.values().end()));
}

namespace {

// The fingerprint hashes every parameter; callers that drop the record skip it.
PolicyForward forward_impl(const PolicyParams& p, const History& history, bool with_fingerprint) {
  check_history(p, history);
  PolicyForward f;
  if (with_fingerprint) f.fingerprint = p.fingerprint();
  f.pairs = history.size();
  Tensor pooled = Tensor::matrix(1, p.spec.representation);
  if (!history.empty()) {
    std::vector<double> y;
    const Tensor raw = history_designs(p, history, y);
    f.pair_trace = encode_pairs(p, raw, y);
    pooled = pool(p, &f.pair_trace, history.size());
  }
  f.decoder = decode(p, pooled);
  const Tensor& out = f.decoder.output();
  f.design.values.assign(out.values().begin(), out.values().end());
  return f;
}

}  // namespace

PolicyForward policy_forward(const PolicyParams& p, const History& history) { return forward_impl(p, history, true); }

RawDesign next_design(const PolicyParams& p, const History& history) {
  return forward_impl(p, history, false).design;
}

PolicyBackward policy_backward(const PolicyParams& p, const PolicyForward& f, std::span<const double> design_grad) {
  if (f.fingerprint != p.fingerprint()) {
    throw NumericError("policy_backward: forward record is stale (parameters changed since the forward pass)");
  }
  if (design_grad.size() != p.design_dim) throw DimensionError("policy_backward: design gradient width mismatch");
  PolicyBackward out{p.zeros_like(), Tensor::matrix(f.pairs, p.design_dim), std::vector<double>(f.pairs)};
  Tensor g = Tensor::matrix(1, p.design_dim);
  for (std::size_t i = 0; i < p.design_dim; ++i) g[i] = design_grad[i];
  Tensor d_pooled;
  decode_backward(p, f.decoder, g, out.grads, &d_pooled);
  if (f.pairs == 0) return out;
  Tensor per_pair = Tensor::matrix(f.pairs, p.spec.representation);
  for (std::size_t t = 0; t < f.pairs; ++t) {
    for (std::size_t o = 0; o < p.spec.representation; ++o) per_pair(t, o) = d_pooled[o];
  }
  encode_pairs_backward(p, f.pair_trace, per_pair, out.grads, &out.pair_design_grads, out.pair_outcome_grads);
  return out;
}

void save_policy(const std::filesystem::path& path, const PolicyParams& p, nlohmann::json metadata) {
  Checkpoint ck;
  const auto names = p.tensor_names();
  const auto ts = p.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) ck.tensors.push_back({names[i], *ts[i]});
  metadata["architecture"] = p.spec.to_json();
  metadata["design_dim"] = p.design_dim;
  ck.metadata = std::move(metadata);
  save_checkpoint(path, ck);
}

PolicyParams load_policy(const std::filesystem::path& path, nlohmann::json* metadata) {
  const Checkpoint ck = load_checkpoint(path);
  if (!ck.metadata.contains("architecture") || !ck.metadata.contains("design_dim")) {
    throw IoError("load_policy: " + path.string() + " has no architecture metadata");
  }
  const PolicySpec spec = PolicySpec::from_json(ck.metadata.at("architecture"), PolicySpec{});
  Rng rng(0);
  PolicyParams p = PolicyParams::build(spec, ck.metadata.at("design_dim").get<std::size_t>(), rng);
  const auto names = p.tensor_names();
  const auto ts = p.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const Tensor& src = ck.get(names[i]);
    if (!src.same_shape(*ts[i])) {
      throw IoError("load_policy: tensor " + names[i] + " has shape " + shape_string(src.shape()) + ", expected " +
                    shape_string(ts[i]->shape()));
    }
    *ts[i] = src;
  }
  if (metadata) *metadata = ck.metadata;
  return p;
}

}  // namespace stepdad
