#include "stepdad/bounds.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "stepdad/errors.hpp"
#include "stepdad/special.hpp"

namespace stepdad {

std::string_view to_string(BoundKind k) {
  switch (k) {
    case BoundKind::kSpce: return "sPCE";
    case BoundKind::kSnmc: return "sNMC";
    case BoundKind::kPce: return "PCE";
  }
  return "sPCE";
}

std::string_view to_string(GradMode m) { return m == GradMode::kPathwise ? "pathwise" : "score"; }

GradMode grad_mode_from_string(std::string_view s) {
  if (s == "pathwise") return GradMode::kPathwise;
  if (s == "score") return GradMode::kScore;
  throw ConfigError("unknown grad_mode '" + std::string(s) + "' (pathwise, score)");
}

GradMode default_grad_mode(const Model& model) {
  return model.reparameterizable() ? GradMode::kPathwise : GradMode::kScore;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMaxEnumeration = 1e6;

// Running log-sum-exp: value = m + log z.
struct OnlineLse {
  double m = kNegInf;
  double z = 0.0;

  // Returns the factor by which previously accumulated terms were rescaled
  // and the weight of the new term, both relative to the updated max.
  std::pair<double, double> add(double s) {
    if (s == kNegInf) return {1.0, 0.0};
    if (s > m) {
      const double scale = m == kNegInf ? 0.0 : std::exp(m - s);
      z = z * scale + 1.0;
      m = s;
      return {scale, 1.0};
    }
    const double e = std::exp(s - m);
    z += e;
    return {1.0, e};
  }
};

void mean_and_se(const std::vector<double>& v, double& mean, double& se) {
  mean = 0.0;
  se = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

void check_budget(std::size_t L, std::size_t N) {
  if (L == 0) throw ConfigError("bounds: number of contrasts L must be >= 1");
  if (N == 0) throw ConfigError("bounds: number of rollouts N must be >= 1");
}

double suffix_log_lik(const Model& model, const RolloutBatch& rb, std::size_t b, std::span<const double> theta) {
  double s = 0.0;
  for (std::size_t k = 0; k < rb.steps; ++k) {
    s += model.log_likelihood(theta, rb.design[k].row(b), rb.y[k][b], {}, nullptr);
  }
  return s;
}

struct ExactAccumulator {
  const Model& model;
  const DesignPolicy& policy;
  const std::vector<ThetaAtom>& atoms;
  std::vector<double> log_mass;
  std::vector<double> outcomes;
  std::size_t T;
  double value = 0.0;

  void recurse(History& h, const std::vector<double>& s) {
    if (h.size() == T) {
      std::vector<double> joint(atoms.size());
      for (std::size_t a = 0; a < atoms.size(); ++a) joint[a] = log_mass[a] + s[a];
      const double log_marginal = log_sum_exp(joint);
      if (log_marginal == kNegInf) return;
      for (std::size_t a = 0; a < atoms.size(); ++a) {
        if (joint[a] == kNegInf) continue;
        value += std::exp(joint[a]) * (s[a] - (log_marginal));
      }
      return;
    }
    HistoryStep step;
    step.raw = policy.design(h, 0);
    step.design = constrain_design(model, step.raw);
    std::vector<double> next(atoms.size());
    for (double y : outcomes) {
      bool reachable = false;
      for (std::size_t a = 0; a < atoms.size(); ++a) {
        next[a] = s[a] == kNegInf ? kNegInf
                                  : s[a] + model.log_likelihood(atoms[a].theta.values, step.design.values, y, {},
                                                                nullptr);
        reachable = reachable || (next[a] != kNegInf && log_mass[a] != kNegInf);
      }
      if (!reachable) continue;
      step.outcome = {y, model.outcome_kind()};
      h.push_back(step);
      recurse(h, next);
      h.steps.pop_back();
    }
  }
};

PairedBounds exact_bounds(const Model& model, const DesignPolicy& policy, const ThetaSource& source,
                          const History& prefix, const BoundOptions& o) {
  const auto atoms = source.atoms();
  const auto outcomes = model.discrete_outcomes();
  if (atoms.empty() || outcomes.empty()) {
    throw ConfigError("bounds: exact mode needs a finite theta support and a finite outcome set (" + model.name() +
                      ", source " + source.tag() + ")");
  }
  const double size = std::pow(static_cast<double>(outcomes.size()), static_cast<double>(o.T - prefix.size())) *
                      static_cast<double>(atoms.size());
  if (size > kMaxEnumeration) {
    throw ConfigError("bounds: exact enumeration of " + std::to_string(size) + " (theta, history) cells exceeds 1e6");
  }
  ExactAccumulator acc{model, policy, atoms, {}, outcomes, o.T};
  for (const auto& a : atoms) acc.log_mass.push_back(std::log(a.mass));
  History h = prefix;
  acc.recurse(h, std::vector<double>(atoms.size(), 0.0));
  PairedBounds out;
  for (BoundEstimate* b : {&out.lower, &out.upper}) {
    b->value = acc.value;
    b->se = 0.0;
    b->exact = true;
  }
  return out;
}

}  // namespace

PairedBounds estimate_bounds(const Model& model, const DesignPolicy& policy, const ThetaSource& source,
                             const History& prefix, const BoundOptions& o) {
  const std::size_t tau = prefix.size();
  if (o.T < tau) throw DimensionError("bounds: T must be >= prefix length");
  PairedBounds out;
  if (o.exact) {
    out = exact_bounds(model, policy, source, prefix, o);
  } else {
    check_budget(o.L, o.N);
    if (o.T > tau) {
      const double log_l1 = std::log(static_cast<double>(o.L + 1));
      const double log_l = std::log(static_cast<double>(o.L));
      std::vector<double> theta(model.theta_dim());
      const std::size_t chunk = std::max<std::size_t>(1, o.chunk);
      for (std::size_t first = 0; first < o.N; first += chunk) {
        RolloutRequest req{o.T, o.seed, first, std::min(chunk, o.N - first), false, false};
        RolloutBatch rb = simulate_rollouts(model, policy, source, prefix, req);
        for (std::size_t b = 0; b < rb.count; ++b) {
          const double s0 = suffix_log_lik(model, rb, b, rb.theta0.row(b));
          OnlineLse with0, without0;
          with0.add(s0);
          for (std::size_t l = 0; l < o.L; ++l) {
            source.draw(rb.streams[b], theta);
            const double s = suffix_log_lik(model, rb, b, theta);
            with0.add(s);
            without0.add(s);
          }
          out.lower_terms.push_back((s0 - with0.m) - std::log(with0.z) + log_l1);
          const double upper =
              without0.m == kNegInf ? std::numeric_limits<double>::infinity()
                                    : (s0 - without0.m) - std::log(without0.z) + log_l;
          out.upper_terms.push_back(upper);
        }
      }
    } else {
      out.lower_terms.assign(o.N, 0.0);
      out.upper_terms.assign(o.N, 0.0);
    }
    mean_and_se(out.lower_terms, out.lower.value, out.lower.se);
    mean_and_se(out.upper_terms, out.upper.value, out.upper.se);
    std::vector<double> gap(out.lower_terms.size());
    for (std::size_t i = 0; i < gap.size(); ++i) gap[i] = out.upper_terms[i] - out.lower_terms[i];
    double gm = 0.0;
    mean_and_se(gap, gm, out.gap_se);
  }
  out.lower.kind = policy.kind() == DesignPolicyKind::kStatic ? BoundKind::kPce : BoundKind::kSpce;
  out.upper.kind = BoundKind::kSnmc;
  for (BoundEstimate* b : {&out.lower, &out.upper}) {
    b->n = o.exact ? 0 : o.N;
    b->l = o.exact ? 0 : o.L;
    b->tau = tau;
    b->source = source.tag();
    b->seed = o.seed;
  }
  return out;
}

BoundEstimate spce(const Model& model, const DesignPolicy& policy, const ThetaSource& source, const History& prefix,
                   const BoundOptions& options) {
  return estimate_bounds(model, policy, source, prefix, options).lower;
}

BoundEstimate snmc(const Model& model, const DesignPolicy& policy, const ThetaSource& source, const History& prefix,
                   const BoundOptions& options) {
  return estimate_bounds(model, policy, source, prefix, options).upper;
}

std::string bound_csv_header() { return "kind,value,se,N,L,tau,source,seed"; }

std::string bound_csv_row(const BoundEstimate& b) {
  std::ostringstream o;
  o.precision(17);
  o << to_string(b.kind) << ',' << b.value << ',' << b.se << ',' << b.n << ',' << b.l << ',' << b.tau << ",\""
    << b.source << "\"," << b.seed;
  return o.str();
}

namespace {

struct GradOutcome {
  double objective = 0.0;
  double se = 0.0;
};

GradOutcome run_gradient(const Model& model, const DesignPolicy& policy, const ThetaSource& source,
                         const History& prefix, const GradientOptions& o, PolicyParams* pgrads, Tensor* sgrads) {
  check_budget(o.L, o.N);
  const bool pathwise = o.mode == GradMode::kPathwise;
  if (pathwise && !model.reparameterizable()) {
    throw ConfigError("spce_gradient: pathwise gradients need reparameterizable outcomes; " + model.name() +
                      " has " + std::string(to_string(model.outcome_kind())) + " outcomes, use grad_mode = score");
  }
  const std::size_t tau = prefix.size();
  if (o.T < tau) throw DimensionError("spce_gradient: T must be >= prefix length");
  if (o.T == tau) return {};

  const std::size_t B = o.N, D = model.design_dim();
  RolloutRequest req{o.T, o.seed, 0, B, true, pathwise};
  RolloutBatch rb = simulate_rollouts(model, policy, source, prefix, req);
  const std::size_t n = rb.steps;

  std::vector<Tensor> gd(n, Tensor::matrix(B, D)), g0d(n, Tensor::matrix(B, D));
  std::vector<std::vector<double>> gy(n, std::vector<double>(B, 0.0));
  std::vector<double> f(B);
  const double log_l1 = std::log(static_cast<double>(o.L + 1));

  std::vector<double> theta(model.theta_dim());
  std::vector<double> s_d(n * D), s_y(n), a_d(n * D), a_y(n), z0d(n * D), z0y(n);
  for (std::size_t b = 0; b < B; ++b) {
    auto step_grads = [&](std::span<const double> th, std::vector<double>& dd, std::vector<double>& dy) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        s += model.log_likelihood(th, rb.design[k].row(b), rb.y[k][b], std::span<double>(dd.data() + k * D, D),
                                  pathwise ? &dy[k] : nullptr);
      }
      return s;
    };
    std::fill(z0y.begin(), z0y.end(), 0.0);
    const double s0 = step_grads(rb.theta0.row(b), z0d, z0y);
    OnlineLse lse;
    lse.add(s0);
    a_d = z0d;
    a_y = z0y;
    for (std::size_t l = 0; l < o.L; ++l) {
      source.draw(rb.streams[b], theta);
      std::fill(s_y.begin(), s_y.end(), 0.0);
      const double s = step_grads(theta, s_d, s_y);
      const auto [scale, w] = lse.add(s);
      if (w == 0.0 && scale == 1.0) continue;
      for (std::size_t i = 0; i < a_d.size(); ++i) a_d[i] = a_d[i] * scale + w * s_d[i];
      for (std::size_t i = 0; i < a_y.size(); ++i) a_y[i] = a_y[i] * scale + w * s_y[i];
    }
    f[b] = (s0 - lse.m) - std::log(lse.z) + log_l1;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < D; ++i) {
        gd[k](b, i) = z0d[k * D + i] - a_d[k * D + i] / lse.z;
        g0d[k](b, i) = z0d[k * D + i];
      }
      gy[k][b] = z0y[k] - a_y[k] / lse.z;
    }
  }

  GradOutcome res;
  mean_and_se(f, res.objective, res.se);
  double total = 0.0;
  for (double v : f) total += v;
  const double inv_b = 1.0 / static_cast<double>(B);
  for (std::size_t b = 0; b < B; ++b) {
    double centred = 0.0;
    if (!pathwise) {
      const double baseline = B > 1 ? (total - f[b]) / static_cast<double>(B - 1) : 0.0;
      centred = f[b] - baseline;
    }
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < D; ++i) gd[k](b, i) = (gd[k](b, i) + centred * g0d[k](b, i)) * inv_b;
      gy[k][b] *= inv_b;
    }
  }

  if (policy.kind() == DesignPolicyKind::kStatic) {
    *sgrads = Tensor::matrix(policy.static_designs().rows(), D);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < D; ++i) {
          double g = gd[k](b, i);
          if (pathwise) g += gy[k][b] * rb.dy_ddesign[k](b, i);
          (*sgrads)(tau + k, i) += g * rb.dconstrain[k](b, i);
        }
      }
    }
    return res;
  }

  const PolicyParams& p = policy.params();
  const std::size_t E = p.representation_dim();
  Tensor grad_e = Tensor::matrix(B, E);
  std::vector<double> d_y_enc(B);
  for (std::size_t k = n; k-- > 0;) {
    Tensor d_raw_enc = Tensor::matrix(B, D);
    std::fill(d_y_enc.begin(), d_y_enc.end(), 0.0);
    if (k + 1 < n) {
      encode_pairs_backward(p, rb.encoder[k], grad_e, *pgrads, &d_raw_enc,
                            pathwise ? std::span<double>(d_y_enc) : std::span<double>());
    }
    Tensor graw = Tensor::matrix(B, D);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < D; ++i) {
        double g = gd[k](b, i);
        if (pathwise) g += (gy[k][b] + d_y_enc[b]) * rb.dy_ddesign[k](b, i);
        graw(b, i) = g * rb.dconstrain[k](b, i) + d_raw_enc(b, i);
      }
    }
    Tensor d_pooled;
    decode_backward(p, rb.decoder[k], graw, *pgrads, &d_pooled);
    grad_e += d_pooled;
  }
  if (tau > 0) {
    Tensor per_pair = Tensor::matrix(tau, E);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t o2 = 0; o2 < E; ++o2) per_pair(0, o2) += grad_e(b, o2);
    }
    for (std::size_t t = 1; t < tau; ++t) {
      for (std::size_t o2 = 0; o2 < E; ++o2) per_pair(t, o2) = per_pair(0, o2);
    }
    encode_pairs_backward(p, rb.prefix_trace, per_pair, *pgrads, nullptr, {});
  }
  return res;
}

}  // namespace

PolicyGradient spce_gradient(const Model& model, const PolicyParams& policy, const ThetaSource& source,
                             const History& prefix, const GradientOptions& options) {
  PolicyGradient g;
  g.grads = policy.zeros_like();
  const GradOutcome r = run_gradient(model, DesignPolicy::network(policy), source, prefix, options, &g.grads, nullptr);
  g.objective = r.objective;
  g.se = r.se;
  return g;
}

DesignGradient pce_gradient(const Model& model, const Tensor& static_raw, const ThetaSource& source,
                            const History& prefix, const GradientOptions& options) {
  if (static_raw.rows() < options.T || static_raw.cols() != model.design_dim()) {
    throw DimensionError("pce_gradient: static designs must be at least T x design_dim, got " +
                         shape_string(static_raw.shape()));
  }
  DesignGradient g;
  g.grads = Tensor::matrix(static_raw.rows(), model.design_dim());
  const GradOutcome r =
      run_gradient(model, DesignPolicy::fixed(static_raw), source, prefix, options, nullptr, &g.grads);
  g.objective = r.objective;
  g.se = r.se;
  return g;
}

}  // namespace stepdad
