#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "signolearn/classifier.hpp"
#include "signolearn/dataset.hpp"
#include "signolearn/error.hpp"
#include "signolearn/optim.hpp"
#include "signolearn/parallel.hpp"
#include "signolearn/rng.hpp"
#include "signolearn/signomial.hpp"

namespace signolearn {

struct SrConfig {
  std::size_t terms = 0;     // 0: take K from the target spec
  double lambda_struct = 1e-2;
  double lambda_refine = 1e-3;
  std::size_t restarts = 0;  // 0: 4 for K = 1, 8 otherwise
  std::size_t refine_top = 3;
  std::size_t adam_epochs = 3000;
  double learning_rate = 5e-2;
  std::vector<std::uint64_t> seeds{42, 43, 44, 45, 46};
  double noise_sigma = 0.01;
  std::size_t heldout_samples = 1000;
  CanonicalOptions canonical;
  EquivalenceOptions equivalence;
  LbfgsOptions lbfgs;

  std::size_t effective_restarts(std::size_t k) const { return restarts > 0 ? restarts : (k == 1 ? 4 : 8); }

  void validate() const {
    if (!(lambda_struct >= lambda_refine && lambda_refine >= 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "need lambda_struct >= lambda_refine >= 0");
    }
    if (seeds.empty()) throw Error(ErrorCode::InvalidConfig, "seed list is empty");
    if (refine_top < 1) throw Error(ErrorCode::InvalidConfig, "refine_top must be >= 1");
    if (adam_epochs < 1) throw Error(ErrorCode::InvalidConfig, "adam_epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be > 0");
    if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise sigma must be >= 0");
    if (heldout_samples < 2) throw Error(ErrorCode::InvalidConfig, "held-out sample count must be >= 2");
  }
};

// ---------------------------------------------------------------------------
// Objective

namespace detail {

/// (1/N) sum (y - z)^2 over all rows, writing the gradient when grad is non-empty.
inline double sr_mse(const ParamLayout& layout, std::span<const double> params, const LogFeatures& lf,
                     std::span<const double> y, std::span<double> grad) {
  const std::size_t K = layout.terms;
  const std::size_t m = layout.dim;
  const double inv_n = 1.0 / static_cast<double>(lf.rows);
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> mono(K);
  double total = 0.0;
  for (std::size_t i = 0; i < lf.rows; ++i) {
    auto lx = lf.row(i);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t a = layout.alpha_index(0, k);
      double e = 0.0;
      for (std::size_t j = 0; j < m; ++j) e += params[a + 1 + j] * lx[j];
      mono[k] = signolearn::detail::guarded_exp(e, k);
      z += params[a] * mono[k];
    }
    const double r = y[i] - z;
    total += r * r;
    if (grad.empty()) continue;
    const double dz = -2.0 * r * inv_n;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t a = layout.alpha_index(0, k);
      grad[a] += dz * mono[k];
      const double zk = dz * params[a] * mono[k];
      for (std::size_t j = 0; j < m; ++j) grad[a + 1 + j] += zk * lx[j];
    }
  }
  return total * inv_n;
}

}  // namespace detail

/// Mean squared error plus lambda * sum |beta|.
inline LossGrad sr_loss_and_grad(const Signomial& s, const Dataset& data, double lambda) {
  if (data.task != TaskKind::Regress) throw Error(ErrorCode::InvalidConfig, "regression needs real targets");
  if (data.empty()) throw Error(ErrorCode::EmptyBatch, "empty dataset");
  if (s.dim != data.cols) throw Error(ErrorCode::DimensionMismatch, "signomial and data dimensions differ");
  const auto lf = LogFeatures::of(data);
  const Signomial one[] = {s};
  const auto params = pack(one);
  LossGrad out;
  out.grad.resize(params.size());
  out.smooth_loss = detail::sr_mse(params.layout, params.values, lf, data.targets, out.grad);
  out.loss = out.smooth_loss + lambda * l1_norm(params.values, params.layout.beta_indices());
  if (!std::isfinite(out.loss)) throw Error(ErrorCode::NonFiniteLoss, "loss is not finite");
  return out;
}

// ---------------------------------------------------------------------------
// Scoring

struct FitScore {
  double mse = 0.0;
  double variance = 0.0;  // population variance of the targets

  double nmse() const {
    if (!(variance > 0.0)) throw Error(ErrorCode::ZeroVariance, "targets have zero variance");
    return mse / variance;
  }
  double r2() const { return 1.0 - nmse(); }
};

inline FitScore score_predictions(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw Error(ErrorCode::LengthMismatch, "prediction count differs");
  if (y.empty()) throw Error(ErrorCode::EmptyData, "nothing to score");
  const double n = static_cast<double>(y.size());
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  FitScore s;
  for (std::size_t i = 0; i < y.size(); ++i) {
    s.mse += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    s.variance += (y[i] - mean) * (y[i] - mean);
  }
  s.mse /= n;
  s.variance /= n;
  return s;
}

inline FitScore score_fit(const Signomial& fitted, const Dataset& data) {
  if (data.empty()) throw Error(ErrorCode::EmptyData, "nothing to score");
  std::vector<double> yhat(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) yhat[i] = value(fitted, data.row(i));
  return score_predictions(data.targets, yhat);
}

// ---------------------------------------------------------------------------
// Fitting

struct SrFitStats {
  std::size_t restarts = 0;
  std::size_t failed_restarts = 0;
  double target_scale = 1.0;
  double stage_a_loss = 0.0;          // best structure-discovery objective (scaled units)
  double stage_a_polished_mse = 0.0;  // best Stage-A candidate after prune + polish
  double stage_c_mse = 0.0;
  double final_mse = 0.0;
  bool used_stage_c = true;
};

struct SrFit {
  Signomial signomial;
  SrFitStats stats;
};

namespace detail {

struct Candidate {
  std::vector<double> params;
  double loss = std::numeric_limits<double>::infinity();
  std::size_t index = 0;
};

inline bool candidate_less(const Candidate& a, const Candidate& b) {
  return a.loss < b.loss || (a.loss == b.loss && a.index < b.index);
}

/// Adam on the scaled MSE with a proximal L1 step on every exponent.
inline Candidate adam_stage(const ParamLayout& layout, std::vector<double> params, const LogFeatures& lf,
                            std::span<const double> y, double lambda, const SrConfig& cfg,
                            std::size_t index) {
  const auto mask = layout.beta_indices();
  AdamState adam(params.size(), cfg.learning_rate);
  std::vector<double> grad(params.size());
  for (std::size_t e = 0; e < cfg.adam_epochs; ++e) {
    sr_mse(layout, params, lf, y, grad);
    adam_step(adam, params, grad, 1.0);
    prox_l1(params, mask, cfg.learning_rate, lambda);
  }
  const double loss = sr_mse(layout, params, lf, y, {}) + lambda * l1_norm(params, mask);
  if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "Adam stage diverged");
  return {std::move(params), loss, index};
}

/// Scaled-target MSE of a (possibly shorter) term list; +inf when a term overflows.
inline double safe_mse(const ParamLayout& layout, std::span<const double> params, const LogFeatures& lf,
                       std::span<const double> y, std::span<double> grad) {
  try {
    return sr_mse(layout, params, lf, y, grad);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Overflow) throw;
    return std::numeric_limits<double>::infinity();
  }
}

struct Polished {
  std::vector<Term> terms;  // scaled coefficients
  double mse = std::numeric_limits<double>::infinity();
};

/// Zeroes small exponents, drops small coefficients, freezes the zeros and
/// polishes the rest with L-BFGS at lambda = 0, repeating while the polish
/// produces new small values.
inline Polished prune_and_polish(const ParamLayout& layout, std::span<const double> params,
                                 const LogFeatures& lf, std::span<const double> y, double scale,
                                 const SrConfig& cfg) {
  const std::size_t m = layout.dim;
  std::vector<Term> terms;
  for (std::size_t k = 0; k < layout.terms; ++k) {
    const std::size_t a = layout.alpha_index(0, k);
    terms.push_back(Term{params[a], {params.begin() + static_cast<std::ptrdiff_t>(a + 1),
                                     params.begin() + static_cast<std::ptrdiff_t>(a + 1 + m)}});
  }
  const double alpha_cut = cfg.canonical.alpha_prune / scale;
  const double beta_cut = cfg.canonical.beta_prune;
  auto prune = [&] {
    bool changed = false;
    for (auto& t : terms) {
      for (double& b : t.beta) {
        if (b != 0.0 && std::abs(b) < beta_cut) {
          b = 0.0;
          changed = true;
        }
      }
    }
    const auto before = terms.size();
    std::erase_if(terms, [&](const Term& t) { return std::abs(t.alpha) < alpha_cut; });
    return changed || terms.size() != before;
  };

  prune();
  for (int round = 0; round < 5 && !terms.empty(); ++round) {
    const ParamLayout sub{1, terms.size(), m};
    std::vector<double> full(sub.size());
    std::vector<std::size_t> free;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const std::size_t a = sub.alpha_index(0, k);
      full[a] = terms[k].alpha;
      free.push_back(a);
      for (std::size_t j = 0; j < m; ++j) {
        full[a + 1 + j] = terms[k].beta[j];
        if (terms[k].beta[j] != 0.0) free.push_back(a + 1 + j);
      }
    }
    std::vector<double> x0(free.size());
    for (std::size_t i = 0; i < free.size(); ++i) x0[i] = full[free[i]];
    std::vector<double> work = full, work_grad(full.size());
    Objective f = [&](std::span<const double> x, std::span<double> g) {
      for (std::size_t i = 0; i < free.size(); ++i) work[free[i]] = x[i];
      const double v = safe_mse(sub, work, lf, y, work_grad);
      for (std::size_t i = 0; i < free.size(); ++i) g[i] = work_grad[free[i]];
      return v;
    };
    const auto res = lbfgs_minimize(f, x0, cfg.lbfgs);
    for (std::size_t i = 0; i < free.size(); ++i) full[free[i]] = res.x[i];
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const std::size_t a = sub.alpha_index(0, k);
      terms[k].alpha = full[a];
      for (std::size_t j = 0; j < m; ++j) terms[k].beta[j] = full[a + 1 + j];
    }
    if (!prune()) break;
  }
  // Anything still below the cut after the last round is removed without a
  // further polish, so the output always satisfies the pruning rule.
  prune();

  Polished out;
  out.terms = std::move(terms);
  const ParamLayout fin{1, out.terms.size(), m};
  std::vector<double> flat(fin.size());
  for (std::size_t k = 0; k < out.terms.size(); ++k) {
    flat[fin.alpha_index(0, k)] = out.terms[k].alpha;
    std::copy(out.terms[k].beta.begin(), out.terms[k].beta.end(),
              flat.begin() + static_cast<std::ptrdiff_t>(fin.alpha_index(0, k) + 1));
  }
  if (out.terms.empty()) {
    double s = 0.0;
    for (double v : y) s += v * v;
    out.mse = s / static_cast<double>(y.size());
  } else {
    out.mse = safe_mse(fin, flat, lf, y, {});
  }
  return out;
}

/// Least squares on ln|y| = ln|alpha| + beta . ln x; requires single-signed targets.
inline std::optional<std::vector<double>> log_linear_init(const LogFeatures& lf, std::span<const double> y) {
  const bool pos = std::all_of(y.begin(), y.end(), [](double v) { return v > 0.0; });
  const bool neg = std::all_of(y.begin(), y.end(), [](double v) { return v < 0.0; });
  if (!pos && !neg) return std::nullopt;
  const auto n = static_cast<Eigen::Index>(lf.rows);
  const auto m = static_cast<Eigen::Index>(lf.cols);
  Eigen::MatrixXd A(n, m + 1);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < m; ++j) A(i, j + 1) = lf.values[static_cast<std::size_t>(i * m + j)];
    b(i) = std::log(std::abs(y[static_cast<std::size_t>(i)]));
  }
  const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(b);
  if (!sol.allFinite()) return std::nullopt;
  std::vector<double> p(static_cast<std::size_t>(m + 1));
  p[0] = (pos ? 1.0 : -1.0) * std::exp(sol(0));
  for (Eigen::Index j = 0; j < m; ++j) p[static_cast<std::size_t>(j + 1)] = sol(j + 1);
  return p;
}

inline std::vector<double> random_init(const ParamLayout& layout, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> p(layout.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = i % layout.stride() == 0 ? rng.normal(0.0, 1.0) : rng.normal(0.0, 1.0);
  }
  return p;
}

}  // namespace detail

/// Multi-start fit of a K-term signomial to real targets. K = 1 uses L-BFGS
/// from several starts; K > 1 runs Adam structure discovery, refinement of the
/// best few, then prune-and-polish.
inline SrFit fit_sr(const Dataset& data, std::size_t K, const SrConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (K < 1) throw Error(ErrorCode::InvalidConfig, "K must be >= 1");
  if (data.task != TaskKind::Regress) throw Error(ErrorCode::InvalidConfig, "regression needs real targets");
  if (data.empty()) throw Error(ErrorCode::EmptyData, "no rows to fit");

  const auto lf = LogFeatures::of(data);
  double scale = 0.0;
  for (double v : data.targets) scale += v * v;
  scale = std::sqrt(scale / static_cast<double>(data.rows));
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
  std::vector<double> y(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) y[i] = data.targets[i] / scale;

  const ParamLayout layout{1, K, data.cols};
  const std::size_t R = cfg.effective_restarts(K);
  SrFit out;
  out.stats.restarts = R;
  out.stats.target_scale = scale;

  std::vector<detail::Candidate> stage_a;
  for (std::size_t r = 0; r < R; ++r) {
    std::vector<double> init = detail::random_init(layout, derive_seed(seed, 100 + r));
    if (K == 1 && r == 0) {
      if (auto ll = detail::log_linear_init(lf, y)) init = std::move(*ll);
    }
    try {
      if (K == 1) {
        Objective f = [&](std::span<const double> x, std::span<double> g) {
          return detail::safe_mse(layout, x, lf, y, g);
        };
        auto res = lbfgs_minimize(f, std::move(init), cfg.lbfgs);
        stage_a.push_back({std::move(res.x), res.loss, r});
      } else {
        stage_a.push_back(detail::adam_stage(layout, std::move(init), lf, y, cfg.lambda_struct, cfg, r));
      }
    } catch (const Error&) {
      ++out.stats.failed_restarts;
    }
  }
  if (stage_a.empty()) throw Error(ErrorCode::AllRestartsFailed, "every restart failed");
  std::sort(stage_a.begin(), stage_a.end(), detail::candidate_less);
  out.stats.stage_a_loss = stage_a.front().loss;

  const auto polished_a = detail::prune_and_polish(layout, stage_a.front().params, lf, y, scale, cfg);
  detail::Polished polished_c = polished_a;
  if (K > 1) {
    std::vector<detail::Candidate> stage_b;
    for (std::size_t i = 0; i < std::min(cfg.refine_top, stage_a.size()); ++i) {
      try {
        stage_b.push_back(detail::adam_stage(layout, stage_a[i].params, lf, y, cfg.lambda_refine, cfg, i));
      } catch (const Error&) {
      }
    }
    // Each refined candidate is polished; the lowest polished MSE wins, ties
    // going to the better refinement objective.
    std::sort(stage_b.begin(), stage_b.end(), detail::candidate_less);
    for (std::size_t i = 0; i < stage_b.size(); ++i) {
      auto p = detail::prune_and_polish(layout, stage_b[i].params, lf, y, scale, cfg);
      if (i == 0 || p.mse < polished_c.mse) polished_c = std::move(p);
    }
  }

  const double s2 = scale * scale;
  out.stats.stage_a_polished_mse = polished_a.mse * s2;
  out.stats.stage_c_mse = polished_c.mse * s2;
  out.stats.used_stage_c = !(polished_a.mse < polished_c.mse);
  const auto& best = out.stats.used_stage_c ? polished_c : polished_a;
  out.stats.final_mse = best.mse * s2;

  out.signomial = Signomial(data.cols);
  for (const auto& t : best.terms) out.signomial.terms.push_back(Term{t.alpha * scale, t.beta});
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark targets

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

struct TargetSpec {
  std::string name;
  Signomial truth;
  std::vector<Range> ranges;
  std::size_t min_samples = 20;
  std::size_t max_samples = 1000;
  std::size_t terms = 1;
  bool positive_domain_only = false;

  void validate() const {
    truth.validate();
    if (ranges.size() != truth.dim) {
      throw Error(ErrorCode::DimensionMismatch, "spec '" + name + "' has " + std::to_string(ranges.size()) +
                                                    " ranges for " + std::to_string(truth.dim) + " features");
    }
    for (std::size_t j = 0; j < ranges.size(); ++j) {
      const auto& r = ranges[j];
      if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !(r.lo < r.hi)) {
        throw Error(ErrorCode::InvalidRange, "spec '" + name + "' range " + std::to_string(j) + " is invalid", j);
      }
      if (positive_domain_only && !(r.hi > 0.0)) {
        throw Error(ErrorCode::InvalidRange, "spec '" + name + "' range " + std::to_string(j) +
                                                 " has no positive part", j);
      }
    }
    if (min_samples < 2 || min_samples > max_samples) {
      throw Error(ErrorCode::InvalidRange, "spec '" + name + "' sample range is invalid");
    }
    if (terms < 1) throw Error(ErrorCode::InvalidConfig, "spec '" + name + "' needs K >= 1");
  }
};

/// Generated data plus the per-feature shift applied to make inputs positive.
struct BenchmarkData {
  Dataset data;
  std::vector<double> shift;  // x_model = x + shift

  bool identity() const {
    return std::all_of(shift.begin(), shift.end(), [](double s) { return s == 0.0; });
  }
};

/// Sampling ranges after the positivity policy: positive-domain specs keep
/// only the positive part of each range (lower end at least hi / 50).
inline std::vector<Range> sampling_ranges(const TargetSpec& spec) {
  std::vector<Range> out = spec.ranges;
  if (spec.positive_domain_only) {
    for (auto& r : out) {
      if (r.lo <= 0.0) r.lo = r.hi / 50.0;
    }
  }
  return out;
}

namespace detail {

/// Ground truth by direct powers, so integer exponents also work on
/// non-positive raw inputs.
inline double truth_value(const Signomial& s, std::span<const double> x) {
  double z = 0.0;
  for (const auto& t : s.terms) {
    double v = t.alpha;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (t.beta[j] != 0.0) v *= std::pow(x[j], t.beta[j]);
    }
    z += v;
  }
  return z;
}

}  // namespace detail

inline BenchmarkData generate_benchmark_data(const TargetSpec& spec, std::size_t n, double noise_sigma,
                                             std::uint64_t seed) {
  spec.validate();
  if (n < spec.min_samples || n > spec.max_samples) {
    throw Error(ErrorCode::InvalidRange, "sample count " + std::to_string(n) + " outside the spec range");
  }
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidRange, "noise sigma must be >= 0");
  const auto ranges = sampling_ranges(spec);
  const std::size_t m = spec.truth.dim;

  BenchmarkData out;
  out.shift.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    if (ranges[j].lo <= 0.0) out.shift[j] = 1.0 - ranges[j].lo;
  }
  Dataset& d = out.data;
  d.task = TaskKind::Regress;
  d.rows = n;
  d.cols = m;
  d.features.resize(n * m);
  d.targets.resize(n);
  d.feature_names = default_feature_names(m);

  SplitMix64 xs(derive_seed(seed, 3));
  SplitMix64 noise(derive_seed(seed, 4));
  std::vector<double> raw(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) raw[j] = xs.uniform(ranges[j].lo, ranges[j].hi);
    const double truth = detail::truth_value(spec.truth, raw);
    if (!std::isfinite(truth)) {
      throw Error(ErrorCode::InvalidRange, "spec '" + spec.name + "' is undefined on its sampling range", i);
    }
    d.targets[i] = truth + (noise_sigma > 0.0 ? noise.normal(0.0, noise_sigma) : 0.0);
    for (std::size_t j = 0; j < m; ++j) d.at(i, j) = raw[j] + out.shift[j];
  }
  return out;
}

/// Sample count drawn uniformly from the spec's range.
inline std::size_t draw_sample_count(const TargetSpec& spec, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, 2));
  return static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(spec.min_samples),
                                               static_cast<std::int64_t>(spec.max_samples)));
}

// ---------------------------------------------------------------------------
// Recovery

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  Signomial fitted;
  CanonicalForm canonical;
  bool judged = true;  // false when the data needed a positivity shift
  bool equivalent = false;
  double mse = 0.0;
  std::optional<double> nmse;
  std::optional<double> r2;
  std::optional<double> heldout_r2;  // noiseless data from an independent stream
  double wall_seconds = 0.0;
  SrFitStats stats;
};

struct RecoveryResult {
  std::string name;
  std::size_t terms = 1;
  std::vector<SeedOutcome> seeds;
  double recovery_rate = 0.0;
};

inline RecoveryResult evaluate_recovery(const TargetSpec& spec, const SrConfig& cfg) {
  spec.validate();
  cfg.validate();
  const std::size_t K = cfg.terms > 0 ? cfg.terms : spec.terms;
  const CanonicalForm truth = canonicalize(spec.truth, cfg.canonical);

  RecoveryResult res;
  res.name = spec.name;
  res.terms = K;
  res.seeds.resize(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), [&](std::size_t s) {
    const std::uint64_t seed = cfg.seeds[s];
    SeedOutcome& o = res.seeds[s];
    o.seed = seed;
    o.samples = draw_sample_count(spec, seed);
    const auto gen = generate_benchmark_data(spec, o.samples, cfg.noise_sigma, seed);

    const auto t0 = std::chrono::steady_clock::now();
    auto fit = fit_sr(gen.data, K, cfg, seed);
    o.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    o.fitted = std::move(fit.signomial);
    o.stats = fit.stats;
    o.canonical = canonicalize(o.fitted, cfg.canonical);
    o.judged = gen.identity();
    o.equivalent = o.judged && equivalent(o.canonical, truth, cfg.equivalence);
    const auto score = score_fit(o.fitted, gen.data);
    o.mse = score.mse;
    if (score.variance > 0.0) {
      o.nmse = score.nmse();
      o.r2 = score.r2();
    }
    const std::size_t n_hold = std::clamp(cfg.heldout_samples, spec.min_samples, spec.max_samples);
    const auto held = generate_benchmark_data(spec, n_hold, 0.0, derive_seed(seed, 0x686f6c64));
    const auto hs = score_fit(o.fitted, held.data);
    if (hs.variance > 0.0) o.heldout_r2 = hs.r2();
  });
  const auto hits = std::count_if(res.seeds.begin(), res.seeds.end(), [](const auto& o) { return o.equivalent; });
  res.recovery_rate = static_cast<double>(hits) / static_cast<double>(res.seeds.size());
  return res;
}

}  // namespace signolearn
