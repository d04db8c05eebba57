#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "signolearn/error.hpp"
#include "signolearn/signomial.hpp"

namespace signolearn {

// ---------------------------------------------------------------------------
// Flat parameter vectors

/// Where a flat parameter lives. feature is empty for a coefficient.
struct ParamSlot {
  std::size_t output = 0;
  std::size_t term = 0;
  std::optional<std::size_t> feature;

  bool operator==(const ParamSlot&) const = default;
};

/// Layout of `outputs` signomials with `terms` terms over `dim` features,
/// stored as [alpha, beta_0 .. beta_{m-1}] per term.
struct ParamLayout {
  std::size_t outputs = 0;
  std::size_t terms = 0;
  std::size_t dim = 0;

  std::size_t stride() const { return dim + 1; }
  std::size_t size() const { return outputs * terms * stride(); }

  std::size_t alpha_index(std::size_t c, std::size_t k) const { return (c * terms + k) * stride(); }
  std::size_t beta_index(std::size_t c, std::size_t k, std::size_t j) const {
    return alpha_index(c, k) + 1 + j;
  }

  ParamSlot slot(std::size_t i) const {
    const std::size_t block = i / stride();
    const std::size_t offset = i % stride();
    ParamSlot s{block / terms, block % terms, std::nullopt};
    if (offset > 0) s.feature = offset - 1;
    return s;
  }

  std::size_t index(const ParamSlot& s) const {
    return s.feature ? beta_index(s.output, s.term, *s.feature) : alpha_index(s.output, s.term);
  }

  std::vector<std::size_t> beta_indices() const {
    std::vector<std::size_t> out;
    out.reserve(outputs * terms * dim);
    for (std::size_t i = 0; i < size(); ++i) {
      if (i % stride() != 0) out.push_back(i);
    }
    return out;
  }

  bool operator==(const ParamLayout&) const = default;
};

struct ParamVector {
  ParamLayout layout;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

inline ParamVector pack(std::span<const Signomial> outputs) {
  if (outputs.empty()) throw Error(ErrorCode::InvalidConfig, "no signomials to pack");
  ParamLayout layout{outputs.size(), outputs[0].size(), outputs[0].dim};
  ParamVector p{layout, std::vector<double>(layout.size())};
  for (std::size_t c = 0; c < outputs.size(); ++c) {
    if (outputs[c].dim != layout.dim || outputs[c].size() != layout.terms) {
      throw Error(ErrorCode::DimensionMismatch, "signomials differ in shape", c);
    }
    for (std::size_t k = 0; k < layout.terms; ++k) {
      const Term& t = outputs[c].terms[k];
      p.values[layout.alpha_index(c, k)] = t.alpha;
      for (std::size_t j = 0; j < layout.dim; ++j) p.values[layout.beta_index(c, k, j)] = t.beta[j];
    }
  }
  return p;
}

inline std::vector<Signomial> unpack(const ParamLayout& layout, std::span<const double> values) {
  if (values.size() != layout.size()) {
    throw Error(ErrorCode::LengthMismatch, "parameter vector does not match layout");
  }
  std::vector<Signomial> out;
  out.reserve(layout.outputs);
  for (std::size_t c = 0; c < layout.outputs; ++c) {
    Signomial s(layout.dim);
    s.terms.reserve(layout.terms);
    for (std::size_t k = 0; k < layout.terms; ++k) {
      Term t{values[layout.alpha_index(c, k)], std::vector<double>(layout.dim)};
      for (std::size_t j = 0; j < layout.dim; ++j) t.beta[j] = values[layout.beta_index(c, k, j)];
      s.terms.push_back(std::move(t));
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Signomial> unpack(const ParamVector& p) { return unpack(p.layout, p.values); }

// ---------------------------------------------------------------------------
// Adam with global-norm clipping

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  AdamState() = default;
  AdamState(std::size_t n, double lr)
      : learning_rate(lr), first_moment(n, 0.0), second_moment(n, 0.0) {}
};

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// One bias-corrected Adam update in place. The gradient is first rescaled so
/// its global L2 norm is at most clip_norm. An all-zero gradient advances the
/// moments but leaves the parameters where they are.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
                      double clip_norm = 1.0) {
  if (grad.size() != params.size()) {
    throw Error(ErrorCode::LengthMismatch, "gradient and parameter lengths differ");
  }
  if (!(clip_norm > 0.0)) throw Error(ErrorCode::InvalidConfig, "clip norm must be positive");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw Error(ErrorCode::NonFiniteGradient, "gradient entry " + std::to_string(i), i);
    }
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  const double norm = l2_norm(grad);
  const double scale = norm > clip_norm ? clip_norm / norm : 1.0;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const bool moving = norm > 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i] * scale;
    state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
    state.second_moment[i] = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
    if (!moving) continue;
    const double mhat = state.first_moment[i] / c1;
    const double vhat = state.second_moment[i] / c2;
    params[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

// ---------------------------------------------------------------------------
// Proximal L1 on exponents

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

inline void prox_l1(std::span<double> params, std::span<const std::size_t> beta_mask,
                    double step_size, double lambda) {
  if (!(step_size > 0.0) || lambda < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "prox_l1 needs step > 0 and lambda >= 0");
  }
  const double t = step_size * lambda;
  if (t == 0.0) return;
  for (std::size_t i : beta_mask) params[i] = soft_threshold(params[i], t);
}

inline double l1_norm(std::span<const double> params, std::span<const std::size_t> mask) {
  double s = 0.0;
  for (std::size_t i : mask) s += std::abs(params[i]);
  return s;
}

// ---------------------------------------------------------------------------
// L-BFGS with a strong-Wolfe line search

/// Returns f(x) and writes the gradient into grad.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
  std::size_t memory = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  double gradient_tolerance = 1e-8;
  std::size_t max_iterations = 500;
  std::size_t max_line_search = 40;
};

struct LbfgsResult {
  std::vector<double> x;
  double loss = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct Probe {
  double step = 0.0;
  double f = 0.0;
  double slope = 0.0;
  std::vector<double> x;
  std::vector<double> g;
  bool finite = false;
};

/// Minimizer of the cubic through (a, fa, da) and (b, fb, db), safeguarded
/// into the inner 80% of the bracket.
inline double cubic_step(double a, double fa, double da, double b, double fb, double db) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double w = hi - lo;
  double t = 0.5 * (a + b);
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom != 0.0) {
      const double c = b - (b - a) * (db + d2 - d1) / denom;
      if (std::isfinite(c)) t = c;
    }
  }
  if (t < lo + 0.1 * w || t > hi - 0.1 * w) t = 0.5 * (a + b);
  return t;
}

class WolfeSearch {
 public:
  WolfeSearch(const Objective& f, std::span<const double> x0, double f0,
              std::span<const double> dir, double slope0, const LbfgsOptions& opt,
              std::size_t& evaluations)
      : f_(f), x0_(x0), f0_(f0), dir_(dir), slope0_(slope0), opt_(opt), evals_(evaluations) {}

  /// A point satisfying the strong Wolfe conditions, or failing that the best
  /// point with sufficient decrease; nullopt if neither was found.
  std::optional<Probe> run(double initial_step) {
    Probe prev{0.0, f0_, slope0_, {}, {}, true};
    double step = initial_step;
    for (std::size_t i = 0; i < opt_.max_line_search; ++i) {
      Probe cur = probe(step);
      if (!cur.finite) {
        step = 0.5 * (prev.step + step);
        continue;
      }
      if (approx_wolfe(cur)) return cur;
      if (rises(cur, prev, i > 0)) return zoom(prev, cur);
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) return cur;
      if (cur.slope >= 0.0) return zoom(cur, prev);
      prev = std::move(cur);
      step *= 2.0;
    }
    return fallback();
  }

 private:
  Probe probe(double step) {
    Probe p;
    p.step = step;
    p.x.resize(x0_.size());
    p.g.resize(x0_.size());
    for (std::size_t i = 0; i < x0_.size(); ++i) p.x[i] = x0_[i] + step * dir_[i];
    p.f = f_(p.x, p.g);
    ++evals_;
    p.finite = std::isfinite(p.f) && all_finite(p.g);
    if (p.finite) {
      p.slope = dot(p.g, dir_);
      if (p.f < f0_ + opt_.c1 * step * slope0_ && (!best_ || p.f < best_->f)) best_ = p;
    }
    return p;
  }

  std::optional<Probe> zoom(Probe lo, Probe hi) {
    for (std::size_t i = 0; i < opt_.max_line_search; ++i) {
      if (std::abs(hi.step - lo.step) <= 1e-16 * std::max(1.0, std::abs(lo.step))) break;
      double t = 0.5 * (lo.step + hi.step);
      if (hi.finite && std::abs(hi.f - lo.f) <= noise()) {
        t = secant_step(lo, hi);
      } else if (hi.finite) {
        t = cubic_step(lo.step, lo.f, lo.slope, hi.step, hi.f, hi.slope);
      }
      Probe cur = probe(t);
      if (cur.finite && approx_wolfe(cur)) return cur;
      if (!cur.finite || rises(cur, lo, true)) {
        hi = std::move(cur);
        continue;
      }
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) return cur;
      if (cur.slope * (hi.step - lo.step) >= 0.0) hi = lo;
      lo = std::move(cur);
    }
    return fallback();
  }

  std::optional<Probe> fallback() { return best_; }

  // Close to a minimum, f differences sink below rounding error; accept a
  // step whose value has not risen beyond that noise if curvature holds.
  double noise() const { return 1e-10 * std::max(1.0, std::abs(f0_)); }

  bool approx_wolfe(const Probe& p) const {
    return p.f <= f0_ + noise() && std::abs(p.slope) <= -opt_.c2 * slope0_;
  }

  // Whether p ends the bracket: too little decrease, or no better than ref.
  // Inside the noise band the sign of the slope decides instead.
  bool rises(const Probe& p, const Probe& ref, bool compare_ref) const {
    if (p.f <= f0_ + noise() && std::abs(p.f - ref.f) <= noise()) return p.slope >= 0.0;
    return p.f > f0_ + opt_.c1 * p.step * slope0_ || (compare_ref && p.f >= ref.f);
  }

  static double secant_step(const Probe& a, const Probe& b) {
    const double lo = std::min(a.step, b.step), hi = std::max(a.step, b.step);
    const double w = hi - lo;
    double t = 0.5 * (a.step + b.step);
    const double ds = b.slope - a.slope;
    if (ds != 0.0) t = a.step - a.slope * (b.step - a.step) / ds;
    if (!std::isfinite(t) || t < lo + 0.1 * w || t > hi - 0.1 * w) t = 0.5 * (a.step + b.step);
    return t;
  }

  const Objective& f_;
  std::span<const double> x0_;
  double f0_;
  std::span<const double> dir_;
  double slope0_;
  const LbfgsOptions& opt_;
  std::size_t& evals_;
  std::optional<Probe> best_;
};

}  // namespace detail

/// Unconstrained limited-memory BFGS. Line-search failure is not an error:
/// the best point seen so far is returned with converged = false.
inline LbfgsResult lbfgs_minimize(const Objective& f, std::vector<double> x0,
                                  const LbfgsOptions& opt = {}) {
  const std::size_t n = x0.size();
  LbfgsResult res;
  std::vector<double> g(n);
  double fx = f(x0, g);
  res.evaluations = 1;
  if (!std::isfinite(fx) || !detail::all_finite(g)) {
    throw Error(ErrorCode::NonFiniteObjective, "objective not finite at the initial point");
  }
  res.x = x0;
  res.loss = fx;
  if (opt.max_iterations == 0) return res;

  std::vector<double> x = std::move(x0);
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> dir(n), alpha(opt.memory);

  for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
    if (detail::inf_norm(g) < opt.gradient_tolerance) {
      res.converged = true;
      if (fx <= res.loss + 1e-10 * std::max(1.0, std::abs(res.loss))) {
        res.x = x;
        res.loss = std::min(fx, res.loss);
      }
      break;
    }
    // Two-loop recursion.
    for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
    const std::size_t h = s_hist.size();
    for (std::size_t i = h; i-- > 0;) {
      alpha[i] = rho_hist[i] * detail::dot(s_hist[i], dir);
      for (std::size_t k = 0; k < n; ++k) dir[k] -= alpha[i] * y_hist[i][k];
    }
    if (h > 0) {
      const double gamma = detail::dot(s_hist.back(), y_hist.back()) /
                           detail::dot(y_hist.back(), y_hist.back());
      for (double& d : dir) d *= gamma;
    }
    for (std::size_t i = 0; i < h; ++i) {
      const double beta = rho_hist[i] * detail::dot(y_hist[i], dir);
      for (std::size_t k = 0; k < n; ++k) dir[k] += s_hist[i][k] * (alpha[i] - beta);
    }
    double slope = detail::dot(g, dir);
    if (!(slope < 0.0)) {
      s_hist.clear(), y_hist.clear(), rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = detail::dot(g, dir);
    }
    const double step0 = s_hist.empty() ? std::min(1.0, 1.0 / std::max(detail::inf_norm(g), 1e-300)) : 1.0;
    detail::WolfeSearch search(f, x, fx, dir, slope, opt, res.evaluations);
    auto found = search.run(step0);
    if (!found && !s_hist.empty()) {
      // Retry once along steepest descent with a fresh memory.
      s_hist.clear(), y_hist.clear(), rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = detail::dot(g, dir);
      detail::WolfeSearch retry(f, x, fx, dir, slope, opt, res.evaluations);
      found = retry.run(std::min(1.0, 1.0 / std::max(detail::inf_norm(g), 1e-300)));
    }
    res.iterations = iter + 1;
    if (!found) break;

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = found->x[i] - x[i];
      y[i] = found->g[i] - g[i];
    }
    const double sy = detail::dot(s, y);
    x = std::move(found->x);
    g = std::move(found->g);
    fx = found->f;
    if (fx < res.loss) {
      res.loss = fx;
      res.x = x;
    }
    if (sy > 1e-12) {
      if (s_hist.size() == opt.memory) {
        s_hist.pop_front(), y_hist.pop_front(), rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
  }
  if (!res.converged && detail::inf_norm(g) < opt.gradient_tolerance &&
      fx <= res.loss + 1e-10 * std::max(1.0, std::abs(res.loss))) {
    res.converged = true;
    res.x = x;
    res.loss = std::min(fx, res.loss);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Early stopping

enum class StopDecision { Continue, Stop };

class EarlyStopPolicy {
 public:
  explicit EarlyStopPolicy(std::size_t patience, double min_delta = 0.0)
      : patience_(patience), min_delta_(min_delta) {}

  /// Feed one epoch's validation loss and the parameters that produced it.
  StopDecision update(double val_loss, std::span<const double> params) {
    if (!std::isfinite(val_loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "validation loss is not finite");
    }
    if (!best_ || val_loss < best_loss_ - min_delta_) {
      best_loss_ = val_loss;
      best_.emplace(params.begin(), params.end());
      best_epoch_ = epoch_;
      stale_ = 0;
    } else {
      ++stale_;
    }
    ++epoch_;
    return stale_ >= patience_ ? StopDecision::Stop : StopDecision::Continue;
  }

  bool has_snapshot() const { return best_.has_value(); }
  const std::vector<double>& best_params() const { return *best_; }
  double best_loss() const { return best_loss_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_loss_ = std::numeric_limits<double>::infinity();
  std::optional<std::vector<double>> best_;
  std::size_t best_epoch_ = 0;
  std::size_t epoch_ = 0;
  std::size_t stale_ = 0;
};

}  // namespace signolearn
