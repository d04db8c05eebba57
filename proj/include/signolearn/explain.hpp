#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "signolearn/classifier.hpp"
#include "signolearn/dataset.hpp"
#include "signolearn/error.hpp"
#include "signolearn/signomial.hpp"

namespace signolearn {

// Every input here is in the model frame (already scaled, strictly positive).

/// Score signomial for class c. A sigmoid model scores class 1; class 0 has
/// the constant score 0.
inline Signomial class_signomial(const EcselModel& model, std::size_t c) {
  if (model.link == Link::Sigmoid) {
    if (c > 1) throw Error(ErrorCode::IndexOutOfRange, "class index out of range", c);
    return c == 1 ? model.scores.front() : Signomial(model.dim());
  }
  if (c >= model.scores.size()) throw Error(ErrorCode::IndexOutOfRange, "class index out of range", c);
  return model.scores[c];
}

inline std::size_t class_count(const EcselModel& model) {
  return model.link == Link::Sigmoid ? 2 : model.scores.size();
}

struct ElasticityVector {
  std::size_t class_index = 0;
  double score = 0.0;
  std::vector<double> per_term;
  std::vector<double> log_gradient;                // G_j = dz / d ln x_j
  std::optional<std::vector<double>> elasticity;   // E_j = G_j / z, only when z > 0

  const std::vector<double>& elasticities() const {
    if (!elasticity) throw Error(ErrorCode::NonPositiveScore, "elasticity needs a positive score");
    return *elasticity;
  }
};

namespace detail {

inline std::vector<double> log_gradient(const Signomial& s, std::span<const double> per_term) {
  std::vector<double> g(s.dim, 0.0);
  for (std::size_t k = 0; k < s.terms.size(); ++k) {
    for (std::size_t j = 0; j < s.dim; ++j) g[j] += s.terms[k].beta[j] * per_term[k];
  }
  return g;
}

}  // namespace detail

inline ElasticityVector elasticity(const EcselModel& model, std::size_t c, std::span<const double> x) {
  const Signomial s = class_signomial(model, c);
  const auto ev = evaluate(s, x);
  ElasticityVector out;
  out.class_index = c;
  out.score = ev.total;
  out.per_term = ev.per_term;
  out.log_gradient = detail::log_gradient(s, ev.per_term);
  if (ev.total > 0.0) {
    std::vector<double> e(s.dim);
    for (std::size_t j = 0; j < s.dim; ++j) e[j] = out.log_gradient[j] / ev.total;
    out.elasticity = std::move(e);
  }
  return out;
}

/// Score after x_j -> q * x_j, from the per-term factors q^beta.
inline double counterfactual_scale(const EcselModel& model, std::size_t c, std::span<const double> x,
                                   std::size_t j, double q) {
  if (!(q > 0.0) || !std::isfinite(q)) throw Error(ErrorCode::NonPositiveScale, "scale factor must be positive");
  const Signomial s = class_signomial(model, c);
  if (j >= s.dim) throw Error(ErrorCode::IndexOutOfRange, "feature index out of range", j);
  const auto ev = evaluate(s, x);
  const double lq = std::log(q);
  double z = 0.0;
  for (std::size_t k = 0; k < s.terms.size(); ++k) z += std::exp(s.terms[k].beta[j] * lq) * ev.per_term[k];
  return z;
}

struct CounterfactualPoint {
  double q = 1.0;
  double score = 0.0;
};

inline std::vector<CounterfactualPoint> counterfactual_curve(const EcselModel& model, std::size_t c,
                                                             std::span<const double> x, std::size_t j,
                                                             std::span<const double> grid) {
  std::vector<CounterfactualPoint> out;
  out.reserve(grid.size());
  for (double q : grid) out.push_back({q, counterfactual_scale(model, c, x, j, q)});
  return out;
}

/// z_c(x) + eps * G_{c,j}(x).
inline double sensitivity_first_order(const EcselModel& model, std::size_t c, std::span<const double> x,
                                      std::size_t j, double eps) {
  const auto ev = elasticity(model, c, x);
  if (j >= ev.log_gradient.size()) throw Error(ErrorCode::IndexOutOfRange, "feature index out of range", j);
  return ev.score + eps * ev.log_gradient[j];
}

struct MarginSensitivity {
  std::size_t c = 0;
  std::size_t c_prime = 0;
  double margin = 0.0;
  std::vector<double> gradient;  // d(z_c - z_c') / d ln x_j
};

inline MarginSensitivity margin_sensitivity(const EcselModel& model, std::size_t c, std::size_t c_prime,
                                            std::span<const double> x) {
  if (c == c_prime) throw Error(ErrorCode::SameClass, "margin needs two different classes");
  const auto a = elasticity(model, c, x);
  const auto b = elasticity(model, c_prime, x);
  MarginSensitivity out{c, c_prime, a.score - b.score, std::vector<double>(a.log_gradient.size())};
  for (std::size_t j = 0; j < out.gradient.size(); ++j) out.gradient[j] = a.log_gradient[j] - b.log_gradient[j];
  return out;
}

/// d p_r / d ln x_j for every class r (rows) and feature j (columns).
inline std::vector<std::vector<double>> probability_sensitivity_all(const EcselModel& model,
                                                                    std::span<const double> x) {
  if (model.link == Link::Identity) {
    throw Error(ErrorCode::InvalidConfig, "identity-link models have no class probabilities");
  }
  const std::size_t C = class_count(model);
  std::vector<ElasticityVector> ev;
  std::vector<double> z;
  for (std::size_t c = 0; c < C; ++c) {
    ev.push_back(elasticity(model, c, x));
    z.push_back(ev.back().score);
  }
  const std::size_t m = model.dim();
  std::vector<std::vector<double>> out(C, std::vector<double>(m, 0.0));
  if (model.link == Link::Sigmoid) {
    const double pq = sigmoid(z[1]) * sigmoid(-z[1]);
    for (std::size_t j = 0; j < m; ++j) {
      out[1][j] = pq * ev[1].log_gradient[j];
      out[0][j] = -out[1][j];
    }
    return out;
  }
  const auto p = softmax(z);
  // p_c * sum_{r != c} p_r (G_c - G_r): same value as p_c (G_c - sum_r p_r G_r)
  // but never forms 1 - p_c, which loses every digit once p_c rounds to 1
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < C; ++r) {
        if (r != c) acc += p[r] * (ev[c].log_gradient[j] - ev[r].log_gradient[j]);
      }
      out[c][j] = p[c] * acc;
    }
  }
  return out;
}

inline std::vector<double> probability_sensitivity(const EcselModel& model, std::size_t c,
                                                   std::span<const double> x) {
  if (c >= class_count(model)) throw Error(ErrorCode::IndexOutOfRange, "class index out of range", c);
  return probability_sensitivity_all(model, x)[c];
}

// ---------------------------------------------------------------------------
// Attribution

enum class AttributionMode { ExactLog, Gradient };
enum class AttributionTarget { Score, Probability };

inline std::string to_string(AttributionMode m) { return m == AttributionMode::ExactLog ? "exact-log" : "gradient"; }
inline std::string to_string(AttributionTarget t) { return t == AttributionTarget::Score ? "score" : "probability"; }

struct AttributionReport {
  AttributionMode mode = AttributionMode::ExactLog;
  AttributionTarget target = AttributionTarget::Score;
  std::size_t class_index = 0;
  std::optional<std::size_t> term;  // exact-log on one component of a K > 1 score
  std::vector<double> input;
  std::vector<double> baseline;
  std::vector<double> phi;
  double change = 0.0;    // log-magnitude change (exact-log) or score/probability change
  double residual = 0.0;  // change - sum(phi)
  int sign = 1;           // sign of the attributed component (exact-log)
};

/// phi_j = beta_j ln(x_j / b_j) for one power-law component. Without a term
/// index the class score itself must be a single term.
inline AttributionReport attribute_exact_log(const EcselModel& model, std::size_t c, std::optional<std::size_t> term,
                                             std::span<const double> x, std::span<const double> b) {
  const Signomial s = class_signomial(model, c);
  if (x.size() != s.dim || b.size() != s.dim) throw Error(ErrorCode::DimensionMismatch, "input dimension mismatch");
  std::size_t k = 0;
  if (term) {
    if (*term >= s.terms.size()) throw Error(ErrorCode::IndexOutOfRange, "term index out of range", *term);
    k = *term;
  } else if (s.terms.size() != 1) {
    throw Error(ErrorCode::InvalidConfig,
                "exact-log attribution of a whole score needs K = 1; pick a term or use gradient mode");
  }
  const auto lx = log_input(x);
  const auto lb = log_input(b);
  const Term& t = s.terms[k];
  const double zx = term_value(t, lx, k);
  const double zb = term_value(t, lb, k);
  if (zx == 0.0 || zb == 0.0) throw Error(ErrorCode::ZeroComponentScore, "component score is zero", k);
  if ((zx > 0.0) != (zb > 0.0)) throw Error(ErrorCode::MixedSignComponent, "component changes sign", k);

  AttributionReport r;
  r.mode = AttributionMode::ExactLog;
  r.class_index = c;
  r.term = term;
  r.input.assign(x.begin(), x.end());
  r.baseline.assign(b.begin(), b.end());
  r.phi.resize(s.dim);
  double sum = 0.0;
  for (std::size_t j = 0; j < s.dim; ++j) {
    r.phi[j] = t.beta[j] * (lx[j] - lb[j]);
    sum += r.phi[j];
  }
  r.change = std::log(std::abs(zx)) - std::log(std::abs(zb));
  r.residual = r.change - sum;
  r.sign = zx > 0.0 ? 1 : -1;
  return r;
}

/// First-order attribution around x_star using the log-gradient (score) or the
/// probability sensitivity at x_star.
inline AttributionReport attribute_gradient(const EcselModel& model, std::size_t c, std::span<const double> x,
                                            std::span<const double> x_star, AttributionTarget target) {
  if (x.size() != model.dim() || x_star.size() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "input dimension mismatch");
  }
  const auto lx = log_input(x);
  const auto ls = log_input(x_star);
  std::vector<double> grad;
  double change = 0.0;
  if (target == AttributionTarget::Score) {
    const auto at = elasticity(model, c, x_star);
    grad = at.log_gradient;
    change = elasticity(model, c, x).score - at.score;
  } else {
    grad = probability_sensitivity(model, c, x_star);
    const auto s = class_scores(model, x_star);
    const auto sx = class_scores(model, x);
    change = probabilities_from_scores(model.link, sx)[c] - probabilities_from_scores(model.link, s)[c];
  }
  AttributionReport r;
  r.mode = AttributionMode::Gradient;
  r.target = target;
  r.class_index = c;
  r.input.assign(x.begin(), x.end());
  r.baseline.assign(x_star.begin(), x_star.end());
  r.phi.resize(grad.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < grad.size(); ++j) {
    r.phi[j] = grad[j] * (lx[j] - ls[j]);
    sum += r.phi[j];
  }
  r.change = change;
  r.residual = change - sum;
  return r;
}

enum class BaselineKind { GeometricMean, AllOnes, Sample };

inline BaselineKind parse_baseline(const std::string& s) {
  if (s == "geometric-mean") return BaselineKind::GeometricMean;
  if (s == "all-ones") return BaselineKind::AllOnes;
  if (s == "sample") return BaselineKind::Sample;
  throw Error(ErrorCode::InvalidConfig, "unknown baseline '" + s + "'");
}

inline std::vector<double> default_baseline(const Dataset& data, BaselineKind kind, std::size_t row = 0) {
  if (data.empty()) throw Error(ErrorCode::EmptyData, "baseline needs at least one row");
  switch (kind) {
    case BaselineKind::AllOnes: return std::vector<double>(data.cols, 1.0);
    case BaselineKind::Sample: {
      if (row >= data.rows) throw Error(ErrorCode::IndexOutOfRange, "baseline row out of range", row);
      const auto r = data.row(row);
      return {r.begin(), r.end()};
    }
    case BaselineKind::GeometricMean: break;
  }
  std::vector<double> acc(data.cols, 0.0);
  for (std::size_t i = 0; i < data.rows; ++i) {
    const auto lx = log_input(data.row(i));
    for (std::size_t j = 0; j < data.cols; ++j) acc[j] += lx[j];
  }
  for (double& v : acc) v = std::exp(v / static_cast<double>(data.rows));
  return acc;
}

// ---------------------------------------------------------------------------
// Reports

struct ExplanationReport {
  std::vector<std::string> feature_names;
  std::string class_name;
  AttributionReport attribution;
  ElasticityVector elasticities;
  std::vector<MarginSensitivity> margins;  // against every other class
};

inline ExplanationReport explain(const EcselModel& model, std::size_t c, std::span<const double> x,
                                 std::span<const double> baseline, AttributionMode mode,
                                 std::optional<std::size_t> term = std::nullopt,
                                 AttributionTarget target = AttributionTarget::Score) {
  ExplanationReport rep;
  rep.feature_names = model.names();
  if (c < model.class_names.size()) rep.class_name = model.class_names[c];
  rep.attribution = mode == AttributionMode::ExactLog ? attribute_exact_log(model, c, term, x, baseline)
                                                      : attribute_gradient(model, c, x, baseline, target);
  rep.elasticities = elasticity(model, c, x);
  if (model.link != Link::Identity) {
    for (std::size_t other = 0; other < class_count(model); ++other) {
      if (other != c) rep.margins.push_back(margin_sensitivity(model, c, other, x));
    }
  }
  return rep;
}

struct Scenario {
  std::string name;
  std::vector<double> input;  // raw features; the model's scaler is applied
};

struct ScenarioResult {
  std::string name;
  std::vector<double> scores;
  std::vector<double> probabilities;  // empty for identity-link models
  std::size_t predicted = 0;
  bool above_threshold = false;       // sigmoid: p(class 1) >= threshold
};

inline std::vector<ScenarioResult> compare_scenarios(const EcselModel& model, std::span<const Scenario> scenarios) {
  std::vector<ScenarioResult> out;
  for (const auto& sc : scenarios) {
    const auto x = model.prepare(sc.input);
    ScenarioResult r;
    r.name = sc.name;
    r.scores = class_scores(model, x);
    if (model.link != Link::Identity) {
      r.probabilities = probabilities_from_scores(model.link, r.scores);
      r.predicted = decide(model, r.probabilities);
      r.above_threshold = model.link == Link::Sigmoid && r.probabilities[1] >= model.threshold;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace signolearn
