#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "signolearn/error.hpp"

namespace signolearn {

/// Log-magnitude above which a term is reported as overflowing.
inline constexpr double kLogMagnitudeGuard = 700.0;

/// One power-law product alpha * prod_j x_j^beta_j.
struct Term {
  double alpha = 0.0;
  std::vector<double> beta;

  bool operator==(const Term&) const = default;
};

/// A finite sum of power-law terms over m strictly positive inputs.
struct Signomial {
  std::size_t dim = 0;
  std::vector<Term> terms;

  Signomial() = default;
  explicit Signomial(std::size_t m) : dim(m) {}
  Signomial(std::size_t m, std::vector<Term> t) : dim(m), terms(std::move(t)) { validate(); }

  std::size_t size() const { return terms.size(); }

  Signomial& add(double alpha, std::vector<double> beta) {
    terms.push_back(Term{alpha, std::move(beta)});
    validate();
    return *this;
  }

  void validate() const {
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const Term& t = terms[k];
      if (t.beta.size() != dim) {
        throw Error(ErrorCode::DimensionMismatch,
                    "term " + std::to_string(k) + " has " + std::to_string(t.beta.size()) +
                        " exponents, expected " + std::to_string(dim),
                    k);
      }
      if (!std::isfinite(t.alpha)) {
        throw Error(ErrorCode::InvalidConfig, "non-finite coefficient in term " + std::to_string(k), k);
      }
      for (double b : t.beta) {
        if (!std::isfinite(b)) {
          throw Error(ErrorCode::InvalidConfig, "non-finite exponent in term " + std::to_string(k), k);
        }
      }
    }
  }

  bool operator==(const Signomial&) const = default;
};

struct ScoreBreakdown {
  double total = 0.0;
  std::vector<double> per_term;
};

/// Gradient of z(x) with respect to the parameters of each term.
struct ParamGradient {
  std::vector<double> d_alpha;  // K
  std::vector<double> d_beta;   // K x m, row-major

  double beta(std::size_t k, std::size_t j, std::size_t m) const { return d_beta[k * m + j]; }
};

namespace detail {

inline void check_dim(const Signomial& s, std::size_t n) {
  if (n != s.dim) {
    throw Error(ErrorCode::DimensionMismatch,
                "input has " + std::to_string(n) + " features, signomial expects " +
                    std::to_string(s.dim));
  }
}

inline double guarded_exp(double log_mag, std::size_t term) {
  if (log_mag > kLogMagnitudeGuard) {
    throw Error(ErrorCode::Overflow,
                "term " + std::to_string(term) + " log-magnitude " + std::to_string(log_mag) +
                    " exceeds guard",
                term);
  }
  return std::exp(log_mag);
}

}  // namespace detail

inline std::vector<double> log_input(std::span<const double> x) {
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(x[j] > 0.0) || !std::isfinite(x[j])) {
      throw Error(ErrorCode::NonPositiveInput,
                  "feature " + std::to_string(j) + " = " + std::to_string(x[j]) + " is not positive",
                  j);
    }
    out[j] = std::log(x[j]);
  }
  return out;
}

/// prod_j x_j^beta_j for one term, from precomputed ln x.
inline double term_monomial(const Term& t, std::span<const double> log_x, std::size_t k = 0) {
  double e = 0.0;
  for (std::size_t j = 0; j < log_x.size(); ++j) e += t.beta[j] * log_x[j];
  return detail::guarded_exp(e, k);
}

/// alpha * prod_j x_j^beta_j through the log-magnitude path.
inline double term_value(const Term& t, std::span<const double> log_x, std::size_t k = 0) {
  if (t.alpha == 0.0) return 0.0;
  double e = std::log(std::abs(t.alpha));
  for (std::size_t j = 0; j < log_x.size(); ++j) e += t.beta[j] * log_x[j];
  const double mag = detail::guarded_exp(e, k);
  return t.alpha < 0.0 ? -mag : mag;
}

inline ScoreBreakdown evaluate_log(const Signomial& s, std::span<const double> log_x) {
  detail::check_dim(s, log_x.size());
  ScoreBreakdown out;
  out.per_term.resize(s.terms.size());
  for (std::size_t k = 0; k < s.terms.size(); ++k) {
    out.per_term[k] = term_value(s.terms[k], log_x, k);
    out.total += out.per_term[k];
  }
  return out;
}

inline ScoreBreakdown evaluate(const Signomial& s, std::span<const double> x) {
  detail::check_dim(s, x.size());
  const auto lx = log_input(x);
  return evaluate_log(s, lx);
}

inline double value(const Signomial& s, std::span<const double> x) { return evaluate(s, x).total; }

/// Parameter gradient of z(x). d_alpha is computed from the monomial directly
/// so a zero coefficient poses no problem.
inline ParamGradient gradient_log(const Signomial& s, std::span<const double> log_x) {
  detail::check_dim(s, log_x.size());
  const std::size_t m = s.dim;
  ParamGradient g;
  g.d_alpha.resize(s.terms.size());
  g.d_beta.resize(s.terms.size() * m);
  for (std::size_t k = 0; k < s.terms.size(); ++k) {
    const double mono = term_monomial(s.terms[k], log_x, k);
    const double zk = s.terms[k].alpha * mono;
    g.d_alpha[k] = mono;
    for (std::size_t j = 0; j < m; ++j) g.d_beta[k * m + j] = zk * log_x[j];
  }
  return g;
}

inline ParamGradient gradient(const Signomial& s, std::span<const double> x) {
  detail::check_dim(s, x.size());
  const auto lx = log_input(x);
  return gradient_log(s, lx);
}

// ---------------------------------------------------------------------------
// Canonical forms

struct CanonicalOptions {
  double snap_tolerance = 0.02;
  double alpha_prune = 1e-4;
  double beta_prune = 5e-3;
  int max_denominator = 6;
  int max_numerator = 12;
};

/// Sorted, snapped, merged and pruned signomial.
struct CanonicalForm {
  Signomial signomial;

  std::size_t dim() const { return signomial.dim; }
  const std::vector<Term>& terms() const { return signomial.terms; }
  bool operator==(const CanonicalForm&) const = default;
};

/// Nearest p/q with q <= max_den and |p| <= max_num, preferring the smallest
/// denominator on ties. Returns the input unchanged if nothing is within tol.
inline double snap_rational(double v, double tol, int max_den = 6, int max_num = 12) {
  double best = v;
  double best_dist = tol;
  bool found = false;
  for (int q = 1; q <= max_den; ++q) {
    const double p = std::round(v * q);
    if (std::abs(p) > max_num) continue;
    const double cand = p / static_cast<double>(q);
    const double dist = std::abs(cand - v);
    if (dist < best_dist || (!found && dist <= best_dist)) {
      best = cand;
      best_dist = dist;
      found = true;
    }
  }
  return found ? best : v;
}

/// Lexicographic on exponents, then larger coefficient first.
inline bool term_order(const Term& a, const Term& b) {
  for (std::size_t j = 0; j < a.beta.size(); ++j) {
    if (a.beta[j] != b.beta[j]) return a.beta[j] < b.beta[j];
  }
  return a.alpha > b.alpha;
}

inline CanonicalForm canonicalize(const Signomial& s, const CanonicalOptions& opt = {}) {
  std::vector<Term> snapped;
  snapped.reserve(s.terms.size());
  for (const Term& t : s.terms) {
    Term c = t;
    for (double& b : c.beta) {
      if (std::abs(b) < opt.beta_prune) {
        b = 0.0;
      } else {
        b = snap_rational(b, opt.snap_tolerance, opt.max_denominator, opt.max_numerator);
      }
    }
    auto same = std::find_if(snapped.begin(), snapped.end(),
                             [&](const Term& u) { return u.beta == c.beta; });
    if (same != snapped.end()) {
      same->alpha += c.alpha;
    } else {
      snapped.push_back(std::move(c));
    }
  }
  std::erase_if(snapped, [&](const Term& t) { return std::abs(t.alpha) < opt.alpha_prune; });
  std::sort(snapped.begin(), snapped.end(), term_order);
  return CanonicalForm{Signomial(s.dim, std::move(snapped))};
}

struct EquivalenceOptions {
  double exponent_tolerance = 0.02;
  double coefficient_rel_tolerance = 0.02;
};

inline bool equivalent(const CanonicalForm& a, const CanonicalForm& b,
                       const EquivalenceOptions& opt = {}) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "canonical forms differ in dimension");
  }
  if (a.terms().size() != b.terms().size()) return false;
  for (std::size_t k = 0; k < a.terms().size(); ++k) {
    const Term& ta = a.terms()[k];
    const Term& tb = b.terms()[k];
    for (std::size_t j = 0; j < a.dim(); ++j) {
      if (std::abs(ta.beta[j] - tb.beta[j]) > opt.exponent_tolerance) return false;
    }
    const double scale = std::max(std::abs(ta.alpha), std::abs(tb.alpha));
    if (std::abs(ta.alpha - tb.alpha) > opt.coefficient_rel_tolerance * scale) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Rendering

enum class RenderStyle { Plain, Latex };

inline std::vector<std::string> default_feature_names(std::size_t m) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < m; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos) s = std::string(buf + (buf[0] == '-'));
  return s;
}

inline std::string render_plain_term(const Term& t, const std::vector<std::string>& names,
                                     int digits, bool leading) {
  std::string out = leading ? fixed(t.alpha, digits) : fixed(std::abs(t.alpha), digits);
  for (std::size_t j = 0; j < t.beta.size(); ++j) {
    if (t.beta[j] == 0.0) continue;
    out += " * " + names[j];
    if (t.beta[j] != 1.0) out += "^" + fixed(t.beta[j], digits);
  }
  return out;
}

inline std::string render_latex_term(const Term& t, const std::vector<std::string>& names,
                                     int digits, bool leading) {
  std::string num, den;
  for (std::size_t j = 0; j < t.beta.size(); ++j) {
    const double b = t.beta[j];
    if (b == 0.0) continue;
    std::string& side = b > 0.0 ? num : den;
    if (!side.empty()) side += "\\,";
    side += "\\mathrm{" + names[j] + "}";
    if (std::abs(b) != 1.0) side += "^{" + fixed(std::abs(b), digits) + "}";
  }
  std::string out = leading ? fixed(t.alpha, digits) : fixed(std::abs(t.alpha), digits);
  if (!den.empty()) {
    out += " \\frac{" + (num.empty() ? std::string("1") : num) + "}{" + den + "}";
  } else if (!num.empty()) {
    out += " " + num;
  }
  return out;
}

}  // namespace detail

inline std::string render(const Signomial& s, const std::vector<std::string>& names,
                          RenderStyle style = RenderStyle::Plain, int digits = 2) {
  if (names.size() != s.dim) {
    throw Error(ErrorCode::NameCountMismatch, "got " + std::to_string(names.size()) +
                                                  " names for " + std::to_string(s.dim) +
                                                  " features");
  }
  if (s.terms.empty()) return detail::fixed(0.0, digits);
  std::string out;
  for (std::size_t k = 0; k < s.terms.size(); ++k) {
    const Term& t = s.terms[k];
    const bool leading = k == 0;
    if (!leading) out += t.alpha < 0.0 ? " - " : " + ";
    out += style == RenderStyle::Plain ? detail::render_plain_term(t, names, digits, leading)
                                       : detail::render_latex_term(t, names, digits, leading);
  }
  return out;
}

inline std::string render(const Signomial& s, RenderStyle style = RenderStyle::Plain,
                          int digits = 2) {
  return render(s, default_feature_names(s.dim), style, digits);
}

}  // namespace signolearn
