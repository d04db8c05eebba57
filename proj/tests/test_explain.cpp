#include <gtest/gtest.h>

#include <cmath>

#include "signolearn/explain.hpp"
#include "signolearn/rng.hpp"
#include "test_util.hpp"

using namespace signolearn;

namespace {

EcselModel make(std::vector<Signomial> scores, Link link = Link::Softmax) {
  EcselModel m;
  m.link = link;
  m.num_classes = link == Link::Sigmoid ? 2 : scores.size();
  m.terms = scores.front().size();
  m.scores = std::move(scores);
  return m;
}

EcselModel toy() {
  return make({Signomial(3).add(0.8, {-1.2, 0.0, -0.6}).add(0.6, {0.0, -1.5, -0.4}),
               Signomial(3).add(0.7, {1.6, 0.0, 0.8}).add(0.5, {0.0, 1.8, 0.4})});
}

Signomial random_signomial(SplitMix64& rng, std::size_t m, std::size_t K, bool positive = false) {
  Signomial s(m);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> b(m);
    for (double& v : b) v = rng.uniform(-2.0, 2.0);
    s.add(positive ? rng.uniform(0.1, 2.0) : rng.uniform(-2.0, 2.0), b);
  }
  return s;
}

std::vector<double> random_x(SplitMix64& rng, std::size_t m) {
  std::vector<double> x(m);
  for (double& v : x) v = rng.uniform(1.0, 5.0);
  return x;
}

// central difference of f along ln x_j
template <typename F>
double log_fd(F f, std::vector<double> x, std::size_t j, double h = 1e-5) {
  const double x0 = x[j];
  x[j] = x0 * std::exp(h);
  const double up = f(x);
  x[j] = x0 * std::exp(-h);
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

}  // namespace

TEST(Elasticity, SingleTermIsExponent) {
  const auto m = make({Signomial(2).add(3.0, {0.7, -1.3}), Signomial(2).add(1.0, {0.0, 0.0})});
  for (auto x : {std::vector<double>{1.0, 1.0}, std::vector<double>{2.5, 7.0}}) {
    const auto e = elasticity(m, 0, x).elasticities();
    EXPECT_NEAR(e[0], 0.7, 1e-15);
    EXPECT_NEAR(e[1], -1.3, 1e-15);
  }
}

TEST(Elasticity, TwoTermExample) {
  const auto m = make({Signomial(2).add(2.0, {1.0, 0.0}).add(1.0, {0.0, 2.0}), Signomial(2).add(1.0, {0.0, 0.0})});
  const auto e = elasticity(m, 0, std::vector<double>{2.0, 3.0});
  EXPECT_NEAR(e.score, 13.0, 1e-12);
  EXPECT_NEAR(e.elasticities()[0], 4.0 / 13.0, 1e-12);
  EXPECT_NEAR(e.elasticities()[1], 2.0 * 9.0 / 13.0, 1e-12);
  EXPECT_NEAR(e.log_gradient[0], 4.0, 1e-12);
}

TEST(Elasticity, AbsentFeature) {
  const auto e = elasticity(toy(), 0, std::vector<double>{2.0, 3.0, 4.0});
  const auto m = make({Signomial(2).add(2.0, {1.0, 0.0}), Signomial(2).add(1.0, {0.0, 0.0})});
  const auto f = elasticity(m, 0, std::vector<double>{2.0, 3.0});
  EXPECT_EQ(f.log_gradient[1], 0.0);
  EXPECT_EQ(f.elasticities()[1], 0.0);
  EXPECT_TRUE(e.elasticity.has_value());
}

TEST(Elasticity, NonPositiveScore) {
  const auto m = make({Signomial(1).add(-1.0, {1.0}), Signomial(1).add(1.0, {0.0})});
  const auto e = elasticity(m, 0, std::vector<double>{2.0});
  EXPECT_FALSE(e.elasticity.has_value());
  EXPECT_NEAR(e.log_gradient[0], -2.0, 1e-15);
  EXPECT_ERROR(e.elasticities(), ErrorCode::NonPositiveScore);
}

TEST(Elasticity, IdentityAndFiniteDifferences) {
  SplitMix64 rng(51);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(3);
    const auto model = make({random_signomial(rng, m, 1 + rng.below(3), trial % 2 == 0),
                             random_signomial(rng, m, 1 + rng.below(3))});
    const auto x = random_x(rng, m);
    const auto e = elasticity(model, 0, x);
    for (std::size_t j = 0; j < m; ++j) {
      const double fd = log_fd([&](const std::vector<double>& y) { return class_scores(model, y)[0]; }, x, j);
      EXPECT_LE(std::abs(fd - e.log_gradient[j]), 1e-6 * std::max(1.0, std::abs(fd)));
      if (e.score > 0.0) {
        EXPECT_NEAR(e.log_gradient[j], e.score * e.elasticities()[j], 1e-10 * std::abs(e.log_gradient[j]) + 1e-300);
        const double fde =
            log_fd([&](const std::vector<double>& y) { return std::log(class_scores(model, y)[0]); }, x, j);
        EXPECT_LE(std::abs(fde - e.elasticities()[j]), 1e-6 * std::max(1.0, std::abs(fde)));
      }
    }
  }
}

TEST(Counterfactual, Examples) {
  const std::vector<double> ones{1.0, 1.0, 1.0};
  EXPECT_EQ(counterfactual_scale(toy(), 1, ones, 0, 1.0), 1.2);
  EXPECT_NEAR(counterfactual_scale(toy(), 1, ones, 0, 2.0), 0.7 * std::pow(2.0, 1.6) + 0.5, 1e-12);
  EXPECT_NEAR(counterfactual_scale(toy(), 1, ones, 0, 2.0), 2.6220, 5e-5);
  const auto k1 = make({Signomial(2).add(1.5, {0.8, -0.3}), Signomial(2).add(1.0, {0.0, 0.0})});
  const std::vector<double> x{2.0, 3.0};
  EXPECT_NEAR(counterfactual_scale(k1, 0, x, 1, 4.0), std::pow(4.0, -0.3) * class_scores(k1, x)[0], 1e-14);
  EXPECT_ERROR(counterfactual_scale(toy(), 1, ones, 0, 0.0), ErrorCode::NonPositiveScale);
  EXPECT_ERROR(counterfactual_scale(toy(), 1, ones, 0, -2.0), ErrorCode::NonPositiveScale);
}

TEST(Counterfactual, MatchesDirectEvaluation) {
  SplitMix64 rng(53);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + rng.below(4);
    const auto model = make({random_signomial(rng, m, 1 + rng.below(3)), random_signomial(rng, m, 1)});
    auto x = random_x(rng, m);
    const std::size_t j = rng.below(m);
    const double q = rng.uniform(0.1, 10.0);
    const double cf = counterfactual_scale(model, 0, x, j, q);
    double mag = 0.0;
    for (double v : evaluate(model.scores[0], x).per_term) mag += std::abs(v) * std::max(1.0, std::pow(q, 2.0));
    x[j] *= q;
    EXPECT_NEAR(cf, class_scores(model, x)[0], 1e-12 * mag);
  }
}

TEST(Counterfactual, FaithfulnessOrdering) {
  SplitMix64 rng(59);
  for (int trial = 0; trial < 100; ++trial) {
    const double bk = rng.uniform(-3.0, 3.0);
    const double bl = bk * rng.uniform(-0.95, 0.95);
    const auto model = make({Signomial(2).add(rng.uniform(0.1, 2.0), {bk, bl}), Signomial(2).add(1.0, {0.0, 0.0})});
    const auto x = random_x(rng, 2);
    const double z = class_scores(model, x)[0];
    for (double r : {0.5, 2.0, 10.0}) {
      const double dk = std::abs(std::log(counterfactual_scale(model, 0, x, 0, r)) - std::log(z));
      const double dl = std::abs(std::log(counterfactual_scale(model, 0, x, 1, r)) - std::log(z));
      EXPECT_GT(dk, dl);
    }
  }
}

TEST(Sensitivity, FirstOrder) {
  const std::vector<double> x{2.0, 3.0, 1.5};
  EXPECT_EQ(sensitivity_first_order(toy(), 1, x, 0, 0.0), class_scores(toy(), x)[1]);
  const auto k1 = make({Signomial(2).add(1.5, {0.8, -0.3}), Signomial(2).add(1.0, {0.0, 0.0})});
  const std::vector<double> y{2.0, 3.0};
  const double z = class_scores(k1, y)[0];
  EXPECT_NEAR(sensitivity_first_order(k1, 0, y, 0, 0.01), z * (1.0 + 0.01 * 0.8), 1e-14);
}

TEST(Sensitivity, GapShrinksQuadratically) {
  SplitMix64 rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = make({random_signomial(rng, 3, 2), random_signomial(rng, 3, 1)});
    const auto x = random_x(rng, 3);
    const std::size_t j = rng.below(3);
    auto gap = [&](double eps) {
      return std::abs(counterfactual_scale(model, 0, x, j, 1.0 + eps) - sensitivity_first_order(model, 0, x, j, eps));
    };
    const double g1 = gap(1e-2), g2 = gap(1e-3);
    if (g1 < 1e-9) continue;  // second derivative vanishes
    EXPECT_GE(g1 / g2, 80.0);
    EXPECT_LE(g1 / g2, 120.0);
  }
}

TEST(Margin, Examples) {
  const auto same = make({Signomial(2).add(1.0, {1.0, 0.5}), Signomial(2).add(1.0, {1.0, 0.5})});
  for (double v : margin_sensitivity(same, 0, 1, std::vector<double>{2.0, 3.0}).gradient) EXPECT_EQ(v, 0.0);

  // z_c = 2 with beta 1.5, z_c' = 1 with beta 0.5 at x = 1
  const auto m = make({Signomial(1).add(2.0, {1.5}), Signomial(1).add(1.0, {0.5})});
  const auto ms = margin_sensitivity(m, 0, 1, std::vector<double>{1.0});
  EXPECT_NEAR(ms.gradient[0], 2.5, 1e-15);
  EXPECT_NEAR(ms.margin, 1.0, 1e-15);
  EXPECT_NEAR(margin_sensitivity(m, 1, 0, std::vector<double>{1.0}).gradient[0], -2.5, 1e-15);
  EXPECT_ERROR(margin_sensitivity(m, 1, 1, std::vector<double>{1.0}), ErrorCode::SameClass);
}

TEST(Margin, FiniteDifferencesAndAntisymmetry) {
  SplitMix64 rng(67);
  for (int trial = 0; trial < 100; ++trial) {
    const auto model = make({random_signomial(rng, 2, 2), random_signomial(rng, 2, 2), random_signomial(rng, 2, 1)});
    const auto x = random_x(rng, 2);
    const auto a = margin_sensitivity(model, 0, 2, x);
    const auto b = margin_sensitivity(model, 2, 0, x);
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_EQ(a.gradient[j], -b.gradient[j]);
      const double fd = log_fd([&](const std::vector<double>& y) {
        const auto z = class_scores(model, y);
        return z[0] - z[2];
      }, x, j);
      EXPECT_LE(std::abs(fd - a.gradient[j]), 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(ProbabilitySensitivity, Examples) {
  // z = (0, 0) with G_0 = 1, G_1 = 0 at x = 1: z_0 = x - 1 is not a signomial, so use
  // z_0 = 1 * x^1 - 1 and z_1 = 0 via two cancelling terms.
  const auto m = make({Signomial(1).add(1.0, {1.0}).add(-1.0, {0.0}), Signomial(1).add(1.0, {0.0}).add(-1.0, {0.0})});
  const auto s = probability_sensitivity_all(m, std::vector<double>{1.0});
  EXPECT_NEAR(s[0][0], 0.25, 1e-15);
  EXPECT_NEAR(s[1][0], -0.25, 1e-15);

  const auto shared = make({Signomial(1).add(2.0, {1.0}), Signomial(1).add(2.0, {1.0}).add(1.0, {0.0})});
  for (const auto& row : probability_sensitivity_all(shared, std::vector<double>{3.0})) EXPECT_NEAR(row[0], 0.0, 1e-15);
}

TEST(ProbabilitySensitivity, ColumnsSumToZeroAndMatchFiniteDifferences) {
  SplitMix64 rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    const bool sig = trial % 3 == 0;
    const auto model = sig ? make({random_signomial(rng, 2, 2)}, Link::Sigmoid)
                           : make({random_signomial(rng, 2, 2), random_signomial(rng, 2, 1), random_signomial(rng, 2, 2)});
    const auto x = random_x(rng, 2);
    const auto s = probability_sensitivity_all(model, x);
    for (std::size_t j = 0; j < 2; ++j) {
      double col = 0.0;
      for (std::size_t c = 0; c < s.size(); ++c) {
        col += s[c][j];
        const double fd = log_fd([&](const std::vector<double>& y) { return predict_proba(model, y)[c]; }, x, j);
        EXPECT_LE(std::abs(fd - s[c][j]), 1e-6 * std::max(1.0, std::abs(fd)));
      }
      EXPECT_NEAR(col, 0.0, 1e-12);
    }
  }
}

TEST(ExactLog, Examples) {
  const auto m = make({Signomial(1).add(2.0, {3.0}), Signomial(1).add(1.0, {0.0})});
  const std::vector<double> b{1.0}, x{std::exp(1.0)};
  auto r = attribute_exact_log(m, 0, std::nullopt, x, b);
  EXPECT_NEAR(r.phi[0], 3.0, 1e-15);
  EXPECT_NEAR(std::log(class_scores(m, x)[0]), std::log(2.0) + 3.0, 1e-14);
  EXPECT_NEAR(r.residual, 0.0, 1e-10);
  r = attribute_exact_log(m, 0, std::nullopt, b, b);
  EXPECT_EQ(r.phi[0], 0.0);
  EXPECT_EQ(r.residual, 0.0);
  const auto d = attribute_exact_log(m, 0, std::nullopt, std::vector<double>{2.0 * std::exp(1.0)}, b);
  EXPECT_NEAR(d.phi[0] - 3.0, 3.0 * std::log(2.0), 1e-14);
}

TEST(ExactLog, Errors) {
  EXPECT_ERROR(attribute_exact_log(toy(), 0, std::nullopt, std::vector<double>{1.0, 1.0, 1.0},
                                   std::vector<double>{1.0, 1.0, 1.0}),
               ErrorCode::InvalidConfig);
  const auto z = make({Signomial(1).add(0.0, {1.0}), Signomial(1).add(1.0, {0.0})});
  EXPECT_ERROR(attribute_exact_log(z, 0, std::nullopt, std::vector<double>{2.0}, std::vector<double>{1.0}),
               ErrorCode::ZeroComponentScore);
}

TEST(ExactLog, ResidualZeroForEveryComponent) {
  SplitMix64 rng(73);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 1 + rng.below(4);
    const std::size_t K = 1 + rng.below(3);
    const auto model = make({random_signomial(rng, m, K), random_signomial(rng, m, 1)});
    const auto x = random_x(rng, m), b = random_x(rng, m);
    for (std::size_t k = 0; k < K; ++k) {
      const auto r = attribute_exact_log(model, 0, k, x, b);
      EXPECT_NEAR(r.residual, 0.0, 1e-10);
      EXPECT_EQ(r.sign, model.scores[0].terms[k].alpha > 0 ? 1 : -1);
    }
  }
}

TEST(GradientAttribution, Examples) {
  const std::vector<double> xs{2.0, 3.0, 1.5};
  const auto r = attribute_gradient(toy(), 1, xs, xs, AttributionTarget::Score);
  for (double v : r.phi) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.residual, 0.0);

  const auto k1 = make({Signomial(2).add(1.5, {0.8, -0.3}), Signomial(2).add(1.0, {0.0, 0.0})});
  const std::vector<double> base{2.0, 3.0}, x{4.0, 2.0};
  const auto g = attribute_gradient(k1, 0, x, base, AttributionTarget::Score);
  const auto e = attribute_exact_log(k1, 0, std::nullopt, x, base);
  const double z = class_scores(k1, base)[0];
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(g.phi[j], z * e.phi[j], 1e-14);
}

TEST(GradientAttribution, FirstOrderAccuracy) {
  const std::vector<double> xs{2.0, 3.0, 1.5};
  for (std::size_t j = 0; j < 3; ++j) {
    auto x = xs;
    x[j] *= 1.0 + 1e-4;
    for (auto target : {AttributionTarget::Score, AttributionTarget::Probability}) {
      const auto r = attribute_gradient(toy(), 1, x, xs, target);
      double sum = 0.0;
      for (double v : r.phi) sum += v;
      EXPECT_LT(std::abs(r.residual) / std::abs(sum), 1e-3) << j;
    }
  }
}

TEST(GradientAttribution, ResidualIsSecondOrder) {
  SplitMix64 rng(79);
  for (int trial = 0; trial < 100; ++trial) {
    const auto model = make({random_signomial(rng, 3, 2), random_signomial(rng, 3, 2)});
    const auto xs = random_x(rng, 3);
    const std::size_t j = rng.below(3);
    for (auto target : {AttributionTarget::Score, AttributionTarget::Probability}) {
      auto residual = [&](double eps) {
        auto x = xs;
        x[j] *= std::exp(eps);
        return std::abs(attribute_gradient(model, 0, x, xs, target).residual);
      };
      const double r1 = residual(1e-3), r2 = residual(1e-4);
      if (r1 < 1e-10) continue;
      EXPECT_GE(r1 / r2, 80.0);
      EXPECT_LE(r1 / r2, 120.0);
    }
  }
}

TEST(Baseline, Kinds) {
  Dataset one;
  one.rows = 1;
  one.cols = 2;
  one.features = {3.0, 5.0};
  const auto gm = default_baseline(one, BaselineKind::GeometricMean);
  EXPECT_NEAR(gm[0], 3.0, 1e-15);
  EXPECT_NEAR(gm[1], 5.0, 1e-15);
  Dataset two;
  two.rows = 2;
  two.cols = 1;
  two.features = {1.0, 4.0};
  EXPECT_NEAR(default_baseline(two, BaselineKind::GeometricMean)[0], 2.0, 1e-15);
  EXPECT_EQ(default_baseline(two, BaselineKind::AllOnes), (std::vector<double>{1.0}));
  EXPECT_EQ(default_baseline(two, BaselineKind::Sample, 1), (std::vector<double>{4.0}));
  EXPECT_ERROR(default_baseline(Dataset{}, BaselineKind::AllOnes), ErrorCode::EmptyData);
  EXPECT_ERROR(default_baseline(two, BaselineKind::Sample, 5), ErrorCode::IndexOutOfRange);
}

TEST(Report, AssemblesMargins) {
  const std::vector<double> x{2.0, 3.0, 1.5};
  const auto rep = explain(toy(), 1, x, std::vector<double>{1.0, 1.0, 1.0}, AttributionMode::ExactLog, 0);
  ASSERT_EQ(rep.margins.size(), 1u);
  EXPECT_EQ(rep.margins[0].c_prime, 0u);
  EXPECT_NEAR(rep.attribution.residual, 0.0, 1e-10);
}

TEST(Report, SigmoidClasses) {
  const auto m = make({Signomial(1).add(1.0, {1.0}).add(-2.0, {0.0})}, Link::Sigmoid);
  EXPECT_EQ(class_count(m), 2u);
  EXPECT_EQ(elasticity(m, 0, std::vector<double>{3.0}).score, 0.0);
  EXPECT_NEAR(elasticity(m, 1, std::vector<double>{3.0}).score, 1.0, 1e-15);
}

TEST(Scenarios, ScoresAndThreshold) {
  auto m = make({Signomial(1).add(1.0, {1.0}).add(-2.0, {0.0})}, Link::Sigmoid);
  m.threshold = 0.6;
  const std::vector<Scenario> sc{{"low", {1.0}}, {"high", {4.0}}};
  const auto res = compare_scenarios(m, sc);
  ASSERT_EQ(res.size(), 2u);
  EXPECT_FALSE(res[0].above_threshold);
  EXPECT_TRUE(res[1].above_threshold);
  EXPECT_EQ(res[1].predicted, 1u);
  EXPECT_NEAR(res[1].probabilities[1], 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
}
