#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "signolearn/regressor.hpp"
#include "signolearn/rng.hpp"
#include "test_util.hpp"

using namespace signolearn;

namespace {

Dataset regression(std::vector<double> x, std::size_t cols, std::vector<double> y) {
  Dataset d;
  d.task = TaskKind::Regress;
  d.cols = cols;
  d.rows = y.size();
  d.features = std::move(x);
  d.targets = std::move(y);
  return d;
}

Dataset sample(const Signomial& truth, std::size_t n, double lo, double hi, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Dataset d;
  d.task = TaskKind::Regress;
  d.cols = truth.dim;
  d.rows = n;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(truth.dim);
    for (double& v : x) v = rng.uniform(lo, hi);
    d.features.insert(d.features.end(), x.begin(), x.end());
    d.targets.push_back(value(truth, x));
  }
  return d;
}

TargetSpec jin2() {
  TargetSpec s;
  s.name = "Jin-2";
  s.truth = Signomial(2).add(8.0, {2.0, 0.0}).add(8.0, {0.0, 3.0}).add(-15.0, {0.0, 0.0});
  s.ranges = {{-5.0, 5.0}, {-5.0, 5.0}};
  s.terms = 3;
  s.positive_domain_only = true;
  return s;
}

TargetSpec single(const std::string& name, Signomial truth) {
  TargetSpec s;
  s.name = name;
  s.ranges.assign(truth.dim, Range{1.0, 5.0});
  s.truth = std::move(truth);
  return s;
}

}  // namespace

TEST(SrLoss, Examples) {
  const Signomial s = Signomial(1).add(2.0, {1.0});
  const auto d = regression({1.0, 2.0, 3.0}, 1, {2.0, 4.0, 6.0});
  EXPECT_LT(sr_loss_and_grad(s, d, 0.0).loss, 1e-28);
  const auto one = regression({2.0}, 1, {3.0});
  EXPECT_DOUBLE_EQ(sr_loss_and_grad(Signomial(1).add(1.0, {0.0}), one, 0.0).loss, 4.0);
  EXPECT_DOUBLE_EQ(sr_loss_and_grad(Signomial(1).add(1.0, {-0.5}), one, 2.0).loss -
                       sr_loss_and_grad(Signomial(1).add(1.0, {-0.5}), one, 0.0).loss,
                   1.0);
}

TEST(SrLoss, GradientMatchesFiniteDifferences) {
  SplitMix64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(3);
    Signomial s(m);
    for (std::size_t k = 0; k < 1 + rng.below(3); ++k) {
      std::vector<double> b(m);
      for (double& v : b) v = rng.normal(0.0, 1.0);
      s.add(rng.normal(), b);
    }
    Dataset d;
    d.task = TaskKind::Regress;
    d.cols = m;
    d.rows = 6;
    for (std::size_t i = 0; i < 6 * m; ++i) d.features.push_back(rng.uniform(1.0, 4.0));
    for (std::size_t i = 0; i < 6; ++i) d.targets.push_back(rng.normal());
    const auto lg = sr_loss_and_grad(s, d, 0.0);
    const Signomial one[] = {s};
    auto p = pack(one);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.values[i];
      const double h = 1e-6 * std::max(1.0, std::abs(saved));
      p.values[i] = saved + h;
      const double up = sr_loss_and_grad(unpack(p)[0], d, 0.0).loss;
      p.values[i] = saved - h;
      const double down = sr_loss_and_grad(unpack(p)[0], d, 0.0).loss;
      p.values[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      EXPECT_LE(std::abs(fd - lg.grad[i]), 1e-5 * std::max(1e-3, std::abs(fd)));
    }
  }
}

TEST(Score, Examples) {
  const std::vector<double> y{1.0, 2.0, 3.0};
  auto s = score_predictions(y, y);
  EXPECT_EQ(s.mse, 0.0);
  EXPECT_EQ(s.nmse(), 0.0);
  EXPECT_EQ(s.r2(), 1.0);
  s = score_predictions(y, std::vector<double>{2.0, 2.0, 2.0});
  EXPECT_NEAR(s.r2(), 0.0, 1e-15);
  s = score_predictions(y, std::vector<double>{1.0, 2.0, 4.0});
  EXPECT_NEAR(s.mse, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.r2(), 0.5, 1e-15);
  s = score_predictions(std::vector<double>{2.0, 2.0}, std::vector<double>{1.0, 2.0});
  EXPECT_DOUBLE_EQ(s.mse, 0.5);
  EXPECT_ERROR(s.nmse(), ErrorCode::ZeroVariance);
}

TEST(Score, PermutationInvariant) {
  SplitMix64 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> y(20), yh(20);
    for (double& v : y) v = rng.normal();
    for (double& v : yh) v = rng.normal();
    const double r2 = score_predictions(y, yh).r2();
    std::vector<std::size_t> idx(20);
    std::iota(idx.begin(), idx.end(), 0u);
    shuffle(std::span<std::size_t>(idx), rng);
    std::vector<double> y2, yh2;
    for (auto i : idx) {
      y2.push_back(y[i]);
      yh2.push_back(yh[i]);
    }
    EXPECT_NEAR(score_predictions(y2, yh2).r2(), r2, 1e-12);
  }
}

TEST(FitSr, ExactMonomial) {
  const Signomial truth = Signomial(2).add(2.0, {1.0, 1.0});
  const auto d = sample(truth, 200, 1.0, 5.0, 1);
  const auto fit = fit_sr(d, 1, SrConfig{}, 42);
  ASSERT_EQ(fit.signomial.size(), 1u);
  EXPECT_NEAR(fit.signomial.terms[0].alpha, 2.0, 1e-3);
  EXPECT_NEAR(fit.signomial.terms[0].beta[0], 1.0, 1e-3);
  EXPECT_NEAR(fit.signomial.terms[0].beta[1], 1.0, 1e-3);
}

TEST(FitSr, ConstantTarget) {
  const auto d = sample(Signomial(2).add(3.5, {0.0, 0.0}), 100, 1.0, 5.0, 2);
  const auto c = canonicalize(fit_sr(d, 1, SrConfig{}, 42).signomial);
  ASSERT_EQ(c.terms().size(), 1u);
  EXPECT_NEAR(c.terms()[0].alpha, 3.5, 1e-6);
  EXPECT_EQ(c.terms()[0].beta, (std::vector<double>{0.0, 0.0}));
}

TEST(FitSr, Validation) {
  const auto d = sample(Signomial(1).add(1.0, {1.0}), 20, 1.0, 5.0, 3);
  SrConfig cfg;
  cfg.lambda_refine = 0.1;
  cfg.lambda_struct = 0.01;
  EXPECT_ERROR(fit_sr(d, 1, cfg, 1), ErrorCode::InvalidConfig);
  EXPECT_ERROR(fit_sr(d, 0, SrConfig{}, 1), ErrorCode::InvalidConfig);
  cfg = {};
  cfg.seeds.clear();
  EXPECT_ERROR(cfg.validate(), ErrorCode::InvalidConfig);
}

TEST(FitSr, PrunedOutputAndMonotonicStages) {
  const auto gen = generate_benchmark_data(jin2(), 300, 0.01, 7);
  SrConfig cfg;
  cfg.adam_epochs = 1500;
  for (std::uint64_t seed : {1ULL, 2ULL}) {
    const auto fit = fit_sr(gen.data, 3, cfg, seed);
    EXPECT_LE(fit.stats.final_mse, fit.stats.stage_a_polished_mse);
    EXPECT_NEAR(score_fit(fit.signomial, gen.data).mse, fit.stats.final_mse, 1e-9 * (1.0 + fit.stats.final_mse));
    for (const auto& t : fit.signomial.terms) {
      EXPECT_GE(std::abs(t.alpha), 1e-4);
      for (double b : t.beta) EXPECT_TRUE(b == 0.0 || std::abs(b) >= 5e-3) << b;
    }
  }
}

TEST(FitSr, RandomMonomialsRecover) {
  SplitMix64 rng(47);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t m = 1 + rng.below(4);
    std::vector<double> b(m);
    for (double& v : b) v = rng.uniform(-3.0, 3.0);
    const Signomial truth = Signomial(m).add(rng.uniform(0.5, 2.0), b);
    const auto target = canonicalize(truth);
    int hits = 0;
    for (std::uint64_t seed = 42; seed <= 46; ++seed) {
      const auto d = sample(truth, 200, 1.0, 5.0, derive_seed(seed, trial));
      hits += equivalent(canonicalize(fit_sr(d, 1, SrConfig{}, seed).signomial), target);
    }
    EXPECT_GE(hits, 4) << "trial " << trial;
  }
}

TEST(Benchmark, NoiselessMatchesTruth) {
  const auto spec = single("mu-N", Signomial(2).add(1.0, {1.0, 1.0}));
  const auto gen = generate_benchmark_data(spec, 50, 0.0, 5);
  EXPECT_TRUE(gen.identity());
  for (std::size_t i = 0; i < gen.data.rows; ++i) {
    EXPECT_EQ(gen.data.targets[i], gen.data.at(i, 0) * gen.data.at(i, 1));
    EXPECT_GE(gen.data.at(i, 0), 1.0);
    EXPECT_LE(gen.data.at(i, 0), 5.0);
  }
}

TEST(Benchmark, NoiseLevel) {
  const auto spec = single("mu-N", Signomial(2).add(1.0, {1.0, 1.0}));
  const auto noisy = generate_benchmark_data(spec, 1000, 0.01, 6);
  const auto clean = generate_benchmark_data(spec, 1000, 0.0, 6);
  double mean = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) mean += noisy.data.targets[i] - clean.data.targets[i];
  mean /= 1000.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const double r = noisy.data.targets[i] - clean.data.targets[i] - mean;
    sq += r * r;
  }
  const double sd = std::sqrt(sq / 999.0);
  EXPECT_GE(sd, 0.008);
  EXPECT_LE(sd, 0.012);
}

TEST(Benchmark, Deterministic) {
  const auto a = generate_benchmark_data(jin2(), 100, 0.01, 9);
  const auto b = generate_benchmark_data(jin2(), 100, 0.01, 9);
  EXPECT_EQ(a.data.features, b.data.features);
  EXPECT_EQ(a.data.targets, b.data.targets);
  EXPECT_NE(a.data.targets, generate_benchmark_data(jin2(), 100, 0.01, 10).data.targets);
  EXPECT_EQ(draw_sample_count(jin2(), 3), draw_sample_count(jin2(), 3));
}

TEST(Benchmark, PositivityPolicy) {
  const auto gen = generate_benchmark_data(jin2(), 200, 0.0, 1);
  EXPECT_TRUE(gen.identity());
  for (double v : gen.data.features) {
    EXPECT_GE(v, 0.1);
    EXPECT_LE(v, 5.0);
  }
  auto shifted = jin2();
  shifted.positive_domain_only = false;
  const auto g2 = generate_benchmark_data(shifted, 50, 0.0, 1);
  EXPECT_FALSE(g2.identity());
  EXPECT_EQ(g2.shift, (std::vector<double>{6.0, 6.0}));
  for (double v : g2.data.features) EXPECT_GE(v, 1.0);
}

TEST(Benchmark, Errors) {
  auto spec = single("bad", Signomial(1).add(1.0, {1.0}));
  EXPECT_ERROR(generate_benchmark_data(spec, 10, 0.0, 1), ErrorCode::InvalidRange);
  spec.ranges = {{3.0, 1.0}};
  EXPECT_ERROR(generate_benchmark_data(spec, 50, 0.0, 1), ErrorCode::InvalidRange);
  spec.ranges = {{1.0, 2.0}, {1.0, 2.0}};
  EXPECT_ERROR(spec.validate(), ErrorCode::DimensionMismatch);
}

TEST(Recovery, SingleTermTargets) {
  const auto mgz = single("I.14.3", Signomial(3).add(1.0, {1.0, 1.0, 1.0}));
  const auto res = evaluate_recovery(mgz, SrConfig{});
  EXPECT_EQ(res.seeds.size(), 5u);
  EXPECT_EQ(res.recovery_rate, 1.0);
  for (const auto& o : res.seeds) {
    EXPECT_TRUE(o.judged);
    ASSERT_TRUE(o.heldout_r2);
    EXPECT_GT(*o.heldout_r2, 0.999);
  }
}

TEST(Recovery, TwoTermTargetUnreachableWithOneTerm) {
  SrConfig cfg;
  cfg.terms = 1;
  const auto res = evaluate_recovery(jin2(), cfg);
  EXPECT_EQ(res.recovery_rate, 0.0);
  for (const auto& o : res.seeds) EXPECT_TRUE(o.r2.has_value());
}
