#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "signolearn/dataset.hpp"
#include "signolearn/rng.hpp"
#include "test_util.hpp"

using namespace signolearn;

namespace {

Dataset parse(const std::string& text, const std::string& target = "y", TaskKind task = TaskKind::Classify) {
  std::istringstream in(text);
  return load_csv(in, target, task);
}

Dataset column(std::vector<double> v) {
  Dataset d;
  d.task = TaskKind::Regress;
  d.rows = v.size();
  d.cols = 1;
  d.features = std::move(v);
  d.targets.assign(d.rows, 0.0);
  return d;
}

Dataset balanced(std::size_t per_class, std::size_t minority = 0) {
  Dataset d;
  d.cols = 1;
  auto push = [&](int label) {
    d.features.push_back(static_cast<double>(d.rows + 1));
    d.labels.push_back(label);
    ++d.rows;
  };
  for (std::size_t i = 0; i < per_class; ++i) push(0);
  for (std::size_t i = 0; i < (minority ? minority : per_class); ++i) push(1);
  return d;
}

}  // namespace

TEST(Csv, IntegerLabels) {
  const auto d = parse("a,b,y\n1,2,0\n3,4,1\n5,6,0\n");
  EXPECT_EQ(d.rows, 3u);
  EXPECT_EQ(d.cols, 2u);
  EXPECT_EQ(d.labels, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_DOUBLE_EQ(d.at(2, 1), 6.0);
}

TEST(Csv, StringLabelsByFirstAppearance) {
  const auto d = parse("x,y\n1,cat\n2,dog\n3,cat\n");
  EXPECT_EQ(d.class_names, (std::vector<std::string>{"cat", "dog"}));
  EXPECT_EQ(d.labels, (std::vector<int>{0, 1, 0}));
  const auto e = parse("x,y\n1,dog\n2,cat\n");
  EXPECT_EQ(e.class_names, (std::vector<std::string>{"dog", "cat"}));
}

TEST(Csv, TargetColumnAnywhere) {
  const auto d = parse("y,a\n2.5,1\n3.5,2\n", "y", TaskKind::Regress);
  EXPECT_EQ(d.targets, (std::vector<double>{2.5, 3.5}));
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a"}));
}

TEST(Csv, EmptyCellNamesRow) {
  try {
    parse("a,b,y\n1,2,0\n3,,1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_EQ(e.index(), 3u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Csv, Failures) {
  EXPECT_ERROR(parse("a,b\n1,2\n"), ErrorCode::MissingColumn);
  EXPECT_ERROR(parse(""), ErrorCode::EmptyFile);
  EXPECT_ERROR(parse("a,y\n"), ErrorCode::EmptyFile);
  EXPECT_ERROR(parse("a,y\nred,0\n"), ErrorCode::ParseError);
  EXPECT_ERROR(parse("a,y\n1,0,3\n"), ErrorCode::ParseError);
  EXPECT_ERROR(parse("a,y\nnan,0\n"), ErrorCode::ParseError);
  EXPECT_ERROR(load_csv("/nonexistent/file.csv", "y", TaskKind::Classify), ErrorCode::IoError);
}

TEST(Csv, Iris) {
  const auto d = load_csv(std::string(SIGNOLEARN_DATA_DIR) + "/iris.csv", "species", TaskKind::Classify);
  EXPECT_EQ(d.rows, 150u);
  EXPECT_EQ(d.cols, 4u);
  EXPECT_EQ(d.num_classes(), 3u);
  EXPECT_EQ(d.class_counts(), (std::vector<std::size_t>{50, 50, 50}));
}

TEST(Scaler, AffineMap) {
  const auto d = column({0.0, 5.0, 10.0});
  const auto s = apply_scaler(fit_scaler(d), d);
  EXPECT_EQ(s.features, (std::vector<double>{1.0, 5.5, 10.0}));
}

TEST(Scaler, ConstantColumnMapsToLow) {
  const auto d = column({7.0, 7.0, 7.0});
  EXPECT_EQ(apply_scaler(fit_scaler(d), d).features, (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Scaler, ClampsUnseenValues) {
  const auto sc = fit_scaler(column({0.0, 10.0}));
  EXPECT_EQ(apply_scaler(sc, column({-5.0, 20.0})).features, (std::vector<double>{1.0, 10.0}));
}

TEST(Scaler, InvalidRange) {
  EXPECT_ERROR(fit_scaler(column({1.0}), 0.0, 10.0), ErrorCode::InvalidRange);
  EXPECT_ERROR(fit_scaler(column({1.0}), 5.0, 2.0), ErrorCode::InvalidRange);
}

TEST(Scaler, OutputAlwaysInRange) {
  SplitMix64 rng(2);
  std::vector<double> train(50), test(500);
  for (double& v : train) v = rng.normal(0.0, 100.0);
  for (double& v : test) v = rng.normal(0.0, 300.0);
  const auto sc = fit_scaler(column(train), 0.5, 3.0, {PreStep::SignedLog1p, PreStep::Standardize});
  for (double v : apply_scaler(sc, column(test)).features) {
    EXPECT_GE(v, 0.5);
    EXPECT_LE(v, 3.0);
  }
  const auto tr = apply_scaler(fit_scaler(column(train)), column(train)).features;
  EXPECT_EQ(*std::min_element(tr.begin(), tr.end()), 1.0);
  EXPECT_EQ(*std::max_element(tr.begin(), tr.end()), 10.0);
}

TEST(Split, StratifiedProportions) {
  const auto d = balanced(50);
  const auto s = split(d, SplitSpec{});
  EXPECT_EQ(s.test.rows, 20u);
  EXPECT_EQ(s.test.class_counts(), (std::vector<std::size_t>{10, 10}));
}

TEST(Split, SmallMinority) {
  const auto d = balanced(45, 5);
  const auto s = split(d, SplitSpec{});
  EXPECT_EQ(s.test.class_counts()[1], 1u);
}

TEST(Split, ClassTooSmall) {
  EXPECT_ERROR(split(balanced(45, 1), SplitSpec{}), ErrorCode::ClassTooSmall);
  Dataset r = column({1.0, 2.0});
  SplitSpec spec;
  EXPECT_ERROR(split(r, spec), ErrorCode::InvalidConfig);
}

TEST(Split, DeterministicDisjointExhaustive) {
  const auto d = balanced(37, 23);
  SplitSpec spec;
  spec.val_fraction = 0.2;
  for (std::uint64_t seed : {1ULL, 2ULL, 42ULL}) {
    spec.seed = seed;
    const auto a = split(d, spec);
    const auto b = split(d, spec);
    EXPECT_EQ(a.train_index, b.train_index);
    EXPECT_EQ(a.test_index, b.test_index);
    EXPECT_EQ(a.val_index, b.val_index);
    std::vector<std::size_t> all = a.train_index;
    all.insert(all.end(), a.test_index.begin(), a.test_index.end());
    all.insert(all.end(), a.val_index.begin(), a.val_index.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(d.rows);
    std::iota(expect.begin(), expect.end(), 0u);
    EXPECT_EQ(all, expect);
  }
  spec.seed = 1;
  const auto x = split(d, spec);
  spec.seed = 2;
  EXPECT_NE(x.test_index, split(d, spec).test_index);
}

TEST(Split, UnstratifiedRegression) {
  std::vector<double> v(40);
  std::iota(v.begin(), v.end(), 1.0);
  SplitSpec spec;
  spec.stratified = false;
  const auto s = split(column(v), spec);
  EXPECT_EQ(s.test.rows, 8u);
  EXPECT_EQ(s.train.rows, 32u);
}
