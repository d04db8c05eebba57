#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "signolearn/classifier.hpp"
#include "signolearn/dataset.hpp"
#include "signolearn/error.hpp"
#include "signolearn/rng.hpp"

namespace signolearn {

/// Scaled train / validation / test partitions for one classification run.
/// The scaler is fitted on the outer training portion (train + validation).
struct HoldoutData {
  Scaler scaler;
  Dataset train;
  Dataset val;
  Dataset test;
};

inline HoldoutData holdout_protocol(const Dataset& data, std::uint64_t seed, double test_fraction = 0.2,
                                    double val_fraction = 0.2) {
  if (data.task != TaskKind::Classify) throw Error(ErrorCode::InvalidConfig, "classification needs labelled data");
  SplitSpec spec;
  spec.test_fraction = test_fraction;
  spec.seed = seed;
  spec.val_fraction = val_fraction;
  const auto parts = split(data, spec);
  std::vector<std::size_t> outer = parts.train_index;
  outer.insert(outer.end(), parts.val_index.begin(), parts.val_index.end());
  HoldoutData out;
  out.scaler = fit_scaler(data.subset(outer));
  out.train = apply_scaler(out.scaler, parts.train);
  out.val = apply_scaler(out.scaler, *parts.val);
  out.test = apply_scaler(out.scaler, parts.test);
  return out;
}

struct SearchSpace {
  std::size_t k_min = 1, k_max = 3;
  double l1_min = 1e-4, l1_max = 1e-2;        // log-uniform
  std::vector<std::size_t> batch_sizes{32, 64, 128};
  double lr_min = 1e-4, lr_max = 1e-2;        // log-uniform
  std::size_t epochs_min = 800, epochs_max = 1000;
  std::vector<std::size_t> patience{20, 50};
  std::vector<double> thresholds{0.4, 0.5, 0.6, 0.7};

  void validate() const {
    auto bad = [](const char* what) { throw Error(ErrorCode::InvalidConfig, std::string("search space: ") + what); };
    if (k_min < 1 || k_min > k_max) bad("K range");
    if (!(l1_min > 0.0 && l1_min <= l1_max)) bad("l1 range");
    if (!(lr_min > 0.0 && lr_min <= lr_max)) bad("learning-rate range");
    if (epochs_min < 1 || epochs_min > epochs_max) bad("epoch range");
    if (batch_sizes.empty() || patience.empty() || thresholds.empty()) bad("empty categorical set");
    for (auto b : batch_sizes) if (b < 1) bad("batch size");
    for (auto p : patience) if (p < 1) bad("patience");
    for (auto t : thresholds) if (!(t > 0.0 && t < 1.0)) bad("threshold");
  }
};

struct TrialParams {
  std::size_t terms = 1;
  double lambda = 1e-3;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t epochs = 1000;
  std::size_t patience = 50;
  double threshold = 0.5;

  ClassifyConfig apply(ClassifyConfig base) const {
    base.terms = terms;
    base.lambda = lambda;
    base.batch_size = batch_size;
    base.learning_rate = learning_rate;
    base.epochs = epochs;
    base.patience = patience;
    if (base.link == Link::Sigmoid) base.fixed_threshold = threshold;
    return base;
  }
};

namespace detail {

inline double log_uniform(SplitMix64& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

template <typename T>
const T& pick(SplitMix64& rng, const std::vector<T>& v) {
  return v[static_cast<std::size_t>(rng.below(v.size()))];
}

}  // namespace detail

/// The full trial sequence for a seed; a prefix of a longer run is identical.
inline std::vector<TrialParams> sample_trials(const SearchSpace& space, std::size_t n, std::uint64_t seed) {
  space.validate();
  SplitMix64 rng(derive_seed(seed, 0x73656172ULL));
  std::vector<TrialParams> out(n);
  for (auto& t : out) {
    t.terms = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(space.k_min),
                                                   static_cast<std::int64_t>(space.k_max)));
    t.lambda = detail::log_uniform(rng, space.l1_min, space.l1_max);
    t.batch_size = detail::pick(rng, space.batch_sizes);
    t.learning_rate = detail::log_uniform(rng, space.lr_min, space.lr_max);
    t.epochs = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(space.epochs_min),
                                                    static_cast<std::int64_t>(space.epochs_max)));
    t.patience = detail::pick(rng, space.patience);
    t.threshold = detail::pick(rng, space.thresholds);
  }
  return out;
}

struct TrialResult {
  std::size_t index = 0;
  TrialParams params;
  std::optional<double> val_f1;  // empty when training failed
  std::optional<double> val_accuracy;
  std::size_t best_epoch = 0;
  std::string error;
};

struct SearchResult {
  std::vector<TrialResult> trials;
  std::size_t best = 0;
  FitResult best_fit;
};

/// Trains every sampled configuration and keeps the highest validation F1;
/// ties go to the earliest trial.
inline SearchResult random_search(const Dataset& train, const Dataset& val, const SearchSpace& space,
                                  std::size_t n_trials, const ClassifyConfig& base) {
  if (n_trials < 1) throw Error(ErrorCode::InvalidConfig, "need at least one trial");
  const auto params = sample_trials(space, n_trials, base.seed);
  SearchResult res;
  std::optional<double> best_f1;
  for (std::size_t t = 0; t < n_trials; ++t) {
    TrialResult tr;
    tr.index = t;
    tr.params = params[t];
    try {
      auto fit = signolearn::fit(train, val, params[t].apply(base));
      const auto m = evaluate_model(fit.model, val);
      tr.val_f1 = m.f1;
      tr.val_accuracy = m.accuracy;
      tr.best_epoch = fit.best_epoch;
      if (!best_f1 || m.f1 > *best_f1) {
        best_f1 = m.f1;
        res.best = t;
        res.best_fit = std::move(fit);
      }
    } catch (const Error& e) {
      tr.error = e.what();
    }
    res.trials.push_back(std::move(tr));
  }
  if (!best_f1) throw Error(ErrorCode::AllRestartsFailed, "every search trial failed");
  return res;
}

}  // namespace signolearn
