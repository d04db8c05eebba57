#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "signolearn/dataset.hpp"
#include "signolearn/error.hpp"
#include "signolearn/optim.hpp"
#include "signolearn/rng.hpp"
#include "signolearn/signomial.hpp"

namespace signolearn {

/// Softmax over C scores, a sigmoid over one score (binary), or the raw score
/// for regression models.
enum class Link { Softmax, Sigmoid, Identity };

inline std::string to_string(Link l) {
  switch (l) {
    case Link::Softmax: return "softmax";
    case Link::Sigmoid: return "sigmoid";
    case Link::Identity: return "identity";
  }
  return "softmax";
}

inline Link parse_link(const std::string& s) {
  if (s == "softmax") return Link::Softmax;
  if (s == "sigmoid") return Link::Sigmoid;
  if (s == "identity") return Link::Identity;
  throw Error(ErrorCode::InvalidConfig, "unknown link '" + s + "'");
}

/// Learned equations: one signomial score per class (softmax), or a single
/// score for sigmoid and identity links.
struct EcselModel {
  Link link = Link::Softmax;
  std::size_t num_classes = 2;
  std::size_t terms = 1;
  std::vector<Signomial> scores;
  double threshold = 0.5;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::optional<Scaler> scaler;

  std::size_t dim() const { return scores.empty() ? 0 : scores.front().dim; }

  void validate() const {
    if (scores.empty()) throw Error(ErrorCode::InvalidConfig, "model has no scores");
    for (const auto& s : scores) {
      s.validate();
      if (s.dim != dim()) throw Error(ErrorCode::DimensionMismatch, "score dimensions differ");
    }
    switch (link) {
      case Link::Softmax:
        if (num_classes < 2 || scores.size() != num_classes) {
          throw Error(ErrorCode::InvalidConfig, "softmax needs one score per class and C >= 2");
        }
        break;
      case Link::Sigmoid:
        if (num_classes != 2 || scores.size() != 1) {
          throw Error(ErrorCode::InvalidConfig, "sigmoid needs exactly one score and C = 2");
        }
        break;
      case Link::Identity:
        if (scores.size() != 1) throw Error(ErrorCode::InvalidConfig, "identity link needs one score");
        break;
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "threshold must lie in (0, 1)");
    }
    if (!feature_names.empty() && feature_names.size() != dim()) {
      throw Error(ErrorCode::NameCountMismatch, "feature names do not match model dimension");
    }
    if (scaler && scaler->dim() != dim()) {
      throw Error(ErrorCode::DimensionMismatch, "scaler dimension does not match model");
    }
  }

  std::vector<std::string> names() const {
    return feature_names.empty() ? default_feature_names(dim()) : feature_names;
  }

  /// Maps a raw input row into the model's positive frame.
  std::vector<double> prepare(std::span<const double> raw) const {
    if (raw.size() != dim()) throw Error(ErrorCode::DimensionMismatch, "input dimension mismatch");
    if (scaler) return scaler->apply_row(raw);
    return {raw.begin(), raw.end()};
  }
};

// ---------------------------------------------------------------------------
// Inference

inline std::vector<double> class_scores(const EcselModel& model, std::span<const double> x) {
  const auto lx = log_input(x);
  std::vector<double> z;
  z.reserve(model.scores.size());
  for (const auto& s : model.scores) z.push_back(evaluate_log(s, lx).total);
  return z;
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// ln(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline std::vector<double> softmax(std::span<const double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    p[c] = std::exp(z[c] - mx);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline std::vector<double> probabilities_from_scores(Link link, std::span<const double> z) {
  switch (link) {
    case Link::Softmax: return softmax(z);
    case Link::Sigmoid: {
      const double p1 = sigmoid(z[0]);
      return {1.0 - p1, p1};
    }
    case Link::Identity: break;
  }
  throw Error(ErrorCode::InvalidConfig, "identity-link models have no class probabilities");
}

inline std::vector<double> predict_proba(const EcselModel& model, std::span<const double> x) {
  return probabilities_from_scores(model.link, class_scores(model, x));
}

inline std::size_t decide(const EcselModel& model, std::span<const double> p) {
  if (model.link == Link::Sigmoid) return p[1] >= model.threshold ? 1 : 0;
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

inline std::size_t predict(const EcselModel& model, std::span<const double> x) {
  const auto p = predict_proba(model, x);
  return decide(model, p);
}

// ---------------------------------------------------------------------------
// Objective

/// w_c = 1 + multiplier * (N / (C * N_c) - 1): unweighted at 0, balanced at 1.
inline std::vector<double> class_weights(std::span<const int> labels, std::size_t num_classes,
                                         double multiplier) {
  std::vector<double> counts(num_classes, 0.0);
  for (int y : labels) counts[static_cast<std::size_t>(y)] += 1.0;
  const double n = static_cast<double>(labels.size());
  std::vector<double> w(num_classes, 1.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] > 0.0) {
      w[c] = 1.0 + multiplier * (n / (static_cast<double>(num_classes) * counts[c]) - 1.0);
    }
  }
  return w;
}

/// Precomputed ln x for every row of a positive dataset.
struct LogFeatures {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }

  static LogFeatures of(const Dataset& d) {
    LogFeatures lf{d.rows, d.cols, std::vector<double>(d.features.size())};
    for (std::size_t i = 0; i < d.rows; ++i) {
      auto lx = log_input(d.row(i));
      std::copy(lx.begin(), lx.end(), lf.values.begin() + static_cast<std::ptrdiff_t>(i * d.cols));
    }
    return lf;
  }
};

struct LossGrad {
  double loss = 0.0;         // smooth part plus lambda * sum |beta|
  double smooth_loss = 0.0;  // weighted cross-entropy only
  std::vector<double> grad;  // gradient of the smooth part
};

namespace detail {

/// Weighted cross-entropy over the rows in `idx` for flat parameters laid out
/// by `layout`. Writes the smooth gradient into grad when it is non-empty.
inline double cross_entropy(const ParamLayout& layout, std::span<const double> params, Link link,
                            const LogFeatures& lf, std::span<const int> labels,
                            std::span<const std::size_t> idx, std::span<const double> weights,
                            std::span<double> grad) {
  const std::size_t outputs = layout.outputs;
  const std::size_t K = layout.terms;
  const std::size_t m = layout.dim;
  const double inv_n = 1.0 / static_cast<double>(idx.size());
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);

  std::vector<double> mono(outputs * K), z(outputs), dz(outputs);
  double total = 0.0;
  for (std::size_t i : idx) {
    auto lx = lf.row(i);
    for (std::size_t c = 0; c < outputs; ++c) {
      double zc = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t a = layout.alpha_index(c, k);
        double e = 0.0;
        for (std::size_t j = 0; j < m; ++j) e += params[a + 1 + j] * lx[j];
        const double mk = signolearn::detail::guarded_exp(e, k);
        mono[c * K + k] = mk;
        zc += params[a] * mk;
      }
      z[c] = zc;
    }
    const auto y = static_cast<std::size_t>(labels[i]);
    const double w = weights[y];
    if (link == Link::Sigmoid) {
      const double t = y == 1 ? 1.0 : 0.0;
      total += w * (t * softplus(-z[0]) + (1.0 - t) * softplus(z[0]));
      dz[0] = w * (sigmoid(z[0]) - t) * inv_n;
    } else {
      const double mx = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (std::size_t c = 0; c < outputs; ++c) sum += std::exp(z[c] - mx);
      const double lse = mx + std::log(sum);
      total += w * (lse - z[y]);
      for (std::size_t c = 0; c < outputs; ++c) {
        const double p = std::exp(z[c] - lse);
        dz[c] = w * (p - (c == y ? 1.0 : 0.0)) * inv_n;
      }
    }
    if (grad.empty()) continue;
    for (std::size_t c = 0; c < outputs; ++c) {
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t a = layout.alpha_index(c, k);
        const double mk = mono[c * K + k];
        grad[a] += dz[c] * mk;
        const double zk = dz[c] * params[a] * mk;
        for (std::size_t j = 0; j < m; ++j) grad[a + 1 + j] += zk * lx[j];
      }
    }
  }
  return total * inv_n;
}

}  // namespace detail

/// Cross-entropy plus L1 on all exponents over a batch of model-frame rows.
inline LossGrad loss_and_grad(const EcselModel& model, const Dataset& batch, double lambda,
                              std::span<const double> weights) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "empty batch");
  if (model.link == Link::Identity) {
    throw Error(ErrorCode::InvalidConfig, "cross-entropy needs a classification link");
  }
  if (weights.size() != model.num_classes) {
    throw Error(ErrorCode::LengthMismatch, "need one class weight per class");
  }
  const auto lf = LogFeatures::of(batch);
  const auto params = pack(model.scores);
  std::vector<std::size_t> idx(batch.rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  LossGrad out;
  out.grad.resize(params.size());
  out.smooth_loss = detail::cross_entropy(params.layout, params.values, model.link, lf,
                                          batch.labels, idx, weights, out.grad);
  out.loss = out.smooth_loss + lambda * l1_norm(params.values, params.layout.beta_indices());
  if (!std::isfinite(out.loss)) throw Error(ErrorCode::NonFiniteLoss, "loss is not finite");
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct ClassifyConfig {
  std::size_t terms = 1;
  double lambda = 1e-3;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 1000;
  std::size_t patience = 50;
  double min_delta = 0.0;
  double class_weight_multiplier = 0.0;
  std::uint64_t seed = 42;
  Link link = Link::Softmax;
  double threshold_grid_step = 0.001;
  std::optional<double> fixed_threshold;  // sigmoid: use this instead of the grid scan
  double clip_norm = 1.0;

  void validate() const {
    if (terms < 1) throw Error(ErrorCode::InvalidConfig, "K must be >= 1");
    if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda must be >= 0");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be > 0");
    if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch size must be >= 1");
    if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 1");
    if (patience < 1) throw Error(ErrorCode::InvalidConfig, "patience must be >= 1");
    if (!(threshold_grid_step > 0.0 && threshold_grid_step < 0.5)) {
      throw Error(ErrorCode::InvalidConfig, "threshold grid step must lie in (0, 0.5)");
    }
    if (!(clip_norm > 0.0)) throw Error(ErrorCode::InvalidConfig, "clip norm must be > 0");
    if (fixed_threshold && !(*fixed_threshold > 0.0 && *fixed_threshold < 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "threshold must lie in (0, 1)");
    }
    if (link == Link::Identity) throw Error(ErrorCode::InvalidConfig, "classification needs softmax or sigmoid");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // full batch, L1 included
  double val_loss = 0.0;    // weighted cross-entropy
};

struct FitResult {
  EcselModel model;
  std::vector<EpochRecord> trace;
  std::size_t best_epoch = 0;
};

/// Initial parameters: alpha ~ N(0.1, 0.1), beta ~ N(0, 0.05).
inline std::vector<double> initial_parameters(const ParamLayout& layout, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, 1));
  std::vector<double> p(layout.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = i % layout.stride() == 0 ? rng.normal(0.1, 0.1) : rng.normal(0.0, 0.05);
  }
  return p;
}

// Defined below; fit() uses it for sigmoid models.
inline double select_threshold(std::span<const double> positive_probs, std::span<const int> labels,
                               double grid_step);

/// Mini-batch Adam with proximal L1 on the exponents and early stopping on the
/// validation cross-entropy. Returns the best-validation snapshot.
inline FitResult fit(const Dataset& train, const Dataset& val, const ClassifyConfig& cfg) {
  cfg.validate();
  if (train.task != TaskKind::Classify || val.task != TaskKind::Classify) {
    throw Error(ErrorCode::InvalidConfig, "classification needs labelled data");
  }
  if (train.empty() || val.empty()) throw Error(ErrorCode::EmptyData, "train and validation sets must be non-empty");
  if (train.cols != val.cols) throw Error(ErrorCode::DimensionMismatch, "train/val feature counts differ");
  const std::size_t C = std::max(train.num_classes(), val.num_classes());
  if (C < 2) throw Error(ErrorCode::InvalidConfig, "need at least two classes");
  if (cfg.link == Link::Sigmoid && C != 2) {
    throw Error(ErrorCode::NotBinary, "sigmoid link requires a binary task");
  }

  const std::size_t outputs = cfg.link == Link::Sigmoid ? 1 : C;
  const ParamLayout layout{outputs, cfg.terms, train.cols};
  std::vector<double> params = initial_parameters(layout, cfg.seed);
  const auto beta_mask = layout.beta_indices();
  const auto weights = class_weights(train.labels, C, cfg.class_weight_multiplier);

  const auto lf_train = LogFeatures::of(train);
  const auto lf_val = LogFeatures::of(val);
  std::vector<std::size_t> all_train(train.rows), all_val(val.rows);
  std::iota(all_train.begin(), all_train.end(), std::size_t{0});
  std::iota(all_val.begin(), all_val.end(), std::size_t{0});

  AdamState adam(params.size(), cfg.learning_rate);
  EarlyStopPolicy stopper(cfg.patience, cfg.min_delta);
  std::vector<double> grad(params.size());
  std::vector<std::size_t> order = all_train;
  FitResult result;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    SplitMix64 shuffler(derive_seed(cfg.seed, 0x5eed0000ULL + epoch));
    order = all_train;
    shuffle(std::span<std::size_t>(order), shuffler);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> batch(order.data() + start, stop - start);
      detail::cross_entropy(layout, params, cfg.link, lf_train, train.labels, batch, weights, grad);
      adam_step(adam, params, grad, cfg.clip_norm);
      prox_l1(params, beta_mask, cfg.learning_rate, cfg.lambda);
    }
    const double train_ce = detail::cross_entropy(layout, params, cfg.link, lf_train, train.labels,
                                                  all_train, weights, {});
    const double train_loss = train_ce + cfg.lambda * l1_norm(params, beta_mask);
    // same regularized objective as training, so strong L1 settles on the sparse optimum
    const double val_loss = detail::cross_entropy(layout, params, cfg.link, lf_val, val.labels,
                                                  all_val, weights, {}) +
                            cfg.lambda * l1_norm(params, beta_mask);
    if (!std::isfinite(train_loss) || !std::isfinite(val_loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "loss diverged at epoch " + std::to_string(epoch), epoch);
    }
    result.trace.push_back({epoch, train_loss, val_loss});
    if (stopper.update(val_loss, params) == StopDecision::Stop) break;
  }

  result.best_epoch = stopper.best_epoch();
  EcselModel& model = result.model;
  model.link = cfg.link;
  model.num_classes = C;
  model.terms = cfg.terms;
  model.scores = unpack(layout, stopper.best_params());
  model.feature_names = train.feature_names;
  model.class_names = train.class_names;
  if (cfg.link == Link::Sigmoid && cfg.fixed_threshold) {
    model.threshold = *cfg.fixed_threshold;
  } else if (cfg.link == Link::Sigmoid) {
    std::vector<double> probs;
    probs.reserve(val.rows);
    for (std::size_t i = 0; i < val.rows; ++i) probs.push_back(predict_proba(model, val.row(i))[1]);
    model.threshold = select_threshold(probs, val.labels, cfg.threshold_grid_step);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Thresholds and metrics

namespace detail {

inline double binary_f1(std::span<const double> probs, std::span<const int> labels, double t) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = probs[i] >= t;
    const bool pos = labels[i] == 1;
    tp += pred && pos;
    fp += pred && !pos;
    fn += !pred && pos;
  }
  const double denom = static_cast<double>(2 * tp + fp + fn);
  return denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

}  // namespace detail

/// Scans step, 2*step, ..., 1 - step and returns the F1-maximising threshold
/// for the positive class; ties go to the lowest threshold.
inline double select_threshold(std::span<const double> positive_probs, std::span<const int> labels,
                               double grid_step) {
  if (positive_probs.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "probabilities and labels differ in length");
  }
  if (positive_probs.empty()) throw Error(ErrorCode::EmptyData, "no validation rows");
  if (!(grid_step > 0.0 && grid_step < 0.5)) {
    throw Error(ErrorCode::InvalidConfig, "grid step must lie in (0, 0.5)");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(ErrorCode::NotBinary, "threshold selection needs 0/1 labels");
  }
  const auto n = static_cast<std::size_t>(std::lround(1.0 / grid_step));
  double best_t = grid_step;
  double best_f1 = -1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double t = static_cast<double>(i) * grid_step;
    const double f1 = detail::binary_f1(positive_probs, labels, t);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

inline double select_threshold(const EcselModel& model, const Dataset& val, double grid_step) {
  if (model.num_classes != 2 || model.link == Link::Identity) {
    throw Error(ErrorCode::NotBinary, "threshold selection needs a binary model");
  }
  std::vector<double> probs;
  probs.reserve(val.rows);
  for (std::size_t i = 0; i < val.rows; ++i) probs.push_back(predict_proba(model, val.row(i))[1]);
  return select_threshold(probs, val.labels, grid_step);
}

enum class Averaging { Weighted, Macro };

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double minority_recall = 0.0;
  std::size_t minority_class = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
};

inline Metrics compute_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                               std::size_t num_classes, Averaging avg = Averaging::Weighted) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::LengthMismatch, "label vectors differ in length");
  }
  if (y_true.empty()) throw Error(ErrorCode::EmptyData, "no labels to score");
  const std::size_t C = num_classes;
  Metrics m;
  m.confusion.assign(C, std::vector<std::size_t>(C, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_pred[i] < 0 || static_cast<std::size_t>(y_true[i]) >= C ||
        static_cast<std::size_t>(y_pred[i]) >= C) {
      throw Error(ErrorCode::IndexOutOfRange, "label out of range", i);
    }
    ++m.confusion[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
  }
  const double n = static_cast<double>(y_true.size());
  std::size_t correct = 0;
  std::optional<std::size_t> minority;
  double weight_sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    correct += m.confusion[c][c];
    std::size_t support = 0, predicted = 0;
    for (std::size_t r = 0; r < C; ++r) {
      support += m.confusion[c][r];
      predicted += m.confusion[r][c];
    }
    if (support == 0) continue;
    if (!minority || support < std::accumulate(m.confusion[*minority].begin(), m.confusion[*minority].end(), std::size_t{0})) {
      minority = c;
    }
    const double tp = static_cast<double>(m.confusion[c][c]);
    const double prec = predicted > 0 ? tp / static_cast<double>(predicted) : 0.0;
    const double rec = tp / static_cast<double>(support);
    const double f1 = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    const double w = avg == Averaging::Weighted ? static_cast<double>(support) : 1.0;
    m.precision += w * prec;
    m.recall += w * rec;
    m.f1 += w * f1;
    weight_sum += w;
  }
  m.precision /= weight_sum;
  m.recall /= weight_sum;
  m.f1 /= weight_sum;
  m.accuracy = static_cast<double>(correct) / n;
  m.minority_class = *minority;
  const auto& row = m.confusion[*minority];
  m.minority_recall = static_cast<double>(row[*minority]) /
                      static_cast<double>(std::accumulate(row.begin(), row.end(), std::size_t{0}));
  return m;
}

/// Predicts every row (already in the model frame) and scores against labels.
inline Metrics evaluate_model(const EcselModel& model, const Dataset& data,
                              Averaging avg = Averaging::Weighted) {
  std::vector<int> pred(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) pred[i] = static_cast<int>(predict(model, data.row(i)));
  return compute_metrics(data.labels, pred, model.num_classes, avg);
}

}  // namespace signolearn
