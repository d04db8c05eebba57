// signolearn command-line driver: train, predict, explain, recover, benchmark, search.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "signolearn.hpp"

namespace fs = std::filesystem;
using namespace signolearn;

namespace {

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// "42..46", "42,43,44" or a single seed.
std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  std::vector<std::uint64_t> out;
  try {
    if (auto dots = spec.find(".."); dots != std::string::npos) {
      const auto lo = std::stoull(spec.substr(0, dots));
      const auto hi = std::stoull(spec.substr(dots + 2));
      if (hi < lo) throw Error(ErrorCode::InvalidConfig, "seed range '" + spec + "' is empty");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      std::stringstream ss(spec);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoull(item));
      }
    }
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidConfig, "cannot parse seeds '" + spec + "'");
  }
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, "no seeds given");
  return out;
}

std::vector<double> parse_vector(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidConfig, "cannot parse number '" + item + "'");
    }
  }
  return out;
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  auto out = p;
  out.replace_extension();
  out += suffix;
  return out;
}

/// Reads the named feature columns (any order, extra columns ignored) and,
/// when asked, the raw target column.
struct FeatureRows {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> targets;
};

FeatureRows read_feature_rows(const std::string& path, const std::vector<std::string>& names,
                              const std::string& target) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!detail::trim(line).empty()) {
      header = detail::split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::EmptyFile, "no header row in " + path);
  for (auto& h : header) h = detail::trim(h);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> cols;
  for (const auto& n : names) cols.push_back(column(n));
  const std::optional<std::size_t> tcol = target.empty() ? std::nullopt : std::optional(column(target));

  FeatureRows out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + " has the wrong field count", line_no);
    }
    std::vector<double> row;
    for (std::size_t c : cols) {
      const auto v = detail::parse_double(detail::trim(fields[c]));
      if (!v) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + " column '" + header[c] + "' is not numeric", line_no);
      }
      row.push_back(*v);
    }
    out.rows.push_back(std::move(row));
    if (tcol) out.targets.push_back(detail::trim(fields[*tcol]));
  }
  if (out.rows.empty()) throw Error(ErrorCode::EmptyFile, "no data rows in " + path);
  return out;
}

void print_equations(const EcselModel& m) {
  const auto names = m.names();
  if (m.link == Link::Softmax) {
    for (std::size_t c = 0; c < m.scores.size(); ++c) {
      const std::string label = c < m.class_names.size() ? m.class_names[c] : std::to_string(c);
      std::cout << "z[" << label << "] = " << render(m.scores[c], names) << "\n";
    }
  } else {
    std::cout << "z = " << render(m.scores.front(), names) << "\n";
  }
}

json equations_json(const EcselModel& m) {
  json out = json::array();
  const auto names = m.names();
  for (const auto& s : m.scores) {
    out.push_back({{"plain", render(s, names, RenderStyle::Plain, 4)}, {"latex", render(s, names, RenderStyle::Latex, 4)}});
  }
  return out;
}

json trial_json(const TrialParams& p) {
  return {{"K", p.terms}, {"l1", p.lambda}, {"batch", p.batch_size}, {"lr", p.learning_rate},
          {"epochs", p.epochs}, {"patience", p.patience}, {"threshold", p.threshold}};
}

// ---------------------------------------------------------------------------
// Options

struct TrainOpts {
  std::string data, target, task = "classify", link = "softmax", out = "model.json", metrics, trace;
  std::size_t k = 1, batch = 32, epochs = 1000, patience = 50, restarts = 0;
  std::optional<double> l1, lr;
  double threshold_grid = 0.001, class_weight = 0.0;
  std::uint64_t seed = 42;
};

struct PredictOpts {
  std::string model, data, target, out;
};

struct ExplainOpts {
  std::string model, data, input, baseline, mode, target_kind = "score", counterfactual, scenarios, out;
  std::optional<std::size_t> row, term, cls, baseline_row;
};

struct RecoverOpts {
  std::string spec, suite, seeds = "42..46", out;
  double noise = 0.01;
  std::size_t k = 0, restarts = 0;
};

struct SearchOpts {
  std::string data, target, link = "softmax", out = "search.json", model;
  std::size_t trials = 10;
  std::uint64_t seed = 42;
};

// ---------------------------------------------------------------------------
// train

int cmd_train(const TrainOpts& o) {
  const TaskKind task = o.task == "regress" ? TaskKind::Regress : TaskKind::Classify;
  const fs::path out(o.out);
  const fs::path metrics_path = o.metrics.empty() ? sibling(out, ".metrics.json") : fs::path(o.metrics);
  const fs::path trace_path = o.trace.empty() ? sibling(out, ".trace.csv") : fs::path(o.trace);
  auto data = load_csv(o.data, o.target, task);
  json config = {{"command", "train"}, {"data", o.data}, {"target", o.target}, {"task", o.task}, {"K", o.k},
                 {"seed", o.seed}, {"out", o.out}};
  json metrics;
  EcselModel model;
  const auto t0 = std::chrono::steady_clock::now();

  if (task == TaskKind::Classify) {
    ClassifyConfig cfg;
    cfg.terms = o.k;
    cfg.lambda = o.l1.value_or(1e-3);
    cfg.learning_rate = o.lr.value_or(1e-3);
    cfg.batch_size = o.batch;
    cfg.epochs = o.epochs;
    cfg.patience = o.patience;
    cfg.seed = o.seed;
    cfg.link = parse_link(o.link);
    cfg.threshold_grid_step = o.threshold_grid;
    cfg.class_weight_multiplier = o.class_weight;
    cfg.validate();
    config.update({{"link", o.link}, {"l1", cfg.lambda}, {"lr", cfg.learning_rate}, {"batch", cfg.batch_size},
                   {"epochs", cfg.epochs}, {"patience", cfg.patience}, {"thresholdGrid", cfg.threshold_grid_step},
                   {"classWeight", cfg.class_weight_multiplier}, {"testFraction", 0.2}, {"valFraction", 0.2},
                   {"scaleRange", {1.0, 10.0}}});
    const auto h = holdout_protocol(data, o.seed);
    auto fit = signolearn::fit(h.train, h.val, cfg);
    model = std::move(fit.model);
    model.scaler = h.scaler;
    const auto test = evaluate_model(model, h.test);
    const auto val = evaluate_model(model, h.val);
    std::string trace = "epoch,train_loss,val_loss\n";
    for (const auto& r : fit.trace) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss);
      trace += buf;
    }
    write_file_atomic(trace_path, trace);
    metrics = {{"version", kSchemaVersion}, {"config", config}, {"accuracy", test.accuracy},
               {"test", to_json(test)}, {"validation", to_json(val)}, {"bestEpoch", fit.best_epoch},
               {"epochsRun", fit.trace.size()}, {"threshold", model.threshold}, {"equations", equations_json(model)}};
    std::cout << "test accuracy " << fmt(test.accuracy) << "  f1 " << fmt(test.f1) << "  minority recall "
              << fmt(test.minority_recall) << "\n";
  } else {
    SrConfig cfg;
    if (o.l1) {
      cfg.lambda_refine = *o.l1;
      cfg.lambda_struct = 10.0 * *o.l1;
    }
    if (o.lr) cfg.learning_rate = *o.lr;
    cfg.restarts = o.restarts;
    cfg.validate();
    config.update({{"lambdaStruct", cfg.lambda_struct}, {"lambdaRefine", cfg.lambda_refine}, {"lr", cfg.learning_rate},
                   {"restarts", cfg.effective_restarts(o.k)}, {"adamEpochs", cfg.adam_epochs}});
    auto fit = fit_sr(data, o.k, cfg, o.seed);
    model.link = Link::Identity;
    model.num_classes = 1;
    model.terms = o.k;
    model.scores = {fit.signomial};
    model.feature_names = data.feature_names;
    const auto score = score_fit(fit.signomial, data);
    metrics = {{"version", kSchemaVersion}, {"config", config}, {"mse", score.mse},
               {"nmse", score.variance > 0.0 ? json(score.nmse()) : json(nullptr)},
               {"r2", score.variance > 0.0 ? json(score.r2()) : json(nullptr)},
               {"canonical", render(canonicalize(fit.signomial).signomial, model.names(), RenderStyle::Plain, 4)},
               {"equations", equations_json(model)}};
    std::cout << "mse " << score.mse << "\n";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_model(out, model);
  write_json(metrics_path, metrics);
  write_json(sibling(metrics_path, ".timing.json"), {{"wallTimeSeconds", secs}});
  print_equations(model);
  return 0;
}

// ---------------------------------------------------------------------------
// predict

int cmd_predict(const PredictOpts& o) {
  const auto model = load_model(o.model);
  const auto rows = read_feature_rows(o.data, model.names(), o.target);
  std::ostringstream csv;
  csv << "row,prediction";
  const bool classify = model.link != Link::Identity;
  if (classify) {
    csv << ",label";
    for (std::size_t c = 0; c < model.num_classes; ++c) csv << ",p_" << c;
  }
  csv << "\n";
  std::vector<int> pred;
  for (std::size_t i = 0; i < rows.rows.size(); ++i) {
    const auto x = model.prepare(rows.rows[i]);
    csv << i;
    if (classify) {
      const auto p = predict_proba(model, x);
      const auto c = decide(model, p);
      pred.push_back(static_cast<int>(c));
      csv << "," << c << "," << (c < model.class_names.size() ? model.class_names[c] : std::to_string(c));
      for (double v : p) csv << "," << fmt(v, 10);
    } else {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", class_scores(model, x)[0]);
      csv << "," << buf;
    }
    csv << "\n";
  }
  if (o.out.empty()) {
    std::cout << csv.str();
  } else {
    write_file_atomic(o.out, csv.str());
  }
  if (classify && !o.target.empty()) {
    std::vector<int> truth;
    for (const auto& t : rows.targets) {
      auto it = std::find(model.class_names.begin(), model.class_names.end(), t);
      if (it == model.class_names.end()) throw Error(ErrorCode::ParseError, "unknown class label '" + t + "'");
      truth.push_back(static_cast<int>(it - model.class_names.begin()));
    }
    const auto m = compute_metrics(truth, pred, model.num_classes);
    std::cerr << "accuracy " << fmt(m.accuracy) << "  f1 " << fmt(m.f1) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// explain

std::size_t feature_index(const EcselModel& m, const std::string& name) {
  const auto names = m.names();
  if (auto it = std::find(names.begin(), names.end(), name); it != names.end()) {
    return static_cast<std::size_t>(it - names.begin());
  }
  throw Error(ErrorCode::IndexOutOfRange, "unknown feature '" + name + "'");
}

int cmd_explain(const ExplainOpts& o) {
  const auto model = load_model(o.model);
  json result;

  if (!o.scenarios.empty()) {
    const auto j = read_json(o.scenarios);
    if (!j.is_array()) throw Error(ErrorCode::CorruptFile, "scenario file must hold an array");
    std::vector<Scenario> sc;
    try {
      for (const auto& s : j) sc.push_back({s.at("name").get<std::string>(), s.at("input").get<std::vector<double>>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile, std::string("malformed scenario: ") + e.what());
    }
    json list = json::array();
    for (const auto& r : compare_scenarios(model, sc)) {
      json item = {{"name", r.name}, {"scores", r.scores}, {"probabilities", r.probabilities}};
      if (model.link != Link::Identity) {
        item["predicted"] = r.predicted;
        if (r.predicted < model.class_names.size()) item["className"] = model.class_names[r.predicted];
        if (model.link == Link::Sigmoid) item["aboveThreshold"] = r.above_threshold;
      }
      std::cout << r.name << ": " << (r.probabilities.empty() ? fmt(r.scores[0]) : "class " + std::to_string(r.predicted))
                << "\n";
      list.push_back(std::move(item));
    }
    result = {{"version", kSchemaVersion}, {"threshold", model.threshold}, {"scenarios", std::move(list)}};
    if (!o.out.empty()) write_json(o.out, result); else std::cout << result.dump(2) << "\n";
    return 0;
  }

  std::vector<double> raw;
  std::optional<Dataset> frame;  // data rows in the model frame, for baselines
  if (!o.data.empty()) {
    const auto rows = read_feature_rows(o.data, model.names(), "");
    Dataset d;
    d.task = TaskKind::Regress;
    d.cols = model.dim();
    for (const auto& r : rows.rows) {
      const auto x = model.prepare(r);
      d.features.insert(d.features.end(), x.begin(), x.end());
      d.targets.push_back(0.0);
      ++d.rows;
    }
    frame = std::move(d);
    if (o.input.empty()) {
      const std::size_t row = o.row.value_or(0);
      if (row >= rows.rows.size()) throw Error(ErrorCode::IndexOutOfRange, "row " + std::to_string(row) + " out of range", row);
      raw = rows.rows[row];
    }
  }
  if (!o.input.empty()) raw = parse_vector(o.input);
  if (raw.empty()) throw Error(ErrorCode::InvalidConfig, "give --input or --data with --row");
  const auto x = model.prepare(raw);
  const std::size_t cls = o.cls.value_or(model.link == Link::Identity ? 0 : predict(model, x));

  if (!o.counterfactual.empty()) {
    const auto eq = o.counterfactual.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--counterfactual expects feature=q");
    const auto name = o.counterfactual.substr(0, eq);
    const auto qs = parse_vector(o.counterfactual.substr(eq + 1));
    if (qs.size() != 1) throw Error(ErrorCode::InvalidConfig, "--counterfactual expects one scale factor");
    const std::size_t j = feature_index(model, name);
    std::vector<double> grid{0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0};
    if (std::find(grid.begin(), grid.end(), qs[0]) == grid.end()) grid.push_back(qs[0]);
    std::sort(grid.begin(), grid.end());
    const double base = elasticity(model, cls, x).score;
    const double score = counterfactual_scale(model, cls, x, j, qs[0]);
    json curve = json::array();
    for (const auto& p : counterfactual_curve(model, cls, x, j, grid)) curve.push_back({{"q", p.q}, {"score", p.score}});
    result = {{"version", kSchemaVersion}, {"input", x}, {"class", cls}, {"feature", name}, {"index", j},
              {"q", qs[0]}, {"baseScore", base}, {"score", score}, {"curve", std::move(curve)}};
    std::cout << "score " << fmt(base) << " -> " << fmt(score) << " with " << name << " x " << qs[0] << "\n";
    if (!o.out.empty()) write_json(o.out, result);
    return 0;
  }

  const std::size_t k_eff = model.link == Link::Sigmoid || cls < model.scores.size()
                                ? class_signomial(model, cls).terms.size() : 0;
  const std::string mode_name = o.mode.empty() ? (k_eff == 1 || o.term ? "exact-log" : "gradient") : o.mode;
  AttributionMode mode;
  if (mode_name == "exact-log") {
    mode = AttributionMode::ExactLog;
    if (k_eff != 1 && !o.term) {
      throw Error(ErrorCode::InvalidConfig,
                  "exact-log mode needs K = 1; pass --term for one component or use --mode gradient");
    }
  } else if (mode_name == "gradient") {
    mode = AttributionMode::Gradient;
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown mode '" + mode_name + "'");
  }
  AttributionTarget target;
  if (o.target_kind == "score") {
    target = AttributionTarget::Score;
  } else if (o.target_kind == "probability") {
    target = AttributionTarget::Probability;
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown target kind '" + o.target_kind + "'");
  }

  const std::string baseline_name = o.baseline.empty() ? (frame ? "geometric-mean" : "all-ones") : o.baseline;
  const BaselineKind bk = parse_baseline(baseline_name);
  std::vector<double> baseline;
  if (bk == BaselineKind::AllOnes) {
    baseline.assign(model.dim(), 1.0);
  } else {
    if (!frame) throw Error(ErrorCode::InvalidConfig, "baseline '" + baseline_name + "' needs --data");
    baseline = default_baseline(*frame, bk, o.baseline_row.value_or(0));
  }
  const auto rep = explain(model, cls, x, baseline, mode, o.term, target);
  result = to_json(rep);
  result["baselineKind"] = baseline_name;
  for (const auto& [name, v] : result["phi"].items()) std::cout << name << " " << fmt(v["value"].get<double>()) << "\n";
  std::cout << "residual " << rep.attribution.residual << "\n";
  if (!o.out.empty()) write_json(o.out, result);
  return 0;
}

// ---------------------------------------------------------------------------
// recover / benchmark

SrConfig recover_config(const RecoverOpts& o) {
  SrConfig cfg;
  cfg.seeds = parse_seeds(o.seeds);
  cfg.noise_sigma = o.noise;
  cfg.terms = o.k;
  cfg.restarts = o.restarts;
  cfg.validate();
  return cfg;
}

json sr_config_json(const SrConfig& cfg, std::size_t k) {
  return {{"K", k}, {"lambdaStruct", cfg.lambda_struct}, {"lambdaRefine", cfg.lambda_refine},
          {"restarts", cfg.effective_restarts(k)}, {"refineTop", cfg.refine_top}, {"adamEpochs", cfg.adam_epochs},
          {"lr", cfg.learning_rate}, {"seeds", cfg.seeds}, {"noise", cfg.noise_sigma},
          {"snapTolerance", cfg.canonical.snap_tolerance}, {"alphaPrune", cfg.canonical.alpha_prune},
          {"betaPrune", cfg.canonical.beta_prune}, {"exponentTolerance", cfg.equivalence.exponent_tolerance},
          {"coefficientTolerance", cfg.equivalence.coefficient_rel_tolerance}};
}

std::pair<double, double> time_stats(const RecoveryResult& r) {
  double mean = 0.0, var = 0.0;
  for (const auto& s : r.seeds) mean += s.wall_seconds;
  mean /= static_cast<double>(r.seeds.size());
  for (const auto& s : r.seeds) var += (s.wall_seconds - mean) * (s.wall_seconds - mean);
  return {mean, r.seeds.size() > 1 ? std::sqrt(var / static_cast<double>(r.seeds.size() - 1)) : 0.0};
}

int cmd_recover(const RecoverOpts& o) {
  const auto cfg = recover_config(o);
  const auto spec = target_spec_from_json(read_json(o.spec));
  const auto res = evaluate_recovery(spec, cfg);
  const std::size_t k = cfg.terms > 0 ? cfg.terms : spec.terms;

  std::printf("%-6s %-10s %-12s %-10s %s\n", "seed", "verdict", "nmse", "r2", "time_s");
  for (const auto& s : res.seeds) {
    std::printf("%-6llu %-10s %-12.3e %-10.6f %.3f\n", static_cast<unsigned long long>(s.seed),
                !s.judged ? "unjudged" : s.equivalent ? "recovered" : "missed", s.nmse.value_or(NAN),
                s.r2.value_or(NAN), s.wall_seconds);
  }
  std::printf("%s recovery rate %.2f\n", spec.name.c_str(), res.recovery_rate);

  if (!o.out.empty()) {
    json j = to_json(res, spec.truth.dim == 0 ? std::vector<std::string>{} : default_feature_names(spec.truth.dim));
    j["config"] = sr_config_json(cfg, k);
    j["spec"] = to_json(spec);
    write_json(o.out, j);
    write_json(sibling(o.out, ".timing.json"), timing_json(res));
  }
  return 0;
}

int cmd_benchmark(const RecoverOpts& o) {
  const auto cfg = recover_config(o);
  const auto entries = read_suite(o.suite);
  json rows = json::array(), timing = json::array();
  std::string csv = "name,K,recovery_rate,time_mean_s,time_std_s,status\n";
  std::printf("%-16s %-3s %-6s %s\n", "equation", "K", "rate", "time_s");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    std::string name = entries[i].is_object() ? entries[i].value("name", "spec " + std::to_string(i)) : "spec " + std::to_string(i);
    try {
      const auto spec = target_spec_from_json(entries[i]);
      const auto res = evaluate_recovery(spec, cfg);
      const auto [mean, sd] = time_stats(res);
      const std::size_t k = cfg.terms > 0 ? cfg.terms : spec.terms;
      rows.push_back({{"name", spec.name}, {"K", k}, {"status", "ok"}, {"recoveryRate", res.recovery_rate},
                      {"result", to_json(res, default_feature_names(spec.truth.dim))}});
      timing.push_back(timing_json(res));
      csv += spec.name + "," + std::to_string(k) + "," + fmt(res.recovery_rate, 2) + "," + fmt(mean, 4) + "," +
             fmt(sd, 4) + ",ok\n";
      std::printf("%-16s %-3zu %-6.2f %.3f +- %.3f\n", spec.name.c_str(), k, res.recovery_rate, mean, sd);
    } catch (const Error& e) {
      rows.push_back({{"name", name}, {"status", "error"}, {"error", e.what()}});
      csv += name + ",,,,,error\n";
      std::printf("%-16s error: %s\n", name.c_str(), e.what());
    }
  }
  if (!o.out.empty()) {
    write_json(o.out, {{"version", kSchemaVersion}, {"config", sr_config_json(cfg, cfg.terms)}, {"results", rows}});
    write_file_atomic(sibling(o.out, ".csv"), csv);
    write_json(sibling(o.out, ".timing.json"), timing);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// search

int cmd_search(const SearchOpts& o) {
  const auto data = load_csv(o.data, o.target, TaskKind::Classify);
  const auto h = holdout_protocol(data, o.seed);
  ClassifyConfig base;
  base.seed = o.seed;
  base.link = parse_link(o.link);
  const SearchSpace space;
  auto res = random_search(h.train, h.val, space, o.trials, base);
  auto& model = res.best_fit.model;
  model.scaler = h.scaler;
  const auto test = evaluate_model(model, h.test);

  json trials = json::array();
  for (const auto& t : res.trials) {
    trials.push_back({{"index", t.index}, {"params", trial_json(t.params)}, {"valF1", optional_number(t.val_f1)},
                      {"valAccuracy", optional_number(t.val_accuracy)}, {"bestEpoch", t.best_epoch},
                      {"error", t.error.empty() ? json(nullptr) : json(t.error)}});
    std::printf("trial %zu K=%zu l1=%.2e lr=%.2e batch=%zu epochs=%zu patience=%zu val_f1=%s\n", t.index,
                t.params.terms, t.params.lambda, t.params.learning_rate, t.params.batch_size, t.params.epochs,
                t.params.patience, t.val_f1 ? fmt(*t.val_f1).c_str() : "failed");
  }
  json config = {{"command", "search"}, {"data", o.data}, {"target", o.target}, {"trials", o.trials},
                 {"seed", o.seed}, {"link", o.link}, {"testFraction", 0.2}, {"valFraction", 0.2},
                 {"space", {{"K", {space.k_min, space.k_max}}, {"l1", {space.l1_min, space.l1_max}},
                            {"batch", space.batch_sizes}, {"lr", {space.lr_min, space.lr_max}},
                            {"epochs", {space.epochs_min, space.epochs_max}}, {"patience", space.patience},
                            {"threshold", space.thresholds}}}};
  write_json(o.out, {{"version", kSchemaVersion}, {"config", config}, {"trials", trials}, {"best", res.best},
                     {"bestParams", trial_json(res.trials[res.best].params)}, {"accuracy", test.accuracy},
                     {"test", to_json(test)}, {"equations", equations_json(model)}});
  if (!o.model.empty()) save_model(o.model, model);
  std::cout << "best trial " << res.best << "  test accuracy " << fmt(test.accuracy) << "\n";
  print_equations(model);
  return 0;
}

int exit_code(const Error& e) {
  switch (kind_of(e.code())) {
    case ErrorKind::Usage: return 2;
    case ErrorKind::Data: return 3;
    case ErrorKind::Numerical: return 4;
  }
  return 4;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signomial equation learning: sparse power-law classifiers and symbolic regression"};
  app.require_subcommand(1);

  TrainOpts train;
  auto* t = app.add_subcommand("train", "fit a model on a CSV file");
  t->add_option("--data", train.data, "CSV file with a header row")->required()->check(CLI::ExistingFile);
  t->add_option("--target", train.target, "target column name")->required();
  t->add_option("--task", train.task, "classify or regress")->check(CLI::IsMember({"classify", "regress"}));
  t->add_option("--k", train.k, "terms per score")->check(CLI::Range(1, 64));
  t->add_option("--l1", train.l1, "L1 strength on exponents");
  t->add_option("--lr", train.lr, "learning rate");
  t->add_option("--batch", train.batch, "mini-batch size")->check(CLI::PositiveNumber);
  t->add_option("--epochs", train.epochs, "maximum epochs")->check(CLI::PositiveNumber);
  t->add_option("--patience", train.patience, "early-stopping patience")->check(CLI::PositiveNumber);
  t->add_option("--seed", train.seed, "random seed");
  t->add_option("--link", train.link, "softmax or sigmoid")->check(CLI::IsMember({"softmax", "sigmoid"}));
  t->add_option("--threshold-grid", train.threshold_grid, "threshold scan step (sigmoid)");
  t->add_option("--class-weight", train.class_weight, "class-weight multiplier (0 = unweighted, 1 = balanced)");
  t->add_option("--restarts", train.restarts, "regression restarts (0 = default)");
  t->add_option("--out", train.out, "model JSON path");
  t->add_option("--metrics", train.metrics, "metrics JSON path");
  t->add_option("--trace", train.trace, "per-epoch trace CSV path");

  PredictOpts pred;
  auto* p = app.add_subcommand("predict", "apply a saved model to a CSV file");
  p->add_option("--model", pred.model, "model JSON")->required()->check(CLI::ExistingFile);
  p->add_option("--data", pred.data, "CSV with the model's feature columns")->required()->check(CLI::ExistingFile);
  p->add_option("--target", pred.target, "optional label column for scoring");
  p->add_option("--out", pred.out, "predictions CSV (stdout if omitted)");

  ExplainOpts ex;
  auto* e = app.add_subcommand("explain", "attributions, sensitivities, counterfactuals and scenarios");
  e->add_option("--model", ex.model, "model JSON")->required()->check(CLI::ExistingFile);
  e->add_option("--data", ex.data, "CSV for --row and data baselines")->check(CLI::ExistingFile);
  e->add_option("--row", ex.row, "row of --data to explain");
  e->add_option("--input", ex.input, "comma-separated raw feature values");
  e->add_option("--class", ex.cls, "class index (default: predicted class)");
  e->add_option("--baseline", ex.baseline, "geometric-mean, all-ones or sample")
      ->check(CLI::IsMember({"geometric-mean", "all-ones", "sample"}));
  e->add_option("--baseline-row", ex.baseline_row, "row used by the sample baseline");
  e->add_option("--mode", ex.mode, "exact-log or gradient")->check(CLI::IsMember({"exact-log", "gradient"}));
  e->add_option("--term", ex.term, "term index for per-component exact-log attribution");
  e->add_option("--target-kind", ex.target_kind, "gradient mode target: score or probability")
      ->check(CLI::IsMember({"score", "probability"}));
  e->add_option("--counterfactual", ex.counterfactual, "feature=q: score after scaling one feature");
  e->add_option("--scenarios", ex.scenarios, "JSON list of {name, input} to compare")->check(CLI::ExistingFile);
  e->add_option("--out", ex.out, "report JSON path");

  RecoverOpts rec;
  auto* r = app.add_subcommand("recover", "symbolic recovery of one target spec over several seeds");
  r->add_option("--spec", rec.spec, "target spec JSON")->required()->check(CLI::ExistingFile);
  r->add_option("--seeds", rec.seeds, "seed list, e.g. 42..46 or 1,2,3");
  r->add_option("--noise", rec.noise, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
  r->add_option("--k", rec.k, "terms (default: from spec)");
  r->add_option("--restarts", rec.restarts, "restarts (0 = default)");
  r->add_option("--out", rec.out, "result JSON path");

  RecoverOpts bench;
  auto* b = app.add_subcommand("benchmark", "recovery over a suite of target specs");
  b->add_option("--suite", bench.suite, "suite JSON (array of specs)")->required()->check(CLI::ExistingFile);
  b->add_option("--seeds", bench.seeds, "seed list, e.g. 42..46");
  b->add_option("--noise", bench.noise, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
  b->add_option("--k", bench.k, "override K for every spec");
  b->add_option("--restarts", bench.restarts, "restarts (0 = default)");
  b->add_option("--out", bench.out, "result JSON path (a .csv table is written beside it)");

  SearchOpts search;
  auto* s = app.add_subcommand("search", "seeded random hyperparameter search (classification)");
  s->add_option("--data", search.data, "CSV file")->required()->check(CLI::ExistingFile);
  s->add_option("--target", search.target, "label column")->required();
  s->add_option("--trials", search.trials, "number of trials")->check(CLI::PositiveNumber);
  s->add_option("--seed", search.seed, "random seed");
  s->add_option("--link", search.link, "softmax or sigmoid")->check(CLI::IsMember({"softmax", "sigmoid"}));
  s->add_option("--out", search.out, "trials log JSON path");
  s->add_option("--model", search.model, "save the best model here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: Usage: " << one_line(err.what()) << "\n";
    return 2;
  }

  try {
    if (*t) return cmd_train(train);
    if (*p) return cmd_predict(pred);
    if (*e) return cmd_explain(ex);
    if (*r) return cmd_recover(rec);
    if (*b) return cmd_benchmark(bench);
    if (*s) return cmd_search(search);
  } catch (const Error& err) {
    std::cerr << "error: " << one_line(err.what()) << "\n";
    return exit_code(err);
  } catch (const std::exception& err) {
    std::cerr << "error: Internal: " << one_line(err.what()) << "\n";
    return 4;
  }
  return 2;
}
