#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "signolearn/classifier.hpp"
#include "signolearn/dataset.hpp"
#include "signolearn/error.hpp"
#include "signolearn/explain.hpp"
#include "signolearn/regressor.hpp"
#include "signolearn/signomial.hpp"

namespace signolearn {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Files

/// Writes to a sibling temp file, then renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot replace " + path.string());
  }
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Signomials

inline json to_json(const Signomial& s) {
  json terms = json::array();
  for (const auto& t : s.terms) terms.push_back({{"alpha", t.alpha}, {"beta", t.beta}});
  return {{"m", s.dim}, {"terms", std::move(terms)}};
}

inline Signomial signomial_from_json(const json& j) {
  Signomial s(j.at("m").get<std::size_t>());
  for (const auto& t : j.at("terms")) s.terms.push_back(Term{t.at("alpha").get<double>(), t.at("beta").get<std::vector<double>>()});
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Models

inline json to_json(const Scaler& sc) {
  json steps = json::array();
  for (auto s : sc.steps) steps.push_back(to_string(s));
  return {{"lo", sc.lo}, {"hi", sc.hi}, {"steps", steps}, {"mean", sc.mean},
          {"stdev", sc.stdev}, {"min", sc.min}, {"max", sc.max}};
}

inline Scaler scaler_from_json(const json& j) {
  Scaler sc;
  sc.lo = j.at("lo").get<double>();
  sc.hi = j.at("hi").get<double>();
  for (const auto& s : j.at("steps")) {
    const auto name = s.get<std::string>();
    if (name == "signed-log1p") {
      sc.steps.push_back(PreStep::SignedLog1p);
    } else if (name == "standardize") {
      sc.steps.push_back(PreStep::Standardize);
    } else {
      throw Error(ErrorCode::CorruptFile, "unknown preprocessing step '" + name + "'");
    }
  }
  sc.mean = j.at("mean").get<std::vector<double>>();
  sc.stdev = j.at("stdev").get<std::vector<double>>();
  sc.min = j.at("min").get<std::vector<double>>();
  sc.max = j.at("max").get<std::vector<double>>();
  const auto m = sc.min.size();
  if (sc.max.size() != m || sc.mean.size() != m || sc.stdev.size() != m || !(sc.lo > 0.0) || !(sc.hi > sc.lo)) {
    throw Error(ErrorCode::CorruptFile, "inconsistent scaler");
  }
  return sc;
}

inline json to_json(const EcselModel& m) {
  json scores = json::array();
  for (const auto& s : m.scores) scores.push_back(to_json(s));
  return {{"version", kSchemaVersion},
          {"link", to_string(m.link)},
          {"numClasses", m.num_classes},
          {"K", m.terms},
          {"threshold", m.threshold},
          {"featureNames", m.feature_names},
          {"classNames", m.class_names},
          {"scaler", m.scaler ? to_json(*m.scaler) : json(nullptr)},
          {"scores", std::move(scores)}};
}

inline EcselModel model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("version")) throw Error(ErrorCode::CorruptFile, "not a model file");
  if (!j.at("version").is_number_integer() || j.at("version").get<int>() != kSchemaVersion) {
    throw Error(ErrorCode::SchemaVersionMismatch,
                "model schema version " + j.at("version").dump() + ", expected " + std::to_string(kSchemaVersion));
  }
  try {
    EcselModel m;
    m.link = parse_link(j.at("link").get<std::string>());
    m.num_classes = j.at("numClasses").get<std::size_t>();
    m.terms = j.at("K").get<std::size_t>();
    m.threshold = j.at("threshold").get<double>();
    m.feature_names = j.at("featureNames").get<std::vector<std::string>>();
    m.class_names = j.at("classNames").get<std::vector<std::string>>();
    if (!j.at("scaler").is_null()) m.scaler = scaler_from_json(j.at("scaler"));
    for (const auto& s : j.at("scores")) m.scores.push_back(signomial_from_json(s));
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("malformed model: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptFile) throw;
    throw Error(ErrorCode::CorruptFile, std::string("invalid model: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& path, const EcselModel& m) { write_json(path, to_json(m)); }

inline EcselModel load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Benchmark specs

inline json to_json(const TargetSpec& s) {
  json ranges = json::array();
  for (const auto& r : s.ranges) ranges.push_back({r.lo, r.hi});
  return {{"name", s.name}, {"truth", to_json(s.truth)}, {"ranges", ranges},
          {"samples", {s.min_samples, s.max_samples}}, {"K", s.terms},
          {"positiveDomainOnly", s.positive_domain_only}};
}

inline TargetSpec target_spec_from_json(const json& j) {
  try {
    TargetSpec s;
    s.name = j.at("name").get<std::string>();
    s.truth = signomial_from_json(j.at("truth"));
    for (const auto& r : j.at("ranges")) {
      if (!r.is_array() || r.size() != 2) throw Error(ErrorCode::InvalidRange, "range must be [lo, hi]");
      s.ranges.push_back({r[0].get<double>(), r[1].get<double>()});
    }
    const auto& n = j.at("samples");
    if (!n.is_array() || n.size() != 2) throw Error(ErrorCode::InvalidRange, "samples must be [min, max]");
    s.min_samples = n[0].get<std::size_t>();
    s.max_samples = n[1].get<std::size_t>();
    s.terms = j.at("K").get<std::size_t>();
    s.positive_domain_only = j.value("positiveDomainOnly", false);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("malformed target spec: ") + e.what());
  }
}

/// A suite file is an array of specs. Entries are parsed lazily by the caller
/// so one bad spec does not sink the rest.
inline std::vector<json> read_suite(const std::filesystem::path& path) {
  const auto j = read_json(path);
  if (!j.is_array()) throw Error(ErrorCode::CorruptFile, "suite file must hold an array of target specs");
  if (j.empty()) throw Error(ErrorCode::EmptyData, "suite file is empty");
  return {j.begin(), j.end()};
}

// ---------------------------------------------------------------------------
// Results

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// Deterministic part of a recovery run; wall times are reported separately.
inline json to_json(const RecoveryResult& r, const std::vector<std::string>& names) {
  json seeds = json::array();
  for (const auto& o : r.seeds) {
    seeds.push_back({{"seed", o.seed},
                     {"samples", o.samples},
                     {"fitted", to_json(o.fitted)},
                     {"canonical", to_json(o.canonical.signomial)},
                     {"equation", render(o.canonical.signomial, names, RenderStyle::Plain, 4)},
                     {"judged", o.judged},
                     {"equivalent", o.equivalent},
                     {"mse", o.mse},
                     {"nmse", optional_number(o.nmse)},
                     {"r2", optional_number(o.r2)},
                     {"heldoutR2", optional_number(o.heldout_r2)},
                     {"usedStageC", o.stats.used_stage_c}});
  }
  return {{"version", kSchemaVersion}, {"name", r.name}, {"K", r.terms},
          {"recoveryRate", r.recovery_rate}, {"seeds", std::move(seeds)}};
}

inline json timing_json(const RecoveryResult& r) {
  json seeds = json::array();
  for (const auto& o : r.seeds) seeds.push_back({{"seed", o.seed}, {"wallTimeSeconds", o.wall_seconds}});
  return {{"name", r.name}, {"seeds", std::move(seeds)}};
}

inline json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"f1", m.f1}, {"precision", m.precision}, {"recall", m.recall},
          {"minorityRecall", m.minority_recall}, {"minorityClass", m.minority_class},
          {"confusion", m.confusion}};
}

/// Feature-name keyed map, ordered by |value| descending (index breaks ties).
inline json ranked_map(const std::vector<double>& v, const std::vector<std::string>& names) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(v[a]) > std::abs(v[b]); });
  json out = json::object();
  for (std::size_t j : order) out[names[j]] = {{"index", j}, {"value", v[j]}};
  return out;
}

inline json to_json(const ExplanationReport& rep) {
  const auto& a = rep.attribution;
  const auto& names = rep.feature_names;
  json margins = json::array();
  for (const auto& m : rep.margins) {
    margins.push_back({{"class", m.c}, {"versus", m.c_prime}, {"margin", m.margin},
                       {"gradient", ranked_map(m.gradient, names)}});
  }
  json j = {{"version", kSchemaVersion},
            {"input", a.input},
            {"baseline", a.baseline},
            {"class", a.class_index},
            {"className", rep.class_name},
            {"mode", to_string(a.mode)},
            {"target", a.mode == AttributionMode::ExactLog ? "log-score" : to_string(a.target)},
            {"term", a.term ? json(*a.term) : json(nullptr)},
            {"phi", ranked_map(a.phi, names)},
            {"change", a.change},
            {"residual", a.residual},
            {"score", rep.elasticities.score},
            {"elasticities", rep.elasticities.elasticity ? ranked_map(*rep.elasticities.elasticity, names)
                                                         : json(nullptr)},
            {"logGradients", ranked_map(rep.elasticities.log_gradient, names)},
            {"margins", std::move(margins)}};
  if (a.mode == AttributionMode::ExactLog) j["sign"] = a.sign;
  return j;
}

}  // namespace signolearn
