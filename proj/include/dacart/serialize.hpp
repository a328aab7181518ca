#pragma once

#include <chrono>
#include <ctime>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dacart/boost.hpp"
#include "dacart/data.hpp"
#include "dacart/error.hpp"
#include "dacart/pipeline.hpp"
#include "dacart/tree.hpp"
#include "dacart/weights.hpp"

namespace dacart {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kModelFormat = "dacart-model";
inline constexpr int kModelFormatVersion = 1;

// ---------------------------------------------------------------------------
// Trees

inline Json params_to_json(const FitParams& p) {
  return {{"max_depth", p.max_depth},   {"min_node_weight", p.min_node_weight},
          {"min_gain", p.min_gain},     {"prune", p.prune},
          {"cv_folds", p.cv_folds},     {"complexity", p.complexity},
          {"seed", p.seed}};
}

inline FitParams params_from_json(const Json& j) {
  FitParams p;
  p.max_depth = j.at("max_depth").get<int>();
  p.min_node_weight = j.at("min_node_weight").get<double>();
  p.min_gain = j.at("min_gain").get<double>();
  p.prune = j.at("prune").get<bool>();
  p.cv_folds = j.at("cv_folds").get<int>();
  p.complexity = j.value("complexity", 0.0);
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

namespace detail {

inline Json node_to_json(const Tree& t, std::size_t id) {
  const auto& n = t.nodes()[id];
  Json j = {{"value", n.value}, {"weight_mass", n.weight_mass}, {"count", n.count}};
  if (n.split) {
    j["split"] = {{"feature", t.schema().at(n.split->feature).name},
                  {"threshold", n.split->threshold},
                  {"gain", n.split->gain}};
    j["left"] = node_to_json(t, static_cast<std::size_t>(n.left));
    j["right"] = node_to_json(t, static_cast<std::size_t>(n.right));
  }
  return j;
}

inline std::size_t feature_by_name(const std::vector<ColumnSchema>& schema,
                                   const std::string& name) {
  for (std::size_t k = 0; k < schema.size(); ++k)
    if (schema[k].name == name) return k;
  throw ValidationError("model file: unknown feature '" + name + "'");
}

inline std::int32_t node_from_json(const Json& j, const std::vector<ColumnSchema>& schema,
                                   std::vector<Node>& out) {
  const auto id = static_cast<std::int32_t>(out.size());
  Node n;
  n.value = j.at("value").get<double>();
  n.weight_mass = j.at("weight_mass").get<double>();
  n.count = j.at("count").get<std::size_t>();
  out.push_back(n);
  if (j.contains("split")) {
    const auto& s = j.at("split");
    out[static_cast<std::size_t>(id)].split =
        SplitChoice{feature_by_name(schema, s.at("feature").get<std::string>()),
                    s.at("threshold").get<double>(), s.at("gain").get<double>()};
    const auto l = node_from_json(j.at("left"), schema, out);
    out[static_cast<std::size_t>(id)].left = l;
    const auto r = node_from_json(j.at("right"), schema, out);
    out[static_cast<std::size_t>(id)].right = r;
  }
  return id;
}

inline Json schema_to_json(const std::vector<ColumnSchema>& schema) {
  Json a = Json::array();
  for (const auto& c : schema) a.push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
  return a;
}

inline std::vector<ColumnSchema> schema_from_json(const Json& j) {
  std::vector<ColumnSchema> out;
  for (const auto& c : j)
    out.push_back({c.at("name").get<std::string>(),
                   column_kind_from_string(c.at("kind").get<std::string>())});
  return out;
}

// nlohmann errors become validation errors so callers see one error family.
template <typename Fn>
auto guard_json(Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("model file: ") + e.what());
  }
}

}  // namespace detail

inline Json tree_to_json(const Tree& t) {
  Json candidates = Json::array();
  for (auto k : t.candidates()) candidates.push_back(t.schema().at(k).name);
  Json j = {{"task", to_string(t.task())},
            {"schema", detail::schema_to_json(t.schema())},
            {"candidates", candidates},
            {"params", params_to_json(t.params())}};
  if (!t.empty()) j["root"] = detail::node_to_json(t, 0);
  return j;
}

inline Tree tree_from_json(const Json& j) {
  return detail::guard_json([&] {
    auto schema = detail::schema_from_json(j.at("schema"));
    std::vector<std::size_t> candidates;
    for (const auto& c : j.at("candidates"))
      candidates.push_back(detail::feature_by_name(schema, c.get<std::string>()));
    std::vector<Node> nodes;
    if (j.contains("root")) detail::node_from_json(j.at("root"), schema, nodes);
    return Tree(std::move(nodes), task_from_string(j.at("task").get<std::string>()),
                std::move(schema), std::move(candidates), params_from_json(j.at("params")));
  });
}

// ---------------------------------------------------------------------------
// Weight models and reports

inline Json boosted_to_json(const BoostedClassifier& m) {
  Json trees = Json::array();
  for (const auto& t : m.trees()) trees.push_back(tree_to_json(t));
  return {{"base_score", m.base_score()},
          {"learning_rate", m.learning_rate()},
          {"max_depth", m.max_depth()},
          {"schema", detail::schema_to_json(m.schema())},
          {"trees", trees}};
}

inline BoostedClassifier boosted_from_json(const Json& j) {
  return detail::guard_json([&] {
    std::vector<Tree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(tree_from_json(t));
    return BoostedClassifier(j.at("base_score").get<double>(), j.at("learning_rate").get<double>(),
                             j.at("max_depth").get<int>(), detail::schema_from_json(j.at("schema")),
                             std::move(trees));
  });
}

inline Json weight_summary(const WeightVector& w) {
  double lo = 0.0, hi = 0.0;
  if (w.size() > 0) {
    const auto [mn, mx] = std::minmax_element(w.values.begin(), w.values.end());
    lo = *mn;
    hi = *mx;
  }
  return {{"source", to_string(w.source)},
          {"n", w.size()},
          {"ess", w.size() ? effective_sample_size(w) : 0.0},
          {"min", lo},
          {"max", hi},
          {"trunc_lo", w.trunc.lo},
          {"trunc_hi", w.trunc.hi},
          {"trunc_hits", w.trunc_hits}};
}

inline Json selection_to_json(const VariableSelection& s,
                              const std::vector<ColumnSchema>& schema) {
  Json selected = Json::array();
  for (auto j : s.selected) selected.push_back(schema.at(j).name);
  Json shares = Json::object();
  for (std::size_t j = 0; j < s.shares.size(); ++j) shares[schema.at(j).name] = s.shares[j];
  return {{"selected", selected},
          {"shares", shares},
          {"threshold", s.cumulative_threshold},
          {"fallback", s.fallback}};
}

// ---------------------------------------------------------------------------
// Model files

// Any fitted model reduced to what prediction needs: the mean of its trees.
struct ModelFile {
  std::string kind;  // cart, da_cart, bagged
  TaskKind task = TaskKind::regression;
  std::vector<Tree> trees;
  Json info;  // everything else recorded at fit time

  std::vector<double> predict(const Dataset& rows) const {
    if (trees.empty()) throw ValidationError("model file holds no trees");
    if (trees.size() == 1) return trees.front().predict(rows);
    BaggedModel b;
    b.trees = trees;
    return b.predict(rows);
  }
};

inline Json model_header(const std::string& kind, TaskKind task) {
  return {{"format", kModelFormat},
          {"format_version", kModelFormatVersion},
          {"version", kVersion},
          {"kind", kind},
          {"task", to_string(task)}};
}

inline Json model_to_json(const Tree& t) {
  Json j = model_header("cart", t.task());
  j["tree"] = tree_to_json(t);
  return j;
}

inline Json model_to_json(const DaCartModel& m) {
  Json j = model_header("da_cart", m.tree.task());
  j["tree"] = tree_to_json(m.tree);
  j["estimator"] = to_string(m.estimator);
  j["selection"] = selection_to_json(m.selection, m.tree.schema());
  j["weight_features"] = m.weight_features;
  Json tf = Json::array();
  for (auto k : m.tree_features) tf.push_back(m.tree.schema().at(k).name);
  j["tree_features"] = tf;
  j["weights"] = weight_summary(m.weights);
  if (m.weight_model) j["weight_model"] = boosted_to_json(*m.weight_model);
  j["warnings"] = m.warnings;
  return j;
}

inline Json model_to_json(const BaggedModel& m) {
  const TaskKind task = m.trees.empty() ? TaskKind::regression : m.trees.front().task();
  Json j = model_header("bagged", task);
  j["variant"] = to_string(m.variant);
  j["seed"] = m.seed;
  Json trees = Json::array();
  for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
  j["trees"] = trees;
  if (m.weights) j["weights"] = weight_summary(*m.weights);
  return j;
}

inline ModelFile model_from_json(const Json& j) {
  return detail::guard_json([&] {
    if (j.value("format", "") != kModelFormat)
      throw ValidationError("model file: not a dacart model");
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw ValidationError("model file: unsupported format version");
    ModelFile m;
    m.kind = j.at("kind").get<std::string>();
    m.task = task_from_string(j.at("task").get<std::string>());
    if (j.contains("tree")) m.trees.push_back(tree_from_json(j.at("tree")));
    if (j.contains("trees"))
      for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
    if (m.trees.empty()) throw ValidationError("model file holds no trees");
    m.info = j;
    m.info.erase("tree");
    m.info.erase("trees");
    return m;
  });
}

inline void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline ModelFile load_model(const std::string& path) { return model_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Run manifests

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::vector<std::string> command_line;
  Json config = Json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
  std::chrono::system_clock::time_point finished = std::chrono::system_clock::now();

  Json to_json() const {
    return {{"version", kVersion},
            {"command_line", command_line},
            {"seed", seed},
            {"config", config},
            {"outputs", outputs},
            {"started", utc_timestamp(started)},
            {"finished", utc_timestamp(finished)}};
  }
};

}  // namespace dacart
