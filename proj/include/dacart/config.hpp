#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dacart/data.hpp"
#include "dacart/error.hpp"
#include "dacart/simlab.hpp"

// Scenario files: one `key = value` per line, `#` starts a comment, and a
// `[section]` line prefixes the keys that follow with `section.`.
//
//   [selection]
//   mechanism = restricted
//   score = x1
//   [models]
//   list = naive_cart, da_cart:ew1, da_cart:tw

namespace dacart {

namespace detail {

template <typename T>
T parse_integer(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end)
    throw ValidationError(std::string(key) + ": expected an integer, got '" + std::string(v) +
                          "'");
  return out;
}

inline double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end || !std::isfinite(out))
    throw ValidationError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError(std::string(key) + ": expected true or false, got '" + std::string(v) +
                        "'");
}

inline std::size_t parse_count(std::string_view key, std::string_view v) {
  const auto n = parse_integer<long long>(key, v);
  if (n < 0) throw ValidationError(std::string(key) + ": must be non-negative");
  return static_cast<std::size_t>(n);
}

// Re-tags enum parse failures with the config key.
template <typename Fn>
auto keyed(std::string_view key, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(key) + ": " + e.what());
  }
}

}  // namespace detail

// Applies one setting; unknown keys and malformed values raise
// ValidationError naming the key.
inline void apply_setting(Scenario& sc, std::string_view key, std::string_view raw) {
  using namespace detail;
  const auto v = trim(raw);
  const std::string k(key);
  if (key == "scenario.id") {
    if (v.empty()) throw ValidationError(k + ": must not be empty");
    sc.id = std::string(v);
  } else if (key == "generator.formula") {
    sc.generator.formula = keyed(key, [&] { return formula_from_string(v); });
  } else if (key == "generator.noise_sd") {
    sc.generator.noise_sd = parse_real(key, v);
  } else if (key == "selection.mechanism") {
    sc.selection.mechanism = keyed(key, [&] { return mechanism_from_string(v); });
  } else if (key == "selection.score") {
    sc.selection.score = keyed(key, [&] { return score_from_string(v); });
  } else if (key == "sample.n_source") {
    sc.n_source = parse_count(key, v);
  } else if (key == "sample.n_target_test") {
    sc.n_target_test = parse_count(key, v);
  } else if (key == "sample.pool_factor") {
    sc.pool_factor = parse_count(key, v);
  } else if (key == "sample.max_batches") {
    sc.max_batches = parse_count(key, v);
  } else if (key == "run.replications") {
    sc.replications = parse_count(key, v);
  } else if (key == "run.master_seed") {
    sc.master_seed = parse_integer<std::uint64_t>(key, v);
  } else if (key == "models.list") {
    sc.models.clear();
    std::string_view rest = v;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      if (item.empty()) throw ValidationError(k + ": empty model entry");
      sc.models.push_back(parse_model_config(item));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  } else if (key == "models.tree_features") {
    sc.tree_features = keyed(key, [&] { return tree_features_from_string(v); });
  } else if (key == "bagging.trees") {
    sc.bt_trees = parse_count(key, v);
  } else if (key == "tree.max_depth") {
    sc.tree.max_depth = parse_integer<int>(key, v);
  } else if (key == "tree.min_node_weight") {
    sc.tree.min_node_weight = parse_real(key, v);
  } else if (key == "tree.min_gain") {
    sc.tree.min_gain = parse_real(key, v);
  } else if (key == "tree.prune") {
    sc.tree.prune = parse_bool(key, v);
  } else if (key == "tree.cv_folds") {
    sc.tree.cv_folds = parse_integer<int>(key, v);
  } else if (key == "tree.complexity") {
    sc.tree.complexity = parse_real(key, v);
  } else if (key == "boost.rounds") {
    sc.boost.rounds = parse_integer<int>(key, v);
  } else if (key == "boost.learning_rate") {
    sc.boost.learning_rate = parse_real(key, v);
  } else if (key == "boost.max_depth") {
    sc.boost.max_depth = parse_integer<int>(key, v);
  } else if (key == "boost.min_node_weight") {
    sc.boost.min_node_weight = parse_real(key, v);
  } else if (key == "kliep.max_centers") {
    sc.kliep.max_centers = parse_count(key, v);
  } else if (key == "kliep.max_target_rows") {
    sc.kliep.max_target_rows = parse_count(key, v);
  } else if (key == "kliep.folds") {
    sc.kliep.folds = parse_integer<int>(key, v);
  } else if (key == "weights.trunc_lo") {
    sc.trunc.lo = parse_real(key, v);
  } else if (key == "weights.trunc_hi") {
    sc.trunc.hi = parse_real(key, v);
  } else if (key == "variables.threshold") {
    sc.selection_threshold = parse_real(key, v);
  } else {
    throw ValidationError("unknown config key '" + k + "'");
  }
}

// Applies a `key=value` override as given on the command line.
inline void apply_override(Scenario& sc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ValidationError("override '" + std::string(assignment) + "' is not key=value");
  apply_setting(sc, detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

inline Scenario parse_scenario(std::istream& in, Scenario base = {}) {
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3)
        throw ParseError("config line " + std::to_string(line_no) + ": malformed section header",
                         line_no, 1);
      section = std::string(detail::trim(s.substr(1, s.size() - 2)));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value",
                       line_no, 1);
    const auto key = detail::trim(s.substr(0, eq));
    if (key.empty())
      throw ParseError("config line " + std::to_string(line_no) + ": missing key", line_no, 1);
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    try {
      apply_setting(base, full, s.substr(eq + 1));
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ValidationError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

inline Scenario parse_scenario_string(const std::string& text, Scenario base = {}) {
  std::istringstream in(text);
  return parse_scenario(in, std::move(base));
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  return parse_scenario(in);
}

// Writes every field, so parsing the output reproduces the scenario exactly.
inline std::string to_config_text(const Scenario& sc) {
  std::ostringstream o;
  o << "[scenario]\nid = " << sc.id << "\n";
  o << "[generator]\nformula = " << to_string(sc.generator.formula)
    << "\nnoise_sd = " << format_double(sc.generator.noise_sd) << "\n";
  o << "[selection]\nmechanism = " << to_string(sc.selection.mechanism)
    << "\nscore = " << to_string(sc.selection.score) << "\n";
  o << "[sample]\nn_source = " << sc.n_source << "\nn_target_test = " << sc.n_target_test
    << "\npool_factor = " << sc.pool_factor << "\nmax_batches = " << sc.max_batches << "\n";
  o << "[run]\nreplications = " << sc.replications << "\nmaster_seed = " << sc.master_seed
    << "\n";
  o << "[models]\nlist = ";
  for (std::size_t i = 0; i < sc.models.size(); ++i)
    o << (i ? ", " : "") << sc.models[i].label();
  o << "\ntree_features = " << to_string(sc.tree_features) << "\n";
  o << "[bagging]\ntrees = " << sc.bt_trees << "\n";
  o << "[tree]\nmax_depth = " << sc.tree.max_depth
    << "\nmin_node_weight = " << format_double(sc.tree.min_node_weight)
    << "\nmin_gain = " << format_double(sc.tree.min_gain)
    << "\nprune = " << (sc.tree.prune ? "true" : "false") << "\ncv_folds = " << sc.tree.cv_folds
    << "\ncomplexity = " << format_double(sc.tree.complexity) << "\n";
  o << "[boost]\nrounds = " << sc.boost.rounds
    << "\nlearning_rate = " << format_double(sc.boost.learning_rate)
    << "\nmax_depth = " << sc.boost.max_depth
    << "\nmin_node_weight = " << format_double(sc.boost.min_node_weight) << "\n";
  o << "[kliep]\nmax_centers = " << sc.kliep.max_centers
    << "\nmax_target_rows = " << sc.kliep.max_target_rows << "\nfolds = " << sc.kliep.folds
    << "\n";
  o << "[weights]\ntrunc_lo = " << format_double(sc.trunc.lo)
    << "\ntrunc_hi = " << format_double(sc.trunc.hi) << "\n";
  o << "[variables]\nthreshold = " << format_double(sc.selection_threshold) << "\n";
  return o.str();
}

}  // namespace dacart
