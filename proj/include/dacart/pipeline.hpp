#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dacart/boost.hpp"
#include "dacart/data.hpp"
#include "dacart/error.hpp"
#include "dacart/parallel.hpp"
#include "dacart/rng.hpp"
#include "dacart/tree.hpp"
#include "dacart/weights.hpp"

namespace dacart {

struct VariableSelection {
  // Schema indices in descending share order.
  std::vector<std::size_t> selected;
  std::vector<double> shares;
  double cumulative_threshold = 0.85;
  // Set when the outcome tree had no splits and all features were kept.
  bool fallback = false;

  std::vector<std::size_t> sorted_selected() const {
    auto s = selected;
    std::sort(s.begin(), s.end());
    return s;
  }
};

// Shortest prefix of features (descending share, ties by index) whose shares
// sum to at least `threshold`; the crossing feature is included.
inline VariableSelection select_by_share(std::span<const double> shares, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ValidationError("selection threshold must lie in (0, 1]");
  VariableSelection sel;
  sel.shares.assign(shares.begin(), shares.end());
  sel.cumulative_threshold = threshold;
  const double total = std::accumulate(shares.begin(), shares.end(), 0.0);
  if (!(total > 0.0)) throw DegenerateError("no informative variables");
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return shares[a] > shares[b]; });
  double cum = 0.0;
  for (auto j : order) {
    if (!(shares[j] > 0.0)) break;
    sel.selected.push_back(j);
    cum += shares[j] / total;
    if (cum >= threshold - 1e-12) break;
  }
  return sel;
}

// Step 1: pruned unit-weight CART on all features, gain shares, prefix rule.
inline VariableSelection select_variables(const Dataset& source, const FitParams& params,
                                          double threshold,
                                          TaskKind task = TaskKind::regression) {
  const std::vector<double> unit(source.rows(), 1.0);
  const Tree m1 = fit_cart(source, unit, all_features(source), params, task);
  if (m1.root().is_leaf()) throw DegenerateError("no informative variables");
  return select_by_share(gain_importance(m1), threshold);
}

enum class Estimator { propensity, kliep, true_mechanism, unit };

inline const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::propensity: return "ew";
    case Estimator::kliep: return "kliep";
    case Estimator::true_mechanism: return "true";
    case Estimator::unit: return "unit";
  }
  return "unit";
}

inline Estimator estimator_from_string(std::string_view s) {
  if (s == "ew") return Estimator::propensity;
  if (s == "kliep") return Estimator::kliep;
  if (s == "true") return Estimator::true_mechanism;
  if (s == "unit") return Estimator::unit;
  throw ValidationError("unknown estimator '" + std::string(s) + "'");
}

// Inputs for true-mechanism weights: one score per source row.
struct TrueMechanismInput {
  std::vector<double> score;
  Mechanism mechanism = Mechanism::restricted;
  double score_mean = 0.0;
};

// Features offered to the outcome tree: the Step-1 selection, or every
// feature (selection then only feeds the weight model).
enum class TreeFeatures { selected, all };

inline const char* to_string(TreeFeatures f) {
  return f == TreeFeatures::all ? "all" : "selected";
}

inline TreeFeatures tree_features_from_string(std::string_view s) {
  if (s == "selected") return TreeFeatures::selected;
  if (s == "all") return TreeFeatures::all;
  throw ValidationError("unknown tree feature set '" + std::string(s) + "'");
}

struct DaCartOptions {
  Estimator estimator = Estimator::propensity;
  TaskKind task = TaskKind::regression;
  FitParams tree;
  BoostParams boost;
  KliepParams kliep;
  TruncInterval trunc;
  double selection_threshold = 0.85;
  TreeFeatures tree_features = TreeFeatures::selected;
  // Step-2 features by name; defaults to the Step-1 selection.
  std::optional<std::vector<std::string>> weight_features;
  std::optional<TrueMechanismInput> true_mechanism;
  // Reuse a Step-1 result instead of refitting the outcome tree.
  std::optional<VariableSelection> selection;
};

struct DaCartModel {
  VariableSelection selection;
  Estimator estimator = Estimator::unit;
  std::vector<std::string> weight_features;
  std::vector<std::size_t> tree_features;
  std::optional<BoostedClassifier> weight_model;
  WeightVector weights;
  Tree tree;
  std::vector<std::string> warnings;

  std::vector<double> predict(const Dataset& rows) const { return tree.predict(rows); }
};

inline std::vector<std::string> feature_names(const Dataset& d,
                                              std::span<const std::size_t> idx) {
  std::vector<std::string> out;
  for (auto j : idx) out.push_back(d.schema.at(j).name);
  return out;
}

// Step 1 with the documented fallback: when the outcome tree has no split,
// every feature is kept and a warning is recorded.
inline VariableSelection select_or_fallback(const Dataset& source, const FitParams& params,
                                            double threshold, TaskKind task,
                                            std::vector<std::string>* warnings = nullptr) {
  try {
    return select_variables(source, params, threshold, task);
  } catch (const DegenerateError&) {
    VariableSelection sel;
    sel.selected = all_features(source);
    sel.shares.assign(source.features(), 0.0);
    sel.cumulative_threshold = threshold;
    sel.fallback = true;
    if (warnings)
      warnings->push_back("outcome tree has no splits; using all features");
    return sel;
  }
}

// Step 2 on its own: importance weights for the source rows.
inline WeightVector estimate_weights(const Dataset& source, const Dataset& target,
                                     const std::vector<std::string>& features,
                                     const DaCartOptions& opt,
                                     std::optional<BoostedClassifier>* weight_model = nullptr) {
  switch (opt.estimator) {
    case Estimator::unit:
      return unit_weights(source.rows());
    case Estimator::true_mechanism: {
      if (!opt.true_mechanism)
        throw ValidationError("true-mechanism weights need per-row scores");
      const auto& tm = *opt.true_mechanism;
      if (tm.score.size() != source.rows())
        throw ValidationError("true-mechanism score length differs from source rows");
      return true_weights(tm.score, tm.mechanism, tm.score_mean, opt.trunc);
    }
    case Estimator::propensity: {
      const auto zs = select_columns(source, features);
      const auto zt = select_columns(target, features);
      auto model = fit_propensity(zs, zt, opt.boost);
      auto w = propensity_weights(model.predict_proba(zs), opt.trunc);
      if (weight_model) *weight_model = std::move(model);
      return w;
    }
    case Estimator::kliep: {
      const auto zs = select_columns(source, features);
      const auto zt = select_columns(target, features);
      return kliep_weights(zs, zt, opt.kliep);
    }
  }
  throw Error(ErrorKind::internal, "unhandled estimator");
}

// Three steps: variable selection on the labeled source, importance weights
// from source-vs-target membership, and a weighted pruned CART grown on the
// selected features.
inline DaCartModel fit_da_cart(const Dataset& source, const Dataset& target,
                               const DaCartOptions& opt) {
  if (!source.has_response()) throw ValidationError("source dataset needs a response");
  DaCartModel m;
  m.estimator = opt.estimator;
  m.selection = opt.selection ? *opt.selection
                              : select_or_fallback(source, opt.tree, opt.selection_threshold,
                                                   opt.task, &m.warnings);
  m.weight_features = opt.weight_features
                          ? *opt.weight_features
                          : feature_names(source, m.selection.sorted_selected());
  m.weights = estimate_weights(source, target, m.weight_features, opt, &m.weight_model);
  m.tree_features = opt.tree_features == TreeFeatures::all ? all_features(source)
                                                           : m.selection.sorted_selected();
  m.tree = fit_cart(source, m.weights.values, m.tree_features, opt.tree, opt.task);
  return m;
}

// ---------------------------------------------------------------------------
// Bagged trees

enum class BagVariant { naive, da_bootstrap, da_split };

inline const char* to_string(BagVariant v) {
  switch (v) {
    case BagVariant::naive: return "naive";
    case BagVariant::da_bootstrap: return "da_bootstrap";
    case BagVariant::da_split: return "da_split";
  }
  return "naive";
}

inline BagVariant bag_variant_from_string(std::string_view s) {
  if (s == "naive") return BagVariant::naive;
  if (s == "da_bootstrap") return BagVariant::da_bootstrap;
  if (s == "da_split") return BagVariant::da_split;
  throw ValidationError("unknown bagging variant '" + std::string(s) + "'");
}

// `count` row indices drawn with replacement, P(row i) = w_i / sum(w).
// Uniform bootstraps use this same routine with unit weights.
inline std::vector<std::size_t> proportional_draws(std::span<const double> w,
                                                   std::size_t count, Rng& rng) {
  std::vector<double> cum(w.size());
  std::partial_sum(w.begin(), w.end(), cum.begin());
  const double total = cum.empty() ? 0.0 : cum.back();
  if (!(total > 0.0)) throw DegenerateError("cannot resample with zero total weight");
  std::uniform_real_distribution<double> unif(0.0, total);
  std::vector<std::size_t> out(count);
  for (auto& o : out) {
    const double u = unif(rng);
    auto k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (k == cum.size()) {
      // u rounded up to the total: take the last row with positive weight.
      k = cum.size() - 1;
      while (k > 0 && w[k] == 0.0) --k;
    }
    o = k;
  }
  return out;
}

struct BaggedModel {
  std::vector<Tree> trees;
  BagVariant variant = BagVariant::naive;
  std::optional<WeightVector> weights;
  std::uint64_t seed = 0;

  std::vector<double> predict(const Dataset& rows) const {
    if (trees.empty()) throw ValidationError("bagged model has no trees");
    std::vector<double> sum(rows.rows(), 0.0);
    for (const auto& t : trees) {
      const auto binding = t.bind(rows);
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += t.predict_row(rows, binding, i);
    }
    const auto k = static_cast<double>(trees.size());
    for (auto& v : sum) v /= k;
    return sum;
  }
};

// Tree `t` uses the RNG stream derive_seed(params.seed, t), so the ensemble is
// identical for any worker count. Member trees are never cross-validated:
// with params.prune and params.complexity > 0 they are cut at that
// complexity, otherwise they are grown unpruned.
inline BaggedModel fit_bagged(const Dataset& d, BagVariant variant, const WeightVector* weights,
                              std::size_t n_trees, std::span<const std::size_t> candidates,
                              FitParams params, TaskKind task = TaskKind::regression,
                              unsigned workers = 1) {
  if (variant != BagVariant::naive && !weights)
    throw ValidationError(std::string("bagging variant ") + to_string(variant) +
                          " requires importance weights");
  if (weights && weights->size() != d.rows())
    throw ValidationError("weight vector length differs from training rows");
  if (n_trees < 1) throw ValidationError("n_trees must be >= 1");
  const bool cut = params.prune && params.complexity > 0.0;
  params.prune = false;
  const std::size_t n = d.rows();
  const std::vector<double> unit(n, 1.0);
  BaggedModel model;
  model.variant = variant;
  model.seed = params.seed;
  if (weights) model.weights = *weights;
  model.trees.resize(n_trees);
  parallel_for(n_trees, workers, [&](std::size_t t) {
    Rng rng = make_rng(params.seed, t);
    const auto& draw_w = variant == BagVariant::da_bootstrap ? weights->values : unit;
    const auto idx = proportional_draws(draw_w, n, rng);
    std::vector<double> tree_w(n, 1.0);
    if (variant == BagVariant::da_split)
      for (std::size_t k = 0; k < n; ++k) tree_w[k] = weights->values[idx[k]];
    const Dataset sample = select_rows(d, idx);
    Tree tree = grow(sample, tree_w, candidates, params, task);
    if (cut && !tree.root().is_leaf())
      tree = prune_at(tree, params.complexity * root_loss(tree, sample, tree_w));
    model.trees[t] = std::move(tree);
  });
  return model;
}

}  // namespace dacart
