#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "dacart/data.hpp"
#include "dacart/error.hpp"
#include "dacart/tree.hpp"

namespace dacart {

struct BoostParams {
  int rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double min_node_weight = 10.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (rounds < 1) throw ValidationError("boosting rounds must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
      throw ValidationError("learning_rate must lie in (0, 1]");
    if (max_depth < 1) throw ValidationError("boosting max_depth must be >= 1");
    if (!(min_node_weight > 0.0))
      throw ValidationError("boosting min_node_weight must be > 0");
  }
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Gradient-boosted regression trees under logistic loss, estimating
// P(W = 1 | z) where W = 1 marks target-domain rows.
class BoostedClassifier {
 public:
  BoostedClassifier() = default;
  BoostedClassifier(double base_score, double learning_rate, int max_depth,
                    std::vector<ColumnSchema> schema, std::vector<Tree> trees = {})
      : base_score_(base_score),
        learning_rate_(learning_rate),
        max_depth_(max_depth),
        schema_(std::move(schema)),
        trees_(std::move(trees)) {}

  double base_score() const { return base_score_; }
  double learning_rate() const { return learning_rate_; }
  int max_depth() const { return max_depth_; }
  std::size_t rounds() const { return trees_.size(); }
  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<ColumnSchema>& schema() const { return schema_; }
  // Mean logistic loss on the training pool after each round (index 0 is
  // the base score alone).
  const std::vector<double>& training_loss() const { return training_loss_; }

  std::vector<double> decision_function(const Dataset& rows) const {
    for (const auto& c : schema_)
      if (!rows.find(c.name))
        throw ValidationError("schema mismatch: rows lack feature '" + c.name + "'");
    std::vector<double> f(rows.rows(), base_score_);
    for (const auto& t : trees_) {
      const auto binding = t.bind(rows);
      for (std::size_t i = 0; i < f.size(); ++i)
        f[i] += learning_rate_ * t.predict_row(rows, binding, i);
    }
    return f;
  }

  std::vector<double> predict_proba(const Dataset& rows) const {
    auto p = decision_function(rows);
    for (auto& v : p) v = clamp_open(sigmoid(v));
    return p;
  }

  // Keeps probabilities strictly inside (0, 1) even when the score saturates.
  static double clamp_open(double p) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    return std::clamp(p, lo, hi);
  }

 private:
  friend BoostedClassifier fit_propensity(const Dataset&, const Dataset&, const BoostParams&);

  double base_score_ = 0.0;
  double learning_rate_ = 0.1;
  int max_depth_ = 3;
  std::vector<ColumnSchema> schema_;
  std::vector<Tree> trees_;
  std::vector<double> training_loss_;
};

namespace detail {

inline double logistic_loss(std::span<const double> label, std::span<const double> f) {
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    // log(1 + e^f) - label * f, evaluated without overflow.
    const double z = f[i];
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    sum += softplus - label[i] * z;
  }
  return sum / static_cast<double>(f.size());
}

// Row permutation sorting the pool lexicographically by (features..., label).
// Fitting on this canonical order makes the model independent of input row
// order: rows that tie on every key are interchangeable.
inline std::vector<std::size_t> canonical_order(const Dataset& pool,
                                                std::span<const double> label) {
  std::vector<std::size_t> ord(pool.rows());
  std::iota(ord.begin(), ord.end(), std::size_t{0});
  std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
    for (const auto& c : pool.columns)
      if (c[a] != c[b]) return c[a] < c[b];
    return label[a] < label[b];
  });
  return ord;
}

}  // namespace detail

// Fits the domain classifier on source rows (W = 0) and target rows (W = 1).
// Each round fits a depth-limited regression tree to the plain gradient
// residuals W - sigmoid(F); leaves hold mean residuals.
inline BoostedClassifier fit_propensity(const Dataset& z_source, const Dataset& z_target,
                                        const BoostParams& params) {
  params.validate();
  if (z_source.rows() == 0 || z_target.rows() == 0)
    throw ValidationError("propensity model needs non-empty source and target domains");
  if (z_source.schema.size() != z_target.schema.size())
    throw ValidationError("source and target schemas differ");
  for (const auto& c : z_source.schema)
    if (!z_target.find(c.name))
      throw ValidationError("target lacks feature '" + c.name + "'");

  Dataset pool;
  pool.schema = z_source.schema;
  pool.columns = z_source.columns;
  for (std::size_t j = 0; j < pool.features(); ++j) {
    const auto& t = z_target.columns[z_target.index_of(pool.schema[j].name)];
    pool.columns[j].insert(pool.columns[j].end(), t.begin(), t.end());
  }
  std::vector<double> label(z_source.rows(), 0.0);
  label.resize(pool.rows(), 1.0);

  const auto ord = detail::canonical_order(pool, label);
  pool = select_rows(pool, ord);
  {
    std::vector<double> sorted_label(ord.size());
    for (std::size_t i = 0; i < ord.size(); ++i) sorted_label[i] = label[ord[i]];
    label = std::move(sorted_label);
  }

  const double prevalence =
      static_cast<double>(z_target.rows()) / static_cast<double>(pool.rows());
  BoostedClassifier model(logit(prevalence), params.learning_rate, params.max_depth,
                          z_source.schema);

  FitParams tree_params;
  tree_params.max_depth = params.max_depth;
  tree_params.min_node_weight = params.min_node_weight;
  tree_params.min_gain = 0.0;
  tree_params.prune = false;
  tree_params.seed = params.seed;

  const auto features = all_features(pool);
  const PresortedColumns presorted(pool, features);
  const std::vector<double> unit(pool.rows(), 1.0);
  std::vector<double> f(pool.rows(), model.base_score_);
  std::vector<double> residual(pool.rows());
  model.training_loss_.push_back(detail::logistic_loss(label, f));
  for (int round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < f.size(); ++i) residual[i] = label[i] - sigmoid(f[i]);
    Tree t = grow(pool, residual, unit, features, tree_params, TaskKind::regression,
                  &presorted);
    const auto binding = t.bind(pool);
    for (std::size_t i = 0; i < f.size(); ++i)
      f[i] += params.learning_rate * t.predict_row(pool, binding, i);
    model.trees_.push_back(std::move(t));
    model.training_loss_.push_back(detail::logistic_loss(label, f));
  }
  return model;
}

}  // namespace dacart
