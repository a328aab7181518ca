#pragma once

// Shared fixtures for the unit tests and the acceptance binary: dataset
// builders and an exhaustive split-search reference for small trees.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dacart/data.hpp"
#include "dacart/rng.hpp"
#include "dacart/tree.hpp"

namespace dacart::fixtures {

inline Dataset make_dataset(std::vector<std::vector<double>> columns, std::vector<double> y) {
  Dataset d;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const bool binary = std::all_of(columns[j].begin(), columns[j].end(),
                                    [](double v) { return v == 0.0 || v == 1.0; });
    d.schema.push_back({"x" + std::to_string(j + 1),
                        binary ? ColumnKind::binary : ColumnKind::continuous});
  }
  d.columns = std::move(columns);
  d.response = std::move(y);
  return d;
}

// Gaussian features, linear-plus-step response.
inline Dataset random_regression(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> norm;
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) cols[j][i] = norm(rng);
    y[i] = 2.0 * cols[0][i] + (p > 1 && cols[1][i] > 0.3 ? 1.5 : 0.0) + norm(rng);
  }
  return make_dataset(std::move(cols), std::move(y));
}

inline std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

// ---------------------------------------------------------------------------
// Exhaustive reference grower

struct RefNode {
  double value = 0.0;
  double weight = 0.0;
  std::size_t count = 0;
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

class ReferenceGrower {
 public:
  ReferenceGrower(const Dataset& d, std::span<const double> w, TaskKind task,
                  const FitParams& params)
      : d_(d), y_(d.y()), w_(w), task_(task), params_(params) {}

  // Pre-order node list, same layout as Tree::nodes().
  std::vector<RefNode> run() {
    std::vector<std::size_t> all(d_.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    out_.clear();
    build(all, 0);
    return out_;
  }

 private:
  double mass(const std::vector<std::size_t>& rows) const {
    double s = 0.0;
    for (auto r : rows) s += w_[r];
    return s;
  }

  double mean(const std::vector<std::size_t>& rows) const {
    double s = 0.0;
    for (auto r : rows) s += w_[r] * y_[r];
    return s / mass(rows);
  }

  // Weighted squared error, or W * 2p(1-p) for classification.
  double loss(const std::vector<std::size_t>& rows) const {
    const double m = mean(rows);
    if (task_ == TaskKind::classification) return mass(rows) * 2.0 * m * (1.0 - m);
    double s = 0.0;
    for (auto r : rows) s += w_[r] * (y_[r] - m) * (y_[r] - m);
    return s;
  }

  void build(const std::vector<std::size_t>& rows, int depth) {
    RefNode node;
    double wy = 0.0;
    for (auto r : rows) {
      node.weight += w_[r];
      wy += w_[r] * y_[r];
    }
    node.value = wy / node.weight;
    node.count = rows.size();
    const std::size_t id = out_.size();
    out_.push_back(node);
    if (depth >= params_.max_depth || node.weight < 2.0 * params_.min_node_weight) return;

    const double parent = loss(rows);
    bool found = false;
    double best_gain = 0.0;
    std::size_t best_j = 0;
    double best_s = 0.0;
    for (std::size_t j = 0; j < d_.features(); ++j) {
      std::vector<double> values;
      for (auto r : rows) values.push_back(d_.columns[j][r]);
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        const double s = (values[k] + values[k + 1]) / 2.0;
        std::vector<std::size_t> l, r;
        for (auto i : rows) (d_.columns[j][i] <= s ? l : r).push_back(i);
        const double wl = mass(l), wr = mass(r);
        if (wl < params_.min_node_weight || wr < params_.min_node_weight) continue;
        const double gain = parent - loss(l) - loss(r);
        if (!(gain > params_.min_gain)) continue;
        if (!found || gain > best_gain + 1e-12 * std::abs(best_gain)) {
          found = true;
          best_gain = gain;
          best_j = j;
          best_s = s;
        }
      }
    }
    if (!found) return;
    out_[id].leaf = false;
    out_[id].feature = best_j;
    out_[id].threshold = best_s;
    out_[id].gain = best_gain;
    std::vector<std::size_t> l, r;
    for (auto i : rows) (d_.columns[best_j][i] <= best_s ? l : r).push_back(i);
    build(l, depth + 1);
    build(r, depth + 1);
  }

  const Dataset& d_;
  std::span<const double> y_;
  std::span<const double> w_;
  TaskKind task_;
  FitParams params_;
  std::vector<RefNode> out_;
};

// Empty string on agreement, otherwise a description of the first mismatch.
inline std::string compare_with_reference(const Tree& t, const std::vector<RefNode>& ref) {
  const auto& nodes = t.nodes();
  if (nodes.size() != ref.size())
    return "node count " + std::to_string(nodes.size()) + " vs reference " +
           std::to_string(ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const auto& a = nodes[k];
    const auto& b = ref[k];
    const std::string at = "node " + std::to_string(k) + ": ";
    if (a.is_leaf() != b.leaf) return at + "leaf/internal mismatch";
    if (a.count != b.count) return at + "row count mismatch";
    if (a.value != b.value) return at + "value mismatch";
    if (a.weight_mass != b.weight) return at + "weight mismatch";
    if (!b.leaf) {
      if (a.split->feature != b.feature) return at + "feature mismatch";
      if (a.split->threshold != b.threshold) return at + "threshold mismatch";
      if (std::abs(a.split->gain - b.gain) > 1e-9 * std::max(1.0, std::abs(b.gain)))
        return at + "gain mismatch";
    }
  }
  return {};
}

// Random small instance: some columns are coarse integers so values repeat,
// about one weight in seven is exactly zero.
struct SmallInstance {
  Dataset data;
  std::vector<double> w;
  TaskKind task;
};

inline SmallInstance random_small_instance(std::uint64_t seed, TaskKind task) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> n_dist(2, 12), p_dist(1, 3);
  const std::size_t n = n_dist(rng);
  const std::size_t p = p_dist(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  for (std::size_t j = 0; j < p; ++j) {
    const bool discrete = unit(rng) < 0.4;
    for (auto& v : cols[j]) v = discrete ? coarse(rng) : 10.0 * unit(rng) - 5.0;
  }
  std::vector<double> y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = task == TaskKind::classification ? (unit(rng) < 0.5 ? 1.0 : 0.0) : 4.0 * unit(rng);
    w[i] = unit(rng) < 0.15 ? 0.0 : 0.1 + 2.9 * unit(rng);
  }
  if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) w[0] = 1.0;
  return {make_dataset(std::move(cols), std::move(y)), std::move(w), task};
}

inline FitParams reference_params() {
  FitParams p;
  p.max_depth = 2;
  p.min_node_weight = 1e-9;
  p.prune = false;
  return p;
}

}  // namespace dacart::fixtures
