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

#include "dacart/data.hpp"
#include "dacart/error.hpp"
#include "dacart/rng.hpp"

namespace dacart {

enum class TaskKind { regression, classification };

inline const char* to_string(TaskKind t) {
  return t == TaskKind::classification ? "classification" : "regression";
}

inline TaskKind task_from_string(std::string_view s) {
  if (s == "regression") return TaskKind::regression;
  if (s == "classification") return TaskKind::classification;
  throw ValidationError("unknown task '" + std::string(s) + "'");
}

struct FitParams {
  int max_depth = 30;
  double min_node_weight = 10.0;
  double min_gain = 0.0;
  bool prune = true;
  int cv_folds = 5;
  // When > 0, prune at complexity * (root node loss) instead of choosing
  // alpha by cross-validation (the rpart `cp` convention).
  double complexity = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
    if (!(min_node_weight > 0.0)) throw ValidationError("min_node_weight must be > 0");
    if (!(min_gain >= 0.0)) throw ValidationError("min_gain must be >= 0");
    if (cv_folds < 2) throw ValidationError("cv_folds must be >= 2");
    if (!(complexity >= 0.0 && complexity < 1.0))
      throw ValidationError("complexity must lie in [0, 1)");
  }
};

struct SplitChoice {
  std::size_t feature = 0;
  double threshold = 0.0;
  // Reduction of the weighted node loss; scales linearly with the weights.
  double gain = 0.0;

  friend bool operator==(const SplitChoice&, const SplitChoice&) = default;
};

// Every node keeps its own weighted mean and mass so pruning can turn any
// internal node into a leaf without revisiting the data.
struct Node {
  double value = 0.0;
  double weight_mass = 0.0;
  std::size_t count = 0;
  std::optional<SplitChoice> split;
  std::int32_t left = -1;
  std::int32_t right = -1;

  bool is_leaf() const { return !split.has_value(); }

  friend bool operator==(const Node&, const Node&) = default;
};

// Binary tree stored in pre-order: a parent always precedes its children.
// Split features index into `schema`; prediction resolves them by name.
class Tree {
 public:
  Tree() = default;
  Tree(std::vector<Node> nodes, TaskKind task, std::vector<ColumnSchema> schema,
       std::vector<std::size_t> candidates, FitParams params)
      : nodes_(std::move(nodes)),
        task_(task),
        schema_(std::move(schema)),
        candidates_(std::move(candidates)),
        params_(params) {}

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& root() const { return nodes_.front(); }
  bool empty() const { return nodes_.empty(); }
  TaskKind task() const { return task_; }
  const std::vector<ColumnSchema>& schema() const { return schema_; }
  const std::vector<std::size_t>& candidates() const { return candidates_; }
  const FitParams& params() const { return params_; }

  std::size_t leaves() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
  }

  std::vector<std::size_t> split_features() const {
    std::vector<std::size_t> out;
    for (const auto& n : nodes_)
      if (n.split) out.push_back(n.split->feature);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // For each schema feature, the matching column of `rows` (or npos when the
  // tree can never consult that feature).
  std::vector<std::size_t> bind(const Dataset& rows) const {
    constexpr auto npos = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> binding(schema_.size(), npos);
    auto needed = candidates_;
    for (auto f : split_features()) needed.push_back(f);
    for (auto f : needed) {
      auto col = rows.find(schema_.at(f).name);
      if (!col)
        throw ValidationError("schema mismatch: rows lack feature '" + schema_[f].name +
                              "' required by the tree");
      binding[f] = *col;
    }
    return binding;
  }

  std::size_t leaf_of(const Dataset& rows, std::span<const std::size_t> binding,
                      std::size_t i) const {
    std::size_t k = 0;
    while (!nodes_[k].is_leaf()) {
      const auto& s = *nodes_[k].split;
      const double x = rows.columns[binding[s.feature]][i];
      k = static_cast<std::size_t>(x <= s.threshold ? nodes_[k].left : nodes_[k].right);
    }
    return k;
  }

  double predict_row(const Dataset& rows, std::span<const std::size_t> binding,
                     std::size_t i) const {
    return nodes_[leaf_of(rows, binding, i)].value;
  }

  std::vector<double> predict(const Dataset& rows) const {
    if (nodes_.empty()) throw ValidationError("cannot predict with an empty tree");
    const auto binding = bind(rows);
    std::vector<double> out(rows.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict_row(rows, binding, i);
    return out;
  }

  friend bool operator==(const Tree& a, const Tree& b) {
    return a.nodes_ == b.nodes_ && a.task_ == b.task_ && a.schema_ == b.schema_ &&
           a.candidates_ == b.candidates_;
  }

 private:
  std::vector<Node> nodes_;
  TaskKind task_ = TaskKind::regression;
  std::vector<ColumnSchema> schema_;
  std::vector<std::size_t> candidates_;
  FitParams params_;
};

// Per-feature row orders sorted by (value, row index). Sorting happens once;
// the grower then partitions these orders stably at every split.
class PresortedColumns {
 public:
  PresortedColumns(const Dataset& d, std::span<const std::size_t> features)
      : features_(features.begin(), features.end()) {
    orders_.reserve(features_.size());
    for (auto j : features_) {
      const auto& x = d.columns.at(j);
      std::vector<std::uint32_t> ord(x.size());
      std::iota(ord.begin(), ord.end(), 0u);
      std::sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
        return x[a] < x[b] || (x[a] == x[b] && a < b);
      });
      orders_.push_back(std::move(ord));
    }
  }

  const std::vector<std::size_t>& features() const { return features_; }
  const std::vector<std::uint32_t>& order(std::size_t k) const { return orders_[k]; }

 private:
  std::vector<std::size_t> features_;
  std::vector<std::vector<std::uint32_t>> orders_;
};

namespace detail {

constexpr double kTieTolerance = 1e-12;

// Midpoint of consecutive distinct values a < b; always satisfies a <= m < b
// so that `x <= m` routes a left and b right.
inline double split_midpoint(double a, double b) {
  double m = std::midpoint(a, b);
  return m < b ? m : a;
}

inline bool improves(double gain, const std::optional<SplitChoice>& best) {
  return !best || gain > best->gain + kTieTolerance * std::abs(best->gain);
}

// Weighted 0/1 node loss scaled by mass: W * Gini(p) with Gini = 2p(1-p).
inline double gini_mass(double w, double w1) {
  return w > 0.0 ? 2.0 * w1 * (w - w1) / w : 0.0;
}

struct NodeTotals {
  double weight = 0.0;
  double weighted_y = 0.0;
};

// Scans one feature's sorted row order and updates `best`. For regression
// the targets are centered at the node mean before accumulating, so the gain
// S_l^2/W_l + S_r^2/W_r - S^2/W does not cancel catastrophically.
inline void scan_feature(std::size_t feature, std::span<const std::uint32_t> order,
                         std::span<const double> x, std::span<const double> y,
                         std::span<const double> w, const NodeTotals& totals,
                         TaskKind task, const FitParams& params,
                         std::optional<SplitChoice>& best) {
  if (order.size() < 2) return;
  const double total_w = totals.weight;
  const double mean = totals.weighted_y / total_w;
  double total_s = 0.0;
  if (task == TaskKind::regression) {
    for (auto r : order) total_s += w[r] * (y[r] - mean);
  } else {
    total_s = totals.weighted_y;
  }
  const double parent_term = task == TaskKind::regression
                                 ? total_s * total_s / total_w
                                 : gini_mass(total_w, total_s);
  double wl = 0.0;
  double sl = 0.0;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const auto r = order[i];
    wl += w[r];
    sl += task == TaskKind::regression ? w[r] * (y[r] - mean) : w[r] * y[r];
    const double xa = x[r];
    const double xb = x[order[i + 1]];
    if (!(xa < xb)) continue;
    const double wr = total_w - wl;
    if (wl < params.min_node_weight || wr < params.min_node_weight) continue;
    const double sr = total_s - sl;
    double gain;
    if (task == TaskKind::regression) {
      gain = sl * sl / wl + sr * sr / wr - parent_term;
    } else {
      gain = parent_term - gini_mass(wl, sl) - gini_mass(wr, sr);
    }
    if (!(gain > params.min_gain)) continue;
    if (improves(gain, best)) best = SplitChoice{feature, split_midpoint(xa, xb), gain};
  }
}

inline void check_weights(std::span<const double> w, std::size_t n) {
  if (w.size() != n)
    throw ValidationError("weight vector length " + std::to_string(w.size()) +
                          " differs from row count " + std::to_string(n));
  double sum = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError("weights must be finite and non-negative");
    sum += v;
  }
  if (!(sum > 0.0)) throw DegenerateError("weight sum is zero");
}

inline std::vector<std::size_t> normalized_candidates(std::span<const std::size_t> c,
                                                      std::size_t p) {
  std::vector<std::size_t> out(c.begin(), c.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  for (auto j : out)
    if (j >= p) throw ValidationError("candidate feature index out of range");
  return out;
}

class Grower {
 public:
  Grower(const Dataset& d, std::span<const double> y, std::span<const double> w,
         const PresortedColumns& sorted, const FitParams& params, TaskKind task)
      : d_(d), y_(y), w_(w), sorted_(sorted), params_(params), task_(task),
        goes_left_(d.rows(), 0) {}

  std::vector<Node> run() {
    const std::size_t n = d_.rows();
    std::vector<std::uint32_t> members(n);
    std::iota(members.begin(), members.end(), 0u);
    std::vector<std::vector<std::uint32_t>> orders;
    for (std::size_t k = 0; k < sorted_.features().size(); ++k)
      orders.push_back(sorted_.order(k));
    build(std::move(members), std::move(orders), 0);
    return std::move(nodes_);
  }

 private:
  std::int32_t build(std::vector<std::uint32_t> members,
                     std::vector<std::vector<std::uint32_t>> orders, int depth) {
    NodeTotals totals;
    for (auto r : members) {
      totals.weight += w_[r];
      totals.weighted_y += w_[r] * y_[r];
    }
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{totals.weighted_y / totals.weight, totals.weight, members.size(),
                          std::nullopt, -1, -1});

    if (depth >= params_.max_depth || totals.weight < 2.0 * params_.min_node_weight)
      return id;
    std::optional<SplitChoice> best;
    for (std::size_t k = 0; k < orders.size(); ++k) {
      const auto j = sorted_.features()[k];
      scan_feature(j, orders[k], d_.columns[j], y_, w_, totals, task_, params_, best);
    }
    if (!best) return id;

    const auto& x = d_.columns[best->feature];
    for (auto r : members) goes_left_[r] = x[r] <= best->threshold;
    auto split_list = [&](std::vector<std::uint32_t>& src) {
      std::vector<std::uint32_t> l, r;
      for (auto i : src) (goes_left_[i] ? l : r).push_back(i);
      src.clear();
      src.shrink_to_fit();
      return std::pair{std::move(l), std::move(r)};
    };
    auto [lm, rm] = split_list(members);
    std::vector<std::vector<std::uint32_t>> lo(orders.size()), ro(orders.size());
    for (std::size_t k = 0; k < orders.size(); ++k) {
      auto [l, r] = split_list(orders[k]);
      lo[k] = std::move(l);
      ro[k] = std::move(r);
    }
    orders.clear();

    nodes_[id].split = best;
    const auto left = build(std::move(lm), std::move(lo), depth + 1);
    nodes_[id].left = left;
    const auto right = build(std::move(rm), std::move(ro), depth + 1);
    nodes_[id].right = right;
    return id;
  }

  const Dataset& d_;
  std::span<const double> y_;
  std::span<const double> w_;
  const PresortedColumns& sorted_;
  const FitParams& params_;
  TaskKind task_;
  std::vector<char> goes_left_;
  std::vector<Node> nodes_;
};

inline void check_targets(std::span<const double> y, std::size_t n, TaskKind task) {
  if (y.size() != n) throw ValidationError("response length differs from row count");
  for (double v : y) {
    if (!std::isfinite(v)) throw ValidationError("response contains non-finite values");
    if (task == TaskKind::classification && v != 0.0 && v != 1.0)
      throw ValidationError("classification requires responses in {0, 1}");
  }
}

}  // namespace detail

// Best weighted split of the node made of `rows`, or nullopt when no
// admissible split has gain above params.min_gain.
inline std::optional<SplitChoice> best_split(std::span<const std::size_t> rows,
                                             const Dataset& d, std::span<const double> w,
                                             std::span<const std::size_t> candidates,
                                             TaskKind task, const FitParams& params = {}) {
  if (rows.empty()) throw ValidationError("best_split on an empty node");
  const auto y = d.y();
  detail::NodeTotals totals;
  std::vector<std::uint32_t> ascending(rows.begin(), rows.end());
  std::sort(ascending.begin(), ascending.end());
  for (auto r : ascending) {
    totals.weight += w[r];
    totals.weighted_y += w[r] * y[r];
  }
  if (!(totals.weight > 0.0)) throw DegenerateError("node weight is zero");
  std::optional<SplitChoice> best;
  for (auto j : detail::normalized_candidates(candidates, d.features())) {
    const auto& x = d.columns[j];
    auto ord = ascending;
    std::stable_sort(ord.begin(), ord.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x[a] < x[b]; });
    detail::scan_feature(j, ord, x, y, w, totals, task, params, best);
  }
  return best;
}

// Grows an unpruned weighted tree on explicit targets. `presorted`, when
// given, must have been built on `d` for exactly the candidate set.
inline Tree grow(const Dataset& d, std::span<const double> y, std::span<const double> w,
                 std::span<const std::size_t> candidates, const FitParams& params,
                 TaskKind task, const PresortedColumns* presorted = nullptr) {
  params.validate();
  const std::size_t n = d.rows();
  if (n == 0) throw ValidationError("cannot grow a tree on an empty dataset");
  detail::check_targets(y, n, task);
  detail::check_weights(w, n);
  auto cand = detail::normalized_candidates(candidates, d.features());
  std::optional<PresortedColumns> local;
  if (!presorted || presorted->features() != cand) {
    local.emplace(d, cand);
    presorted = &*local;
  }
  detail::Grower grower(d, y, w, *presorted, params, task);
  return Tree(grower.run(), task, d.schema, std::move(cand), params);
}

inline Tree grow(const Dataset& d, std::span<const double> w,
                 std::span<const std::size_t> candidates, const FitParams& params,
                 TaskKind task) {
  return grow(d, d.y(), w, candidates, params, task);
}

inline std::vector<std::size_t> all_features(const Dataset& d) {
  std::vector<std::size_t> out(d.features());
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

// ---------------------------------------------------------------------------
// Cost-complexity pruning

// For every node, the complexity alpha at which weakest-link pruning turns it
// into a leaf (+inf for leaves of the original tree). The subtree removed by
// collapsing t costs sum(gains in t's subtree); alpha(t) = that cost divided
// by (leaves(t) - 1), minimized iteratively.
inline std::vector<double> collapse_alphas(const Tree& t) {
  const auto& nodes = t.nodes();
  const std::size_t m = nodes.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> alpha(m, inf);
  if (m == 0 || nodes[0].is_leaf()) return alpha;
  std::vector<char> collapsed(m, 0);
  std::vector<double> cost(m, 0.0);
  std::vector<double> leaves(m, 1.0);
  double current = 0.0;
  while (!collapsed[0]) {
    double gmin = inf;
    for (std::size_t k = m; k-- > 0;) {
      if (nodes[k].is_leaf() || collapsed[k]) {
        cost[k] = 0.0;
        leaves[k] = 1.0;
        continue;
      }
      const auto l = static_cast<std::size_t>(nodes[k].left);
      const auto r = static_cast<std::size_t>(nodes[k].right);
      cost[k] = nodes[k].split->gain + cost[l] + cost[r];
      leaves[k] = leaves[l] + leaves[r];
      gmin = std::min(gmin, cost[k] / (leaves[k] - 1.0));
    }
    const double level = std::max(current, gmin);
    const double cut = gmin + 1e-10 * std::abs(gmin);
    // Pre-order walk: collapsing a node swallows its whole subtree.
    for (std::size_t k = 0; k < m; ++k) {
      if (nodes[k].is_leaf() || collapsed[k]) continue;
      if (cost[k] / (leaves[k] - 1.0) <= cut) {
        std::vector<std::size_t> stack{k};
        while (!stack.empty()) {
          auto u = stack.back();
          stack.pop_back();
          if (nodes[u].is_leaf() || collapsed[u]) continue;
          collapsed[u] = 1;
          alpha[u] = level;
          stack.push_back(static_cast<std::size_t>(nodes[u].left));
          stack.push_back(static_cast<std::size_t>(nodes[u].right));
        }
      }
    }
    current = level;
  }
  return alpha;
}

// Distinct alphas of the pruning sequence, starting at 0.
inline std::vector<double> complexity_sequence(const Tree& t) {
  std::vector<double> seq{0.0};
  for (double a : collapse_alphas(t))
    if (std::isfinite(a) && a > 0.0) seq.push_back(a);
  std::sort(seq.begin(), seq.end());
  seq.erase(std::unique(seq.begin(), seq.end()), seq.end());
  return seq;
}

namespace detail {

inline Tree prune_with_alphas(const Tree& t, std::span<const double> alphas, double alpha) {
  const auto& nodes = t.nodes();
  std::vector<Node> out;
  out.reserve(nodes.size());
  auto copy = [&](auto&& self, std::size_t k) -> std::int32_t {
    const auto id = static_cast<std::int32_t>(out.size());
    out.push_back(nodes[k]);
    if (nodes[k].is_leaf() || alphas[k] <= alpha) {
      out[id].split.reset();
      out[id].left = out[id].right = -1;
      return id;
    }
    const auto l = self(self, static_cast<std::size_t>(nodes[k].left));
    out[id].left = l;
    const auto r = self(self, static_cast<std::size_t>(nodes[k].right));
    out[id].right = r;
    return id;
  };
  if (!nodes.empty()) copy(copy, 0);
  return Tree(std::move(out), t.task(), t.schema(), t.candidates(), t.params());
}

}  // namespace detail

// The minimal subtree for complexity parameter alpha.
inline Tree prune_at(const Tree& t, double alpha) {
  const auto alphas = collapse_alphas(t);
  return detail::prune_with_alphas(t, alphas, alpha);
}

struct PruneEntry {
  double alpha = 0.0;
  std::size_t leaves = 0;
  double cv_loss = 0.0;
  double cv_se = 0.0;
};

struct PruneResult {
  Tree tree;
  std::vector<PruneEntry> table;
  std::size_t best = 0;    // index minimizing cv_loss
  std::size_t chosen = 0;  // index picked by the 1-SE rule
};

// Weakest-link pruning with alpha chosen by weighted K-fold cross-validation
// and the 1-SE rule. Held-out loss of row i is w_i * (y_i - prediction)^2.
inline PruneResult prune_with_report(const Tree& t, const Dataset& d,
                                     std::span<const double> w, int cv_folds,
                                     std::uint64_t seed) {
  PruneResult result{t, {}, 0, 0};
  if (t.empty() || t.root().is_leaf()) {
    result.table.push_back({0.0, t.empty() ? std::size_t{0} : std::size_t{1}, 0.0, 0.0});
    return result;
  }
  const auto full_alphas = collapse_alphas(t);
  const auto seq = complexity_sequence(t);
  const std::size_t kseq = seq.size();
  const std::size_t n = d.rows();
  const auto y = d.y();
  detail::check_weights(w, n);

  std::vector<double> probe(kseq);
  for (std::size_t j = 0; j + 1 < kseq; ++j) probe[j] = std::sqrt(seq[j] * seq[j + 1]);
  probe[kseq - 1] = std::numeric_limits<double>::infinity();

  const std::size_t folds = std::min<std::size_t>(static_cast<std::size_t>(cv_folds), n);
  std::vector<std::vector<double>> loss(kseq, std::vector<double>(n, 0.0));
  if (folds >= 2) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> fold_of(n);
    for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % folds;

    FitParams fold_params = t.params();
    fold_params.prune = false;
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<std::size_t> train, held;
      for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? held : train).push_back(i);
      const Dataset sub = select_rows(d, train);
      std::vector<double> sub_w;
      sub_w.reserve(train.size());
      for (auto i : train) sub_w.push_back(w[i]);
      if (!(std::accumulate(sub_w.begin(), sub_w.end(), 0.0) > 0.0)) continue;
      const Tree ft = grow(sub, sub_w, t.candidates(), fold_params, t.task());
      const auto fa = collapse_alphas(ft);
      const auto binding = ft.bind(d);
      const auto& fn = ft.nodes();
      for (auto i : held) {
        // Walk the path once; for each probe alpha, stop at the first node
        // already collapsed at that alpha.
        std::vector<std::size_t> path{0};
        while (!fn[path.back()].is_leaf()) {
          const auto& s = *fn[path.back()].split;
          const double x = d.columns[binding[s.feature]][i];
          path.push_back(static_cast<std::size_t>(
              x <= s.threshold ? fn[path.back()].left : fn[path.back()].right));
        }
        for (std::size_t j = 0; j < kseq; ++j) {
          std::size_t stop = path.back();
          for (auto k : path) {
            if (fa[k] <= probe[j]) {
              stop = k;
              break;
            }
          }
          const double e = y[i] - fn[stop].value;
          loss[j][i] = w[i] * e * e;
        }
      }
    }
  }

  for (std::size_t j = 0; j < kseq; ++j) {
    const auto& l = loss[j];
    const double sum = std::accumulate(l.begin(), l.end(), 0.0);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : l) ss += (v - mean) * (v - mean);
    const double se =
        n > 1 ? std::sqrt(static_cast<double>(n) * ss / static_cast<double>(n - 1)) : 0.0;
    const auto pruned_leaves = detail::prune_with_alphas(t, full_alphas, seq[j]).leaves();
    result.table.push_back({seq[j], pruned_leaves, sum, se});
  }
  std::size_t best = 0;
  for (std::size_t j = 1; j < kseq; ++j)
    if (result.table[j].cv_loss < result.table[best].cv_loss) best = j;
  const double limit = result.table[best].cv_loss + result.table[best].cv_se;
  std::size_t chosen = best;
  for (std::size_t j = kseq; j-- > best;) {
    if (result.table[j].cv_loss <= limit) {
      chosen = j;
      break;
    }
  }
  result.best = best;
  result.chosen = chosen;
  result.tree = detail::prune_with_alphas(t, full_alphas, seq[chosen]);
  return result;
}

inline Tree prune(const Tree& t, const Dataset& d, std::span<const double> w, int cv_folds,
                  std::uint64_t seed) {
  return prune_with_report(t, d, w, cv_folds, seed).tree;
}

// Weighted loss of the root node on the same scale as split gains.
inline double root_loss(const Tree& t, const Dataset& d, std::span<const double> w) {
  const auto y = d.y();
  const double mean = t.root().value;
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) loss += w[i] * (y[i] - mean) * (y[i] - mean);
  return t.task() == TaskKind::classification ? 2.0 * loss : loss;
}

// Grow, then prune when params.prune is set: at a fixed complexity when
// params.complexity > 0, otherwise by cross-validation seeded by params.seed.
inline Tree fit_cart(const Dataset& d, std::span<const double> w,
                     std::span<const std::size_t> candidates, const FitParams& params,
                     TaskKind task) {
  Tree t = grow(d, w, candidates, params, task);
  if (!params.prune || t.root().is_leaf()) return t;
  if (params.complexity > 0.0) return prune_at(t, params.complexity * root_loss(t, d, w));
  return prune(t, d, w, params.cv_folds, params.seed);
}

// Per-feature share of the total split gain; all zeros for a single leaf.
inline std::vector<double> gain_importance(const Tree& t) {
  std::vector<double> shares(t.schema().size(), 0.0);
  double total = 0.0;
  for (const auto& n : t.nodes()) {
    if (!n.split) continue;
    shares.at(n.split->feature) += n.split->gain;
    total += n.split->gain;
  }
  if (total > 0.0)
    for (auto& s : shares) s /= total;
  return shares;
}

}  // namespace dacart
