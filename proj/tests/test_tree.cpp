#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "dacart/tree.hpp"
#include "support.hpp"

using namespace dacart;
using dacart::fixtures::make_dataset;
using dacart::fixtures::ones;

namespace {

FitParams loose_params() {
  FitParams p;
  p.min_node_weight = 1.0;
  p.prune = false;
  return p;
}

std::vector<std::size_t> rows_of(const Dataset& d) {
  std::vector<std::size_t> r(d.rows());
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

// Two-level tree: root on feature 0, both children on feature 1.
Tree hand_tree(double root_gain, double child_gain) {
  std::vector<ColumnSchema> schema{{"a", ColumnKind::continuous}, {"b", ColumnKind::continuous}};
  std::vector<Node> nodes(7);
  nodes[0] = {0.0, 4.0, 4, SplitChoice{0, 0.0, root_gain}, 1, 4};
  nodes[1] = {-1.0, 2.0, 2, SplitChoice{1, 0.0, child_gain}, 2, 3};
  nodes[2] = {-2.0, 1.0, 1, std::nullopt, -1, -1};
  nodes[3] = {0.0, 1.0, 1, std::nullopt, -1, -1};
  nodes[4] = {1.0, 2.0, 2, SplitChoice{1, 0.0, child_gain}, 5, 6};
  nodes[5] = {0.0, 1.0, 1, std::nullopt, -1, -1};
  nodes[6] = {2.0, 1.0, 1, std::nullopt, -1, -1};
  return Tree(std::move(nodes), TaskKind::regression, schema, {0, 1}, FitParams{});
}

Tree leaf_tree(double value) {
  std::vector<ColumnSchema> schema{{"x1", ColumnKind::continuous}};
  return Tree({Node{value, 1.0, 1, std::nullopt, -1, -1}}, TaskKind::regression, schema, {0},
              FitParams{});
}

std::optional<SplitChoice> split_of(const Dataset& d, std::span<const double> w, TaskKind task) {
  return best_split(rows_of(d), d, w, all_features(d), task, loose_params());
}

}  // namespace

// --- best_split --------------------------------------------------------------

TEST(BestSplit, SeparableStep) {
  const Dataset d = make_dataset({{1, 2, 3, 4}}, {0, 0, 1, 1});
  const auto w = ones(4);
  const auto s = split_of(d, w, TaskKind::regression);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 0u);
  EXPECT_EQ(s->threshold, 2.5);
  EXPECT_DOUBLE_EQ(s->gain, 1.0);  // parent SSE 1, children pure
}

TEST(BestSplit, WeightsMoveTheThreshold) {
  const Dataset d = make_dataset({{1, 2, 3}}, {0, 1, 2});
  const std::vector<double> w{1, 1, 2};
  const auto s = split_of(d, w, TaskKind::regression);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 2.5);
  // Parent SSE 2.75; the s = 2.5 children leave 0.5, s = 1.5 would leave 2/3.
  EXPECT_NEAR(s->gain, 2.75 - 0.5, 1e-12);
}

TEST(BestSplit, GiniPureChildren) {
  const Dataset d = make_dataset({{1, 2, 3, 4}}, {0, 0, 1, 1});
  const auto w = ones(4);
  const auto s = split_of(d, w, TaskKind::classification);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 2.5);
  EXPECT_DOUBLE_EQ(s->gain, 2.0);  // W * 2p(1-p) = 4 * 0.5
}

TEST(BestSplit, ConstantFeaturesGiveNone) {
  const Dataset d = make_dataset({{1, 1, 1}, {0, 0, 0}}, {0, 1, 2});
  const auto w = ones(3);
  EXPECT_FALSE(split_of(d, w, TaskKind::regression));
}

TEST(BestSplit, MinNodeWeightBlocksSmallChildren) {
  const Dataset d = make_dataset({{1, 2, 3, 4}}, {0, 0, 0, 10});
  const auto w = ones(4);
  FitParams p;
  p.min_node_weight = 2.0;
  const auto s = best_split(rows_of(d), d, w, all_features(d), TaskKind::regression, p);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 2.5);
  p.min_node_weight = 2.5;
  EXPECT_FALSE(best_split(rows_of(d), d, w, all_features(d), TaskKind::regression, p));
}

TEST(BestSplit, BinaryFeatureSplitsAtHalf) {
  const Dataset d = make_dataset({{0, 1, 0, 1}}, {1, 5, 1, 5});
  const auto w = ones(4);
  const auto s = split_of(d, w, TaskKind::regression);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 0.5);
}

TEST(BestSplit, TieGoesToLowestFeatureThenThreshold) {
  // Both features induce the same partition; feature 0 must win.
  const Dataset d = make_dataset({{1, 2, 3, 4}, {1, 2, 3, 4}}, {0, 0, 1, 1});
  const auto w = ones(4);
  auto s = split_of(d, w, TaskKind::regression);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 0u);
  // Symmetric response: thresholds 1.5 and 3.5 tie; the smaller wins.
  const Dataset e = make_dataset({{1, 2, 3, 4}}, {5, 0, 0, 5});
  s = split_of(e, w, TaskKind::regression);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 1.5);
}

TEST(BestSplit, RestrictedToCandidates) {
  const Dataset d = make_dataset({{1, 2, 3, 4}, {4, 3, 2, 1}}, {0, 0, 1, 1});
  const auto w = ones(4);
  const std::vector<std::size_t> only_second{1};
  const auto s =
      best_split(rows_of(d), d, w, only_second, TaskKind::regression, loose_params());
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 1u);
}

TEST(BestSplit, ZeroWeightNodeIsAnError) {
  const Dataset d = make_dataset({{1, 2}}, {0, 1});
  const std::vector<double> w{0, 0};
  EXPECT_THROW(split_of(d, w, TaskKind::regression), DegenerateError);
  EXPECT_THROW(best_split({}, d, w, all_features(d), TaskKind::regression), ValidationError);
}

// --- grow ------------------------------------------------------------------

TEST(Grow, ConstantResponseIsOneLeaf) {
  const Dataset d = make_dataset({{1, 2, 3, 4, 5, 6}}, {0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
  const std::vector<double> w{1, 2, 3, 0.5, 0.7, 1.3};
  const Tree t = grow(d, w, all_features(d), loose_params(), TaskKind::regression);
  ASSERT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(t.root().value, 0.1);
}

TEST(Grow, StepFunction) {
  const Dataset d = make_dataset({{-2, -1, 1, 2}}, {0, 0, 1, 1});
  const Tree t = grow(d, ones(4), all_features(d), loose_params(), TaskKind::regression);
  ASSERT_EQ(t.nodes().size(), 3u);
  EXPECT_EQ(t.root().split->threshold, 0.0);
  EXPECT_EQ(t.nodes()[1].value, 0.0);
  EXPECT_EQ(t.nodes()[2].value, 1.0);
}

TEST(Grow, ReducesTrainingErrorOnStructuredData) {
  const Dataset d = fixtures::random_regression(2000, 3, 11);
  FitParams p;
  p.prune = false;
  const Tree t = grow(d, ones(d.rows()), all_features(d), p, TaskKind::regression);
  EXPECT_GE(t.leaves(), 2u);
  const auto pred = t.predict(d);
  const auto y = d.y();
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double mse = 0.0, var = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mse += (y[i] - pred[i]) * (y[i] - pred[i]);
    var += (y[i] - mean) * (y[i] - mean);
  }
  EXPECT_LT(mse, var);
}

TEST(Grow, RejectsBadInput) {
  const Dataset d = make_dataset({{1, 2}}, {0, 1});
  EXPECT_THROW(grow(d, std::vector<double>{0, 0}, all_features(d), loose_params(),
                    TaskKind::regression),
               Error);
  EXPECT_THROW(grow(d, std::vector<double>{1}, all_features(d), loose_params(),
                    TaskKind::regression),
               ValidationError);
  const Dataset bad = make_dataset({{1, 2}}, {0, 2});
  EXPECT_THROW(grow(bad, ones(2), all_features(bad), loose_params(), TaskKind::classification),
               ValidationError);
  Dataset empty = make_dataset({{}}, {});
  EXPECT_THROW(grow(empty, {}, all_features(empty), loose_params(), TaskKind::regression),
               ValidationError);
  FitParams p = loose_params();
  p.max_depth = 0;
  EXPECT_THROW(grow(d, ones(2), all_features(d), p, TaskKind::regression), ValidationError);
}

TEST(Grow, MatchesExhaustiveReference) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (auto task : {TaskKind::regression, TaskKind::classification}) {
      const auto inst = fixtures::random_small_instance(seed, task);
      const auto params = fixtures::reference_params();
      const Tree t = grow(inst.data, inst.w, all_features(inst.data), params, task);
      const auto ref = fixtures::ReferenceGrower(inst.data, inst.w, task, params).run();
      EXPECT_EQ(fixtures::compare_with_reference(t, ref), "")
          << "seed " << seed << " task " << to_string(task);
    }
  }
}

// --- invariants ----------------------------------------------------------------

TEST(TreeProperties, EveryRowReachesOneLeafWithConsistentValue) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset d = fixtures::random_regression(300, 4, seed);
    Rng rng(seed + 100);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::vector<double> w(d.rows());
    for (auto& v : w) v = u(rng);
    FitParams p;
    p.prune = false;
    p.min_node_weight = 3.0;
    const Tree t = grow(d, w, all_features(d), p, TaskKind::regression);
    const auto binding = t.bind(d);
    std::vector<double> mass(t.nodes().size(), 0.0), wy(t.nodes().size(), 0.0);
    std::vector<std::size_t> count(t.nodes().size(), 0);
    const auto y = d.y();
    for (std::size_t i = 0; i < d.rows(); ++i) {
      const auto k = t.leaf_of(d, binding, i);
      ASSERT_TRUE(t.nodes()[k].is_leaf());
      mass[k] += w[i];
      wy[k] += w[i] * y[i];
      ++count[k];
    }
    std::size_t total = 0;
    for (std::size_t k = 0; k < t.nodes().size(); ++k) {
      const auto& n = t.nodes()[k];
      if (!n.is_leaf()) continue;
      EXPECT_GT(n.weight_mass, 0.0);
      EXPECT_EQ(n.count, count[k]);
      EXPECT_NEAR(n.value, wy[k] / mass[k], 1e-10 * std::max(1.0, std::abs(n.value)));
      total += count[k];
    }
    EXPECT_EQ(total, d.rows());
    for (const auto& n : t.nodes())
      if (n.split) {
        EXPECT_GE(n.split->gain, 0.0);
      }
  }
}

TEST(TreeProperties, WeightScaleInvariance) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset d = fixtures::random_regression(200, 3, seed);
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    std::vector<double> w(d.rows());
    for (auto& v : w) v = u(rng);
    FitParams p;
    p.prune = false;
    p.min_node_weight = 2.0;
    for (double c : {0.25, 8.0}) {
      std::vector<double> wc(w);
      for (auto& v : wc) v *= c;
      FitParams pc = p;
      pc.min_node_weight = p.min_node_weight * c;
      const Tree a = grow(d, w, all_features(d), p, TaskKind::regression);
      const Tree b = grow(d, wc, all_features(d), pc, TaskKind::regression);
      ASSERT_EQ(a.nodes().size(), b.nodes().size()) << "seed " << seed << " c " << c;
      for (std::size_t k = 0; k < a.nodes().size(); ++k) {
        const auto& na = a.nodes()[k];
        const auto& nb = b.nodes()[k];
        EXPECT_EQ(na.value, nb.value);
        ASSERT_EQ(na.is_leaf(), nb.is_leaf());
        if (na.split) {
          EXPECT_EQ(na.split->feature, nb.split->feature);
          EXPECT_EQ(na.split->threshold, nb.split->threshold);
          EXPECT_NEAR(nb.split->gain, c * na.split->gain, 1e-9 * c * na.split->gain);
        }
      }
    }
  }
}

TEST(TreeProperties, MonotoneTransformInvariance) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset d = fixtures::random_regression(250, 3, seed);
    Dataset e = d;
    for (auto& v : e.columns[0]) v = std::exp(v);
    for (auto& v : e.columns[2]) v = v * v * v + 4.0 * v;
    FitParams p;
    p.prune = false;
    p.min_node_weight = 2.0;
    const Tree a = grow(d, ones(d.rows()), all_features(d), p, TaskKind::regression);
    const Tree b = grow(e, ones(e.rows()), all_features(e), p, TaskKind::regression);
    EXPECT_EQ(a.predict(d), b.predict(e)) << "seed " << seed;
  }
}

TEST(TreeProperties, UnitWeightsMatchUnweightedReference) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto inst = fixtures::random_small_instance(seed, TaskKind::regression);
    const auto w = ones(inst.data.rows());
    FitParams p = fixtures::reference_params();
    p.max_depth = 4;
    const Tree t = grow(inst.data, w, all_features(inst.data), p, TaskKind::regression);
    const auto ref = fixtures::ReferenceGrower(inst.data, w, TaskKind::regression, p).run();
    EXPECT_EQ(fixtures::compare_with_reference(t, ref), "") << "seed " << seed;
  }
}

// --- predict -------------------------------------------------------------------

TEST(Predict, SingleLeafPredictsConstant) {
  const Tree t = leaf_tree(3.7);
  const Dataset rows = make_dataset({{-5, 0, 100}}, {0, 0, 0});
  for (double v : t.predict(rows)) EXPECT_EQ(v, 3.7);
}

TEST(Predict, BoundaryGoesLeft) {
  const Dataset d = make_dataset({{1, 2, 3, 4}}, {0, 0, 1, 1});
  const Tree t = grow(d, ones(4), all_features(d), loose_params(), TaskKind::regression);
  ASSERT_EQ(t.root().split->threshold, 2.5);
  const Dataset probe = make_dataset({{2.5, std::nextafter(2.5, 3.0)}}, {0, 0});
  EXPECT_EQ(t.predict(probe), (std::vector<double>{0.0, 1.0}));
}

TEST(Predict, FullyGrownTreeMemorizes) {
  const Dataset d = fixtures::random_regression(150, 2, 5);
  FitParams p;
  p.prune = false;
  p.max_depth = 64;
  p.min_node_weight = 1.0;
  const Tree t = grow(d, ones(d.rows()), all_features(d), p, TaskKind::regression);
  const auto pred = t.predict(d);
  const auto y = d.y();
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(pred[i], y[i]);
}

TEST(Predict, SchemaMismatchThrows) {
  const Dataset d = make_dataset({{1, 2, 3, 4}}, {0, 0, 1, 1});
  const Tree t = grow(d, ones(4), all_features(d), loose_params(), TaskKind::regression);
  Dataset other = d;
  other.schema[0].name = "renamed";
  EXPECT_THROW(t.predict(other), ValidationError);
}

TEST(Predict, ColumnsResolvedByName) {
  const Dataset d = make_dataset({{1, 2, 3, 4}, {0, 0, 0, 0}}, {0, 0, 1, 1});
  const Tree t = grow(d, ones(4), all_features(d), loose_params(), TaskKind::regression);
  Dataset swapped;
  swapped.schema = {d.schema[1], d.schema[0]};
  swapped.columns = {d.columns[1], d.columns[0]};
  EXPECT_EQ(t.predict(swapped), t.predict(d));
}

// --- pruning -------------------------------------------------------------------

TEST(Prune, ZeroGainSplitCollapses) {
  const Tree t = hand_tree(0.0, 0.0);
  EXPECT_EQ(prune_at(t, 1e-9).nodes().size(), 1u);
}

TEST(Prune, SingleLeafUnchanged) {
  const Tree t = leaf_tree(1.0);
  const Dataset d = make_dataset({{1, 2, 3}}, {1, 1, 1});
  EXPECT_EQ(prune(t, d, ones(3), 5, 1), t);
  EXPECT_EQ(prune_at(t, 10.0), t);
}

TEST(Prune, WeakestLinkSequence) {
  // Root gain 8, child gains 1: children go first at alpha 1, root at 8.
  const Tree t = hand_tree(8.0, 1.0);
  EXPECT_EQ(prune_at(t, 0.5).leaves(), 4u);
  EXPECT_EQ(prune_at(t, 1.5).leaves(), 2u);
  EXPECT_EQ(prune_at(t, 9.0).leaves(), 1u);
  const auto seq = complexity_sequence(t);
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq[0], 0.0);
  EXPECT_DOUBLE_EQ(seq[1], 1.0);
  EXPECT_DOUBLE_EQ(seq[2], 8.0);
}

TEST(Prune, WeakParentWithStrongChildCollapsesTogether) {
  // Subtree cost (1 + 10 + 10) / 3 = 7 < root 1 alone: both levels vanish together.
  const Tree t = hand_tree(1.0, 10.0);
  EXPECT_EQ(prune_at(t, 6.9).leaves(), 4u);
  EXPECT_EQ(prune_at(t, 7.1).leaves(), 1u);
}

TEST(Prune, PureNoiseKeepsFewLeaves) {
  int small = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(derive_seed(seed, 77));
    std::normal_distribution<double> norm;
    std::vector<std::vector<double>> cols(3, std::vector<double>(500));
    std::vector<double> y(500);
    for (std::size_t i = 0; i < 500; ++i) {
      for (auto& c : cols) c[i] = norm(rng);
      y[i] = norm(rng);
    }
    const Dataset d = make_dataset(std::move(cols), std::move(y));
    FitParams p;
    p.seed = seed;
    const Tree t = fit_cart(d, ones(500), all_features(d), p, TaskKind::regression);
    if (t.leaves() <= 3) ++small;
  }
  EXPECT_GE(small, 45);
}

TEST(Prune, CrossValidationTableIsConsistent) {
  const Dataset d = fixtures::random_regression(400, 3, 9);
  FitParams p;
  p.prune = false;
  const auto w = ones(d.rows());
  const Tree full = grow(d, w, all_features(d), p, TaskKind::regression);
  const auto r = prune_with_report(full, d, w, 5, 3);
  ASSERT_FALSE(r.table.empty());
  for (std::size_t j = 1; j < r.table.size(); ++j) {
    EXPECT_GT(r.table[j].alpha, r.table[j - 1].alpha);
    EXPECT_LE(r.table[j].leaves, r.table[j - 1].leaves);
  }
  EXPECT_GE(r.chosen, r.best);
  for (const auto& e : r.table) EXPECT_GE(e.cv_loss, r.table[r.best].cv_loss);
  EXPECT_LE(r.table[r.chosen].cv_loss, r.table[r.best].cv_loss + r.table[r.best].cv_se);
  EXPECT_EQ(r.tree.leaves(), r.table[r.chosen].leaves);
  EXPECT_EQ(prune(full, d, w, 5, 3), r.tree);
}

TEST(Prune, ComplexityModeCutsAtFractionOfRootLoss) {
  const Dataset d = fixtures::random_regression(500, 3, 4);
  const auto w = ones(d.rows());
  FitParams p;
  p.complexity = 0.01;
  const Tree cut = fit_cart(d, w, all_features(d), p, TaskKind::regression);
  p.prune = false;
  const Tree full = grow(d, w, all_features(d), p, TaskKind::regression);
  EXPECT_LT(cut.leaves(), full.leaves());
  EXPECT_EQ(cut, prune_at(full, 0.01 * root_loss(full, d, w)));
  for (const auto& n : cut.nodes())
    if (n.split) {
      EXPECT_GT(n.split->gain, 0.0);
    }
}

// --- importance ---------------------------------------------------------------

TEST(Importance, OneSplitOwnsEverything) {
  const Dataset d = make_dataset({{0, 0, 0, 0}, {1, 2, 3, 4}, {7, 7, 7, 7}}, {0, 0, 1, 1});
  const Tree t = grow(d, ones(4), all_features(d), loose_params(), TaskKind::regression);
  EXPECT_EQ(gain_importance(t), (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(Importance, SingleLeafIsZero) {
  EXPECT_EQ(gain_importance(leaf_tree(2.0)), std::vector<double>{0.0});
}

TEST(Importance, SharesFollowGains) {
  const auto s = gain_importance(hand_tree(8.0, 1.0));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0], 0.8);
  EXPECT_DOUBLE_EQ(s[1], 0.2);
}
