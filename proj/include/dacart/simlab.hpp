#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dacart/boost.hpp"
#include "dacart/data.hpp"
#include "dacart/error.hpp"
#include "dacart/metrics.hpp"
#include "dacart/parallel.hpp"
#include "dacart/pipeline.hpp"
#include "dacart/rng.hpp"
#include "dacart/tree.hpp"
#include "dacart/weights.hpp"

namespace dacart {

// main_sim: y = 5 sin(X1 X2) + X1 + X1^2 + X2 + X2^2 + e with X1 ~ N(0, sd 3),
//   X2 ~ N(0, 1), X3 ~ U(0, 1), X4 ~ N(0, 1), X5 ~ Gamma(shape 2, rate 1).
// bias_demo: Y = 3 X1 + 2 X2 + 0.5 X3 + e with X1, X2, X3 ~ N(0, 1).
enum class Formula { main_sim, bias_demo };

inline const char* to_string(Formula f) {
  return f == Formula::bias_demo ? "bias_demo" : "main_sim";
}

inline Formula formula_from_string(std::string_view s) {
  if (s == "main_sim") return Formula::main_sim;
  if (s == "bias_demo") return Formula::bias_demo;
  throw ValidationError("unknown generator formula '" + std::string(s) + "'");
}

struct GeneratorSpec {
  Formula formula = Formula::main_sim;
  double noise_sd = 1.0;
};

enum class ScoreFormula { x1, x1_plus_2x4, x2 };

inline const char* to_string(ScoreFormula s) {
  switch (s) {
    case ScoreFormula::x1: return "x1";
    case ScoreFormula::x1_plus_2x4: return "x1_plus_2x4";
    case ScoreFormula::x2: return "x2";
  }
  return "x1";
}

inline ScoreFormula score_from_string(std::string_view s) {
  if (s == "x1") return ScoreFormula::x1;
  if (s == "x1_plus_2x4") return ScoreFormula::x1_plus_2x4;
  if (s == "x2") return ScoreFormula::x2;
  throw ValidationError("unknown score formula '" + std::string(s) + "'");
}

// Features entering the score (also the KLIEP feature set in studies).
inline std::vector<std::string> score_features(ScoreFormula s) {
  switch (s) {
    case ScoreFormula::x1: return {"X1"};
    case ScoreFormula::x1_plus_2x4: return {"X1", "X4"};
    case ScoreFormula::x2: return {"X2"};
  }
  return {"X1"};
}

struct SelectionSpec {
  Mechanism mechanism = Mechanism::restricted;
  ScoreFormula score = ScoreFormula::x1;
};

inline Dataset generate_pool(const GeneratorSpec& spec, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::gamma_distribution<double> gamma(2.0, 1.0);
  Dataset d;
  d.response = std::vector<double>(n);
  d.response_name = "y";
  auto& y = *d.response;
  if (spec.formula == Formula::main_sim) {
    for (int j = 1; j <= 5; ++j) d.schema.push_back({"X" + std::to_string(j), ColumnKind::continuous});
    d.columns.assign(5, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double x1 = 3.0 * std_normal(rng);
      const double x2 = std_normal(rng);
      const double x3 = unif(rng);
      const double x4 = std_normal(rng);
      const double x5 = gamma(rng);
      const double e = spec.noise_sd * std_normal(rng);
      d.columns[0][i] = x1;
      d.columns[1][i] = x2;
      d.columns[2][i] = x3;
      d.columns[3][i] = x4;
      d.columns[4][i] = x5;
      y[i] = 5.0 * std::sin(x1 * x2) + x1 + x1 * x1 + x2 + x2 * x2 + e;
    }
  } else {
    for (int j = 1; j <= 3; ++j) d.schema.push_back({"X" + std::to_string(j), ColumnKind::continuous});
    d.columns.assign(3, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double x1 = std_normal(rng);
      const double x2 = std_normal(rng);
      const double x3 = std_normal(rng);
      const double e = spec.noise_sd * std_normal(rng);
      d.columns[0][i] = x1;
      d.columns[1][i] = x2;
      d.columns[2][i] = x3;
      y[i] = 3.0 * x1 + 2.0 * x2 + 0.5 * x3 + e;
    }
  }
  return d;
}

inline std::vector<double> compute_scores(const Dataset& pool, ScoreFormula s) {
  std::vector<double> out(pool.rows());
  const auto& x1 = pool.columns[pool.index_of("X1")];
  if (s == ScoreFormula::x1) return x1;
  if (s == ScoreFormula::x2) return pool.columns[pool.index_of("X2")];
  const auto& x4 = pool.columns[pool.index_of("X4")];
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x1[i] + 2.0 * x4[i];
  return out;
}

inline double selection_probability(const SelectionSpec& sel, double score, double score_mean) {
  return sigmoid(mechanism_logit(sel.mechanism, score, score_mean));
}

struct DomainSplit {
  Dataset source;  // W = 0
  Dataset target;  // W = 1
  std::vector<double> source_score;
  std::vector<double> target_score;
  double score_mean = 0.0;
};

// Draws W ~ Bernoulli(P(W = 1 | score)) per row; score_mean is the pool mean.
inline DomainSplit assign_domains(const Dataset& pool, const SelectionSpec& sel,
                                  std::uint64_t seed) {
  if (pool.rows() == 0) throw ValidationError("cannot assign domains on an empty pool");
  const auto score = compute_scores(pool, sel.score);
  DomainSplit out;
  out.score_mean = std::accumulate(score.begin(), score.end(), 0.0) /
                   static_cast<double>(score.size());
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::size_t> src, tgt;
  for (std::size_t i = 0; i < score.size(); ++i) {
    const double p = selection_probability(sel, score[i], out.score_mean);
    if (unif(rng) < p) {
      tgt.push_back(i);
      out.target_score.push_back(score[i]);
    } else {
      src.push_back(i);
      out.source_score.push_back(score[i]);
    }
  }
  if (src.empty() || tgt.empty())
    throw DegenerateError("domain assignment left a partition empty; use a larger pool");
  out.source = select_rows(pool, src);
  out.target = select_rows(pool, tgt);
  return out;
}

// ---------------------------------------------------------------------------
// Scenarios

// Tree settings for the simulation studies: R rpart defaults (complexity
// 0.01, no cross-validated selection).
inline FitParams study_tree_params() {
  FitParams p;
  p.complexity = 0.01;
  return p;
}

enum class ModelKind { naive_cart, target_cart, da_cart, naive_bt, target_bt, da_bt_bootstrap, da_bt_split };
enum class SimEstimator { none, ew1, ew2, ew3, tw, unit };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::naive_cart: return "naive_cart";
    case ModelKind::target_cart: return "target_cart";
    case ModelKind::da_cart: return "da_cart";
    case ModelKind::naive_bt: return "naive_bt";
    case ModelKind::target_bt: return "target_bt";
    case ModelKind::da_bt_bootstrap: return "da_bt_bootstrap";
    case ModelKind::da_bt_split: return "da_bt_split";
  }
  return "naive_cart";
}

inline const char* to_string(SimEstimator e) {
  switch (e) {
    case SimEstimator::none: return "none";
    case SimEstimator::ew1: return "ew1";
    case SimEstimator::ew2: return "ew2";
    case SimEstimator::ew3: return "ew3";
    case SimEstimator::tw: return "tw";
    case SimEstimator::unit: return "unit";
  }
  return "none";
}

struct ModelConfig {
  ModelKind kind = ModelKind::naive_cart;
  SimEstimator estimator = SimEstimator::none;

  bool weighted() const {
    return kind == ModelKind::da_cart || kind == ModelKind::da_bt_bootstrap ||
           kind == ModelKind::da_bt_split;
  }
  bool uses_target_train() const {
    return kind == ModelKind::target_cart || kind == ModelKind::target_bt;
  }
  std::string label() const {
    return estimator == SimEstimator::none
               ? std::string(to_string(kind))
               : std::string(to_string(kind)) + ":" + to_string(estimator);
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Parses "naive_cart", "da_cart:ew1", "da_bt_split:tw", ...
inline ModelConfig parse_model_config(std::string_view text) {
  const auto colon = text.find(':');
  const auto kind_s = text.substr(0, colon);
  const auto est_s = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  ModelConfig m;
  bool found = false;
  for (auto k : {ModelKind::naive_cart, ModelKind::target_cart, ModelKind::da_cart,
                 ModelKind::naive_bt, ModelKind::target_bt, ModelKind::da_bt_bootstrap,
                 ModelKind::da_bt_split}) {
    if (kind_s == to_string(k)) {
      m.kind = k;
      found = true;
    }
  }
  if (!found) throw ValidationError("models: unknown model '" + std::string(kind_s) + "'");
  if (!est_s.empty()) {
    found = false;
    for (auto e : {SimEstimator::ew1, SimEstimator::ew2, SimEstimator::ew3, SimEstimator::tw,
                   SimEstimator::unit}) {
      if (est_s == to_string(e)) {
        m.estimator = e;
        found = true;
      }
    }
    if (!found)
      throw ValidationError("models: unknown estimator '" + std::string(est_s) + "'");
  }
  if (m.weighted() && m.estimator == SimEstimator::none)
    throw ValidationError("models: '" + std::string(text) + "' needs an estimator, e.g. " +
                          to_string(m.kind) + ":ew1");
  if (!m.weighted() && m.estimator != SimEstimator::none)
    throw ValidationError("models: '" + std::string(kind_s) + "' takes no estimator");
  return m;
}

struct Scenario {
  std::string id = "scenario";
  GeneratorSpec generator;
  SelectionSpec selection;
  std::size_t n_source = 1000;
  std::size_t n_target_test = 10000;
  std::vector<ModelConfig> models{{ModelKind::naive_cart, SimEstimator::none}};
  std::size_t replications = 20;
  std::uint64_t master_seed = 1;
  std::size_t bt_trees = 100;
  FitParams tree = study_tree_params();
  BoostParams boost;
  KliepParams kliep;
  TruncInterval trunc;
  double selection_threshold = 0.85;
  // Weighted models fix their weight features per estimator tag; this picks
  // the features their trees may split on.
  TreeFeatures tree_features = TreeFeatures::all;
  // Each pool batch holds pool_factor times the rows still needed.
  std::size_t pool_factor = 4;
  std::size_t max_batches = 50;

  void validate() const {
    if (id.empty()) throw ValidationError("scenario.id must not be empty");
    if (n_source < 1) throw ValidationError("sample.n_source must be >= 1");
    if (n_target_test < 1) throw ValidationError("sample.n_target_test must be >= 1");
    if (replications < 1) throw ValidationError("run.replications must be >= 1");
    if (models.empty()) throw ValidationError("models must list at least one model");
    if (bt_trees < 1) throw ValidationError("bagging.trees must be >= 1");
    if (!(generator.noise_sd >= 0.0)) throw ValidationError("generator.noise_sd must be >= 0");
    if (pool_factor < 1) throw ValidationError("sample.pool_factor must be >= 1");
    if (max_batches < 1) throw ValidationError("sample.max_batches must be >= 1");
    if (!(selection_threshold > 0.0 && selection_threshold <= 1.0))
      throw ValidationError("variables.threshold must lie in (0, 1]");
    if (generator.formula == Formula::bias_demo &&
        selection.score == ScoreFormula::x1_plus_2x4)
      throw ValidationError("selection.score x1_plus_2x4 needs the main_sim generator");
    tree.validate();
    boost.validate();
    trunc.validate();
  }

  bool needs_target_train() const {
    for (const auto& m : models)
      if (m.uses_target_train()) return true;
    return false;
  }
};

struct ScenarioData {
  Dataset train;                       // labeled source rows
  Dataset test;                        // target rows used for evaluation
  std::optional<Dataset> target_train; // labeled target rows, disjoint from test
  std::vector<double> train_score;     // score minus its batch mean, per train row
  Mechanism mechanism = Mechanism::restricted;
  std::size_t pool_rows = 0;
};

namespace detail {

inline void append_rows(Dataset& dst, const Dataset& src) {
  if (dst.columns.empty() && !dst.response) {
    dst = src;
    return;
  }
  for (std::size_t j = 0; j < dst.columns.size(); ++j)
    dst.columns[j].insert(dst.columns[j].end(), src.columns[j].begin(), src.columns[j].end());
  if (dst.response)
    dst.response->insert(dst.response->end(), src.response->begin(), src.response->end());
}

inline Dataset head_rows(const Dataset& d, std::size_t begin, std::size_t count) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), begin);
  return select_rows(d, idx);
}

}  // namespace detail

inline std::uint64_t replication_seed(const Scenario& sc, std::size_t replication) {
  return derive_seed(sc.master_seed, replication);
}

// Generates pool batches until the source partition holds n_source rows and
// the target partition holds the test rows (plus n_source labeled target rows
// when a target comparator is configured), then truncates to exact sizes.
inline ScenarioData build_scenario_data(const Scenario& sc, std::size_t replication) {
  const std::uint64_t rep_seed = replication_seed(sc, replication);
  const std::size_t target_needed =
      sc.n_target_test + (sc.needs_target_train() ? sc.n_source : 0);
  Dataset source, target;
  std::vector<double> source_score;
  std::size_t generated = 0;
  for (std::size_t b = 0;; ++b) {
    if (source.rows() >= sc.n_source && target.rows() >= target_needed) break;
    if (b >= sc.max_batches) {
      throw DegenerateError("scenario " + sc.id + ": acceptance rate too low after " +
                            std::to_string(generated) + " pool rows (source " +
                            std::to_string(source.rows()) + ", target " +
                            std::to_string(target.rows()) + ")");
    }
    const std::size_t batch = sc.pool_factor * (sc.n_source + target_needed);
    const Dataset pool = generate_pool(sc.generator, batch, derive_seed(rep_seed, 2 * b));
    const auto split = assign_domains(pool, sc.selection, derive_seed(rep_seed, 2 * b + 1));
    generated += batch;
    detail::append_rows(source, split.source);
    detail::append_rows(target, split.target);
    for (double s : split.source_score) source_score.push_back(s - split.score_mean);
  }
  const double rate = static_cast<double>(std::min(source.rows(), target.rows())) /
                      static_cast<double>(generated);
  if (rate < 0.01)
    throw DegenerateError("scenario " + sc.id + ": domain acceptance rate below 1%");

  ScenarioData out;
  out.mechanism = sc.selection.mechanism;
  out.pool_rows = generated;
  out.train = detail::head_rows(source, 0, sc.n_source);
  out.train_score.assign(source_score.begin(),
                         source_score.begin() + static_cast<std::ptrdiff_t>(sc.n_source));
  out.test = detail::head_rows(target, 0, sc.n_target_test);
  if (sc.needs_target_train())
    out.target_train = detail::head_rows(target, sc.n_target_test, sc.n_source);
  return out;
}

// ---------------------------------------------------------------------------
// Studies

struct StudyRecord {
  std::string scenario;
  std::size_t replication = 0;
  std::string model;
  std::string estimator;
  std::size_t n_source = 0;
  std::string metric;
  double value = 0.0;

  friend bool operator==(const StudyRecord&, const StudyRecord&) = default;
};

struct StudyResult {
  std::vector<StudyRecord> records;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;

  // Metric values for one model/estimator pair, in replication order.
  std::vector<double> values(std::string_view model, std::string_view estimator,
                             std::string_view metric = "rmse") const {
    std::vector<double> out;
    for (const auto& r : records)
      if (r.model == model && r.estimator == estimator && r.metric == metric)
        out.push_back(r.value);
    return out;
  }

  double median_of(std::string_view model, std::string_view estimator) const {
    return median(values(model, estimator));
  }
};

// Per-replication derived seeds for the stochastic pieces of each fit.
struct ReplicationSeeds {
  std::uint64_t tree;
  std::uint64_t kliep;
  std::uint64_t bagging;
};

inline ReplicationSeeds replication_seeds(const Scenario& sc, std::size_t replication) {
  const auto s = replication_seed(sc, replication);
  return {derive_seed(s, 1001), derive_seed(s, 1002), derive_seed(s, 1003)};
}

namespace detail {

class ReplicationRunner {
 public:
  ReplicationRunner(const Scenario& sc, std::size_t replication)
      : sc_(sc), seeds_(replication_seeds(sc, replication)),
        data_(build_scenario_data(sc, replication)) {
    tree_ = sc.tree;
    tree_.seed = seeds_.tree;
  }

  const ScenarioData& data() const { return data_; }

  std::vector<double> predict(const ModelConfig& m) {
    const auto& train = data_.train;
    const auto all = all_features(train);
    switch (m.kind) {
      case ModelKind::naive_cart: {
        const std::vector<double> unit(train.rows(), 1.0);
        return fit_cart(train, unit, all, tree_, TaskKind::regression).predict(data_.test);
      }
      case ModelKind::target_cart: {
        const auto& tt = *data_.target_train;
        const std::vector<double> unit(tt.rows(), 1.0);
        return fit_cart(tt, unit, all_features(tt), tree_, TaskKind::regression)
            .predict(data_.test);
      }
      case ModelKind::da_cart: {
        const auto& w = weights(m.estimator);
        return fit_cart(train, w.values, weighted_features(), tree_,
                        TaskKind::regression)
            .predict(data_.test);
      }
      case ModelKind::naive_bt:
        return fit_bagged(train, BagVariant::naive, nullptr, sc_.bt_trees, all, bag_params())
            .predict(data_.test);
      case ModelKind::target_bt: {
        const auto& tt = *data_.target_train;
        return fit_bagged(tt, BagVariant::naive, nullptr, sc_.bt_trees, all_features(tt),
                          bag_params())
            .predict(data_.test);
      }
      case ModelKind::da_bt_bootstrap:
      case ModelKind::da_bt_split: {
        const auto variant =
            m.kind == ModelKind::da_bt_bootstrap ? BagVariant::da_bootstrap : BagVariant::da_split;
        const auto& w = weights(m.estimator);
        return fit_bagged(train, variant, &w, sc_.bt_trees, weighted_features(),
                          bag_params())
            .predict(data_.test);
      }
    }
    throw Error(ErrorKind::internal, "unhandled model kind");
  }

 private:
  FitParams bag_params() const {
    FitParams p = sc_.tree;
    p.seed = seeds_.bagging;
    return p;
  }

  std::vector<std::size_t> weighted_features() {
    if (sc_.tree_features == TreeFeatures::all) return all_features(data_.train);
    return selection().sorted_selected();
  }

  const VariableSelection& selection() {
    if (!selection_)
      selection_ = select_or_fallback(data_.train, tree_, sc_.selection_threshold,
                                      TaskKind::regression);
    return *selection_;
  }

  const WeightVector& weights(SimEstimator e) {
    auto it = weights_.find(e);
    if (it != weights_.end()) return it->second;
    DaCartOptions opt;
    opt.tree = tree_;
    opt.boost = sc_.boost;
    opt.kliep = sc_.kliep;
    opt.kliep.seed = seeds_.kliep;
    opt.trunc = sc_.trunc;
    std::vector<std::string> features;
    switch (e) {
      case SimEstimator::ew1:
        opt.estimator = Estimator::propensity;
        features = {"X1"};
        break;
      case SimEstimator::ew2:
        opt.estimator = Estimator::propensity;
        features = {"X1", "X4"};
        break;
      case SimEstimator::ew3:
        opt.estimator = Estimator::kliep;
        features = score_features(sc_.selection.score);
        break;
      case SimEstimator::tw:
        opt.estimator = Estimator::true_mechanism;
        opt.true_mechanism = TrueMechanismInput{data_.train_score, data_.mechanism, 0.0};
        break;
      case SimEstimator::unit:
      case SimEstimator::none:
        opt.estimator = Estimator::unit;
        break;
    }
    auto w = estimate_weights(data_.train, data_.test, features, opt);
    return weights_.emplace(e, std::move(w)).first->second;
  }

  const Scenario& sc_;
  ReplicationSeeds seeds_;
  ScenarioData data_;
  FitParams tree_;
  std::optional<VariableSelection> selection_;
  std::map<SimEstimator, WeightVector> weights_;
};

}  // namespace detail

// Runs every configured model in every replication and records target-test
// RMSE. A replication that throws is dropped as a whole and counted as a
// failure. Output order is (replication, model) regardless of `workers`.
inline StudyResult run_study(const Scenario& sc, unsigned workers = 1) {
  sc.validate();
  std::vector<std::vector<StudyRecord>> per_rep(sc.replications);
  std::vector<std::string> errors(sc.replications);
  parallel_for(sc.replications, workers, [&](std::size_t r) {
    try {
      detail::ReplicationRunner runner(sc, r);
      const auto truth = runner.data().test.y();
      std::vector<StudyRecord> recs;
      for (const auto& m : sc.models) {
        const auto pred = runner.predict(m);
        recs.push_back({sc.id, r, to_string(m.kind), to_string(m.estimator), sc.n_source,
                        "rmse", rmse(pred, truth)});
      }
      per_rep[r] = std::move(recs);
    } catch (const std::exception& e) {
      errors[r] = e.what();
      if (errors[r].empty()) errors[r] = "unknown failure";
    }
  });
  StudyResult out;
  for (std::size_t r = 0; r < sc.replications; ++r) {
    if (!errors[r].empty()) {
      ++out.failures;
      out.failure_messages.push_back("replication " + std::to_string(r) + ": " + errors[r]);
      continue;
    }
    for (auto& rec : per_rep[r]) out.records.push_back(std::move(rec));
  }
  return out;
}

inline void write_study_csv(std::ostream& out, const StudyResult& result) {
  out << "scenario,replication,model,estimator,n_source,metric,value\n";
  for (const auto& r : result.records) {
    out << r.scenario << ',' << r.replication << ',' << r.model << ',' << r.estimator << ','
        << r.n_source << ',' << r.metric << ',' << format_double(r.value) << '\n';
  }
}

struct SummaryRow {
  std::string scenario, model, estimator, metric;
  std::size_t n_source = 0;
  std::size_t count = 0;
  double median = 0.0, q1 = 0.0, q3 = 0.0;
};

inline std::vector<SummaryRow> summarize(const StudyResult& result) {
  std::vector<SummaryRow> rows;
  std::vector<std::vector<double>> vals;
  for (const auto& r : result.records) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& s) {
      return s.model == r.model && s.estimator == r.estimator && s.metric == r.metric &&
             s.n_source == r.n_source && s.scenario == r.scenario;
    });
    if (it == rows.end()) {
      rows.push_back({r.scenario, r.model, r.estimator, r.metric, r.n_source});
      vals.emplace_back();
      it = rows.end() - 1;
    }
    vals[static_cast<std::size_t>(it - rows.begin())].push_back(r.value);
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].count = vals[k].size();
    rows[k].median = quantile(vals[k], 0.5);
    rows[k].q1 = quantile(vals[k], 0.25);
    rows[k].q3 = quantile(vals[k], 0.75);
  }
  return rows;
}

inline void write_summary_csv(std::ostream& out, const StudyResult& result) {
  out << "scenario,model,estimator,n_source,metric,count,median,q1,q3,iqr,failures\n";
  for (const auto& s : summarize(result)) {
    out << s.scenario << ',' << s.model << ',' << s.estimator << ',' << s.n_source << ','
        << s.metric << ',' << s.count << ',' << format_double(s.median) << ','
        << format_double(s.q1) << ',' << format_double(s.q3) << ','
        << format_double(s.q3 - s.q1) << ',' << result.failures << '\n';
  }
}

// ---------------------------------------------------------------------------
// OLS vs. CART under sample selection bias

struct BiasDemoResult {
  std::vector<double> mse_ols;
  std::vector<double> mse_cart;
  double mean_mse_ols = 0.0;
  double mean_mse_cart = 0.0;
};

// Per replication: 2000 rows of the linear model, W ~ Bernoulli(sigmoid(2 X2));
// both models train on the W = 1 rows and are scored on the W = 0 rows.
inline BiasDemoResult bias_demo(std::size_t replications, std::uint64_t seed,
                                FitParams params = study_tree_params(), unsigned workers = 1) {
  if (replications < 1) throw ValidationError("bias_demo needs at least one replication");
  BiasDemoResult out;
  out.mse_ols.resize(replications);
  out.mse_cart.resize(replications);
  const SelectionSpec sel{Mechanism::bias_demo_logit, ScoreFormula::x2};
  parallel_for(replications, workers, [&](std::size_t r) {
    const auto rep_seed = derive_seed(seed, r);
    const Dataset pool = generate_pool({Formula::bias_demo, 1.0}, 2000, derive_seed(rep_seed, 0));
    const auto split = assign_domains(pool, sel, derive_seed(rep_seed, 1));
    const Dataset& train = split.target;
    const Dataset& eval = split.source;
    const auto ols = ols_fit(train);
    out.mse_ols[r] = mse(ols.predict(eval), eval.y());
    FitParams p = params;
    p.seed = derive_seed(rep_seed, 2);
    const std::vector<double> unit(train.rows(), 1.0);
    const Tree cart = fit_cart(train, unit, all_features(train), p, TaskKind::regression);
    out.mse_cart[r] = mse(cart.predict(eval), eval.y());
  });
  const auto n = static_cast<double>(replications);
  out.mean_mse_ols = std::accumulate(out.mse_ols.begin(), out.mse_ols.end(), 0.0) / n;
  out.mean_mse_cart = std::accumulate(out.mse_cart.begin(), out.mse_cart.end(), 0.0) / n;
  return out;
}

}  // namespace dacart
