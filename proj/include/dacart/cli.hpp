#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dacart/config.hpp"
#include "dacart/dacart.hpp"
#include "dacart/serialize.hpp"

namespace dacart {

namespace cli {

// Flags shared by the fitting commands.
struct CommonFlags {
  std::string source;
  std::string target;
  std::string response = "y";
  std::string task = "regression";
  std::uint64_t seed = 1;
  unsigned workers = default_workers();

  // Tree settings.
  int max_depth = FitParams{}.max_depth;
  double min_node_weight = FitParams{}.min_node_weight;
  double min_gain = 0.0;
  bool no_prune = false;
  int cv_folds = FitParams{}.cv_folds;
  double complexity = 0.0;

  // Weight settings.
  std::string estimator = "ew";
  std::vector<std::string> weight_features;
  std::string mechanism;
  std::string score_column;
  int rounds = BoostParams{}.rounds;
  double learning_rate = BoostParams{}.learning_rate;
  int boost_depth = BoostParams{}.max_depth;
  double boost_min_node_weight = BoostParams{}.min_node_weight;
  double trunc_lo = TruncInterval{}.lo;
  double trunc_hi = TruncInterval{}.hi;
  double threshold = 0.85;

  FitParams tree() const {
    FitParams p;
    p.max_depth = max_depth;
    p.min_node_weight = min_node_weight;
    p.min_gain = min_gain;
    p.prune = !no_prune;
    p.cv_folds = cv_folds;
    p.complexity = complexity;
    p.seed = derive_seed(seed, 1);
    p.validate();
    return p;
  }

  BoostParams boost() const {
    BoostParams b;
    b.rounds = rounds;
    b.learning_rate = learning_rate;
    b.max_depth = boost_depth;
    b.min_node_weight = boost_min_node_weight;
    b.seed = derive_seed(seed, 2);
    b.validate();
    return b;
  }

  TruncInterval trunc() const {
    TruncInterval t{trunc_lo, trunc_hi};
    t.validate();
    return t;
  }

  Json to_json() const {
    return {{"source", source},
            {"target", target},
            {"response", response},
            {"task", task},
            {"seed", seed},
            {"tree", params_to_json(tree())},
            {"estimator", estimator},
            {"weight_features", weight_features},
            {"mechanism", mechanism},
            {"score_column", score_column},
            {"boost",
             {{"rounds", rounds},
              {"learning_rate", learning_rate},
              {"max_depth", boost_depth},
              {"min_node_weight", boost_min_node_weight}}},
            {"trunc", {{"lo", trunc_lo}, {"hi", trunc_hi}}},
            {"threshold", threshold}};
  }
};

inline void add_data_flags(CLI::App* app, CommonFlags& f, bool need_target) {
  app->add_option("--source", f.source, "Labeled source CSV")->required();
  auto* t = app->add_option("--target", f.target, "Unlabeled target CSV");
  if (need_target) t->required();
  app->add_option("--response", f.response, "Response column name")->capture_default_str();
  app->add_option("--task", f.task, "regression or classification")
      ->check(CLI::IsMember({"regression", "classification"}))
      ->capture_default_str();
  app->add_option("--seed", f.seed, "Master seed")->capture_default_str();
}

inline void add_tree_flags(CLI::App* app, CommonFlags& f) {
  app->add_option("--max-depth", f.max_depth)->capture_default_str();
  app->add_option("--min-node-weight", f.min_node_weight)->capture_default_str();
  app->add_option("--min-gain", f.min_gain)->capture_default_str();
  app->add_flag("--no-prune", f.no_prune, "Skip cost-complexity pruning");
  app->add_option("--cv-folds", f.cv_folds)->capture_default_str();
  app->add_option("--complexity", f.complexity,
                  "Prune at this fraction of the root loss instead of cross-validating")
      ->capture_default_str();
  app->add_option("--threshold", f.threshold, "Cumulative gain share for variable selection")
      ->capture_default_str();
}

inline void add_weight_flags(CLI::App* app, CommonFlags& f) {
  app->add_option("--estimator", f.estimator, "Importance weights: ew, kliep, true, unit")
      ->check(CLI::IsMember({"ew", "kliep", "true", "unit"}))
      ->capture_default_str();
  app->add_option("--weight-features", f.weight_features, "Features for the weight model")
      ->delimiter(',');
  app->add_option("--mechanism", f.mechanism, "Selection mechanism for --estimator true")
      ->check(CLI::IsMember({"restricted", "shifted", "uniform"}));
  app->add_option("--score-column", f.score_column,
                  "Feature holding the selection score for --estimator true");
  app->add_option("--rounds", f.rounds)->capture_default_str();
  app->add_option("--learning-rate", f.learning_rate)->capture_default_str();
  app->add_option("--boost-depth", f.boost_depth)->capture_default_str();
  app->add_option("--boost-min-node-weight", f.boost_min_node_weight)->capture_default_str();
  app->add_option("--trunc-lo", f.trunc_lo)->capture_default_str();
  app->add_option("--trunc-hi", f.trunc_hi)->capture_default_str();
}

inline Dataset load_source(const CommonFlags& f, std::optional<std::string> weight = {}) {
  CsvOptions o;
  o.response = f.response;
  o.weight = std::move(weight);
  Dataset d = parse_dataset(f.source, o);
  if (task_from_string(f.task) == TaskKind::classification) {
    for (double v : d.y())
      if (v != 0.0 && v != 1.0)
        throw ValidationError("classification response '" + f.response + "' must be 0 or 1");
  }
  return d;
}

// Target rows restricted to the source features (a target response column,
// if present, is ignored).
inline Dataset load_target(const CommonFlags& f, const Dataset& source) {
  Dataset t = parse_dataset(f.target);
  std::vector<std::string> names;
  for (const auto& c : source.schema) names.push_back(c.name);
  for (const auto& n : names)
    if (!t.find(n)) throw ValidationError("target file lacks feature '" + n + "'");
  return select_columns(t, names);
}

inline DaCartOptions pipeline_options(const CommonFlags& f, const Dataset& source,
                                      const Dataset* target) {
  DaCartOptions o;
  o.estimator = estimator_from_string(f.estimator);
  o.task = task_from_string(f.task);
  o.tree = f.tree();
  o.boost = f.boost();
  o.trunc = f.trunc();
  o.kliep.seed = derive_seed(f.seed, 3);
  o.selection_threshold = f.threshold;
  if (!f.weight_features.empty()) o.weight_features = f.weight_features;
  if (o.estimator == Estimator::true_mechanism) {
    if (f.mechanism.empty() || f.score_column.empty())
      throw ValidationError("--estimator true needs --mechanism and --score-column");
    const auto& s = source.columns[source.index_of(f.score_column)];
    double sum = std::accumulate(s.begin(), s.end(), 0.0);
    std::size_t count = s.size();
    if (target) {
      const auto& t = target->columns[target->index_of(f.score_column)];
      sum = std::accumulate(t.begin(), t.end(), sum);
      count += t.size();
    }
    o.true_mechanism =
        TrueMechanismInput{s, mechanism_from_string(f.mechanism), sum / static_cast<double>(count)};
  }
  return o;
}

inline std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

inline void write_manifest(const std::string& out, const std::vector<std::string>& argv,
                           const Json& config, std::uint64_t seed,
                           std::vector<std::string> outputs,
                           std::chrono::system_clock::time_point started) {
  RunManifest m;
  m.command_line = argv;
  m.config = config;
  m.seed = seed;
  m.outputs = std::move(outputs);
  m.started = started;
  m.finished = std::chrono::system_clock::now();
  write_json(manifest_path(out), m.to_json());
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  return out;
}

inline void write_predictions(std::ostream& out, std::span<const double> pred) {
  out << "prediction\n";
  for (double v : pred) out << format_double(v) << '\n';
}

}  // namespace cli

// Runs the command line `args` (args[0] is the program name). Returns the
// process exit code; data goes to `out`, diagnostics to `err`.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace cli;
  const auto started = std::chrono::system_clock::now();
  CLI::App app{"Importance-weighted CART for covariate shift"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  // fit
  CommonFlags fit;
  std::string fit_model = "da-cart", fit_out, fit_report, fit_dump, fit_weight_column;
  std::string fit_tree_features = "selected";
  std::vector<std::string> fit_features;
  std::size_t fit_trees = 100;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model and write it as JSON");
  add_data_flags(fit_cmd, fit, false);
  add_tree_flags(fit_cmd, fit);
  add_weight_flags(fit_cmd, fit);
  fit_cmd->add_option("--model", fit_model, "cart, da-cart, bt, da-bt-bootstrap, da-bt-split")
      ->check(CLI::IsMember({"cart", "da-cart", "bt", "da-bt-bootstrap", "da-bt-split"}))
      ->capture_default_str();
  fit_cmd->add_option("--out", fit_out, "Model file")->required();
  fit_cmd->add_option("--report", fit_report, "Selection and weight report (JSON)");
  fit_cmd->add_option("--dump-tree", fit_dump, "Write the fitted tree(s) as JSON");
  fit_cmd->add_option("--weight-column", fit_weight_column, "Row-weight column (cart only)");
  fit_cmd->add_option("--features", fit_features, "Candidate features (cart and bt)")
      ->delimiter(',');
  fit_cmd->add_option("--tree-features", fit_tree_features,
                      "Outcome-tree features for DA models: selected or all")
      ->check(CLI::IsMember({"selected", "all"}))
      ->capture_default_str();
  fit_cmd->add_option("--trees", fit_trees, "Bagged trees")->capture_default_str();
  fit_cmd->add_option("--workers", fit.workers, "Worker threads")->capture_default_str();

  // predict
  std::string pred_model, pred_rows, pred_out;
  auto* pred_cmd = app.add_subcommand("predict", "Predict rows with a saved model");
  pred_cmd->add_option("--model", pred_model, "Model file")->required();
  pred_cmd->add_option("--rows", pred_rows, "Rows CSV")->required();
  pred_cmd->add_option("--out", pred_out, "Predictions CSV (default: stdout)");

  // weights
  CommonFlags wt;
  std::string wt_out;
  auto* wt_cmd = app.add_subcommand("weights", "Estimate importance weights for source rows");
  add_data_flags(wt_cmd, wt, true);
  add_weight_flags(wt_cmd, wt);
  wt_cmd->add_option("--out", wt_out, "Weights CSV")->required();

  // importance
  CommonFlags imp;
  std::string imp_out;
  auto* imp_cmd = app.add_subcommand("importance", "Gain shares and the selected variables");
  add_data_flags(imp_cmd, imp, false);
  add_tree_flags(imp_cmd, imp);
  imp_cmd->add_option("--out", imp_out, "Importance CSV (default: stdout)");

  // simulate
  std::string sim_config, sim_out, sim_summary;
  std::optional<std::size_t> sim_reps, sim_n;
  std::optional<std::uint64_t> sim_seed;
  std::vector<std::string> sim_set;
  unsigned sim_workers = default_workers();
  auto* sim_cmd = app.add_subcommand("simulate", "Run a simulation study from a config file");
  sim_cmd->add_option("--config", sim_config, "Scenario config file")->required();
  sim_cmd->add_option("--reps", sim_reps, "Replications");
  sim_cmd->add_option("--n", sim_n, "Source sample size");
  sim_cmd->add_option("--seed", sim_seed, "Master seed");
  sim_cmd->add_option("--set", sim_set, "Override a config key (key=value)");
  sim_cmd->add_option("--workers", sim_workers, "Worker threads")->capture_default_str();
  sim_cmd->add_option("--out", sim_out, "Result CSV")->required();
  sim_cmd->add_option("--summary", sim_summary, "Per-model median/IQR CSV");

  // bias-demo
  std::size_t bd_reps = 100;
  std::uint64_t bd_seed = 1;
  unsigned bd_workers = default_workers();
  std::string bd_out;
  auto* bd_cmd = app.add_subcommand("bias-demo", "OLS vs. CART under sample selection bias");
  bd_cmd->add_option("--reps", bd_reps, "Replications")->capture_default_str();
  bd_cmd->add_option("--seed", bd_seed, "Master seed")->capture_default_str();
  bd_cmd->add_option("--workers", bd_workers, "Worker threads")->capture_default_str();
  bd_cmd->add_option("--out", bd_out, "Per-replication CSV");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit_cmd) {
      const auto task = task_from_string(fit.task);
      const bool da = fit_model != "cart" && fit_model != "bt";
      if (da && fit.target.empty())
        throw ValidationError("--model " + fit_model + " requires --target");
      if (!fit_weight_column.empty() && fit_model != "cart")
        throw ValidationError("--weight-column applies to --model cart only");
      const Dataset source =
          load_source(fit, fit_weight_column.empty() ? std::optional<std::string>{}
                                                     : std::optional<std::string>{fit_weight_column});
      std::optional<Dataset> target;
      if (!fit.target.empty()) target = load_target(fit, source);
      const auto candidates = fit_features.empty()
                                  ? all_features(source)
                                  : [&] {
                                      std::vector<std::size_t> c;
                                      for (const auto& n : fit_features)
                                        c.push_back(source.index_of(n));
                                      std::sort(c.begin(), c.end());
                                      return c;
                                    }();
      Json model_json, report = {{"model", fit_model}, {"seed", fit.seed}};
      std::vector<Tree> dump;
      if (fit_model == "cart") {
        const auto w = source.weights_or_ones();
        Tree t = fit_cart(source, w, candidates, fit.tree(), task);
        model_json = model_to_json(t);
        report["leaves"] = t.leaves();
        dump.push_back(std::move(t));
      } else if (fit_model == "da-cart") {
        auto opt = pipeline_options(fit, source, &*target);
        opt.tree_features = tree_features_from_string(fit_tree_features);
        DaCartModel m = fit_da_cart(source, *target, opt);
        for (const auto& w : m.warnings) err << "warning: " << w << '\n';
        model_json = model_to_json(m);
        report["selection"] = selection_to_json(m.selection, source.schema);
        report["weights"] = weight_summary(m.weights);
        report["weight_features"] = m.weight_features;
        report["leaves"] = m.tree.leaves();
        report["warnings"] = m.warnings;
        dump.push_back(m.tree);
      } else {
        const BagVariant variant = fit_model == "bt"                ? BagVariant::naive
                                   : fit_model == "da-bt-bootstrap" ? BagVariant::da_bootstrap
                                                                    : BagVariant::da_split;
        std::optional<WeightVector> weights;
        std::vector<std::size_t> bag_candidates = candidates;
        FitParams bag_params = fit.tree();
        bag_params.seed = derive_seed(fit.seed, 4);
        if (variant != BagVariant::naive) {
          auto opt = pipeline_options(fit, source, &*target);
          std::vector<std::string> warnings;
          const auto sel =
              select_or_fallback(source, opt.tree, opt.selection_threshold, task, &warnings);
          for (const auto& w : warnings) err << "warning: " << w << '\n';
          const auto wf = opt.weight_features
                              ? *opt.weight_features
                              : feature_names(source, sel.sorted_selected());
          weights = estimate_weights(source, *target, wf, opt);
          if (tree_features_from_string(fit_tree_features) == TreeFeatures::selected)
            bag_candidates = sel.sorted_selected();
          report["selection"] = selection_to_json(sel, source.schema);
          report["weights"] = weight_summary(*weights);
          report["weight_features"] = wf;
        }
        const BaggedModel m = fit_bagged(source, variant, weights ? &*weights : nullptr,
                                         fit_trees, bag_candidates, bag_params, task, fit.workers);
        model_json = model_to_json(m);
        report["trees"] = m.trees.size();
        dump = m.trees;
      }
      write_json(fit_out, model_json);
      const std::string report_path = fit_report.empty() ? fit_out + ".report.json" : fit_report;
      write_json(report_path, report);
      std::vector<std::string> outputs{fit_out, report_path};
      if (!fit_dump.empty()) {
        Json trees = Json::array();
        for (const auto& t : dump) trees.push_back(tree_to_json(t));
        write_json(fit_dump, dump.size() == 1 ? trees.front() : trees);
        outputs.push_back(fit_dump);
      }
      Json config = fit.to_json();
      config["model"] = fit_model;
      config["tree_features"] = fit_tree_features;
      config["features"] = fit_features;
      config["trees"] = fit_trees;
      config["weight_column"] = fit_weight_column;
      write_manifest(fit_out, args, config, fit.seed, outputs, started);
      err << "seed: " << fit.seed << '\n';
    } else if (*pred_cmd) {
      const ModelFile m = load_model(pred_model);
      CsvOptions o;
      o.allow_empty = true;
      const Dataset rows = parse_dataset(pred_rows, o);
      std::vector<double> pred;
      if (rows.rows() > 0) {
        pred = m.predict(rows);
      } else {
        for (const auto& t : m.trees) t.bind(rows);
      }
      if (pred_out.empty()) {
        write_predictions(out, pred);
      } else {
        auto f = open_out(pred_out);
        write_predictions(f, pred);
        write_manifest(pred_out, args, {{"model", pred_model}, {"rows", pred_rows}}, 0,
                       {pred_out}, started);
      }
    } else if (*wt_cmd) {
      const Dataset source = load_source(wt);
      const Dataset target = load_target(wt, source);
      auto opt = pipeline_options(wt, source, &target);
      const auto features = opt.weight_features ? *opt.weight_features
                                                : feature_names(source, all_features(source));
      std::vector<std::optional<double>> propensity(source.rows());
      std::vector<double> raw(source.rows(), 1.0);
      WeightVector w;
      switch (opt.estimator) {
        case Estimator::propensity: {
          const auto model =
              fit_propensity(select_columns(source, features), select_columns(target, features),
                             opt.boost);
          const auto p = model.predict_proba(select_columns(source, features));
          std::size_t hits = 0;
          raw = odds_from_propensity(p, opt.trunc, &hits);
          for (std::size_t i = 0; i < p.size(); ++i) propensity[i] = p[i];
          w = normalize_weights(raw, WeightSource::propensity_odds, opt.trunc);
          w.trunc_hits = hits;
          break;
        }
        case Estimator::kliep: {
          const auto fitk = fit_kliep(select_columns(source, features),
                                      select_columns(target, features), opt.kliep);
          raw = fitk.source_ratio;
          w = normalize_weights(raw, WeightSource::kliep);
          break;
        }
        case Estimator::true_mechanism: {
          const auto& tm = *opt.true_mechanism;
          std::size_t hits = 0;
          std::vector<double> p(tm.score.size());
          for (std::size_t i = 0; i < p.size(); ++i)
            p[i] = sigmoid(mechanism_logit(tm.mechanism, tm.score[i], tm.score_mean));
          raw = odds_from_propensity(p, opt.trunc, &hits);
          for (std::size_t i = 0; i < p.size(); ++i) propensity[i] = p[i];
          w = normalize_weights(raw, WeightSource::true_mechanism, opt.trunc);
          w.trunc_hits = hits;
          break;
        }
        case Estimator::unit:
          w = unit_weights(source.rows());
          break;
      }
      auto f = open_out(wt_out);
      f << "row,propensity,raw_odds,weight\n";
      for (std::size_t i = 0; i < w.size(); ++i)
        f << i << ',' << (propensity[i] ? format_double(*propensity[i]) : std::string{}) << ','
          << format_double(raw[i]) << ',' << format_double(w.values[i]) << '\n';
      const auto s = weight_summary(w);
      out << "ess=" << format_double(s["ess"].get<double>())
          << " min=" << format_double(s["min"].get<double>())
          << " max=" << format_double(s["max"].get<double>()) << " trunc_hits=" << w.trunc_hits
          << " seed=" << wt.seed << '\n';
      Json config = wt.to_json();
      config["weight_features"] = features;
      write_manifest(wt_out, args, config, wt.seed, {wt_out}, started);
    } else if (*imp_cmd) {
      const Dataset source = load_source(imp);
      const auto task = task_from_string(imp.task);
      const std::vector<double> unit(source.rows(), 1.0);
      const Tree m1 = fit_cart(source, unit, all_features(source), imp.tree(), task);
      const auto shares = gain_importance(m1);
      std::vector<bool> chosen(shares.size(), false);
      if (!m1.root().is_leaf())
        for (auto j : select_by_share(shares, imp.threshold).selected) chosen[j] = true;
      std::ostringstream csv;
      csv << "feature,share,selected\n";
      for (std::size_t j = 0; j < shares.size(); ++j)
        csv << source.schema[j].name << ',' << format_double(shares[j]) << ','
            << (chosen[j] ? 1 : 0) << '\n';
      if (imp_out.empty()) {
        out << csv.str();
      } else {
        open_out(imp_out) << csv.str();
        write_manifest(imp_out, args, imp.to_json(), imp.seed, {imp_out}, started);
      }
    } else if (*sim_cmd) {
      Scenario sc = load_scenario(sim_config);
      for (const auto& s : sim_set) apply_override(sc, s);
      if (sim_reps) sc.replications = *sim_reps;
      if (sim_n) sc.n_source = *sim_n;
      if (sim_seed) sc.master_seed = *sim_seed;
      sc.validate();
      const StudyResult r = run_study(sc, sim_workers);
      {
        auto f = open_out(sim_out);
        write_study_csv(f, r);
      }
      std::vector<std::string> outputs{sim_out};
      if (!sim_summary.empty()) {
        auto f = open_out(sim_summary);
        write_summary_csv(f, r);
        outputs.push_back(sim_summary);
      }
      for (const auto& m : r.failure_messages) err << "failed " << m << '\n';
      write_manifest(sim_out, args, {{"scenario", to_config_text(sc)}}, sc.master_seed, outputs,
                     started);
      err << "seed: " << sc.master_seed << ", records: " << r.records.size()
          << ", failures: " << r.failures << '\n';
      if (r.records.empty()) throw DegenerateError("every replication failed");
    } else if (*bd_cmd) {
      const auto r = bias_demo(bd_reps, bd_seed, study_tree_params(), bd_workers);
      out << "replications,mean_mse_ols,mean_mse_cart,ratio\n"
          << bd_reps << ',' << format_double(r.mean_mse_ols) << ','
          << format_double(r.mean_mse_cart) << ','
          << format_double(r.mean_mse_cart / r.mean_mse_ols) << '\n';
      if (!bd_out.empty()) {
        auto f = open_out(bd_out);
        f << "replication,mse_ols,mse_cart\n";
        for (std::size_t i = 0; i < bd_reps; ++i)
          f << i << ',' << format_double(r.mse_ols[i]) << ',' << format_double(r.mse_cart[i])
            << '\n';
        write_manifest(bd_out, args, {{"reps", bd_reps}}, bd_seed, {bd_out}, started);
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return exit_code(ErrorKind::internal);
  }
  return 0;
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace dacart
