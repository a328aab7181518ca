#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dacart/boost.hpp"
#include "dacart/data.hpp"
#include "dacart/error.hpp"
#include "dacart/rng.hpp"

namespace dacart {

enum class WeightSource { propensity_odds, kliep, true_mechanism, unit };

inline const char* to_string(WeightSource s) {
  switch (s) {
    case WeightSource::propensity_odds: return "propensity_odds";
    case WeightSource::kliep: return "kliep";
    case WeightSource::true_mechanism: return "true_mechanism";
    case WeightSource::unit: return "unit";
  }
  return "unit";
}

// Propensities are clamped to [lo, hi] before forming odds.
struct TruncInterval {
  double lo = 0.05;
  double hi = 0.95;

  void validate() const {
    if (!(lo > 0.0 && lo < hi && hi < 1.0))
      throw ValidationError("truncation interval must satisfy 0 < lo < hi < 1");
  }
  double min_odds() const { return lo / (1.0 - lo); }
  double max_odds() const { return hi / (1.0 - hi); }
};

// Importance weights over source rows, normalized to sum to n.
struct WeightVector {
  std::vector<double> values;
  TruncInterval trunc;
  WeightSource source = WeightSource::unit;
  // Number of propensities that hit a truncation bound.
  std::size_t trunc_hits = 0;

  std::size_t size() const { return values.size(); }
};

inline std::vector<double> odds_from_propensity(std::span<const double> p,
                                                const TruncInterval& trunc,
                                                std::size_t* hits = nullptr) {
  trunc.validate();
  std::vector<double> odds(p.size());
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0))
      throw ValidationError("propensity outside [0, 1] at row " + std::to_string(i));
    const double q = std::clamp(p[i], trunc.lo, trunc.hi);
    if (q != p[i]) ++clamped;
    odds[i] = q / (1.0 - q);
  }
  if (hits) *hits = clamped;
  return odds;
}

// Rescales non-negative raw weights to sum to their count.
inline WeightVector normalize_weights(std::span<const double> raw,
                                      WeightSource source = WeightSource::unit,
                                      TruncInterval trunc = {}) {
  if (raw.empty()) throw ValidationError("cannot normalize an empty weight vector");
  double sum = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError("raw weights must be finite and non-negative");
    sum += v;
  }
  if (!(sum > 0.0)) throw DegenerateError("degenerate weighting: all raw weights are zero");
  const double n = static_cast<double>(raw.size());
  WeightVector out;
  out.values.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out.values[i] = n * raw[i] / sum;
  out.source = source;
  out.trunc = trunc;
  return out;
}

inline WeightVector unit_weights(std::size_t n) {
  WeightVector out;
  out.values.assign(n, 1.0);
  return out;
}

// Odds of truncated propensities, normalized.
inline WeightVector propensity_weights(std::span<const double> p, const TruncInterval& trunc) {
  std::size_t hits = 0;
  const auto odds = odds_from_propensity(p, trunc, &hits);
  auto w = normalize_weights(odds, WeightSource::propensity_odds, trunc);
  w.trunc_hits = hits;
  return w;
}

// Selection mechanisms with a known target-membership logit z(score).
enum class Mechanism { restricted, shifted, uniform, bias_demo_logit };

inline const char* to_string(Mechanism m) {
  switch (m) {
    case Mechanism::restricted: return "restricted";
    case Mechanism::shifted: return "shifted";
    case Mechanism::uniform: return "uniform";
    case Mechanism::bias_demo_logit: return "bias_demo_logit";
  }
  return "uniform";
}

inline Mechanism mechanism_from_string(std::string_view s) {
  if (s == "restricted") return Mechanism::restricted;
  if (s == "shifted") return Mechanism::shifted;
  if (s == "uniform" || s == "none") return Mechanism::uniform;
  if (s == "bias_demo_logit") return Mechanism::bias_demo_logit;
  throw ValidationError("unknown selection mechanism '" + std::string(s) + "'");
}

// restricted: z = 2 - |score - mean|; shifted: z = score - mean; uniform: 0;
// bias_demo_logit: z = 2 * score.
inline double mechanism_logit(Mechanism m, double score, double score_mean) {
  switch (m) {
    case Mechanism::restricted: return 2.0 - std::abs(score - score_mean);
    case Mechanism::shifted: return score - score_mean;
    case Mechanism::uniform: return 0.0;
    case Mechanism::bias_demo_logit: return 2.0 * score;
  }
  return 0.0;
}

// Weights from the known selection mechanism. Since p = sigmoid(z), the odds
// are e^z; clamping z to [logit(lo), logit(hi)] is the same truncation as
// clamping p.
inline WeightVector true_weights(std::span<const double> score, Mechanism mechanism,
                                 double score_mean, const TruncInterval& trunc = {}) {
  trunc.validate();
  const double zlo = logit(trunc.lo);
  const double zhi = logit(trunc.hi);
  std::vector<double> odds(score.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    const double z = mechanism_logit(mechanism, score[i], score_mean);
    const double zc = std::clamp(z, zlo, zhi);
    if (zc != z) ++hits;
    odds[i] = std::exp(zc);
  }
  auto w = normalize_weights(odds, WeightSource::true_mechanism, trunc);
  w.trunc_hits = hits;
  return w;
}

// Kish effective sample size (sum w)^2 / sum w^2.
inline double effective_sample_size(std::span<const double> w) {
  double s = 0.0, s2 = 0.0;
  for (double v : w) {
    s += v;
    s2 += v * v;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

inline double effective_sample_size(const WeightVector& w) {
  return effective_sample_size(std::span<const double>(w.values));
}

// ---------------------------------------------------------------------------
// KLIEP: direct density-ratio estimation with a Gaussian kernel model
// w(x) = sum_l alpha_l K(x, c_l), centers drawn from the target sample.

struct KliepParams {
  std::size_t max_centers = 100;
  // Target rows used for fitting alpha; a seeded subsample when exceeded.
  std::size_t max_target_rows = 2000;
  int folds = 5;
  // Bandwidth grid as multiples of the median pairwise center distance.
  std::vector<double> bandwidth_multipliers{0.25, 0.5, 1.0, 2.0, 4.0};
  int max_iterations_per_step = 100;
  double constraint_tolerance = 1e-6;
  bool standardize = true;
  std::uint64_t seed = 0;
};

struct KliepFit {
  double sigma = 0.0;
  std::vector<double> alpha;
  Eigen::MatrixXd centers;  // standardized coordinates
  // Estimated ratio at each source row before normalization.
  std::vector<double> source_ratio;
  // |mean source ratio - 1|
  double constraint_residual = 0.0;
  double cv_score = 0.0;
  std::vector<double> grid_scores;
};

namespace detail {

inline Eigen::MatrixXd to_matrix(const Dataset& d, const std::vector<std::string>& names) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(d.rows()),
                    static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto& c = d.columns[d.index_of(names[j])];
    for (std::size_t i = 0; i < c.size(); ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c[i];
  }
  return m;
}

inline Eigen::MatrixXd gaussian_kernel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c,
                                       double sigma) {
  const Eigen::VectorXd xn = x.rowwise().squaredNorm();
  const Eigen::VectorXd cn = c.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * x * c.transpose()).colwise() + xn;
  d2.rowwise() += cn.transpose();
  const double scale = -1.0 / (2.0 * sigma * sigma);
  return (d2.cwiseMax(0.0) * scale).array().exp().matrix();
}

inline double mean_log(const Eigen::VectorXd& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::log(std::max(v[i], 1e-300));
  return s / static_cast<double>(v.size());
}

// Projects alpha onto {alpha >= 0, b'alpha = 1}; false when the projection
// collapses to zero.
inline bool project_alpha(Eigen::VectorXd& alpha, const Eigen::VectorXd& b, double bb) {
  alpha += ((1.0 - b.dot(alpha)) / bb) * b;
  alpha = alpha.cwiseMax(0.0);
  const double s = b.dot(alpha);
  if (!(s > 0.0)) return false;
  alpha /= s;
  return true;
}

// Projected gradient ascent on mean log(A alpha) with a decreasing step
// schedule; each step size runs until the objective stops improving.
inline Eigen::VectorXd kliep_optimize(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                      int max_iterations) {
  const double bb = b.squaredNorm();
  Eigen::VectorXd alpha = Eigen::VectorXd::Ones(b.size());
  if (!(bb > 0.0) || !project_alpha(alpha, b, bb))
    throw DegenerateError("KLIEP: source kernel means vanish; bandwidth too small");
  double score = mean_log(a * alpha);
  for (double eps : {1e3, 1e2, 1e1, 1.0, 1e-1, 1e-2, 1e-3}) {
    for (int it = 0; it < max_iterations; ++it) {
      const Eigen::VectorXd fitted = a * alpha;
      Eigen::VectorXd next = alpha + eps * (a.transpose() * fitted.cwiseMax(1e-300).cwiseInverse());
      if (!project_alpha(next, b, bb)) break;
      const double s = mean_log(a * next);
      if (!(s > score)) break;
      score = s;
      alpha = std::move(next);
    }
  }
  return alpha;
}

inline double median_pairwise_distance(const Eigen::MatrixXd& c) {
  std::vector<double> dist;
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = i + 1; j < c.rows(); ++j) dist.push_back((c.row(i) - c.row(j)).norm());
  if (dist.empty()) return 1.0;
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  return *mid > 0.0 ? *mid : 1.0;
}

}  // namespace detail

// Fits KLIEP on the shared feature columns of z_source and z_target. The
// bandwidth is picked from the grid by K-fold likelihood cross-validation
// over target rows.
inline KliepFit fit_kliep(const Dataset& z_source, const Dataset& z_target,
                          const KliepParams& params) {
  if (z_source.rows() == 0 || z_target.rows() == 0)
    throw ValidationError("KLIEP needs non-empty source and target samples");
  if (z_source.features() == 0) throw ValidationError("KLIEP needs at least one feature");
  std::vector<std::string> names;
  for (const auto& c : z_source.schema) names.push_back(c.name);
  Eigen::MatrixXd xs = detail::to_matrix(z_source, names);
  Eigen::MatrixXd xt = detail::to_matrix(z_target, names);

  if (params.standardize) {
    const auto n_all = static_cast<double>(xs.rows() + xt.rows());
    for (Eigen::Index j = 0; j < xs.cols(); ++j) {
      const double mean = (xs.col(j).sum() + xt.col(j).sum()) / n_all;
      const double var = ((xs.col(j).array() - mean).square().sum() +
                          (xt.col(j).array() - mean).square().sum()) / n_all;
      const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
      xs.col(j) = (xs.col(j).array() - mean) / sd;
      xt.col(j) = (xt.col(j).array() - mean) / sd;
    }
  }

  Rng rng(params.seed);
  std::vector<Eigen::Index> target_idx(static_cast<std::size_t>(xt.rows()));
  std::iota(target_idx.begin(), target_idx.end(), Eigen::Index{0});
  std::shuffle(target_idx.begin(), target_idx.end(), rng);
  const auto n_centers = std::min<std::size_t>(params.max_centers, target_idx.size());
  if (n_centers == 0) throw ValidationError("KLIEP needs at least one center");
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(n_centers), xt.cols());
  for (std::size_t l = 0; l < n_centers; ++l)
    centers.row(static_cast<Eigen::Index>(l)) = xt.row(target_idx[l]);

  // Fitting sample of target rows (a fresh shuffle, independent of centers).
  std::shuffle(target_idx.begin(), target_idx.end(), rng);
  if (params.max_target_rows > 0 && target_idx.size() > params.max_target_rows)
    target_idx.resize(params.max_target_rows);
  Eigen::MatrixXd xfit(static_cast<Eigen::Index>(target_idx.size()), xt.cols());
  for (std::size_t i = 0; i < target_idx.size(); ++i)
    xfit.row(static_cast<Eigen::Index>(i)) = xt.row(target_idx[i]);

  const double base = detail::median_pairwise_distance(centers);
  const auto folds = static_cast<std::size_t>(
      std::clamp<std::ptrdiff_t>(params.folds, 1, static_cast<std::ptrdiff_t>(xfit.rows())));
  std::vector<std::size_t> fold_of(static_cast<std::size_t>(xfit.rows()));
  for (std::size_t i = 0; i < fold_of.size(); ++i) fold_of[i] = i % folds;

  KliepFit fit;
  double best_score = -std::numeric_limits<double>::infinity();
  for (double mult : params.bandwidth_multipliers) {
    const double sigma = base * mult;
    const Eigen::MatrixXd ks = detail::gaussian_kernel(xs, centers, sigma);
    const Eigen::VectorXd b = ks.colwise().mean().transpose();
    const Eigen::MatrixXd kt = detail::gaussian_kernel(xfit, centers, sigma);
    double score = 0.0;
    try {
      if (folds < 2) {
        score = detail::mean_log(kt * detail::kliep_optimize(kt, b, params.max_iterations_per_step));
      } else {
        for (std::size_t f = 0; f < folds; ++f) {
          std::vector<Eigen::Index> tr, te;
          for (std::size_t i = 0; i < fold_of.size(); ++i)
            (fold_of[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
          const Eigen::MatrixXd a_tr = kt(tr, Eigen::all);
          const Eigen::MatrixXd a_te = kt(te, Eigen::all);
          const auto alpha = detail::kliep_optimize(a_tr, b, params.max_iterations_per_step);
          score += detail::mean_log(a_te * alpha) / static_cast<double>(folds);
        }
      }
    } catch (const DegenerateError&) {
      score = -std::numeric_limits<double>::infinity();
    }
    fit.grid_scores.push_back(score);
    if (score > best_score) {
      best_score = score;
      fit.sigma = sigma;
    }
  }
  if (!(fit.sigma > 0.0))
    throw DegenerateError("KLIEP: no bandwidth produced a usable fit");

  const Eigen::MatrixXd ks = detail::gaussian_kernel(xs, centers, fit.sigma);
  const Eigen::VectorXd b = ks.colwise().mean().transpose();
  const Eigen::MatrixXd kt = detail::gaussian_kernel(xfit, centers, fit.sigma);
  const Eigen::VectorXd alpha = detail::kliep_optimize(kt, b, params.max_iterations_per_step);
  const Eigen::VectorXd ratio = ks * alpha;

  fit.cv_score = best_score;
  fit.centers = centers;
  fit.alpha.assign(alpha.data(), alpha.data() + alpha.size());
  fit.source_ratio.assign(ratio.data(), ratio.data() + ratio.size());
  fit.constraint_residual = std::abs(ratio.mean() - 1.0);
  if (!(fit.constraint_residual <= params.constraint_tolerance)) {
    throw DegenerateError("KLIEP: source-mean constraint violated (|mean - 1| = " +
                          std::to_string(fit.constraint_residual) + ", sigma = " +
                          std::to_string(fit.sigma) + ")");
  }
  return fit;
}

inline WeightVector kliep_weights(const Dataset& z_source, const Dataset& z_target,
                                  const KliepParams& params = {}) {
  const auto fit = fit_kliep(z_source, z_target, params);
  return normalize_weights(fit.source_ratio, WeightSource::kliep);
}

}  // namespace dacart
