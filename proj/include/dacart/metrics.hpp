#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "dacart/data.hpp"
#include "dacart/error.hpp"

namespace dacart {

inline double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw ValidationError("rmse: prediction and truth lengths differ");
  if (pred.empty()) throw ValidationError("rmse: empty input");
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

inline double mse(std::span<const double> pred, std::span<const double> truth) {
  const double r = rmse(pred, truth);
  return r * r;
}

// Mann-Whitney AUC with tied scores counted as one half.
inline double auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc: length mismatch");
  std::vector<std::size_t> ord(scores.size());
  std::iota(ord.begin(), ord.end(), std::size_t{0});
  std::sort(ord.begin(), ord.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < ord.size();) {
    std::size_t j = i;
    while (j < ord.size() && scores[ord[j]] == scores[ord[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      const double l = labels[ord[k]];
      if (l == 1.0) {
        pos += 1.0;
        rank_sum += mid_rank;
      } else if (l == 0.0) {
        neg += 1.0;
      } else {
        throw ValidationError("auc: labels must be 0 or 1");
      }
    }
    i = j;
  }
  if (pos == 0.0 || neg == 0.0) throw ValidationError("auc: both classes must be present");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Asymptotic Kolmogorov survival function Q(lambda).
inline double kolmogorov_survival(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  return {d, kolmogorov_survival(std::sqrt(ne) * d)};
}

// Critical value c(alpha) * sqrt((n + m) / (n m)) of the two-sample KS test.
inline double ks_critical_value(double c_alpha, std::size_t n, std::size_t m) {
  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  return c_alpha * std::sqrt((dn + dm) / (dn * dm));
}

// Ordinary least squares with intercept; coefficient 0 is the intercept.
struct OlsFit {
  std::vector<double> coefficients;

  std::vector<double> predict(const Dataset& d) const {
    std::vector<double> out(d.rows(), coefficients.at(0));
    for (std::size_t j = 0; j < d.features(); ++j)
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += coefficients.at(j + 1) * d.columns[j][i];
    return out;
  }
};

// Solves the normal equations X'X b = X'y.
inline OlsFit ols_fit(const Dataset& d) {
  const auto y = d.y();
  const auto n = static_cast<Eigen::Index>(d.rows());
  const auto p = static_cast<Eigen::Index>(d.features()) + 1;
  Eigen::MatrixXd x(n, p);
  x.col(0).setOnes();
  for (Eigen::Index j = 1; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      x(i, j) = d.columns[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(i)];
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::VectorXd xty = x.transpose() * yv;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  const Eigen::VectorXd diag = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !(diag.minCoeff() > 1e-12 * diag.cwiseAbs().maxCoeff()))
    throw DegenerateError("OLS: singular normal equations");
  const Eigen::VectorXd beta = ldlt.solve(xty);
  return {std::vector<double>(beta.data(), beta.data() + beta.size())};
}

// Type-7 sample quantile (linear interpolation between order statistics).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

}  // namespace dacart
