#pragma once

// Linear models used by the selector: ridge regression for runtimes,
// L2-penalized logistic regression for satisfiability, backward feature
// elimination driven by standardized coefficients and AIC, collinearity
// pruning, and k-fold splitting.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lmpick/error.hpp"

namespace lmpick::ml {

using Mask = std::vector<int>;  // selected column indices, ascending

struct DesignMatrix {
  Eigen::MatrixXd X;  // n x p
  Eigen::VectorXd y;  // targets, or labels in {0,1}
  std::vector<std::string> feature_names;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }

  void validate() const {
    if (y.size() != X.rows()) throw Error("design matrix: target length does not match row count");
    if (!feature_names.empty() && feature_names.size() != cols()) {
      throw Error("design matrix: feature name count does not match column count");
    }
    if (!X.allFinite() || !y.allFinite()) throw Error("design matrix contains non-finite entries");
  }
};

inline Mask all_columns(std::size_t p) {
  Mask m(p);
  std::iota(m.begin(), m.end(), 0);
  return m;
}

// Columns whose training-split standard deviation is (numerically) zero.
inline bool is_constant_column(const Eigen::VectorXd& col) {
  if (col.size() == 0) return true;
  double mean = col.mean();
  double sd = std::sqrt((col.array() - mean).square().mean());
  return !(sd > 1e-12 * std::max(1.0, std::fabs(mean)));
}

inline Mask non_constant(const DesignMatrix& d, const Mask& mask) {
  Mask out;
  for (int j : mask) {
    if (!is_constant_column(d.X.col(j))) out.push_back(j);
  }
  return out;
}

struct ScalingParams {
  Eigen::VectorXd mean;  // per selected feature
  Eigen::VectorXd sd;
  double y_mean = 0.0;
  double y_sd = 1.0;
};

struct FitOptions {
  bool standardize = true;  // z-score the selected features
  bool intercept = true;    // unpenalized intercept
  bool standardize_target = true;
};

namespace detail {

inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const Mask& mask) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(mask.size()));
  for (std::size_t j = 0; j < mask.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(mask[j]);
  return out;
}

inline ScalingParams feature_scaling(const Eigen::MatrixXd& Xs, bool standardize) {
  ScalingParams s;
  auto p = Xs.cols();
  s.mean = Eigen::VectorXd::Zero(p);
  s.sd = Eigen::VectorXd::Ones(p);
  if (!standardize) return s;
  for (Eigen::Index j = 0; j < p; ++j) {
    double m = Xs.col(j).mean();
    double sd = std::sqrt((Xs.col(j).array() - m).square().mean());
    s.mean(j) = m;
    s.sd(j) = sd > 0 ? sd : 1.0;
  }
  return s;
}

// Design with optional leading column of ones, features scaled by `s`.
inline Eigen::MatrixXd design(const Eigen::MatrixXd& Xs, const ScalingParams& s, bool intercept) {
  Eigen::Index off = intercept ? 1 : 0;
  Eigen::MatrixXd Z(Xs.rows(), Xs.cols() + off);
  if (intercept) Z.col(0).setOnes();
  for (Eigen::Index j = 0; j < Xs.cols(); ++j) {
    Z.col(j + off) = (Xs.col(j).array() - s.mean(j)) / s.sd(j);
  }
  return Z;
}

inline double log1p_exp(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

inline double sigmoid(double s) {
  constexpr double kHi = 1.0 - 0x1p-53;
  constexpr double kLo = 0x1p-1000;
  double p = s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
  return std::clamp(p, kLo, kHi);
}

inline double linear_in_features(const Eigen::VectorXd& w, const ScalingParams& s, const Mask& mask,
                                 bool intercept, std::span<const double> x) {
  double acc = intercept ? w(0) : 0.0;
  Eigen::Index off = intercept ? 1 : 0;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    auto jj = static_cast<Eigen::Index>(j);
    acc += w(jj + off) * (x[mask[j]] - s.mean(jj)) / s.sd(jj);
  }
  return acc;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ridge regression

struct RidgeModel {
  Eigen::VectorXd weights;  // intercept first (0 without intercept), fitted space
  double lambda = 0.0;
  ScalingParams scaling;
  Mask selected;
  bool intercept = true;

  // Linear prediction in target units, no clamping.
  double score(std::span<const double> x) const {
    return scaling.y_mean + scaling.y_sd * detail::linear_in_features(weights, scaling, selected, true, x);
  }

  // Coefficients in the original units of features and target.
  Eigen::VectorXd raw_coefficients() const {
    const Eigen::VectorXd& w = weights;
    Eigen::VectorXd raw(w.size());
    double b = w(0);
    for (std::size_t j = 0; j < selected.size(); ++j) {
      auto jj = static_cast<Eigen::Index>(j);
      raw(jj + 1) = scaling.y_sd * w(jj + 1) / scaling.sd(jj);
      b -= w(jj + 1) * scaling.mean(jj) / scaling.sd(jj);
    }
    raw(0) = scaling.y_mean + scaling.y_sd * b;
    return raw;
  }

  // |w_j| per selected feature in standardized units.
  std::vector<double> standardized_coefficients() const {
    std::vector<double> out;
    for (std::size_t j = 0; j < selected.size(); ++j) out.push_back(std::fabs(weights(static_cast<Eigen::Index>(j) + 1)));
    return out;
  }
};

namespace detail {

struct RidgeSystem {
  Eigen::MatrixXd Z;
  Eigen::VectorXd t;
  ScalingParams scaling;
  Mask mask;
  bool intercept;
};

inline RidgeSystem ridge_system(const DesignMatrix& d, const Mask& requested, const FitOptions& opt) {
  RidgeSystem sys;
  sys.mask = opt.standardize ? non_constant(d, requested) : requested;
  sys.intercept = opt.intercept;
  Eigen::MatrixXd Xs = select_columns(d.X, sys.mask);
  sys.scaling = feature_scaling(Xs, opt.standardize);
  sys.Z = design(Xs, sys.scaling, opt.intercept);
  sys.t = d.y;
  if (opt.standardize_target && opt.standardize) {
    double m = d.y.mean();
    double sd = std::sqrt((d.y.array() - m).square().mean());
    sys.scaling.y_mean = m;
    sys.scaling.y_sd = sd > 0 ? sd : 1.0;
    sys.t = (d.y.array() - m) / sys.scaling.y_sd;
  }
  return sys;
}

inline Eigen::MatrixXd penalty(Eigen::Index dim, double lambda, bool intercept) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(dim, dim) * lambda;
  if (intercept && dim > 0) P(0, 0) = 0.0;
  return P;
}

// Solves (Z'Z + P) w = Z't by Cholesky.
inline Eigen::VectorXd ridge_solve(const RidgeSystem& sys, double lambda) {
  Eigen::MatrixXd A = sys.Z.transpose() * sys.Z + penalty(sys.Z.cols(), lambda, sys.intercept);
  Eigen::VectorXd b = sys.Z.transpose() * sys.t;
  if (A.rows() == 0) return Eigen::VectorXd();
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  bool singular = llt.info() != Eigen::Success;
  if (!singular) {
    Eigen::VectorXd diagL = llt.matrixL().toDenseMatrix().diagonal();
    double scale = A.diagonal().cwiseAbs().maxCoeff();
    singular = diagL.array().square().minCoeff() <= 1e-13 * std::max(scale, 1e-300);
  }
  if (singular) {
    throw Error(lambda == 0.0 ? "singular normal equations; use a ridge penalty lambda > 0"
                              : "ridge system is not positive definite");
  }
  return llt.solve(b);
}

}  // namespace detail

inline RidgeModel fit_ridge(const DesignMatrix& d, double lambda, const Mask& mask,
                            const FitOptions& opt = {}) {
  d.validate();
  if (lambda < 0) throw Error("ridge penalty must be >= 0");
  detail::RidgeSystem sys = detail::ridge_system(d, mask, opt);
  Eigen::VectorXd w = detail::ridge_solve(sys, lambda);
  RidgeModel m;
  m.lambda = lambda;
  m.scaling = sys.scaling;
  m.selected = sys.mask;
  m.intercept = opt.intercept;
  m.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.mask.size()) + 1);
  if (opt.intercept) m.weights = w;
  else m.weights.tail(w.size()) = w;
  return m;
}

inline RidgeModel fit_ridge(const DesignMatrix& d, double lambda, const FitOptions& opt = {}) {
  return fit_ridge(d, lambda, all_columns(d.cols()), opt);
}

// Runtime prediction, clamped below at zero.
inline double predict_ridge(const RidgeModel& m, std::span<const double> x) {
  return std::max(0.0, m.score(x));
}

inline double residual_sum_of_squares(const RidgeModel& m, const DesignMatrix& d) {
  double rss = 0.0;
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    Eigen::VectorXd row = d.X.row(i).transpose();
    double r = d.y(i) - m.score(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    rss += r * r;
  }
  return rss;
}

inline std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int e = -6; e <= 2; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

// Generalized cross-validation: n * RSS / (n - df)^2 with df the trace of
// the hat matrix. Returns the grid value with the smallest score (first on
// ties).
inline double choose_lambda_gcv(const DesignMatrix& d, const Mask& mask,
                                const std::vector<double>& grid = default_lambda_grid(),
                                const FitOptions& opt = {}) {
  d.validate();
  detail::RidgeSystem sys = detail::ridge_system(d, mask, opt);
  double n = static_cast<double>(d.rows());
  Eigen::MatrixXd G = sys.Z.transpose() * sys.Z;
  double best = grid.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    Eigen::MatrixXd A = G + detail::penalty(G.rows(), lambda, sys.intercept);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success) continue;
    Eigen::VectorXd w = ldlt.solve(sys.Z.transpose() * sys.t);
    double rss = (sys.t - sys.Z * w).squaredNorm();
    double df = ldlt.solve(G).trace();
    double denom = n - df;
    if (!(denom > 1e-9) || !std::isfinite(rss)) continue;
    double score = n * rss / (denom * denom);
    if (score < best_score) {
      best_score = score;
      best = lambda;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Logistic regression

inline constexpr double kLogisticPenalty = 1e-4;

struct LogisticModel {
  Eigen::VectorXd weights;  // intercept first, standardized space
  ScalingParams scaling;
  Mask selected;
  double penalty = kLogisticPenalty;
  bool converged = true;
  int iterations = 0;

  double score(std::span<const double> x) const {
    return detail::linear_in_features(weights, scaling, selected, true, x);
  }
  std::vector<double> standardized_coefficients() const {
    std::vector<double> out;
    for (std::size_t j = 0; j < selected.size(); ++j) out.push_back(std::fabs(weights(static_cast<Eigen::Index>(j) + 1)));
    return out;
  }
};

// Penalized log-likelihood sum[y s - log(1+e^s)] - alpha/2 |w_-0|^2 for a
// design Z whose first column is the intercept.
inline double logistic_objective(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& w, double alpha) {
  Eigen::VectorXd s = Z * w;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) ll += y(i) * s(i) - detail::log1p_exp(s(i));
  return ll - 0.5 * alpha * w.tail(w.size() - 1).squaredNorm();
}

inline Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& w, double alpha) {
  Eigen::VectorXd s = Z * w;
  Eigen::VectorXd r(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) r(i) = y(i) - detail::sigmoid(s(i));
  Eigen::VectorXd g = Z.transpose() * r;
  g.tail(g.size() - 1) -= alpha * w.tail(w.size() - 1);
  return g;
}

// Iteratively reweighted least squares (damped Newton) on the penalized
// likelihood. Stops when the gradient's max-norm drops below 1e-8 or after
// 100 iterations; in the latter case `converged` is false.
inline LogisticModel fit_logistic(const DesignMatrix& d, const Mask& mask,
                                  double alpha = kLogisticPenalty) {
  d.validate();
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    if (d.y(i) != 0.0 && d.y(i) != 1.0) throw Error("logistic labels must be 0 or 1");
  }
  LogisticModel m;
  m.penalty = alpha;
  m.selected = non_constant(d, mask);
  Eigen::MatrixXd Xs = detail::select_columns(d.X, m.selected);
  m.scaling = detail::feature_scaling(Xs, true);
  Eigen::MatrixXd Z = detail::design(Xs, m.scaling, true);
  const Eigen::VectorXd& y = d.y;
  Eigen::Index p = Z.cols();

  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  double obj = logistic_objective(Z, y, w, alpha);
  m.converged = false;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd g = logistic_gradient(Z, y, w, alpha);
    m.iterations = it;
    if (g.lpNorm<Eigen::Infinity>() < 1e-8) {
      m.converged = true;
      break;
    }
    Eigen::VectorXd s = Z * w;
    Eigen::VectorXd wt(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      double pi = detail::sigmoid(s(i));
      wt(i) = pi * (1.0 - pi);
    }
    Eigen::MatrixXd H = Z.transpose() * wt.asDiagonal() * Z;
    H.diagonal().array() += alpha;
    H(0, 0) += 1e-10 - alpha;
    Eigen::VectorXd step = H.ldlt().solve(g);
    double t = 1.0;
    Eigen::VectorXd cand = w + step;
    double cand_obj = logistic_objective(Z, y, cand, alpha);
    while (!(cand_obj >= obj) && t > 1e-12) {
      t *= 0.5;
      cand = w + t * step;
      cand_obj = logistic_objective(Z, y, cand, alpha);
    }
    if (!(cand_obj >= obj)) break;  // no ascent possible
    w = cand;
    obj = cand_obj;
    m.iterations = it + 1;
  }
  if (!m.converged && logistic_gradient(Z, y, w, alpha).lpNorm<Eigen::Infinity>() < 1e-8) {
    m.converged = true;
  }
  m.weights = w;
  return m;
}

inline LogisticModel fit_logistic(const DesignMatrix& d, double alpha = kLogisticPenalty) {
  return fit_logistic(d, all_columns(d.cols()), alpha);
}

inline double predict_proba(const LogisticModel& m, std::span<const double> x) {
  return detail::sigmoid(m.score(x));
}

// Unpenalized log-likelihood of the labels under the model.
inline double log_likelihood(const LogisticModel& m, const DesignMatrix& d) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    Eigen::VectorXd row = d.X.row(i).transpose();
    double s = m.score(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    ll += d.y(i) * s - detail::log1p_exp(s);
  }
  return ll;
}

// ---------------------------------------------------------------------------
// AIC

// n ln(RSS/n) + 2(k+1); a perfect fit scores -infinity.
inline double aic_linear(double rss, std::size_t n, std::size_t k) {
  if (rss <= 0.0) return -std::numeric_limits<double>::infinity();
  double nn = static_cast<double>(n);
  return nn * std::log(rss / nn) + 2.0 * (static_cast<double>(k) + 1.0);
}

inline double aic_logistic(double log_lik, std::size_t k) {
  return -2.0 * log_lik + 2.0 * (static_cast<double>(k) + 1.0);
}

inline double aic(const RidgeModel& m, const DesignMatrix& d) {
  return aic_linear(residual_sum_of_squares(m, d), d.rows(), m.selected.size());
}

inline double aic(const LogisticModel& m, const DesignMatrix& d) {
  return aic_logistic(log_likelihood(m, d), m.selected.size());
}

// ---------------------------------------------------------------------------
// Feature selection

enum class ModelKind { Ridge, Logistic };

struct SelectionOptions {
  double ridge_lambda = 1e-2;
  double collinearity_threshold = 0.95;
};

namespace detail {

struct CandidateFit {
  Mask selected;
  std::vector<double> std_coef;
  double aic;
};

inline CandidateFit fit_candidate(const DesignMatrix& d, const Mask& mask, ModelKind kind,
                                  const SelectionOptions& opt) {
  if (kind == ModelKind::Ridge) {
    RidgeModel m = fit_ridge(d, opt.ridge_lambda, mask);
    return {m.selected, m.standardized_coefficients(), aic(m, d)};
  }
  LogisticModel m = fit_logistic(d, mask);
  return {m.selected, m.standardized_coefficients(), aic(m, d)};
}

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::ArrayXd da = a.array() - a.mean();
  Eigen::ArrayXd db = b.array() - b.mean();
  double den = std::sqrt(da.square().sum() * db.square().sum());
  return den > 0 ? (da * db).sum() / den : 0.0;
}

}  // namespace detail

// Backward elimination: repeatedly drop the feature with the smallest
// standardized coefficient while AIC does not increase. Constant columns
// are removed up front; the last feature is never removed.
inline Mask backward_eliminate(const DesignMatrix& d, const Mask& start, ModelKind kind,
                               const SelectionOptions& opt = {}) {
  Mask mask = non_constant(d, start);
  if (mask.size() < 2) return mask;
  detail::CandidateFit cur = detail::fit_candidate(d, mask, kind, opt);
  while (cur.selected.size() > 1) {
    auto smallest = std::min_element(cur.std_coef.begin(), cur.std_coef.end());
    Mask trial = cur.selected;
    trial.erase(trial.begin() + (smallest - cur.std_coef.begin()));
    detail::CandidateFit next = detail::fit_candidate(d, trial, kind, opt);
    if (!(next.aic <= cur.aic)) break;
    cur = std::move(next);
  }
  return cur.selected;
}

// Among pairs with |Pearson r| above the threshold, drop the member with the
// smaller standardized coefficient (highest-correlation pair first) until no
// such pair remains.
inline Mask prune_collinear(const DesignMatrix& d, Mask mask, ModelKind kind,
                            const SelectionOptions& opt = {}) {
  while (mask.size() > 1) {
    double best_r = opt.collinearity_threshold;
    int bi = -1, bj = -1;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      for (std::size_t j = i + 1; j < mask.size(); ++j) {
        double r = std::fabs(detail::pearson(d.X.col(mask[i]), d.X.col(mask[j])));
        if (r > best_r) {
          best_r = r;
          bi = static_cast<int>(i);
          bj = static_cast<int>(j);
        }
      }
    }
    if (bi < 0) break;
    detail::CandidateFit fit = detail::fit_candidate(d, mask, kind, opt);
    if (fit.selected != mask) {
      mask = fit.selected;  // constant columns fell out
      continue;
    }
    int drop = fit.std_coef[bj] < fit.std_coef[bi] ? bj : bi;
    mask.erase(mask.begin() + drop);
  }
  return mask;
}

inline Mask select_features(const DesignMatrix& d, ModelKind kind, const SelectionOptions& opt = {}) {
  d.validate();
  Mask start = all_columns(d.cols());
  if (start.size() < 2) return start;
  Mask m = backward_eliminate(d, start, kind, opt);
  return prune_collinear(d, std::move(m), kind, opt);
}

// ---------------------------------------------------------------------------
// Cross-validation splits

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Shuffles 0..n-1 with `seed`, then cuts k contiguous folds; the first n % k
// folds get one extra instance.
inline std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error("k-fold needs k >= 2");
  if (n < k) throw Error("k-fold needs at least k instances (" + std::to_string(n) + " < " + std::to_string(k) + ")");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Fold> folds(k);
  std::size_t base = n / k, extra = n % k, pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t len = base + (f < extra ? 1 : 0);
    folds[f].test.assign(order.begin() + pos, order.begin() + pos + len);
    pos += len;
  }
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), folds[g].test.begin(), folds[g].test.end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
    std::sort(folds[f].test.begin(), folds[f].test.end());
  }
  return folds;
}

}  // namespace lmpick::ml
