#include "tghf/sblue.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "tghf/error.hpp"

namespace tghf {

namespace {

// VIF_k = [R^{-1}]_kk over the correlation matrix of the non-constant
// columns; (near-)constant columns (intercepts) are defined to 1.
std::vector<double> design_vif(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows(), k = x.cols();
  std::vector<double> vif(static_cast<std::size_t>(k), 1.0);
  std::vector<Eigen::Index> varying;
  Eigen::MatrixXd centered(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    centered.col(j) = x.col(j).array() - x.col(j).mean();
    const double sd = centered.col(j).norm();
    if (sd > 1e-14 * (1.0 + x.col(j).cwiseAbs().maxCoeff())) varying.push_back(j);
  }
  if (varying.size() < 2) return vif;

  const auto kv = static_cast<Eigen::Index>(varying.size());
  Eigen::MatrixXd r(kv, kv);
  for (Eigen::Index a = 0; a < kv; ++a)
    for (Eigen::Index b = 0; b < kv; ++b)
      r(a, b) = centered.col(varying[static_cast<std::size_t>(a)])
                    .dot(centered.col(varying[static_cast<std::size_t>(b)])) /
                (centered.col(varying[static_cast<std::size_t>(a)]).norm() *
                 centered.col(varying[static_cast<std::size_t>(b)]).norm());
  const Eigen::MatrixXd rinv = r.inverse();
  for (Eigen::Index a = 0; a < kv; ++a)
    vif[static_cast<std::size_t>(varying[static_cast<std::size_t>(a)])] = rinv(a, a);
  return vif;
}

}  // namespace

SblueModel gls_fit(const SiteSet& sites, const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                   const ExpKernelParams& kernel, const EigenBasis* basis) {
  kernel.validate();
  const auto n = static_cast<Eigen::Index>(sites.size());
  const Eigen::Index k = X.cols();
  require(k >= 1, errc::input, "gls_fit: design matrix needs at least one column");
  require(X.rows() == n, errc::input, "gls_fit: design rows must match site count");
  require(Y.size() == n, errc::input, "gls_fit: observation length must match site count");
  require(n > k, errc::input, "gls_fit: need more observations than coefficients");
  require(X.allFinite(), errc::input, "gls_fit: non-finite design entry");
  require(Y.allFinite(), errc::input, "gls_fit: non-finite observation");

  // Rank screen before any covariance work so collinear designs fail with
  // the offending columns named.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    std::ostringstream msg;
    msg << "gls_fit: design matrix rank deficient, dependent columns:";
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index i = qr.rank(); i < k; ++i) msg << " " << perm[i];
    fail(errc::fit, msg.str());
  }

  SblueModel model;
  model.sites = sites;
  model.X = X;
  model.kernel = kernel;
  if (basis != nullptr) model.basis = *basis;

  // C^{-1} applied to [X | Y], factored once; the same operator later turns
  // the residuals into prediction weights.
  Eigen::MatrixXd rhs(n, k + 1);
  rhs.leftCols(k) = X;
  rhs.col(k) = Y;
  Eigen::LLT<Eigen::MatrixXd> llt;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> apply_cinv;
  if (basis == nullptr) {
    llt.compute(cov_matrix(sites, kernel));
    require(llt.info() == Eigen::Success, errc::decomposition,
            "gls_fit: covariance factorization failed");
    apply_cinv = [&llt](const Eigen::MatrixXd& v) { return llt.solve(v); };
  } else {
    require(basis->rank >= 1 && basis->vectors.rows() == n, errc::input,
            "gls_fit: basis does not match the site count");
    apply_cinv = [basis](const Eigen::MatrixXd& v) -> Eigen::MatrixXd {
      const Eigen::MatrixXd proj = basis->vectors.transpose() * v;
      return basis->vectors * (basis->values.cwiseInverse().asDiagonal() * proj);
    };
  }
  const Eigen::MatrixXd solved = apply_cinv(rhs);

  const Eigen::MatrixXd a = X.transpose() * solved.leftCols(k);
  const Eigen::VectorXd b = X.transpose() * solved.col(k);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> aqr(a);
  aqr.setThreshold(1e-12);
  require(aqr.rank() == k, errc::fit,
          "gls_fit: normal equations singular (rank-reduced basis too coarse?)");
  model.z_hat = aqr.solve(b);
  model.residuals = Y - X * model.z_hat;
  model.weights = apply_cinv(model.residuals);

  const Eigen::MatrixXd cov_z = aqr.inverse();
  model.t_values.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double v = cov_z(j, j);
    model.t_values[j] = model.z_hat[j] / std::sqrt(std::max(v, 1e-300));
  }

  model.vif = design_vif(X);
  for (std::size_t j = 0; j < model.vif.size(); ++j)
    if (model.vif[j] > 10.0) {
      std::ostringstream msg;
      msg << "column " << j << " has VIF " << model.vif[j] << " (> 10, severe collinearity)";
      model.warnings.push_back(msg.str());
    }

  model.fitted = true;
  return model;
}

double sblue_predict(const Site& s0, const Eigen::VectorXd& x0, const SblueModel& model) {
  require(model.fitted, errc::state, "sblue_predict: model not fitted");
  require(x0.size() == model.X.cols(), errc::input,
          "sblue_predict: covariate length must match the fitted design");
  const auto n = static_cast<Eigen::Index>(model.sites.size());
  double acc = x0.dot(model.z_hat);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Site& si = model.sites[static_cast<std::size_t>(i)];
    const double dx = s0.x - si.x, dy = s0.y - si.y;
    acc += kernel_value(std::sqrt(dx * dx + dy * dy), model.kernel) * model.weights[i];
  }
  return acc;
}

BoxCoxResult boxcox_fit_transform(const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  require(n >= 4, errc::input, "boxcox_fit_transform: need at least 4 observations");
  for (Eigen::Index i = 0; i < n; ++i)
    require(y[i] > 0.0 && std::isfinite(y[i]), errc::input,
            "boxcox_fit_transform: data must be strictly positive");

  double logsum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logsum += std::log(y[i]);

  auto transform = [&](double lambda) {
    Eigen::VectorXd t(n);
    if (std::fabs(lambda) < 1e-12)
      for (Eigen::Index i = 0; i < n; ++i) t[i] = std::log(y[i]);
    else
      for (Eigen::Index i = 0; i < n; ++i) t[i] = std::expm1(lambda * std::log(y[i])) / lambda;
    return t;
  };
  auto profile = [&](double lambda) {
    const Eigen::VectorXd t = transform(lambda);
    const double mean = t.mean();
    const double ss = (t.array() - mean).square().sum() / static_cast<double>(n);
    if (!(ss > 0.0)) fail(errc::fit, "boxcox_fit_transform: zero variance after transform");
    return -0.5 * static_cast<double>(n) * std::log(ss) + (lambda - 1.0) * logsum;
  };

  double best_lambda = 1.0;
  double best = -std::numeric_limits<double>::infinity();
  double center = 0.0, span = 2.0;
  for (double step : {0.1, 0.01, 0.001}) {
    const double lo = std::max(-2.0, center - span), hi = std::min(2.0, center + span);
    for (double lambda = lo; lambda <= hi + 1e-12; lambda += step) {
      const double ll = profile(lambda);
      if (ll > best) {
        best = ll;
        best_lambda = lambda;
      }
    }
    center = best_lambda;
    span = 1.5 * step;
  }

  BoxCoxResult out;
  out.lambda = best_lambda;
  out.transformed = transform(best_lambda);
  return out;
}

}  // namespace tghf
