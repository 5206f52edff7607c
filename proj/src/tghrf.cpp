#include "tghf/tghrf.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tghf/field.hpp"
#include "tghf/lmoments.hpp"
#include "tghf/optim.hpp"
#include "tghf/variogram.hpp"

namespace tghf {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kHMax = 0.9;
constexpr double kGMax = 5.0;
constexpr double kPenalty = 1e300;

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * (static_cast<double>(s.size()) - 1.0);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= s.size()) return s.back();
  const double w = pos - static_cast<double>(i);
  return (1.0 - w) * s[i] + w * s[i + 1];
}

double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// -loglik over the free transform coordinates; infeasible points (transform
// range violations, non-finite values) cost kPenalty so the simplex backs off.
double negated_or_penalty(const std::function<double(const TghParams&)>& loglik,
                          const TghParams& p) {
  try {
    const double v = loglik(p);
    return std::isfinite(v) ? -v : kPenalty;
  } catch (const error&) {
    return kPenalty;
  }
}

}  // namespace

Eigen::VectorXd transform_to_z(const Eigen::VectorXd& y, const TghParams& params) {
  params.validate();
  require(params.monotone(), errc::domain, "transform_to_z: requires h >= 0");
  Eigen::VectorXd z(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    try {
      z[i] = tau_gh_inv((y[i] - params.a) / params.b, params.g, params.h);
    } catch (const error& e) {
      throw error(errc::numeric, "transform_to_z: entry " + std::to_string(i) + ": " + e.what());
    }
  }
  return z;
}

double tgh_rf_loglik(const TghParams& params, const Eigen::LLT<Eigen::MatrixXd>& corr_llt,
                     double log_det, const Eigen::VectorXd& y) {
  const Eigen::VectorXd z = transform_to_z(y, params);
  const double quad = z.dot(corr_llt.solve(z));
  double jac = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    jac += tau_gh_log_deriv(z[i], params.g, params.h);
  const double n = static_cast<double>(y.size());
  return -0.5 * quad - 0.5 * log_det - 0.5 * n * kLog2Pi - n * std::log(params.b) - jac;
}

double tgh_rf_loglik(const TghParams& params, const ExpKernelParams& kernel,
                     const SiteSet& sites, const Eigen::VectorXd& y) {
  kernel.validate();
  require(static_cast<Eigen::Index>(sites.size()) == y.size(), errc::input,
          "tgh_rf_loglik: sites and values differ in length");
  const Eigen::MatrixXd corr = corr_matrix(sites, kernel);
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  require(llt.info() == Eigen::Success, errc::decomposition,
          "tgh_rf_loglik: correlation matrix is not positive definite");
  return tgh_rf_loglik(params, llt, log_det_from_llt(llt), y);
}

TghRfModel default_init(const SiteSet& sites, const Eigen::VectorXd& y) {
  require(y.size() >= 4, errc::input, "default_init: need at least 4 observations");
  require(y.allFinite(), errc::input, "default_init: values must be finite");

  std::vector<double> sorted(y.data(), y.data() + y.size());
  std::sort(sorted.begin(), sorted.end());
  const double med = quantile_sorted(sorted, 0.5);
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);

  TghRfModel model;
  model.params.a = med;
  // 1.349 is the normal IQR in standard deviations.
  model.params.b = std::max(iqr / 1.349, 1e-8 * (1.0 + std::fabs(med)));
  try {
    const LMomentMatch match = lmoment_match(y);
    model.params.g = std::clamp(match.params.g, -kGMax, kGMax);
    model.params.h = std::clamp(match.params.h, 0.0, kHMax);
  } catch (const error&) {
    model.params.g = 0.0;
    model.params.h = 0.0;
  }

  // A bounded-range transform (h = 0, g != 0) may not cover every sample
  // value with the moment-based location and scale; a small tail weight
  // makes the transform surjective.
  try {
    (void)transform_to_z(y, model.params);
  } catch (const error&) {
    model.params.h = std::max(model.params.h, 0.02);
  }

  try {
    const Eigen::VectorXd z = transform_to_z(y, model.params);
    model.kernel = robust_variogram_wls(sites, z).params;
  } catch (const error&) {
    const Eigen::MatrixXd d = pairwise_distances(sites);
    model.kernel = ExpKernelParams{0.9, 0.1, std::max(0.5 * d.maxCoeff(), 1e-3)};
  }
  return model;
}

TghParams maximize_transform_block(const std::function<double(const TghParams&)>& loglik,
                                   const TghParams& start, const Eigen::VectorXd& y, bool fix_g,
                                   bool fix_h, double* attained) {
  const double ymin = y.minCoeff(), ymax = y.maxCoeff();
  const double span = std::max(ymax - ymin, 1e-6 * (1.0 + std::fabs(ymax)));
  const double logb0 = std::log(start.b);

  std::vector<int> free_ix = {0, 1};
  if (!fix_g) free_ix.push_back(2);
  if (!fix_h) free_ix.push_back(3);
  const int dim = static_cast<int>(free_ix.size());

  const Eigen::Vector4d full_lo(ymin - span, logb0 - 6.0, -kGMax, 0.0);
  const Eigen::Vector4d full_hi(ymax + span, logb0 + 6.0, kGMax, kHMax);
  const Eigen::Vector4d full_step(0.1 * start.b, 0.1, 0.05, 0.02);
  Eigen::Vector4d full_x0(start.a, logb0, start.g, start.h);
  for (int k = 0; k < 4; ++k) full_x0[k] = std::clamp(full_x0[k], full_lo[k], full_hi[k]);

  Eigen::VectorXd x0(dim), lo(dim), hi(dim), step(dim);
  for (int k = 0; k < dim; ++k) {
    x0[k] = full_x0[free_ix[static_cast<std::size_t>(k)]];
    lo[k] = full_lo[free_ix[static_cast<std::size_t>(k)]];
    hi[k] = full_hi[free_ix[static_cast<std::size_t>(k)]];
    step[k] = full_step[free_ix[static_cast<std::size_t>(k)]];
  }

  auto unpack = [&](const Eigen::VectorXd& x) {
    TghParams p = start;
    for (int k = 0; k < dim; ++k) {
      const int which = free_ix[static_cast<std::size_t>(k)];
      if (which == 0) p.a = x[k];
      if (which == 1) p.b = std::exp(x[k]);
      if (which == 2) p.g = x[k];
      if (which == 3) p.h = x[k];
    }
    return p;
  };
  auto objective = [&](const Eigen::VectorXd& x) { return negated_or_penalty(loglik, unpack(x)); };

  const SimplexResult res =
      minimize_simplex(objective, x0, step, lo, hi, SimplexOptions{600, 1e-10, 1e-10});
  if (attained != nullptr) *attained = -res.value;
  return unpack(res.x);
}

namespace {

ExpKernelParams maximize_dependence_block(const SiteSet& sites, const Eigen::VectorXd& z,
                                          const ExpKernelParams& start, double r_lo, double r_hi,
                                          double* attained) {
  // With z fixed, only the Gaussian correlation part of the likelihood
  // moves; the transform Jacobian and log b are constants added back by the
  // caller. Coordinates are (log tau2, log sigma2, log r).
  auto objective = [&](const Eigen::VectorXd& u) {
    const ExpKernelParams kernel{std::exp(u[0]), std::exp(u[1]), std::exp(u[2])};
    const Eigen::MatrixXd corr = corr_matrix(sites, kernel);
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    if (llt.info() != Eigen::Success) return kPenalty;
    const double quad = z.dot(llt.solve(z));
    const double value = -0.5 * quad - 0.5 * log_det_from_llt(llt);
    return std::isfinite(value) ? -value : kPenalty;
  };

  Eigen::Vector3d lo(-14.0, -18.0, std::log(r_lo));
  Eigen::Vector3d hi(7.0, 7.0, std::log(r_hi));
  Eigen::Vector3d x0(std::log(start.tau2), std::log(std::max(start.sigma2, 1e-8)),
                     std::log(start.r));
  for (int k = 0; k < 3; ++k) x0[k] = std::clamp(x0[k], lo[k], hi[k]);
  const Eigen::Vector3d step(0.3, 0.3, 0.3);

  const SimplexResult res =
      minimize_simplex(objective, x0, step, lo, hi, SimplexOptions{150, 1e-10, 1e-10});
  if (attained != nullptr) *attained = -res.value;
  return ExpKernelParams{std::exp(res.x[0]), std::exp(res.x[1]), std::exp(res.x[2])};
}

}  // namespace

TghRfModel fit_full(const SiteSet& sites, const Eigen::VectorXd& y, const TghRfModel& init,
                    const FitOptions& opt) {
  const Eigen::Index n = y.size();
  require(n >= 20, errc::input, "fit_full: need at least 20 observations");
  require(static_cast<Eigen::Index>(sites.size()) == n, errc::input,
          "fit_full: sites and values differ in length");
  require(y.allFinite(), errc::input, "fit_full: values must be finite");
  init.params.validate();
  init.kernel.validate();

  TghRfModel model = init;
  model.params.g = std::clamp(model.params.g, -kGMax, kGMax);
  model.params.h = std::clamp(model.params.h, 0.0, kHMax);

  const Eigen::MatrixXd dists = pairwise_distances(sites);
  const double dmax = dists.maxCoeff();
  const double r_lo = std::max(1e-3 * dmax, 1e-9);
  const double r_hi = std::max(10.0 * dmax, 1e-6);

  auto factor_corr = [&](const ExpKernelParams& kernel, Eigen::LLT<Eigen::MatrixXd>& llt,
                         double& log_det) {
    llt.compute(corr_matrix(sites, kernel));
    require(llt.info() == Eigen::Success, errc::decomposition,
            "fit_full: correlation matrix is not positive definite");
    log_det = log_det_from_llt(llt);
  };

  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_det = 0.0;
  factor_corr(model.kernel, llt, log_det);
  double ll_prev = tgh_rf_loglik(model.params, llt, log_det, y);

  // Joint parameter vector in optimizer coordinates, for the extrapolation
  // step: (a, log b, g, h, log tau2, log sigma2, log r).
  auto pack = [](const TghRfModel& md) {
    Eigen::VectorXd v(7);
    v << md.params.a, std::log(md.params.b), md.params.g, md.params.h, std::log(md.kernel.tau2),
        std::log(std::max(md.kernel.sigma2, 1e-12)), std::log(md.kernel.r);
    return v;
  };
  auto try_unpack = [&](const Eigen::VectorXd& v, TghRfModel& md) {
    TghParams p{v[0], std::exp(v[1]), std::clamp(v[2], -kGMax, kGMax),
                std::clamp(v[3], 0.0, kHMax)};
    ExpKernelParams k{std::exp(std::min(v[4], 7.0)), std::exp(std::min(v[5], 7.0)),
                      std::clamp(std::exp(v[6]), r_lo, r_hi)};
    md.params = p;
    md.kernel = k;
  };

  model.converged = false;
  model.iterations = opt.max_iter;
  double ll_new = ll_prev;
  Eigen::VectorXd packed_prev = pack(model);
  for (int it = 1; it <= opt.max_iter; ++it) {
    auto block1 = [&](const TghParams& p) { return tgh_rf_loglik(p, llt, log_det, y); };
    model.params = maximize_transform_block(block1, model.params, y, opt.fix_g, opt.fix_h, &ll_new);

    if (!opt.fix_kernel) {
      const Eigen::VectorXd z = transform_to_z(y, model.params);
      double gauss_part = 0.0;
      model.kernel = maximize_dependence_block(sites, z, model.kernel, r_lo, r_hi, &gauss_part);
      factor_corr(model.kernel, llt, log_det);
      ll_new = tgh_rf_loglik(model.params, llt, log_det, y);
    }

    // Exact block alternation contracts linearly along the coupled valley;
    // extrapolating past the new point along the last round's displacement
    // cuts the round count. Accepted only on improvement, so the loglik
    // sequence stays non-decreasing.
    if (it >= 2) {
      const Eigen::VectorXd packed_now = pack(model);
      for (const double gamma : {3.0, 1.0}) {
        TghRfModel trial = model;
        try_unpack(packed_now + gamma * (packed_now - packed_prev), trial);
        try {
          const double ll_trial =
              opt.fix_kernel ? tgh_rf_loglik(trial.params, llt, log_det, y)
                             : tgh_rf_loglik(trial.params, trial.kernel, sites, y);
          if (std::isfinite(ll_trial) && ll_trial > ll_new) {
            model.params = trial.params;
            if (!opt.fix_kernel) {
              model.kernel = trial.kernel;
              factor_corr(model.kernel, llt, log_det);
            }
            ll_new = ll_trial;
            break;
          }
        } catch (const error&) {
          // infeasible extrapolation, keep the block result
        }
      }
      packed_prev = packed_now;
    } else {
      packed_prev = pack(model);
    }

    require(ll_new >= ll_prev - 1e-6 * (1.0 + std::fabs(ll_prev)), errc::numeric,
            "fit_full: log-likelihood decreased across an outer iteration");
    if (std::fabs(ll_new - ll_prev) < opt.tol) {
      model.converged = true;
      model.iterations = it;
      break;
    }
    ll_prev = ll_new;
  }

  model.loglik = ll_new;
  require(std::isfinite(model.loglik), errc::numeric, "fit_full: non-finite log-likelihood");

  if (opt.compute_ci) {
    auto at_optimum = [&](const TghParams& p) { return tgh_rf_loglik(p, llt, log_det, y); };
    transform_block_cis(at_optimum, model.params, opt.fix_g, opt.fix_h, model.ci_low,
                        model.ci_high);
  }
  return model;
}

void transform_block_cis(const std::function<double(const TghParams&)>& loglik,
                         const TghParams& at, bool fix_g, bool fix_h,
                         std::array<double, 4>& lo, std::array<double, 4>& hi) {
  // Observed information in (a, log b, g, h) coordinates. The h stencil is
  // shifted off the boundary when h sits within one step of 0, so the
  // curvature there is a one-sided approximation.
  Eigen::Vector4d t(at.a, std::log(at.b), at.g, at.h);
  Eigen::Vector4d step;
  for (int k = 0; k < 4; ++k) step[k] = 1e-4 * std::max(1.0, std::fabs(t[k]));
  if (t[3] < step[3]) t[3] = step[3];

  auto eval = [&](const Eigen::Vector4d& u) {
    TghParams p{u[0], std::exp(u[1]), u[2], std::max(u[3], 0.0)};
    return -negated_or_penalty(loglik, p);
  };

  std::vector<int> free_ix = {0, 1};
  if (!fix_g) free_ix.push_back(2);
  if (!fix_h) free_ix.push_back(3);
  const int dim = static_cast<int>(free_ix.size());

  Eigen::MatrixXd hess(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const int ii = free_ix[static_cast<std::size_t>(i)];
    for (int j = i; j < dim; ++j) {
      const int jj = free_ix[static_cast<std::size_t>(j)];
      Eigen::Vector4d pp = t, pm = t, mp = t, mm = t;
      pp[ii] += step[ii]; pp[jj] += step[jj];
      pm[ii] += step[ii]; pm[jj] -= step[jj];
      mp[ii] -= step[ii]; mp[jj] += step[jj];
      mm[ii] -= step[ii]; mm[jj] -= step[jj];
      // Negative of the loglik Hessian: observed information.
      const double d2 = -(eval(pp) - eval(pm) - eval(mp) + eval(mm)) /
                        (4.0 * step[ii] * step[jj]);
      hess(i, j) = d2;
      hess(j, i) = d2;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess);
  const double floor = 1e-10 * std::max(es.eigenvalues().maxCoeff(), 1.0);
  Eigen::VectorXd inv_ev = es.eigenvalues();
  for (int k = 0; k < dim; ++k) inv_ev[k] = 1.0 / std::max(inv_ev[k], floor);
  const Eigen::MatrixXd cov = es.eigenvectors() * inv_ev.asDiagonal() *
                              es.eigenvectors().transpose();

  const Eigen::Vector4d center(at.a, std::log(at.b), at.g, at.h);
  lo = {at.a, at.b, at.g, at.h};
  hi = lo;
  for (int k = 0; k < dim; ++k) {
    const int which = free_ix[static_cast<std::size_t>(k)];
    const double se = std::sqrt(std::max(cov(k, k), 0.0));
    const double l = center[which] - 1.959963984540054 * se;
    const double u = center[which] + 1.959963984540054 * se;
    if (which == 1) {
      lo[1] = std::exp(l);
      hi[1] = std::exp(u);
    } else if (which == 3) {
      lo[3] = std::max(l, 0.0);
      hi[3] = u;
    } else {
      lo[static_cast<std::size_t>(which)] = l;
      hi[static_cast<std::size_t>(which)] = u;
    }
  }
}

}  // namespace tghf
