#include "tghf/lowrank.hpp"

#include <cmath>
#include <limits>

#include "tghf/field.hpp"
#include "tghf/optim.hpp"

namespace tghf {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kMLo = 0.1;
constexpr double kMHi = 50.0;

// log(1/sum(lambda^m)) without overflow for large m.
double log_normalizer(const Eigen::VectorXd& values, double m) {
  const Eigen::ArrayXd logs = m * values.array().log();
  const double peak = logs.maxCoeff();
  return -(peak + std::log((logs - peak).exp().sum()));
}

// Scaled spectrum d_l = n p lambda_l^m, in log space.
Eigen::VectorXd scaled_spectrum(const LowRankSpec& spec, double m, double log_p) {
  const double logn = std::log(static_cast<double>(spec.basis.vectors.rows()));
  return (logn + log_p + m * spec.basis.values.array().log()).exp();
}

}  // namespace

LowRankSpec build_lowrank_spec(const SiteSet& sites, const std::vector<int>& landmarks, int L) {
  LowRankSpec spec;
  spec.r = mst_max_edge(sites);
  spec.basis = nystrom_eigs(sites, ExpKernelParams{1.0, 0.0, spec.r}, landmarks, L);
  // Eigenvalue mass the basis misses, spread evenly over the n - L
  // complement dimensions so the truncated trace is preserved.
  const double n = static_cast<double>(sites.size());
  const double dims = n - static_cast<double>(spec.basis.rank);
  spec.complement =
      dims > 0.0 ? std::max((n - spec.basis.values.sum()) / dims, 1e-6) : 1e-6;
  set_scale_exponent(spec, 1.0);
  return spec;
}

void set_scale_exponent(LowRankSpec& spec, double m) {
  require(m > 0.0, errc::domain, "set_scale_exponent: m must be positive");
  require(spec.basis.rank > 0, errc::state, "set_scale_exponent: empty basis");
  spec.m = m;
  spec.log_p = log_normalizer(spec.basis.values, m);
}

Eigen::VectorXd lowrank_apply(const LowRankSpec& spec, const Eigen::VectorXd& v) {
  require(v.size() == spec.basis.vectors.rows(), errc::input,
          "lowrank_apply: vector length does not match the basis");
  const Eigen::VectorXd d = scaled_spectrum(spec, spec.m, spec.log_p);
  return spec.basis.vectors * (d.asDiagonal() * (spec.basis.vectors.transpose() * v));
}

Eigen::MatrixXd lowrank_dense(const LowRankSpec& spec) {
  const Eigen::VectorXd d = scaled_spectrum(spec, spec.m, spec.log_p);
  return spec.basis.vectors * d.asDiagonal() * spec.basis.vectors.transpose();
}

double lowrank_loglik(const TghParams& params, double m, const LowRankSpec& spec,
                      const Eigen::VectorXd& y) {
  require(params.monotone(), errc::domain, "lowrank_loglik: requires h >= 0");
  require(y.size() == spec.basis.vectors.rows(), errc::input,
          "lowrank_loglik: data length does not match the basis");

  const Eigen::VectorXd z = transform_to_z(y, params);
  const Eigen::VectorXd w = spec.basis.vectors.transpose() * z;
  const double log_p = log_normalizer(spec.basis.values, m);
  const Eigen::VectorXd d = scaled_spectrum(spec, m, log_p);

  const double n = static_cast<double>(y.size());
  const double rank = static_cast<double>(spec.basis.rank);
  const double rho2 = std::max(z.squaredNorm() - w.squaredNorm(), 0.0);
  const double v = spec.complement;

  double gauss = 0.0;
  for (Eigen::Index l = 0; l < w.size(); ++l)
    gauss -= 0.5 * (w[l] * w[l] / d[l] + std::log(d[l]));
  gauss -= 0.5 * (rho2 / v + (n - rank) * std::log(v));

  double jac = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    jac += tau_gh_log_deriv(z[i], params.g, params.h);

  return gauss - 0.5 * n * kLog2Pi - n * std::log(params.b) - jac;
}

TghRfModel fit_lowrank(const SiteSet& sites, const Eigen::VectorXd& y, const LowRankSpec& spec,
                       const TghRfModel& init, const FitOptions& opt) {
  require(spec.basis.rank >= 10, errc::input, "fit_lowrank: need a basis of rank >= 10");
  require(static_cast<Eigen::Index>(sites.size()) == y.size(), errc::input,
          "fit_lowrank: sites and values differ in length");
  require(y.allFinite(), errc::input, "fit_lowrank: values must be finite");
  init.params.validate();

  TghRfModel model = init;
  model.params.g = std::clamp(model.params.g, -5.0, 5.0);
  model.params.h = std::clamp(model.params.h, 0.0, 0.9);
  model.m = std::clamp(model.m, kMLo, kMHi);
  model.kernel = ExpKernelParams{1.0, 0.0, spec.r};

  double ll_prev = lowrank_loglik(model.params, model.m, spec, y);
  model.converged = false;
  model.iterations = opt.max_iter;
  double ll_new = ll_prev;

  for (int it = 1; it <= opt.max_iter; ++it) {
    const double m_cur = model.m;
    auto block1 = [&](const TghParams& p) { return lowrank_loglik(p, m_cur, spec, y); };
    model.params = maximize_transform_block(block1, model.params, y, opt.fix_g, opt.fix_h, &ll_new);

    if (!opt.fix_kernel) {
      // Transform fixed: only the Gaussian spectrum depends on m, so the
      // line search works on cheap O(L) re-evaluations.
      const Eigen::VectorXd z = transform_to_z(y, model.params);
      const Eigen::VectorXd w = spec.basis.vectors.transpose() * z;
      const double rho2 = std::max(z.squaredNorm() - w.squaredNorm(), 0.0);
      double jac = 0.0;
      for (Eigen::Index i = 0; i < z.size(); ++i)
        jac += tau_gh_log_deriv(z[i], model.params.g, model.params.h);
      const double n = static_cast<double>(y.size());
      const double rank = static_cast<double>(spec.basis.rank);
      const double tail = -0.5 * (rho2 / spec.complement + (n - rank) * std::log(spec.complement)) -
                          0.5 * n * kLog2Pi - n * std::log(model.params.b) - jac;

      auto neg_ll_of_m = [&](double m) {
        const double log_p = log_normalizer(spec.basis.values, m);
        const Eigen::VectorXd d = scaled_spectrum(spec, m, log_p);
        double gauss = 0.0;
        for (Eigen::Index l = 0; l < w.size(); ++l)
          gauss -= 0.5 * (w[l] * w[l] / d[l] + std::log(d[l]));
        return -(gauss + tail);
      };
      const BrentResult br = minimize_brent(neg_ll_of_m, kMLo, kMHi, 1e-8, 200);
      if (-br.value > ll_new) {
        model.m = br.x;
        ll_new = -br.value;
      }
    }

    require(ll_new >= ll_prev - 1e-6 * (1.0 + std::fabs(ll_prev)), errc::numeric,
            "fit_lowrank: log-likelihood decreased across an outer iteration");
    if (std::fabs(ll_new - ll_prev) < opt.tol) {
      model.converged = true;
      model.iterations = it;
      break;
    }
    ll_prev = ll_new;
  }

  model.loglik = ll_new;
  require(std::isfinite(model.loglik), errc::numeric, "fit_lowrank: non-finite log-likelihood");

  if (opt.compute_ci) {
    const double m_fit = model.m;
    auto at_optimum = [&](const TghParams& p) { return lowrank_loglik(p, m_fit, spec, y); };
    transform_block_cis(at_optimum, model.params, opt.fix_g, opt.fix_h, model.ci_low,
                        model.ci_high);
  }
  return model;
}

}  // namespace tghf
