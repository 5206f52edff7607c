#include "tghf/variogram.hpp"

#include <algorithm>
#include <cmath>

#include "tghf/optim.hpp"

namespace tghf {

VariogramFit robust_variogram_wls(const SiteSet& sites, const Eigen::VectorXd& residuals,
                                  const VariogramOptions& opt) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  require(residuals.size() == n, errc::input, "robust_variogram_wls: length mismatch");
  require(n * (n - 1) / 2 >= 30, errc::input,
          "robust_variogram_wls: needs at least 30 observation pairs");
  require(opt.nbins >= 1, errc::input, "robust_variogram_wls: nbins must be >= 1");

  const double vmin = residuals.minCoeff(), vmax = residuals.maxCoeff();
  require(vmax > vmin, errc::fit, "robust_variogram_wls: zero variance in residuals");

  double dmax = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dx = sites[i].x - sites[j].x, dy = sites[i].y - sites[j].y;
      dmax = std::max(dmax, std::sqrt(dx * dx + dy * dy));
    }
  require(dmax > 0.0, errc::fit, "robust_variogram_wls: all sites coincide");

  const double cutoff = 0.5 * dmax;
  const double width = cutoff / opt.nbins;
  std::vector<double> root_sum(static_cast<std::size_t>(opt.nbins), 0.0);
  std::vector<long> count(static_cast<std::size_t>(opt.nbins), 0);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dx = sites[i].x - sites[j].x, dy = sites[i].y - sites[j].y;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d <= 0.0 || d > cutoff) continue;
      auto bin = static_cast<std::size_t>(std::min<int>(opt.nbins - 1, static_cast<int>(d / width)));
      root_sum[bin] += std::sqrt(std::fabs(residuals[i] - residuals[j]));
      ++count[bin];
    }

  VariogramFit fit;
  for (int b = 0; b < opt.nbins; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    if (count[bi] == 0) continue;
    const double mean_root = root_sum[bi] / static_cast<double>(count[bi]);
    const double nb = static_cast<double>(count[bi]);
    VariogramBin bin;
    bin.lag = (b + 0.5) * width;
    // Fourth power of the mean root increment, scaled by the small-count
    // bias factor of the robust estimator.
    bin.gamma = std::pow(mean_root, 4) / (2.0 * (0.457 + 0.494 / nb));
    bin.npairs = count[bi];
    fit.bins.push_back(bin);
  }
  require(fit.bins.size() >= 3, errc::fit,
          "robust_variogram_wls: fewer than 3 non-empty lag bins");

  auto objective = [&](const Eigen::VectorXd& p) {
    const double tau2 = p[0], sigma2 = p[1], r = p[2];
    double s = 0.0;
    for (const auto& bin : fit.bins) {
      const double model = sigma2 + tau2 * (1.0 - std::exp(-bin.lag / r));
      const double rel = bin.gamma / model - 1.0;
      s += static_cast<double>(bin.npairs) * rel * rel;
    }
    return s;
  };

  // Start from the classical moment heuristics: sill near the sample
  // variance, nugget read off the first bin, range at a sixth of the extent.
  const double mean = residuals.mean();
  const double svar = (residuals.array() - mean).square().sum() / static_cast<double>(n - 1);
  const double first_gamma = fit.bins.front().gamma;
  double sigma2_0 = std::clamp(0.5 * first_gamma, 1e-6 * svar, 0.9 * svar);
  double tau2_0 = std::max(svar - sigma2_0, 1e-3 * svar);
  double r_0 = std::max(dmax / 6.0, 2e-3);

  Eigen::VectorXd x0(3), step(3), lo(3), hi(3);
  x0 << tau2_0, sigma2_0, r_0;
  step << 0.5 * tau2_0, 0.5 * sigma2_0, 0.5 * r_0;
  lo << 1e-8, 1e-8, 1e-3;
  hi << 1e4 * svar, 1e4 * svar, 10.0 * dmax;

  SimplexOptions sopt;
  sopt.max_eval = 2000;
  sopt.ftol = 1e-13;
  const SimplexResult res = minimize_simplex(objective, x0, step, lo, hi, sopt);

  fit.params.tau2 = res.x[0];
  fit.params.sigma2 = res.x[1];
  fit.params.r = res.x[2];
  fit.objective = res.value;
  return fit;
}

}  // namespace tghf
