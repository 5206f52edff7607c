#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "tghf/lowrank.hpp"
#include "tghf/rng.hpp"
#include "tghf/tghrf.hpp"

using namespace tghf;

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Eigen::VectorXd draw_from_spec(const LowRankSpec& spec, CounterRng& rng) {
  const Eigen::Index n = spec.basis.vectors.rows();
  const Eigen::Index rank = spec.basis.vectors.cols();
  const double logn = std::log(static_cast<double>(n));
  Eigen::VectorXd coef(rank);
  for (Eigen::Index l = 0; l < rank; ++l) {
    const double d = std::exp(logn + spec.log_p + spec.m * std::log(spec.basis.values[l]));
    coef[l] = std::sqrt(d) * rng.normal();
  }
  Eigen::VectorXd eta(n);
  for (Eigen::Index i = 0; i < n; ++i) eta[i] = rng.normal();
  const Eigen::VectorXd outside =
      eta - spec.basis.vectors * (spec.basis.vectors.transpose() * eta);
  return spec.basis.vectors * coef + std::sqrt(spec.complement) * outside;
}

}  // namespace

TEST_CASE("reduced-rank fit recovers skewness from its own generator") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 20, 20}.sites();
  const int n = 400;
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  LowRankSpec spec = build_lowrank_spec(sites, all, 60);
  set_scale_exponent(spec, 2.0);
  const TghParams truth{0.0, 1.0, 0.3, 0.0};

  FitOptions opt;
  opt.compute_ci = false;
  std::vector<double> g_hat, h_hat;
  for (int rep = 0; rep < 20; ++rep) {
    CounterRng rng(3100 + rep, 0);
    const Eigen::VectorXd z = draw_from_spec(spec, rng);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = truth.a + truth.b * tau_gh(z[i], truth.g, truth.h);
    const TghRfModel fit = fit_lowrank(sites, y, spec, default_init(sites, y), opt);
    g_hat.push_back(fit.params.g);
    h_hat.push_back(fit.params.h);
  }
  CHECK(std::fabs(median_of(g_hat) - truth.g) < 0.2);
  CHECK(median_of(h_hat) < 0.1);
}

TEST_CASE("likelihood evaluation cost grows sub-quadratically at fixed rank") {
  const std::vector<int> sizes{500, 1000, 2000, 4000};
  const int rank = 50;
  const TghParams p{0.2, 1.3, 0.25, 0.05};
  std::vector<double> log_n, log_t;

  for (const int n : sizes) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    const GridSpec grid{0.0, 0.0, 1.0, side, (n + side - 1) / side};
    std::vector<int> keep(static_cast<std::size_t>(n));
    std::iota(keep.begin(), keep.end(), 0);
    const SiteSet sites = grid.sites().subset(keep);
    const LowRankSpec spec =
        build_lowrank_spec(sites, sample_landmarks(sites.size(), 80, 11), rank);

    CounterRng rng(500 + n, 1);
    Eigen::VectorXd z = draw_from_spec(spec, rng);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = p.a + p.b * tau_gh(z[i], p.g, p.h);

    // Warm up once, then time enough repeats for a stable reading.
    volatile double sink = lowrank_loglik(p, 1.4, spec, y);
    const int reps = 40;
    const auto t0 = std::chrono::steady_clock::now();
    for (int rep = 0; rep < reps; ++rep) sink = lowrank_loglik(p, 1.4, spec, y);
    const auto t1 = std::chrono::steady_clock::now();
    (void)sink;
    const double secs = std::chrono::duration<double>(t1 - t0).count() / reps;
    log_n.push_back(std::log(static_cast<double>(n)));
    log_t.push_back(std::log(std::max(secs, 1e-9)));
  }

  // Least-squares slope of log time against log size.
  const double k = static_cast<double>(sizes.size());
  const double mx = std::accumulate(log_n.begin(), log_n.end(), 0.0) / k;
  const double my = std::accumulate(log_t.begin(), log_t.end(), 0.0) / k;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < log_n.size(); ++i) {
    sxy += (log_n[i] - mx) * (log_t[i] - my);
    sxx += (log_n[i] - mx) * (log_n[i] - mx);
  }
  const double slope = sxy / sxx;
  INFO("log-log slope ", slope);
  CHECK(slope < 1.5);
}
