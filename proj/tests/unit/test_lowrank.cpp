#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "tghf/lowrank.hpp"
#include "tghf/rng.hpp"
#include "tghf/tghrf.hpp"

using namespace tghf;

namespace {

std::vector<int> all_indices(int n) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

// Sample from the reduced-rank Gaussian model itself: basis modes with the
// scaled spectrum plus the isotropic complement outside the basis span.
Eigen::VectorXd draw_lowrank_z(const LowRankSpec& spec, CounterRng& rng) {
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

TEST_CASE("represented correlation keeps unit average variance at any exponent") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 8, 5}.sites();
  for (const double m : {0.3, 1.0, 2.5, 7.0}) {
    LowRankSpec spec = build_lowrank_spec(sites, sample_landmarks(40, 25, 99), 15);
    set_scale_exponent(spec, m);
    CHECK(lowrank_dense(spec).trace() == doctest::Approx(40.0).epsilon(1e-8));
  }
}

TEST_CASE("full basis at unit exponent reproduces the correlation matrix") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 6, 6}.sites();
  const LowRankSpec spec = build_lowrank_spec(sites, all_indices(36), 36);
  const Eigen::MatrixXd r = corr_matrix(sites, ExpKernelParams{1.0, 0.0, spec.r});
  CHECK((lowrank_dense(spec) - r).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("large exponents collapse onto the leading mode") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 7, 5}.sites();
  LowRankSpec spec = build_lowrank_spec(sites, all_indices(35), 12);
  set_scale_exponent(spec, 50.0);
  const Eigen::MatrixXd got = lowrank_dense(spec);
  const Eigen::VectorXd e1 = spec.basis.vectors.col(0);
  const Eigen::MatrixXd target = 35.0 * e1 * e1.transpose();
  const double cosine = (got.array() * target.array()).sum() /
                        (got.norm() * target.norm());
  CHECK(cosine > 0.999);
}

TEST_CASE("apply agrees with the dense represented matrix") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 6, 5}.sites();
  LowRankSpec spec = build_lowrank_spec(sites, sample_landmarks(30, 20, 7), 10);
  set_scale_exponent(spec, 1.8);
  CounterRng rng(2, 0);
  Eigen::VectorXd v(30);
  for (int i = 0; i < 30; ++i) v[i] = rng.normal();
  CHECK((lowrank_apply(spec, v) - lowrank_dense(spec) * v).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("exact-basis likelihood matches the full model at the frozen range") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 10, 5}.sites();
  const LowRankSpec spec = build_lowrank_spec(sites, all_indices(50), 50);
  TghParams p{1.0, 2.0, 0.4, 0.1};
  CounterRng rng(41, 1);
  oracle::GaussFieldSampler sampler(corr_matrix(sites, ExpKernelParams{1.0, 0.0, spec.r}));
  Eigen::VectorXd z = sampler.draw(rng);
  Eigen::VectorXd y(50);
  for (int i = 0; i < 50; ++i) y[i] = p.a + p.b * tau_gh(z[i], p.g, p.h);

  const double full = tgh_rf_loglik(p, ExpKernelParams{1.0, 0.0, spec.r}, sites, y);
  CHECK(lowrank_loglik(p, 1.0, spec, y) == doctest::Approx(full).epsilon(1e-6));
}

TEST_CASE("reduced likelihood matches a dense Gaussian oracle at g = h = 0") {
  // The represented matrix plus the isotropic complement is a proper dense
  // covariance; evaluate it the naive way and compare.
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 6, 5}.sites();
  LowRankSpec spec = build_lowrank_spec(sites, all_indices(30), 12);
  const double m = 2.3;
  set_scale_exponent(spec, m);
  TghParams p{0.5, 1.5, 0.0, 0.0};
  CounterRng rng(17, 2);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) y[i] = 0.5 + 1.5 * rng.normal();

  const Eigen::Index n = 30;
  const Eigen::MatrixXd ee = spec.basis.vectors * spec.basis.vectors.transpose();
  const Eigen::MatrixXd c_eff =
      lowrank_dense(spec) + spec.complement * (Eigen::MatrixXd::Identity(n, n) - ee);
  const Eigen::VectorXd z = (y.array() - p.a) / p.b;
  const double want = oracle::mvn_logpdf(z, c_eff) - 30.0 * std::log(p.b);
  CHECK(lowrank_loglik(p, m, spec, y) == doctest::Approx(want).epsilon(1e-8));
}

TEST_CASE("spectral determinant term matches the dense log-determinant") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 9, 6}.sites();
  LowRankSpec spec = build_lowrank_spec(sites, sample_landmarks(54, 35, 3), 20);
  const double m = 1.6;
  set_scale_exponent(spec, m);

  const Eigen::Index n = 54;
  const Eigen::MatrixXd ee = spec.basis.vectors * spec.basis.vectors.transpose();
  const Eigen::MatrixXd c_eff =
      lowrank_dense(spec) + spec.complement * (Eigen::MatrixXd::Identity(n, n) - ee);

  const double logn = std::log(static_cast<double>(n));
  double spectral = 0.0;
  for (int l = 0; l < spec.basis.rank; ++l)
    spectral += logn + spec.log_p + m * std::log(spec.basis.values[l]);
  spectral += (static_cast<double>(n) - spec.basis.rank) * std::log(spec.complement);

  const double dense = std::log(c_eff.determinant());
  CHECK(spectral == doctest::Approx(dense).epsilon(1e-6));
}

TEST_CASE("fitted likelihood does not drop as the basis grows") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 10, 5}.sites();
  TghParams truth{0.0, 1.0, 0.3, 0.05};
  LowRankSpec gen = build_lowrank_spec(sites, all_indices(50), 50);
  CounterRng rng(23, 3);
  const Eigen::VectorXd z = draw_lowrank_z(gen, rng);
  Eigen::VectorXd y(50);
  for (int i = 0; i < 50; ++i) y[i] = truth.a + truth.b * tau_gh(z[i], truth.g, truth.h);

  FitOptions opt;
  opt.compute_ci = false;
  double prev = -std::numeric_limits<double>::infinity();
  for (const int rank : {10, 25, 50}) {
    const LowRankSpec spec = build_lowrank_spec(sites, all_indices(50), rank);
    TghRfModel init = default_init(sites, y);
    init.m = 1.0;
    const TghRfModel fit = fit_lowrank(sites, y, spec, init, opt);
    CHECK(fit.loglik >= prev - 1e-3);
    prev = fit.loglik;
  }
}

TEST_CASE("fitted exponent ignores location shifts of the data") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 8, 6}.sites();
  LowRankSpec spec = build_lowrank_spec(sites, all_indices(48), 20);
  set_scale_exponent(spec, 2.0);
  TghParams truth{1.0, 1.2, 0.2, 0.0};
  CounterRng rng(29, 4);
  const Eigen::VectorXd z = draw_lowrank_z(spec, rng);
  Eigen::VectorXd y(48);
  for (int i = 0; i < 48; ++i) y[i] = truth.a + truth.b * tau_gh(z[i], truth.g, truth.h);

  FitOptions opt;
  opt.compute_ci = false;
  const TghRfModel f1 = fit_lowrank(sites, y, spec, default_init(sites, y), opt);
  const Eigen::VectorXd y2 = y.array() + 250.0;
  const TghRfModel f2 = fit_lowrank(sites, y2, spec, default_init(sites, y2), opt);

  CHECK(std::fabs(f2.m - f1.m) < 1e-3 * (1.0 + f1.m));
  CHECK(f2.params.a == doctest::Approx(f1.params.a + 250.0).epsilon(1e-3));
}

TEST_CASE("fit_lowrank rejects a basis that is too coarse") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 6, 5}.sites();
  const LowRankSpec spec = build_lowrank_spec(sites, all_indices(30), 5);
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(30, 0.0, 3.0);
  CHECK_THROWS_AS((void)fit_lowrank(sites, y, spec, TghRfModel{}), error);
}
