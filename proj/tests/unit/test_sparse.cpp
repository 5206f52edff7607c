#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "tghf/field.hpp"
#include "tghf/rng.hpp"
#include "tghf/sparse.hpp"
#include "tghf/tghrf.hpp"

using namespace tghf;

namespace {

SiteSet random_sites(int n, CounterRng& rng, double scale = 10.0) {
  std::vector<double> xs(static_cast<std::size_t>(n)), ys(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    xs[static_cast<std::size_t>(i)] = scale * rng.uniform();
    ys[static_cast<std::size_t>(i)] = scale * rng.uniform();
  }
  return SiteSet::from_xy(xs, ys);
}

// Dense references for the sequential quantities, straight from the
// definitions.
struct DenseRef {
  Eigen::VectorXd cinv_eps;
  double beta, psi, mu;
};

DenseRef dense_reference(const Site& s0, const SiteSet& sites, const std::vector<int>& design,
                         const ExpKernelParams& kernel, const Eigen::VectorXd& eps) {
  const SiteSet ds = sites.subset(design);
  const Eigen::MatrixXd c = cov_matrix(ds, kernel);
  const auto j = static_cast<Eigen::Index>(design.size());
  Eigen::VectorXd eps_d(j), c0(j);
  for (Eigen::Index i = 0; i < j; ++i) {
    eps_d[i] = eps[design[static_cast<std::size_t>(i)]];
    const double dx = ds[static_cast<std::size_t>(i)].x - s0.x;
    const double dy = ds[static_cast<std::size_t>(i)].y - s0.y;
    c0[i] = kernel_value(std::sqrt(dx * dx + dy * dy), kernel);
  }
  const Eigen::MatrixXd cinv = c.inverse();
  DenseRef ref;
  ref.cinv_eps = cinv * eps_d;
  ref.beta = kernel_value(0.0, kernel) - c0.dot(cinv * c0);
  ref.psi = eps_d.dot(cinv * eps_d);
  ref.mu = c0.dot(cinv * eps_d);
  return ref;
}

LocalState extend_all(const Site& s0, const SiteSet& sites, const std::vector<int>& design,
                      const ExpKernelParams& kernel, const Eigen::VectorXd& eps) {
  LocalState st = local_state_start(s0, kernel);
  for (const int id : design) st = local_state_extend(st, id, sites, eps);
  return st;
}

}  // namespace

TEST_CASE("one-site conditioning matches the closed form") {
  const SiteSet sites = SiteSet::from_xy({1.0, 4.0}, {2.0, 5.0});
  const ExpKernelParams kernel{1.5, 0.3, 2.0};
  const Site s0{0.0, 0.0, -1};
  Eigen::VectorXd eps(2);
  eps << 0.7, -1.1;

  LocalState st = local_state_start(s0, kernel);
  CHECK(st.beta_j == doctest::Approx(1.8).epsilon(1e-12));
  st = local_state_extend(st, 0, sites, eps);

  const double c01 = kernel_value(std::sqrt(5.0), kernel);
  const double c11 = kernel_value(0.0, kernel);
  CHECK(st.mu_j == doctest::Approx(c01 * 0.7 / c11).epsilon(1e-12));
  CHECK(st.beta_j == doctest::Approx(c11 - c01 * c01 / c11).epsilon(1e-12));
  CHECK(st.psi_j == doctest::Approx(0.7 * 0.7 / c11).epsilon(1e-12));
}

TEST_CASE("ten extensions agree with the dense definitions") {
  CounterRng rng(301, 0);
  const SiteSet sites = random_sites(24, rng);
  const ExpKernelParams kernel{1.2, 0.15, 2.5};
  const Site s0{5.0, 5.0, -1};
  Eigen::VectorXd eps(24);
  for (int i = 0; i < 24; ++i) eps[i] = rng.normal();

  std::vector<int> design = {3, 17, 8, 0, 21, 11, 5, 14, 9, 2};
  const LocalState st = extend_all(s0, sites, design, kernel, eps);
  const DenseRef ref = dense_reference(s0, sites, design, kernel, eps);

  CHECK((st.cinv_eps - ref.cinv_eps).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(st.beta_j == doctest::Approx(ref.beta).epsilon(1e-8));
  CHECK(st.psi_j == doctest::Approx(ref.psi).epsilon(1e-8));
  CHECK(st.mu_j == doctest::Approx(ref.mu).epsilon(1e-8));
}

TEST_CASE("fifty-site recursions stay within 1e-8 of dense linear algebra") {
  CounterRng rng(302, 1);
  const SiteSet sites = random_sites(80, rng);
  const ExpKernelParams kernel{1.0, 0.05, 3.0};
  const Site s0{4.2, 6.1, -1};
  Eigen::VectorXd eps(80);
  for (int i = 0; i < 80; ++i) eps[i] = rng.normal();

  std::vector<int> design(80);
  std::iota(design.begin(), design.end(), 0);
  // Deterministic shuffle through the counter stream.
  for (int i = 79; i > 0; --i)
    std::swap(design[static_cast<std::size_t>(i)],
              design[static_cast<std::size_t>(static_cast<int>(rng.uniform() * (i + 1)))]);
  design.resize(50);

  const LocalState st = extend_all(s0, sites, design, kernel, eps);
  const DenseRef ref = dense_reference(s0, sites, design, kernel, eps);
  CHECK(std::fabs(st.mu_j - ref.mu) < 1e-8);
  CHECK(std::fabs(st.beta_j - ref.beta) < 1e-8);
  CHECK(std::fabs(st.psi_j - ref.psi) < 1e-8);
  CHECK((st.cinv_eps - ref.cinv_eps).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("conditioning does not depend on the extension order") {
  CounterRng rng(303, 2);
  const SiteSet sites = random_sites(15, rng);
  const ExpKernelParams kernel{0.9, 0.1, 1.8};
  const Site s0{2.0, 8.0, -1};
  Eigen::VectorXd eps(15);
  for (int i = 0; i < 15; ++i) eps[i] = rng.normal();

  std::vector<int> fwd = {0, 2, 4, 6, 8, 10, 12, 14, 1, 3, 5, 7};
  std::vector<int> rev(fwd.rbegin(), fwd.rend());
  const LocalState a = extend_all(s0, sites, fwd, kernel, eps);
  const LocalState b = extend_all(s0, sites, rev, kernel, eps);
  CHECK(std::fabs(a.mu_j - b.mu_j) < 1e-8);
  CHECK(std::fabs(a.beta_j - b.beta_j) < 1e-8);
  CHECK(std::fabs(a.psi_j - b.psi_j) < 1e-8);
}

TEST_CASE("extending onto a duplicate site is a conditioning error") {
  const SiteSet sites = SiteSet::from_xy({1.0, 1.0, 3.0}, {2.0, 2.0, 4.0});
  const ExpKernelParams kernel{1.0, 0.0, 1.0};
  const Site s0{0.0, 0.0, -1};
  const Eigen::VectorXd eps = Eigen::VectorXd::Zero(3);
  LocalState st = local_state_start(s0, kernel);
  st = local_state_extend(st, 0, sites, eps);
  CHECK_THROWS_AS((void)local_state_extend(st, 1, sites, eps), error);
}

TEST_CASE("variance reduction closed forms and consistency") {
  CounterRng rng(304, 3);
  const SiteSet sites = random_sites(20, rng);
  const ExpKernelParams kernel{1.1, 0.2, 2.2};
  const Site s0{5.5, 4.5, -1};
  const Eigen::VectorXd eps = Eigen::VectorXd::Zero(20);

  SUBCASE("empty design: squared covariance over the prior variance") {
    const LocalState st = local_state_start(s0, kernel);
    const double dx = sites[7].x - s0.x, dy = sites[7].y - s0.y;
    const double c0u = kernel_value(std::sqrt(dx * dx + dy * dy), kernel);
    CHECK(mspe_reduction(st, 7, sites) ==
          doctest::Approx(c0u * c0u / kernel_value(0.0, kernel)).epsilon(1e-12));
  }

  SUBCASE("redundant candidate reduces nothing") {
    // Site 1 placed exactly on site 0: identical covariance footprint.
    const SiteSet dup = SiteSet::from_xy({2.0, 2.0, 6.0, 4.0}, {3.0, 3.0, 1.0, 7.0});
    LocalState st = local_state_start(s0, kernel);
    st = local_state_extend(st, 0, dup, Eigen::VectorXd::Zero(4));
    st = local_state_extend(st, 2, dup, Eigen::VectorXd::Zero(4));
    CHECK(mspe_reduction(st, 1, dup) == doctest::Approx(0.0).epsilon(1e-10));
  }

  SUBCASE("reduction equals the drop in conditional variance") {
    LocalState st = local_state_start(s0, kernel);
    for (const int id : {2, 9, 13, 4}) st = local_state_extend(st, id, sites, eps);
    for (const int cand : {0, 6, 11, 17}) {
      const double r = mspe_reduction(st, cand, sites);
      const LocalState ext = local_state_extend(st, cand, sites, eps);
      CHECK(st.beta_j - ext.beta_j == doctest::Approx(r).epsilon(1e-8));
      CHECK(r >= 0.0);
    }
  }
}

TEST_CASE("greedy design seeds, stops, and beats the nearest-neighbor baseline") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 20, 20}.sites();
  const ExpKernelParams kernel{1.0, 0.0, 2.0};
  const Site s0{9.5, 9.5, -1};

  SUBCASE("budget one picks the closest site") {
    GreedyOptions opt;
    opt.budget = 1;
    const GreedyResult res = greedy_local_design(s0, sites, kernel, opt);
    REQUIRE(res.design.size() == 1);
    const std::vector<int> nn = knn(sites, s0, 1);
    CHECK(res.design[0] == nn[0]);
  }

  SUBCASE("infinite threshold keeps only the seed") {
    GreedyOptions opt;
    opt.budget = 50;
    opt.threshold = std::numeric_limits<double>::infinity();
    const GreedyResult res = greedy_local_design(s0, sites, kernel, opt);
    CHECK(res.design.size() == 6);
  }

  SUBCASE("budget beyond the candidates terminates with a warning") {
    const SiteSet small = GridSpec{0.0, 0.0, 1.0, 5, 4}.sites();
    GreedyOptions opt;
    opt.budget = 100;
    opt.threshold = 0.0;
    const GreedyResult res = greedy_local_design(s0, small, kernel, opt);
    CHECK(res.design.size() == 20);
    REQUIRE(!res.warnings.empty());
    CHECK(res.warnings.back().find("exhausted") != std::string::npos);
  }

  SUBCASE("variance after the greedy design is at most the pure-NN design's") {
    GreedyOptions opt;
    opt.budget = 50;
    opt.threshold = 0.0;
    const GreedyResult greedy = greedy_local_design(s0, sites, kernel, opt);
    REQUIRE(greedy.design.size() == 50);
    std::vector<int> seen = greedy.design;
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());

    const std::vector<int> nn = knn(sites, s0, 50);
    const Eigen::VectorXd eps = Eigen::VectorXd::Zero(400);
    const LocalState a = extend_all(s0, sites, greedy.design, kernel, eps);
    const LocalState b = extend_all(s0, sites, nn, kernel, eps);
    CHECK(a.beta_j <= b.beta_j + 1e-10);
  }
}

TEST_CASE("local fit guards its inputs") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 8, 8}.sites();
  const Site s0{3.5, 3.5, -1};
  std::vector<int> design(40);
  std::iota(design.begin(), design.end(), 0);

  SUBCASE("too-small designs are rejected") {
    const std::vector<int> tiny(design.begin(), design.begin() + 10);
    const Eigen::VectorXd y = Eigen::VectorXd::Random(64);
    CHECK_THROWS_AS((void)fit_local_tgh(s0, tiny, sites, y), error);
  }

  SUBCASE("constant data is a zero-variance error") {
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(64, 3.25);
    CHECK_THROWS_WITH_AS((void)fit_local_tgh(s0, design, sites, y),
                         doctest::Contains("zero variance"), error);
  }
}

TEST_CASE("conditional scale is the Gaussian one under a frozen Gaussian shape") {
  const SiteSet sites = GridSpec{0.0, 0.0, 1.0, 8, 8}.sites();
  const Site s0{3.2, 3.8, -1};
  const ExpKernelParams gen{1.0, 0.0, 2.0};
  CounterRng rng(911, 4);
  oracle::GaussFieldSampler sampler(sites, gen);
  const Eigen::VectorXd y = (2.0 + 1.5 * sampler.draw(rng).array()).matrix();

  std::vector<int> design = knn(sites, s0, 40);
  LocalFitOptions opt;
  opt.fix_g = opt.fix_h = true;
  const LocalFit fit = fit_local_tgh(s0, design, sites, y, opt);
  REQUIRE(fit.ok);
  CHECK(fit.mle.g == 0.0);
  CHECK(fit.mle.h == 0.0);

  // Dense Gaussian evaluation of the same conditional moments.
  const SiteSet ds = sites.subset(design);
  Eigen::VectorXd yd(40), c0(40);
  for (int i = 0; i < 40; ++i) {
    yd[i] = y[design[static_cast<std::size_t>(i)]];
    const double dx = ds[static_cast<std::size_t>(i)].x - s0.x;
    const double dy = ds[static_cast<std::size_t>(i)].y - s0.y;
    c0[i] = std::exp(-std::sqrt(dx * dx + dy * dy) / fit.lengthscale);
  }
  const Eigen::MatrixXd cinv =
      corr_matrix(ds, ExpKernelParams{1.0, 0.0, fit.lengthscale}).inverse();
  const Eigen::VectorXd z = (yd.array() - fit.mle.a) / fit.mle.b;
  const double mu_dense = c0.dot(cinv * z);
  const double beta_dense = 1.0 - c0.dot(cinv * c0);
  const double psi_dense = z.dot(cinv * z);
  const double b2_dense = fit.mle.b * fit.mle.b * psi_dense / 38.0 * beta_dense;

  CHECK(fit.params.a == doctest::Approx(fit.mle.a + fit.mle.b * mu_dense).epsilon(1e-8));
  CHECK(fit.params.b * fit.params.b == doctest::Approx(b2_dense).epsilon(1e-8));
}

TEST_CASE("degenerate budget reduces every local fit to the global one") {
  const GridSpec grid{0.0, 0.0, 1.0, 7, 7};
  const SiteSet sites = grid.sites();
  const TghParams truth{1.0, 1.5, 0.3, 0.05};
  CounterRng rng(2500, 5);
  oracle::GaussFieldSampler sampler(sites, ExpKernelParams{1.0, 0.0, 2.0});
  const Eigen::VectorXd z = sampler.draw(rng);
  Eigen::VectorXd y(49);
  for (int i = 0; i < 49; ++i) y[i] = truth.a + truth.b * tau_gh(z[i], truth.g, truth.h);

  FieldFrame frame;
  frame.grid = grid;
  frame.values = y;
  frame.mask.assign(49, 1);

  SparseFieldOptions opt;
  opt.budget = 100;  // larger than the site count: designs hold all others
  opt.smooth = false;
  const SparseFieldResult res = fit_sparse_field(frame, opt);
  REQUIRE(res.fits.size() == 49);

  std::vector<int> all(49);
  std::iota(all.begin(), all.end(), 0);
  const LocalFit global = fit_local_tgh(Site{3.0, 3.0, -1}, all, sites, y);
  REQUIRE(global.ok);

  std::vector<double> dg;
  for (const LocalFit& f : res.fits) {
    REQUIRE(f.ok);
    CHECK(f.design_size == 48);
    CHECK(std::fabs(f.mle.g - global.mle.g) < 0.25);
    CHECK(std::fabs(f.mle.h - global.mle.h) < 0.15);
    dg.push_back(std::fabs(f.mle.g - global.mle.g));
  }
  std::sort(dg.begin(), dg.end());
  CHECK(dg[24] < 0.08);
}

TEST_CASE("masked cells are flagged and skipped") {
  const GridSpec grid{0.0, 0.0, 1.0, 9, 9};
  CounterRng rng(888, 6);
  oracle::GaussFieldSampler sampler(grid.sites(), ExpKernelParams{1.0, 0.0, 1.5});
  const Eigen::VectorXd z = sampler.draw(rng);

  FieldFrame frame;
  frame.grid = grid;
  frame.values = (1.0 + 0.8 * z.array()).matrix();
  frame.mask.assign(81, 1);
  for (const int hole : {4, 17, 33, 52, 70}) frame.mask[static_cast<std::size_t>(hole)] = 0;

  SparseFieldOptions opt;
  opt.budget = 35;
  opt.smooth = false;
  const SparseFieldResult res = fit_sparse_field(frame, opt);
  REQUIRE(res.fits.size() == 81);

  int ok_count = 0;
  for (int i = 0; i < 81; ++i) {
    if (!frame.mask[static_cast<std::size_t>(i)]) {
      CHECK(!res.fits[static_cast<std::size_t>(i)].ok);
      CHECK(res.fits[static_cast<std::size_t>(i)].message == "masked");
    } else if (res.fits[static_cast<std::size_t>(i)].ok) {
      ++ok_count;
      CHECK(res.fits[static_cast<std::size_t>(i)].design_size <= 35);
    }
  }
  CHECK(ok_count >= 70);
}
