#include "tghf/lmoments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "tghf/optim.hpp"

namespace tghf {

LMoments sample_lmoments(const Eigen::VectorXd& y) {
  const auto n = y.size();
  require(n >= 4, errc::input, "sample_lmoments: need at least 4 observations");
  std::vector<double> s(y.data(), y.data() + n);
  for (double v : s) require(std::isfinite(v), errc::input, "sample_lmoments: non-finite value");
  std::sort(s.begin(), s.end());

  const double dn = static_cast<double>(n);
  double b0 = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0;
  for (Eigen::Index j = 1; j <= n; ++j) {
    const double v = s[static_cast<std::size_t>(j - 1)];
    const double j1 = static_cast<double>(j - 1);
    const double j2 = static_cast<double>(j - 2);
    const double j3 = static_cast<double>(j - 3);
    b0 += v;
    b1 += j1 * v;
    b2 += j1 * j2 * v;
    b3 += j1 * j2 * j3 * v;
  }
  b0 /= dn;
  b1 /= dn * (dn - 1.0);
  b2 /= dn * (dn - 1.0) * (dn - 2.0);
  b3 /= dn * (dn - 1.0) * (dn - 2.0) * (dn - 3.0);

  LMoments lm;
  lm.l1 = b0;
  lm.l2 = 2.0 * b1 - b0;
  lm.l3 = 6.0 * b2 - 6.0 * b1 + b0;
  lm.l4 = 20.0 * b3 - 30.0 * b2 + 12.0 * b1 - b0;
  return lm;
}

namespace {

// Population (tau3, tau4) over the simplex seed grid g in [-1.5, 1.5],
// h in [0, 0.6], both at step 0.1. Built once per process.
struct RatioGrid {
  static constexpr int ng = 31, nh = 7;
  std::array<double, ng * nh> t3{}, t4{};

  RatioGrid() {
    for (int i = 0; i < ng; ++i)
      for (int j = 0; j < nh; ++j) {
        const auto pop = tgh_population_lmoments(-1.5 + 0.1 * i, 0.1 * j);
        t3[static_cast<std::size_t>(i * nh + j)] = pop.tau3;
        t4[static_cast<std::size_t>(i * nh + j)] = pop.tau4;
      }
  }
};

}  // namespace

LMomentMatch lmoment_match_from(const LMoments& lm) {
  require(lm.l2 > 0.0, errc::fit, "lmoment_match: degenerate sample, zero l-scale");
  const double t3 = lm.tau3();
  const double t4 = lm.tau4();

  static const RatioGrid grid;
  double best = std::numeric_limits<double>::infinity();
  double g0 = 0.0, h0 = 0.0;
  for (int i = 0; i < RatioGrid::ng; ++i)
    for (int j = 0; j < RatioGrid::nh; ++j) {
      const auto k = static_cast<std::size_t>(i * RatioGrid::nh + j);
      const double d3 = grid.t3[k] - t3;
      const double d4 = grid.t4[k] - t4;
      const double f = d3 * d3 + d4 * d4;
      if (f < best) {
        best = f;
        g0 = -1.5 + 0.1 * i;
        h0 = 0.1 * j;
      }
    }

  auto objective = [&](const Eigen::VectorXd& x) {
    const auto pop = tgh_population_lmoments(x[0], x[1]);
    const double d3 = pop.tau3 - t3;
    const double d4 = pop.tau4 - t4;
    return d3 * d3 + d4 * d4;
  };
  Eigen::VectorXd x0(2), lo(2), hi(2);
  x0 << g0, h0;
  lo << -5.0, 0.0;
  hi << 5.0, 0.95;
  SimplexOptions opt;
  opt.max_eval = 2000;
  opt.ftol = 1e-18;
  opt.xtol = 1e-10;
  // Restarting with a fresh simplex rescues runs the h >= 0 clamp has
  // flattened against the boundary; step sizes shrink across restarts.
  SimplexResult fit;
  fit.x = x0;
  fit.value = std::numeric_limits<double>::infinity();
  for (double s : {0.05, 0.05, 0.01, 0.002}) {
    Eigen::VectorXd step(2);
    step << s, s;
    const auto round = minimize_simplex(objective, fit.x, step, lo, hi, opt);
    if (round.value < fit.value) fit = round;
    if (fit.value < 1e-20) break;
  }
  require(std::isfinite(fit.value), errc::numeric, "lmoment_match: ratio optimization failed");

  const double gh_eps = 1e-7;
  LMomentMatch out;
  out.sample = lm;
  out.objective = fit.value;
  out.boundary = fit.x[1] < gh_eps || fit.x[1] > 0.95 - gh_eps ||
                 std::fabs(fit.x[0]) > 5.0 - gh_eps;

  const auto pop = tgh_population_lmoments(fit.x[0], fit.x[1]);
  out.params.g = fit.x[0];
  out.params.h = fit.x[1];
  out.params.b = lm.l2 / pop.l2;
  out.params.a = lm.l1 - out.params.b * pop.l1;
  out.params.validate();
  return out;
}

LMomentMatch lmoment_match(const Eigen::VectorXd& y) {
  return lmoment_match_from(sample_lmoments(y));
}

}  // namespace tghf
