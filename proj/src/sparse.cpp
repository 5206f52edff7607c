#include "tghf/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "tghf/error.hpp"
#include "tghf/field.hpp"
#include "tghf/normal.hpp"
#include "tghf/optim.hpp"
#include "tghf/tghrf.hpp"

namespace tghf {

namespace {

constexpr double kPenalty = 1e300;
constexpr double kGMax = 5.0;
constexpr double kHMax = 0.9;

double site_dist(const Site& u, const Site& v) {
  const double dx = u.x - v.x, dy = u.y - v.y;
  return std::sqrt(dx * dx + dy * dy);
}

Eigen::VectorXd cov_to_design(const LocalState& state, const SiteSet& sites,
                              const Site& target) {
  Eigen::VectorXd c(static_cast<Eigen::Index>(state.design_ids.size()));
  for (std::size_t i = 0; i < state.design_ids.size(); ++i)
    c[static_cast<Eigen::Index>(i)] =
        kernel_value(site_dist(sites[static_cast<std::size_t>(state.design_ids[i])], target),
                     state.kernel);
  return c;
}

// Smallest eigenvalue of the design covariance through its factor: power
// iteration on C^-1. Feeds only the screening radius, so a rough value with
// a fixed iteration count is enough.
double min_eigenvalue(const Eigen::MatrixXd& chol, Eigen::Index j) {
  if (j == 0) return 1.0;
  const auto lower = chol.topLeftCorner(j, j).triangularView<Eigen::Lower>();
  Eigen::VectorXd x = Eigen::VectorXd::Ones(j) / std::sqrt(static_cast<double>(j));
  double inv_lambda = 1.0;
  for (int it = 0; it < 16; ++it) {
    Eigen::VectorXd ynew = lower.transpose().solve(lower.solve(x));
    inv_lambda = ynew.norm();
    if (!(inv_lambda > 0.0) || !std::isfinite(inv_lambda)) return 1e-12;
    x = ynew / inv_lambda;
  }
  return 1.0 / inv_lambda;
}

}  // namespace

LocalState local_state_start(const Site& s0, const ExpKernelParams& kernel) {
  kernel.validate();
  LocalState st;
  st.s0 = s0;
  st.kernel = kernel;
  st.beta_j = kernel_value(0.0, kernel);
  st.psi_j = 0.0;
  st.mu_j = 0.0;
  return st;
}

LocalState local_state_extend(const LocalState& state, int new_site, const SiteSet& sites,
                              const Eigen::VectorXd& eps) {
  require(new_site >= 0 && static_cast<std::size_t>(new_site) < sites.size(), errc::input,
          "local_state_extend: site index out of range");
  require(eps.size() == static_cast<Eigen::Index>(sites.size()), errc::input,
          "local_state_extend: residual vector size mismatch");
  for (const int id : state.design_ids)
    require(id != new_site, errc::input, "local_state_extend: site already in the design");

  const auto j = static_cast<Eigen::Index>(state.design_ids.size());
  const Site w = sites[static_cast<std::size_t>(new_site)];
  const Eigen::VectorXd cw = cov_to_design(state, sites, w);
  const double cww = kernel_value(0.0, state.kernel);

  Eigen::VectorXd l(j);
  if (j > 0)
    l = state.chol.topLeftCorner(j, j).triangularView<Eigen::Lower>().solve(cw);
  const double beta = cww - l.squaredNorm();
  require(beta > 1e-12 * cww, errc::decomposition,
          "local_state_extend: conditional variance vanished (duplicate or "
          "near-duplicate site)");
  const double diag = std::sqrt(beta);

  LocalState next = state;
  next.design_ids.push_back(new_site);
  next.chol.setZero(j + 1, j + 1);
  if (j > 0) {
    next.chol.topLeftCorner(j, j) = state.chol.topLeftCorner(j, j);
    next.chol.row(j).head(j) = l;
  }
  next.chol(j, j) = diag;

  const double eps_w = eps[new_site];
  double hscal = 0.0;
  next.cinv_eps.resize(j + 1);
  if (j > 0) {
    hscal = -cw.dot(state.cinv_eps) / beta;
    const Eigen::VectorXd v = state.chol.topLeftCorner(j, j)
                                  .triangularView<Eigen::Lower>()
                                  .transpose()
                                  .solve(l);
    const Eigen::VectorXd gvec = -v / beta;
    next.cinv_eps.head(j) = state.cinv_eps + gvec * (hscal * beta + eps_w);
  }
  next.cinv_eps[j] = hscal + eps_w / beta;

  const double c0w = kernel_value(site_dist(state.s0, w), state.kernel);
  const double f0_new = (c0w - l.dot(state.f0)) / diag;
  next.f0.resize(j + 1);
  if (j > 0) next.f0.head(j) = state.f0;
  next.f0[j] = f0_new;

  // gamma is the conditional covariance between s0 and the new site given
  // the old design; its square over beta is exactly the variance reduction.
  const double gamma = diag * f0_new;
  next.beta_j = std::max(state.beta_j - gamma * gamma / beta, 0.0);
  next.psi_j = state.psi_j + beta * hscal * hscal + 2.0 * eps_w * hscal + eps_w * eps_w / beta;
  next.mu_j = state.mu_j + gamma * (hscal + eps_w / beta);
  return next;
}

double mspe_reduction(const LocalState& state, int candidate, const SiteSet& sites) {
  require(candidate >= 0 && static_cast<std::size_t>(candidate) < sites.size(), errc::input,
          "mspe_reduction: site index out of range");
  for (const int id : state.design_ids)
    require(id != candidate, errc::input, "mspe_reduction: candidate already in the design");

  const auto j = static_cast<Eigen::Index>(state.design_ids.size());
  const Site u = sites[static_cast<std::size_t>(candidate)];
  const Eigen::VectorXd cu = cov_to_design(state, sites, u);
  const double cuu = kernel_value(0.0, state.kernel);
  Eigen::VectorXd fu(j);
  if (j > 0)
    fu = state.chol.topLeftCorner(j, j).triangularView<Eigen::Lower>().solve(cu);
  const double beta_u = cuu - fu.squaredNorm();
  if (beta_u <= 1e-12 * cuu) return 0.0;  // footprint spanned by the design
  const double c0u = kernel_value(site_dist(state.s0, u), state.kernel);
  const double gamma = c0u - fu.dot(state.f0);
  return gamma * gamma / beta_u;
}

GreedyResult greedy_local_design(const Site& s0, const SiteSet& sites,
                                 const ExpKernelParams& kernel, const GreedyOptions& opt) {
  kernel.validate();
  require(opt.budget >= 1, errc::input, "greedy_local_design: budget must be >= 1");
  require(opt.pool >= 1, errc::input, "greedy_local_design: pool must be >= 1");

  const double c00 = kernel_value(0.0, kernel);
  const double threshold = opt.threshold < 0.0 ? 1e-6 * c00 : opt.threshold;

  GreedyResult out;
  std::size_t n_cand = 0;
  for (std::size_t i = 0; i < sites.size(); ++i)
    if (sites[i].id != s0.id) ++n_cand;
  if (n_cand == 0) {
    out.warnings.push_back("greedy_local_design: no candidate sites");
    return out;
  }
  const std::vector<int> order = knn(sites, s0, static_cast<int>(n_cand));

  LocalState st = local_state_start(s0, kernel);
  const Eigen::VectorXd zero_eps =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sites.size()));
  std::size_t cursor = 0;

  // Nearest-neighbor seed; coincident sites are skipped, not fatal.
  const int seed = std::min({opt.seed_size, opt.budget, static_cast<int>(n_cand)});
  while (static_cast<int>(st.design_ids.size()) < seed && cursor < order.size()) {
    const int idx = order[cursor++];
    try {
      st = local_state_extend(st, idx, sites, zero_eps);
    } catch (const error&) {
      out.warnings.push_back("greedy_local_design: skipped a (near-)duplicate site");
    }
  }

  // Pool entries cache the forward solve of their covariance against the
  // design factor, so each greedy step updates every candidate in O(1) per
  // design row instead of resolving from scratch.
  struct Cand {
    int site = -1;
    Eigen::VectorXd f;
    double beta = 0.0;
    double gamma = 0.0;
  };
  std::vector<Cand> pool;
  pool.reserve(static_cast<std::size_t>(opt.pool));
  auto admit = [&](int idx) {
    Cand cd;
    cd.site = idx;
    const Site u = sites[static_cast<std::size_t>(idx)];
    const Eigen::VectorXd cu = cov_to_design(st, sites, u);
    const auto j = static_cast<Eigen::Index>(st.design_ids.size());
    cd.f.resize(j);
    if (j > 0)
      cd.f = st.chol.topLeftCorner(j, j).triangularView<Eigen::Lower>().solve(cu);
    cd.beta = c00 - cd.f.squaredNorm();
    cd.gamma = kernel_value(site_dist(s0, u), kernel) - cd.f.dot(st.f0);
    pool.push_back(std::move(cd));
  };

  // The threshold stop is suppressed until the design is large enough to
  // identify the local likelihood; ties at zero reduction fall to the
  // nearest candidate because the pool is scanned in distance order.
  const int floor_size =
      std::min({std::max(opt.min_size, seed), opt.budget, static_cast<int>(n_cand)});

  while (static_cast<int>(st.design_ids.size()) < opt.budget) {
    while (static_cast<int>(pool.size()) < opt.pool && cursor < order.size())
      admit(order[cursor++]);
    if (pool.empty()) {
      out.warnings.push_back("greedy_local_design: candidate set exhausted");
      break;
    }
    const bool at_floor = static_cast<int>(st.design_ids.size()) >= floor_size;

    auto reduction = [&](const Cand& cd) {
      return cd.beta <= 1e-12 * c00 ? 0.0 : cd.gamma * cd.gamma / cd.beta;
    };
    double delta = 0.0;
    for (const Cand& cd : pool) delta = std::max(delta, reduction(cd));
    if (at_floor && delta < threshold) break;

    // Screening radius: probit of the best reduction normalized by the
    // design's leverage on s0 and its smallest eigenvalue. When it screens
    // out every candidate, fall back to the whole pool.
    const auto j = static_cast<Eigen::Index>(st.design_ids.size());
    int picked = -1;
    double picked_r = -1.0;
    if (j > 0) {
      const Eigen::VectorXd v0 = st.chol.topLeftCorner(j, j)
                                     .triangularView<Eigen::Lower>()
                                     .transpose()
                                     .solve(st.f0);
      const double lever = 1.0 + std::sqrt(static_cast<double>(j)) * v0.norm();
      const double lmin = min_eigenvalue(st.chol, j);
      const double denom =
          lever * lever + static_cast<double>(j) * delta / std::max(lmin, 1e-300);
      const double arg = std::sqrt(std::max(delta / denom, 0.0));
      const double z = norm_quantile(std::clamp(arg, 1e-12, 1.0 - 1e-12));
      if (z > 0.0) {
        for (const Cand& cd : pool) {
          const Site u = sites[static_cast<std::size_t>(cd.site)];
          bool inside = site_dist(u, s0) <= z;
          for (std::size_t k = 0; !inside && k < st.design_ids.size(); ++k)
            inside = site_dist(u, sites[static_cast<std::size_t>(st.design_ids[k])]) <= z;
          if (!inside) continue;
          const double r = reduction(cd);
          if (r > picked_r) {
            picked_r = r;
            picked = cd.site;
          }
        }
      }
    }
    if (picked < 0) {
      for (const Cand& cd : pool) {
        const double r = reduction(cd);
        if (r > picked_r) {
          picked_r = r;
          picked = cd.site;
        }
      }
    }
    if (at_floor && picked_r < threshold) break;

    const auto picked_it =
        std::find_if(pool.begin(), pool.end(), [&](const Cand& cd) { return cd.site == picked; });
    try {
      st = local_state_extend(st, picked, sites, zero_eps);
    } catch (const error&) {
      out.warnings.push_back("greedy_local_design: dropped an ill-conditioned candidate");
      pool.erase(picked_it);
      continue;
    }
    pool.erase(picked_it);

    // One appended design row updates every cached solve in O(j).
    const auto jn = static_cast<Eigen::Index>(st.design_ids.size()) - 1;
    const Eigen::VectorXd lrow = st.chol.row(jn).head(jn).transpose();
    const double diag = st.chol(jn, jn);
    const Site wsite = sites[static_cast<std::size_t>(picked)];
    const double f0_new = st.f0[jn];
    for (Cand& cd : pool) {
      const Site u = sites[static_cast<std::size_t>(cd.site)];
      const double cuw = kernel_value(site_dist(u, wsite), kernel);
      const double entry = (cuw - lrow.dot(cd.f)) / diag;
      cd.f.conservativeResize(jn + 1);
      cd.f[jn] = entry;
      cd.beta -= entry * entry;
      cd.gamma -= entry * f0_new;
    }
  }

  out.design = st.design_ids;
  return out;
}

LocalFit fit_local_tgh(const Site& s0, const std::vector<int>& design, const SiteSet& sites,
                       const Eigen::VectorXd& y, const LocalFitOptions& opt) {
  require(y.size() == static_cast<Eigen::Index>(sites.size()), errc::input,
          "fit_local_tgh: data vector size mismatch");
  require(design.size() >= 30, errc::input,
          "fit_local_tgh: design must hold at least 30 sites");

  const auto j = static_cast<Eigen::Index>(design.size());
  const SiteSet ds = sites.subset(design);
  Eigen::VectorXd yd(j);
  for (Eigen::Index i = 0; i < j; ++i) yd[i] = y[design[static_cast<std::size_t>(i)]];

  const double spread = yd.maxCoeff() - yd.minCoeff();
  require(spread > 1e-12 * (1.0 + std::fabs(yd.maxCoeff())), errc::fit,
          "fit_local_tgh: zero variance in design data");

  TghRfModel init = default_init(ds, yd);
  if (opt.r_init > 0.0) init.kernel.r = opt.r_init;
  if (opt.fix_g) init.params.g = std::clamp(opt.g0, -kGMax, kGMax);
  if (opt.fix_h) init.params.h = std::clamp(opt.h0, 0.0, kHMax);

  const double dmax = pairwise_distances(ds).maxCoeff();
  const double r_lo = std::max(1e-3 * dmax, 1e-9);
  const double r_hi = 10.0 * dmax;
  const double logb0 = std::log(init.params.b);
  const double span = yd.maxCoeff() - yd.minCoeff();

  // Free coordinates: a and log b always, then g, h, log r unless frozen.
  std::vector<int> free_idx = {0, 1};
  if (!opt.fix_g) free_idx.push_back(2);
  if (!opt.fix_h) free_idx.push_back(3);
  if (!opt.fix_r) free_idx.push_back(4);
  const double full_lo[5] = {yd.minCoeff() - span, logb0 - 6.0, -kGMax, 0.0, std::log(r_lo)};
  const double full_hi[5] = {yd.maxCoeff() + span, logb0 + 6.0, kGMax, kHMax, std::log(r_hi)};
  const double full_step[5] = {0.1 * init.params.b, 0.1, 0.05, 0.02, 0.3};
  double full_x0[5] = {init.params.a, logb0, init.params.g, init.params.h,
                       std::log(std::clamp(init.kernel.r, r_lo, r_hi))};

  const auto nfree = static_cast<Eigen::Index>(free_idx.size());
  Eigen::VectorXd x0(nfree), lo(nfree), hi(nfree), step(nfree);
  for (Eigen::Index k = 0; k < nfree; ++k) {
    const int f = free_idx[static_cast<std::size_t>(k)];
    x0[k] = std::clamp(full_x0[f], full_lo[f], full_hi[f]);
    lo[k] = full_lo[f];
    hi[k] = full_hi[f];
    step[k] = full_step[f];
  }

  auto unpack = [&](const Eigen::VectorXd& x, TghParams& p, double& r) {
    p = init.params;
    r = opt.fix_r ? std::clamp(opt.r_init > 0.0 ? opt.r_init : init.kernel.r, r_lo, r_hi)
                  : 0.0;
    for (Eigen::Index k = 0; k < nfree; ++k) {
      switch (free_idx[static_cast<std::size_t>(k)]) {
        case 0: p.a = x[k]; break;
        case 1: p.b = std::exp(x[k]); break;
        case 2: p.g = x[k]; break;
        case 3: p.h = x[k]; break;
        case 4: r = std::exp(x[k]); break;
      }
    }
  };

  auto objective = [&](const Eigen::VectorXd& x) {
    TghParams p{};
    double r = 0.0;
    unpack(x, p, r);
    try {
      const double ll = tgh_rf_loglik(p, ExpKernelParams{1.0, 0.0, r}, ds, yd);
      return std::isfinite(ll) ? -ll : kPenalty;
    } catch (const error&) {
      return kPenalty;
    }
  };

  const SimplexResult res = minimize_simplex(objective, x0, step, lo, hi,
                                             SimplexOptions{800, 1e-9, 1e-9});

  LocalFit out;
  out.site = s0;
  out.design_size = static_cast<int>(j);
  if (!std::isfinite(res.value) || res.value >= 0.5 * kPenalty) {
    out.ok = false;
    out.message = "local likelihood optimization failed";
    out.params = init.params;
    out.mle = init.params;
    out.lengthscale = init.kernel.r;
    return out;
  }

  TghParams mle{};
  double r_hat = 0.0;
  unpack(res.x, mle, r_hat);
  out.mle = mle;
  out.lengthscale = r_hat;
  out.params = mle;

  // Conditional location and scale at s0: run the recursions over the
  // design in its own order with unit-scale latent residuals, then push the
  // latent mean through the transform and rescale the Gaussian variance.
  try {
    const Eigen::VectorXd z = transform_to_z(yd, mle);
    const ExpKernelParams corr{1.0, 0.0, r_hat};
    LocalState st = local_state_start(s0, corr);
    for (Eigen::Index i = 0; i < j; ++i)
      st = local_state_extend(st, static_cast<int>(i), ds, z);
    const double dof = static_cast<double>(j) - 2.0;
    out.params.a = mle.a + mle.b * tau_gh(st.mu_j, mle.g, mle.h);
    out.params.b = mle.b * std::sqrt(std::max(st.psi_j / dof * st.beta_j, 0.0));
  } catch (const error& e) {
    out.ok = false;
    out.message = e.what();
    out.params = mle;
  }
  return out;
}

namespace {

struct Surface {
  std::vector<double> log_r, g, h;
  std::vector<std::uint8_t> ok;
};

// Gaussian-weighted average of the per-site surfaces over sound fits within
// three bandwidths. A site with no sound neighbor keeps nothing (flag stays).
bool smooth_at(const SiteSet& sites, const Surface& surf, std::size_t k, double bw,
               bool include_self, double& log_r, double& g, double& h) {
  const Site& s0 = sites[k];
  double wsum = 0.0, acc_r = 0.0, acc_g = 0.0, acc_h = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (!surf.ok[i]) continue;
    if (!include_self && i == k) continue;
    const double d = site_dist(sites[i], s0);
    if (d > 3.0 * bw) continue;
    const double w = std::exp(-0.5 * (d / bw) * (d / bw));
    wsum += w;
    acc_r += w * surf.log_r[i];
    acc_g += w * surf.g[i];
    acc_h += w * surf.h[i];
  }
  if (wsum <= 0.0) return false;
  log_r = acc_r / wsum;
  g = acc_g / wsum;
  h = acc_h / wsum;
  return true;
}

}  // namespace

SparseFieldResult fit_sparse_field(const FieldFrame& frame, const SparseFieldOptions& opt,
                                   const Parallel& par) {
  frame.validate();
  require(opt.budget >= 30, errc::input, "fit_sparse_field: budget must be >= 30");

  std::vector<int> obs;
  for (int i = 0; i < frame.grid.count(); ++i)
    if (frame.mask.empty() || frame.mask[static_cast<std::size_t>(i)]) obs.push_back(i);
  const std::size_t n_obs = obs.size();
  require(n_obs >= 31, errc::input, "fit_sparse_field: needs at least 31 observed sites");

  const SiteSet all_sites = frame.grid.sites();
  const SiteSet obs_sites = all_sites.subset(obs);
  Eigen::VectorXd y_obs(static_cast<Eigen::Index>(n_obs));
  for (std::size_t k = 0; k < n_obs; ++k)
    y_obs[static_cast<Eigen::Index>(k)] = frame.values[obs[k]];

  const int budget = std::min(opt.budget, static_cast<int>(n_obs) - 1);

  SparseFieldResult out;
  const VariogramFit vfit =
      robust_variogram_wls(obs_sites, (y_obs.array() - y_obs.mean()).matrix());
  out.start_lengthscale = vfit.params.r;
  const ExpKernelParams design_kernel{1.0, 0.0, vfit.params.r};

  GreedyOptions gopt;
  gopt.budget = budget;
  gopt.pool = opt.pool;
  gopt.seed_size = opt.seed_size;
  // A budget covering every observed site asks for exact local designs, so
  // the reduction stop is disabled and each design exhausts the candidates.
  gopt.threshold = opt.budget >= n_obs ? 0.0 : opt.threshold;
  // Smooth fields can satisfy the reduction threshold before the local
  // likelihood is identifiable; pad the design to the fit's minimum first.
  gopt.min_size = 30;

  std::vector<LocalFit> fits(n_obs);
  auto fit_one = [&](std::size_t k, const ExpKernelParams& kern, const LocalFitOptions& lopt) {
    const Site s0 = obs_sites[k];
    try {
      const GreedyResult gd = greedy_local_design(s0, obs_sites, kern, gopt);
      if (gd.design.size() < 30) {
        LocalFit bad;
        bad.site = s0;
        bad.ok = false;
        bad.message = "local design too small";
        bad.design_size = static_cast<int>(gd.design.size());
        return bad;
      }
      return fit_local_tgh(s0, gd.design, obs_sites, y_obs, lopt);
    } catch (const error& e) {
      LocalFit bad;
      bad.site = s0;
      bad.ok = false;
      bad.message = e.what();
      return bad;
    }
  };

  LocalFitOptions first_pass;
  first_pass.r_init = vfit.params.r;
  par.for_each(n_obs, [&](std::size_t k) { fits[k] = fit_one(k, design_kernel, first_pass); });

  auto failures = [&]() {
    std::size_t bad = 0;
    for (const LocalFit& f : fits)
      if (!f.ok) ++bad;
    return bad;
  };
  require(2 * failures() <= n_obs, errc::fit,
          "fit_sparse_field: more than half of the local fits failed");

  if (opt.smooth) {
    Surface surf;
    surf.log_r.resize(n_obs, 0.0);
    surf.g.resize(n_obs, 0.0);
    surf.h.resize(n_obs, 0.0);
    surf.ok.resize(n_obs, 0);
    for (std::size_t k = 0; k < n_obs; ++k) {
      if (!fits[k].ok) continue;
      surf.ok[k] = 1;
      surf.log_r[k] = std::log(fits[k].lengthscale);
      surf.g[k] = fits[k].mle.g;
      surf.h[k] = fits[k].mle.h;
    }
    const double bw = opt.bandwidth_cells * frame.grid.cell;

    std::vector<LocalFit> refined(n_obs);
    par.for_each(n_obs, [&](std::size_t k) {
      double log_r = 0.0, g = 0.0, h = 0.0;
      // Failed sites borrow their neighbors' surfaces for a rescue attempt.
      if (!smooth_at(obs_sites, surf, k, bw, surf.ok[k] != 0, log_r, g, h)) {
        refined[k] = fits[k];
        return;
      }
      LocalFitOptions lopt;
      lopt.r_init = std::exp(log_r);
      lopt.fix_g = lopt.fix_h = lopt.fix_r = true;
      lopt.g0 = g;
      lopt.h0 = h;
      refined[k] = fit_one(k, ExpKernelParams{1.0, 0.0, lopt.r_init}, lopt);
    });
    fits = std::move(refined);
    require(2 * failures() <= n_obs, errc::fit,
            "fit_sparse_field: more than half of the local fits failed");
  }

  out.fits.resize(static_cast<std::size_t>(frame.grid.count()));
  for (int i = 0; i < frame.grid.count(); ++i) {
    out.fits[static_cast<std::size_t>(i)].site = frame.grid.site_at(i);
    out.fits[static_cast<std::size_t>(i)].ok = false;
    out.fits[static_cast<std::size_t>(i)].message = "masked";
  }
  for (std::size_t k = 0; k < n_obs; ++k) out.fits[static_cast<std::size_t>(obs[k])] = fits[k];
  return out;
}

}  // namespace tghf
