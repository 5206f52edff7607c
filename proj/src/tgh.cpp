#include "tghf/tgh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tghf/normal.hpp"

namespace tghf {

namespace {

constexpr double kGTiny = 1e-12;      // below this |g| use the g -> 0 limit
constexpr double kBracket = 40.0;     // |z| beyond this is outside any practical inverse
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// tau(z) * phi(z) evaluated without overflowing the separate factors:
// ((exp(gz) - 1)/g) * exp((h-1) z^2/2) / sqrt(2 pi). For small |gz| the
// exp difference cancels catastrophically, so that branch goes through
// expm1 (safe to scale by exp(q) <= 1 since h < 1).
double tau_times_phi(double z, double g, double h) {
  const double q = 0.5 * (h - 1.0) * z * z;
  if (std::fabs(g) < kGTiny) return z * std::exp(q) * kInvSqrt2Pi;
  if (std::fabs(g * z) < 1.0) return std::expm1(g * z) / g * std::exp(q) * kInvSqrt2Pi;
  return (std::exp(g * z + q) - std::exp(q)) / g * kInvSqrt2Pi;
}

// 15-point Kronrod rule with embedded 7-point Gauss error estimate.
struct GkResult {
  double value;
  double error;
};

GkResult gk15(const double* fs) {
  static const double wk[8] = {0.022935322010529224963732008058970,
                               0.063092092629978553290700663189204,
                               0.104790010322250183839876322541518,
                               0.140653259715525918745189590510238,
                               0.169004726639267902826583426598550,
                               0.190350578064785409913256402421014,
                               0.204432940075298892414161999234649,
                               0.209482141084727828012999174891714};
  static const double wg[4] = {0.129484966168869693270611432679082,
                               0.279705391489276667901467771423780,
                               0.381830050505118944950369775488975,
                               0.417959183673469387755102040816327};
  double k = wk[7] * fs[7];
  double g = wg[3] * fs[7];
  for (int i = 0; i < 7; ++i) {
    k += wk[i] * (fs[i] + fs[14 - i]);
    if (i % 2 == 1) g += wg[i / 2] * (fs[i] + fs[14 - i]);
  }
  return {k, std::fabs(k - g)};
}

template <typename F>
GkResult gk15_on(const F& f, double a, double b) {
  static const double nodes[8] = {0.991455371120812639206854697526329,
                                  0.949107912342758524526189684047851,
                                  0.864864423359769072789712788640926,
                                  0.741531185599394439863864773280788,
                                  0.586087235467691130294144838258730,
                                  0.405845151377397166906606412076961,
                                  0.207784955007898467600689403773245,
                                  0.0};
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double xs[15], fs[15];
  for (int i = 0; i < 7; ++i) {
    xs[i] = mid - half * nodes[i];
    xs[14 - i] = mid + half * nodes[i];
  }
  xs[7] = mid;
  for (int i = 0; i < 15; ++i) fs[i] = f(xs[i]);
  GkResult r = gk15(fs);
  r.value *= half;
  r.error *= half;
  return r;
}

template <typename F>
double adaptive_quadrature(const F& f, double a, double b, double abs_tol, double rel_tol) {
  struct Panel {
    double a, b, value, error;
  };
  std::vector<Panel> panels;
  const int initial = 8;
  double total = 0.0, total_err = 0.0;
  for (int i = 0; i < initial; ++i) {
    const double pa = a + (b - a) * i / initial;
    const double pb = a + (b - a) * (i + 1) / initial;
    const GkResult r = gk15_on(f, pa, pb);
    panels.push_back({pa, pb, r.value, r.error});
    total += r.value;
    total_err += r.error;
  }
  int splits = 0;
  const int max_splits = 4000;
  while (total_err > abs_tol + rel_tol * std::fabs(total)) {
    require(splits++ < max_splits, errc::numeric, "quadrature did not converge");
    auto worst = std::max_element(panels.begin(), panels.end(),
                                  [](const Panel& x, const Panel& y) { return x.error < y.error; });
    const Panel p = *worst;
    panels.erase(worst);
    const double mid = 0.5 * (p.a + p.b);
    const GkResult left = gk15_on(f, p.a, mid);
    const GkResult right = gk15_on(f, mid, p.b);
    total += left.value + right.value - p.value;
    total_err += left.error + right.error - p.error;
    panels.push_back({p.a, mid, left.value, left.error});
    panels.push_back({mid, p.b, right.value, right.error});
  }
  require(std::isfinite(total), errc::numeric, "quadrature produced non-finite value");
  return total;
}

}  // namespace

double tau_gh(double z, double g, double h) {
  require(std::isfinite(z), errc::input, "tau_gh: z must be finite");
  const double bump = std::exp(0.5 * h * z * z);
  if (std::fabs(g) < kGTiny) return z * bump;
  return std::expm1(g * z) / g * bump;
}

double tau_gh_log_deriv(double z, double g, double h) {
  const double q = 0.5 * h * z * z;
  if (std::fabs(g) < kGTiny) return q + std::log1p(h * z * z);
  const double t = g * z;
  const double s = h * z / g;  // sign(s) = sign(t), so both branches stay positive
  if (t > 0.0) return q + t + std::log1p(s * (-std::expm1(-t)));
  return q + std::log(std::exp(t) + s * std::expm1(t));
}

double tau_gh_deriv(double z, double g, double h) { return std::exp(tau_gh_log_deriv(z, g, h)); }

double tau_gh_inv(double y, double g, double h) {
  require(h >= 0.0, errc::domain, "tau_gh_inv: requires h >= 0 (monotone branch)");
  require(std::isfinite(y), errc::input, "tau_gh_inv: y must be finite");
  if (y == 0.0) return 0.0;

  if (h == 0.0 && std::fabs(g) >= kGTiny) {
    // Closed form; range of tau is bounded on one side when h = 0.
    const double arg = g * y;
    require(arg > -1.0, errc::numeric,
            "tau_gh_inv: value outside the transform range (h=0, g=" + std::to_string(g) + ")");
    return std::log1p(arg) / g;
  }

  const double scale = std::max(1.0, std::fabs(y));
  const double tol = 1e-12 * scale;
  auto f = [&](double z) { return tau_gh(z, g, h) - y; };

  double z = (y > 0.0 ? 1.0 : -1.0) *
             std::min(std::fabs(y), std::sqrt(2.0 * std::log1p(std::fabs(y)) / std::max(h, 1e-8)));
  z = std::clamp(z, -kBracket, kBracket);

  // Establish a sign-changing bracket around the initial guess.
  double lo, hi;
  double fz = f(z);
  if (fz == 0.0) return z;
  if (fz < 0.0) {
    lo = z;
    hi = z;
    double step = 1.0;
    while (hi < kBracket) {
      hi = std::min(hi + step, kBracket);
      if (f(hi) >= 0.0) break;
      lo = hi;
      step *= 2.0;
    }
    require(f(hi) >= 0.0, errc::numeric, "tau_gh_inv: value outside the transform range");
  } else {
    hi = z;
    lo = z;
    double step = 1.0;
    while (lo > -kBracket) {
      lo = std::max(lo - step, -kBracket);
      if (f(lo) <= 0.0) break;
      hi = lo;
      step *= 2.0;
    }
    require(f(lo) <= 0.0, errc::numeric, "tau_gh_inv: value outside the transform range");
  }

  for (int it = 0; it < 200; ++it) {
    fz = f(z);
    if (std::fabs(fz) <= tol) return z;
    if (fz > 0.0) hi = z; else lo = z;
    const double deriv = tau_gh_deriv(z, g, h);
    double znew = z - fz / deriv;
    if (!(znew > lo && znew < hi) || !std::isfinite(znew)) znew = 0.5 * (lo + hi);
    if (std::fabs(znew - z) < 1e-16 * std::max(1.0, std::fabs(z))) {
      z = znew;
      break;
    }
    z = znew;
  }
  require(std::fabs(f(z)) <= 1e-10 * scale, errc::numeric,
          "tau_gh_inv: Newton iteration did not converge in 200 steps");
  return z;
}

double tgh_quantile(double u, const TghParams& params) {
  params.validate();
  require(u > 0.0 && u < 1.0, errc::input, "tgh_quantile: u must lie in (0,1)");
  return params.a + params.b * tau_gh(norm_quantile(u), params.g, params.h);
}

double tgh_log_pdf(double y, const TghParams& params) {
  params.validate();
  require(params.h >= 0.0, errc::domain, "tgh_log_pdf: requires h >= 0");
  const double z = tau_gh_inv((y - params.a) / params.b, params.g, params.h);
  return norm_log_pdf(z) - std::log(params.b) - tau_gh_log_deriv(z, params.g, params.h);
}

PopLMoments tgh_population_lmoments(double g, double h) {
  require(h >= 0.0 && h < 1.0, errc::domain,
          "tgh_population_lmoments: requires h in [0,1) for integrability");

  // Integrate the quantile function against the shifted Legendre weights,
  // substituting u = Phi(z); the integrand tau(z) P_m(Phi(z)) phi(z) decays
  // like exp(g z - (1-h) z^2 / 2).
  const double span =
      1.2 * (std::fabs(g) + std::sqrt(g * g + 120.0 * (1.0 - h))) / (1.0 - h) + 2.0;
  const double zmax = std::min(span, 200.0);

  auto moment = [&](int m) {
    auto f = [&](double z) {
      const double base = tau_times_phi(z, g, h);
      if (m == 0) return base;
      const double u = norm_cdf(z);
      switch (m) {
        case 1: return base * (2.0 * u - 1.0);
        case 2: return base * ((6.0 * u - 6.0) * u + 1.0);
        default: return base * (((20.0 * u - 30.0) * u + 12.0) * u - 1.0);
      }
    };
    return adaptive_quadrature(f, -zmax, zmax, 1e-13, 1e-12);
  };

  PopLMoments out;
  out.l1 = moment(0);
  out.l2 = moment(1);
  out.l3 = moment(2);
  out.l4 = moment(3);
  require(out.l2 > 0.0, errc::numeric, "tgh_population_lmoments: non-positive l2");
  out.tau3 = out.l3 / out.l2;
  out.tau4 = out.l4 / out.l2;
  return out;
}

}  // namespace tghf
