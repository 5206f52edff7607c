#include "tghf/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "tghf/error.hpp"

namespace tghf {

namespace {

Eigen::VectorXd clamp_box(Eigen::VectorXd x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
  return x;
}

}  // namespace

SimplexResult minimize_simplex(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                               const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               const SimplexOptions& opt) {
  const Eigen::Index n = x0.size();
  require(n >= 1, errc::input, "minimize_simplex: empty parameter vector");
  require(step.size() == n && lo.size() == n && hi.size() == n, errc::input,
          "minimize_simplex: inconsistent dimensions");
  for (Eigen::Index i = 0; i < n; ++i)
    require(lo[i] <= hi[i], errc::input, "minimize_simplex: lo > hi");

  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  // Initial simplex: x0 plus one perturbed vertex per dimension. If a
  // perturbation would leave the box, flip its direction.
  std::vector<Eigen::VectorXd> xs;
  xs.push_back(clamp_box(x0, lo, hi));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd v = xs[0];
    double s = (step[i] != 0.0) ? step[i] : 0.1 * std::max(1.0, std::fabs(v[i]));
    if (v[i] + s > hi[i]) s = -s;
    v[i] += s;
    xs.push_back(clamp_box(v, lo, hi));
  }
  std::vector<double> fs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) fs[i] = eval(xs[i]);

  std::vector<std::size_t> order(xs.size());
  auto sort_simplex = [&]() {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
  };

  const double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;
  bool converged = false;

  while (evals < opt.max_eval) {
    sort_simplex();
    const std::size_t best = order.front(), worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];

    double fspread = fs[worst] - fs[best];
    double xspread = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i)
      xspread = std::max(xspread, (xs[order[i]] - xs[best]).cwiseAbs().maxCoeff());
    if (fspread <= opt.ftol * (1.0 + std::fabs(fs[best])) && xspread <= opt.xtol) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += xs[order[i]];
    centroid /= static_cast<double>(xs.size() - 1);

    const Eigen::VectorXd xr = clamp_box(centroid + alpha * (centroid - xs[worst]), lo, hi);
    const double fr = eval(xr);

    if (fr < fs[best]) {
      const Eigen::VectorXd xe = clamp_box(centroid + gamma * (xr - centroid), lo, hi);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[worst] = xe;
        fs[worst] = fe;
      } else {
        xs[worst] = xr;
        fs[worst] = fr;
      }
    } else if (fr < fs[second_worst]) {
      xs[worst] = xr;
      fs[worst] = fr;
    } else {
      const bool outside = fr < fs[worst];
      const Eigen::VectorXd base = outside ? xr : xs[worst];
      const Eigen::VectorXd xc = clamp_box(centroid + rho * (base - centroid), lo, hi);
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[worst])) {
        xs[worst] = xc;
        fs[worst] = fc;
      } else {
        for (std::size_t i = 1; i < order.size(); ++i) {
          const std::size_t j = order[i];
          xs[j] = clamp_box(xs[best] + shrink * (xs[j] - xs[best]), lo, hi);
          fs[j] = eval(xs[j]);
          if (evals >= opt.max_eval) break;
        }
      }
    }
  }

  sort_simplex();
  SimplexResult out;
  out.x = xs[order.front()];
  out.value = fs[order.front()];
  out.evals = evals;
  out.converged = converged;
  return out;
}

BrentResult minimize_brent(const std::function<double(double)>& f, double lo, double hi,
                           double tol, int max_iter) {
  require(lo < hi, errc::input, "minimize_brent: empty interval");
  const double gold = 0.3819660112501051;
  double a = lo, b = hi;
  double x = a + gold * (b - a), w = x, v = x;
  int evals = 0;
  auto eval = [&](double t) {
    ++evals;
    const double val = f(t);
    return std::isnan(val) ? std::numeric_limits<double>::infinity() : val;
  };
  double fx = eval(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    const double m = 0.5 * (a + b);
    const double t1 = tol * std::fabs(x) + 1e-14;
    const double t2 = 2.0 * t1;
    if (std::fabs(x - m) <= t2 - 0.5 * (b - a)) {
      converged = true;
      break;
    }
    double u;
    bool parabolic = false;
    if (std::fabs(e) > t1) {
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      const double e_old = e;
      e = d;
      if (std::fabs(p) < std::fabs(0.5 * q * e_old) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        u = x + d;
        if (u - a < t2 || b - u < t2) d = (x < m) ? t1 : -t1;
        parabolic = true;
      }
    }
    if (!parabolic) {
      e = (x < m) ? b - x : a - x;
      d = gold * e;
    }
    u = (std::fabs(d) >= t1) ? x + d : x + ((d > 0.0) ? t1 : -t1);
    const double fu = eval(u);
    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  BrentResult out;
  out.x = x;
  out.value = fx;
  out.evals = evals;
  out.converged = converged;
  return out;
}

}  // namespace tghf
