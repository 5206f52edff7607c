#include "tghf/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "tghf/error.hpp"
#include "tghf/rng.hpp"

namespace tghf {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Run {
  std::vector<int> labels;
  Eigen::MatrixXd centers;
  double inertia = std::numeric_limits<double>::infinity();
};

int nearest_center(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centers, Eigen::Index i,
                   double* dist2 = nullptr) {
  int best = 0;
  double bd = (x.row(i) - centers.row(0)).squaredNorm();
  for (Eigen::Index c = 1; c < centers.rows(); ++c) {
    const double d = (x.row(i) - centers.row(c)).squaredNorm();
    if (d < bd) {
      bd = d;
      best = static_cast<int>(c);
    }
  }
  if (dist2 != nullptr) *dist2 = bd;
  return best;
}

// kmeans++ seeding: first center uniform, then proportional to squared
// distance from the chosen set.
Eigen::MatrixXd seed_centers(const Eigen::MatrixXd& x, int k, CounterRng& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  const auto first = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n));
  centers.row(0) = x.row(std::min(first, n - 1));

  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (x.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (; pick < n - 1; ++pick) {
        target -= d2[pick];
        if (target <= 0.0) break;
      }
    } else {
      pick = std::min(static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n)), n - 1);
    }
    centers.row(c) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (x.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

Run lloyd(const Eigen::MatrixXd& x, int k, CounterRng rng, int max_iter) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Run run;
  run.centers = seed_centers(x, k, rng);
  run.labels.assign(static_cast<std::size_t>(n), -1);

  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double d2 = 0.0;
      const int c = nearest_center(x, run.centers, i, &d2);
      if (c != run.labels[static_cast<std::size_t>(i)]) changed = true;
      run.labels[static_cast<std::size_t>(i)] = c;
      inertia += d2;
    }
    require(inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12, errc::numeric,
            "kmeans: inertia increased across an iteration");
    prev_inertia = inertia;
    run.inertia = inertia;
    if (!changed && iter > 0) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(run.labels[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        run.centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: restart it at the point farthest from its own
      // center, claiming that point so a second empty cluster picks the
      // next one.
      Eigen::Index far = 0;
      double fd = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int li = run.labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(li)] <= 1) continue;
        const double dist = (x.row(i) - run.centers.row(li)).squaredNorm();
        if (dist > fd) {
          fd = dist;
          far = i;
        }
      }
      const int old = run.labels[static_cast<std::size_t>(far)];
      --counts[static_cast<std::size_t>(old)];
      sums.row(old) -= x.row(far);
      if (counts[static_cast<std::size_t>(old)] > 0)
        run.centers.row(old) = sums.row(old) / static_cast<double>(counts[static_cast<std::size_t>(old)]);
      run.centers.row(c) = x.row(far);
      run.labels[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      sums.row(c) = x.row(far);
      changed = true;
    }
  }
  return run;
}

}  // namespace

Eigen::MatrixXd standardize(const Eigen::MatrixXd& features) {
  require(features.rows() >= 2, errc::input, "standardize: need at least two rows");
  require(features.allFinite(), errc::input, "standardize: non-finite feature");
  Eigen::MatrixXd out = features;
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const double mean = features.col(j).mean();
    const double var = (features.col(j).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    require(sd > 1e-15 * (1.0 + std::fabs(mean)), errc::input,
            "standardize: column " + std::to_string(j + 1) + " is constant");
    out.col(j) = (features.col(j).array() - mean) / sd;
  }
  return out;
}

ClusterResult kmeans(const Eigen::MatrixXd& features, int k, unsigned long long seed,
                     const KmeansOptions& opt, const Parallel& par) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  require(n >= 1 && d >= 1, errc::input, "kmeans: empty feature matrix");
  require(features.allFinite(), errc::input, "kmeans: non-finite feature");
  require(k >= 1 && k <= static_cast<int>(n), errc::input,
          "kmeans: k must lie in [1, number of rows]");
  require(opt.order_keys.size() == 0 || opt.order_keys.size() == n, errc::input,
          "kmeans: order_keys must be empty or one per row");
  require(opt.restarts >= 1 && opt.max_iter >= 1, errc::input,
          "kmeans: restarts and max_iter must be positive");

  std::vector<Run> runs(static_cast<std::size_t>(opt.restarts));
  par.for_each(static_cast<std::size_t>(opt.restarts), [&](std::size_t rep) {
    runs[rep] = lloyd(features, k, CounterRng(seed, static_cast<unsigned long long>(rep)),
                      opt.max_iter);
  });
  std::size_t best = 0;
  for (std::size_t rep = 1; rep < runs.size(); ++rep)
    if (runs[rep].inertia < runs[best].inertia) best = rep;
  Run& run = runs[best];

  // Number the clusters: ascending mean order key of their members, or
  // ascending center distance to the feature mean when no keys are given.
  Eigen::VectorXd key = Eigen::VectorXd::Zero(k);
  if (opt.order_keys.size() == n) {
    Eigen::VectorXd cnt = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      key[run.labels[static_cast<std::size_t>(i)]] += opt.order_keys[i];
      cnt[run.labels[static_cast<std::size_t>(i)]] += 1.0;
    }
    key = (key.array() / cnt.array()).matrix();
  } else {
    const Eigen::RowVectorXd mean = features.colwise().mean();
    for (int c = 0; c < k; ++c) key[c] = (run.centers.row(c) - mean).norm();
  }
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return key[a] < key[b]; });
  std::vector<int> rank(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])] = c;

  ClusterResult res;
  res.k = k;
  res.centers.resize(k, d);
  for (int c = 0; c < k; ++c)
    res.centers.row(rank[static_cast<std::size_t>(c)]) = run.centers.row(c);
  res.labels.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    res.labels[static_cast<std::size_t>(i)] =
        rank[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])] + 1;
  res.inertia = run.inertia;

  const double nd = static_cast<double>(n) * static_cast<double>(d);
  const double sigma2 = std::max(run.inertia / nd, 1e-300);
  const double loglik = -0.5 * nd * (1.0 + std::log(kTwoPi * sigma2));
  const double params = static_cast<double>(k) * static_cast<double>(d) + 1.0;
  res.aic = 2.0 * params - 2.0 * loglik;
  res.bic = std::log(static_cast<double>(n)) * params - 2.0 * loglik;
  return res;
}

double separation_d(const std::vector<int>& labels, const Eigen::MatrixXd& features) {
  const Eigen::Index n = features.rows();
  require(static_cast<Eigen::Index>(labels.size()) == n, errc::input,
          "separation_d: one label per feature row");
  require(n >= 2, errc::input, "separation_d: need at least two rows");
  int k = 0;
  for (int l : labels) {
    require(l >= 1, errc::input, "separation_d: labels are 1-based");
    k = std::max(k, l);
  }
  std::vector<Eigen::Index> size(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++size[static_cast<std::size_t>(l - 1)];
  for (int c = 0; c < k; ++c)
    require(size[static_cast<std::size_t>(c)] > 0, errc::input,
            "separation_d: cluster " + std::to_string(c + 1) + " is empty");

  // Pairwise accumulation: within sums per cluster, cross sums per pair.
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd within = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int ci = labels[static_cast<std::size_t>(i)] - 1;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const int cj = labels[static_cast<std::size_t>(j)] - 1;
      const double dist = (features.row(i) - features.row(j)).norm();
      if (ci == cj)
        within[ci] += dist;
      else
        cross(std::min(ci, cj), std::max(ci, cj)) += dist;
    }
  }

  Eigen::VectorXd wbar(k);
  for (int c = 0; c < k; ++c) {
    const double nc = static_cast<double>(size[static_cast<std::size_t>(c)]);
    require(nc >= 2.0, errc::metric,
            "separation_d: cluster " + std::to_string(c + 1) + " is a singleton");
    wbar[c] = within[c] / (0.5 * nc * (nc - 1.0));
    require(wbar[c] > 0.0, errc::metric,
            "separation_d: cluster " + std::to_string(c + 1) + " has zero spread");
  }

  // Diagonal terms are dbar(c,c)/wbar(c) = 1 by construction.
  double total = static_cast<double>(k);
  for (int c = 0; c < k; ++c)
    for (int c2 = 0; c2 < k; ++c2) {
      if (c == c2) continue;
      const double pairs = static_cast<double>(size[static_cast<std::size_t>(c)]) *
                           static_cast<double>(size[static_cast<std::size_t>(c2)]);
      const double dbar = cross(std::min(c, c2), std::max(c, c2)) / pairs;
      total += dbar / wbar[c];
    }
  return total / (static_cast<double>(k) * static_cast<double>(k));
}

SelectKResult select_k(const Eigen::MatrixXd& features, const std::vector<int>& ks,
                       unsigned long long seed, const KmeansOptions& opt, const Parallel& par) {
  require(!ks.empty(), errc::input, "select_k: empty k range");
  const auto n = static_cast<int>(features.rows());
  for (int k : ks)
    require(k >= 2 && k <= n - 1, errc::input, "select_k: each k must lie in [2, n-1]");

  SelectKResult out;
  for (int k : ks) {
    const ClusterResult res = kmeans(features, k, seed, opt, par);
    out.rows.push_back({k, res.inertia, res.aic, res.bic});
  }
  std::sort(out.rows.begin(), out.rows.end(),
            [](const SelectKRow& a, const SelectKRow& b) { return a.k < b.k; });
  double best_aic = std::numeric_limits<double>::infinity();
  double best_bic = std::numeric_limits<double>::infinity();
  for (const SelectKRow& row : out.rows) {
    if (row.aic < best_aic) {
      best_aic = row.aic;
      out.best_aic_k = row.k;
    }
    if (row.bic < best_bic) {
      best_bic = row.bic;
      out.best_bic_k = row.k;
    }
  }
  return out;
}

}  // namespace tghf
