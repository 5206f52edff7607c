#include "tghf/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace tghf {

SiteSet::SiteSet(std::vector<Site> sites) : sites_(std::move(sites)) {
  std::unordered_set<int> seen;
  seen.reserve(sites_.size());
  for (const Site& s : sites_) {
    require(std::isfinite(s.x) && std::isfinite(s.y), errc::input,
            "SiteSet: non-finite coordinate at id " + std::to_string(s.id));
    require(seen.insert(s.id).second, errc::input,
            "SiteSet: duplicate site id " + std::to_string(s.id));
  }
}

SiteSet SiteSet::from_xy(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), errc::input, "SiteSet::from_xy: length mismatch");
  std::vector<Site> s(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) s[i] = Site{x[i], y[i], static_cast<int>(i)};
  return SiteSet(std::move(s));
}

SiteSet SiteSet::subset(const std::vector<int>& indices) const {
  std::vector<Site> s;
  s.reserve(indices.size());
  for (int i : indices) {
    require(i >= 0 && static_cast<std::size_t>(i) < sites_.size(), errc::input,
            "SiteSet::subset: index out of range");
    s.push_back(sites_[static_cast<std::size_t>(i)]);
  }
  return SiteSet(std::move(s));
}

SiteSet GridSpec::sites() const {
  validate();
  std::vector<Site> s;
  s.reserve(static_cast<std::size_t>(count()));
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) s.push_back(site_at(index_of(ix, iy)));
  return SiteSet(std::move(s));
}

void FieldFrame::validate() const {
  grid.validate();
  require(values.size() == grid.count() && mask.size() == static_cast<std::size_t>(grid.count()),
          errc::input, "FieldFrame: values/mask length must equal nx*ny");
  for (int i = 0; i < values.size(); ++i)
    require(!mask[static_cast<std::size_t>(i)] || std::isfinite(values[i]), errc::input,
            "FieldFrame: observed value non-finite at cell " + std::to_string(i));
}

std::size_t FieldFrame::observed_count() const {
  std::size_t n = 0;
  for (auto m : mask) n += (m != 0);
  return n;
}

Eigen::MatrixXd pairwise_distances(const SiteSet& sites) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  require(n >= 1, errc::input, "pairwise_distances: needs at least one site");
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dx = sites[i].x - sites[j].x;
      const double dy = sites[i].y - sites[j].y;
      const double v = std::sqrt(dx * dx + dy * dy);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

double mst_max_edge(const SiteSet& sites) {
  const std::size_t n = sites.size();
  require(n >= 2, errc::input, "mst_max_edge: needs at least two sites");
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<char> in_tree(n, 0);
  best[0] = 0.0;
  double max_edge = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t u = n;
    double u_cost = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
      if (!in_tree[i] && best[i] < u_cost) {
        u = i;
        u_cost = best[i];
      }
    in_tree[u] = 1;
    max_edge = std::max(max_edge, u_cost);
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double dx = sites[u].x - sites[v].x;
      const double dy = sites[u].y - sites[v].y;
      best[v] = std::min(best[v], std::sqrt(dx * dx + dy * dy));
    }
  }
  return max_edge;
}

std::vector<int> knn(const SiteSet& sites, const Site& s0, int k) {
  require(k >= 0, errc::input, "knn: k must be non-negative");
  std::vector<std::pair<double, int>> cand;
  cand.reserve(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (sites[i].id == s0.id) continue;
    const double dx = sites[i].x - s0.x;
    const double dy = sites[i].y - s0.y;
    cand.emplace_back(std::sqrt(dx * dx + dy * dy), static_cast<int>(i));
  }
  require(static_cast<std::size_t>(k) <= cand.size(), errc::input,
          "knn: k exceeds the number of candidate sites");
  auto by_dist_then_id = [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return sites[static_cast<std::size_t>(a.second)].id < sites[static_cast<std::size_t>(b.second)].id;
  };
  std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), by_dist_then_id);
  std::vector<int> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = cand[static_cast<std::size_t>(i)].second;
  return out;
}

}  // namespace tghf
