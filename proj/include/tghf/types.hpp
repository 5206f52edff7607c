#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "tghf/error.hpp"

namespace tghf {

// Planar coordinates; the unit (meters, kilometers, degrees treated as
// planar) is whatever the dataset declares, and every kernel range is read
// in that same unit.
struct Site {
  double x = 0.0;
  double y = 0.0;
  int id = -1;
};

class SiteSet {
 public:
  SiteSet() = default;
  explicit SiteSet(std::vector<Site> sites);

  static SiteSet from_xy(const std::vector<double>& x, const std::vector<double>& y);

  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  const Site& operator[](std::size_t i) const { return sites_[i]; }
  const std::vector<Site>& all() const { return sites_; }

  SiteSet subset(const std::vector<int>& indices) const;

 private:
  std::vector<Site> sites_;
};

struct GridSpec {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell = 1.0;
  int nx = 0;
  int ny = 0;

  void validate() const {
    require(nx >= 1 && ny >= 1, errc::input, "GridSpec: nx and ny must be >= 1");
    require(cell > 0.0, errc::input, "GridSpec: cell size must be positive");
  }

  int count() const { return nx * ny; }
  // Cell (ix, iy) maps to index iy*nx + ix; coordinates are cell centers.
  int index_of(int ix, int iy) const { return iy * nx + ix; }
  Site site_at(int index) const {
    const int iy = index / nx, ix = index % nx;
    return Site{origin_x + ix * cell, origin_y + iy * cell, index};
  }
  SiteSet sites() const;
};

// One day of one gridded variable. Masked-out entries are missing and are
// skipped by every estimator.
struct FieldFrame {
  GridSpec grid;
  int t = 0;
  Eigen::VectorXd values;
  std::vector<std::uint8_t> mask;  // 1 = observed

  void validate() const;
  std::size_t observed_count() const;
};

}  // namespace tghf
