#include "tghf/eigenbasis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <utility>

#include "tghf/rng.hpp"

namespace tghf {

namespace {

EigenBasis build_from_blocks(const Eigen::MatrixXd& cross, const Eigen::MatrixXd& landmark_block,
                             const std::vector<int>& landmarks, int L, Eigen::Index n) {
  const auto m = landmark_block.rows();
  require(L >= 1, errc::input, "nystrom_eigs: rank must be >= 1");
  require(L <= m, errc::input, "nystrom_eigs: rank exceeds landmark count");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(landmark_block);
  require(es.info() == Eigen::Success, errc::decomposition,
          "nystrom_eigs: landmark eigendecomposition failed");
  // Eigen returns ascending order; view it descending.
  const Eigen::VectorXd d_asc = es.eigenvalues();
  const Eigen::MatrixXd u_asc = es.eigenvectors();
  const double d_max = d_asc[m - 1];
  if (!(d_max > 0.0)) {
    std::ostringstream msg;
    msg << "nystrom_eigs: landmark submatrix numerically singular (eigenvalue range ["
        << d_asc[0] << ", " << d_max << "])";
    fail(errc::decomposition, msg.str());
  }

  // Usable landmark directions: clip before inverting so near-null landmark
  // eigenvalues (duplicate landmarks) cannot blow up the extension.
  const double clip = 1e-10 * d_max;
  int usable = 0;
  while (usable < m && d_asc[m - 1 - usable] > clip) ++usable;
  require(usable >= 1, errc::decomposition, "nystrom_eigs: all landmark eigenvalues clipped");

  // Extend through the landmark block scaled by inverse sqrt-eigenvalues,
  // then orthonormalize the extension by a thin SVD. The squared singular
  // values are the eigenvalues of the rank-usable reconstruction
  // cross * W^{-1} * cross^T, so keeping the top L of them is the best
  // rank-L version of that reconstruction, and the columns come out exactly
  // orthonormal. With the full landmark set this reproduces the exact
  // eigen-pairs of the input matrix.
  Eigen::MatrixXd a(n, usable);
  for (int i = 0; i < usable; ++i) {
    const Eigen::Index src = m - 1 - i;
    a.col(i) = cross * (u_asc.col(src) / std::sqrt(d_asc[src]));
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
  const Eigen::VectorXd sv = svd.singularValues();
  const double top = sv[0] * sv[0];
  require(top > 0.0, errc::decomposition, "nystrom_eigs: zero extended eigenvector");

  int kept = 0;
  while (kept < std::min(L, usable) && sv[kept] * sv[kept] > 1e-10 * top) ++kept;
  require(kept >= 1, errc::decomposition, "nystrom_eigs: all requested eigenvalues clipped");

  EigenBasis basis;
  basis.requested_rank = L;
  basis.rank = kept;
  basis.landmark_ids = landmarks;
  basis.vectors = svd.matrixU().leftCols(kept);
  basis.values = sv.head(kept).array().square();
  return basis;
}

}  // namespace

EigenBasis nystrom_eigs_matrix(const Eigen::MatrixXd& full, const std::vector<int>& landmarks,
                               int L) {
  const Eigen::Index n = full.rows();
  require(full.cols() == n, errc::input, "nystrom_eigs: matrix must be square");
  require(!landmarks.empty() && static_cast<Eigen::Index>(landmarks.size()) <= n, errc::input,
          "nystrom_eigs: landmark count must be in [1, n]");
  const auto m = static_cast<Eigen::Index>(landmarks.size());
  Eigen::MatrixXd w(m, m);
  Eigen::MatrixXd cross(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const int lj = landmarks[static_cast<std::size_t>(j)];
    require(lj >= 0 && lj < n, errc::input, "nystrom_eigs: landmark index out of range");
    cross.col(j) = full.col(lj);
    for (Eigen::Index i = 0; i < m; ++i) w(i, j) = full(landmarks[static_cast<std::size_t>(i)], lj);
  }
  return build_from_blocks(cross, w, landmarks, L, n);
}

EigenBasis nystrom_eigs(const SiteSet& sites, const ExpKernelParams& params,
                        const std::vector<int>& landmarks, int L) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(sites.size());
  require(!landmarks.empty() && static_cast<Eigen::Index>(landmarks.size()) <= n, errc::input,
          "nystrom_eigs: landmark count must be in [1, n]");
  const auto m = static_cast<Eigen::Index>(landmarks.size());
  auto kv = [&](const Site& a, const Site& b) {
    if (a.id == b.id) return params.tau2 + params.sigma2;
    const double dx = a.x - b.x, dy = a.y - b.y;
    return params.tau2 * std::exp(-std::sqrt(dx * dx + dy * dy) / params.r);
  };
  Eigen::MatrixXd w(m, m);
  Eigen::MatrixXd cross(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const int lj = landmarks[static_cast<std::size_t>(j)];
    require(lj >= 0 && lj < n, errc::input, "nystrom_eigs: landmark index out of range");
    const Site& sj = sites[static_cast<std::size_t>(lj)];
    for (Eigen::Index i = 0; i < n; ++i) cross(i, j) = kv(sites[static_cast<std::size_t>(i)], sj);
    for (Eigen::Index i = 0; i < m; ++i)
      w(i, j) = cross(landmarks[static_cast<std::size_t>(i)], j);
  }
  return build_from_blocks(cross, w, landmarks, L, n);
}

std::vector<int> sample_landmarks(std::size_t n, std::size_t m, std::uint64_t seed) {
  require(m >= 1 && m <= n, errc::input, "sample_landmarks: need 1 <= m <= n");
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  CounterRng rng(seed, /*stream=*/0x1a17dca1u);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void save_eigenbasis(const EigenBasis& basis, const std::string& prefix) {
  {
    std::ofstream out(prefix + ".values.csv");
    require(out.good(), errc::io, "save_eigenbasis: cannot open " + prefix + ".values.csv");
    out << std::setprecision(17);
    out << "# rank=" << basis.rank << " requested_rank=" << basis.requested_rank
        << " n=" << basis.vectors.rows() << "\n";
    out << "# landmarks=";
    for (std::size_t i = 0; i < basis.landmark_ids.size(); ++i)
      out << (i ? ";" : "") << basis.landmark_ids[i];
    out << "\n";
    for (int i = 0; i < basis.rank; ++i) out << basis.values[i] << "\n";
    require(out.good(), errc::io, "save_eigenbasis: write failure");
  }
  {
    std::ofstream out(prefix + ".vectors.csv");
    require(out.good(), errc::io, "save_eigenbasis: cannot open " + prefix + ".vectors.csv");
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < basis.vectors.rows(); ++i) {
      for (Eigen::Index j = 0; j < basis.vectors.cols(); ++j)
        out << (j ? "," : "") << basis.vectors(i, j);
      out << "\n";
    }
    require(out.good(), errc::io, "save_eigenbasis: write failure");
  }
}

EigenBasis load_eigenbasis(const std::string& prefix) {
  EigenBasis basis;
  std::vector<double> values;
  {
    std::ifstream in(prefix + ".values.csv");
    require(in.good(), errc::io, "load_eigenbasis: cannot open " + prefix + ".values.csv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        const auto pos = line.find("landmarks=");
        if (pos != std::string::npos) {
          std::stringstream ss(line.substr(pos + 10));
          std::string tok;
          while (std::getline(ss, tok, ';'))
            if (!tok.empty()) basis.landmark_ids.push_back(std::stoi(tok));
        }
        const auto rq = line.find("requested_rank=");
        if (rq != std::string::npos) basis.requested_rank = std::stoi(line.substr(rq + 15));
        continue;
      }
      values.push_back(std::stod(line));
    }
  }
  require(!values.empty(), errc::io, "load_eigenbasis: no eigenvalues found");
  basis.rank = static_cast<int>(values.size());
  if (basis.requested_rank == 0) basis.requested_rank = basis.rank;
  basis.values = Eigen::Map<Eigen::VectorXd>(values.data(), basis.rank);

  std::vector<std::vector<double>> rows;
  {
    std::ifstream in(prefix + ".vectors.csv");
    require(in.good(), errc::io, "load_eigenbasis: cannot open " + prefix + ".vectors.csv");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
      require(static_cast<int>(row.size()) == basis.rank, errc::io,
              "load_eigenbasis: row width does not match eigenvalue count");
      rows.push_back(std::move(row));
    }
  }
  basis.vectors.resize(static_cast<Eigen::Index>(rows.size()), basis.rank);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < basis.rank; ++j)
      basis.vectors(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  return basis;
}

}  // namespace tghf
