#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptalloc/error.hpp"

namespace ptalloc {

using Matrix = Eigen::MatrixXd;

// Below this, the second Laplacian eigenvalue is treated as zero.
inline constexpr double kConnectivityTol = 1e-12;

struct Neighbor {
  std::size_t index;
  double weight;
};

namespace detail {

inline void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(Errc::InvalidArgument, std::string(what) + " must be a nonempty square matrix");
  }
}

inline void require_symmetric(const Matrix& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * scale) {
        throw Error(Errc::NonSymmetric, "entry (" + std::to_string(i) + "," + std::to_string(j) +
                                            ") differs from its transpose");
      }
    }
  }
}

}  // namespace detail

/// Eigenvalues of a symmetric matrix in ascending order.
inline std::vector<double> spectral_eigenvalues(const Matrix& symmetric) {
  detail::require_square(symmetric, "matrix");
  detail::require_symmetric(symmetric);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  std::vector<double> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end());
  return out;
}

/// Undirected weighted network. Immutable once built.
class Network {
 public:
  std::size_t size() const noexcept { return neighbors_.size(); }
  const Matrix& adjacency() const noexcept { return adjacency_; }
  const Matrix& laplacian() const noexcept { return laplacian_; }
  double lambda2() const noexcept { return lambda2_; }
  double lambdaN() const noexcept { return lambdaN_; }
  double degree(std::size_t i) const { return laplacian_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)); }
  double min_degree() const { return laplacian_.diagonal().minCoeff(); }
  std::span<const Neighbor> neighbors(std::size_t i) const { return neighbors_.at(i); }

  // vᵀLv
  double quadratic_form(std::span<const double> v) const {
    Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
    return x.dot(laplacian_ * x);
  }

  // Σ_j a_ij (v_i - v_j), the i-th row of L v.
  double laplacian_row(std::size_t i, std::span<const double> v) const {
    double acc = 0.0;
    for (const auto& nb : neighbors_[i]) acc += nb.weight * (v[i] - v[nb.index]);
    return acc;
  }

  // Q diag{1, Λ^{-1}} Qᵀ with Q the orthonormal eigenbasis of L (first column 1/√N).
  // Only used to evaluate Lyapunov-style diagnostics.
  Matrix lyapunov_weight() const {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(laplacian_);
    Eigen::VectorXd scale = solver.eigenvalues();
    for (Eigen::Index k = 0; k < scale.size(); ++k) scale(k) = (k == 0) ? 1.0 : 1.0 / scale(k);
    const Matrix& q = solver.eigenvectors();
    return q * scale.asDiagonal() * q.transpose();
  }

 private:
  friend Network build_network(const Matrix& adjacency);

  Matrix adjacency_;
  Matrix laplacian_;
  double lambda2_ = 0.0;
  double lambdaN_ = 0.0;
  std::vector<std::vector<Neighbor>> neighbors_;
};

/// Builds the Laplacian, neighbor lists and spectral bounds; rejects disconnected graphs.
inline Network build_network(const Matrix& adjacency) {
  detail::require_square(adjacency, "adjacency");
  detail::require_symmetric(adjacency);
  const auto n = adjacency.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) {
      throw Error(Errc::InvalidArgument, "adjacency diagonal entry " + std::to_string(i) + " is nonzero");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (adjacency(i, j) < 0.0 || !std::isfinite(adjacency(i, j))) {
        throw Error(Errc::NegativeWeight, "adjacency entry (" + std::to_string(i) + "," +
                                              std::to_string(j) + ") is negative or non-finite");
      }
    }
  }

  Network net;
  net.adjacency_ = adjacency;
  net.laplacian_ = -adjacency;
  net.neighbors_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i || adjacency(i, j) == 0.0) continue;
      row += adjacency(i, j);
      net.neighbors_[static_cast<std::size_t>(i)].push_back({static_cast<std::size_t>(j), adjacency(i, j)});
    }
    net.laplacian_(i, i) = row;
  }

  const auto ev = spectral_eigenvalues(net.laplacian_);
  net.lambdaN_ = ev.back();
  net.lambda2_ = ev.size() > 1 ? ev[1] : 0.0;
  if (n > 1 && net.lambda2_ <= kConnectivityTol) {
    throw Error(Errc::Disconnected, "second Laplacian eigenvalue " + std::to_string(net.lambda2_) +
                                        " is not positive");
  }
  return net;
}

/// Unit-weight ring on n agents.
inline Matrix ring_adjacency(std::size_t n) {
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (n < 2) return a;
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = (i + 1) % n;
    if (i == j) continue;
    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
    a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 1.0;
  }
  return a;
}

}  // namespace ptalloc
