#include "ridgeci/spectral.hpp"

#include "ridgeci/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ridgeci {

namespace {

int vech_index(int row, int col, int d) {
  if (row < col) std::swap(row, col);
  return col * d - col * (col - 1) / 2 + (row - col);
}

void require_square(const Eigen::Ref<const Eigen::MatrixXd>& A, const char* what) {
  if (A.rows() != A.cols() || A.rows() == 0) throw std::invalid_argument(std::string(what) + " must be square and nonempty");
}

Eigen::MatrixXd symmetrized(const Eigen::Ref<const Eigen::MatrixXd>& A) { return 0.5 * (A + A.transpose()); }

struct SortedEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // matching columns
};

SortedEigen sorted_eigen(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigendecomposition failed");
  const Eigen::Index d = sym.rows();
  SortedEigen out;
  out.values.resize(d);
  out.vectors.resize(d, d);
  // Eigen returns ascending order.
  for (Eigen::Index i = 0; i < d; ++i) {
    out.values[i] = solver.eigenvalues()[d - 1 - i];
    out.vectors.col(i) = solver.eigenvectors().col(d - 1 - i);
  }
  return out;
}

// Single-linkage clusters of descending eigenvalues.
std::vector<std::vector<int>> cluster(const Eigen::VectorXd& values, double gap_tol) {
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < values.size(); ++i) {
    if (i == 0 || values[i - 1] - values[i] > gap_tol)
      groups.push_back({i});
    else
      groups.back().push_back(i);
  }
  return groups;
}

void check_r(int r, Eigen::Index d) {
  if (r < 1 || r >= d) {
    throw std::invalid_argument("ridge dimension r=" + std::to_string(r) + " must satisfy 1 <= r < d=" + std::to_string(d));
  }
}

}  // namespace

int vech_dimension(Eigen::Index length) {
  int d = 0;
  while (static_cast<Eigen::Index>(d) * (d + 1) / 2 < length) ++d;
  if (static_cast<Eigen::Index>(d) * (d + 1) / 2 != length || d == 0)
    throw std::invalid_argument("length " + std::to_string(length) + " is not d(d+1)/2 for any d >= 1");
  return d;
}

Eigen::VectorXd vech(const Eigen::Ref<const Eigen::MatrixXd>& A) {
  require_square(A, "vech argument");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) throw std::invalid_argument("vech: matrix is not symmetric");
  const Eigen::MatrixXd S = symmetrized(A);
  const int d = static_cast<int>(A.rows());
  Eigen::VectorXd v(d * (d + 1) / 2);
  int idx = 0;
  for (int col = 0; col < d; ++col)
    for (int row = col; row < d; ++row) v[idx++] = S(row, col);
  return v;
}

Eigen::MatrixXd unvech(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const int d = vech_dimension(v.size());
  Eigen::MatrixXd A(d, d);
  int idx = 0;
  for (int col = 0; col < d; ++col) {
    for (int row = col; row < d; ++row) {
      A(row, col) = v[idx];
      A(col, row) = v[idx];
      ++idx;
    }
  }
  return A;
}

Eigen::MatrixXd duplication_matrix(int d) {
  if (d < 1 || d > 16) throw std::invalid_argument("duplication_matrix: d must be in [1, 16]");
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(d * d, d * (d + 1) / 2);
  for (int col = 0; col < d; ++col)
    for (int row = 0; row < d; ++row) D(col * d + row, vech_index(row, col, d)) = 1.0;
  return D;
}

double default_gap_tol(const Eigen::Ref<const Eigen::MatrixXd>& hess) { return 1e-6 * std::max(1.0, hess.norm()); }

SpectralFrame spectral_frame(const Eigen::Ref<const Eigen::MatrixXd>& hess, const Eigen::Ref<const Eigen::VectorXd>& grad,
                             int r, double gap_tol) {
  require_square(hess, "Hessian");
  const Eigen::Index d = hess.rows();
  check_r(r, d);
  if (grad.size() != d) throw std::invalid_argument("gradient length does not match Hessian dimension");
  const Eigen::MatrixXd sym = symmetrized(hess);
  if (gap_tol <= 0.0) gap_tol = default_gap_tol(sym);

  SpectralFrame frame;
  frame.r = r;
  SortedEigen eig = sorted_eigen(sym);
  frame.eigenvalues = std::move(eig.values);
  frame.eigenvectors = std::move(eig.vectors);
  frame.groups = cluster(frame.eigenvalues, gap_tol);

  const int q = frame.group_count();
  int group_of_r = -1;    // group holding lambda_r
  int group_of_r1 = -1;   // group holding lambda_{r+1}
  for (int j = 0; j < q; ++j) {
    for (int i : frame.groups[j]) {
      if (i == r - 1) group_of_r = j;
      if (i == r) group_of_r1 = j;
    }
  }
  if (group_of_r == group_of_r1) {
    throw GapViolation("eigen-gap violation: lambda_r - lambda_{r+1} = " +
                       std::to_string(frame.eigenvalues[r - 1] - frame.eigenvalues[r]) + " is below gap_tol " +
                       std::to_string(gap_tol));
  }
  frame.q_r = group_of_r1;

  frame.V = frame.eigenvectors.rightCols(d - r);
  frame.L = frame.V * frame.V.transpose();

  for (const auto& group : frame.groups) {
    double mean = 0.0;
    Eigen::MatrixXd E(d, static_cast<Eigen::Index>(group.size()));
    for (std::size_t c = 0; c < group.size(); ++c) {
      mean += frame.eigenvalues[group[c]];
      E.col(static_cast<Eigen::Index>(c)) = frame.eigenvectors.col(group[c]);
    }
    frame.group_means.push_back(mean / static_cast<double>(group.size()));
    frame.P_list.push_back(E * E.transpose());
  }
  for (int j = 0; j < q; ++j) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
    for (int k = 0; k < q; ++k)
      if (k != j) S += frame.P_list[k] / (frame.group_means[j] - frame.group_means[k]);
    frame.S_list.push_back(std::move(S));
  }

  // M^T = sum_{j trailing} [P_j (x) (S_j g)^T + S_j (x) (P_j g)^T] D, assembled
  // directly in vech coordinates: column (a, b) of the Kronecker block hits
  // vec index b * d + a, i.e. vech index of the unordered pair {a, b}.
  const int dd = static_cast<int>(d);
  frame.M_T = Eigen::MatrixXd::Zero(d, d * (d + 1) / 2);
  for (int j = frame.q_r; j < q; ++j) {
    const Eigen::VectorXd Sg = frame.S_list[j] * grad;
    const Eigen::VectorXd Pg = frame.P_list[j] * grad;
    for (int a = 0; a < dd; ++a) {
      for (int b = 0; b < dd; ++b) {
        const int col = vech_index(a, b, dd);
        frame.M_T.col(col) += frame.P_list[j].col(a) * Sg[b] + frame.S_list[j].col(a) * Pg[b];
      }
    }
  }
  return frame;
}

double nonridgeness(const SpectralFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& grad) {
  const double via_v = (frame.V.transpose() * grad).norm();
  const double via_l = (frame.L * grad).norm();
  if (std::abs(via_v - via_l) > 1e-10 * std::max(1.0, grad.norm()))
    throw NumericalError("nonridgeness: ||V^T g|| and ||L g|| disagree");
  return via_v;
}

Eigen::MatrixXd m_transpose_on_ridge(const SpectralFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& grad) {
  const Eigen::Index d = frame.eigenvalues.size();
  const int dd = static_cast<int>(d);
  const int q = frame.group_count();
  Eigen::MatrixXd M_T = Eigen::MatrixXd::Zero(d, d * (d + 1) / 2);
  for (int j = frame.q_r; j < q; ++j) {
    for (int k = 0; k < frame.q_r; ++k) {
      const double nu = 1.0 / (frame.group_means[j] - frame.group_means[k]);
      const Eigen::VectorXd Pkg = frame.P_list[k] * grad;
      for (int a = 0; a < dd; ++a)
        for (int b = 0; b < dd; ++b) M_T.col(vech_index(a, b, dd)) += nu * frame.P_list[j].col(a) * Pkg[b];
    }
  }
  return M_T;
}

Eigen::MatrixXd projection_derivative(const Eigen::Ref<const Eigen::MatrixXd>& hess,
                                      const Eigen::Ref<const Eigen::MatrixXd>& direction, int r, double gap_tol) {
  require_square(direction, "direction");
  if (direction.rows() != hess.rows()) throw std::invalid_argument("direction and Hessian dimensions differ");
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(hess.rows());
  const SpectralFrame frame = spectral_frame(hess, zero, r, gap_tol);
  const Eigen::MatrixXd D = symmetrized(direction);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(hess.rows(), hess.cols());
  for (int j = frame.q_r; j < frame.group_count(); ++j) {
    for (int k = 0; k < frame.q_r; ++k) {
      const double nu = 1.0 / (frame.group_means[j] - frame.group_means[k]);
      const Eigen::MatrixXd PjDPk = frame.P_list[j] * D * frame.P_list[k];
      Q += nu * (PjDPk + PjDPk.transpose());
    }
  }
  return Q;
}

Eigen::MatrixXd projection_second_derivative(const Eigen::Ref<const Eigen::MatrixXd>& hess,
                                             const Eigen::Ref<const Eigen::MatrixXd>& direction, int r,
                                             double gap_tol) {
  require_square(direction, "direction");
  if (direction.rows() != hess.rows()) throw std::invalid_argument("direction and Hessian dimensions differ");
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(hess.rows());
  const SpectralFrame frame = spectral_frame(hess, zero, r, gap_tol);
  const Eigen::MatrixXd D = symmetrized(direction);
  const auto& P = frame.P_list;
  auto Pi = [&](int a, int b, int c) -> Eigen::MatrixXd { return P[a] * D * P[b] * D * P[c]; };
  auto nu = [&](int a, int b) { return 1.0 / (frame.group_means[a] - frame.group_means[b]); };

  // Only the terms with k, l both among trailing groups cancel in pairs; mixed
  // trailing/leading terms survive once there are two or more trailing groups.
  const int q = frame.group_count();
  Eigen::MatrixXd half = Eigen::MatrixXd::Zero(hess.rows(), hess.cols());
  for (int j = frame.q_r; j < q; ++j) {
    for (int k = 0; k < q; ++k) {
      if (k == j) continue;
      for (int l = 0; l < q; ++l) {
        if (l == j || (k >= frame.q_r && l >= frame.q_r)) continue;
        half += nu(j, k) * nu(j, l) * (Pi(j, k, l) + Pi(k, j, l) + Pi(k, l, j));
      }
      if (k < frame.q_r) half -= nu(j, k) * nu(j, k) * (Pi(j, j, k) + Pi(j, k, j) + Pi(k, j, j));
    }
  }
  return 2.0 * half;
}

Eigen::MatrixXd projection_second_derivative_unreduced(const SpectralFrame& frame,
                                                       const Eigen::Ref<const Eigen::MatrixXd>& direction) {
  const Eigen::MatrixXd D = symmetrized(direction);
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(D.rows(), D.cols());
  for (int j = frame.q_r; j < frame.group_count(); ++j) {
    const Eigen::MatrixXd& P = frame.P_list[j];
    const Eigen::MatrixXd& S = frame.S_list[j];
    const Eigen::MatrixXd S2 = S * S;
    total += 2.0 * (P * D * S * D * S + S * D * P * D * S + S * D * S * D * P - P * D * P * D * S2 -
                    P * D * S2 * D * P - S2 * D * P * D * P);
  }
  return total;
}

std::optional<RidgeStats> ridge_stats(const Eigen::Ref<const Eigen::VectorXd>& hess_vech,
                                      const Eigen::Ref<const Eigen::VectorXd>& grad, int r, double gap_tol) {
  const Eigen::Index d = grad.size();
  check_r(r, d);
  if (d == 2) {
    Eigen::Matrix2d H;
    H << hess_vech[0], hess_vech[1], hess_vech[1], hess_vech[2];
    if (gap_tol <= 0.0) gap_tol = 1e-6 * std::max(1.0, H.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver;
    solver.computeDirect(H);
    // Ascending: index 0 is lambda_2, index 1 is lambda_1.
    const double lam1 = solver.eigenvalues()[1];
    const double lam2 = solver.eigenvalues()[0];
    if (!(lam1 - lam2 > gap_tol)) return std::nullopt;
    const double proj = solver.eigenvectors().col(0).dot(grad);
    return RidgeStats{std::abs(proj), lam2};
  }
  const Eigen::MatrixXd H = unvech(hess_vech);
  if (gap_tol <= 0.0) gap_tol = default_gap_tol(H);
  const SortedEigen eig = sorted_eigen(H);
  if (!(eig.values[r - 1] - eig.values[r] > gap_tol)) return std::nullopt;
  const double p = (eig.vectors.rightCols(d - r).transpose() * grad).norm();
  return RidgeStats{p, eig.values[r]};
}

}  // namespace ridgeci
