#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace ridgeci {

/// Half-vectorization: lower triangle stacked column by column.
/// Throws std::invalid_argument when A is asymmetric beyond 1e-9 (relative to
/// max(1, max|A_ij|)); otherwise A is symmetrized first.
Eigen::VectorXd vech(const Eigen::Ref<const Eigen::MatrixXd>& A);
Eigen::MatrixXd unvech(const Eigen::Ref<const Eigen::VectorXd>& v);
/// Length d(d+1)/2 -> d; throws if the length is not triangular.
int vech_dimension(Eigen::Index length);

/// d^2 x d(d+1)/2 zero/one matrix with vec A = D vech A for symmetric A.
/// Valid for 1 <= d <= 16.
Eigen::MatrixXd duplication_matrix(int d);

/// Ordered eigensystem of a symmetric matrix plus the projector algebra that
/// describes how the trailing eigenspace reacts to perturbations.
struct SpectralFrame {
  int r = 1;
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXd eigenvectors;  // columns match eigenvalues
  Eigen::MatrixXd V;             // d x (d - r), trailing eigenvectors
  Eigen::MatrixXd L;             // V V^T

  // Eigenvalue clusters, in descending order of their means.
  std::vector<std::vector<int>> groups;
  std::vector<double> group_means;
  std::vector<Eigen::MatrixXd> P_list;  // group projectors
  std::vector<Eigen::MatrixXd> S_list;  // (mu_j I - Sigma)^+ per group
  int q_r = 0;                          // number of groups above lambda_{r+1}

  Eigen::MatrixXd M_T;  // d x d(d+1)/2, full (off-ridge valid) form

  double lambda_r1() const { return eigenvalues[r]; }
  int group_count() const { return static_cast<int>(groups.size()); }
};

/// Default clustering tolerance 1e-6 * max(1, ||Sigma||_F).
double default_gap_tol(const Eigen::Ref<const Eigen::MatrixXd>& hess);

/// Builds the frame for a symmetric Hessian. A non-positive gap_tol selects
/// default_gap_tol. Throws GapViolation when lambda_r and lambda_{r+1} share a
/// cluster, std::invalid_argument on bad r or shapes.
SpectralFrame spectral_frame(const Eigen::Ref<const Eigen::MatrixXd>& hess, const Eigen::Ref<const Eigen::VectorXd>& grad,
                             int r, double gap_tol = 0.0);

/// ||L grad|| = ||V^T grad||; both routes are computed and must agree.
double nonridgeness(const SpectralFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& grad);

/// The simplified M(x)^T valid on the ridge (where L grad = 0): only the
/// cross terms nu_jk P_j (x) (P_k grad)^T between trailing and leading groups.
Eigen::MatrixXd m_transpose_on_ridge(const SpectralFrame& frame, const Eigen::Ref<const Eigen::VectorXd>& grad);

/// First Gateaux derivative of Sigma -> L(Sigma) in direction D.
Eigen::MatrixXd projection_derivative(const Eigen::Ref<const Eigen::MatrixXd>& hess,
                                      const Eigen::Ref<const Eigen::MatrixXd>& direction, int r, double gap_tol = 0.0);

/// Second Gateaux derivative of Sigma -> L(Sigma) in direction D, as the
/// triple-projector sum over trailing groups j with the pairwise-cancelling
/// (trailing, trailing) terms dropped.
Eigen::MatrixXd projection_second_derivative(const Eigen::Ref<const Eigen::MatrixXd>& hess,
                                             const Eigen::Ref<const Eigen::MatrixXd>& direction, int r,
                                             double gap_tol = 0.0);

/// Second derivative summed group by group from the unreduced per-group
/// expression (uses the full S_j). Independent route for tests.
Eigen::MatrixXd projection_second_derivative_unreduced(const SpectralFrame& frame,
                                                       const Eigen::Ref<const Eigen::MatrixXd>& direction);

/// Lightweight per-point summary used on grids and inside bootstrap loops.
struct RidgeStats {
  double p = 0.0;          // nonridgeness ||V^T grad||
  double lambda_r1 = 0.0;  // (r+1)-th largest eigenvalue
};

/// Eigen-decomposes the Hessian given in vech form and returns the ridge
/// statistics, or nullopt when the r / r+1 eigen-gap is below gap_tol
/// (non-positive gap_tol selects the default).
std::optional<RidgeStats> ridge_stats(const Eigen::Ref<const Eigen::VectorXd>& hess_vech,
                                      const Eigen::Ref<const Eigen::VectorXd>& grad, int r, double gap_tol = 0.0);

}  // namespace ridgeci
