#pragma once

#include <Eigen/Dense>

#include <string>

namespace ridgeci {

enum class KernelProfile { Triweight };

/// Product kernel K(u) = prod_i k(u_i) built from an even, compactly supported
/// one-dimensional profile. The triweight k(t) = 35/32 (1 - t^2)^3 on [-1, 1]
/// has a Lipschitz second derivative and vanishing odd moments.
struct KernelSpec {
  int dimension = 2;
  KernelProfile profile = KernelProfile::Triweight;
};

std::string profile_name(KernelProfile profile);
KernelProfile parse_profile(const std::string& name);

// One-dimensional profile and its first two derivatives. Zero for |t| >= 1.
double profile_value(KernelProfile profile, double t);
double profile_d1(KernelProfile profile, double t);
double profile_d2(KernelProfile profile, double t);

double kernel_value(const KernelSpec& ks, const Eigen::Ref<const Eigen::VectorXd>& u);
Eigen::VectorXd kernel_gradient(const KernelSpec& ks, const Eigen::Ref<const Eigen::VectorXd>& u);
/// vech of the Hessian of K at u (lower triangle, column stacked).
Eigen::VectorXd kernel_hess_vech(const KernelSpec& ks, const Eigen::Ref<const Eigen::VectorXd>& u);

/// Value, gradient and vech Hessian in one pass. `grad` must hold d entries
/// and `hess_vech` d(d+1)/2 entries. Returns false (and writes nothing) when u
/// lies outside the open support.
bool kernel_jet(const KernelSpec& ks, const double* u, double& value, double* grad, double* hess_vech);

struct KernelMomentReport {
  double integral = 0.0;
  Eigen::VectorXd first_moments;
  double second_moment = 0.0;  // integral of ||x||^2 K(x)
};

/// Tensor Gauss-Legendre quadrature over the support; exact for the
/// polynomial triweight. Requires dimension <= 4.
KernelMomentReport validate_kernel_moments(const KernelSpec& ks);

}  // namespace ridgeci
