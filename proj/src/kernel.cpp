#include "ridgeci/kernel.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ridgeci {

namespace {

constexpr double kTriweightNorm = 35.0 / 32.0;

void check_dimension(const KernelSpec& ks, Eigen::Index size) {
  if (ks.dimension < 1) throw std::invalid_argument("kernel dimension must be positive");
  if (size != ks.dimension) {
    throw std::invalid_argument("dimension mismatch: kernel has d=" + std::to_string(ks.dimension) +
                                ", point has " + std::to_string(size) + " coordinates");
  }
}

}  // namespace

std::string profile_name(KernelProfile profile) {
  switch (profile) {
    case KernelProfile::Triweight:
      return "triweight";
  }
  return "unknown";
}

KernelProfile parse_profile(const std::string& name) {
  if (name == "triweight") return KernelProfile::Triweight;
  throw std::invalid_argument("unknown kernel profile '" + name + "'");
}

double profile_value(KernelProfile, double t) {
  if (!(std::abs(t) < 1.0)) return 0.0;
  const double s = 1.0 - t * t;
  return kTriweightNorm * s * s * s;
}

double profile_d1(KernelProfile, double t) {
  if (!(std::abs(t) < 1.0)) return 0.0;
  const double s = 1.0 - t * t;
  return -6.0 * kTriweightNorm * t * s * s;
}

double profile_d2(KernelProfile, double t) {
  if (!(std::abs(t) < 1.0)) return 0.0;
  const double t2 = t * t;
  return -6.0 * kTriweightNorm * (1.0 - t2) * (1.0 - 5.0 * t2);
}

bool kernel_jet(const KernelSpec& ks, const double* u, double& value, double* grad, double* hess_vech) {
  const int d = ks.dimension;
  // Stack buffers cover every dimension the duplication algebra supports.
  constexpr int kMaxStack = 16;
  double k0_buf[kMaxStack], k1_buf[kMaxStack], k2_buf[kMaxStack];
  std::vector<double> heap;
  double* k0 = k0_buf;
  double* k1 = k1_buf;
  double* k2 = k2_buf;
  if (d > kMaxStack) {
    heap.resize(3 * static_cast<std::size_t>(d));
    k0 = heap.data();
    k1 = k0 + d;
    k2 = k1 + d;
  }
  for (int i = 0; i < d; ++i) {
    if (!(std::abs(u[i]) < 1.0)) return false;
    k0[i] = profile_value(ks.profile, u[i]);
    k1[i] = profile_d1(ks.profile, u[i]);
    k2[i] = profile_d2(ks.profile, u[i]);
  }
  // Products are formed explicitly instead of dividing by k0[i], which may be tiny.
  double prod = 1.0;
  for (int i = 0; i < d; ++i) prod *= k0[i];
  value = prod;
  for (int a = 0; a < d; ++a) {
    double g = k1[a];
    for (int i = 0; i < d; ++i)
      if (i != a) g *= k0[i];
    grad[a] = g;
  }
  int idx = 0;
  for (int col = 0; col < d; ++col) {
    for (int row = col; row < d; ++row) {
      double h;
      if (row == col) {
        h = k2[row];
        for (int i = 0; i < d; ++i)
          if (i != row) h *= k0[i];
      } else {
        h = k1[row] * k1[col];
        for (int i = 0; i < d; ++i)
          if (i != row && i != col) h *= k0[i];
      }
      hess_vech[idx++] = h;
    }
  }
  return true;
}

double kernel_value(const KernelSpec& ks, const Eigen::Ref<const Eigen::VectorXd>& u) {
  check_dimension(ks, u.size());
  double prod = 1.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) prod *= profile_value(ks.profile, u[i]);
  return prod;
}

Eigen::VectorXd kernel_gradient(const KernelSpec& ks, const Eigen::Ref<const Eigen::VectorXd>& u) {
  check_dimension(ks, u.size());
  const int d = ks.dimension;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd hess(d * (d + 1) / 2);
  double value = 0.0;
  const Eigen::VectorXd copy = u;
  kernel_jet(ks, copy.data(), value, grad.data(), hess.data());
  return grad;
}

Eigen::VectorXd kernel_hess_vech(const KernelSpec& ks, const Eigen::Ref<const Eigen::VectorXd>& u) {
  check_dimension(ks, u.size());
  const int d = ks.dimension;
  Eigen::VectorXd grad(d);
  Eigen::VectorXd hess = Eigen::VectorXd::Zero(d * (d + 1) / 2);
  double value = 0.0;
  const Eigen::VectorXd copy = u;
  if (!kernel_jet(ks, copy.data(), value, grad.data(), hess.data())) hess.setZero();
  return hess;
}

KernelMomentReport validate_kernel_moments(const KernelSpec& ks) {
  const int d = ks.dimension;
  if (d < 1 || d > 4) throw std::invalid_argument("validate_kernel_moments requires 1 <= d <= 4");

  // 10-point Gauss-Legendre is exact up to degree 19; the moment integrands
  // have per-axis degree at most 8.
  using Rule = boost::math::quadrature::gauss<double, 10>;
  std::vector<double> nodes;
  std::vector<double> weights;
  const auto& abscissa = Rule::abscissa();
  const auto& w = Rule::weights();
  for (std::size_t i = 0; i < abscissa.size(); ++i) {
    nodes.push_back(abscissa[i]);
    weights.push_back(w[i]);
    if (abscissa[i] != 0.0) {
      nodes.push_back(-abscissa[i]);
      weights.push_back(w[i]);
    }
  }
  const std::size_t m = nodes.size();

  KernelMomentReport report;
  report.first_moments = Eigen::VectorXd::Zero(d);
  std::vector<std::size_t> index(d, 0);
  Eigen::VectorXd x(d);
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= m;
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    double weight = 1.0;
    for (int i = 0; i < d; ++i) {
      index[i] = rem % m;
      rem /= m;
      x[i] = nodes[index[i]];
      weight *= weights[index[i]];
    }
    const double k = kernel_value(ks, x);
    report.integral += weight * k;
    report.first_moments += weight * k * x;
    report.second_moment += weight * k * x.squaredNorm();
  }
  return report;
}

}  // namespace ridgeci
