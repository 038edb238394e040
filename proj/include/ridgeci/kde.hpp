#pragma once

#include "ridgeci/kernel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ridgeci {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// n x d point cloud, one observation per row. n >= 2, all entries finite.
class SampleMatrix {
 public:
  explicit SampleMatrix(RowMatrix points);

  Eigen::Index n() const { return points_.rows(); }
  int d() const { return static_cast<int>(points_.cols()); }
  const RowMatrix& points() const { return points_; }
  auto row(Eigen::Index i) const { return points_.row(i); }

 private:
  RowMatrix points_;
};

/// CSV with one point per row and d numeric columns; a non-numeric first line
/// is treated as a header. Rows containing NaN/Inf are rejected with their
/// line number.
SampleMatrix read_sample_csv(const std::string& path);
void write_sample_csv(const SampleMatrix& sample, const std::string& path);

struct Bandwidth {
  double h;
  explicit Bandwidth(double value);
};

enum class CaseHint { A, B, Auto };
CaseHint parse_case_hint(const std::string& text);
std::string case_hint_name(CaseHint hint);

/// h = 1.2 * sbar * n^{-1/(d+6)} (case a) or n^{-1/(d+4.5)} (case b), sbar the
/// geometric mean of per-coordinate standard deviations. Auto uses the case (b)
/// exponent, which undersmooths enough for either case.
Bandwidth default_bandwidth(const SampleMatrix& sample, CaseHint hint);

/// Value, gradient and vech Hessian of a density (or log-density) estimate.
struct DensityJet {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::VectorXd hess_vech;

  static DensityJet zero(int d);
  int d() const { return static_cast<int>(gradient.size()); }
};

/// log transform of a density jet with the value floored at `floor` > 0.
DensityJet log_transform(const DensityJet& jet, double floor);

/// Per-point kernel contribution h^{-d} K, h^{-d-1} grad K, h^{-d-2} d2K at
/// argument (x - X_i)/h.
struct NeighborTerm {
  Eigen::Index index;
  double value;
  const double* gradient;   // d entries, valid during the callback
  const double* hess_vech;  // d(d+1)/2 entries
};

/// Immutable kernel density estimator with exact derivative jets. Queries
/// touch only points in the 3^d bucket cells around x (bucket size h).
class KernelDensityEstimator {
 public:
  KernelDensityEstimator(SampleMatrix sample, Bandwidth h, KernelSpec kernel);

  Eigen::Index n() const { return sample_->n(); }
  int d() const { return sample_->d(); }
  double h() const { return h_; }
  const KernelSpec& kernel() const { return kernel_; }
  const SampleMatrix& sample() const { return *sample_; }

  DensityJet jet_at(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// f^e = f + (1/n) sum e_i (h^{-d} K((x - X_i)/h) - f), differentiated in x.
  DensityJet multiplier_jet_at(const Eigen::Ref<const Eigen::VectorXd>& x, std::span<const double> e) const;

  /// Jet of f + (1/n) sum_i w_i h^{-d} K((x - X_i)/h) (and derivatives).
  /// Multiplier weights reduce to w = e - mean(e); an empirical resample with
  /// counts c reduces to w = c - 1.
  DensityJet perturbed_jet_at(const Eigen::Ref<const Eigen::VectorXd>& x, std::span<const double> w) const;

  /// Estimator over the resampled points {X_indices[i]}, same h and kernel.
  KernelDensityEstimator empirical_refit(std::span<const Eigen::Index> indices) const;

  DensityJet log_jet_at(const Eigen::Ref<const Eigen::VectorXd>& x, double floor) const;

  /// Number of sample points with ||x - X_i||_inf < h.
  std::size_t support_count(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Calls fn(NeighborTerm) for every point inside the kernel support of x, in
  /// increasing index order.
  template <typename Fn>
  void for_each_neighbor(const Eigen::Ref<const Eigen::VectorXd>& x, Fn&& fn) const;

 private:
  std::vector<Eigen::Index> neighbor_candidates(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  void check_point(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  std::shared_ptr<const SampleMatrix> sample_;
  double h_;
  KernelSpec kernel_;

  // Bucket grid: points sorted by cell, hashed on the linearized cell index.
  Eigen::VectorXd origin_;
  std::vector<std::int64_t> extent_;
  std::vector<Eigen::Index> order_;
  std::unordered_map<std::int64_t, std::pair<std::size_t, std::size_t>> cells_;
};

/// Densities f(X_i) at every sample point.
std::vector<double> sample_point_densities(const KernelDensityEstimator& est);

/// Default log-density floor: 1e-12 * max_i f(X_i).
double default_log_floor(std::span<const double> sample_densities);

template <typename Fn>
void KernelDensityEstimator::for_each_neighbor(const Eigen::Ref<const Eigen::VectorXd>& x, Fn&& fn) const {
  check_point(x);
  const int dim = d();
  const int nh = dim * (dim + 1) / 2;
  const double inv_h = 1.0 / h_;
  double scale0 = 1.0;
  for (int i = 0; i < dim; ++i) scale0 *= inv_h;
  const double scale1 = scale0 * inv_h;
  const double scale2 = scale1 * inv_h;
  std::vector<double> u(dim), grad(dim), hess(nh);
  for (Eigen::Index idx : neighbor_candidates(x)) {
    for (int a = 0; a < dim; ++a) u[a] = (x[a] - sample_->points()(idx, a)) * inv_h;
    double value = 0.0;
    if (!kernel_jet(kernel_, u.data(), value, grad.data(), hess.data())) continue;
    for (int a = 0; a < dim; ++a) grad[a] *= scale1;
    for (int a = 0; a < nh; ++a) hess[a] *= scale2;
    fn(NeighborTerm{idx, value * scale0, grad.data(), hess.data()});
  }
}

}  // namespace ridgeci
