#pragma once

#include "ridgeci/kde.hpp"

#include <cstdint>
#include <string>

namespace ridgeci {

enum class ModelKind { CircleFlat, CircleModulated, SunCross, GaussianBlob };
ModelKind parse_model_kind(const std::string& name);
std::string model_kind_name(ModelKind kind);

struct ModelParams {
  double sigma = 0.2;             // ring width
  double a = 0.5;                 // angular modulation, 0 <= a < 1
  double bar_sigma = 0.1;         // sun-cross bar width
  double bar_half_length = 1.25;  // sun-cross bar half-length
  double ring_weight = 0.5;       // sun-cross ring share; bars split the rest
  double blob_sx = 1.0;           // gaussian_blob standard deviations
  double blob_sy = 0.5;
};

/// Two-dimensional test densities with exact jets, exact samplers and ridge
/// oracles.
///
///   circle_flat      f = c phi_s(|x| - 1)                      (case b)
///   circle_modulated f = c phi_s(|x| - 1) (1 + a cos theta)     (case a)
///   sun_cross        ring/2 + bar_x/4 + bar_y/4, each bar a segment of half
///                    length l convolved with N(0, bar_sigma^2)
///   gaussian_blob    N(0, diag(sx^2, sy^2)); ridge = major axis
///
/// The constructor checks the normalization by 2-d quadrature (1e-4).
class SyntheticModel {
 public:
  explicit SyntheticModel(ModelKind kind, ModelParams params = {});
  static SyntheticModel build(const std::string& name, ModelParams params = {}) {
    return SyntheticModel(parse_model_kind(name), params);
  }

  ModelKind kind() const { return kind_; }
  std::string name() const { return model_kind_name(kind_); }
  const ModelParams& params() const { return params_; }
  int dimension() const { return 2; }
  CaseHint case_hint() const { return kind_ == ModelKind::CircleFlat ? CaseHint::B : CaseHint::A; }
  double normalization_integral() const { return integral_; }

  double value(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Exact value, gradient and vech Hessian. At the ring center (|x| < 1e-12)
  /// the ring term is not differentiable; its derivatives are reported as 0.
  DensityJet jet(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// n exact draws, deterministic per seed (n >= 1).
  RowMatrix sample_points(Eigen::Index n, std::uint64_t seed) const;
  SampleMatrix sample(Eigen::Index n, std::uint64_t seed) const { return SampleMatrix(sample_points(n, seed)); }

  /// Up to m points on the exact 1-ridge. Circle models: one point per
  /// equispaced angle (located numerically for circle_modulated). sun_cross:
  /// ring points, the two diameters inside the ring, the four ring/diameter
  /// crossings and the center. gaussian_blob: the major axis within 2 sx.
  RowMatrix true_ridge_points(int m) const;

  /// Crossings of the ring with the diameters (critical points on the axes).
  RowMatrix sun_cross_intersections() const;

 private:
  void ring_jet(double x, double y, double a, DensityJet& out, double weight) const;
  void bar_jet(double along, double across, bool along_x, DensityJet& out, double weight) const;
  double ring_normalizer() const;
  double sample_radius(double u) const;
  bool ring_ridge_point(double theta, Eigen::Vector2d& out) const;
  double axis_crossing() const;

  ModelKind kind_;
  ModelParams params_;
  double c_ring_ = 0.0;
  double integral_ = 0.0;
};

/// Analytic nonridgeness at x from the model's exact jet, or NaN when the
/// eigen-gap fails there.
double analytic_nonridgeness(const SyntheticModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, int r = 1);

}  // namespace ridgeci
