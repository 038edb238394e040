#pragma once

#include "ridgeci/kde.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ridgeci {

/// Rectangular grid; node coordinates are lower + i * spacing per axis, with
/// axis 0 varying fastest in the flat node order.
struct GridSpec {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<int> resolution;

  static constexpr std::size_t kDefaultNodeCap = 4'000'000;

  int d() const { return static_cast<int>(lower.size()); }
  std::size_t node_count() const;
  double spacing(int axis) const { return (upper[axis] - lower[axis]) / (resolution[axis] - 1); }
  double max_spacing() const;
  double cell_diagonal() const;
  std::vector<int> multi_index(std::size_t node) const;
  std::size_t flat_index(std::span<const int> index) const;
  Eigen::VectorXd node(std::size_t flat) const;
  /// Throws std::invalid_argument on malformed grids or node count above cap.
  void validate(std::size_t node_cap = kDefaultNodeCap) const;
};

/// Sample bounding box inflated by h on every side, with per-axis spacing at
/// most `spacing` (default h / 3).
GridSpec auto_grid(const SampleMatrix& sample, double h, double spacing = 0.0);

using NodeMask = std::vector<std::uint8_t>;

/// Plug-in nonridgeness and eigenvalue fields on a grid.
struct RidgeField {
  GridSpec grid;
  int r = 1;
  double h = 0.0;
  bool use_log = false;
  double log_floor = 0.0;          // floor on f-hat; nodes at or below are invalid
  double density_threshold = 0.0;  // quantile floor applied afterwards (0 = none)
  double gap_tol = 0.0;            // <= 0: per-node default

  std::vector<double> density;    // plain f-hat
  std::vector<double> grad_norm;  // ||grad f-hat|| of the plain estimate
  std::vector<double> p_hat;      // NaN where the eigen-gap fails
  std::vector<double> lambda_r1;
  NodeMask valid;

  std::size_t size() const { return p_hat.size(); }
  std::size_t valid_count() const;
};

struct FieldOptions {
  int r = 1;
  bool use_log = false;
  double gap_tol = 0.0;    // <= 0: default per node
  double log_floor = 0.0;  // <= 0: 1e-12 * max sample-point density
  std::size_t node_cap = GridSpec::kDefaultNodeCap;
};

/// Evaluates (log-)density jets, p-hat and lambda_{r+1} at every node.
RidgeField evaluate_field(const KernelDensityEstimator& est, const GridSpec& grid, const FieldOptions& options);

/// Order statistic of {f(X_i)} at 1-based index ceil(q n).
double density_floor_threshold(std::span<const double> sample_densities, double q);
/// Marks nodes with f-hat below `threshold` invalid and records the threshold.
void apply_density_floor(RidgeField& field, double threshold);
/// Convenience: threshold from the estimator's own sample points, applied.
double density_floor_mask(const KernelDensityEstimator& est, RidgeField& field, double q);

/// valid && p <= eps && lambda_{r+1} < 0.
NodeMask sublevel_region(const RidgeField& field, double eps);
std::vector<std::size_t> mask_indices(const NodeMask& mask);
RowMatrix mask_points(const GridSpec& grid, const NodeMask& mask);

struct HausdorffPair {
  double mask_to_target = 0.0;  // sup over mask of distance to target
  double target_to_mask = 0.0;  // sup over target of distance to mask
};
HausdorffPair hausdorff_to_set(const RowMatrix& mask_points, const RowMatrix& target);

/// Connected components of the mask under full (3^d - 1) grid adjacency.
/// Unmasked nodes get label -1.
std::vector<int> connected_components(const GridSpec& grid, const NodeMask& mask);

/// Nodes within Euclidean distance `radius` of `point`, in flat order.
std::vector<std::size_t> nodes_near(const GridSpec& grid, const Eigen::Ref<const Eigen::VectorXd>& point, double radius);

// Field export: CSV columns x0..x{d-1}, density, grad_norm, p_hat,
// lambda_r1, valid, mask plus a JSON header with the grid metadata. Doubles
// are written in shortest round-trip form.
inline constexpr const char* kFieldSchema = "ridgeci.field/1";
void write_field(const RidgeField& field, const NodeMask& mask, const std::string& csv_path,
                 const std::string& json_path);
struct LoadedField {
  RidgeField field;
  NodeMask mask;
};
LoadedField read_field(const std::string& csv_path, const std::string& json_path);

}  // namespace ridgeci
