#pragma once

#include "ridgeci/kernel.hpp"

#include <json.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ridgeci {

struct CheckReport {
  std::string name;
  nlohmann::ordered_json observed;
  double tolerance = 0.0;
  bool pass = false;

  nlohmann::ordered_json to_json() const;
};

/// Random symmetric d x d matrix with descending eigenvalues separated by at
/// least `min_gap`, in a random orthonormal basis.
Eigen::MatrixXd random_gapped_symmetric(std::mt19937_64& rng, int d, double min_gap);
/// Random symmetric matrix with unit Frobenius norm.
Eigen::MatrixXd random_unit_symmetric(std::mt19937_64& rng, int d);

/// Q1(Sigma, D) g = M^T vech D over random draws; max residual <= 1e-9.
CheckReport check_kronecker_identity(int trials, int d, int r, std::uint64_t seed);

struct PerturbationSlopes {
  std::vector<double> first;   // per-trial log-log slope of the first-order remainder
  std::vector<double> second;  // same with the second-order term included
  double mean_first = 0.0;
  double mean_second = 0.0;
};
PerturbationSlopes perturbation_slopes(int trials, int d, int r, std::uint64_t seed);
/// Mean slopes within 2.0 +/- 0.1 and 3.0 +/- 0.15.
CheckReport check_perturbation_orders(int trials, int d, int r, std::uint64_t seed);

/// |p-hat - p| <= 2 sqrt(2) / e0 ||dH||_F ||grad f|| + ||d grad|| for random
/// jets with 2 <= d <= 6; reports the violation count.
CheckReport check_davis_kahan_bound(int trials, std::uint64_t seed);

/// Quadrature moments and finite-difference derivative checks of the kernel.
std::vector<CheckReport> check_kernel(const KernelSpec& ks, std::uint64_t seed);

/// Everything above at default trial counts.
std::vector<CheckReport> run_self_check(std::uint64_t seed);

inline constexpr const char* kDiagnosticsSchema = "ridgeci.diagnostics/1";

}  // namespace ridgeci
