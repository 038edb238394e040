#pragma once

#include "ridgeci/bootstrap.hpp"
#include "ridgeci/field.hpp"
#include "ridgeci/synthetic.hpp"

#include <functional>
#include <span>
#include <string>

namespace ridgeci {

struct BetaPrimeEstimate {
  double r_n = 0.0;
  double R_n = 0.0;
  double beta_hat = 0.0;  // ln R_n / ln r_n
  std::size_t centers = 0;
};

/// Default ball radius 1 / ln n.
double default_r_n(double n);

/// R_n = min_x max_{y valid, |y - x| <= r_n} p(y) over the x in `centers`,
/// on an arbitrary per-node field. Requires max grid spacing <= r_n / 4.
BetaPrimeEstimate estimate_beta_prime_values(const GridSpec& grid, std::span<const double> p, const NodeMask& centers,
                                             const NodeMask& valid, double r_n);
/// Field version: x ranges over valid nodes with lambda_{r+1} < 0.
BetaPrimeEstimate estimate_beta_prime(const RidgeField& field, double r_n);

/// max over candidates x of min over valid y within `radius` of values[y].
double ball_inf_sup(const GridSpec& grid, std::span<const double> values, const NodeMask& valid,
                    std::span<const std::size_t> candidates, double radius);

/// reject iff T_n >= phi.
inline bool flatness_decision(double T_n, double phi) { return T_n >= phi; }

struct FlatnessOptions {
  RhoSpec rho = RhoSpec::Value(0.0);
  double alpha = 0.1;
  int B = 500;
  std::uint64_t seed = 0;
  double r_n = 0.0;            // <= 0: default_r_n(n)
  double epsilon_prime = 0.1;  // inflation of beta' used in the r_n check
  bool test_zero_gradient = false;
};

struct FlatnessTestResult {
  double T_n = 0.0;
  double phi_e = 0.0;
  bool reject = false;
  double t_n = 0.0;  // beta_hat + 1
  double radius = 0.0;
  double rho = 0.0;
  std::size_t candidate_count = 0;
  BetaPrimeEstimate beta;
  double beta_inflated = 0.0;  // beta_hat + epsilon'
  double r_n_condition = 0.0;  // (gamma^{(2)} + h^2)^{1 / beta_inflated}
  std::string warning;         // empty when the r_n condition looks satisfied
  std::vector<double> draws;
};

/// Case (a) versus case (b) test: T_n from the plain gradient-norm field,
/// critical value from multiplier draws of sup ||grad f^e - grad f||.
FlatnessTestResult flatness_test(const KernelDensityEstimator& est, const RidgeField& field,
                                 const FlatnessOptions& options);

using JetProvider = std::function<DensityJet(const Eigen::VectorXd&)>;

struct LeadingTermReport {
  double sup_phat = 0.0;
  double sup_linear = 0.0;
  double ratio = 1.0;
  std::size_t points = 0;
};

/// Compares sup p-hat over the model's ridge with the sup of the linear term
/// (M^T vech(d2f-hat - d2f) for case a, L (grad f-hat - grad f) for case b),
/// both frames built from the exact jets. Ratio is 1 when both sups vanish.
LeadingTermReport leading_term_diagnostic(const JetProvider& estimate, const SyntheticModel& model, CaseHint hint,
                                          int m = 256, int r = 1);
LeadingTermReport leading_term_diagnostic(const KernelDensityEstimator& est, const SyntheticModel& model,
                                          CaseHint hint, int m = 256);

inline constexpr const char* kInferSchema = "ridgeci.infer/1";

}  // namespace ridgeci
