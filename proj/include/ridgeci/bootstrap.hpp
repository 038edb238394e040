#pragma once

#include "ridgeci/field.hpp"
#include "ridgeci/kde.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ridgeci {

enum class BootstrapMode { Multiplier, Empirical };
BootstrapMode parse_bootstrap_mode(const std::string& text);
std::string bootstrap_mode_name(BootstrapMode mode);

/// Threshold defining the candidate set S-hat(rho_n). `zero` selects the
/// surrogate for S-hat(0): the 1st percentile of p-hat over valid nodes with
/// negative lambda_{r+1}.
struct RhoSpec {
  bool zero = false;
  double value = 0.0;

  static RhoSpec Zero() { return {true, 0.0}; }
  static RhoSpec Value(double v) { return {false, v}; }
};
RhoSpec parse_rho(const std::string& text);

struct BootstrapConfig {
  int B = 500;
  BootstrapMode mode = BootstrapMode::Multiplier;
  RhoSpec rho = RhoSpec::Value(0.0);
  double alpha = 0.1;
  std::uint64_t seed = 0;
  bool test_identity_resample = false;  // every replicate uses weights 0

  void validate() const;
};

struct BootstrapDraws {
  std::vector<double> draws;
  std::vector<std::size_t> skipped;  // gap-violating candidates per draw
  double t_quantile = 0.0;
};

struct ConfidenceRegion {
  double threshold = 0.0;
  NodeMask mask;
  double alpha = 0.1;
  BootstrapMode mode = BootstrapMode::Multiplier;
  double rho = 0.0;  // resolved candidate threshold
  std::size_t candidate_count = 0;
};

/// The 1st-percentile surrogate used for rho_n = "zero".
double zero_rho_surrogate(const RidgeField& field);
double resolve_rho(const RidgeField& field, const RhoSpec& rho);

/// Indices of sublevel_region(field, rho). Throws NumericalError("empty
/// candidate set ...") when nothing qualifies.
std::vector<std::size_t> candidate_set(const RidgeField& field, const RhoSpec& rho);

/// gamma_{n,h}^{(k)} = sqrt(log n / (n h^{d+2k})).
double gamma_rate(double n, double h, int d, int k);
/// log n * gamma^{(2)} for case (a), log n * gamma^{(1)} for case (b) (and auto).
double default_rho_n(const KernelDensityEstimator& est, CaseHint hint);

/// Order statistic at 1-based index ceil(B (1 - alpha)).
double bootstrap_quantile(std::span<const double> draws, double alpha);

/// Per-replicate random stream keyed on (seed, replicate, tag), independent of
/// thread scheduling.
std::mt19937_64 replicate_stream(std::uint64_t seed, std::uint64_t replicate, std::uint32_t tag);
std::vector<double> draw_multiplier_weights(std::mt19937_64& rng, Eigen::Index n);
std::vector<Eigen::Index> draw_resample_indices(std::mt19937_64& rng, Eigen::Index n);

/// Centered weights e_i - mean(e); exactly zero when e is constant.
std::vector<double> centered_multiplier_weights(std::span<const double> e);
/// Resample multiplicities minus one.
std::vector<double> resample_weights(std::span<const Eigen::Index> indices, Eigen::Index n);

struct SupDraw {
  double sup = 0.0;
  std::size_t skipped = 0;
};

/// Bootstrap sup statistics over a fixed candidate set. Every draw reduces to
/// jets of f + (1/n) sum w_i K_h(x - X_i); the kernel contributions of each
/// candidate node are cached once so a draw is a sparse product plus one
/// eigen-decomposition per node.
class BootstrapEngine {
 public:
  BootstrapEngine(const KernelDensityEstimator& est, const RidgeField& field, std::vector<std::size_t> candidates);

  const std::vector<std::size_t>& candidates() const { return candidates_; }
  Eigen::Index n() const { return n_; }

  /// sup |p^w - p| over candidates. Throws NumericalError when every
  /// candidate loses the eigen-gap.
  SupDraw ridge_draw(std::span<const double> w) const;
  /// sup ||grad f^w - grad f|| over candidates.
  double gradient_draw(std::span<const double> w) const;

  SupDraw multiplier_draw(std::span<const double> e) const { return ridge_draw(centered_multiplier_weights(e)); }
  SupDraw empirical_draw(std::span<const Eigen::Index> indices) const {
    return ridge_draw(resample_weights(indices, n_));
  }
  double grad_multiplier_draw(std::span<const double> e) const { return gradient_draw(centered_multiplier_weights(e)); }

 private:
  void accumulate(std::size_t c, std::span<const double> w, double* acc) const;

  const RidgeField* field_;
  Eigen::Index n_;
  int d_;
  int stride_;  // 1 + d + d(d+1)/2
  std::vector<std::size_t> candidates_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::int32_t> cols_;
  std::vector<double> terms_;  // stride_ entries per nonzero
  std::vector<double> base_;   // stride_ entries per candidate: jet of f-hat
};

/// Runs B replicates (in parallel, assembled in replicate order).
BootstrapDraws run_bootstrap(const BootstrapEngine& engine, const BootstrapConfig& config);
/// B multiplier replicates of the gradient sup statistic.
std::vector<double> run_gradient_bootstrap(const BootstrapEngine& engine, int B, std::uint64_t seed);

struct ConfidenceResult {
  ConfidenceRegion region;
  BootstrapDraws draws;
};
ConfidenceResult confidence_region(const KernelDensityEstimator& est, const RidgeField& field,
                                   const BootstrapConfig& config);

inline constexpr const char* kBootstrapSchema = "ridgeci.confidence/1";

}  // namespace ridgeci
