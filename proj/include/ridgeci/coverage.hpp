#pragma once

#include "ridgeci/bootstrap.hpp"
#include "ridgeci/synthetic.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>

namespace ridgeci {

struct CoverageConfig {
  Eigen::Index n = 2000;
  int B = 200;
  int M = 100;
  double alpha = 0.1;
  BootstrapMode mode = BootstrapMode::Multiplier;
  std::optional<RhoSpec> rho;  // unset: default_rho_n for the model's case
  bool use_log = false;
  double floor_q = 0.05;
  int m_truth = 256;
  std::optional<double> h;  // unset: default_bandwidth(sample, model case)
  std::uint64_t seed = 0;
  int r = 1;
};

struct RunRecord {
  int run = 0;
  bool covered = false;
  bool connected = false;  // one mask component holds every truth point
  double sup_mask_to_truth = 0.0;
  double sup_truth_to_mask = 0.0;
  double threshold = 0.0;
  double rho = 0.0;
  double h = 0.0;
  std::size_t candidate_count = 0;
  std::size_t mask_count = 0;
  std::size_t skipped = 0;
  std::size_t truth_missed = 0;
  std::string error;  // non-empty when the run failed numerically

  nlohmann::ordered_json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

struct CoverageSummary {
  int runs = 0;
  int failed = 0;
  double coverage = 0.0;
  double connected_fraction = 0.0;
  double mean_sup_mask_to_truth = 0.0;
  double median_sup_mask_to_truth = 0.0;
  double max_sup_mask_to_truth = 0.0;

  nlohmann::ordered_json to_json() const;
};

struct CoverageResult {
  std::vector<RunRecord> records;
  CoverageSummary summary;
};

/// Seeds for run `run`: tag 0 drives the sample, tag 1 the bootstrap.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t run, std::uint64_t tag);

/// True when every truth point has a masked node within one cell diagonal.
/// `missed` receives the number of uncovered truth points.
bool mask_covers(const GridSpec& grid, const NodeMask& mask, const RowMatrix& truth, std::size_t* missed = nullptr);
/// True when a single mask component has a node within one cell diagonal of
/// every truth point.
bool mask_connects(const GridSpec& grid, const NodeMask& mask, const RowMatrix& truth);

/// One independent dataset: sample, fit, field with density floor,
/// confidence region, cover check.
RunRecord coverage_run(const SyntheticModel& model, const CoverageConfig& config, const RowMatrix& truth, int run);

CoverageSummary summarize(const std::vector<RunRecord>& records);

/// Runs M datasets in run order. Records present in `completed` are reused
/// (resume); `on_record` is called for each newly computed record.
CoverageResult coverage_experiment(const SyntheticModel& model, const CoverageConfig& config,
                                   const std::map<int, RunRecord>& completed = {},
                                   const std::function<void(const RunRecord&)>& on_record = {});

inline constexpr const char* kCoverageRecordSchema = "ridgeci.coverage.run/1";
inline constexpr const char* kCoverageSummarySchema = "ridgeci.coverage.summary/1";

}  // namespace ridgeci
