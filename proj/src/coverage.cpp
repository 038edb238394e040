#include "ridgeci/coverage.hpp"

#include "ridgeci/errors.hpp"
#include "ridgeci/field.hpp"

#include <algorithm>
#include <set>

namespace ridgeci {

nlohmann::ordered_json RunRecord::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = kCoverageRecordSchema;
  j["run"] = run;
  j["covered"] = covered;
  j["connected"] = connected;
  j["sup_mask_to_truth"] = sup_mask_to_truth;
  j["sup_truth_to_mask"] = sup_truth_to_mask;
  j["threshold"] = threshold;
  j["rho"] = rho;
  j["h"] = h;
  j["candidate_count"] = candidate_count;
  j["mask_count"] = mask_count;
  j["skipped"] = skipped;
  j["truth_missed"] = truth_missed;
  j["error"] = error;
  return j;
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
  if (j.at("schema").get<std::string>() != kCoverageRecordSchema) throw ConfigError("unexpected coverage record schema");
  RunRecord r;
  r.run = j.at("run").get<int>();
  r.covered = j.at("covered").get<bool>();
  r.connected = j.at("connected").get<bool>();
  r.sup_mask_to_truth = j.at("sup_mask_to_truth").get<double>();
  r.sup_truth_to_mask = j.at("sup_truth_to_mask").get<double>();
  r.threshold = j.at("threshold").get<double>();
  r.rho = j.at("rho").get<double>();
  r.h = j.at("h").get<double>();
  r.candidate_count = j.at("candidate_count").get<std::size_t>();
  r.mask_count = j.at("mask_count").get<std::size_t>();
  r.skipped = j.at("skipped").get<std::size_t>();
  r.truth_missed = j.at("truth_missed").get<std::size_t>();
  r.error = j.at("error").get<std::string>();
  return r;
}

nlohmann::ordered_json CoverageSummary::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = kCoverageSummarySchema;
  j["runs"] = runs;
  j["failed"] = failed;
  j["coverage"] = coverage;
  j["connected_fraction"] = connected_fraction;
  j["mean_sup_mask_to_truth"] = mean_sup_mask_to_truth;
  j["median_sup_mask_to_truth"] = median_sup_mask_to_truth;
  j["max_sup_mask_to_truth"] = max_sup_mask_to_truth;
  return j;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t run, std::uint64_t tag) {
  // splitmix64 over a simple combination of the three keys
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (run + 1) + 0xbf58476d1ce4e5b9ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool mask_covers(const GridSpec& grid, const NodeMask& mask, const RowMatrix& truth, std::size_t* missed) {
  const double radius = grid.cell_diagonal();
  std::size_t miss = 0;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    const Eigen::VectorXd p = truth.row(i).transpose();
    const auto near = nodes_near(grid, p, radius);
    if (!std::any_of(near.begin(), near.end(), [&](std::size_t k) { return mask[k] != 0; })) ++miss;
  }
  if (missed) *missed = miss;
  return miss == 0;
}

bool mask_connects(const GridSpec& grid, const NodeMask& mask, const RowMatrix& truth) {
  const auto labels = connected_components(grid, mask);
  const double radius = grid.cell_diagonal();
  std::set<int> common;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    const Eigen::VectorXd p = truth.row(i).transpose();
    std::set<int> here;
    for (std::size_t k : nodes_near(grid, p, radius))
      if (labels[k] >= 0) here.insert(labels[k]);
    if (i == 0) {
      common = here;
    } else {
      std::set<int> keep;
      std::set_intersection(common.begin(), common.end(), here.begin(), here.end(), std::inserter(keep, keep.begin()));
      common.swap(keep);
    }
    if (common.empty()) return false;
  }
  return !common.empty();
}

RunRecord coverage_run(const SyntheticModel& model, const CoverageConfig& config, const RowMatrix& truth, int run) {
  RunRecord rec;
  rec.run = run;
  try {
    SampleMatrix sample = model.sample(config.n, derive_seed(config.seed, static_cast<std::uint64_t>(run), 0));
    const double h = config.h ? *config.h : default_bandwidth(sample, model.case_hint()).h;
    rec.h = h;
    KernelDensityEstimator est(std::move(sample), Bandwidth(h), KernelSpec{2, KernelProfile::Triweight});
    FieldOptions fo;
    fo.r = config.r;
    fo.use_log = config.use_log;
    RidgeField field = evaluate_field(est, auto_grid(est.sample(), h), fo);
    density_floor_mask(est, field, config.floor_q);

    BootstrapConfig bc;
    bc.B = config.B;
    bc.mode = config.mode;
    bc.alpha = config.alpha;
    bc.seed = derive_seed(config.seed, static_cast<std::uint64_t>(run), 1);
    bc.rho = config.rho ? *config.rho : RhoSpec::Value(default_rho_n(est, model.case_hint()));
    const ConfidenceResult cr = confidence_region(est, field, bc);

    rec.threshold = cr.region.threshold;
    rec.rho = cr.region.rho;
    rec.candidate_count = cr.region.candidate_count;
    rec.mask_count = mask_indices(cr.region.mask).size();
    for (std::size_t s : cr.draws.skipped) rec.skipped += s;
    rec.covered = mask_covers(field.grid, cr.region.mask, truth, &rec.truth_missed);
    rec.connected = rec.covered && mask_connects(field.grid, cr.region.mask, truth);
    if (rec.mask_count > 0) {
      const auto hd = hausdorff_to_set(mask_points(field.grid, cr.region.mask), truth);
      rec.sup_mask_to_truth = hd.mask_to_target;
      rec.sup_truth_to_mask = hd.target_to_mask;
    }
  } catch (const NumericalError& e) {
    rec.error = e.what();
    rec.covered = false;
    rec.connected = false;
  }
  return rec;
}

CoverageSummary summarize(const std::vector<RunRecord>& records) {
  CoverageSummary s;
  s.runs = static_cast<int>(records.size());
  if (records.empty()) return s;
  int covered = 0;
  int connected = 0;
  std::vector<double> dist;
  for (const auto& r : records) {
    covered += r.covered ? 1 : 0;
    connected += r.connected ? 1 : 0;
    if (!r.error.empty()) {
      ++s.failed;
      continue;
    }
    if (r.mask_count > 0) dist.push_back(r.sup_mask_to_truth);
  }
  s.coverage = static_cast<double>(covered) / s.runs;
  s.connected_fraction = static_cast<double>(connected) / s.runs;
  if (!dist.empty()) {
    double sum = 0.0;
    for (double v : dist) sum += v;
    s.mean_sup_mask_to_truth = sum / static_cast<double>(dist.size());
    std::sort(dist.begin(), dist.end());
    const std::size_t k = dist.size();
    s.median_sup_mask_to_truth = k % 2 ? dist[k / 2] : 0.5 * (dist[k / 2 - 1] + dist[k / 2]);
    s.max_sup_mask_to_truth = dist.back();
  }
  return s;
}

CoverageResult coverage_experiment(const SyntheticModel& model, const CoverageConfig& config,
                                   const std::map<int, RunRecord>& completed,
                                   const std::function<void(const RunRecord&)>& on_record) {
  if (config.M < 1) throw ConfigError("M must be >= 1");
  const RowMatrix truth = model.true_ridge_points(config.m_truth);
  CoverageResult out;
  for (int run = 0; run < config.M; ++run) {
    const auto it = completed.find(run);
    if (it != completed.end()) {
      out.records.push_back(it->second);
      continue;
    }
    out.records.push_back(coverage_run(model, config, truth, run));
    if (on_record) on_record(out.records.back());
  }
  out.summary = summarize(out.records);
  return out;
}

}  // namespace ridgeci
