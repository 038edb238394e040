// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "ridgeci/bootstrap.hpp"
#include "ridgeci/coverage.hpp"
#include "ridgeci/diagnostics.hpp"
#include "ridgeci/inference.hpp"
#include "ridgeci/spectral.hpp"
#include "ridgeci/synthetic.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

using namespace ridgeci;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

KernelDensityEstimator fit(const SyntheticModel& m, Eigen::Index n, std::uint64_t seed) {
  SampleMatrix S = m.sample(n, seed);
  const double h = default_bandwidth(S, m.case_hint()).h;
  return KernelDensityEstimator(std::move(S), Bandwidth(h), KernelSpec{2, KernelProfile::Triweight});
}

Outcome jets() {
  const Timer t;
  const SyntheticModel m(ModelKind::CircleFlat);
  const KernelDensityEstimator est = fit(m, 2000, 101);
  const RowMatrix queries = m.sample_points(1000, 102);
  const double step = 1e-4 * est.h();
  double worst_g = 0, worst_h = 0;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const Eigen::Vector2d x = queries.row(q).transpose();
    const DensityJet j = est.jet_at(x);
    Eigen::Vector2d g_fd;
    Eigen::Matrix2d H_fd;
    for (int a = 0; a < 2; ++a) {
      Eigen::Vector2d up = x, dn = x;
      up[a] += step;
      dn[a] -= step;
      const DensityJet ju = est.jet_at(up), jd = est.jet_at(dn);
      g_fd[a] = (ju.value - jd.value) / (2 * step);
      H_fd.col(a) = (ju.gradient - jd.gradient) / (2 * step);
    }
    const Eigen::Matrix2d H = unvech(j.hess_vech);
    worst_g = std::max(worst_g, (j.gradient - g_fd).norm() / j.gradient.norm());
    worst_h = std::max(worst_h, (H - H_fd).norm() / H.norm());
  }
  const double secs = t.seconds();
  return {worst_g <= 1e-4 && worst_h <= 1e-4 && secs <= 30.0,
          "max rel err grad " + fmt(worst_g) + ", hess " + fmt(worst_h) + " (tol 1e-4), " + fmt(secs) + " s"};
}

Outcome perturbation() {
  const Timer t;
  const CheckReport rep = check_perturbation_orders(200, 4, 2, 201);
  const double secs = t.seconds();
  return {rep.pass && secs <= 10.0, "slopes " + fmt(rep.observed["slope_first"].get<double>()) + " / " +
                                        fmt(rep.observed["slope_second"].get<double>()) +
                                        " (targets 2.0 +/- 0.1, 3.0 +/- 0.15), " + fmt(secs) + " s"};
}

Outcome kronecker() {
  const CheckReport rep = check_kronecker_identity(1000, 4, 2, 301);
  return {rep.pass, "max residual " + fmt(rep.observed["max_residual"].get<double>()) + " (tol 1e-9)"};
}

Outcome degeneracy() {
  const SyntheticModel m(ModelKind::CircleFlat);
  const KernelDensityEstimator est = fit(m, 2000, 401);
  RidgeField field = evaluate_field(est, auto_grid(est.sample(), est.h()), FieldOptions{});
  density_floor_mask(est, field, 0.05);
  const BootstrapEngine engine(est, field, candidate_set(field, RhoSpec::Value(default_rho_n(est, CaseHint::B))));
  const auto n = static_cast<std::size_t>(est.n());
  const double zero = engine.multiplier_draw(std::vector<double>(n, 0.0)).sup;
  const double constant = engine.multiplier_draw(std::vector<double>(n, 1.7)).sup;
  std::vector<Eigen::Index> identity(n);
  std::iota(identity.begin(), identity.end(), Eigen::Index{0});
  const double resample = engine.empirical_draw(identity).sup;
  return {zero == 0.0 && constant == 0.0 && resample == 0.0,
          "zero " + fmt(zero) + ", constant " + fmt(constant) + ", identity resample " + fmt(resample) + " over " +
              std::to_string(engine.candidates().size()) + " candidates"};
}

CoverageResult study(ModelKind kind, Eigen::Index n, int M, BootstrapMode mode, std::uint64_t seed) {
  CoverageConfig c;
  c.n = n;
  c.B = 200;
  c.M = M;
  c.alpha = 0.1;
  c.mode = mode;
  c.m_truth = 256;
  c.seed = seed;
  return coverage_experiment(SyntheticModel(kind), c);
}

Outcome coverage(ModelKind kind, std::uint64_t seed) {
  const Timer t;
  bool ok = true;
  std::string detail;
  for (BootstrapMode mode : {BootstrapMode::Multiplier, BootstrapMode::Empirical}) {
    const CoverageSummary s = study(kind, 2000, 100, mode, seed).summary;
    const bool in_band = s.coverage >= 0.80 && s.coverage <= 0.97;
    ok = ok && in_band;
    detail += bootstrap_mode_name(mode) + " " + fmt(s.coverage) + " (failed " + std::to_string(s.failed) +
              ", mean sup mask->truth " + fmt(s.mean_sup_mask_to_truth) + "); ";
  }
  const double secs = t.seconds();
  ok = ok && secs <= 1800.0;
  return {ok, detail + "band [0.80, 0.97], " + fmt(secs) + " s"};
}

Outcome sun_cross() {
  const CoverageResult r = study(ModelKind::SunCross, 5000, 100, BootstrapMode::Multiplier, 701);
  int good = 0, covered = 0;
  for (const auto& rec : r.records) {
    covered += rec.covered;
    good += rec.covered && rec.connected;
  }
  return {good >= 80, std::to_string(good) + "/100 runs cover every ridge point in one component (" +
                          std::to_string(covered) + " cover; need >= 80)"};
}

Outcome localization() {
  std::vector<double> means;
  std::string detail;
  for (Eigen::Index n : {1000, 2000, 4000, 8000}) {
    const CoverageSummary s = study(ModelKind::CircleFlat, n, 50, BootstrapMode::Multiplier, 801).summary;
    means.push_back(s.mean_sup_mask_to_truth);
    detail += "n=" + std::to_string(n) + ": " + fmt(s.mean_sup_mask_to_truth) + "  ";
  }
  bool ok = true;
  for (std::size_t i = 1; i < means.size(); ++i) ok = ok && means[i] < means[i - 1];
  return {ok, "mean sup mask->truth " + detail};
}

Outcome beta_prime() {
  const double r_n = 0.05;
  GridSpec g;
  g.lower = Eigen::Vector2d(-1, -1);
  g.upper = Eigen::Vector2d(1, 1);
  g.resolution = {161, 161};  // spacing r_n / 4
  bool ok = true;
  std::string detail;
  for (double gamma : {1.0, 2.0}) {
    std::vector<double> p(g.node_count());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::pow(g.node(i).norm(), gamma);
    const NodeMask all(p.size(), 1);
    const double b = estimate_beta_prime_values(g, p, all, all, r_n).beta_hat;
    ok = ok && std::abs(b - gamma) <= 2.0 / std::abs(std::log(r_n));
    detail += "gamma " + fmt(gamma) + " -> " + fmt(b) + "  ";
  }
  return {ok, detail + "(tol " + fmt(2.0 / std::abs(std::log(r_n))) + ")"};
}

// Same pipeline as `ridgeci infer`: default r_n, grid spacing r_n / 4,
// default rho_n for the model's case, B = 500.
double rejection_rate(ModelKind kind, int M, std::uint64_t seed, int* failed) {
  const SyntheticModel m(kind);
  int rejected = 0;
  *failed = 0;
  for (int run = 0; run < M; ++run) {
    try {
      const KernelDensityEstimator est = fit(m, 2000, derive_seed(seed, static_cast<std::uint64_t>(run), 0));
      const double r_n = default_r_n(2000.0);
      RidgeField field = evaluate_field(est, auto_grid(est.sample(), est.h(), r_n / 4.0), FieldOptions{});
      density_floor_mask(est, field, 0.05);
      FlatnessOptions fo;
      fo.rho = RhoSpec::Value(default_rho_n(est, m.case_hint()));
      fo.alpha = 0.1;
      fo.B = 500;
      fo.seed = derive_seed(seed, static_cast<std::uint64_t>(run), 2);
      rejected += flatness_test(est, field, fo).reject;
    } catch (const std::exception&) {
      ++*failed;
    }
  }
  return static_cast<double>(rejected) / M;
}

Outcome flatness() {
  int f0 = 0, f1 = 0;
  const double h0 = rejection_rate(ModelKind::CircleFlat, 50, 1001, &f0);
  const double h1 = rejection_rate(ModelKind::CircleModulated, 50, 1002, &f1);
  return {h0 <= 0.20 && h1 >= 0.80, "H0 (circle_flat) rejection " + fmt(h0) + " (<= 0.20, " + std::to_string(f0) +
                                        " failed); H1 (circle_modulated) rejection " + fmt(h1) + " (>= 0.80, " +
                                        std::to_string(f1) + " failed)"};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream f(e.path(), std::ios::binary);
    files[e.path().filename().string()] = {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  }
  return files;
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  const std::vector<std::string> commands{
      "estimate --model circle_flat --n 2000 --seed 11",
      "confidence --model circle_flat --n 2000 --B 200 --seed 11",
      "confidence --model sun_cross --n 2000 --B 100 --mode empirical --seed 11",
      "infer --model circle_modulated --n 2000 --B 200 --seed 11",
      "coverage --model circle_flat --n 1000 --B 50 --M 3 --seed 11",
      "validate-kernel --dim 2 --seed 11"};
  int identical = 0;
  std::string detail;
  for (std::size_t k = 0; k < commands.size(); ++k) {
    const fs::path out = work / ("determinism_" + std::to_string(k));
    std::map<std::string, std::string> first;
    bool ok = true;
    for (int rep = 0; rep < 2 && ok; ++rep) {
      fs::remove_all(out);
      const std::string cmd = "\"" + cli + "\" " + commands[k] + " --out \"" + out.string() + "\" > \"" +
                              (work / "determinism.log").string() + "\" 2>&1";
      ok = std::system(cmd.c_str()) == 0;
      if (!ok) break;
      if (rep == 0)
        first = snapshot(out);
      else
        ok = snapshot(out) == first && !first.empty();
    }
    identical += ok;
    if (!ok) detail += " [" + commands[k] + " differs or failed]";
  }
  return {identical == static_cast<int>(commands.size()),
          std::to_string(identical) + "/" + std::to_string(commands.size()) + " commands byte-identical" + detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ridgeci acceptance criteria"};
  std::string cli;
  std::string workdir = "acceptance_work";
  std::vector<int> only;
  app.add_option("--cli", cli, "path to the ridgeci executable")->required();
  app.add_option("--workdir", workdir, "scratch directory");
  app.add_option("--only", only, "run a subset of criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, jets},
      {2, perturbation},
      {3, kronecker},
      {4, degeneracy},
      {5, [] { return coverage(ModelKind::CircleFlat, 501); }},
      {6, [] { return coverage(ModelKind::CircleModulated, 601); }},
      {7, sun_cross},
      {8, localization},
      {9, beta_prime},
      {10, flatness},
      {11, [&] { return determinism(cli, workdir); }}};

  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
