#include "ridgeci/cli.hpp"

#include "ridgeci/bootstrap.hpp"
#include "ridgeci/coverage.hpp"
#include "ridgeci/diagnostics.hpp"
#include "ridgeci/errors.hpp"
#include "ridgeci/field.hpp"
#include "ridgeci/inference.hpp"
#include "ridgeci/kde.hpp"
#include "ridgeci/parallel.hpp"
#include "ridgeci/synthetic.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace ridgeci {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

nlohmann::ordered_json RunConfig::to_json() const {
  ojson j;
  j["input"] = input;
  j["model"] = model;
  j["n"] = n;
  j["r"] = r;
  j["h"] = h;
  j["case"] = case_hint;
  j["alpha"] = alpha;
  j["B"] = B;
  j["mode"] = mode;
  j["rho"] = rho;
  j["log_density"] = log_density;
  j["floor_q"] = floor_q;
  j["grid"] = grid;
  j["seed"] = seed;
  j["threads"] = threads;
  j["out"] = out;
  j["resume"] = resume;
  j["M"] = M;
  j["m_truth"] = m_truth;
  j["sigma"] = sigma;
  j["a"] = a;
  j["r_n"] = r_n;
  j["epsilon_prime"] = epsilon_prime;
  j["dim"] = dim;
  j["test_identity_resample"] = test_identity_resample;
  j["test_zero_gradient"] = test_zero_gradient;
  return j;
}

void RunConfig::apply_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  const std::map<std::string, std::function<void(const nlohmann::json&)>> setters{
      {"input", [&](const auto& v) { input = v.template get<std::string>(); }},
      {"model", [&](const auto& v) { model = v.template get<std::string>(); }},
      {"n", [&](const auto& v) { n = v.template get<long long>(); }},
      {"r", [&](const auto& v) { r = v.template get<int>(); }},
      {"h", [&](const auto& v) { h = v.is_string() ? v.template get<std::string>() : v.dump(); }},
      {"case", [&](const auto& v) { case_hint = v.template get<std::string>(); }},
      {"alpha", [&](const auto& v) { alpha = v.template get<double>(); }},
      {"B", [&](const auto& v) { B = v.template get<int>(); }},
      {"mode", [&](const auto& v) { mode = v.template get<std::string>(); }},
      {"rho", [&](const auto& v) { rho = v.is_string() ? v.template get<std::string>() : v.dump(); }},
      {"log_density", [&](const auto& v) { log_density = v.template get<bool>(); }},
      {"floor_q", [&](const auto& v) { floor_q = v.template get<double>(); }},
      {"grid", [&](const auto& v) { grid = v.is_string() ? v.template get<std::string>() : v.dump(); }},
      {"seed", [&](const auto& v) { seed = v.template get<std::uint64_t>(); }},
      {"threads", [&](const auto& v) { threads = v.template get<int>(); }},
      {"out", [&](const auto& v) { out = v.template get<std::string>(); }},
      {"resume", [&](const auto& v) { resume = v.template get<bool>(); }},
      {"M", [&](const auto& v) { M = v.template get<int>(); }},
      {"m_truth", [&](const auto& v) { m_truth = v.template get<int>(); }},
      {"sigma", [&](const auto& v) { sigma = v.template get<double>(); }},
      {"a", [&](const auto& v) { a = v.template get<double>(); }},
      {"r_n", [&](const auto& v) { r_n = v.template get<double>(); }},
      {"epsilon_prime", [&](const auto& v) { epsilon_prime = v.template get<double>(); }},
      {"dim", [&](const auto& v) { dim = v.template get<int>(); }},
      {"test_identity_resample", [&](const auto& v) { test_identity_resample = v.template get<bool>(); }},
      {"test_zero_gradient", [&](const auto& v) { test_zero_gradient = v.template get<bool>(); }},
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "schema") continue;
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second(value);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    }
  }
}

namespace {

void append_double(std::string& s, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  s.append(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

double parse_number(const std::string& text, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError(what + " must be a number, got '" + text + "'");
  return v;
}

struct Context {
  RunConfig cfg;
  std::optional<SyntheticModel> model;
  std::optional<KernelDensityEstimator> est;
  CaseHint hint = CaseHint::Auto;
  fs::path out_dir;
};

void validate_common(const RunConfig& c) {
  if (c.r < 1) throw ConfigError("r must be >= 1");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (c.B < 1) throw ConfigError("B must be >= 1");
  if (!(c.floor_q > 0.0 && c.floor_q < 1.0)) throw ConfigError("floor-q must lie in (0, 1)");
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  parse_bootstrap_mode(c.mode);
}

fs::path prepare_out(const RunConfig& c) {
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory '" + c.out + "'");
  return dir;
}

std::optional<SyntheticModel> make_model(const RunConfig& c) {
  if (c.model.empty()) return std::nullopt;
  ModelParams p;
  p.sigma = c.sigma;
  p.a = c.a;
  return SyntheticModel(parse_model_kind(c.model), p);
}

void load_data(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  if (!c.input.empty() && !c.model.empty()) throw ConfigError("use either --input or --model, not both");
  ctx.model = make_model(c);
  ctx.hint = c.case_hint == "auto" && ctx.model ? ctx.model->case_hint() : parse_case_hint(c.case_hint);
  std::optional<SampleMatrix> sample;
  if (!c.input.empty()) {
    sample.emplace(read_sample_csv(c.input));
  } else if (ctx.model) {
    if (c.n < 2) throw ConfigError("n must be >= 2");
    sample.emplace(ctx.model->sample(static_cast<Eigen::Index>(c.n), derive_seed(c.seed, 0, 0)));
  } else {
    throw ConfigError("no data: pass --input <csv> or --model <name>");
  }
  if (c.r >= sample->d()) throw ConfigError("r must be below the data dimension " + std::to_string(sample->d()));
  const double h = c.h == "auto" ? default_bandwidth(*sample, ctx.hint).h : parse_number(c.h, "h");
  const int d = sample->d();
  ctx.est.emplace(std::move(*sample), Bandwidth(h), KernelSpec{d, KernelProfile::Triweight});
}

GridSpec resolve_grid(const RunConfig& c, const KernelDensityEstimator& est, double max_spacing) {
  const double h = est.h();
  const double auto_spacing = std::min(h / 3.0, max_spacing);
  if (c.grid == "auto") return auto_grid(est.sample(), h, auto_spacing);
  if (c.grid.find(':') == std::string::npos) {
    const double s = parse_number(c.grid, "grid spacing");
    if (!(s > 0.0)) throw ConfigError("grid spacing must be positive");
    return auto_grid(est.sample(), h, s);
  }
  GridSpec g;
  std::vector<double> lo, hi;
  std::stringstream axes(c.grid);
  std::string axis;
  while (std::getline(axes, axis, ',')) {
    std::stringstream parts(axis);
    std::string a, b, r;
    if (!std::getline(parts, a, ':') || !std::getline(parts, b, ':') || !std::getline(parts, r, ':'))
      throw ConfigError("grid axis must look like lo:hi:res, got '" + axis + "'");
    lo.push_back(parse_number(a, "grid lower"));
    hi.push_back(parse_number(b, "grid upper"));
    g.resolution.push_back(static_cast<int>(parse_number(r, "grid resolution")));
  }
  g.lower = Eigen::Map<Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  g.upper = Eigen::Map<Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  if (g.d() != est.d()) throw ConfigError("grid has " + std::to_string(g.d()) + " axes, data has " + std::to_string(est.d()));
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

RhoSpec resolve_rho_spec(const RunConfig& c, const KernelDensityEstimator& est, CaseHint hint) {
  if (c.rho == "auto") return RhoSpec::Value(default_rho_n(est, hint));
  return parse_rho(c.rho);
}

ojson grid_json(const GridSpec& g) {
  ojson j;
  j["lower"] = std::vector<double>(g.lower.data(), g.lower.data() + g.d());
  j["upper"] = std::vector<double>(g.upper.data(), g.upper.data() + g.d());
  j["resolution"] = g.resolution;
  j["spacing"] = g.max_spacing();
  return j;
}

void print_resolved(std::ostream& out, const std::string& command, const RunConfig& c, const ojson& resolved,
                    const fs::path& dir) {
  ojson j;
  j["schema"] = kConfigSchema;
  j["command"] = command;
  j["config"] = c.to_json();
  j["resolved"] = resolved;
  out << "resolved_config " << j.dump() << std::endl;
  write_json(dir / "config.json", j);
}

RidgeField build_field(const Context& ctx, const GridSpec& grid) {
  FieldOptions fo;
  fo.r = ctx.cfg.r;
  fo.use_log = ctx.cfg.log_density;
  RidgeField field = evaluate_field(*ctx.est, grid, fo);
  density_floor_mask(*ctx.est, field, ctx.cfg.floor_q);
  return field;
}

ojson resolved_common(const Context& ctx, const GridSpec& grid) {
  ojson r;
  r["n"] = ctx.est->n();
  r["d"] = ctx.est->d();
  r["h"] = ctx.est->h();
  r["case"] = case_hint_name(ctx.hint);
  r["grid"] = grid_json(grid);
  r["rho_default"] = default_rho_n(*ctx.est, ctx.hint);
  return r;
}

int cmd_estimate(Context& ctx, std::ostream& out) {
  load_data(ctx);
  const GridSpec grid = resolve_grid(ctx.cfg, *ctx.est, std::numeric_limits<double>::infinity());
  grid.validate();
  print_resolved(out, "estimate", ctx.cfg, resolved_common(ctx, grid), ctx.out_dir);
  const RidgeField field = build_field(ctx, grid);
  write_field(field, NodeMask{}, (ctx.out_dir / "field.csv").string(), (ctx.out_dir / "field.json").string());
  out << "estimate: " << field.valid_count() << " valid nodes of " << field.size() << "\n";
  return 0;
}

std::string mask_csv(const GridSpec& grid, const NodeMask& mask) {
  std::string s;
  for (int a = 0; a < grid.d(); ++a) s += "x" + std::to_string(a) + ",";
  s += "mask\n";
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const Eigen::VectorXd x = grid.node(i);
    for (int a = 0; a < grid.d(); ++a) {
      append_double(s, x[a]);
      s += ',';
    }
    s += mask[i] ? "1\n" : "0\n";
  }
  return s;
}

// Masked nodes with an axis neighbor that is unmasked or off the grid.
std::string boundary_csv(const GridSpec& grid, const NodeMask& mask) {
  const auto labels = connected_components(grid, mask);
  std::string s;
  for (int a = 0; a < grid.d(); ++a) s += "x" + std::to_string(a) + ",";
  s += "component\n";
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    auto idx = grid.multi_index(i);
    bool edge = false;
    for (int a = 0; a < grid.d() && !edge; ++a) {
      for (int step : {-1, 1}) {
        const int v = idx[a] + step;
        if (v < 0 || v >= grid.resolution[a]) {
          edge = true;
          break;
        }
        idx[a] = v;
        const bool nb = mask[grid.flat_index(idx)] != 0;
        idx[a] -= step;
        if (!nb) {
          edge = true;
          break;
        }
      }
    }
    if (!edge) continue;
    const Eigen::VectorXd x = grid.node(i);
    for (int a = 0; a < grid.d(); ++a) {
      append_double(s, x[a]);
      s += ',';
    }
    s += std::to_string(labels[i]) + "\n";
  }
  return s;
}

int cmd_confidence(Context& ctx, std::ostream& out) {
  load_data(ctx);
  const GridSpec grid = resolve_grid(ctx.cfg, *ctx.est, std::numeric_limits<double>::infinity());
  grid.validate();
  BootstrapConfig bc;
  bc.B = ctx.cfg.B;
  bc.mode = parse_bootstrap_mode(ctx.cfg.mode);
  bc.alpha = ctx.cfg.alpha;
  bc.seed = derive_seed(ctx.cfg.seed, 0, 1);
  bc.rho = resolve_rho_spec(ctx.cfg, *ctx.est, ctx.hint);
  bc.test_identity_resample = ctx.cfg.test_identity_resample;
  ojson resolved = resolved_common(ctx, grid);
  resolved["rho"] = bc.rho.zero ? ojson("zero") : ojson(bc.rho.value);
  print_resolved(out, "confidence", ctx.cfg, resolved, ctx.out_dir);

  const RidgeField field = build_field(ctx, grid);
  const ConfidenceResult res = confidence_region(*ctx.est, field, bc);
  ojson j;
  j["schema"] = kBootstrapSchema;
  j["config"] = ctx.cfg.to_json();
  j["mode"] = bootstrap_mode_name(res.region.mode);
  j["alpha"] = res.region.alpha;
  j["B"] = bc.B;
  j["rho"] = res.region.rho;
  j["candidate_count"] = res.region.candidate_count;
  j["threshold"] = res.region.threshold;
  j["mask_count"] = mask_indices(res.region.mask).size();
  j["draws"] = res.draws.draws;
  j["skipped"] = res.draws.skipped;
  write_json(ctx.out_dir / "draws.json", j);
  write_text(ctx.out_dir / "region.csv", mask_csv(field.grid, res.region.mask));
  write_text(ctx.out_dir / "boundary.csv", boundary_csv(field.grid, res.region.mask));
  write_field(field, res.region.mask, (ctx.out_dir / "field.csv").string(), (ctx.out_dir / "field.json").string());
  out << "confidence: threshold " << res.region.threshold << ", " << mask_indices(res.region.mask).size()
      << " masked nodes, " << res.region.candidate_count << " candidates\n";
  return 0;
}

int cmd_infer(Context& ctx, std::ostream& out) {
  load_data(ctx);
  const double r_n = ctx.cfg.r_n > 0.0 ? ctx.cfg.r_n : default_r_n(static_cast<double>(ctx.est->n()));
  const GridSpec grid = resolve_grid(ctx.cfg, *ctx.est, r_n / 4.0);
  grid.validate();
  FlatnessOptions fo;
  fo.rho = resolve_rho_spec(ctx.cfg, *ctx.est, ctx.hint);
  fo.alpha = ctx.cfg.alpha;
  fo.B = ctx.cfg.B;
  fo.seed = derive_seed(ctx.cfg.seed, 0, 2);
  fo.r_n = r_n;
  fo.epsilon_prime = ctx.cfg.epsilon_prime;
  fo.test_zero_gradient = ctx.cfg.test_zero_gradient;
  ojson resolved = resolved_common(ctx, grid);
  resolved["r_n"] = r_n;
  resolved["rho"] = fo.rho.zero ? ojson("zero") : ojson(fo.rho.value);
  print_resolved(out, "infer", ctx.cfg, resolved, ctx.out_dir);

  const RidgeField field = build_field(ctx, grid);
  const FlatnessTestResult res = flatness_test(*ctx.est, field, fo);
  ojson j;
  j["schema"] = kInferSchema;
  j["config"] = ctx.cfg.to_json();
  j["beta_prime"] = {{"r_n", res.beta.r_n}, {"R_n", res.beta.R_n}, {"beta_hat", res.beta.beta_hat},
                     {"centers", res.beta.centers}};
  j["epsilon_prime"] = ctx.cfg.epsilon_prime;
  j["beta_inflated"] = res.beta_inflated;
  j["r_n_condition"] = res.r_n_condition;
  j["warning"] = res.warning;
  j["flatness"] = {{"t_n", res.t_n},
                   {"rho", res.rho},
                   {"radius", res.radius},
                   {"candidate_count", res.candidate_count},
                   {"T_n", res.T_n},
                   {"phi_e", res.phi_e},
                   {"alpha", fo.alpha},
                   {"B", fo.B},
                   {"decision", res.reject ? "reject" : "retain"}};
  j["draws"] = res.draws;
  write_json(ctx.out_dir / "infer.json", j);
  out << "infer: beta' = " << res.beta.beta_hat << ", T_n = " << res.T_n << ", phi = " << res.phi_e << " -> "
      << (res.reject ? "reject" : "retain") << "\n";
  if (!res.warning.empty()) out << "warning: " << res.warning << "\n";
  return 0;
}

int cmd_coverage(Context& ctx, std::ostream& out) {
  const RunConfig& c = ctx.cfg;
  ctx.model = make_model(c);
  if (!ctx.model) throw ConfigError("coverage needs --model");
  if (c.M < 1) throw ConfigError("M must be >= 1");
  if (c.n < 2) throw ConfigError("n must be >= 2");
  CoverageConfig cc;
  cc.n = static_cast<Eigen::Index>(c.n);
  cc.B = c.B;
  cc.M = c.M;
  cc.alpha = c.alpha;
  cc.mode = parse_bootstrap_mode(c.mode);
  if (c.rho != "auto") cc.rho = parse_rho(c.rho);
  if (c.h != "auto") cc.h = parse_number(c.h, "h");
  cc.use_log = c.log_density;
  cc.floor_q = c.floor_q;
  cc.m_truth = c.m_truth;
  cc.seed = c.seed;
  cc.r = c.r;
  ojson resolved;
  resolved["model"] = ctx.model->name();
  resolved["case"] = case_hint_name(ctx.model->case_hint());
  resolved["rho"] = cc.rho ? (cc.rho->zero ? ojson("zero") : ojson(cc.rho->value)) : ojson("default_rho_n per run");
  resolved["h"] = cc.h ? ojson(*cc.h) : ojson("default_bandwidth per run");
  print_resolved(out, "coverage", c, resolved, ctx.out_dir);

  const fs::path runs_path = ctx.out_dir / "runs.jsonl";
  std::map<int, RunRecord> done;
  if (c.resume && fs::exists(runs_path)) {
    std::ifstream in(runs_path);
    std::string line;
    while (std::getline(in, line)) {
      try {
        const auto rec = RunRecord::from_json(nlohmann::json::parse(line));
        if (rec.run == static_cast<int>(done.size())) done.emplace(rec.run, rec);
      } catch (const std::exception&) {
        break;  // truncated tail of an interrupted run
      }
    }
  }
  {
    std::string kept;
    for (const auto& [run, rec] : done) kept += rec.to_json().dump() + "\n";
    write_text(runs_path, kept);
  }
  std::ofstream runs(runs_path, std::ios::binary | std::ios::app);
  if (!runs) throw ConfigError("cannot write '" + runs_path.string() + "'");
  out << "coverage: resuming after " << done.size() << " completed runs\n";
  const CoverageResult res = coverage_experiment(*ctx.model, cc, done, [&](const RunRecord& rec) {
    runs << rec.to_json().dump() << "\n";
    runs.flush();
  });
  ojson summary = res.summary.to_json();
  summary["config"] = c.to_json();
  write_json(ctx.out_dir / "summary.json", summary);
  out << "coverage: " << res.summary.coverage << " (" << res.summary.runs << " runs, " << res.summary.failed << " failed)\n";
  return 0;
}

int cmd_validate_kernel(Context& ctx, std::ostream& out) {
  if (ctx.cfg.dim < 1 || ctx.cfg.dim > 4) throw ConfigError("validate-kernel supports 1 <= dim <= 4");
  print_resolved(out, "validate-kernel", ctx.cfg, ojson::object(), ctx.out_dir);
  const auto reports = check_kernel(KernelSpec{ctx.cfg.dim, KernelProfile::Triweight}, ctx.cfg.seed);
  ojson j;
  j["schema"] = kDiagnosticsSchema;
  j["reports"] = ojson::array();
  bool ok = true;
  for (const auto& r : reports) {
    j["reports"].push_back(r.to_json());
    ok = ok && r.pass;
    out << r.name << ": " << (r.pass ? "pass" : "FAIL") << " " << r.observed.dump() << "\n";
  }
  write_json(ctx.out_dir / "kernel_report.json", j);
  if (!ok) throw NumericalError("kernel validation failed");
  return 0;
}

int cmd_self_check(Context& ctx, std::ostream& out) {
  print_resolved(out, "self-check", ctx.cfg, ojson::object(), ctx.out_dir);
  const auto reports = run_self_check(ctx.cfg.seed);
  ojson j;
  j["schema"] = kDiagnosticsSchema;
  j["reports"] = ojson::array();
  bool ok = true;
  for (const auto& r : reports) {
    j["reports"].push_back(r.to_json());
    ok = ok && r.pass;
    out << r.name << ": " << (r.pass ? "pass" : "FAIL") << " " << r.observed.dump() << "\n";
  }
  write_json(ctx.out_dir / "self_check.json", j);
  if (!ok) throw NumericalError("self-check failed");
  return 0;
}

std::string quote(std::string s) {
  for (char& ch : s)
    if (ch == '"' || ch == '\n') ch = '\'';
  return "\"" + s + "\"";
}

int fail(std::ostream& err, int code, const std::string& kind, const std::string& reason) {
  err << "ridgeci: error exit=" << code << " kind=" << kind << " reason=" << quote(reason) << std::endl;
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Density ridge estimation with bootstrap confidence regions"};
  app.name("ridgeci");
  app.fallthrough();
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(0, 1);

  RunConfig flags;
  std::string config_path;
  bool self_check = false;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> bound;
  auto bind = [&](CLI::Option* opt, auto member) {
    bound.emplace_back(opt, [&flags, member](RunConfig& c) { c.*member = flags.*member; });
    return opt;
  };

  app.add_option("--config", config_path, "JSON config file (flags override its values)");
  bind(app.add_option("--input", flags.input, "CSV sample, one point per row"), &RunConfig::input);
  bind(app.add_option("--model", flags.model, "synthetic model: circle_flat, circle_modulated, sun_cross, gaussian_blob"),
       &RunConfig::model);
  bind(app.add_option("--n", flags.n, "synthetic sample size"), &RunConfig::n);
  bind(app.add_option("--r", flags.r, "ridge dimension"), &RunConfig::r);
  bind(app.add_option("--h", flags.h, "bandwidth or 'auto'"), &RunConfig::h);
  bind(app.add_option("--case", flags.case_hint, "bandwidth / rho_n case: a, b or auto"), &RunConfig::case_hint);
  bind(app.add_option("--alpha", flags.alpha, "level"), &RunConfig::alpha);
  bind(app.add_option("--B", flags.B, "bootstrap replicates"), &RunConfig::B);
  bind(app.add_option("--mode", flags.mode, "multiplier or empirical"), &RunConfig::mode);
  bind(app.add_option("--rho", flags.rho, "candidate threshold: number, 'zero' or 'auto'"), &RunConfig::rho);
  bind(app.add_flag("--log-density", flags.log_density, "estimate ridges of log f"), &RunConfig::log_density);
  bind(app.add_option("--floor-q", flags.floor_q, "density-floor quantile"), &RunConfig::floor_q);
  bind(app.add_option("--grid", flags.grid, "'auto', a spacing, or lo:hi:res per axis (comma separated)"),
       &RunConfig::grid);
  bind(app.add_option("--seed", flags.seed, "random seed"), &RunConfig::seed);
  bind(app.add_option("--threads", flags.threads, "worker cap (0 = runtime default)"), &RunConfig::threads);
  bind(app.add_option("--out", flags.out, "output directory"), &RunConfig::out);
  bind(app.add_flag("--resume", flags.resume, "coverage: reuse completed runs"), &RunConfig::resume);
  bind(app.add_option("--M", flags.M, "coverage: number of datasets"), &RunConfig::M);
  bind(app.add_option("--m-truth", flags.m_truth, "coverage: true ridge points"), &RunConfig::m_truth);
  bind(app.add_option("--sigma", flags.sigma, "model ring width"), &RunConfig::sigma);
  bind(app.add_option("--a", flags.a, "circle_modulated amplitude"), &RunConfig::a);
  bind(app.add_option("--r-n", flags.r_n, "infer: beta' ball radius (0 = 1/ln n)"), &RunConfig::r_n);
  bind(app.add_option("--epsilon-prime", flags.epsilon_prime, "infer: beta' inflation"), &RunConfig::epsilon_prime);
  bind(app.add_option("--dim", flags.dim, "validate-kernel: dimension"), &RunConfig::dim);
  bind(app.add_flag("--test-identity-resample", flags.test_identity_resample)->group(""),
       &RunConfig::test_identity_resample);
  bind(app.add_flag("--test-zero-gradient", flags.test_zero_gradient)->group(""), &RunConfig::test_zero_gradient);
  app.add_flag("--self-check", self_check)->group("");

  auto* estimate = app.add_subcommand("estimate", "evaluate the nonridgeness field");
  auto* confidence = app.add_subcommand("confidence", "bootstrap confidence region");
  auto* infer = app.add_subcommand("infer", "beta' estimate and flatness test");
  auto* coverage = app.add_subcommand("coverage", "Monte Carlo coverage study");
  auto* validate = app.add_subcommand("validate-kernel", "kernel moment and derivative checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(err, 2, "config", e.what());
  }

  try {
    Context ctx;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot open config file '" + config_path + "'");
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(f);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + config_path + "' is not valid JSON");
      }
      ctx.cfg.apply_json(j);
    }
    for (auto& [opt, copy] : bound)
      if (opt->count() > 0) copy(ctx.cfg);
    validate_common(ctx.cfg);
    set_max_threads(ctx.cfg.threads);

    const bool any = estimate->parsed() || confidence->parsed() || infer->parsed() || coverage->parsed() ||
                     validate->parsed();
    if (!any && !self_check) {
      out << app.help();
      return fail(err, 2, "config", "no subcommand given");
    }
    // Fail before touching the filesystem when there is nothing to read.
    if ((estimate->parsed() || confidence->parsed() || infer->parsed()) && ctx.cfg.input.empty() &&
        ctx.cfg.model.empty())
      throw ConfigError("no data: pass --input <csv> or --model <name>");
    ctx.out_dir = prepare_out(ctx.cfg);
    if (self_check) return cmd_self_check(ctx, out);
    if (estimate->parsed()) return cmd_estimate(ctx, out);
    if (confidence->parsed()) return cmd_confidence(ctx, out);
    if (infer->parsed()) return cmd_infer(ctx, out);
    if (coverage->parsed()) return cmd_coverage(ctx, out);
    return cmd_validate_kernel(ctx, out);
  } catch (const NumericalError& e) {
    return fail(err, 3, "numerical", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(err, 2, "config", e.what());
  } catch (const std::out_of_range& e) {
    return fail(err, 2, "config", e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(err, 2, "config", e.what());
  } catch (const std::exception& e) {
    return fail(err, 3, "numerical", e.what());
  }
}

}  // namespace ridgeci
