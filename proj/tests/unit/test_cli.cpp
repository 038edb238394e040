#include "ridgeci/bootstrap.hpp"
#include "ridgeci/cli.hpp"
#include "ridgeci/coverage.hpp"
#include "ridgeci/diagnostics.hpp"
#include "ridgeci/field.hpp"
#include "ridgeci/inference.hpp"
#include "test_support.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace ridgeci;
namespace fs = std::filesystem;
using testing_support::fresh_dir;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "ridgeci");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = slurp(e.path());
  return files;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l))
    if (!l.empty()) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("usage errors exit with code 2 and one reason line") {
  const auto dir = fresh_dir("cli_usage");
  auto r = run({});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("ridgeci: error exit=2 kind=config reason=\"", 0) == 0);
  CHECK(lines(r.err).size() == 1);

  CHECK(run({"estimate", "--bogus"}).code == 2);
  CHECK(run({"--help"}).code == 0);

  r = run({"estimate", "--model", "circle_flat", "--alpha", "1.5", "--out", dir.string()});
  CHECK(r.code == 2);
  r = run({"estimate", "--model", "circle_flat", "--input", "x.csv", "--out", dir.string()});
  CHECK(r.code == 2);
  r = run({"estimate", "--model", "hexagon", "--out", dir.string()});
  CHECK(r.code == 2);
  r = run({"estimate", "--out", dir.string()});
  CHECK(r.code == 2);
  r = run({"validate-kernel", "--dim", "5", "--out", dir.string()});
  CHECK(r.code == 2);
}

TEST_CASE("missing input names the path") {
  const auto dir = fresh_dir("cli_missing");
  const std::string path = (dir / "no_such_sample.csv").string();
  const auto r = run({"estimate", "--input", path, "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find(path) != std::string::npos);
}

TEST_CASE("empty candidate set is a numerical failure") {
  const auto dir = fresh_dir("cli_empty");
  const auto r = run({"confidence", "--model", "circle_flat", "--n", "500", "--rho", "0", "--B", "5", "--out", dir.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("kind=numerical") != std::string::npos);
  CHECK(r.err.find("empty candidate set") != std::string::npos);
}

TEST_CASE("estimate writes a field and echoes the resolved config") {
  const auto dir = fresh_dir("cli_estimate");
  const auto r = run({"estimate", "--model", "circle_flat", "--n", "2000", "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("resolved_config {", 0) == 0);
  const auto cfg = load_json(dir / "config.json");
  CHECK(cfg["schema"] == kConfigSchema);
  CHECK(cfg["command"] == "estimate");
  CHECK(cfg["resolved"]["h"].get<double>() > 0.0);
  CHECK(cfg["resolved"]["rho_default"].get<double>() > 0.0);
  const LoadedField lf = read_field((dir / "field.csv").string(), (dir / "field.json").string());
  CHECK(lf.field.valid_count() > 0);
  CHECK(load_json(dir / "field.json")["schema"] == kFieldSchema);
}

TEST_CASE("config file and flag precedence") {
  const auto dir = fresh_dir("cli_config");
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"model": "circle_flat", "n": 800, "alpha": 0.2, "grid": 0.1})";
  }
  auto r = run({"estimate", "--config", (dir / "cfg.json").string(), "--n", "900", "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  const auto cfg = load_json(dir / "o" / "config.json");
  CHECK(cfg["config"]["n"] == 900);
  CHECK(cfg["config"]["alpha"] == 0.2);
  CHECK(cfg["resolved"]["grid"]["spacing"].get<double>() <= 0.1);

  // The echoed config reruns to the same outputs.
  {
    std::ofstream f(dir / "echo.json");
    f << cfg["config"].dump();
  }
  const auto first = snapshot(dir / "o");
  r = run({"estimate", "--config", (dir / "echo.json").string()});
  REQUIRE(r.code == 0);
  CHECK(snapshot(dir / "o").at("field.csv") == first.at("field.csv"));

  {
    std::ofstream f(dir / "bad.json");
    f << R"({"model": "circle_flat", "colour": 3})";
  }
  r = run({"estimate", "--config", (dir / "bad.json").string(), "--out", (dir / "o2").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("colour") != std::string::npos);
  CHECK(run({"estimate", "--config", (dir / "none.json").string()}).code == 2);
}

TEST_CASE("reruns are byte-identical") {
  const auto dir = fresh_dir("cli_determinism");
  const std::vector<std::vector<std::string>> commands{
      {"estimate", "--model", "circle_flat", "--n", "1500", "--seed", "3"},
      {"confidence", "--model", "circle_modulated", "--n", "1500", "--B", "50", "--seed", "3"},
      {"confidence", "--model", "circle_flat", "--n", "1000", "--B", "30", "--mode", "empirical", "--threads", "2"},
      {"infer", "--model", "circle_flat", "--n", "1500", "--B", "50", "--seed", "3"},
      {"coverage", "--model", "circle_flat", "--n", "800", "--B", "20", "--M", "2", "--m-truth", "32"},
      {"validate-kernel", "--dim", "3"}};
  int k = 0;
  for (auto args : commands) {
    const fs::path out = dir / std::to_string(k++);
    args.insert(args.end(), {"--out", out.string()});
    const auto a = run(args);
    REQUIRE(a.code == 0);
    const auto first = snapshot(out);
    fs::remove_all(out);
    const auto b = run(args);
    REQUIRE(b.code == 0);
    CHECK(snapshot(out) == first);
    CHECK(a.out == b.out);
  }
}

TEST_CASE("confidence outputs") {
  const auto dir = fresh_dir("cli_confidence");

  SUBCASE("identity resample gives threshold 0") {
    const auto r = run({"confidence", "--model", "circle_flat", "--n", "1000", "--B", "10", "--mode", "empirical",
                        "--test-identity-resample", "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto d = load_json(dir / "draws.json");
    CHECK(d["threshold"] == 0.0);
    for (const auto& v : d["draws"]) CHECK(v == 0.0);
  }
  SUBCASE("region file reloads to the in-memory mask") {
    const auto r = run({"confidence", "--model", "circle_flat", "--n", "2000", "--B", "100", "--out", dir.string()});
    REQUIRE(r.code == 0);
    const auto d = load_json(dir / "draws.json");
    CHECK(d["schema"] == kBootstrapSchema);
    CHECK(d["draws"].size() == 100);
    std::vector<double> draws = d["draws"].get<std::vector<double>>();
    const double t = d["threshold"].get<double>();
    CHECK(bootstrap_quantile(draws, 0.1) == t);

    const LoadedField lf = read_field((dir / "field.csv").string(), (dir / "field.json").string());
    const NodeMask recomputed = sublevel_region(lf.field, t);
    CHECK(lf.mask == recomputed);
    const auto rows = lines(slurp(dir / "region.csv"));
    REQUIRE(rows.size() == lf.field.size() + 1);
    CHECK(rows[0] == "x0,x1,mask");
    std::size_t masked = 0;
    for (std::size_t i = 0; i < lf.field.size(); ++i) {
      const bool m = rows[i + 1].back() == '1';
      CHECK(m == (lf.mask[i] != 0));
      masked += m;
    }
    CHECK(masked == d["mask_count"].get<std::size_t>());
    CHECK(masked > 0);

    // Boundary rows are masked nodes.
    const auto brows = lines(slurp(dir / "boundary.csv"));
    CHECK(brows[0] == "x0,x1,component");
    CHECK(brows.size() > 1);
    CHECK(brows.size() - 1 <= masked);
  }
  SUBCASE("sun_cross, n = 5000, alpha = 0.1") {
    const auto r = run({"confidence", "--model", "sun_cross", "--n", "5000", "--alpha", "0.1", "--B", "200", "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(load_json(dir / "draws.json")["mask_count"].get<std::size_t>() > 0);
  }
}

TEST_CASE("infer report") {
  const auto dir = fresh_dir("cli_infer");
  auto r = run({"infer", "--model", "circle_flat", "--n", "2000", "--B", "100", "--out", dir.string()});
  REQUIRE(r.code == 0);
  auto j = load_json(dir / "infer.json");
  CHECK(j["schema"] == kInferSchema);
  const std::string decision = j["flatness"]["decision"];
  CHECK((decision == "reject" || decision == "retain"));
  CHECK(j["flatness"]["t_n"].get<double>() == j["beta_prime"]["beta_hat"].get<double>() + 1.0);
  CHECK((decision == "reject") == (j["flatness"]["T_n"].get<double>() >= j["flatness"]["phi_e"].get<double>()));

  r = run({"infer", "--model", "circle_flat", "--n", "2000", "--B", "100", "--test-zero-gradient", "--out", dir.string()});
  REQUIRE(r.code == 0);
  j = load_json(dir / "infer.json");
  CHECK(j["flatness"]["T_n"] == 0.0);
  CHECK(j["flatness"]["decision"] == "retain");
}

TEST_CASE("coverage files and resume") {
  const auto dir = fresh_dir("cli_coverage");
  const std::vector<std::string> args{"coverage", "--model", "circle_flat", "--n", "800", "--B", "20", "--M", "3",
                                      "--m-truth", "32", "--out", dir.string()};
  auto r = run(args);
  REQUIRE(r.code == 0);
  const std::string runs = slurp(dir / "runs.jsonl");
  const auto recs = lines(runs);
  REQUIRE(recs.size() == 3);
  double covered = 0;
  for (const auto& l : recs) covered += nlohmann::json::parse(l)["covered"].get<bool>();
  const auto summary = load_json(dir / "summary.json");
  CHECK(summary["schema"] == kCoverageSummarySchema);
  CHECK(summary["runs"] == 3);
  CHECK(summary["coverage"].get<double>() == covered / 3.0);

  // Interrupt after one record with a torn second line, then resume.
  {
    std::ofstream f(dir / "runs.jsonl", std::ios::binary | std::ios::trunc);
    f << recs[0] << "\n" << recs[1].substr(0, recs[1].size() / 2);
  }
  auto resumed = args;
  resumed.push_back("--resume");
  r = run(resumed);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("resuming after 1 completed runs") != std::string::npos);
  CHECK(slurp(dir / "runs.jsonl") == runs);
  CHECK(load_json(dir / "summary.json")["coverage"] == summary["coverage"]);

  // Without --resume the study starts over.
  r = run(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("resuming after 0 completed runs") != std::string::npos);
  CHECK(slurp(dir / "runs.jsonl") == runs);
}

TEST_CASE("validate-kernel and self-check reports") {
  const auto dir = fresh_dir("cli_validate");
  auto r = run({"validate-kernel", "--dim", "2", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto j = load_json(dir / "kernel_report.json");
  CHECK(j["schema"] == kDiagnosticsSchema);
  CHECK(j["reports"].size() == 2);
  for (const auto& rep : j["reports"]) CHECK(rep["pass"] == true);

  r = run({"--self-check", "--out", dir.string()});
  REQUIRE(r.code == 0);
  for (const auto& rep : load_json(dir / "self_check.json")["reports"]) CHECK(rep["pass"] == true);
}
