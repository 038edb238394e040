#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>

namespace ridgeci {

/// Fully resolvable run configuration shared by every subcommand. Values come
/// from defaults, then an optional JSON config file, then explicit flags.
struct RunConfig {
  std::string input;           // CSV sample; exclusive with model
  std::string model;           // synthetic model name
  long long n = 2000;          // synthetic sample size
  int r = 1;
  std::string h = "auto";      // bandwidth or "auto"
  std::string case_hint = "auto";
  double alpha = 0.1;
  int B = 500;
  std::string mode = "multiplier";
  std::string rho = "auto";    // number, "zero" or "auto" (default rho_n)
  bool log_density = false;
  double floor_q = 0.05;
  std::string grid = "auto";   // "auto", a spacing, or lo:hi:res per axis
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out = "ridgeci_out";
  bool resume = false;
  int M = 100;
  int m_truth = 256;
  double sigma = 0.2;
  double a = 0.5;
  double r_n = 0.0;            // <= 0: 1 / ln n
  double epsilon_prime = 0.1;
  int dim = 2;                 // validate-kernel dimension
  bool test_identity_resample = false;
  bool test_zero_gradient = false;

  nlohmann::ordered_json to_json() const;
  /// Overwrites fields present in `j`; unknown keys are a ConfigError.
  void apply_json(const nlohmann::json& j);
};

inline constexpr const char* kConfigSchema = "ridgeci.config/1";

/// Entry point behind the `ridgeci` executable. Returns the process exit
/// code: 0 success, 2 configuration error, 3 numerical failure. Failures
/// print one line `ridgeci: error exit=<code> kind=<kind> reason="<text>"`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ridgeci
