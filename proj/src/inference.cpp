#include "ridgeci/inference.hpp"

#include "ridgeci/errors.hpp"
#include "ridgeci/parallel.hpp"
#include "ridgeci/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ridgeci {

namespace {

// Integer offsets of all nodes within Euclidean distance `radius` of a node.
std::vector<std::vector<int>> ball_offsets(const GridSpec& grid, double radius) {
  const int d = grid.d();
  std::vector<int> reach(d);
  for (int a = 0; a < d; ++a) reach[a] = static_cast<int>(std::floor(radius / grid.spacing(a) + 1e-9));
  const double r2 = radius * radius * (1.0 + 1e-12);
  std::vector<std::vector<int>> out;
  std::vector<int> off(d);
  for (int a = 0; a < d; ++a) off[a] = -reach[a];
  while (true) {
    double dist2 = 0.0;
    for (int a = 0; a < d; ++a) dist2 += std::pow(off[a] * grid.spacing(a), 2);
    if (dist2 <= r2) out.push_back(off);
    int a = 0;
    while (a < d && off[a] == reach[a]) {
      off[a] = -reach[a];
      ++a;
    }
    if (a == d) break;
    ++off[a];
  }
  return out;
}

// Applies fn(neighbor flat index) to every in-grid node of the ball.
template <typename Fn>
void scan_ball(const GridSpec& grid, std::size_t center, const std::vector<std::vector<int>>& offsets, Fn&& fn) {
  const int d = grid.d();
  const auto idx = grid.multi_index(center);
  std::vector<int> nb(d);
  for (const auto& off : offsets) {
    bool inside = true;
    for (int a = 0; a < d && inside; ++a) {
      nb[a] = idx[a] + off[a];
      inside = nb[a] >= 0 && nb[a] < grid.resolution[a];
    }
    if (inside) fn(grid.flat_index(nb));
  }
}

}  // namespace

double default_r_n(double n) {
  if (!(n > std::exp(1.0))) throw std::invalid_argument("default r_n needs n > e");
  return 1.0 / std::log(n);
}

BetaPrimeEstimate estimate_beta_prime_values(const GridSpec& grid, std::span<const double> p, const NodeMask& centers,
                                             const NodeMask& valid, double r_n) {
  if (!(r_n > 0.0 && r_n < 1.0)) throw std::invalid_argument("r_n must lie in (0, 1)");
  if (p.size() != grid.node_count() || centers.size() != p.size() || valid.size() != p.size())
    throw std::invalid_argument("field arrays do not match the grid");
  if (grid.max_spacing() > r_n / 4.0 * (1.0 + 1e-12))
    throw ConfigError("grid spacing " + std::to_string(grid.max_spacing()) + " exceeds r_n/4 = " +
                      std::to_string(r_n / 4.0) + "; refine the grid");
  const auto offsets = ball_offsets(grid, r_n);
  const auto xs = mask_indices(centers);
  std::vector<double> ball_max(xs.size(), -1.0);
  parallel_for(static_cast<std::ptrdiff_t>(xs.size()), [&](std::ptrdiff_t k) {
    double mx = -1.0;
    scan_ball(grid, xs[static_cast<std::size_t>(k)], offsets, [&](std::size_t y) {
      if (valid[y]) mx = std::max(mx, p[y]);
    });
    ball_max[static_cast<std::size_t>(k)] = mx;
  });
  BetaPrimeEstimate out;
  out.r_n = r_n;
  out.R_n = std::numeric_limits<double>::infinity();
  for (double v : ball_max) {
    if (v < 0.0) continue;  // empty valid ball
    out.R_n = std::min(out.R_n, v);
    ++out.centers;
  }
  if (out.centers == 0) throw NumericalError("no node has a nonempty valid ball for the beta' estimate");
  if (!(out.R_n > 0.0)) throw NumericalError("R_n vanished; beta' is unbounded on this field");
  out.beta_hat = std::log(out.R_n) / std::log(r_n);
  return out;
}

BetaPrimeEstimate estimate_beta_prime(const RidgeField& field, double r_n) {
  NodeMask centers(field.size(), 0);
  for (std::size_t i = 0; i < field.size(); ++i) centers[i] = field.valid[i] && field.lambda_r1[i] < 0.0;
  return estimate_beta_prime_values(field.grid, field.p_hat, centers, field.valid, r_n);
}

double ball_inf_sup(const GridSpec& grid, std::span<const double> values, const NodeMask& valid,
                    std::span<const std::size_t> candidates, double radius) {
  if (values.size() != grid.node_count() || valid.size() != values.size())
    throw std::invalid_argument("field arrays do not match the grid");
  const auto offsets = ball_offsets(grid, radius);
  std::vector<double> mins(candidates.size(), std::numeric_limits<double>::infinity());
  parallel_for(static_cast<std::ptrdiff_t>(candidates.size()), [&](std::ptrdiff_t k) {
    double mn = std::numeric_limits<double>::infinity();
    scan_ball(grid, candidates[static_cast<std::size_t>(k)], offsets, [&](std::size_t y) {
      if (valid[y]) mn = std::min(mn, values[y]);
    });
    mins[static_cast<std::size_t>(k)] = mn;
  });
  double T = 0.0;
  for (double v : mins)
    if (std::isfinite(v)) T = std::max(T, v);
  return T;
}

FlatnessTestResult flatness_test(const KernelDensityEstimator& est, const RidgeField& field,
                                 const FlatnessOptions& options) {
  if (options.B < 1) throw ConfigError("B must be >= 1");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  FlatnessTestResult out;
  const double n = static_cast<double>(est.n());
  const double r_n = options.r_n > 0.0 ? options.r_n : default_r_n(n);
  out.beta = estimate_beta_prime(field, r_n);
  out.t_n = out.beta.beta_hat + 1.0;
  out.beta_inflated = out.beta.beta_hat + options.epsilon_prime;

  const double h = est.h();
  const double gamma2 = gamma_rate(n, h, est.d(), 2);
  out.r_n_condition = std::pow(gamma2 + h * h, 1.0 / out.beta_inflated);
  if (!(out.r_n_condition < r_n)) {
    std::ostringstream msg;
    msg << "r_n condition unverified: (gamma2 + h^2)^(1/(beta'+eps')) = " << out.r_n_condition << " >= r_n = " << r_n;
    out.warning = msg.str();
  }

  out.rho = resolve_rho(field, options.rho);
  const auto candidates = candidate_set(field, RhoSpec::Value(out.rho));
  out.candidate_count = candidates.size();
  out.radius = std::pow(out.rho, 1.0 / out.t_n);
  if (out.radius < field.grid.max_spacing())
    throw ConfigError("flatness ball radius " + std::to_string(out.radius) + " is below the grid spacing " +
                      std::to_string(field.grid.max_spacing()) + "; refine the grid");

  std::vector<double> grad_norm = field.grad_norm;
  if (options.test_zero_gradient) std::fill(grad_norm.begin(), grad_norm.end(), 0.0);
  out.T_n = ball_inf_sup(field.grid, grad_norm, field.valid, candidates, out.radius);

  BootstrapEngine engine(est, field, candidates);
  out.draws = run_gradient_bootstrap(engine, options.B, options.seed);
  out.phi_e = bootstrap_quantile(out.draws, options.alpha);
  out.reject = flatness_decision(out.T_n, out.phi_e);
  return out;
}

LeadingTermReport leading_term_diagnostic(const JetProvider& estimate, const SyntheticModel& model, CaseHint hint,
                                          int m, int r) {
  if (hint == CaseHint::Auto) throw std::invalid_argument("leading-term diagnostic needs case a or b");
  const RowMatrix pts = model.true_ridge_points(m);
  LeadingTermReport out;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Eigen::VectorXd x = pts.row(i).transpose();
    const DensityJet truth = model.jet(x);
    const DensityJet est = estimate(x);
    const Eigen::MatrixXd H = unvech(truth.hess_vech);
    SpectralFrame frame;
    try {
      frame = spectral_frame(H, truth.gradient, r);
    } catch (const GapViolation&) {
      continue;  // degenerate exact frame (e.g. a crossing)
    }
    const auto stats = ridge_stats(est.hess_vech, est.gradient, r);
    if (!stats) continue;
    double linear = 0.0;
    if (hint == CaseHint::A) {
      linear = (frame.M_T * (est.hess_vech - truth.hess_vech)).norm();
    } else {
      linear = (frame.L * (est.gradient - truth.gradient)).norm();
    }
    out.sup_phat = std::max(out.sup_phat, stats->p);
    out.sup_linear = std::max(out.sup_linear, linear);
    ++out.points;
  }
  if (out.points == 0) throw NumericalError("no ridge point admits an exact spectral frame");
  if (out.sup_phat <= 1e-12 && out.sup_linear <= 1e-12)
    out.ratio = 1.0;
  else if (out.sup_linear <= 1e-12)
    out.ratio = std::numeric_limits<double>::infinity();
  else
    out.ratio = out.sup_phat / out.sup_linear;
  return out;
}

LeadingTermReport leading_term_diagnostic(const KernelDensityEstimator& est, const SyntheticModel& model,
                                          CaseHint hint, int m) {
  return leading_term_diagnostic([&](const Eigen::VectorXd& x) { return est.jet_at(x); }, model, hint, m, 1);
}

}  // namespace ridgeci
