#include "ridgeci/errors.hpp"
#include "ridgeci/inference.hpp"
#include "ridgeci/spectral.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>

using namespace ridgeci;

namespace {

GridSpec square(double half, double spacing) {
  GridSpec g;
  const int res = static_cast<int>(std::lround(2 * half / spacing)) + 1;
  g.lower = Eigen::Vector2d(-half, -half);
  g.upper = Eigen::Vector2d(half, half);
  g.resolution = {res, res};
  return g;
}

BetaPrimeEstimate power_law(double gamma, double r_n) {
  const GridSpec g = square(1.0, r_n / 4.0);
  std::vector<double> p(g.node_count());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::pow(g.node(i).norm(), gamma);
  const NodeMask all(p.size(), 1);
  return estimate_beta_prime_values(g, p, all, all, r_n);
}

struct Fixture {
  KernelDensityEstimator est;
  RidgeField field;
};

Fixture fit_model(ModelKind kind, Eigen::Index n, std::uint64_t seed) {
  const SyntheticModel model(kind);
  const SampleMatrix S = model.sample(n, seed);
  KernelDensityEstimator est(S, default_bandwidth(S, model.case_hint()), KernelSpec{2, KernelProfile::Triweight});
  RidgeField f = evaluate_field(est, auto_grid(S, est.h(), default_r_n(static_cast<double>(n)) / 4.0), FieldOptions{});
  density_floor_mask(est, f, 0.05);
  return {std::move(est), std::move(f)};
}

const Fixture& circle() {
  static const Fixture fx = fit_model(ModelKind::CircleFlat, 2000, 31);
  return fx;
}

}  // namespace

TEST_CASE("default r_n") {
  CHECK(default_r_n(2000.0) == doctest::Approx(1.0 / std::log(2000.0)).epsilon(1e-15));
  CHECK_THROWS_AS(default_r_n(2.0), std::invalid_argument);
}

TEST_CASE("beta' on analytic power-law fields") {
  SUBCASE("norm, r_n = 0.1") {
    const auto b = power_law(1.0, 0.1);
    CHECK(b.R_n == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(b.beta_hat == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("squared norm, r_n = 0.1") {
    const auto b = power_law(2.0, 0.1);
    CHECK(b.R_n == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(b.beta_hat == doctest::Approx(2.0).epsilon(1e-10));
  }
  SUBCASE("recovery within 2 / |ln r_n|") {
    for (double r_n : {0.2, 0.1, 0.05})
      for (double gamma : {1.0, 1.5, 2.0}) CHECK(std::abs(power_law(gamma, r_n).beta_hat - gamma) <= 2.0 / std::abs(std::log(r_n)));
  }
  SUBCASE("constant field") {
    for (double r_n : {0.05, 0.1, 0.3}) {
      const GridSpec g = square(1.0, r_n / 4.0);
      const std::vector<double> p(g.node_count(), 0.37);
      const NodeMask all(p.size(), 1);
      const auto b = estimate_beta_prime_values(g, p, all, all, r_n);
      CHECK(b.R_n == 0.37);
      CHECK(b.beta_hat == doctest::Approx(std::log(0.37) / std::log(r_n)));
      CHECK(b.centers == p.size());
    }
  }
  SUBCASE("errors") {
    const GridSpec g = square(1.0, 0.05);
    std::vector<double> p(g.node_count(), 0.5);
    const NodeMask all(p.size(), 1), none(p.size(), 0);
    CHECK_THROWS_AS(estimate_beta_prime_values(g, p, all, all, 0.1), ConfigError);  // spacing > r_n/4
    CHECK_THROWS_AS(estimate_beta_prime_values(g, p, all, all, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(estimate_beta_prime_values(g, p, all, none, 0.2), NumericalError);
    std::fill(p.begin(), p.end(), 0.0);
    CHECK_THROWS_AS(estimate_beta_prime_values(g, p, all, all, 0.2), NumericalError);
  }
}

TEST_CASE("beta' centers and ball members respect their masks") {
  const GridSpec g = square(1.0, 0.025);
  std::vector<double> p(g.node_count());
  NodeMask centers(p.size(), 0), valid(p.size(), 1);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Eigen::VectorXd x = g.node(i);
    p[i] = x.norm();
    centers[i] = x[0] > 0.5;
    valid[i] = x[1] > -0.9;
  }
  const auto b = estimate_beta_prime_values(g, p, centers, valid, 0.1);
  // Brute force over nodes.
  double R = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (!centers[x]) continue;
    double mx = -1;
    for (std::size_t y = 0; y < p.size(); ++y)
      if (valid[y] && (g.node(x) - g.node(y)).norm() <= 0.1 * (1 + 1e-9)) mx = std::max(mx, p[y]);
    if (mx >= 0) R = std::min(R, mx);
  }
  CHECK(b.R_n == doctest::Approx(R).epsilon(1e-14));
}

TEST_CASE("ball inf-sup matches brute force and shrinks with the radius") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  const GridSpec g = square(1.0, 0.1);
  std::vector<double> v(g.node_count());
  NodeMask valid(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = u(rng);
    valid[i] = u(rng) < 0.8;
  }
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < v.size(); i += 3) cand.push_back(i);
  double prev = std::numeric_limits<double>::infinity();
  for (double radius : {0.1, 0.15, 0.25, 0.4, 0.7}) {
    double T = 0;
    for (std::size_t x : cand) {
      double mn = std::numeric_limits<double>::infinity();
      for (std::size_t y = 0; y < v.size(); ++y)
        if (valid[y] && (g.node(x) - g.node(y)).norm() <= radius * (1 + 1e-9)) mn = std::min(mn, v[y]);
      if (std::isfinite(mn)) T = std::max(T, mn);
    }
    const double got = ball_inf_sup(g, v, valid, cand, radius);
    CHECK(got == T);
    CHECK(got <= prev);
    prev = got;
  }
}

TEST_CASE("flatness decision is homogeneous") {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> ex;
  for (int t = 0; t < 1000; ++t) {
    const double T = ex(rng), phi = ex(rng), c = std::exp(4 * ex(rng) - 4);
    CHECK(flatness_decision(T, phi) == flatness_decision(c * T, c * phi));
    CHECK(flatness_decision(T, phi) == (T >= phi));
  }
  CHECK(flatness_decision(1.0, 1.0));
  CHECK_FALSE(flatness_decision(0.0, 1e-300));
}

TEST_CASE("flatness test") {
  const auto& fx = circle();
  FlatnessOptions opt;
  opt.rho = RhoSpec::Value(default_rho_n(fx.est, CaseHint::B));
  opt.B = 200;
  opt.seed = 4;

  const auto res = flatness_test(fx.est, fx.field, opt);
  CHECK(res.t_n == res.beta.beta_hat + 1.0);
  CHECK(res.radius == doctest::Approx(std::pow(res.rho, 1.0 / res.t_n)));
  CHECK(res.reject == (res.T_n >= res.phi_e));
  CHECK(res.phi_e == bootstrap_quantile(res.draws, opt.alpha));
  CHECK(res.beta_inflated == res.beta.beta_hat + 0.1);
  CHECK(res.beta.r_n == default_r_n(2000.0));
  CHECK(res.candidate_count == candidate_set(fx.field, opt.rho).size());
  CHECK(res.T_n == ball_inf_sup(fx.field.grid, fx.field.grad_norm, fx.field.valid, candidate_set(fx.field, opt.rho), res.radius));

  SUBCASE("deterministic") {
    const auto again = flatness_test(fx.est, fx.field, opt);
    CHECK(again.draws == res.draws);
    CHECK(again.T_n == res.T_n);
  }
  SUBCASE("zero gradient never rejects") {
    opt.test_zero_gradient = true;
    const auto z = flatness_test(fx.est, fx.field, opt);
    CHECK(z.T_n == 0.0);
    CHECK_FALSE(z.reject);
  }
  SUBCASE("constant gradient above the critical value rejects") {
    RidgeField f = fx.field;
    std::fill(f.grad_norm.begin(), f.grad_norm.end(), 2.0 * res.phi_e + 1.0);
    const auto c = flatness_test(fx.est, f, opt);
    CHECK(c.phi_e == res.phi_e);
    CHECK(c.T_n == 2.0 * res.phi_e + 1.0);
    CHECK(c.reject);
  }
  SUBCASE("ball radius below the grid spacing") {
    opt.rho = RhoSpec::Value(1e-6);
    CHECK_THROWS(flatness_test(fx.est, fx.field, opt));
  }
  SUBCASE("option validation") {
    opt.B = 0;
    CHECK_THROWS_AS(flatness_test(fx.est, fx.field, opt), ConfigError);
  }
}

// The ball radius rho^{1/(beta'+1)} grows with beta' when rho < 1, so T_n,
// nonincreasing in the radius, is nonincreasing in beta' as well.
TEST_CASE("T_n against beta' at fixed rho < 1") {
  const auto& fx = circle();
  const auto cand = candidate_set(fx.field, RhoSpec::Value(default_rho_n(fx.est, CaseHint::B)));
  const double rho = 0.5;
  double prev = std::numeric_limits<double>::infinity(), prev_radius = 0;
  for (double beta : {0.5, 1.0, 2.0, 4.0}) {
    const double radius = std::pow(rho, 1.0 / (beta + 1.0));
    const double T = ball_inf_sup(fx.field.grid, fx.field.grad_norm, fx.field.valid, cand, radius);
    CHECK(radius > prev_radius);
    CHECK(T <= prev);
    prev = T;
    prev_radius = radius;
  }
}

TEST_CASE("leading-term diagnostic") {
  SUBCASE("exact jets give ratio 1") {
    const SyntheticModel m(ModelKind::CircleFlat);
    const auto rep = leading_term_diagnostic([&](const Eigen::VectorXd& x) { return m.jet(x); }, m, CaseHint::B);
    CHECK(rep.sup_phat <= 1e-12);
    CHECK(rep.sup_linear == 0.0);
    CHECK(rep.ratio == 1.0);
    CHECK(rep.points == 256);
    CHECK_THROWS_AS(leading_term_diagnostic([&](const Eigen::VectorXd& x) { return m.jet(x); }, m, CaseHint::Auto),
                    std::invalid_argument);
  }
  SUBCASE("circle_flat, case b, n = 1e5") {
    const SyntheticModel m(ModelKind::CircleFlat);
    const SampleMatrix S = m.sample(100000, 41);
    const KernelDensityEstimator est(S, default_bandwidth(S, CaseHint::B), KernelSpec{2, KernelProfile::Triweight});
    const auto rep = leading_term_diagnostic(est, m, CaseHint::B);
    CHECK(rep.ratio >= 0.5);
    CHECK(rep.ratio <= 2.0);
  }
}

// At n = 1e5 the gradient part L (grad f-hat - grad f), formally of lower
// order in case a, still dominates p-hat on circle_modulated: the ratio
// |grad f| / eigengap is about 1/50 there while h is about 0.2. The diagnostic
// stays as defined; the decisions log has the numbers.
TEST_CASE("leading-term diagnostic, circle_modulated, case a, n = 1e5" * doctest::may_fail()) {
  const SyntheticModel m(ModelKind::CircleModulated);
  const SampleMatrix S = m.sample(100000, 42);
  const KernelDensityEstimator est(S, default_bandwidth(S, CaseHint::A), KernelSpec{2, KernelProfile::Triweight});
  const auto rep = leading_term_diagnostic(est, m, CaseHint::A);
  CHECK(rep.ratio >= 0.5);
  CHECK(rep.ratio <= 2.0);
}

TEST_CASE("p-hat on the true ridge is the sum of both linear terms") {
  const SyntheticModel m(ModelKind::CircleModulated);
  const SampleMatrix S = m.sample(100000, 42);
  const KernelDensityEstimator est(S, default_bandwidth(S, CaseHint::A), KernelSpec{2, KernelProfile::Triweight});
  const RowMatrix pts = m.true_ridge_points(256);
  double sup_p = 0, sup_both = 0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const Eigen::VectorXd x = pts.row(i).transpose();
    const DensityJet t = m.jet(x), e = est.jet_at(x);
    const SpectralFrame fr = spectral_frame(unvech(t.hess_vech), t.gradient, 1);
    const Eigen::VectorXd lin = fr.M_T * (e.hess_vech - t.hess_vech) + fr.L * (e.gradient - t.gradient);
    sup_p = std::max(sup_p, ridge_stats(e.hess_vech, e.gradient, 1)->p);
    sup_both = std::max(sup_both, lin.norm());
  }
  CHECK(sup_p / sup_both >= 0.9);
  CHECK(sup_p / sup_both <= 1.1);
}
