#include "ridgeci/diagnostics.hpp"

#include "ridgeci/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ridgeci {

nlohmann::ordered_json CheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["check"] = name;
  j["observed"] = observed;
  j["tolerance"] = tolerance;
  j["pass"] = pass;
  return j;
}

Eigen::MatrixXd random_gapped_symmetric(std::mt19937_64& rng, int d, double min_gap) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = normal(rng);
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
  Eigen::VectorXd lambda(d);
  lambda[0] = 2.0 * unif(rng) - 1.0;
  for (int i = 1; i < d; ++i) lambda[i] = lambda[i - 1] - min_gap - unif(rng);
  Eigen::MatrixXd S = Q * lambda.asDiagonal() * Q.transpose();
  return 0.5 * (S + S.transpose());
}

Eigen::MatrixXd random_unit_symmetric(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = normal(rng);
  A = (0.5 * (A + A.transpose())).eval();
  return A / A.norm();
}

CheckReport check_kronecker_identity(int trials, int d, int r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Eigen::MatrixXd S = random_gapped_symmetric(rng, d, 0.5);
    const Eigen::MatrixXd D = random_unit_symmetric(rng, d);
    Eigen::VectorXd g(d);
    for (int i = 0; i < d; ++i) g[i] = normal(rng);
    const SpectralFrame frame = spectral_frame(S, g, r);
    const Eigen::VectorXd lhs = projection_derivative(S, D, r) * g;
    const Eigen::VectorXd rhs = frame.M_T * vech(D);
    worst = std::max(worst, (lhs - rhs).norm());
  }
  CheckReport rep;
  rep.name = "kronecker_identity";
  rep.observed = {{"trials", trials}, {"d", d}, {"r", r}, {"max_residual", worst}};
  rep.tolerance = 1e-9;
  rep.pass = worst <= rep.tolerance;
  return rep;
}

namespace {

double loglog_slope(const std::vector<double>& taus, const std::vector<double>& values) {
  const std::size_t k = taus.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += std::log(taus[i]);
    my += std::log(values[i]);
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = std::log(taus[i]) - mx;
    sxy += dx * (std::log(values[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace

PerturbationSlopes perturbation_slopes(int trials, int d, int r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<double> taus{1e-2, 1e-3, 1e-4};
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
  PerturbationSlopes out;
  for (int t = 0; t < trials; ++t) {
    const Eigen::MatrixXd S = random_gapped_symmetric(rng, d, 0.5);
    const Eigen::MatrixXd D = random_unit_symmetric(rng, d);
    const Eigen::MatrixXd L0 = spectral_frame(S, zero, r).L;
    const Eigen::MatrixXd Q1 = projection_derivative(S, D, r);
    const Eigen::MatrixXd Q2 = projection_second_derivative(S, D, r);
    std::vector<double> r1, r2;
    for (double tau : taus) {
      const Eigen::MatrixXd Lt = spectral_frame(S + tau * D, zero, r).L;
      r1.push_back((Lt - L0 - tau * Q1).norm());
      r2.push_back((Lt - L0 - tau * Q1 - 0.5 * tau * tau * Q2).norm());
    }
    out.first.push_back(loglog_slope(taus, r1));
    out.second.push_back(loglog_slope(taus, r2));
  }
  const auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  out.mean_first = mean(out.first);
  out.mean_second = mean(out.second);
  return out;
}

CheckReport check_perturbation_orders(int trials, int d, int r, std::uint64_t seed) {
  const PerturbationSlopes s = perturbation_slopes(trials, d, r, seed);
  const auto [min1, max1] = std::minmax_element(s.first.begin(), s.first.end());
  const auto [min2, max2] = std::minmax_element(s.second.begin(), s.second.end());
  CheckReport rep;
  rep.name = "perturbation_orders";
  rep.observed = {{"trials", trials},          {"d", d},
                  {"r", r},                    {"slope_first", s.mean_first},
                  {"slope_first_min", *min1},  {"slope_first_max", *max1},
                  {"slope_second", s.mean_second}, {"slope_second_min", *min2},
                  {"slope_second_max", *max2}};
  rep.tolerance = 0.1;
  rep.pass = std::abs(s.mean_first - 2.0) <= 0.1 && std::abs(s.mean_second - 3.0) <= 0.15;
  return rep;
}

CheckReport check_davis_kahan_bound(int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> pick_d(2, 6);
  std::uniform_real_distribution<double> log_scale(-4.0, 0.0);
  int violations = 0;
  double worst_ratio = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int d = pick_d(rng);
    const int r = std::uniform_int_distribution<int>(1, d - 1)(rng);
    const Eigen::MatrixXd H = random_gapped_symmetric(rng, d, 0.05);
    const Eigen::MatrixXd dH = std::pow(10.0, log_scale(rng)) * random_unit_symmetric(rng, d);
    Eigen::VectorXd g(d), dg(d);
    for (int i = 0; i < d; ++i) g[i] = normal(rng);
    for (int i = 0; i < d; ++i) dg[i] = std::pow(10.0, log_scale(rng)) * normal(rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const Eigen::VectorXd ev = es.eigenvalues().reverse();
    const double e0 = ev[r - 1] - ev[r];
    const double p = nonridgeness(spectral_frame(H, g, r), g);
    double p_hat = 0.0;
    try {
      p_hat = nonridgeness(spectral_frame(H + dH, g + dg, r), g + dg);
    } catch (const std::exception&) {
      continue;  // perturbed gap collapsed; the bound says nothing there
    }
    const double bound = 2.0 * std::sqrt(2.0) / e0 * dH.norm() * g.norm() + dg.norm();
    const double lhs = std::abs(p_hat - p);
    if (lhs > bound * (1.0 + 1e-12) + 1e-14) ++violations;
    if (bound > 0.0) worst_ratio = std::max(worst_ratio, lhs / bound);
  }
  CheckReport rep;
  rep.name = "davis_kahan_bound";
  rep.observed = {{"trials", trials}, {"violations", violations}, {"max_lhs_over_bound", worst_ratio}};
  rep.tolerance = 0.0;
  rep.pass = violations == 0;
  return rep;
}

std::vector<CheckReport> check_kernel(const KernelSpec& ks, std::uint64_t seed) {
  std::vector<CheckReport> out;
  const int d = ks.dimension;
  {
    const KernelMomentReport m = validate_kernel_moments(ks);
    CheckReport rep;
    rep.name = "kernel_moments";
    rep.observed = {{"d", d},
                    {"integral", m.integral},
                    {"first_moments", std::vector<double>(m.first_moments.data(), m.first_moments.data() + d)},
                    {"second_moment", m.second_moment}};
    rep.tolerance = 1e-9;
    rep.pass = std::abs(m.integral - 1.0) <= 1e-9 && m.first_moments.cwiseAbs().maxCoeff() <= 1e-12 &&
               m.second_moment > 0.0;
    out.push_back(rep);
  }
  {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-0.9, 0.9);
    const double step = 1e-5;
    double worst_grad = 0.0, worst_hess = 0.0;
    for (int t = 0; t < 200; ++t) {
      Eigen::VectorXd u(d);
      for (int i = 0; i < d; ++i) u[i] = unif(rng);
      const Eigen::VectorXd g = kernel_gradient(ks, u);
      const Eigen::MatrixXd H = unvech(kernel_hess_vech(ks, u));
      Eigen::VectorXd g_fd(d);
      Eigen::MatrixXd H_fd(d, d);
      for (int a = 0; a < d; ++a) {
        Eigen::VectorXd up = u, dn = u;
        up[a] += step;
        dn[a] -= step;
        g_fd[a] = (kernel_value(ks, up) - kernel_value(ks, dn)) / (2.0 * step);
        H_fd.col(a) = (kernel_gradient(ks, up) - kernel_gradient(ks, dn)) / (2.0 * step);
      }
      worst_grad = std::max(worst_grad, (g - g_fd).norm() / std::max(1.0, g.norm()));
      worst_hess = std::max(worst_hess, (H - H_fd).norm() / std::max(1.0, H.norm()));
    }
    CheckReport rep;
    rep.name = "kernel_derivatives";
    rep.observed = {{"d", d}, {"max_rel_grad_error", worst_grad}, {"max_rel_hess_error", worst_hess}};
    rep.tolerance = 1e-6;
    rep.pass = worst_grad <= 1e-6 && worst_hess <= 1e-6;
    out.push_back(rep);
  }
  return out;
}

std::vector<CheckReport> run_self_check(std::uint64_t seed) {
  std::vector<CheckReport> out;
  for (int d = 1; d <= 3; ++d) {
    auto k = check_kernel(KernelSpec{d, KernelProfile::Triweight}, seed);
    out.insert(out.end(), k.begin(), k.end());
  }
  out.push_back(check_kronecker_identity(1000, 4, 2, seed));
  out.push_back(check_perturbation_orders(200, 4, 2, seed));
  out.push_back(check_davis_kahan_bound(1000, seed));
  return out;
}

}  // namespace ridgeci
