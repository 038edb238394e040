#include "ridgeci/synthetic.hpp"

#include "ridgeci/errors.hpp"
#include "ridgeci/spectral.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ridgeci {

namespace {

constexpr double kPi = std::numbers::pi;
const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * kPi);

double std_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double std_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// N(0, s^2) density and its first two derivatives.
double npdf(double t, double s) { return std_pdf(t / s) / s; }
double npdf1(double t, double s) { return -t / (s * s) * npdf(t, s); }
double npdf2(double t, double s) { return (t * t / (s * s * s * s) - 1.0 / (s * s)) * npdf(t, s); }

// Solves f(x) = 0 on a bracket with TOMS 748 to full double precision.
template <typename F>
double solve_bracketed(F f, double lo, double hi) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  std::uintmax_t iters = 200;
  const auto tol = boost::math::tools::eps_tolerance<double>(52);
  const auto res = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  const double a = res.first;
  const double b = res.second;
  return std::abs(f(a)) <= std::abs(f(b)) ? a : b;
}

// Finds the sign change of f on [lo, hi] (scanned with `steps` cells) whose
// root lies closest to `target`, optionally only +/- crossings.
template <typename F>
bool closest_root(F f, double lo, double hi, int steps, double target, bool plus_to_minus_only, double& root) {
  bool found = false;
  double best = 0.0;
  double x0 = lo;
  double f0 = f(x0);
  for (int i = 1; i <= steps; ++i) {
    const double x1 = lo + (hi - lo) * i / steps;
    const double f1 = f(x1);
    const bool change = plus_to_minus_only ? (f0 > 0.0 && f1 <= 0.0) : ((f0 > 0.0) != (f1 > 0.0) || f1 == 0.0);
    if (change && std::isfinite(f0) && std::isfinite(f1)) {
      const double x = solve_bracketed(f, x0, x1);
      if (!found || std::abs(x - target) < std::abs(best - target)) best = x;
      found = true;
    }
    x0 = x1;
    f0 = f1;
  }
  root = best;
  return found;
}

}  // namespace

ModelKind parse_model_kind(const std::string& name) {
  if (name == "circle_flat") return ModelKind::CircleFlat;
  if (name == "circle_modulated") return ModelKind::CircleModulated;
  if (name == "sun_cross") return ModelKind::SunCross;
  if (name == "gaussian_blob") return ModelKind::GaussianBlob;
  throw ConfigError("unknown model '" + name + "' (circle_flat, circle_modulated, sun_cross, gaussian_blob)");
}

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::CircleFlat: return "circle_flat";
    case ModelKind::CircleModulated: return "circle_modulated";
    case ModelKind::SunCross: return "sun_cross";
    case ModelKind::GaussianBlob: return "gaussian_blob";
  }
  return "unknown";
}

SyntheticModel::SyntheticModel(ModelKind kind, ModelParams params) : kind_(kind), params_(params) {
  if (!(params_.sigma > 0.0)) throw ConfigError("model sigma must be positive");
  if (!(params_.a >= 0.0 && params_.a < 1.0)) throw ConfigError("modulation a must lie in [0, 1)");
  if (!(params_.bar_sigma > 0.0)) throw ConfigError("bar_sigma must be positive");
  if (!(params_.bar_half_length > 0.0)) throw ConfigError("bar_half_length must be positive");
  if (!(params_.ring_weight > 0.0 && params_.ring_weight < 1.0)) throw ConfigError("ring_weight must lie in (0, 1)");
  if (!(params_.blob_sx > 0.0 && params_.blob_sy > 0.0)) throw ConfigError("blob standard deviations must be positive");
  if (kind_ == ModelKind::GaussianBlob && !(params_.blob_sx > params_.blob_sy))
    throw ConfigError("gaussian_blob needs blob_sx > blob_sy so the ridge is well defined");
  c_ring_ = 1.0 / (2.0 * kPi * ring_normalizer());

  // Composite 7-point Gauss-Legendre over a box holding all but ~1e-20 mass.
  double half = 1.0 + 10.0 * params_.sigma;
  if (kind_ == ModelKind::SunCross) half = std::max(half, params_.bar_half_length + 10.0 * params_.bar_sigma);
  if (kind_ == ModelKind::GaussianBlob) half = 10.0 * params_.blob_sx;
  using Rule = boost::math::quadrature::gauss<double, 7>;
  std::vector<double> nodes, weights;
  const int panels = 100;
  const double width = 2.0 * half / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = -half + (p + 0.5) * width;
    const auto& abs = Rule::abscissa();
    const auto& wts = Rule::weights();
    for (std::size_t k = 0; k < abs.size(); ++k) {
      for (int sgn : {-1, 1}) {
        if (abs[k] == 0.0 && sgn < 0) continue;
        nodes.push_back(mid + sgn * abs[k] * width / 2);
        weights.push_back(wts[k] * width / 2);
      }
    }
  }
  double total = 0.0;
  Eigen::Vector2d x;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      x << nodes[i], nodes[j];
      row += weights[j] * value(x);
    }
    total += weights[i] * row;
  }
  integral_ = total;
  if (std::abs(integral_ - 1.0) > 1e-4)
    throw NumericalError("model normalization check failed: integral = " + std::to_string(integral_));
}

double SyntheticModel::ring_normalizer() const {
  // integral_0^inf r phi_s(r - 1) dr
  const double s = params_.sigma;
  return std_cdf(1.0 / s) + s * std_pdf(1.0 / s);
}

double SyntheticModel::value(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != 2) throw std::invalid_argument("synthetic models are two-dimensional");
  const double px = x[0];
  const double py = x[1];
  switch (kind_) {
    case ModelKind::CircleFlat:
    case ModelKind::CircleModulated: {
      const double r = std::hypot(px, py);
      const double u = (kind_ == ModelKind::CircleModulated && r > 1e-12) ? 1.0 + params_.a * px / r : 1.0;
      return c_ring_ * npdf(r - 1.0, params_.sigma) * u;
    }
    case ModelKind::SunCross: {
      DensityJet jet = DensityJet::zero(2);
      ring_jet(px, py, 0.0, jet, params_.ring_weight);
      bar_jet(px, py, true, jet, 0.5 * (1.0 - params_.ring_weight));
      bar_jet(py, px, false, jet, 0.5 * (1.0 - params_.ring_weight));
      return jet.value;
    }
    case ModelKind::GaussianBlob:
      return npdf(px, params_.blob_sx) * npdf(py, params_.blob_sy);
  }
  return 0.0;
}

void SyntheticModel::ring_jet(double px, double py, double a, DensityJet& out, double weight) const {
  const double s = params_.sigma;
  const double r = std::hypot(px, py);
  const double g = c_ring_ * npdf(r - 1.0, s);
  if (r < 1e-12) {
    out.value += weight * g;
    return;
  }
  const double g1 = -(r - 1.0) / (s * s) * g;
  const double g2 = ((r - 1.0) * (r - 1.0) / (s * s * s * s) - 1.0 / (s * s)) * g;
  const Eigen::Vector2d x(px, py);
  const Eigen::Vector2d xh = x / r;
  const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  const Eigen::Vector2d grad_g = g1 * xh;
  const Eigen::Matrix2d hess_g = g2 * xh * xh.transpose() + (g1 / r) * (I - xh * xh.transpose());

  const Eigen::Vector2d e1(1.0, 0.0);
  const double u = 1.0 + a * px / r;
  const Eigen::Vector2d grad_u = a * (e1 - px * x / (r * r)) / r;
  const double r3 = r * r * r;
  const Eigen::Matrix2d hess_u =
      a * (-(e1 * x.transpose() + x * e1.transpose()) / r3 - px * I / r3 + 3.0 * px * x * x.transpose() / (r3 * r * r));

  const Eigen::Vector2d grad = u * grad_g + g * grad_u;
  const Eigen::Matrix2d hess =
      u * hess_g + grad_g * grad_u.transpose() + grad_u * grad_g.transpose() + g * hess_u;
  out.value += weight * g * u;
  out.gradient += weight * grad;
  out.hess_vech[0] += weight * hess(0, 0);
  out.hess_vech[1] += weight * hess(1, 0);
  out.hess_vech[2] += weight * hess(1, 1);
}

void SyntheticModel::bar_jet(double along, double across, bool along_x, DensityJet& out, double weight) const {
  const double l = params_.bar_half_length;
  const double sb = params_.bar_sigma;
  const double s0 = (std_cdf((along + l) / sb) - std_cdf((along - l) / sb)) / (2.0 * l);
  const double s1 = (npdf(along + l, sb) - npdf(along - l, sb)) / (2.0 * l);
  const double s2 = (npdf1(along + l, sb) - npdf1(along - l, sb)) / (2.0 * l);
  const double q0 = npdf(across, sb);
  const double q1 = npdf1(across, sb);
  const double q2 = npdf2(across, sb);
  out.value += weight * s0 * q0;
  const double g_along = s1 * q0;
  const double g_across = s0 * q1;
  const double h_aa = s2 * q0;
  const double h_ac = s1 * q1;
  const double h_cc = s0 * q2;
  if (along_x) {
    out.gradient[0] += weight * g_along;
    out.gradient[1] += weight * g_across;
    out.hess_vech[0] += weight * h_aa;
    out.hess_vech[2] += weight * h_cc;
  } else {
    out.gradient[0] += weight * g_across;
    out.gradient[1] += weight * g_along;
    out.hess_vech[0] += weight * h_cc;
    out.hess_vech[2] += weight * h_aa;
  }
  out.hess_vech[1] += weight * h_ac;
}

DensityJet SyntheticModel::jet(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != 2) throw std::invalid_argument("synthetic models are two-dimensional");
  DensityJet out = DensityJet::zero(2);
  switch (kind_) {
    case ModelKind::CircleFlat: ring_jet(x[0], x[1], 0.0, out, 1.0); break;
    case ModelKind::CircleModulated: ring_jet(x[0], x[1], params_.a, out, 1.0); break;
    case ModelKind::SunCross: {
      const double wb = 0.5 * (1.0 - params_.ring_weight);
      ring_jet(x[0], x[1], 0.0, out, params_.ring_weight);
      bar_jet(x[0], x[1], true, out, wb);
      bar_jet(x[1], x[0], false, out, wb);
      break;
    }
    case ModelKind::GaussianBlob: {
      const double sx = params_.blob_sx;
      const double sy = params_.blob_sy;
      out.value = npdf(x[0], sx) * npdf(x[1], sy);
      out.gradient << npdf1(x[0], sx) * npdf(x[1], sy), npdf(x[0], sx) * npdf1(x[1], sy);
      out.hess_vech << npdf2(x[0], sx) * npdf(x[1], sy), npdf1(x[0], sx) * npdf1(x[1], sy),
          npdf(x[0], sx) * npdf2(x[1], sy);
      break;
    }
  }
  return out;
}

double SyntheticModel::sample_radius(double u) const {
  const double s = params_.sigma;
  const double total = ring_normalizer();
  const double lo_cdf = std_cdf(-1.0 / s);
  const double lo_pdf = std_pdf(-1.0 / s);
  // Unnormalized radial CDF: integral_0^r t phi_s(t - 1) dt.
  auto cdf = [&](double r) {
    const double z = (r - 1.0) / s;
    return (std_cdf(z) - lo_cdf) + s * (lo_pdf - std_pdf(z));
  };
  const double target = u * total;
  const double hi = 1.0 + 12.0 * s;
  if (cdf(hi) <= target) return hi;
  return solve_bracketed([&](double r) { return cdf(r) - target; }, 0.0, hi);
}

RowMatrix SyntheticModel::sample_points(Eigen::Index n, std::uint64_t seed) const {
  if (n < 1) throw std::invalid_argument("sample size must be >= 1");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix out(n, 2);

  auto ring_point = [&](double a, Eigen::Index i) {
    const double r = sample_radius(unif(rng));
    double theta = 0.0;
    while (true) {
      theta = 2.0 * kPi * unif(rng);
      if (a == 0.0 || unif(rng) * (1.0 + a) <= 1.0 + a * std::cos(theta)) break;
    }
    out(i, 0) = r * std::cos(theta);
    out(i, 1) = r * std::sin(theta);
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    switch (kind_) {
      case ModelKind::CircleFlat: ring_point(0.0, i); break;
      case ModelKind::CircleModulated: ring_point(params_.a, i); break;
      case ModelKind::SunCross: {
        const double pick = unif(rng);
        const double wb = 0.5 * (1.0 - params_.ring_weight);
        if (pick < params_.ring_weight) {
          ring_point(0.0, i);
        } else {
          const double along = params_.bar_half_length * (2.0 * unif(rng) - 1.0) + params_.bar_sigma * normal(rng);
          const double across = params_.bar_sigma * normal(rng);
          if (pick < params_.ring_weight + wb) {
            out(i, 0) = along;
            out(i, 1) = across;
          } else {
            out(i, 0) = across;
            out(i, 1) = along;
          }
        }
        break;
      }
      case ModelKind::GaussianBlob: {
        // Antithetic pairs keep the sample symmetric about the origin.
        if (i % 2 == 0) {
          out(i, 0) = params_.blob_sx * normal(rng);
          out(i, 1) = params_.blob_sy * normal(rng);
        } else {
          out(i, 0) = -out(i - 1, 0);
          out(i, 1) = -out(i - 1, 1);
        }
        break;
      }
    }
  }
  return out;
}

bool SyntheticModel::ring_ridge_point(double theta, Eigen::Vector2d& out) const {
  const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));
  auto along = [&](double r) {
    const Eigen::Vector2d x = r * dir;
    const DensityJet j = jet(x);
    Eigen::Matrix2d H;
    H << j.hess_vech[0], j.hess_vech[1], j.hess_vech[1], j.hess_vech[2];
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es;
    es.computeDirect(H);
    Eigen::Vector2d v = es.eigenvectors().col(0);  // smallest eigenvalue
    if (v.dot(dir) < 0.0) v = -v;
    return v.dot(j.gradient);
  };
  const double s = params_.sigma;
  double r = 0.0;
  if (!closest_root(along, std::max(0.05, 1.0 - 3.0 * s), 1.0 + 3.0 * s, 120, 1.0, false, r)) return false;
  out = r * dir;
  const double p = analytic_nonridgeness(*this, out);
  if (!(p <= 1e-10)) return false;
  const DensityJet j = jet(out);
  Eigen::Matrix2d H;
  H << j.hess_vech[0], j.hess_vech[1], j.hess_vech[1], j.hess_vech[2];
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(H).eigenvalues()[0] < 0.0;
}

double SyntheticModel::axis_crossing() const {
  // Critical point of f(x, 0) where the ring crosses the positive x axis.
  auto fx = [&](double x) { return jet(Eigen::Vector2d(x, 0.0)).gradient[0]; };
  double root = 0.0;
  if (!closest_root(fx, 0.5, 1.5, 200, 1.0, true, root))
    throw NumericalError("sun_cross: no ring/diameter crossing found on the x axis");
  return root;
}

RowMatrix SyntheticModel::sun_cross_intersections() const {
  if (kind_ != ModelKind::SunCross) throw std::invalid_argument("intersections are defined for sun_cross only");
  const double x = axis_crossing();
  RowMatrix out(4, 2);
  out << x, 0.0, 0.0, x, -x, 0.0, 0.0, -x;
  return out;
}

RowMatrix SyntheticModel::true_ridge_points(int m) const {
  if (m < 2) throw std::invalid_argument("true_ridge_points needs m >= 2");
  std::vector<Eigen::Vector2d> pts;
  switch (kind_) {
    case ModelKind::CircleFlat:
      for (int k = 0; k < m; ++k) pts.emplace_back(std::cos(2.0 * kPi * k / m), std::sin(2.0 * kPi * k / m));
      break;
    case ModelKind::CircleModulated: {
      Eigen::Vector2d p;
      for (int k = 0; k < m; ++k)
        if (ring_ridge_point(2.0 * kPi * k / m, p)) pts.push_back(p);
      break;
    }
    case ModelKind::SunCross: {
      const double xc = axis_crossing();
      pts.emplace_back(0.0, 0.0);
      pts.emplace_back(xc, 0.0);
      pts.emplace_back(0.0, xc);
      pts.emplace_back(-xc, 0.0);
      pts.emplace_back(0.0, -xc);
      const int remaining = std::max(0, m - 5);
      const int per_arm = remaining / 8;  // four half-diameters share half
      for (int j = 1; j <= per_arm; ++j) {
        const double t = xc * j / (per_arm + 1);
        pts.emplace_back(t, 0.0);
        pts.emplace_back(0.0, t);
        pts.emplace_back(-t, 0.0);
        pts.emplace_back(0.0, -t);
      }
      const int ring = remaining - 4 * per_arm;
      Eigen::Vector2d p;
      for (int k = 0; k < ring; ++k) {
        const double theta = 2.0 * kPi * (k + 0.5) / ring;
        if (ring_ridge_point(theta, p)) pts.push_back(p);
      }
      break;
    }
    case ModelKind::GaussianBlob:
      for (int k = 0; k < m; ++k) pts.emplace_back(-2.0 * params_.blob_sx + 4.0 * params_.blob_sx * k / (m - 1), 0.0);
      break;
  }
  RowMatrix out(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return out;
}

double analytic_nonridgeness(const SyntheticModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, int r) {
  const DensityJet j = model.jet(x);
  const auto stats = ridge_stats(j.hess_vech, j.gradient, r);
  return stats ? stats->p : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace ridgeci
