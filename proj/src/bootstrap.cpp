#include "ridgeci/bootstrap.hpp"

#include "ridgeci/errors.hpp"
#include "ridgeci/parallel.hpp"
#include "ridgeci/spectral.hpp"
#include "ridgeci/summation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ridgeci {

BootstrapMode parse_bootstrap_mode(const std::string& text) {
  if (text == "multiplier") return BootstrapMode::Multiplier;
  if (text == "empirical") return BootstrapMode::Empirical;
  throw ConfigError("unknown bootstrap mode '" + text + "' (expected multiplier or empirical)");
}

std::string bootstrap_mode_name(BootstrapMode mode) {
  return mode == BootstrapMode::Multiplier ? "multiplier" : "empirical";
}

RhoSpec parse_rho(const std::string& text) {
  if (text == "zero") return RhoSpec::Zero();
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError("rho must be a nonnegative number or 'zero', got '" + text + "'");
  }
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("rho must be nonnegative and finite");
  return RhoSpec::Value(v);
}

void BootstrapConfig::validate() const {
  if (B < 1) throw ConfigError("B must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!rho.zero && !(rho.value >= 0.0)) throw ConfigError("rho must be nonnegative");
}

double zero_rho_surrogate(const RidgeField& field) {
  std::vector<double> p;
  for (std::size_t i = 0; i < field.size(); ++i)
    if (field.valid[i] && field.lambda_r1[i] < 0.0) p.push_back(field.p_hat[i]);
  if (p.empty()) throw NumericalError("empty candidate set: no valid node with negative lambda_{r+1}");
  std::sort(p.begin(), p.end());
  const auto k = static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(p.size()) - 1e-12));
  return p[std::clamp<std::size_t>(k, 1, p.size()) - 1];
}

double resolve_rho(const RidgeField& field, const RhoSpec& rho) {
  return rho.zero ? zero_rho_surrogate(field) : rho.value;
}

std::vector<std::size_t> candidate_set(const RidgeField& field, const RhoSpec& rho) {
  const double eps = resolve_rho(field, rho);
  auto idx = mask_indices(sublevel_region(field, eps));
  if (idx.empty())
    throw NumericalError("empty candidate set at rho=" + std::to_string(eps) + "; use a larger rho or a finer grid");
  return idx;
}

double gamma_rate(double n, double h, int d, int k) {
  if (!(n > 1.0) || !(h > 0.0)) throw std::invalid_argument("gamma_rate needs n > 1 and h > 0");
  return std::sqrt(std::log(n) / (n * std::pow(h, d + 2 * k)));
}

double default_rho_n(const KernelDensityEstimator& est, CaseHint hint) {
  const double n = static_cast<double>(est.n());
  const int k = hint == CaseHint::A ? 2 : 1;
  return std::log(n) * gamma_rate(n, est.h(), est.d(), k);
}

double bootstrap_quantile(std::span<const double> draws, double alpha) {
  if (draws.empty()) throw std::invalid_argument("bootstrap_quantile: empty draws");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  const double B = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(B * (1.0 - alpha) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

std::mt19937_64 replicate_stream(std::uint64_t seed, std::uint64_t replicate, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32), tag};
  return std::mt19937_64(seq);
}

std::vector<double> draw_multiplier_weights(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> e(static_cast<std::size_t>(n));
  for (double& v : e) v = normal(rng);
  return e;
}

std::vector<Eigen::Index> draw_resample_indices(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (auto& v : idx) v = pick(rng);
  return idx;
}

std::vector<double> centered_multiplier_weights(std::span<const double> e) {
  std::vector<double> w(e.size(), 0.0);
  if (e.empty() || std::all_of(e.begin(), e.end(), [&](double v) { return v == e.front(); })) return w;
  CompensatedSum s;
  for (double v : e) s.add(v);
  const double mean = s.value() / static_cast<double>(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) w[i] = e[i] - mean;
  return w;
}

std::vector<double> resample_weights(std::span<const Eigen::Index> indices, Eigen::Index n) {
  if (static_cast<Eigen::Index>(indices.size()) != n)
    throw std::invalid_argument("resample must have length n = " + std::to_string(n));
  std::vector<double> w(static_cast<std::size_t>(n), -1.0);
  for (Eigen::Index i : indices) {
    if (i < 0 || i >= n) throw std::out_of_range("resample index " + std::to_string(i) + " out of range");
    w[static_cast<std::size_t>(i)] += 1.0;
  }
  return w;
}

BootstrapEngine::BootstrapEngine(const KernelDensityEstimator& est, const RidgeField& field,
                                 std::vector<std::size_t> candidates)
    : field_(&field), n_(est.n()), d_(est.d()), candidates_(std::move(candidates)) {
  if (candidates_.empty()) throw NumericalError("empty candidate set");
  if (field.grid.d() != d_) throw std::invalid_argument("field and estimator dimensions differ");
  if (n_ > std::numeric_limits<std::int32_t>::max()) throw std::invalid_argument("sample too large for the engine");
  const int nh = d_ * (d_ + 1) / 2;
  stride_ = 1 + d_ + nh;
  const std::size_t C = candidates_.size();
  for (std::size_t c : candidates_)
    if (c >= field.size()) throw std::out_of_range("candidate node out of range");

  // Per-candidate neighbor lists are built in parallel, then concatenated.
  std::vector<std::vector<std::int32_t>> cols(C);
  std::vector<std::vector<double>> terms(C);
  base_.assign(C * static_cast<std::size_t>(stride_), 0.0);
  parallel_for(static_cast<std::ptrdiff_t>(C), [&](std::ptrdiff_t ci) {
    const auto c = static_cast<std::size_t>(ci);
    const Eigen::VectorXd x = field.grid.node(candidates_[c]);
    const DensityJet jet = est.jet_at(x);
    double* b = base_.data() + c * static_cast<std::size_t>(stride_);
    b[0] = jet.value;
    for (int a = 0; a < d_; ++a) b[1 + a] = jet.gradient[a];
    for (int a = 0; a < nh; ++a) b[1 + d_ + a] = jet.hess_vech[a];
    est.for_each_neighbor(x, [&](const NeighborTerm& t) {
      cols[c].push_back(static_cast<std::int32_t>(t.index));
      terms[c].push_back(t.value);
      terms[c].insert(terms[c].end(), t.gradient, t.gradient + d_);
      terms[c].insert(terms[c].end(), t.hess_vech, t.hess_vech + nh);
    });
  });
  row_ptr_.assign(C + 1, 0);
  for (std::size_t c = 0; c < C; ++c) row_ptr_[c + 1] = row_ptr_[c] + cols[c].size();
  cols_.reserve(row_ptr_[C]);
  terms_.reserve(row_ptr_[C] * static_cast<std::size_t>(stride_));
  for (std::size_t c = 0; c < C; ++c) {
    cols_.insert(cols_.end(), cols[c].begin(), cols[c].end());
    terms_.insert(terms_.end(), terms[c].begin(), terms[c].end());
  }
}

void BootstrapEngine::accumulate(std::size_t c, std::span<const double> w, double* acc) const {
  std::fill(acc, acc + stride_, 0.0);
  for (std::size_t k = row_ptr_[c]; k < row_ptr_[c + 1]; ++k) {
    const double wi = w[static_cast<std::size_t>(cols_[k])];
    if (wi == 0.0) continue;
    const double* t = terms_.data() + k * static_cast<std::size_t>(stride_);
    for (int a = 0; a < stride_; ++a) acc[a] += wi * t[a];
  }
}

SupDraw BootstrapEngine::ridge_draw(std::span<const double> w) const {
  if (static_cast<Eigen::Index>(w.size()) != n_)
    throw std::invalid_argument("weight vector length does not match sample size");
  const double inv_n = 1.0 / static_cast<double>(n_);
  const int nh = d_ * (d_ + 1) / 2;
  std::vector<double> acc(static_cast<std::size_t>(stride_));
  DensityJet jet = DensityJet::zero(d_);
  SupDraw out;
  for (std::size_t c = 0; c < candidates_.size(); ++c) {
    accumulate(c, w, acc.data());
    const double* b = base_.data() + c * static_cast<std::size_t>(stride_);
    jet.value = b[0] + acc[0] * inv_n;
    for (int a = 0; a < d_; ++a) jet.gradient[a] = b[1 + a] + acc[1 + a] * inv_n;
    for (int a = 0; a < nh; ++a) jet.hess_vech[a] = b[1 + d_ + a] + acc[1 + d_ + a] * inv_n;
    const DensityJet& used = field_->use_log ? log_transform(jet, field_->log_floor) : jet;
    const auto stats = ridge_stats(used.hess_vech, used.gradient, field_->r, field_->gap_tol);
    if (!stats) {
      ++out.skipped;
      continue;
    }
    out.sup = std::max(out.sup, std::abs(stats->p - field_->p_hat[candidates_[c]]));
  }
  if (out.skipped == candidates_.size())
    throw NumericalError("every candidate node lost the eigen-gap in a bootstrap draw");
  return out;
}

double BootstrapEngine::gradient_draw(std::span<const double> w) const {
  if (static_cast<Eigen::Index>(w.size()) != n_)
    throw std::invalid_argument("weight vector length does not match sample size");
  const double inv_n = 1.0 / static_cast<double>(n_);
  std::vector<double> acc(static_cast<std::size_t>(stride_));
  double sup = 0.0;
  for (std::size_t c = 0; c < candidates_.size(); ++c) {
    accumulate(c, w, acc.data());
    double s = 0.0;
    for (int a = 0; a < d_; ++a) s += (acc[1 + a] * inv_n) * (acc[1 + a] * inv_n);
    sup = std::max(sup, std::sqrt(s));
  }
  return sup;
}

namespace {
constexpr std::uint32_t kTagMultiplier = 1;
constexpr std::uint32_t kTagEmpirical = 2;
constexpr std::uint32_t kTagGradient = 3;
}  // namespace

BootstrapDraws run_bootstrap(const BootstrapEngine& engine, const BootstrapConfig& config) {
  config.validate();
  BootstrapDraws out;
  out.draws.assign(static_cast<std::size_t>(config.B), 0.0);
  out.skipped.assign(static_cast<std::size_t>(config.B), 0);
  parallel_for(config.B, [&](std::ptrdiff_t b) {
    SupDraw draw;
    if (config.test_identity_resample) {
      draw = engine.ridge_draw(std::vector<double>(static_cast<std::size_t>(engine.n()), 0.0));
    } else if (config.mode == BootstrapMode::Multiplier) {
      auto rng = replicate_stream(config.seed, static_cast<std::uint64_t>(b), kTagMultiplier);
      draw = engine.multiplier_draw(draw_multiplier_weights(rng, engine.n()));
    } else {
      auto rng = replicate_stream(config.seed, static_cast<std::uint64_t>(b), kTagEmpirical);
      draw = engine.empirical_draw(draw_resample_indices(rng, engine.n()));
    }
    out.draws[static_cast<std::size_t>(b)] = draw.sup;
    out.skipped[static_cast<std::size_t>(b)] = draw.skipped;
  });
  out.t_quantile = bootstrap_quantile(out.draws, config.alpha);
  return out;
}

std::vector<double> run_gradient_bootstrap(const BootstrapEngine& engine, int B, std::uint64_t seed) {
  if (B < 1) throw ConfigError("B must be >= 1");
  std::vector<double> draws(static_cast<std::size_t>(B), 0.0);
  parallel_for(B, [&](std::ptrdiff_t b) {
    auto rng = replicate_stream(seed, static_cast<std::uint64_t>(b), kTagGradient);
    draws[static_cast<std::size_t>(b)] = engine.grad_multiplier_draw(draw_multiplier_weights(rng, engine.n()));
  });
  return draws;
}

ConfidenceResult confidence_region(const KernelDensityEstimator& est, const RidgeField& field,
                                   const BootstrapConfig& config) {
  config.validate();
  ConfidenceResult out;
  out.region.rho = resolve_rho(field, config.rho);
  BootstrapEngine engine(est, field, candidate_set(field, RhoSpec::Value(out.region.rho)));
  out.draws = run_bootstrap(engine, config);
  out.region.threshold = out.draws.t_quantile;
  out.region.mask = sublevel_region(field, out.region.threshold);
  out.region.alpha = config.alpha;
  out.region.mode = config.mode;
  out.region.candidate_count = engine.candidates().size();
  return out;
}

}  // namespace ridgeci
