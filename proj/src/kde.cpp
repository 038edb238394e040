#include "ridgeci/kde.hpp"

#include "ridgeci/errors.hpp"
#include "ridgeci/summation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ridgeci {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* begin = t.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

SampleMatrix::SampleMatrix(RowMatrix points) : points_(std::move(points)) {
  if (points_.rows() < 2) throw std::invalid_argument("sample needs at least 2 points, got " + std::to_string(points_.rows()));
  if (points_.cols() < 1) throw std::invalid_argument("sample dimension must be positive");
  if (!points_.allFinite()) throw std::invalid_argument("sample contains non-finite coordinates");
}

SampleMatrix read_sample_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sample file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> values;
    bool numeric = true;
    for (const auto& f : fields) {
      double v = 0.0;
      if (!parse_double(f, v)) {
        numeric = false;
        break;
      }
      values.push_back(v);
    }
    if (!numeric) {
      if (!seen_data && rows.empty() && line_no == 1) continue;  // header
      throw ConfigError(path + ": line " + std::to_string(line_no) + " is not numeric");
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw ConfigError(path + ": line " + std::to_string(line_no) + " contains NaN/Inf");
    }
    if (width == 0) width = values.size();
    if (values.size() != width) {
      throw ConfigError(path + ": line " + std::to_string(line_no) + " has " + std::to_string(values.size()) +
                        " columns, expected " + std::to_string(width));
    }
    seen_data = true;
    rows.push_back(std::move(values));
  }
  if (rows.size() < 2) throw ConfigError(path + ": need at least 2 data rows");
  RowMatrix points(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return SampleMatrix(std::move(points));
}

void write_sample_csv(const SampleMatrix& sample, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  char buf[64];
  for (Eigen::Index i = 0; i < sample.n(); ++i) {
    for (int j = 0; j < sample.d(); ++j) {
      if (j) out << ',';
      const auto res = std::to_chars(buf, buf + sizeof(buf), sample.points()(i, j));
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

Bandwidth::Bandwidth(double value) : h(value) {
  if (!(value > 0.0) || !std::isfinite(value)) throw std::invalid_argument("nonpositive bandwidth");
}

CaseHint parse_case_hint(const std::string& text) {
  if (text == "a") return CaseHint::A;
  if (text == "b") return CaseHint::B;
  if (text == "auto") return CaseHint::Auto;
  throw std::invalid_argument("case hint must be a, b or auto");
}

std::string case_hint_name(CaseHint hint) {
  switch (hint) {
    case CaseHint::A:
      return "a";
    case CaseHint::B:
      return "b";
    case CaseHint::Auto:
      return "auto";
  }
  return "auto";
}

Bandwidth default_bandwidth(const SampleMatrix& sample, CaseHint hint) {
  const auto& X = sample.points();
  const double n = static_cast<double>(sample.n());
  const int d = sample.d();
  double log_sd_sum = 0.0;
  for (int j = 0; j < d; ++j) {
    const double mean = X.col(j).mean();
    const double var = (X.col(j).array() - mean).square().sum() / (n - 1.0);
    if (!(var > 0.0)) throw std::invalid_argument("degenerate sample: coordinate " + std::to_string(j) + " has zero variance");
    log_sd_sum += 0.5 * std::log(var);
  }
  const double sbar = std::exp(log_sd_sum / d);
  const double exponent = hint == CaseHint::A ? 1.0 / (d + 6.0) : 1.0 / (d + 4.5);
  return Bandwidth(1.2 * sbar * std::pow(n, -exponent));
}

DensityJet DensityJet::zero(int d) {
  DensityJet jet;
  jet.gradient = Eigen::VectorXd::Zero(d);
  jet.hess_vech = Eigen::VectorXd::Zero(d * (d + 1) / 2);
  return jet;
}

DensityJet log_transform(const DensityJet& jet, double floor) {
  if (!(floor > 0.0)) throw std::invalid_argument("nonpositive log-density floor");
  const int d = jet.d();
  const double v = std::max(jet.value, floor);
  DensityJet out;
  out.value = std::log(v);
  out.gradient = jet.gradient / v;
  out.hess_vech.resize(jet.hess_vech.size());
  int idx = 0;
  for (int col = 0; col < d; ++col) {
    for (int row = col; row < d; ++row) {
      out.hess_vech[idx] = jet.hess_vech[idx] / v - jet.gradient[row] * jet.gradient[col] / (v * v);
      ++idx;
    }
  }
  return out;
}

KernelDensityEstimator::KernelDensityEstimator(SampleMatrix sample, Bandwidth h, KernelSpec kernel)
    : sample_(std::make_shared<const SampleMatrix>(std::move(sample))), h_(h.h), kernel_(kernel) {
  const int dim = sample_->d();
  if (kernel_.dimension != dim) {
    throw std::invalid_argument("kernel dimension " + std::to_string(kernel_.dimension) +
                                " does not match sample dimension " + std::to_string(dim));
  }
  const auto& X = sample_->points();
  origin_ = X.colwise().minCoeff().transpose();
  extent_.resize(dim);
  double total = 1.0;
  for (int a = 0; a < dim; ++a) {
    const double span = X.col(a).maxCoeff() - origin_[a];
    extent_[a] = static_cast<std::int64_t>(std::floor(span / h_)) + 1;
    total *= static_cast<double>(extent_[a]);
  }
  if (total > 4e18) throw std::invalid_argument("bucket grid too large for this bandwidth; increase h");

  const Eigen::Index n = sample_->n();
  std::vector<std::int64_t> keys(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::int64_t key = 0;
    for (int a = dim - 1; a >= 0; --a) {
      auto c = static_cast<std::int64_t>(std::floor((X(i, a) - origin_[a]) / h_));
      c = std::clamp<std::int64_t>(c, 0, extent_[a] - 1);
      key = key * extent_[a] + c;
    }
    keys[static_cast<std::size_t>(i)] = key;
  }
  order_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order_[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order_.begin(), order_.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)]; });
  std::size_t start = 0;
  while (start < order_.size()) {
    const std::int64_t key = keys[static_cast<std::size_t>(order_[start])];
    std::size_t end = start;
    while (end < order_.size() && keys[static_cast<std::size_t>(order_[end])] == key) ++end;
    cells_.emplace(key, std::make_pair(start, end));
    start = end;
  }
}

void KernelDensityEstimator::check_point(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != d()) throw std::invalid_argument("query point dimension does not match estimator dimension");
  if (!x.allFinite()) throw std::invalid_argument("query point must be finite");
}

std::vector<Eigen::Index> KernelDensityEstimator::neighbor_candidates(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const int dim = d();
  std::vector<std::int64_t> center(dim);
  for (int a = 0; a < dim; ++a) {
    const double c = std::floor((x[a] - origin_[a]) / h_);
    // Far-away queries: clamp to one cell beyond the grid so no cell matches.
    center[a] = static_cast<std::int64_t>(std::clamp(c, -2.0, static_cast<double>(extent_[a]) + 1.0));
  }
  std::vector<Eigen::Index> found;
  std::vector<int> offset(dim, -1);
  while (true) {
    std::int64_t key = 0;
    bool inside = true;
    for (int a = dim - 1; a >= 0; --a) {
      const std::int64_t c = center[a] + offset[a];
      if (c < 0 || c >= extent_[a]) {
        inside = false;
        break;
      }
      key = key * extent_[a] + c;
    }
    if (inside) {
      const auto it = cells_.find(key);
      if (it != cells_.end())
        for (std::size_t k = it->second.first; k < it->second.second; ++k) found.push_back(order_[k]);
    }
    int a = 0;
    while (a < dim && offset[a] == 1) offset[a++] = -1;
    if (a == dim) break;
    ++offset[a];
  }
  std::sort(found.begin(), found.end());
  return found;
}

std::size_t KernelDensityEstimator::support_count(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  std::size_t count = 0;
  for_each_neighbor(x, [&](const NeighborTerm&) { ++count; });
  return count;
}

DensityJet KernelDensityEstimator::jet_at(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const int dim = d();
  const int nh = dim * (dim + 1) / 2;
  CompensatedSum value;
  CompensatedVector grad(dim), hess(nh);
  for_each_neighbor(x, [&](const NeighborTerm& t) {
    value.add(t.value);
    for (int a = 0; a < dim; ++a) grad.add(a, t.gradient[a]);
    for (int a = 0; a < nh; ++a) hess.add(a, t.hess_vech[a]);
  });
  const double inv_n = 1.0 / static_cast<double>(n());
  DensityJet jet = DensityJet::zero(dim);
  jet.value = value.value() * inv_n;
  for (int a = 0; a < dim; ++a) jet.gradient[a] = grad.value(a) * inv_n;
  for (int a = 0; a < nh; ++a) jet.hess_vech[a] = hess.value(a) * inv_n;
  return jet;
}

DensityJet KernelDensityEstimator::perturbed_jet_at(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                    std::span<const double> w) const {
  if (static_cast<Eigen::Index>(w.size()) != n())
    throw std::invalid_argument("weight vector length " + std::to_string(w.size()) + " does not match sample size " +
                                std::to_string(n()));
  const int dim = d();
  const int nh = dim * (dim + 1) / 2;
  CompensatedSum value, dvalue;
  CompensatedVector grad(dim), hess(nh), dgrad(dim), dhess(nh);
  for_each_neighbor(x, [&](const NeighborTerm& t) {
    const double wi = w[static_cast<std::size_t>(t.index)];
    value.add(t.value);
    dvalue.add(wi * t.value);
    for (int a = 0; a < dim; ++a) {
      grad.add(a, t.gradient[a]);
      dgrad.add(a, wi * t.gradient[a]);
    }
    for (int a = 0; a < nh; ++a) {
      hess.add(a, t.hess_vech[a]);
      dhess.add(a, wi * t.hess_vech[a]);
    }
  });
  const double inv_n = 1.0 / static_cast<double>(n());
  DensityJet jet = DensityJet::zero(dim);
  jet.value = value.value() * inv_n + dvalue.value() * inv_n;
  for (int a = 0; a < dim; ++a) jet.gradient[a] = grad.value(a) * inv_n + dgrad.value(a) * inv_n;
  for (int a = 0; a < nh; ++a) jet.hess_vech[a] = hess.value(a) * inv_n + dhess.value(a) * inv_n;
  return jet;
}

DensityJet KernelDensityEstimator::multiplier_jet_at(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                     std::span<const double> e) const {
  if (static_cast<Eigen::Index>(e.size()) != n())
    throw std::invalid_argument("multiplier weight length " + std::to_string(e.size()) + " does not match sample size " +
                                std::to_string(n()));
  // The centering term cancels any common shift of the weights, so subtract
  // the mean; constant weights give an exactly unperturbed jet.
  std::vector<double> w(e.begin(), e.end());
  const bool constant = std::all_of(e.begin(), e.end(), [&](double v) { return v == e.front(); });
  if (constant) {
    std::fill(w.begin(), w.end(), 0.0);
  } else {
    CompensatedSum s;
    for (double v : e) s.add(v);
    const double mean = s.value() / static_cast<double>(e.size());
    for (double& v : w) v -= mean;
  }
  return perturbed_jet_at(x, w);
}

KernelDensityEstimator KernelDensityEstimator::empirical_refit(std::span<const Eigen::Index> indices) const {
  if (indices.empty()) throw std::invalid_argument("empty resample");
  RowMatrix points(static_cast<Eigen::Index>(indices.size()), d());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Eigen::Index idx = indices[i];
    if (idx < 0 || idx >= n()) throw std::out_of_range("resample index " + std::to_string(idx) + " out of range");
    points.row(static_cast<Eigen::Index>(i)) = sample_->points().row(idx);
  }
  return KernelDensityEstimator(SampleMatrix(std::move(points)), Bandwidth(h_), kernel_);
}

DensityJet KernelDensityEstimator::log_jet_at(const Eigen::Ref<const Eigen::VectorXd>& x, double floor) const {
  if (!(floor > 0.0)) throw std::invalid_argument("nonpositive log-density floor");
  return log_transform(jet_at(x), floor);
}

std::vector<double> sample_point_densities(const KernelDensityEstimator& est) {
  std::vector<double> out(static_cast<std::size_t>(est.n()));
  const auto& X = est.sample().points();
  for (Eigen::Index i = 0; i < est.n(); ++i) {
    const Eigen::VectorXd x = X.row(i).transpose();
    out[static_cast<std::size_t>(i)] = est.jet_at(x).value;
  }
  return out;
}

double default_log_floor(std::span<const double> sample_densities) {
  double mx = 0.0;
  for (double v : sample_densities) mx = std::max(mx, v);
  if (!(mx > 0.0)) throw NumericalError("density vanishes at every sample point");
  return 1e-12 * mx;
}

}  // namespace ridgeci
