#include "ridgeci/field.hpp"

#include "ridgeci/errors.hpp"
#include "ridgeci/parallel.hpp"
#include "ridgeci/spectral.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ridgeci {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_field_double(const std::string& text, std::size_t line) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError("field CSV line " + std::to_string(line) + ": cannot parse '" + text + "'");
  return v;
}

}  // namespace

std::size_t GridSpec::node_count() const {
  std::size_t total = 1;
  for (int r : resolution) total *= static_cast<std::size_t>(std::max(r, 0));
  return total;
}

double GridSpec::max_spacing() const {
  double m = 0.0;
  for (int a = 0; a < d(); ++a) m = std::max(m, spacing(a));
  return m;
}

double GridSpec::cell_diagonal() const {
  double s = 0.0;
  for (int a = 0; a < d(); ++a) s += spacing(a) * spacing(a);
  return std::sqrt(s);
}

std::vector<int> GridSpec::multi_index(std::size_t node) const {
  std::vector<int> idx(d());
  for (int a = 0; a < d(); ++a) {
    idx[a] = static_cast<int>(node % static_cast<std::size_t>(resolution[a]));
    node /= static_cast<std::size_t>(resolution[a]);
  }
  return idx;
}

std::size_t GridSpec::flat_index(std::span<const int> index) const {
  std::size_t flat = 0;
  for (int a = d() - 1; a >= 0; --a) flat = flat * static_cast<std::size_t>(resolution[a]) + static_cast<std::size_t>(index[a]);
  return flat;
}

Eigen::VectorXd GridSpec::node(std::size_t flat) const {
  Eigen::VectorXd x(d());
  for (int a = 0; a < d(); ++a) {
    const auto i = flat % static_cast<std::size_t>(resolution[a]);
    flat /= static_cast<std::size_t>(resolution[a]);
    x[a] = lower[a] + static_cast<double>(i) * spacing(a);
  }
  return x;
}

void GridSpec::validate(std::size_t node_cap) const {
  if (lower.size() == 0 || lower.size() != upper.size() || static_cast<Eigen::Index>(resolution.size()) != lower.size())
    throw std::invalid_argument("grid: lower, upper and resolution must have the same nonzero length");
  for (int a = 0; a < d(); ++a) {
    if (!(lower[a] < upper[a])) throw std::invalid_argument("grid: lower must be < upper on every axis");
    if (resolution[a] < 2) throw std::invalid_argument("grid: resolution must be >= 2 on every axis");
  }
  double total = 1.0;
  for (int r : resolution) total *= r;
  if (total > static_cast<double>(node_cap))
    throw std::invalid_argument("grid: " + std::to_string(static_cast<long long>(total)) + " nodes exceed the cap of " +
                                std::to_string(node_cap));
}

GridSpec auto_grid(const SampleMatrix& sample, double h, double spacing) {
  if (!(h > 0.0)) throw std::invalid_argument("nonpositive bandwidth");
  if (spacing <= 0.0) spacing = h / 3.0;
  GridSpec grid;
  const int d = sample.d();
  grid.lower = sample.points().colwise().minCoeff().transpose().array() - h;
  grid.upper = sample.points().colwise().maxCoeff().transpose().array() + h;
  grid.resolution.resize(d);
  for (int a = 0; a < d; ++a) {
    const double width = grid.upper[a] - grid.lower[a];
    grid.resolution[a] = static_cast<int>(std::ceil(width / spacing - 1e-9)) + 1;
  }
  return grid;
}

std::size_t RidgeField::valid_count() const { return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 1)); }

RidgeField evaluate_field(const KernelDensityEstimator& est, const GridSpec& grid, const FieldOptions& options) {
  grid.validate(options.node_cap);
  if (grid.d() != est.d()) throw std::invalid_argument("grid dimension does not match estimator dimension");
  if (options.r < 1 || options.r >= est.d()) throw std::invalid_argument("ridge dimension r must satisfy 1 <= r < d");

  RidgeField field;
  field.grid = grid;
  field.r = options.r;
  field.h = est.h();
  field.use_log = options.use_log;
  field.gap_tol = options.gap_tol;
  field.log_floor = options.log_floor > 0.0 ? options.log_floor : default_log_floor(sample_point_densities(est));

  const std::size_t count = grid.node_count();
  field.density.assign(count, 0.0);
  field.grad_norm.assign(count, 0.0);
  field.p_hat.assign(count, kNaN);
  field.lambda_r1.assign(count, kNaN);
  field.valid.assign(count, 0);

  parallel_for(static_cast<std::ptrdiff_t>(count), [&](std::ptrdiff_t i) {
    const auto node = static_cast<std::size_t>(i);
    const Eigen::VectorXd x = grid.node(node);
    const DensityJet plain = est.jet_at(x);
    field.density[node] = plain.value;
    field.grad_norm[node] = plain.gradient.norm();
    const DensityJet jet = field.use_log ? log_transform(plain, field.log_floor) : plain;
    const auto stats = ridge_stats(jet.hess_vech, jet.gradient, field.r, field.gap_tol);
    if (!stats) return;
    field.p_hat[node] = stats->p;
    field.lambda_r1[node] = stats->lambda_r1;
    field.valid[node] = plain.value > field.log_floor ? 1 : 0;
  });
  return field;
}

double density_floor_threshold(std::span<const double> sample_densities, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("density-floor quantile must lie in (0, 1)");
  if (sample_densities.empty()) throw std::invalid_argument("no sample densities");
  std::vector<double> sorted(sample_densities.begin(), sample_densities.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(q * n - 1e-12));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

void apply_density_floor(RidgeField& field, double threshold) {
  field.density_threshold = threshold;
  for (std::size_t i = 0; i < field.size(); ++i)
    if (field.density[i] < threshold) field.valid[i] = 0;
}

double density_floor_mask(const KernelDensityEstimator& est, RidgeField& field, double q) {
  const double threshold = density_floor_threshold(sample_point_densities(est), q);
  apply_density_floor(field, threshold);
  return threshold;
}

NodeMask sublevel_region(const RidgeField& field, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("sublevel threshold must be nonnegative");
  NodeMask mask(field.size(), 0);
  for (std::size_t i = 0; i < field.size(); ++i)
    mask[i] = (field.valid[i] && field.p_hat[i] <= eps && field.lambda_r1[i] < 0.0) ? 1 : 0;
  return mask;
}

std::vector<std::size_t> mask_indices(const NodeMask& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

RowMatrix mask_points(const GridSpec& grid, const NodeMask& mask) {
  const auto idx = mask_indices(mask);
  RowMatrix pts(static_cast<Eigen::Index>(idx.size()), grid.d());
  for (std::size_t k = 0; k < idx.size(); ++k) pts.row(static_cast<Eigen::Index>(k)) = grid.node(idx[k]).transpose();
  return pts;
}

HausdorffPair hausdorff_to_set(const RowMatrix& mask_pts, const RowMatrix& target) {
  if (mask_pts.rows() == 0) throw std::invalid_argument("hausdorff_to_set: empty mask");
  if (target.rows() == 0) throw std::invalid_argument("hausdorff_to_set: empty target");
  if (mask_pts.cols() != target.cols()) throw std::invalid_argument("hausdorff_to_set: dimension mismatch");
  std::vector<double> best_mask(static_cast<std::size_t>(mask_pts.rows()), std::numeric_limits<double>::infinity());
  std::vector<double> best_target(static_cast<std::size_t>(target.rows()), std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < mask_pts.rows(); ++i) {
    for (Eigen::Index j = 0; j < target.rows(); ++j) {
      const double dist2 = (mask_pts.row(i) - target.row(j)).squaredNorm();
      best_mask[static_cast<std::size_t>(i)] = std::min(best_mask[static_cast<std::size_t>(i)], dist2);
      best_target[static_cast<std::size_t>(j)] = std::min(best_target[static_cast<std::size_t>(j)], dist2);
    }
  }
  HausdorffPair out;
  out.mask_to_target = std::sqrt(*std::max_element(best_mask.begin(), best_mask.end()));
  out.target_to_mask = std::sqrt(*std::max_element(best_target.begin(), best_target.end()));
  return out;
}

std::vector<int> connected_components(const GridSpec& grid, const NodeMask& mask) {
  const int d = grid.d();
  std::vector<int> labels(mask.size(), -1);
  std::vector<std::vector<int>> offsets;
  {
    std::vector<int> off(d, -1);
    while (true) {
      if (std::any_of(off.begin(), off.end(), [](int v) { return v != 0; })) offsets.push_back(off);
      int a = 0;
      while (a < d && off[a] == 1) off[a++] = -1;
      if (a == d) break;
      ++off[a];
    }
  }
  int next = 0;
  std::vector<std::size_t> stack;
  std::vector<int> nb(d);
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || labels[start] >= 0) continue;
    labels[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const auto idx = grid.multi_index(cur);
      for (const auto& off : offsets) {
        bool inside = true;
        for (int a = 0; a < d; ++a) {
          nb[a] = idx[a] + off[a];
          if (nb[a] < 0 || nb[a] >= grid.resolution[a]) {
            inside = false;
            break;
          }
        }
        if (!inside) continue;
        const std::size_t flat = grid.flat_index(nb);
        if (mask[flat] && labels[flat] < 0) {
          labels[flat] = next;
          stack.push_back(flat);
        }
      }
    }
    ++next;
  }
  return labels;
}

std::vector<std::size_t> nodes_near(const GridSpec& grid, const Eigen::Ref<const Eigen::VectorXd>& point, double radius) {
  const int d = grid.d();
  std::vector<int> lo(d), hi(d);
  for (int a = 0; a < d; ++a) {
    const double s = grid.spacing(a);
    lo[a] = std::max(0, static_cast<int>(std::floor((point[a] - radius - grid.lower[a]) / s)));
    hi[a] = std::min(grid.resolution[a] - 1, static_cast<int>(std::ceil((point[a] + radius - grid.lower[a]) / s)));
    if (lo[a] > hi[a]) return {};
  }
  std::vector<std::size_t> out;
  std::vector<int> idx = lo;
  const double r2 = radius * radius * (1.0 + 1e-12);
  while (true) {
    const std::size_t flat = grid.flat_index(idx);
    if ((grid.node(flat) - point).squaredNorm() <= r2) out.push_back(flat);
    int a = 0;
    while (a < d && idx[a] == hi[a]) {
      idx[a] = lo[a];
      ++a;
    }
    if (a == d) break;
    ++idx[a];
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_field(const RidgeField& field, const NodeMask& mask, const std::string& csv_path, const std::string& json_path) {
  if (!mask.empty() && mask.size() != field.size()) throw std::invalid_argument("mask size does not match field");
  const int d = field.grid.d();
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw ConfigError("cannot write '" + csv_path + "'");
  std::string line;
  for (int a = 0; a < d; ++a) line += "x" + std::to_string(a) + ",";
  line += "density,grad_norm,p_hat,lambda_r1,valid,mask\n";
  csv << line;
  for (std::size_t i = 0; i < field.size(); ++i) {
    line.clear();
    const Eigen::VectorXd x = field.grid.node(i);
    for (int a = 0; a < d; ++a) {
      append_double(line, x[a]);
      line += ',';
    }
    append_double(line, field.density[i]);
    line += ',';
    append_double(line, field.grad_norm[i]);
    line += ',';
    append_double(line, field.p_hat[i]);
    line += ',';
    append_double(line, field.lambda_r1[i]);
    line += field.valid[i] ? ",1," : ",0,";
    line += (!mask.empty() && mask[i]) ? "1\n" : "0\n";
    csv << line;
  }

  nlohmann::ordered_json meta;
  meta["schema"] = kFieldSchema;
  meta["d"] = d;
  meta["lower"] = std::vector<double>(field.grid.lower.data(), field.grid.lower.data() + d);
  meta["upper"] = std::vector<double>(field.grid.upper.data(), field.grid.upper.data() + d);
  meta["resolution"] = field.grid.resolution;
  meta["node_count"] = field.size();
  meta["r"] = field.r;
  meta["h"] = field.h;
  meta["use_log"] = field.use_log;
  meta["log_floor"] = field.log_floor;
  meta["density_threshold"] = field.density_threshold;
  meta["gap_tol"] = field.gap_tol;
  meta["valid_count"] = field.valid_count();
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw ConfigError("cannot write '" + json_path + "'");
  js << meta.dump(2) << '\n';
}

LoadedField read_field(const std::string& csv_path, const std::string& json_path) {
  std::ifstream js(json_path);
  if (!js) throw ConfigError("cannot open '" + json_path + "'");
  const auto meta = nlohmann::json::parse(js);
  if (meta.at("schema").get<std::string>() != kFieldSchema)
    throw ConfigError("unsupported field schema '" + meta.at("schema").get<std::string>() + "'");

  LoadedField out;
  RidgeField& field = out.field;
  const int d = meta.at("d").get<int>();
  const auto lower = meta.at("lower").get<std::vector<double>>();
  const auto upper = meta.at("upper").get<std::vector<double>>();
  field.grid.lower = Eigen::Map<const Eigen::VectorXd>(lower.data(), d);
  field.grid.upper = Eigen::Map<const Eigen::VectorXd>(upper.data(), d);
  field.grid.resolution = meta.at("resolution").get<std::vector<int>>();
  field.r = meta.at("r").get<int>();
  field.h = meta.at("h").get<double>();
  field.use_log = meta.at("use_log").get<bool>();
  field.log_floor = meta.at("log_floor").get<double>();
  field.density_threshold = meta.at("density_threshold").get<double>();
  field.gap_tol = meta.at("gap_tol").get<double>();
  const std::size_t count = field.grid.node_count();

  std::ifstream csv(csv_path);
  if (!csv) throw ConfigError("cannot open '" + csv_path + "'");
  std::string line;
  std::getline(csv, line);  // header
  std::size_t line_no = 1;
  std::vector<std::string> cells;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    cells.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != d + 6)
      throw ConfigError("field CSV line " + std::to_string(line_no) + ": wrong column count");
    field.density.push_back(parse_field_double(cells[d], line_no));
    field.grad_norm.push_back(parse_field_double(cells[d + 1], line_no));
    field.p_hat.push_back(parse_field_double(cells[d + 2], line_no));
    field.lambda_r1.push_back(parse_field_double(cells[d + 3], line_no));
    field.valid.push_back(cells[d + 4] == "1" ? 1 : 0);
    out.mask.push_back(cells[d + 5] == "1" ? 1 : 0);
  }
  if (field.size() != count) throw ConfigError("field CSV has " + std::to_string(field.size()) + " rows, grid needs " + std::to_string(count));
  return out;
}

}  // namespace ridgeci
