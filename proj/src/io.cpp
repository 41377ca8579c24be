#include "magmap/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "magmap/error.hpp"

namespace magmap {

namespace {

constexpr std::array<std::string_view, 7> kColumnNames{"t", "x", "y", "z", "bx", "by", "bz"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

SampleCsvReader::SampleCsvReader(std::istream& in, std::string source)
    : in_(in), source_(std::move(source)) {
  columns_.fill(-1);
  std::string header;
  while (std::getline(in_, header)) {
    ++line_;
    if (!trim(header).empty()) break;
  }
  if (trim(header).empty()) throw FormatError(source_ + ": no samples");
  auto names = split(header, ',');
  n_columns_ = names.size();
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t k = 0; k < kColumnNames.size(); ++k) {
      if (names[i] == kColumnNames[k]) {
        if (columns_[k] >= 0) {
          throw FormatError(source_ + ": duplicate column '" + std::string(names[i]) + "'");
        }
        columns_[k] = static_cast<int>(i);
      }
    }
  }
  for (std::size_t k = 1; k < kColumnNames.size(); ++k) {
    if (columns_[k] < 0) {
      throw FormatError(source_ + ": header lacks column '" + std::string(kColumnNames[k]) +
                        "' (expected t,x,y,z,bx,by,bz)");
    }
  }
}

void SampleCsvReader::clear_eof() { in_.clear(); }

std::optional<MagneticSample> SampleCsvReader::next() {
  std::string text;
  while (true) {
    if (!std::getline(in_, text)) {
      // A final line without newline sets eof but still extracts text;
      // getline fails only when nothing was read at all.
      return std::nullopt;
    }
    if (in_.eof() && follow_) {
      pending_ += text;
      return std::nullopt;
    }
    if (!pending_.empty()) {
      text = pending_ + text;
      pending_.clear();
    }
    ++line_;
    if (!trim(text).empty()) break;
  }
  auto fields = split(text, ',');
  if (fields.size() != n_columns_) {
    throw FormatError(source_ + ":" + std::to_string(line_) + ": expected " +
                      std::to_string(n_columns_) + " fields, got " + std::to_string(fields.size()));
  }
  std::array<double, 7> v{};
  for (std::size_t k = 0; k < kColumnNames.size(); ++k) {
    if (columns_[k] < 0) continue;
    auto f = fields[static_cast<std::size_t>(columns_[k])];
    if (!parse_double(f, v[k])) {
      throw FormatError(source_ + ":" + std::to_string(line_) + ": cannot parse " +
                        std::string(kColumnNames[k]) + " value '" + std::string(f) + "'");
    }
  }
  MagneticSample s;
  s.t = v[0];
  s.x = Vec3(v[1], v[2], v[3]);
  s.y = Vec3(v[4], v[5], v[6]);
  return s;
}

std::vector<MagneticSample> read_samples_csv(std::istream& in, const std::string& source) {
  SampleCsvReader reader(in, source);
  std::vector<MagneticSample> out;
  while (auto s = reader.next()) out.push_back(*s);
  return out;
}

std::vector<MagneticSample> read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_samples_csv(in, path.string());
}

void write_samples_csv(std::ostream& out, std::span<const MagneticSample> samples, bool with_time) {
  out << (with_time ? "t,x,y,z,bx,by,bz\n" : "x,y,z,bx,by,bz\n");
  std::string row;
  for (const auto& s : samples) {
    row.clear();
    if (with_time) row += format_double(s.t) + ',';
    for (int d = 0; d < 3; ++d) row += format_double(s.x[d]) + ',';
    for (int d = 0; d < 3; ++d) {
      row += format_double(s.y[d]);
      row += d < 2 ? ',' : '\n';
    }
    out << row;
  }
}

void write_samples_csv(const std::filesystem::path& path, std::span<const MagneticSample> samples,
                       bool with_time) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_samples_csv(out, samples, with_time);
}

// ---------------------------------------------------------------------------

Hyperparameters theta_from_json(const nlohmann::json& j) {
  try {
    Hyperparameters t;
    t.sigma2_lin = j.at("sigma2_lin").get<double>();
    t.sigma2_se = j.at("sigma2_se").get<double>();
    t.ell_se = j.at("ell_se").get<double>();
    t.sigma2_noise = j.at("sigma2_noise").get<double>();
    if (j.contains("ell_time")) {
      t.ell_time = j.at("ell_time").is_null() ? std::numeric_limits<double>::infinity()
                                              : j.at("ell_time").get<double>();
    } else {
      t.ell_time = kDefaultEllTime;
    }
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("theta: ") + e.what());
  }
}

nlohmann::json to_json(const Hyperparameters& theta) {
  nlohmann::json j = {{"sigma2_lin", theta.sigma2_lin},
                      {"sigma2_se", theta.sigma2_se},
                      {"ell_se", theta.ell_se},
                      {"sigma2_noise", theta.sigma2_noise}};
  j["ell_time"] = std::isfinite(theta.ell_time) ? nlohmann::json(theta.ell_time) : nlohmann::json();
  return j;
}

Domain domain_from_json(const nlohmann::json& j) {
  try {
    auto c = j.value("center", std::vector<double>{0.0, 0.0, 0.0});
    auto h = j.at("half_lengths").get<std::vector<double>>();
    if (c.size() != 3 || h.size() != 3) throw FormatError("domain: center and half_lengths need 3 values");
    return Domain(Vec3(c[0], c[1], c[2]), Vec3(h[0], h[1], h[2]));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("domain: ") + e.what());
  }
}

nlohmann::json to_json(const Domain& domain) {
  const auto& c = domain.center();
  const auto& h = domain.half_lengths();
  return {{"center", {c[0], c[1], c[2]}}, {"half_lengths", {h[0], h[1], h[2]}}};
}

Config parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  Config c;
  c.raw = j;
  if (j.contains("domain")) c.domain = domain_from_json(j.at("domain"));
  if (j.contains("theta")) c.theta = theta_from_json(j.at("theta"));
  try {
    if (j.contains("m")) {
      auto m = j.at("m").get<long long>();
      if (m < 1) throw ParameterError("config: m must be >= 1");
      c.m = static_cast<std::size_t>(m);
    }
    if (j.contains("domain_margin")) {
      double margin = j.at("domain_margin").get<double>();
      if (!(margin >= 0.0) || !std::isfinite(margin)) {
        throw ParameterError("config: domain_margin must be finite and >= 0");
      }
      c.domain_margin = margin;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return parse_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Domain derive_domain(std::span<const MagneticSample> samples, double ell_hint,
                     std::optional<double> margin) {
  if (samples.empty()) throw ParameterError("no samples");
  Vec3 lo = samples.front().x;
  Vec3 hi = lo;
  for (const auto& s : samples) {
    if (!s.x.allFinite()) throw ParameterError("non-finite position");
    lo = lo.cwiseMin(s.x);
    hi = hi.cwiseMax(s.x);
  }
  Vec3 half;
  for (int d = 0; d < 3; ++d) {
    double extent = hi[d] - lo[d];
    double pad = margin ? *margin : std::max(2.0 * ell_hint, 0.2 * extent);
    half[d] = 0.5 * extent + pad;
    if (!(half[d] > 0.0)) half[d] = std::max(2.0 * ell_hint, 1e-3);
  }
  return Domain(0.5 * (lo + hi), half);
}

// ---------------------------------------------------------------------------

void GridSpec::validate() const {
  bool any_active = false;
  for (int d = 0; d < 3; ++d) {
    const auto& b = bounds[static_cast<std::size_t>(d)];
    std::size_t r = resolution[static_cast<std::size_t>(d)];
    if (!std::isfinite(b[0]) || !std::isfinite(b[1]) || b[1] < b[0]) {
      throw ParameterError("grid: invalid bounds on axis " + std::to_string(d));
    }
    if (r == 0) throw ParameterError("grid: zero resolution on axis " + std::to_string(d));
    bool fixed = b[0] == b[1];
    if (fixed != (r == 1)) {
      throw ParameterError("grid: axis " + std::to_string(d) +
                           (fixed ? " is fixed but has resolution > 1"
                                  : " needs resolution >= 2"));
    }
    any_active = any_active || !fixed;
  }
  if (!any_active && size() != 1) throw ParameterError("grid: inconsistent");
}

GridSpec parse_grid_spec(std::string_view text) {
  auto axes = split(text, ',');
  if (axes.size() != 3) throw ParameterError("grid: expected three comma separated axes");
  GridSpec g;
  for (std::size_t d = 0; d < 3; ++d) {
    auto parts = split(axes[d], ':');
    double a = 0.0, b = 0.0;
    if (parts.size() == 1) {
      if (!parse_double(parts[0], a)) throw ParameterError("grid: bad value '" + std::string(parts[0]) + "'");
      g.bounds[d] = {a, a};
      g.resolution[d] = 1;
    } else if (parts.size() == 3) {
      long long n = 0;
      auto [ptr, ec] = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), n);
      if (!parse_double(parts[0], a) || !parse_double(parts[1], b) || ec != std::errc() ||
          ptr != parts[2].data() + parts[2].size() || n < 1) {
        throw ParameterError("grid: bad axis '" + std::string(axes[d]) + "'");
      }
      g.bounds[d] = {a, b};
      g.resolution[d] = static_cast<std::size_t>(n);
    } else {
      throw ParameterError("grid: bad axis '" + std::string(axes[d]) + "'");
    }
  }
  g.validate();
  return g;
}

GridSpec slice_grid(std::array<double, 2> xb, std::array<double, 2> yb, std::size_t nx,
                    std::size_t ny, double z) {
  GridSpec g;
  g.bounds = {xb, yb, std::array<double, 2>{z, z}};
  g.resolution = {nx, ny, 1};
  g.validate();
  return g;
}

std::vector<Vec3> grid_points(const GridSpec& grid) {
  grid.validate();
  auto coord = [&](std::size_t d, std::size_t i) {
    const auto& b = grid.bounds[d];
    std::size_t r = grid.resolution[d];
    if (r == 1) return b[0];
    if (i + 1 == r) return b[1];
    return b[0] + (b[1] - b[0]) * static_cast<double>(i) / static_cast<double>(r - 1);
  };
  std::vector<Vec3> pts;
  pts.reserve(grid.size());
  for (std::size_t k = 0; k < grid.resolution[2]; ++k) {
    for (std::size_t j = 0; j < grid.resolution[1]; ++j) {
      for (std::size_t i = 0; i < grid.resolution[0]; ++i) {
        pts.emplace_back(coord(0, i), coord(1, j), coord(2, k));
      }
    }
  }
  return pts;
}

void require_intersects(const GridSpec& grid, const Domain& domain) {
  for (std::size_t d = 0; d < 3; ++d) {
    double lo = domain.center()[static_cast<int>(d)] - domain.half_lengths()[static_cast<int>(d)];
    double hi = domain.center()[static_cast<int>(d)] + domain.half_lengths()[static_cast<int>(d)];
    if (grid.bounds[d][1] < lo || grid.bounds[d][0] > hi) {
      throw DomainError("grid does not intersect the model domain on axis " + std::to_string(d));
    }
  }
}

GridColumns parse_grid_columns(std::string_view text) {
  GridColumns c{false, false, false, false};
  for (auto item : split(text, ',')) {
    if (item == "field") c.field = true;
    else if (item == "variance") c.variance = true;
    else if (item == "potential") c.potential = true;
    else if (item == "magnitude") c.magnitude = true;
    else if (item == "all") c = {true, true, true, true};
    else throw ParameterError("unknown quantity '" + std::string(item) + "'");
  }
  return c;
}

void write_grid_csv(std::ostream& out, std::span<const Vec3> points,
                    std::span<const FieldPrediction> predictions, const GridColumns& columns) {
  if (points.size() != predictions.size()) throw ParameterError("grid/prediction size mismatch");
  out << "x,y,z";
  if (columns.field) out << ",mean_x,mean_y,mean_z";
  if (columns.variance) out << ",var_x,var_y,var_z";
  if (columns.potential) out << ",potential";
  if (columns.potential && columns.variance) out << ",pot_var";
  if (columns.magnitude) out << ",magnitude";
  out << '\n';
  std::string row;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = predictions[i];
    row = format_double(points[i][0]) + ',' + format_double(points[i][1]) + ',' +
          format_double(points[i][2]);
    if (columns.field) {
      for (int d = 0; d < 3; ++d) row += ',' + format_double(p.mean[d]);
    }
    if (columns.variance) {
      for (int d = 0; d < 3; ++d) row += ',' + format_double(p.covariance(d, d));
    }
    if (columns.potential) row += ',' + format_double(p.potential_mean.value_or(std::nan("")));
    if (columns.potential && columns.variance) {
      row += ',' + format_double(p.potential_variance.value_or(std::nan("")));
    }
    if (columns.magnitude) row += ',' + format_double(p.mean.norm());
    out << row << '\n';
  }
}

nlohmann::json grid_to_json(std::span<const Vec3> points,
                            std::span<const FieldPrediction> predictions,
                            const GridColumns& columns) {
  if (points.size() != predictions.size()) throw ParameterError("grid/prediction size mismatch");
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = predictions[i];
    nlohmann::json r = {{"x", points[i][0]}, {"y", points[i][1]}, {"z", points[i][2]}};
    if (columns.field) r["mean"] = {p.mean[0], p.mean[1], p.mean[2]};
    if (columns.variance) {
      r["var"] = {p.covariance(0, 0), p.covariance(1, 1), p.covariance(2, 2)};
    }
    if (columns.potential && p.potential_mean) r["potential"] = *p.potential_mean;
    if (columns.potential && columns.variance && p.potential_variance) {
      r["pot_var"] = *p.potential_variance;
    }
    if (columns.magnitude) r["magnitude"] = p.mean.norm();
    if (p.outside_domain) r["outside_domain"] = true;
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'M', 'A', 'G', 'M', 'A', 'P', 'M', 'D'};

template <typename T>
void write_le(std::ostream& out, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    value = std::bit_cast<T>(bytes);
  }
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw ModelFileError(std::string("model file truncated while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    value = std::bit_cast<T>(bytes);
  }
  return value;
}

}  // namespace

void save_model(std::ostream& out, const ModelFile& model) {
  const auto dim = static_cast<Eigen::Index>(3 + model.index_set.size());
  if (model.posterior.mean.size() != dim || model.posterior.covariance.rows() != dim ||
      model.posterior.covariance.cols() != dim) {
    throw ParameterError("model posterior does not match the basis size");
  }
  nlohmann::json idx = nlohmann::json::array();
  for (const auto& i : model.index_set.indices) idx.push_back({i[0], i[1], i[2]});
  nlohmann::json header = {{"format", "magmap-model"},
                           {"mode", model.mode},
                           {"domain", to_json(model.domain)},
                           {"domain_derived", model.domain_derived},
                           {"m", model.index_set.size()},
                           {"indices", idx},
                           {"eigenvalues", model.index_set.eigenvalues},
                           {"theta", to_json(model.theta)},
                           {"samples_seen", model.samples_seen},
                           {"report", model.report}};
  header["t_last"] = model.t_last ? nlohmann::json(*model.t_last) : nlohmann::json();
  std::string text = header.dump();

  out.write(kMagic, sizeof kMagic);
  write_le<std::uint32_t>(out, kModelFileVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (Eigen::Index i = 0; i < dim; ++i) write_le<double>(out, model.posterior.mean[i]);
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) write_le<double>(out, model.posterior.covariance(r, c));
  }
  if (!out) throw Error("failed writing model file");
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  save_model(out, model);
}

ModelFile load_model(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ModelFileError("not a magmap model file (bad magic)");
  }
  auto version = read_le<std::uint32_t>(in, "version");
  if (version != kModelFileVersion) {
    throw ModelFileError("unsupported model file version " + std::to_string(version));
  }
  auto size = read_le<std::uint64_t>(in, "header size");
  if (size > (std::uint64_t{1} << 32)) throw ModelFileError("model file header size implausible");
  std::string text(size, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(size))) {
    throw ModelFileError("model file truncated in header");
  }

  ModelFile model;
  try {
    auto h = nlohmann::json::parse(text);
    if (h.at("format") != "magmap-model") throw ModelFileError("model file header has wrong format tag");
    model.mode = h.at("mode").get<std::string>();
    if (model.mode != "batch" && model.mode != "static" && model.mode != "spatiotemporal") {
      throw ModelFileError("model file has unknown mode '" + model.mode + "'");
    }
    model.domain = domain_from_json(h.at("domain"));
    model.domain_derived = h.value("domain_derived", false);
    auto m = h.at("m").get<std::size_t>();
    const auto& idx = h.at("indices");
    model.index_set.eigenvalues = h.at("eigenvalues").get<std::vector<double>>();
    if (idx.size() != m || model.index_set.eigenvalues.size() != m) {
      throw ModelFileError("model file index set size mismatch");
    }
    for (const auto& i : idx) {
      BasisIndex bi{i.at(0).get<int>(), i.at(1).get<int>(), i.at(2).get<int>()};
      if (bi[0] < 1 || bi[1] < 1 || bi[2] < 1) throw ModelFileError("model file has invalid mode numbers");
      model.index_set.indices.push_back(bi);
    }
    model.theta = theta_from_json(h.at("theta"));
    model.samples_seen = h.value("samples_seen", std::size_t{0});
    if (h.contains("t_last") && !h.at("t_last").is_null()) model.t_last = h.at("t_last").get<double>();
    model.report = h.value("report", nlohmann::json::object());
  } catch (const ModelFileError&) {
    throw;
  } catch (const std::exception& e) {
    throw ModelFileError(std::string("model file header invalid: ") + e.what());
  }

  const auto dim = static_cast<Eigen::Index>(3 + model.index_set.size());
  model.posterior.mean.resize(dim);
  model.posterior.covariance.resize(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) model.posterior.mean[i] = read_le<double>(in, "mean");
  for (Eigen::Index c = 0; c < dim; ++c) {
    for (Eigen::Index r = 0; r < dim; ++r) {
      model.posterior.covariance(r, c) = read_le<double>(in, "covariance");
    }
  }
  if (!model.posterior.mean.allFinite() || !model.posterior.covariance.allFinite()) {
    throw ModelFileError("model file contains non-finite coefficients");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ModelFileError("model file has trailing data");
  return model;
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFileError("cannot open model file " + path.string());
  return load_model(in);
}

}  // namespace magmap
