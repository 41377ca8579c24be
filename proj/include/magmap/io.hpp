#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "magmap/batch.hpp"
#include "magmap/eigenbasis.hpp"
#include "magmap/types.hpp"

namespace magmap {

// ---------------------------------------------------------------------------
// Sample CSV: header naming t,x,y,z,bx,by,bz in any order; t is optional.

/// Incremental reader, so that streams can be consumed line by line.
class SampleCsvReader {
 public:
  /// Reads the header immediately. Throws FormatError if it is missing or
  /// lacks one of the position / field columns.
  SampleCsvReader(std::istream& in, std::string source);

  /// Next sample, or nullopt at end of input. Blank lines are skipped.
  /// Throws FormatError naming the line on a malformed row.
  std::optional<MagneticSample> next();

  bool has_time() const { return columns_[0] >= 0; }
  /// 1-based line number of the row returned last.
  std::size_t line() const { return line_; }
  const std::string& source() const { return source_; }
  /// In follow mode a trailing line without newline is held back until
  /// it is completed, and end of input can be retried after clear_eof().
  void set_follow(bool follow) { follow_ = follow; }
  void clear_eof();

 private:
  std::istream& in_;
  std::string source_;
  std::array<int, 7> columns_{};  // t, x, y, z, bx, by, bz -> column index
  std::size_t n_columns_ = 0;
  std::size_t line_ = 0;
  std::string pending_;  // partial last line when following a file
  bool follow_ = false;
};

std::vector<MagneticSample> read_samples_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<MagneticSample> read_samples_csv(const std::filesystem::path& path);

/// Writes with 17 significant digits, so values round-trip exactly.
void write_samples_csv(std::ostream& out, std::span<const MagneticSample> samples,
                       bool with_time = true);
void write_samples_csv(const std::filesystem::path& path, std::span<const MagneticSample> samples,
                       bool with_time = true);

// ---------------------------------------------------------------------------
// Configuration (JSON). Every key is optional.

struct Config {
  std::optional<Domain> domain;
  std::optional<Hyperparameters> theta;  ///< ell_time defaults to 3600 s when absent
  std::optional<std::size_t> m;
  std::optional<double> domain_margin;
  nlohmann::json raw;
};

/// Keys: domain {center:[3], half_lengths:[3]}, theta {sigma2_lin,
/// sigma2_se, ell_se, sigma2_noise, ell_time}, m, domain_margin.
Config parse_config(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);

Hyperparameters theta_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Hyperparameters& theta);
Domain domain_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Domain& domain);

/// Default streaming time scale, one hour.
inline constexpr double kDefaultEllTime = 3600.0;

/// Bounding box of the positions padded on every side by `margin` when
/// given, otherwise by max(2 ell_hint, 20% of the box extent on that axis).
/// Degenerate axes get at least the padding so the domain is never flat.
Domain derive_domain(std::span<const MagneticSample> samples, double ell_hint,
                     std::optional<double> margin = std::nullopt);

// ---------------------------------------------------------------------------
// Prediction grids.

struct GridSpec {
  std::array<std::array<double, 2>, 3> bounds{};
  std::array<std::size_t, 3> resolution{2, 2, 2};

  std::size_t size() const { return resolution[0] * resolution[1] * resolution[2]; }
  /// Throws ParameterError for reversed bounds or a zero resolution; an
  /// axis with resolution 1 must have equal bounds and vice versa, and
  /// active axes need resolution >= 2.
  void validate() const;
};

/// Parses "x0:x1:nx,y0:y1:ny,z0:z1:nz". A fixed axis is written as a
/// single value, e.g. "-0.5:0.5:41,-0.5:0.5:41,0.1" for a z slice.
GridSpec parse_grid_spec(std::string_view text);
/// 2-D slice at height z.
GridSpec slice_grid(std::array<double, 2> xb, std::array<double, 2> yb, std::size_t nx,
                    std::size_t ny, double z);
/// Points with x varying fastest.
std::vector<Vec3> grid_points(const GridSpec& grid);
/// Throws DomainError when the grid and the domain do not intersect.
void require_intersects(const GridSpec& grid, const Domain& domain);

struct GridColumns {
  bool field = true;
  bool variance = true;
  bool potential = false;
  bool magnitude = false;
};

/// Comma separated subset of {field, magnitude, potential, variance}.
GridColumns parse_grid_columns(std::string_view text);

/// Columns in the fixed order x,y,z,mean_*,var_*,potential,pot_var,magnitude,
/// restricted to the selection. pot_var appears when both the potential
/// and the variance are requested.
void write_grid_csv(std::ostream& out, std::span<const Vec3> points,
                    std::span<const FieldPrediction> predictions, const GridColumns& columns);
nlohmann::json grid_to_json(std::span<const Vec3> points,
                            std::span<const FieldPrediction> predictions,
                            const GridColumns& columns);

// ---------------------------------------------------------------------------
// Model file: "MAGMAPMD", uint32 version, uint64 header size, JSON header,
// then the coefficient mean and the column-major covariance as raw
// little-endian doubles.

struct ModelFile {
  std::string mode = "batch";  ///< batch, static or spatiotemporal
  Domain domain;
  BasisIndexSet index_set;
  Hyperparameters theta;
  CoefficientPosterior posterior;
  std::optional<double> t_last;
  std::size_t samples_seen = 0;
  bool domain_derived = false;
  nlohmann::json report;  ///< free-form fit report, stored verbatim
};

inline constexpr std::uint32_t kModelFileVersion = 1;

void save_model(const std::filesystem::path& path, const ModelFile& model);
void save_model(std::ostream& out, const ModelFile& model);
/// Throws ModelFileError on anything unreadable.
ModelFile load_model(const std::filesystem::path& path);
ModelFile load_model(std::istream& in);

}  // namespace magmap
