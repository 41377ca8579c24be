#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "magmap/baselines.hpp"
#include "magmap/simulator.hpp"
#include "magmap/types.hpp"

namespace magmap {

enum class ModelKind { Independent, Shared, ScalarPotential };

std::string to_string(ModelKind kind);
/// Accepts "independent", "shared", "scalar_potential" (also "potential").
ModelKind parse_model_kind(std::string_view name);

enum class InitMode { TrueTheta, Randomized };

std::string to_string(InitMode mode);
InitMode parse_init_mode(std::string_view name);

/// Simulation scenario shared by all studies: a prior draw on a centered
/// cube, training inputs uniform on a smaller cube, validation on a k^3
/// grid over the training cube.
struct Scenario {
  double domain_half = 0.5;
  double data_half = 0.4;
  std::size_t m_sim = 2048;
  std::size_t grid_k = 21;
  /// Generating hyperparameters; sigma2_lin doubles as the constant
  /// variance of the component-wise models.
  Hyperparameters theta_true{0.3, 1.0, 0.1, 0.04};
};

Domain scenario_domain(const Scenario& s);

/// Ground truth and data of one scenario realization.
struct ScenarioData {
  SyntheticField field;
  std::vector<MagneticSample> train;  ///< uniform on the data cube, t = 0, 1, 2, ...
  std::vector<Vec3> grid;             ///< grid_k^3 validation points over the data cube
  std::vector<Vec3> truth;            ///< noise-free field at grid
};

/// Field from rng stream 0 of `seed`, positions from stream 2, noise from
/// stream 3; the first k samples of a draw with n > k equal a draw with n = k.
ScenarioData simulate_scenario(const Scenario& s, std::size_t n, std::uint64_t seed);

/// Starting point of the component-wise models corresponding to a
/// scalar-potential parameter set: the constant variance takes sigma2_lin
/// and the SE variance is expressed in field units, sigma2_se / ell_se^2.
ComponentHyperparameters component_theta_from(const Hyperparameters& theta);

/// theta * (1 + spread * U(-1, 1)) per parameter.
Hyperparameters randomize(const Hyperparameters& theta, double spread, std::mt19937_64& rng);
ComponentHyperparameters randomize(const ComponentHyperparameters& theta, double spread,
                                   std::mt19937_64& rng);

struct StudyConfig {
  Scenario scenario;
  std::vector<std::size_t> n_train{500, 2000, 8000};
  std::size_t n_mc = 5;
  std::size_t m_fit = 512;
  std::vector<ModelKind> models{ModelKind::Independent, ModelKind::Shared,
                                ModelKind::ScalarPotential};
  InitMode init_mode = InitMode::TrueTheta;
  double init_spread = 0.7;
  bool optimize = true;
  std::uint64_t seed0 = 1;
};

struct RmseRow {
  std::size_t n_train = 0;
  ModelKind model = ModelKind::ScalarPotential;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  Vec3 component_rmse_mean = Vec3::Zero();
  std::size_t n_mc = 0;
  std::uint64_t seed0 = 0;
  std::size_t failures = 0;
  std::vector<double> runs;  ///< per-seed RMSE, in seed order
};

/// Monte Carlo RMSE study: for each seed, one ground-truth field and one
/// nested training set (the first n samples are used for each n_train).
/// Failed runs are counted, not fatal.
std::vector<RmseRow> run_rmse_study(const StudyConfig& config);

/// Result of fitting one model to one dataset and scoring it on a grid.
struct FitScore {
  double rmse = 0.0;
  Vec3 component_rmse = Vec3::Zero();
};

/// Fits `kind` on the data (optionally optimizing from the given start) and
/// scores the mean prediction against the truth at `grid`.
FitScore fit_and_score(ModelKind kind, std::span<const MagneticSample> train, const Basis& basis,
                       const Hyperparameters& potential_init,
                       const std::array<ComponentHyperparameters, 3>& component_init,
                       bool optimize, std::span<const Vec3> grid, std::span<const Vec3> truth);

struct BasisSweepConfig {
  Scenario scenario;
  std::size_t n_train = 500;
  std::vector<std::size_t> m_values{64, 128, 256, 512, 1024};
  std::uint64_t seed = 1;
};

struct BasisSweepRow {
  std::size_t m = 0;
  double rmse_vs_dense = 0.0;     ///< RMSE between reduced-rank and dense means
  double relative_gap = 0.0;      ///< rmse_vs_dense / RMS of the dense mean field
  double rmse_vs_truth = 0.0;
  double dense_rmse_vs_truth = 0.0;
};

/// Reduced-rank vs dense scalar-potential predictions for growing m, both
/// at the generating hyperparameters.
std::vector<BasisSweepRow> run_basis_sweep(const BasisSweepConfig& config);

struct RobustnessConfig {
  Scenario scenario;
  std::size_t n_train = 2000;
  std::size_t n_reference = 8000;  ///< data used to find the well-initialized optimum
  std::size_t restarts = 30;
  std::size_t m_fit = 512;
  double spread = 0.7;
  double success_ratio = 1.5;
  std::vector<ModelKind> models{ModelKind::Independent, ModelKind::Shared,
                                ModelKind::ScalarPotential};
  std::uint64_t seed = 1;
};

struct RobustnessResult {
  ModelKind model = ModelKind::ScalarPotential;
  double reference_rmse = 0.0;
  std::vector<double> restart_rmse;  ///< infinity for failed runs
  std::size_t successes = 0;
};

/// Sensitivity to the optimizer start: per model, an optimum on
/// n_reference samples started at the generating values defines
/// theta_ref (the mean over components for the independent model); the
/// reference RMSE is the fit on n_train samples started at theta_ref, and
/// each restart starts at theta_ref * (1 + spread U(-1, 1)).
std::vector<RobustnessResult> run_init_robustness(const RobustnessConfig& config);

// Reporting.
void write_rmse_csv(std::ostream& out, const std::vector<RmseRow>& rows);
void write_sweep_csv(std::ostream& out, const std::vector<BasisSweepRow>& rows);
nlohmann::json to_json(const Scenario& s);
nlohmann::json to_json(const StudyConfig& c);
nlohmann::json to_json(const BasisSweepConfig& c);
Scenario scenario_from_json(const nlohmann::json& j);
StudyConfig study_config_from_json(const nlohmann::json& j);
BasisSweepConfig sweep_config_from_json(const nlohmann::json& j);

}  // namespace magmap
