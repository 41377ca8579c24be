#include "magmap/study.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "magmap/batch.hpp"
#include "magmap/error.hpp"
#include "magmap/kernels.hpp"
#include "magmap/simulator.hpp"

namespace magmap {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Independent:
      return "independent";
    case ModelKind::Shared:
      return "shared";
    case ModelKind::ScalarPotential:
      return "scalar_potential";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "independent") return ModelKind::Independent;
  if (name == "shared") return ModelKind::Shared;
  if (name == "scalar_potential" || name == "potential") return ModelKind::ScalarPotential;
  throw ParameterError("unknown model kind '" + std::string(name) + "'");
}

std::string to_string(InitMode mode) {
  return mode == InitMode::TrueTheta ? "true_theta" : "randomized";
}

InitMode parse_init_mode(std::string_view name) {
  if (name == "true_theta") return InitMode::TrueTheta;
  if (name == "randomized") return InitMode::Randomized;
  throw ParameterError("unknown init mode '" + std::string(name) + "'");
}

ComponentHyperparameters component_theta_from(const Hyperparameters& theta) {
  return {theta.sigma2_lin, theta.field_magnitude(), theta.ell_se, theta.sigma2_noise};
}

Hyperparameters randomize(const Hyperparameters& theta, double spread, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Hyperparameters out = theta;
  out.sigma2_lin *= 1.0 + spread * u(rng);
  out.sigma2_se *= 1.0 + spread * u(rng);
  out.ell_se *= 1.0 + spread * u(rng);
  out.sigma2_noise *= 1.0 + spread * u(rng);
  return out;
}

ComponentHyperparameters randomize(const ComponentHyperparameters& theta, double spread,
                                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComponentHyperparameters out = theta;
  out.sigma2_const *= 1.0 + spread * u(rng);
  out.sigma2_se *= 1.0 + spread * u(rng);
  out.ell_se *= 1.0 + spread * u(rng);
  out.sigma2_noise *= 1.0 + spread * u(rng);
  return out;
}

Domain scenario_domain(const Scenario& s) {
  return Domain::centered(s.domain_half, s.domain_half, s.domain_half);
}

ScenarioData simulate_scenario(const Scenario& s, std::size_t n, std::uint64_t seed) {
  const Domain domain = scenario_domain(s);
  ScenarioData data{sample_field(domain, s.theta_true, s.m_sim, seed), {}, {}, {}};
  auto pos_rng = make_rng(seed, 2);
  auto noise_rng = make_rng(seed, 3);
  std::uniform_real_distribution<double> u(-s.data_half, s.data_half);
  std::normal_distribution<double> normal(0.0, std::sqrt(s.theta_true.sigma2_noise));
  data.train.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    MagneticSample smp;
    smp.t = static_cast<double>(i);
    smp.x = Vec3(u(pos_rng), u(pos_rng), u(pos_rng));
    smp.y = data.field.field(smp.x);
    for (int d = 0; d < 3; ++d) smp.y[d] += normal(noise_rng);
    data.train.push_back(smp);
  }
  data.grid = cube_grid(Vec3::Zero(), s.data_half, s.grid_k);
  data.truth = data.field.fields(data.grid);
  return data;
}

namespace {

ComponentHyperparameters mean_theta(const std::array<ComponentHyperparameters, 3>& th) {
  ComponentHyperparameters m{0.0, 0.0, 0.0, 0.0};
  for (const auto& t : th) {
    m.sigma2_const += t.sigma2_const / 3.0;
    m.sigma2_se += t.sigma2_se / 3.0;
    m.ell_se += t.ell_se / 3.0;
    m.sigma2_noise += t.sigma2_noise / 3.0;
  }
  return m;
}

}  // namespace

FitScore fit_and_score(ModelKind kind, std::span<const MagneticSample> train, const Basis& basis,
                       const Hyperparameters& potential_init,
                       const std::array<ComponentHyperparameters, 3>& component_init,
                       bool optimize, std::span<const Vec3> grid, std::span<const Vec3> truth) {
  std::vector<Vec3> pred;
  switch (kind) {
    case ModelKind::ScalarPotential: {
      const GramStatistics stats = potential_gram(train, basis);
      Hyperparameters theta = potential_init;
      if (optimize) theta = optimize_hyperparameters(stats, potential_init).theta;
      pred = BatchModel::fit(basis, stats, theta).predict_means(grid);
      break;
    }
    case ModelKind::Shared: {
      const ComponentGram gram = component_gram(train, basis);
      ComponentHyperparameters theta = mean_theta(component_init);
      if (optimize) theta = optimize_shared(gram, theta);
      pred = ComponentModel::fit_shared(basis, gram, theta).predict_means(grid);
      break;
    }
    case ModelKind::Independent: {
      const ComponentGram gram = component_gram(train, basis);
      auto theta = component_init;
      if (optimize) theta = optimize_independent(gram, theta);
      pred = ComponentModel::fit(basis, gram, theta).predict_means(grid);
      break;
    }
  }
  return {rmse(pred, truth), component_rmse(pred, truth)};
}

std::vector<RmseRow> run_rmse_study(const StudyConfig& config) {
  if (config.n_train.empty() || config.n_mc == 0) throw ParameterError("empty study configuration");
  const Domain domain = scenario_domain(config.scenario);
  const Basis basis(domain, config.m_fit);
  std::size_t n_max = 0;
  for (auto n : config.n_train) n_max = std::max(n_max, n);

  std::vector<RmseRow> rows;
  for (auto n : config.n_train) {
    for (auto kind : config.models) {
      RmseRow row;
      row.n_train = n;
      row.model = kind;
      row.n_mc = config.n_mc;
      row.seed0 = config.seed0;
      rows.push_back(row);
    }
  }
  std::vector<std::vector<Vec3>> comp(rows.size());

  for (std::size_t k = 0; k < config.n_mc; ++k) {
    const std::uint64_t seed = config.seed0 + k;
    const ScenarioData data = simulate_scenario(config.scenario, n_max, seed);
    std::size_t r = 0;
    for (auto n : config.n_train) {
      const std::span<const MagneticSample> train(data.train.data(), n);
      for (std::size_t mi = 0; mi < config.models.size(); ++mi, ++r) {
        const ModelKind kind = config.models[mi];
        Hyperparameters pot0 = config.scenario.theta_true;
        const ComponentHyperparameters comp_true = component_theta_from(pot0);
        std::array<ComponentHyperparameters, 3> comp0{comp_true, comp_true, comp_true};
        if (config.init_mode == InitMode::Randomized) {
          auto rng = make_rng(seed, 100 + 10 * static_cast<std::uint64_t>(n) + mi);
          pot0 = randomize(pot0, config.init_spread, rng);
          for (auto& c : comp0) c = randomize(comp_true, config.init_spread, rng);
        }
        try {
          const FitScore sc =
              fit_and_score(kind, train, basis, pot0, comp0, config.optimize, data.grid, data.truth);
          rows[r].runs.push_back(sc.rmse);
          comp[r].push_back(sc.component_rmse);
        } catch (const Error&) {
          ++rows[r].failures;
        }
      }
    }
  }

  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto& row = rows[r];
    const auto ok = static_cast<double>(row.runs.size());
    if (row.runs.empty()) {
      row.rmse_mean = row.rmse_std = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double sum = 0.0;
    for (double v : row.runs) sum += v;
    row.rmse_mean = sum / ok;
    double var = 0.0;
    for (double v : row.runs) var += (v - row.rmse_mean) * (v - row.rmse_mean);
    row.rmse_std = row.runs.size() > 1 ? std::sqrt(var / (ok - 1.0)) : 0.0;
    Vec3 cm = Vec3::Zero();
    for (const auto& c : comp[r]) cm += c;
    row.component_rmse_mean = cm / ok;
  }
  return rows;
}

std::vector<BasisSweepRow> run_basis_sweep(const BasisSweepConfig& config) {
  const Scenario& s = config.scenario;
  const Domain domain = scenario_domain(s);
  const ScenarioData data = simulate_scenario(s, config.n_train, config.seed);

  DenseOptions dopts;
  dopts.max_observations = 3 * config.n_train;
  dopts.compute_variance = false;
  const auto dense = dense_gp_fit_predict(PotentialTheta{s.theta_true}, data.train, data.grid, dopts);
  std::vector<Vec3> dense_mean(dense.size());
  double dense_sq = 0.0;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    dense_mean[i] = dense[i].mean;
    dense_sq += dense[i].mean.squaredNorm();
  }
  const double dense_rms = std::sqrt(dense_sq / (3.0 * static_cast<double>(dense.size())));
  const double dense_vs_truth = rmse(dense_mean, data.truth);

  std::vector<BasisSweepRow> rows;
  for (auto m : config.m_values) {
    const auto model = BatchModel::fit(data.train, domain, m, s.theta_true);
    const auto pred = model.predict_means(data.grid);
    BasisSweepRow row;
    row.m = m;
    row.rmse_vs_dense = rmse(pred, dense_mean);
    row.relative_gap = row.rmse_vs_dense / dense_rms;
    row.rmse_vs_truth = rmse(pred, data.truth);
    row.dense_rmse_vs_truth = dense_vs_truth;
    rows.push_back(row);
  }
  return rows;
}

std::vector<RobustnessResult> run_init_robustness(const RobustnessConfig& config) {
  const Scenario& s = config.scenario;
  const Domain domain = scenario_domain(s);
  const Basis basis(domain, config.m_fit);
  const std::size_t n_max = std::max(config.n_train, config.n_reference);
  const ScenarioData data = simulate_scenario(s, n_max, config.seed);
  const std::span<const MagneticSample> reference_set(data.train.data(), config.n_reference);
  const std::span<const MagneticSample> train(data.train.data(), config.n_train);

  std::vector<RobustnessResult> out;
  for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
    const ModelKind kind = config.models[mi];
    RobustnessResult res;
    res.model = kind;

    // Well-initialized optimum on the large set.
    Hyperparameters pot_ref = s.theta_true;
    ComponentHyperparameters comp_ref = component_theta_from(s.theta_true);
    switch (kind) {
      case ModelKind::ScalarPotential:
        pot_ref = optimize_hyperparameters(potential_gram(reference_set, basis), pot_ref).theta;
        break;
      case ModelKind::Shared:
        comp_ref = optimize_shared(component_gram(reference_set, basis), comp_ref);
        break;
      case ModelKind::Independent:
        comp_ref = mean_theta(
            optimize_independent(component_gram(reference_set, basis), {comp_ref, comp_ref, comp_ref}));
        break;
    }
    res.reference_rmse = fit_and_score(kind, train, basis, pot_ref, {comp_ref, comp_ref, comp_ref},
                                       true, data.grid, data.truth)
                             .rmse;

    auto rng = make_rng(config.seed, 1000 + mi);
    for (std::size_t k = 0; k < config.restarts; ++k) {
      const Hyperparameters pot0 = randomize(pot_ref, config.spread, rng);
      std::array<ComponentHyperparameters, 3> comp0{};
      for (auto& c : comp0) c = randomize(comp_ref, config.spread, rng);
      if (kind == ModelKind::Shared) comp0.fill(comp0[0]);
      double value = std::numeric_limits<double>::infinity();
      try {
        value = fit_and_score(kind, train, basis, pot0, comp0, true, data.grid, data.truth).rmse;
      } catch (const Error&) {
      }
      res.restart_rmse.push_back(value);
      if (value <= config.success_ratio * res.reference_rmse) ++res.successes;
    }
    out.push_back(std::move(res));
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_rmse_csv(std::ostream& out, const std::vector<RmseRow>& rows) {
  out << "n_train,model,rmse_mean,rmse_std,n_mc,seed0,rmse_x,rmse_y,rmse_z,failures\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.n_train << ',' << to_string(r.model) << ',' << r.rmse_mean << ',' << r.rmse_std << ','
        << r.n_mc << ',' << r.seed0 << ',' << r.component_rmse_mean[0] << ','
        << r.component_rmse_mean[1] << ',' << r.component_rmse_mean[2] << ',' << r.failures << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<BasisSweepRow>& rows) {
  out << "m,rmse_vs_dense,relative_gap,rmse_vs_truth,dense_rmse_vs_truth\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.m << ',' << r.rmse_vs_dense << ',' << r.relative_gap << ',' << r.rmse_vs_truth << ','
        << r.dense_rmse_vs_truth << '\n';
  }
}

nlohmann::json to_json(const Scenario& s) {
  return {{"domain_half", s.domain_half},
          {"data_half", s.data_half},
          {"m_sim", s.m_sim},
          {"grid_k", s.grid_k},
          {"theta_true",
           {{"sigma2_lin", s.theta_true.sigma2_lin},
            {"sigma2_se", s.theta_true.sigma2_se},
            {"ell_se", s.theta_true.ell_se},
            {"sigma2_noise", s.theta_true.sigma2_noise}}}};
}

nlohmann::json to_json(const StudyConfig& c) {
  nlohmann::json models = nlohmann::json::array();
  for (auto m : c.models) models.push_back(to_string(m));
  return {{"scenario", to_json(c.scenario)}, {"n_train", c.n_train},
          {"n_mc", c.n_mc},                  {"m_fit", c.m_fit},
          {"models", models},                {"init_mode", to_string(c.init_mode)},
          {"init_spread", c.init_spread},    {"optimize", c.optimize},
          {"seed0", c.seed0}};
}

nlohmann::json to_json(const BasisSweepConfig& c) {
  return {{"scenario", to_json(c.scenario)},
          {"n_train", c.n_train},
          {"m_values", c.m_values},
          {"seed", c.seed}};
}

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  s.domain_half = j.value("domain_half", s.domain_half);
  s.data_half = j.value("data_half", s.data_half);
  s.m_sim = j.value("m_sim", s.m_sim);
  s.grid_k = j.value("grid_k", s.grid_k);
  if (j.contains("theta_true")) {
    const auto& t = j.at("theta_true");
    s.theta_true.sigma2_lin = t.value("sigma2_lin", s.theta_true.sigma2_lin);
    s.theta_true.sigma2_se = t.value("sigma2_se", s.theta_true.sigma2_se);
    s.theta_true.ell_se = t.value("ell_se", s.theta_true.ell_se);
    s.theta_true.sigma2_noise = t.value("sigma2_noise", s.theta_true.sigma2_noise);
  }
  s.theta_true.validate();
  if (!(s.data_half > 0.0 && s.data_half <= s.domain_half)) {
    throw ParameterError("scenario data_half must lie in (0, domain_half]");
  }
  return s;
}

StudyConfig study_config_from_json(const nlohmann::json& j) {
  StudyConfig c;
  if (j.contains("scenario")) c.scenario = scenario_from_json(j.at("scenario"));
  c.n_train = j.value("n_train", c.n_train);
  c.n_mc = j.value("n_mc", c.n_mc);
  c.m_fit = j.value("m_fit", c.m_fit);
  if (j.contains("models")) {
    c.models.clear();
    for (const auto& m : j.at("models")) c.models.push_back(parse_model_kind(m.get<std::string>()));
  }
  if (j.contains("init_mode")) c.init_mode = parse_init_mode(j.at("init_mode").get<std::string>());
  c.init_spread = j.value("init_spread", c.init_spread);
  c.optimize = j.value("optimize", c.optimize);
  c.seed0 = j.value("seed0", c.seed0);
  return c;
}

BasisSweepConfig sweep_config_from_json(const nlohmann::json& j) {
  BasisSweepConfig c;
  if (j.contains("scenario")) c.scenario = scenario_from_json(j.at("scenario"));
  c.n_train = j.value("n_train", c.n_train);
  c.m_values = j.value("m_values", c.m_values);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace magmap
