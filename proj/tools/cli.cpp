#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "magmap/batch.hpp"
#include "magmap/error.hpp"
#include "magmap/io.hpp"
#include "magmap/sequential.hpp"
#include "magmap/simulator.hpp"
#include "magmap/study.hpp"

#ifndef MAGMAP_VERSION
#define MAGMAP_VERSION "unknown"
#endif

namespace magmap::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kDefaultM = 512;
constexpr std::size_t kDefaultStreamBatch = 5000;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> parse_numbers(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ParameterError(std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  return out;
}

/// "sigma2_lin,sigma2_se,ell_se,sigma2_noise[,ell_time]"
Hyperparameters parse_theta(const std::string& text) {
  auto v = parse_numbers(text, "--theta");
  if (v.size() != 4 && v.size() != 5) {
    throw ParameterError("--theta expects sigma2_lin,sigma2_se,ell_se,sigma2_noise[,ell_time]");
  }
  Hyperparameters t{v[0], v[1], v[2], v[3], v.size() == 5 ? v[4] : kDefaultEllTime};
  t.validate();
  return t;
}

Vec3 parse_point(const std::string& text) {
  auto v = parse_numbers(text, "point");
  if (v.size() != 3) throw ParameterError("expected x,y,z");
  return Vec3(v[0], v[1], v[2]);
}

/// Data-driven optimizer start: length scale a tenth of the data extent,
/// field-unit SE variance equal to the residual variance of the
/// components, ten percent of it as noise.
Hyperparameters default_theta(std::span<const MagneticSample> samples) {
  Vec3 mean = Vec3::Zero();
  Vec3 lo = samples.front().x, hi = samples.front().x;
  for (const auto& s : samples) {
    mean += s.y;
    lo = lo.cwiseMin(s.x);
    hi = hi.cwiseMax(s.x);
  }
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (const auto& s : samples) var += (s.y - mean).squaredNorm();
  var /= 3.0 * static_cast<double>(samples.size());
  var = std::max(var, 1e-4);
  const double ell = std::max((hi - lo).maxCoeff() / 10.0, 1e-3);
  auto clamp = [](double v) { return std::clamp(v, 1e-5, 1e5); };
  return {clamp(std::max(mean.squaredNorm() / 3.0, 1.0)), clamp(var * ell * ell), clamp(ell),
          clamp(0.1 * var), kDefaultEllTime};
}

Domain choose_domain(const Config& config, std::span<const MagneticSample> samples, double ell_hint,
                     std::optional<double> margin, bool& derived) {
  derived = !config.domain.has_value();
  if (config.domain) return *config.domain;
  if (!margin) margin = config.domain_margin;
  return derive_domain(samples, ell_hint, margin);
}

/// Rethrows a DomainError from a sample check with the offending CSV line.
void require_inside_lines(std::span<const MagneticSample> samples, const Domain& domain,
                          const std::string& source) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].finite()) {
      throw ParameterError(source + ":" + std::to_string(i + 2) + ": non-finite values");
    }
    if (!domain.contains(samples[i].x)) {
      throw DomainError(source + ":" + std::to_string(i + 2) + ": sample outside the domain");
    }
  }
}

json theta_report(const Hyperparameters& t) {
  json j = to_json(t);
  j["sigma2_se_over_ell2"] = t.field_magnitude();
  return j;
}

std::vector<FieldPrediction> predict_grid(const Basis& basis, const CoefficientPosterior& post,
                                          std::span<const Vec3> points, bool with_potential) {
  std::vector<FieldPrediction> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(project_posterior(basis, post, p, with_potential));
  return out;
}

void write_grid_file(const fs::path& path, std::span<const Vec3> points,
                     std::span<const FieldPrediction> preds, const GridColumns& columns) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  write_grid_csv(f, points, preds, columns);
}

std::vector<MagneticSample> read_nonempty(const std::string& path) {
  auto samples = read_samples_csv(fs::path(path));
  if (samples.empty()) throw FormatError(path + ": no samples");
  return samples;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::string data;
  std::string config;
  std::optional<double> margin;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
  auto samples = read_nonempty(a.data);
  Config config = a.config.empty() ? Config{} : load_config(a.config);
  bool derived = false;
  double ell = config.theta ? config.theta->ell_se : default_theta(samples).ell_se;
  Domain domain = choose_domain(config, samples, ell, a.margin, derived);
  auto report = validate_dataset(samples, domain);
  auto rows = [](const std::vector<std::size_t>& v) {
    json j = json::array();
    for (auto r : v) j.push_back(r + 2);  // CSV line numbers
    return j;
  };
  json j = {{"n", report.n},
            {"inside", report.inside_count},
            {"outside", report.outside_count},
            {"outside_lines", rows(report.outside_rows)},
            {"non_finite_lines", rows(report.non_finite_rows)},
            {"timestamp_regression_lines", rows(report.timestamp_regressions)},
            {"domain", to_json(domain)},
            {"domain_derived", derived},
            {"clean", report.clean()}};
  out << j.dump(2) << '\n';
  return report.clean() ? kOk : kInputError;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string out;
  std::string config;
  std::size_t n = 2000;
  std::uint64_t seed = 1;
  double rate = 1.0;
  std::optional<std::size_t> m_sim;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  Scenario scenario;
  if (!a.config.empty()) {
    std::ifstream f(a.config);
    if (!f) throw FormatError("cannot open " + a.config);
    json j;
    try {
      j = json::parse(f);
    } catch (const json::parse_error& e) {
      throw FormatError(a.config + ": " + e.what());
    }
    scenario = scenario_from_json(j.contains("scenario") ? j.at("scenario") : j);
  }
  if (a.m_sim) scenario.m_sim = *a.m_sim;
  if (!(a.rate > 0.0)) throw ParameterError("--rate must be positive");
  auto data = simulate_scenario(scenario, a.n, a.seed);
  for (auto& s : data.train) s.t /= a.rate;
  write_samples_csv(fs::path(a.out), data.train);
  out << json{{"samples", a.n},
              {"seed", a.seed},
              {"scenario", to_json(scenario)},
              {"output", a.out}}
             .dump(2)
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string config;
  std::string out;
  std::string report;
  std::optional<std::size_t> m;
  std::string theta;
  bool optimize = false;
  std::optional<double> margin;
  int max_iterations = 200;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  auto samples = read_nonempty(a.data);
  Config config = a.config.empty() ? Config{} : load_config(a.config);

  std::optional<Hyperparameters> given;
  if (!a.theta.empty()) given = parse_theta(a.theta);
  else if (config.theta) given = config.theta;
  const bool optimize = a.optimize || !given;
  Hyperparameters theta0 = given ? *given : default_theta(samples);

  bool derived = false;
  Domain domain = choose_domain(config, samples, theta0.ell_se, a.margin, derived);
  require_inside_lines(samples, domain, a.data);
  const std::size_t m = a.m.value_or(config.m.value_or(kDefaultM));
  if (m == 0) throw ParameterError("--m must be >= 1");

  Basis basis(domain, m);
  auto stats = potential_gram(samples, basis);
  Hyperparameters theta = theta0;
  json opt_report = nullptr;
  if (optimize) {
    OptimizeOptions opts;
    opts.max_iterations = a.max_iterations;
    auto r = optimize_hyperparameters(stats, theta0, opts);
    theta = r.theta;
    theta.ell_time = theta0.ell_time;
    const char* names[] = {"sigma2_lin", "sigma2_se", "ell_se", "sigma2_noise"};
    json clipped = json::array();
    for (int i = 0; i < 4; ++i) {
      if (r.boundary_clipped(i)) clipped.push_back(names[i]);
    }
    opt_report = {{"iterations", r.details.iterations},
                  {"evaluations", r.details.evaluations},
                  {"converged", r.details.converged},
                  {"status", r.details.status},
                  {"boundary_clipped", clipped},
                  {"start", theta_report(theta0)}};
  }
  auto model = BatchModel::fit(basis, stats, theta);
  const Vec3 lin = model.linear_coefficients();

  ModelFile file;
  file.mode = "batch";
  file.domain = domain;
  file.domain_derived = derived;
  file.index_set = basis.index_set();
  file.theta = theta;
  file.posterior = model.posterior();
  file.samples_seen = samples.size();
  json report = {{"n", samples.size()},
                 {"m", m},
                 {"theta", theta_report(theta)},
                 {"optimized", optimize},
                 {"nlml", nlml(theta, stats)},
                 {"linear_coefficients", {lin[0], lin[1], lin[2]}},
                 {"domain", to_json(domain)},
                 {"domain_derived", derived}};
  if (optimize) report["optimizer"] = opt_report;
  report["wall_time_s"] = seconds_since(start);
  file.report = report;
  save_model(fs::path(a.out), file);

  if (!a.report.empty()) {
    std::ofstream f(a.report);
    if (!f) throw Error("cannot write " + a.report);
    f << report.dump(2) << '\n';
  }
  out << report.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct GridArgs {
  std::string grid;
  std::string what = "field,variance";
};

std::vector<Vec3> resolve_grid(const GridArgs& g, const Domain& domain) {
  auto spec = parse_grid_spec(g.grid);
  require_intersects(spec, domain);
  return grid_points(spec);
}

struct PredictArgs {
  std::string model;
  GridArgs grid;
  std::string out;
  std::string format;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  ModelFile file = load_model(fs::path(a.model));
  Basis basis(file.domain, file.index_set);
  auto columns = parse_grid_columns(a.grid.what);
  auto points = resolve_grid(a.grid, file.domain);
  auto preds = predict_grid(basis, file.posterior, points, columns.potential);

  std::string format = a.format;
  if (format.empty()) format = fs::path(a.out).extension() == ".json" ? "json" : "csv";
  if (format != "csv" && format != "json") throw ParameterError("--format must be csv or json");

  std::ofstream file_out;
  std::ostream* sink = &out;
  if (!a.out.empty() && a.out != "-") {
    file_out.open(a.out);
    if (!file_out) throw Error("cannot write " + a.out);
    sink = &file_out;
  }
  if (format == "json") *sink << grid_to_json(points, preds, columns).dump() << '\n';
  else write_grid_csv(*sink, points, preds, columns);
  return kOk;
}

// ---------------------------------------------------------------------------

struct StreamArgs {
  std::string model;
  std::string config;
  std::string data = "-";
  std::string mode = "static";
  std::size_t snapshot_every = 0;
  GridArgs grid;
  std::string snapshot_prefix = "snapshot_";
  std::string out;
  std::optional<std::size_t> m;
  std::optional<double> margin;
  std::optional<std::size_t> batch;
  std::optional<double> ell_time;
  bool resume = false;
  bool follow = false;
  double idle_timeout = 2.0;
  std::string probe;
  std::string probe_out;
};

struct LineSample {
  MagneticSample sample;
  std::size_t line = 0;
};

int cmd_stream(const StreamArgs& a, std::istream& in, std::ostream& out) {
  const auto start = Clock::now();
  const bool spatiotemporal = a.mode == "spatiotemporal";
  if (!spatiotemporal && a.mode != "static") {
    throw ParameterError("--mode must be static or spatiotemporal");
  }

  std::ifstream file_in;
  std::istream* input = &in;
  std::string source = "<stdin>";
  if (a.data != "-") {
    file_in.open(a.data);
    if (!file_in) throw FormatError("cannot open " + a.data);
    input = &file_in;
    source = a.data;
  }
  SampleCsvReader reader(*input, source);
  reader.set_follow(a.follow);
  if (spatiotemporal && !reader.has_time()) {
    throw FormatError(source + ": spatio-temporal mode needs a t column");
  }
  auto next = [&]() -> std::optional<LineSample> {
    auto idle_start = Clock::now();
    while (true) {
      if (auto s = reader.next()) return LineSample{*s, reader.line()};
      if (!a.follow || seconds_since(idle_start) > a.idle_timeout) return std::nullopt;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      reader.clear_eof();
    }
  };

  Config config = a.config.empty() ? Config{} : load_config(a.config);
  std::optional<ModelFile> model_file;
  if (!a.model.empty()) model_file = load_model(fs::path(a.model));

  std::vector<LineSample> buffered;
  std::optional<Hyperparameters> theta;
  std::optional<Basis> basis;
  bool derived = false;
  bool fitted_theta = false;
  if (model_file) {
    theta = model_file->theta;
    basis.emplace(model_file->domain, model_file->index_set);
    derived = model_file->domain_derived;
  } else {
    theta = config.theta;
    const std::size_t m = a.m.value_or(config.m.value_or(kDefaultM));
    if (!theta || !config.domain) {
      // Hyperparameters and / or the domain come from an initial batch.
      const std::size_t b = a.batch.value_or(kDefaultStreamBatch);
      if (b == 0) throw ParameterError("--batch must be >= 1");
      while (buffered.size() < b) {
        auto s = next();
        if (!s) break;
        buffered.push_back(*s);
      }
      if (buffered.empty()) throw FormatError(source + ": no samples");
    }
    std::vector<MagneticSample> initial;
    initial.reserve(buffered.size());
    for (const auto& s : buffered) initial.push_back(s.sample);
    Hyperparameters theta0 = theta ? *theta : default_theta(initial);
    Domain domain = choose_domain(config, initial, theta0.ell_se, a.margin, derived);
    for (const auto& s : buffered) {
      if (!domain.contains(s.sample.x)) {
        throw DomainError(source + ":" + std::to_string(s.line) + ": sample outside the domain");
      }
    }
    basis.emplace(domain, m);
    if (!theta) {
      auto r = optimize_hyperparameters(potential_gram(initial, *basis), theta0);
      theta = r.theta;
      theta->ell_time = theta0.ell_time;
      fitted_theta = true;
    }
  }
  if (a.ell_time) theta->ell_time = *a.ell_time;

  SequentialModel model(*basis, *theta);
  SequentialState state = model.init();
  if (a.resume) {
    if (!model_file) throw ParameterError("--resume needs --model");
    state.mu = model_file->posterior.mean;
    state.sigma = model_file->posterior.covariance;
    state.t_last = model_file->t_last;
    state.samples_seen = model_file->samples_seen;
  }

  std::vector<Vec3> grid;
  GridColumns columns = parse_grid_columns(a.grid.what);
  if (!a.grid.grid.empty()) grid = resolve_grid(a.grid, basis->domain());
  std::size_t snapshots = 0;
  auto snapshot = [&](const std::string& name) {
    auto preds = predict_grid(*basis, model.posterior(state), grid, columns.potential);
    write_grid_file(a.snapshot_prefix + name + ".csv", grid, preds, columns);
    ++snapshots;
  };

  std::optional<Vec3> probe;
  std::ofstream probe_file;
  if (!a.probe.empty()) {
    probe = parse_point(a.probe);
    if (a.probe_out.empty()) throw ParameterError("--probe needs --probe-out");
    probe_file.open(a.probe_out);
    if (!probe_file) throw Error("cannot write " + a.probe_out);
    probe_file << "t,mean_x,mean_y,mean_z,var_x,var_y,var_z\n";
    probe_file.precision(17);
  }

  std::size_t processed = 0;
  auto consume = [&](const LineSample& ls) {
    const auto where = source + ":" + std::to_string(ls.line);
    try {
      if (spatiotemporal) model.update_spatiotemporal(state, ls.sample);
      else model.update_static(state, ls.sample);
    } catch (const OrderingError&) {
      throw OrderingError(where + ": timestamp " + std::to_string(ls.sample.t) +
                          " precedes the previous sample (" + std::to_string(*state.t_last) + ")");
    } catch (const DomainError&) {
      throw DomainError(where + ": sample outside the domain");
    } catch (const ParameterError& e) {
      throw ParameterError(where + ": " + e.what());
    }
    ++processed;
    if (probe) {
      auto p = model.predict_at(state, *probe);
      probe_file << ls.sample.t << ',' << p.mean[0] << ',' << p.mean[1] << ',' << p.mean[2] << ','
                 << p.covariance(0, 0) << ',' << p.covariance(1, 1) << ',' << p.covariance(2, 2)
                 << '\n';
    }
    if (a.snapshot_every > 0 && !grid.empty() && processed % a.snapshot_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "%06zu", processed / a.snapshot_every);
      snapshot(name);
    }
  };
  for (const auto& ls : buffered) consume(ls);
  buffered.clear();
  while (auto ls = next()) consume(*ls);
  if (processed == 0 && !a.resume) throw FormatError(source + ": no samples");
  if (!grid.empty()) snapshot("final");

  ModelFile result;
  result.mode = spatiotemporal ? "spatiotemporal" : "static";
  result.domain = basis->domain();
  result.domain_derived = derived;
  result.index_set = basis->index_set();
  result.theta = *theta;
  result.posterior = model.posterior(state);
  result.t_last = state.t_last;
  result.samples_seen = state.samples_seen;
  json report = {{"mode", result.mode},
                 {"samples", processed},
                 {"m", basis->m()},
                 {"theta", theta_report(*theta)},
                 {"theta_fitted_on_initial_batch", fitted_theta},
                 {"snapshots", snapshots},
                 {"domain", to_json(result.domain)},
                 {"domain_derived", derived},
                 {"wall_time_s", seconds_since(start)}};
  result.report = report;
  if (!a.out.empty()) save_model(fs::path(a.out), result);
  out << report.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct BenchmarkArgs {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out) {
  const auto start = Clock::now();
  std::ifstream f(a.config);
  if (!f) throw FormatError("cannot open " + a.config);
  json cfg;
  try {
    cfg = json::parse(f);
  } catch (const json::parse_error& e) {
    throw FormatError(a.config + ": " + e.what());
  }
  if (!cfg.contains("study") && !cfg.contains("sweep")) {
    throw FormatError(a.config + ": needs a \"study\" and/or \"sweep\" section");
  }
  fs::create_directories(a.out_dir);
  json manifest = {{"tool", "magmap"}, {"version", MAGMAP_VERSION}};
  json outputs = json::array();
  try {
    if (cfg.contains("study")) {
      auto sc = study_config_from_json(cfg.at("study"));
      if (a.seed) sc.seed0 = *a.seed;
      auto rows = run_rmse_study(sc);
      auto path = fs::path(a.out_dir) / "study.csv";
      std::ofstream csv(path);
      write_rmse_csv(csv, rows);
      manifest["study"] = to_json(sc);
      outputs.push_back(path.string());
    }
    if (cfg.contains("sweep")) {
      auto sw = sweep_config_from_json(cfg.at("sweep"));
      if (a.seed) sw.seed = *a.seed;
      auto rows = run_basis_sweep(sw);
      auto path = fs::path(a.out_dir) / "sweep.csv";
      std::ofstream csv(path);
      write_sweep_csv(csv, rows);
      manifest["sweep"] = to_json(sw);
      outputs.push_back(path.string());
    }
  } catch (const json::exception& e) {
    throw FormatError(a.config + ": " + e.what());
  }
  manifest["outputs"] = outputs;
  manifest["wall_time_s"] = seconds_since(start);
  auto manifest_path = fs::path(a.out_dir) / "manifest.json";
  std::ofstream mf(manifest_path);
  mf << manifest.dump(2) << '\n';
  out << manifest.dump(2) << '\n';
  return kOk;
}

int fail(std::ostream& err, const std::string& message, int code) {
  err << "magmap: error: " << message << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Curl-free magnetic field mapping with reduced-rank Gaussian processes", "magmap"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MAGMAP_VERSION);

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Check a sample CSV against the domain");
  validate->add_option("--data", va.data, "Sample CSV")->required();
  validate->add_option("--config", va.config, "JSON config");
  validate->add_option("--domain-margin", va.margin, "Padding of a derived domain [m]");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Draw a synthetic field and sample it");
  simulate->add_option("--out", sa.out, "Output CSV")->required();
  simulate->add_option("--config", sa.config, "JSON scenario");
  simulate->add_option("--n", sa.n, "Number of samples");
  simulate->add_option("--seed", sa.seed, "Random seed");
  simulate->add_option("--rate", sa.rate, "Sample rate for the time column [Hz]");
  simulate->add_option("--m-sim", sa.m_sim, "Basis size of the ground truth");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Batch fit of the scalar-potential model");
  fit->add_option("--data", fa.data, "Sample CSV")->required();
  fit->add_option("--config", fa.config, "JSON config");
  fit->add_option("--out", fa.out, "Model file")->required();
  fit->add_option("--report", fa.report, "Also write the JSON report here");
  fit->add_option("--m", fa.m, "Number of eigenfunctions (default 512)");
  fit->add_option("--theta", fa.theta, "sigma2_lin,sigma2_se,ell_se,sigma2_noise[,ell_time]");
  fit->add_flag("--optimize", fa.optimize, "Maximize the marginal likelihood");
  fit->add_option("--domain-margin", fa.margin, "Padding of a derived domain [m]");
  fit->add_option("--max-iterations", fa.max_iterations, "Optimizer iteration limit");

  PredictArgs pa;
  auto* predict = app.add_subcommand("predict", "Evaluate a model on a grid");
  predict->add_option("--model", pa.model, "Model file")->required();
  predict->add_option("--grid", pa.grid.grid, "x0:x1:nx,y0:y1:ny,z0:z1:nz (single value = fixed)")
      ->required();
  predict->add_option("--what", pa.grid.what, "field,magnitude,potential,variance");
  predict->add_option("--out", pa.out, "Output file (default stdout)");
  predict->add_option("--format", pa.format, "csv or json");

  StreamArgs st;
  auto* stream = app.add_subcommand("stream", "Sequential estimation over a sample stream");
  stream->add_option("--model", st.model, "Model file providing theta, domain and basis");
  stream->add_option("--config", st.config, "JSON config providing theta and/or domain");
  stream->add_option("--data", st.data, "Sample CSV, '-' for stdin");
  stream->add_option("--mode", st.mode, "static or spatiotemporal");
  stream->add_option("--snapshot-every", st.snapshot_every, "Snapshot period in samples, 0 = final only");
  stream->add_option("--grid", st.grid.grid, "Snapshot grid");
  stream->add_option("--what", st.grid.what, "Snapshot columns");
  stream->add_option("--snapshot-prefix", st.snapshot_prefix, "Snapshot file prefix");
  stream->add_option("--out", st.out, "Final model file");
  stream->add_option("--m", st.m, "Number of eigenfunctions (default 512)");
  stream->add_option("--domain-margin", st.margin, "Padding of a derived domain [m]");
  stream->add_option("--batch", st.batch, "Initial samples used to fit theta (default 5000)");
  stream->add_option("--ell-time", st.ell_time, "Temporal length scale [s]");
  stream->add_flag("--resume", st.resume, "Start from the posterior stored in --model");
  stream->add_flag("--follow", st.follow, "Keep polling the input for appended lines");
  stream->add_option("--idle-timeout", st.idle_timeout, "Seconds without input before --follow stops");
  stream->add_option("--probe", st.probe, "x,y,z point tracked after every sample");
  stream->add_option("--probe-out", st.probe_out, "Probe time series CSV");

  BenchmarkArgs ba;
  auto* bench = app.add_subcommand("benchmark", "Monte Carlo RMSE study and basis-size sweep");
  bench->add_option("--config", ba.config, "JSON with study and/or sweep sections")->required();
  bench->add_option("--out-dir", ba.out_dir, "Output directory");
  bench->add_option("--seed", ba.seed, "Overrides the configured seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*validate) return cmd_validate(va, out);
    if (*simulate) return cmd_simulate(sa, out);
    if (*fit) return cmd_fit(fa, out);
    if (*predict) return cmd_predict(pa, out);
    if (*stream) return cmd_stream(st, in, out);
    if (*bench) return cmd_benchmark(ba, out);
  } catch (const ModelFileError& e) {
    return fail(err, e.what(), kModelFileError);
  } catch (const OrderingError& e) {
    return fail(err, e.what(), kStreamOrderError);
  } catch (const NumericalError& e) {
    return fail(err, e.what(), kNumericalError);
  } catch (const OptimizationError& e) {
    return fail(err, e.what(), kNumericalError);
  } catch (const FormatError& e) {
    return fail(err, e.what(), kInputError);
  } catch (const ParameterError& e) {
    return fail(err, e.what(), kInputError);
  } catch (const DomainError& e) {
    return fail(err, e.what(), kInputError);
  } catch (const std::exception& e) {
    return fail(err, e.what(), kUnexpected);
  }
  return kUnexpected;
}

}  // namespace magmap::cli
