#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "magmap/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run magmap_run(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  Run r;
  r.code = magmap::cli::run(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

/// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) {
    dir = fs::temp_directory_path() / ("magmap_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Rows of a numeric CSV without its header.
std::vector<std::vector<double>> read_numeric_csv(const std::string& path) {
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

const char* kDomainConfig =
    R"({"domain": {"center": [0, 0, 0], "half_lengths": [0.5, 0.5, 0.5]}, "m": 256,
        "theta": {"sigma2_lin": 0.3, "sigma2_se": 0.01, "ell_se": 0.1, "sigma2_noise": 0.04}})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors and empty input") {
  Scratch s("usage");
  CHECK(magmap_run({}).code == magmap::cli::kInputError);
  CHECK(magmap_run({"fit"}).code == magmap::cli::kInputError);
  CHECK(magmap_run({"--help"}).code == magmap::cli::kOk);
  write_text(s / "empty.csv", "t,x,y,z,bx,by,bz\n");
  auto r = magmap_run({"fit", "--data", s / "empty.csv", "--out", s / "m.bin"});
  CHECK(r.code == magmap::cli::kInputError);
  CHECK(r.err.find("no samples") != std::string::npos);
  CHECK_FALSE(fs::exists(s / "m.bin"));
  write_text(s / "bad.csv", "t,x,y,z,bx,by,bz\n0,0,0,0,1,1\n");
  r = magmap_run({"validate", "--data", s / "bad.csv"});
  CHECK(r.code == magmap::cli::kInputError);
  CHECK(r.err.find("bad.csv:2") != std::string::npos);
}

TEST_CASE("simulate, fit with fixed theta, predict") {
  Scratch s("fit");
  REQUIRE(magmap_run({"simulate", "--out", s / "d.csv", "--n", "300", "--m-sim", "256"}).code == 0);
  write_text(s / "c.json", kDomainConfig);
  auto r = magmap_run({"validate", "--data", s / "d.csv", "--config", s / "c.json"});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["inside"] == 300);

  r = magmap_run({"fit", "--data", s / "d.csv", "--config", s / "c.json", "--out", s / "m.bin",
                  "--report", s / "r.json"});
  REQUIRE(r.code == 0);
  auto report = json::parse(read_text(s / "r.json"));
  CHECK(report["optimized"] == false);
  CHECK(report["theta"]["ell_se"] == 0.1);
  CHECK(report["n"] == 300);
  CHECK(report["m"] == 256);

  auto data = magmap::read_samples_csv(fs::path(s / "d.csv"));
  const auto x = data[0].x;
  const std::string point = std::to_string(x[0]) + "," + std::to_string(x[1]) + "," +
                            std::to_string(x[2]);
  r = magmap_run({"predict", "--model", s / "m.bin", "--grid", point, "--what", "all", "--out",
                  s / "p.csv"});
  REQUIRE(r.code == 0);
  auto rows = read_numeric_csv(s / "p.csv");
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].size() == 12);
  const magmap::Vec3 mean(rows[0][3], rows[0][4], rows[0][5]);
  CHECK((mean - data[0].y).norm() < 3 * 0.2 * std::sqrt(3.0) + 1e-3);
  CHECK(rows[0][11] == doctest::Approx(mean.norm()));
  for (int i = 6; i < 9; ++i) CHECK(rows[0][static_cast<std::size_t>(i)] > 0.0);
  CHECK(rows[0][6] < 0.04);

  r = magmap_run({"predict", "--model", s / "m.bin", "--grid", "-0.4:0.4:3,-0.4:0.4:3,0",
                  "--format", "json", "--what", "magnitude"});
  REQUIRE(r.code == 0);
  auto rows9 = json::parse(r.out);
  REQUIRE(rows9.size() == 9);
  CHECK(rows9[0].contains("magnitude"));
  CHECK_FALSE(rows9[0].contains("mean"));
  r = magmap_run({"predict", "--model", s / "m.bin", "--grid", "5:6:2,5:6:2,5"});
  CHECK(r.code == magmap::cli::kInputError);
}

TEST_CASE("fit with optimization recovers the generating length scale") {
  Scratch s("optimize");
  REQUIRE(magmap_run({"simulate", "--out", s / "d.csv", "--n", "2000", "--m-sim", "512",
                      "--seed", "4"})
              .code == 0);
  write_text(s / "c.json",
             R"({"domain": {"center": [0, 0, 0], "half_lengths": [0.5, 0.5, 0.5]}, "m": 512})");
  auto r = magmap_run(
      {"fit", "--data", s / "d.csv", "--config", s / "c.json", "--out", s / "m.bin"});
  REQUIRE(r.code == 0);
  auto report = json::parse(r.out);
  CHECK(report["optimized"] == true);
  CHECK(report["theta"]["ell_se"].get<double>() == doctest::Approx(0.1).epsilon(0.2));
  CHECK(report["theta"]["sigma2_noise"].get<double>() == doctest::Approx(0.04).epsilon(0.2));
  CHECK(std::isfinite(report["nlml"].get<double>()));
}

TEST_CASE("corrupt model files") {
  Scratch s("model");
  write_text(s / "bad.bin", "garbage");
  auto r = magmap_run({"predict", "--model", s / "bad.bin", "--grid", "0,0,0"});
  CHECK(r.code == magmap::cli::kModelFileError);
  r = magmap_run({"predict", "--model", s / "missing.bin", "--grid", "0,0,0"});
  CHECK(r.code == magmap::cli::kModelFileError);
}

TEST_CASE("static streaming matches the batch fit") {
  Scratch s("stream");
  REQUIRE(magmap_run({"simulate", "--out", s / "d.csv", "--n", "400", "--m-sim", "256"}).code == 0);
  write_text(s / "c.json", kDomainConfig);
  REQUIRE(magmap_run({"fit", "--data", s / "d.csv", "--config", s / "c.json", "--out",
                      s / "m.bin"})
              .code == 0);
  const std::string grid = "-0.4:0.4:5,-0.4:0.4:5,-0.2:0.2:3";
  REQUIRE(magmap_run({"predict", "--model", s / "m.bin", "--grid", grid, "--out", s / "p.csv"})
              .code == 0);
  auto r = magmap_run({"stream", "--config", s / "c.json", "--data", "-", "--mode", "static",
                       "--grid", grid, "--snapshot-every", "0", "--snapshot-prefix",
                       s / "snap_", "--out", s / "st.bin"},
                      read_text(s / "d.csv"));
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["snapshots"] == 1);
  CHECK(fs::exists(s / "snap_final.csv"));
  auto batch = read_numeric_csv(s / "p.csv");
  auto seq = read_numeric_csv(s / "snap_final.csv");
  REQUIRE(batch.size() == 75);
  REQUIRE(seq.size() == batch.size());
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t c = 3; c < batch[i].size(); ++c) {
      scale = std::max(scale, std::abs(batch[i][c]));
      diff = std::max(diff, std::abs(batch[i][c] - seq[i][c]));
    }
  }
  CHECK(diff <= 1e-6 * scale);

  r = magmap_run({"stream", "--config", s / "c.json", "--data", s / "d.csv", "--grid", grid,
                  "--snapshot-every", "100", "--snapshot-prefix", s / "every_"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["snapshots"] == 5);
  CHECK(fs::exists(s / "every_000004.csv"));
  CHECK_FALSE(fs::exists(s / "every_000005.csv"));

  // Resuming from a saved state continues the same posterior.
  auto half = read_text(s / "d.csv");
  std::istringstream lines(half);
  std::string header, line, first, second;
  std::getline(lines, header);
  for (int i = 0; std::getline(lines, line); ++i) (i < 200 ? first : second) += line + "\n";
  write_text(s / "a.csv", header + "\n" + first);
  write_text(s / "b.csv", header + "\n" + second);
  REQUIRE(magmap_run({"stream", "--config", s / "c.json", "--data", s / "a.csv", "--out",
                      s / "a.bin"})
              .code == 0);
  REQUIRE(magmap_run({"stream", "--model", s / "a.bin", "--resume", "--data", s / "b.csv",
                      "--out", s / "ab.bin"})
              .code == 0);
  auto full = magmap::load_model(fs::path(s / "st.bin"));
  auto resumed = magmap::load_model(fs::path(s / "ab.bin"));
  CHECK(resumed.samples_seen == 400);
  CHECK((resumed.posterior.mean - full.posterior.mean).norm() <=
        1e-9 * full.posterior.mean.norm());
}

TEST_CASE("spatio-temporal streaming rejects timestamp regressions") {
  Scratch s("order");
  write_text(s / "c.json", kDomainConfig);
  write_text(s / "d.csv",
             "t,x,y,z,bx,by,bz\n0,0,0,0,1,1,1\n1,0.1,0,0,1,1,1\n0.5,0.2,0,0,1,1,1\n");
  auto r = magmap_run({"stream", "--config", s / "c.json", "--data", s / "d.csv", "--mode",
                       "spatiotemporal"});
  CHECK(r.code == magmap::cli::kStreamOrderError);
  CHECK(r.err.find("d.csv:4") != std::string::npos);
  write_text(s / "o.csv", "t,x,y,z,bx,by,bz\n0,0,0,0,1,1,1\n1,0.9,0,0,1,1,1\n");
  r = magmap_run({"stream", "--config", s / "c.json", "--data", s / "o.csv"});
  CHECK(r.code == magmap::cli::kInputError);
  CHECK(r.err.find("o.csv:3") != std::string::npos);
}

TEST_CASE("benchmark manifests reproduce their outputs") {
  Scratch s("bench");
  write_text(s / "b.json", R"({"study": {"scenario": {"m_sim": 64, "grid_k": 4},
      "n_train": [60], "n_mc": 2, "m_fit": 32, "optimize": false},
      "sweep": {"scenario": {"m_sim": 64, "grid_k": 4}, "n_train": 60, "m_values": [16, 32]}})");
  REQUIRE(magmap_run({"benchmark", "--config", s / "b.json", "--out-dir", s / "one"}).code == 0);
  REQUIRE(magmap_run({"benchmark", "--config", s / "one/manifest.json", "--out-dir", s / "two"})
              .code == 0);
  CHECK(read_text(s / "one/study.csv") == read_text(s / "two/study.csv"));
  CHECK(read_text(s / "one/sweep.csv") == read_text(s / "two/sweep.csv"));
  auto study = read_text(s / "one/study.csv");
  CHECK(std::count(study.begin(), study.end(), '\n') == 4);
  auto r = magmap_run({"benchmark", "--config", s / "c.json"});
  CHECK(r.code == magmap::cli::kInputError);
}

}
