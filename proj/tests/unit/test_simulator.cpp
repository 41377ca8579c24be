#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "magmap/error.hpp"
#include "magmap/simulator.hpp"
#include "magmap/study.hpp"
#include "oracles.hpp"

using namespace magmap;

namespace {

const Domain kDomain = Domain::centered(0.5, 0.5, 0.5);
const Hyperparameters kTheta{0.3, 1.0, 0.1, 0.04};

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("field draws are reproducible") {
  auto a = sample_field(kDomain, kTheta, 256, 9);
  auto b = sample_field(kDomain, kTheta, 256, 9);
  auto c = sample_field(kDomain, kTheta, 256, 10);
  CHECK(a.weights() == b.weights());
  CHECK(a.weights() != c.weights());
  CHECK(a.weights().size() == 3 + 256);
  CHECK(a.field(Vec3(0.1, 0.2, 0.3)) == b.field(Vec3(0.1, 0.2, 0.3)));
}

TEST_CASE("empirical field variance matches the prior marginal") {
  auto field = sample_field(kDomain, kTheta, 2048, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  const Eigen::VectorXd lambda = field.basis().lambda_diag(kTheta);
  double empirical = 0.0, analytic = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    Vec3 x(u(rng), u(rng), u(rng));
    empirical += field.field(x).squaredNorm();
    auto h = field.basis().gradient_block(x);
    analytic += (h * lambda.asDiagonal() * h.transpose()).trace();
  }
  CHECK(empirical / analytic == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("synthetic fields are gradients of their potential") {
  auto field = sample_field(kDomain, kTheta, 512, 5);
  auto f = [&](const Vec3& x) { return field.field(x); };
  for (const Vec3& x : {Vec3(0.1, 0.2, -0.3), Vec3(-0.25, 0.0, 0.12), Vec3(0.3, -0.3, 0.3)}) {
    CHECK(oracle::fd_curl(f, x, 2.5e-4).norm() < 1e-8 * f(x).norm());
    Vec3 g = oracle::fd_gradient([&](const Vec3& p) { return field.potential(p); }, x, 1e-6);
    CHECK((g - f(x)).norm() < 1e-6 * (1 + f(x).norm()));
  }
  std::vector<Vec3> pts{Vec3::Zero(), Vec3(0.1, 0.1, 0.1)};
  auto many = field.fields(pts);
  CHECK(many[1] == field.field(pts[1]));
}

TEST_CASE("trajectories") {
  auto base = sample_field(kDomain, kTheta, 128, 1);
  FieldFunction f = [&](double, const Vec3& x) { return base.field(x); };
  std::vector<Waypoint> path{{0.0, Vec3(-0.3, 0, 0)}, {2.05, Vec3(0.3, 0, 0)}, {3.0, Vec3(0.3, 0.2, 0)}};
  SUBCASE("count and noise-free values") {
    auto s = simulate_trajectory(f, kDomain, path, 10.0, 0.0, 1);
    CHECK(s.size() == static_cast<std::size_t>(std::ceil(3.0 * 10.0)) + 1);
    for (const auto& smp : s) CHECK(smp.y == base.field(smp.x));
    CHECK(s.front().x == path.front().x);
    CHECK((s.back().x - path.back().x).norm() < 1e-12);
    CHECK(s[5].t == doctest::Approx(0.5));
  }
  SUBCASE("stationary path varies only by noise") {
    std::vector<Waypoint> still{{0.0, Vec3(0.1, 0.1, 0.1)}, {1.0, Vec3(0.1, 0.1, 0.1)}};
    auto s = simulate_trajectory(f, kDomain, still, 100.0, 0.2, 3);
    CHECK(s.size() == 101);
    Vec3 mean = Vec3::Zero();
    double var = 0.0;
    for (const auto& smp : s) {
      CHECK((smp.x - still[0].x).norm() < 1e-15);
      mean += smp.y;
    }
    mean /= 101.0;
    for (const auto& smp : s) var += (smp.y - mean).squaredNorm();
    var /= 3 * 100.0;
    CHECK((mean - base.field(still[0].x)).norm() < 0.1);
    CHECK(var == doctest::Approx(0.04).epsilon(0.3));
  }
  SUBCASE("waypoints are validated") {
    std::vector<Waypoint> outside{{0.0, Vec3::Zero()}, {1.0, Vec3(0.6, 0, 0)}};
    CHECK_THROWS_AS(simulate_trajectory(f, kDomain, outside, 10, 0, 1), DomainError);
    std::vector<Waypoint> backwards{{1.0, Vec3::Zero()}, {1.0, Vec3(0.1, 0, 0)}};
    CHECK_THROWS_AS(simulate_trajectory(f, kDomain, backwards, 10, 0, 1), ParameterError);
  }
}

TEST_CASE("field events") {
  auto base = sample_field(kDomain, kTheta, 128, 2);
  FieldEvent ev{10.0, Vec3(0.1, 0.1, 0.0), Vec3(0.0, 2.0, 0.0), 0.05};
  auto tv = apply_field_event(base, ev);
  const Vec3 probe = ev.center;
  CHECK(tv(9.99, probe) == base.field(probe));
  CHECK((tv(10.0, probe) - base.field(probe) - ev.peak).norm() < 1e-12);
  CHECK((tv(10.0, probe) - tv(0.0, probe)).norm() == doctest::Approx(2.0));
  for (const Vec3& dir : {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0.6, 0.8, 0)}) {
    const Vec3 far = probe + 4 * ev.width * dir;
    CHECK(event_delta(ev, far).norm() < 0.05 * ev.peak.norm());
  }
  FieldEvent none = ev;
  none.peak.setZero();
  auto same = apply_field_event(base, none);
  CHECK(same(20.0, Vec3(0.2, 0.0, 0.1)) == base.field(Vec3(0.2, 0.0, 0.1)));
  auto f = [&](const Vec3& x) { return event_delta(ev, x); };
  CHECK(oracle::fd_curl(f, probe + Vec3(0.02, -0.01, 0.03), 1e-4).norm() < 1e-8);
}

TEST_CASE("grids and error metrics") {
  auto g = cube_grid(Vec3(1, 0, 0), 0.4, 21);
  CHECK(g.size() == 9261);
  CHECK(g.front().isApprox(Vec3(0.6, -0.4, -0.4)));
  CHECK(g.back().isApprox(Vec3(1.4, 0.4, 0.4)));
  std::vector<Vec3> a{Vec3(1, 2, 3), Vec3(0, 0, 0)}, b{Vec3(1, 2, 3), Vec3(0, 0, 6)};
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, b) == doctest::Approx(std::sqrt(36.0 / 6.0)));
  CHECK(component_rmse(a, b).isApprox(Vec3(0, 0, std::sqrt(18.0))));
}

TEST_CASE("rng streams are independent and reproducible") {
  auto a = make_rng(5, 0), b = make_rng(5, 0), c = make_rng(5, 1);
  CHECK(a() == b());
  CHECK(make_rng(5, 0)() != c());
}

TEST_CASE("scenario data and randomized starts") {
  Scenario s;
  s.m_sim = 64;
  auto small = simulate_scenario(s, 10, 3);
  auto big = simulate_scenario(s, 20, 3);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(small.train[i].x == big.train[i].x);
    CHECK(small.train[i].y == big.train[i].y);
    CHECK(scenario_domain(s).contains(small.train[i].x));
    CHECK(small.train[i].x.cwiseAbs().maxCoeff() <= s.data_half);
  }
  CHECK(small.grid.size() == 9261);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    auto r = randomize(s.theta_true, 0.7, rng);
    CHECK(r.ell_se >= 0.03 - 1e-15);
    CHECK(r.ell_se <= 0.17 + 1e-15);
    CHECK(r.sigma2_noise >= 0.012 - 1e-15);
  }
  auto c = component_theta_from(s.theta_true);
  CHECK(c.sigma2_const == 0.3);
  CHECK(c.sigma2_se == doctest::Approx(100.0));
}

TEST_CASE("small studies are deterministic") {
  StudyConfig cfg;
  cfg.scenario.m_sim = 128;
  cfg.scenario.grid_k = 5;
  cfg.n_train = {100, 200};
  cfg.n_mc = 2;
  cfg.m_fit = 64;
  auto a = run_rmse_study(cfg);
  auto b = run_rmse_study(cfg);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].runs == b[i].runs);
    CHECK(a[i].failures == 0);
    CHECK(a[i].runs.size() == 2);
  }
  std::ostringstream csv;
  write_rmse_csv(csv, a);
  CHECK(csv.str().rfind("n_train,model,rmse_mean,rmse_std,n_mc,seed0", 0) == 0);
  auto j = to_json(cfg);
  auto back = study_config_from_json(j);
  CHECK(to_json(back) == j);

  BasisSweepConfig sw;
  sw.scenario.m_sim = 128;
  sw.scenario.grid_k = 5;
  sw.n_train = 100;
  sw.m_values = {16, 64};
  auto rows = run_basis_sweep(sw);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].rmse_vs_dense < rows[0].rmse_vs_dense);
  CHECK(sweep_config_from_json(to_json(sw)).m_values == sw.m_values);
}

}
