#include <doctest.h>

#include <random>

#include "src/dolgopyat.hpp"
#include "src/semiflow.hpp"

using namespace afuw;

namespace {

struct Setup {
  MapSpec map = ensure_expansion(make_doubling()).first;
  RoofFunction roof = RoofFunction::one_plus_x_sq();
};

Setup& setup() {
  static Setup s;
  return s;
}

}  // namespace

TEST_CASE("flow satisfies the semigroup law") {
  auto& S = setup();
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    double y = U(rng);
    double u = U(rng) * S.roof(y) * 0.999;
    double t = 3.0 * U(rng);
    double s = 3.0 * U(rng);
    FlowPoint one = flow_advance(S.map, S.roof, y, u, t + s);
    FlowPoint mid = flow_advance(S.map, S.roof, y, u, s);
    FlowPoint two = flow_advance(S.map, S.roof, mid.y, mid.u, t);
    CHECK(std::abs(one.y - two.y) < 1e-8);
    CHECK(std::abs(one.u - two.u) < 1e-8);
  }
}

TEST_CASE("flow rejects negative time") {
  auto& S = setup();
  CHECK_THROWS_AS(flow_advance(S.map, S.roof, 0.3, 0.1, -0.5), ConfigError);
}

TEST_CASE("product samples stay stationary under the flow") {
  auto& S = setup();
  SpectralData sd = eigendata(S.map, S.roof, 0.0, 2048);

  // Rejection sampler from the same normalized product measure the
  // correlation integrator uses: base density f, height uniform under the
  // roof.
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double fcap = sup_real(sd.f, Interval{sd.f.lo, sd.f.hi}) * 1.01;
  // One step of the map crosses every stage of the iterate, so the height
  // lives under the stage-summed roof.
  double rcap = 2.0 * S.roof.sup(S.map.Y);
  const int n = 50000;
  std::vector<double> before, after_a, after_b;
  before.reserve(n);
  while ((int)before.size() < n) {
    double y = U(rng);
    if (U(rng) * fcap > sd.f.eval(y).real()) continue;
    double u = U(rng) * rcap;
    if (u >= birkhoff_roof(S.map, S.roof, y, 1)) continue;
    before.push_back(y);
    after_a.push_back(flow_advance(S.map, S.roof, y, u, 0.7).y);
    after_b.push_back(flow_advance(S.map, S.roof, y, u, 1.3).y);
  }
  double bound = 4.0 / std::sqrt((double)n);
  CHECK(ks_statistic(before, after_a) < bound);
  CHECK(ks_statistic(before, after_b) < bound);
}

TEST_CASE("correlation is invariant under observable shifts") {
  auto& S = setup();
  SpectralData sd = eigendata(S.map, S.roof, 0.0, 1024);
  std::vector<double> ts = {0.5, 1.0, 1.5};
  auto A = [](double y, double u) { return std::sin(2 * M_PI * y) + 0.2 * u; };
  auto B = [](double y, double u) { return std::cos(2 * M_PI * y) - 0.1 * u; };
  auto As = [&](double y, double u) { return A(y, u) + 5.0; };
  auto Bs = [&](double y, double u) { return B(y, u) - 3.0; };

  CorrelationReport r1 = flow_correlation(S.map, S.roof, sd, A, B, ts, 20000, 77);
  CorrelationReport r2 = flow_correlation(S.map, S.roof, sd, As, Bs, ts, 20000, 77);
  REQUIRE(r1.pts.size() == r2.pts.size());
  for (size_t i = 0; i < r1.pts.size(); ++i)
    CHECK(r1.pts[i].rho == doctest::Approx(r2.pts[i].rho).epsilon(1e-9));
  CHECK(r2.mean_a == doctest::Approx(r1.mean_a + 5.0).epsilon(1e-9));
  CHECK(r1.samples == 20000);
  CHECK(r1.escaped == 0);
  CHECK(r1.phi_bar > 1.0);
  CHECK(r1.phi_bar < 3.0);
}

TEST_CASE("correlation runs are reproducible by seed") {
  auto& S = setup();
  SpectralData sd = eigendata(S.map, S.roof, 0.0, 1024);
  std::vector<double> ts = {0.5, 1.0};
  auto A = [](double y, double u) { return std::sin(2 * M_PI * y) * std::cos(u); };
  CorrelationReport r1 = flow_correlation(S.map, S.roof, sd, A, A, ts, 5000, 31);
  CorrelationReport r2 = flow_correlation(S.map, S.roof, sd, A, A, ts, 5000, 31);
  for (size_t i = 0; i < r1.pts.size(); ++i) {
    CHECK(r1.pts[i].rho == r2.pts[i].rho);
    CHECK(r1.pts[i].se == r2.pts[i].se);
  }
}

TEST_CASE("exponential fit recovers a synthetic rate") {
  CorrelationReport rep;
  for (int i = 1; i <= 16; ++i) {
    double t = 0.25 * i;
    rep.pts.push_back({t, 3.0 * std::exp(-0.8 * t), 1e-7});
  }
  ExpFit f = fit_exponential(rep);
  CHECK(f.conclusive);
  CHECK(f.n_points == 16);
  CHECK(f.a1 == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(f.ci_lo <= 0.8);
  CHECK(f.ci_hi >= 0.8);
  CHECK(std::abs(f.curvature) < 1e-6);
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-6));
}

TEST_CASE("exponential fit flags curvature on a gaussian profile") {
  CorrelationReport rep;
  for (int i = 1; i <= 16; ++i) {
    double t = 0.25 * i;
    rep.pts.push_back({t, std::exp(-t * t), 1e-9});
  }
  ExpFit f = fit_exponential(rep);
  CHECK(f.conclusive);
  CHECK(f.curvature < 0.0);
  CHECK(std::abs(f.curvature) > 3.0 * f.curvature_se);
}

TEST_CASE("exponential fit drops points below the noise floor") {
  CorrelationReport rep;
  for (int i = 1; i <= 12; ++i) {
    double t = 0.5 * i;
    double rho = std::exp(-2.0 * t);
    rep.pts.push_back({t, rho, 1e-3});
  }
  // exp(-2t) sinks under 3e-3 near t = 3: later points must be excluded.
  ExpFit f = fit_exponential(rep);
  CHECK(f.n_points < 12);
  CHECK(f.n_points >= 5);

  CorrelationReport tiny;
  for (int i = 1; i <= 12; ++i) tiny.pts.push_back({0.5 * i, 1e-6, 1.0});
  ExpFit g = fit_exponential(tiny);
  CHECK_FALSE(g.conclusive);
}

TEST_CASE("two-sample KS statistic on explicit data") {
  std::vector<double> a = {0.1, 0.2, 0.3, 0.4};
  CHECK(ks_statistic(a, a) == doctest::Approx(0.0));

  std::vector<double> b = {10.1, 10.2, 10.3, 10.4};
  CHECK(ks_statistic(a, b) == doctest::Approx(1.0));

  // Interleaved samples: empirical CDFs differ by at most one step.
  std::vector<double> c = {0.15, 0.25, 0.35, 0.45};
  CHECK(ks_statistic(a, c) == doctest::Approx(0.25));

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> x(2000), y(2000);
  for (auto& v : x) v = U(rng);
  for (auto& v : y) v = U(rng);
  CHECK(ks_statistic(x, y) < 4.0 / std::sqrt(2000.0));
}
