#include <doctest.h>

#include <random>

#include "src/bv_space.hpp"

using namespace afuw;

namespace {

GridFunction steps(std::vector<cplx> v) {
  GridFunction g{0.0, 1.0, (int)v.size(), std::move(v)};
  return g;
}

// Mix of drifting noise, jumps, and an oscillatory imaginary part.
GridFunction random_bv(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  GridFunction g{0.0, 1.0, n, {}};
  g.v.resize(n);
  double acc = U(rng);
  double freq = 1.0 + 30.0 * U(rng);
  for (int i = 0; i < n; ++i) {
    if (U(rng) < 0.02) acc = 2.0 * U(rng) - 1.0;
    acc += 0.01 * (U(rng) - 0.5);
    g.v[i] = cplx(acc, 0.4 * std::sin(freq * i / n));
  }
  return g;
}

}  // namespace

TEST_CASE("variation of explicit step functions") {
  GridFunction g = steps({1.0, 3.0, 2.0});
  CHECK(var(g) == doctest::Approx(3.0));
  CHECK(var(g, Interval{0.0, 0.5}) == doctest::Approx(2.0));
  CHECK(var(g, Interval{0.4, 0.6}) == doctest::Approx(0.0));
  CHECK(var(steps({5.0})) == 0.0);

  GridFunction c = steps({cplx(0, 0), cplx(3, 4)});
  CHECK(var(c) == doctest::Approx(5.0));
}

TEST_CASE("oscillation is the value-set diameter") {
  GridFunction g = steps({1.0, 3.0, 2.0});
  CHECK(osc(g, Interval{0.0, 1.0}) == doctest::Approx(2.0));
  CHECK(osc(g, Interval{0.4, 1.0}) == doctest::Approx(1.0));

  GridFunction c = steps({cplx(1, 0), cplx(0, 1)});
  double d = osc(c, Interval{0.0, 1.0});
  CHECK(d >= std::sqrt(2.0) * 0.98);
  CHECK(d <= std::sqrt(2.0) + 1e-12);
}

TEST_CASE("l1 and sup/inf accessors") {
  GridFunction g = steps({1.0, -3.0, 2.0});
  CHECK(l1_norm(g) == doctest::Approx(2.0));
  CHECK(sup_abs(g, Interval{0.0, 1.0}) == doctest::Approx(3.0));
  CHECK(inf_abs(g, Interval{0.0, 1.0}) == doctest::Approx(1.0));
  CHECK(sup_real(g, Interval{0.0, 1.0}) == doctest::Approx(2.0));
  CHECK(inf_real(g, Interval{0.0, 1.0}) == doctest::Approx(-3.0));
  CHECK(sup_abs(g, Interval{0.34, 0.66}) == doctest::Approx(3.0));
}

TEST_CASE("jump_at reads the nearest cell boundary") {
  GridFunction g = steps({1.0, 3.0, 2.0});
  CHECK(jump_at(g, 1.0 / 3.0) == doctest::Approx(2.0));
  CHECK(jump_at(g, 2.0 / 3.0) == doctest::Approx(1.0));
  CHECK(jump_at(g, 0.16) == 0.0);
  CHECK(limsup_abs_at(g, 1.0 / 3.0) == doctest::Approx(3.0));
  CHECK(limsup_abs_at(g, 0.5) == doctest::Approx(3.0));
}

TEST_CASE("b_norm combines scaled variation with mass") {
  GridFunction g = steps({1.0, 3.0, 2.0});
  CHECK(b_norm(g, 4.0) == doctest::Approx(3.0 / 5.0 + 2.0));
  CHECK(b_norm(g, 0.0) == doctest::Approx(3.0 + 2.0));
}

TEST_CASE("averaged oscillation stays within the variation band") {
  // Slack (1 + 10/n) absorbs resolution effects at the dyadic radii.
  const int n = 512;
  const double slack = 1.0 + 10.0 / n;
  int violations = 0;
  for (int t = 0; t < 50; ++t) {
    GridFunction g = random_bv(n, 900 + t);
    double kv = keller_var(g);
    double vv = var(g);
    if (!(kv >= 0.5 * vv / slack && kv <= 3.0 * vv * slack)) ++violations;
  }
  CHECK(violations == 0);

  GridFunction flat = GridFunction::constant({0.0, 1.0}, 64, cplx(2.5, -1.0));
  CHECK(keller_var(flat) == doctest::Approx(0.0));

  GridFunction jump{0.0, 1.0, 64, std::vector<cplx>(64, 0.0)};
  for (int i = 32; i < 64; ++i) jump.v[i] = 1.0;
  double kv = keller_var(jump);
  CHECK(kv >= 0.5 / (1.0 + 10.0 / 64));
  CHECK(kv <= 3.0 * (1.0 + 10.0 / 64));
}

TEST_CASE("marked-point jump sums and their tail bound") {
  GridFunction u = steps({1.0, 2.0, 4.0, 8.0});
  std::vector<std::pair<double, int>> marked = {{0.5, 3}, {0.25, 1}};

  // Depth 1 <= k contributes nothing; depth 3 weighs rho^{-3} limsup|u|.
  ExtraTerm e = extra_term(u, Interval{0.0, 1.0}, marked, 2, 2.0, 3, 2);
  CHECK(e.value == doctest::Approx(0.125 * 4.0));
  CHECK(e.remainder > 0.0);

  ExtraTerm deeper = extra_term(u, Interval{0.0, 1.0}, marked, 2, 2.0, 6, 2);
  CHECK(deeper.value == doctest::Approx(e.value));
  CHECK(deeper.remainder < e.remainder);

  // Points outside the interval's interior are skipped.
  ExtraTerm off = extra_term(u, Interval{0.6, 1.0}, marked, 2, 2.0, 3, 2);
  CHECK(off.value == 0.0);
}

TEST_CASE("cone membership on simple pairs") {
  ConeParams p;
  p.C7 = 2.0;
  p.C8 = 10.0;
  p.C10 = 5.0;
  p.rho = 2.0;
  p.b = 50.0;
  p.k = 4;
  p.jmax_built = 8;
  p.n1 = 2;

  GridFunction u = GridFunction::constant({0.0, 1.0}, 256, 1.0);
  GridFunction v = GridFunction::constant({0.0, 1.0}, 256, cplx(0.3, 0.4));
  std::vector<std::pair<double, int>> marked;
  std::vector<Interval> tests = {{0.1, 0.3}, {0.5, 0.9}};

  ConeReport ok = cone_check(u, v, marked, tests, p);
  CHECK(ok.ok);
  CHECK(ok.min_u == doctest::Approx(1.0));
  CHECK(ok.dominance_margin >= 0.0);
  CHECK(ok.osc_checked == 2);

  GridFunction big = GridFunction::constant({0.0, 1.0}, 256, cplx(1.5, 0.0));
  ConeReport bad = cone_check(u, big, marked, tests, p);
  CHECK_FALSE(bad.ok);
  CHECK(bad.dominance_margin < 0.0);

  GridFunction neg = GridFunction::constant({0.0, 1.0}, 256, -1.0);
  CHECK_FALSE(cone_check(neg, v, marked, tests, p).ok);
}
