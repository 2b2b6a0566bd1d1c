#include <doctest.h>

#include <random>

#include "src/interval_map.hpp"

using namespace afuw;

TEST_CASE("doubling map basics") {
  MapSpec m = make_doubling();
  REQUIRE(m.branches.size() == 2);
  CHECK(m.rho0 == doctest::Approx(2.0));
  CHECK(m.K == doctest::Approx(1.0));
  CHECK(m.apply(0.3) == doctest::Approx(0.6));
  CHECK(m.apply(0.7) == doctest::Approx(0.4));
  CHECK(m.branch_index(0.5) == 1);
  CHECK(m.apply_left(0.5) == doctest::Approx(1.0));
  CHECK(m.deriv(0.3) == doctest::Approx(2.0));

  std::vector<double> orb = m.orbit(0.1, 3);
  REQUIRE(orb.size() == 4);
  CHECK(orb[3] == doctest::Approx(0.8));
}

TEST_CASE("shifted beta branches and analytic inverses") {
  MapSpec m = make_shifted_beta(2.5, 0.3);
  REQUIRE(m.branches.size() == 3);
  CHECK(m.rho0 == doctest::Approx(2.5));
  for (const Branch& b : m.branches) {
    REQUIRE(b.inv);
    for (double f : {0.1, 0.5, 0.9}) {
      double y = b.img.lo + f * (b.img.hi - b.img.lo) * 0.999;
      double x = b.inv(y);
      CHECK(b.dom.contains(x));
      CHECK(b.f(x) == doctest::Approx(y).epsilon(1e-12));
      CHECK(b.invert(y) == doctest::Approx(x).epsilon(1e-12));
    }
  }
  // mod-1 wrap: 2.5 * 0.5 + 0.3 = 1.55
  CHECK(m.apply(0.5) == doctest::Approx(0.55));
}

TEST_CASE("golden map geometry") {
  MapSpec m = make_golden();
  double beta = 0.5 * (1.0 + std::sqrt(5.0));
  REQUIRE(m.branches.size() == 2);
  CHECK(m.rho0 == doctest::Approx(beta));
  CHECK(m.K == doctest::Approx(beta - 1.0));
  CHECK(m.branches[1].img.hi == doctest::Approx(beta - 1.0));
}

TEST_CASE("map powers compose branches with stage data") {
  MapSpec base = make_doubling();
  MapSpec m2 = map_power(base, 2);
  REQUIRE(m2.branches.size() == 4);
  CHECK(m2.power == 2);
  CHECK(m2.rho0 == doctest::Approx(4.0));

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    double x = U(rng);
    CHECK(m2.apply(x) == doctest::Approx(base.apply(base.apply(x))).epsilon(1e-12));
  }

  const Branch& b = m2.branches[m2.branch_index(0.1)];
  REQUIRE(b.stages);
  std::vector<double> pts, dvs;
  b.stages(0.1, &pts, &dvs);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0] == doctest::Approx(0.1));
  CHECK(pts[1] == doctest::Approx(0.2));
  CHECK(dvs[0] == doctest::Approx(1.0));
  CHECK(dvs[1] == doctest::Approx(2.0));
}

TEST_CASE("roof step sums the stages of an iterate") {
  MapSpec m2 = map_power(make_doubling(), 2);
  RoofFunction roof = RoofFunction::one_plus_x_sq();
  const Branch& b = m2.branches[m2.branch_index(0.1)];

  double dphi = 0;
  double val = roof_step(b, roof, 0.1, &dphi);
  CHECK(val == doctest::Approx(2.05));  // (1 + 0.01) + (1 + 0.04)
  CHECK(dphi == doctest::Approx(1.0));  // 0.2 + 0.4 * 2

  MapSpec m1 = make_doubling();
  const Branch& e = m1.branches[0];
  CHECK(roof_step(e, roof, 0.1) == doctest::Approx(1.01));
}

TEST_CASE("expansion adjustment picks the smallest adequate power") {
  auto [d2, md] = ensure_expansion(make_doubling());
  CHECK(md == 2);
  CHECK(d2.rho0 == doctest::Approx(4.0));

  auto [b3, mb] = ensure_expansion(make_shifted_beta(3.0, 0.0));
  CHECK(mb == 1);
  CHECK(b3.rho0 == doctest::Approx(3.0));

  auto [g2, mg] = ensure_expansion(make_golden());
  CHECK(mg == 2);
  CHECK(g2.rho0 == doctest::Approx(0.5 * (3.0 + std::sqrt(5.0))));

  auto [s2, ms] = ensure_expansion(make_shifted_beta(2.5, 0.3));
  CHECK(ms == 2);
  CHECK(s2.rho0 == doctest::Approx(6.25));
}

TEST_CASE("first-return construction matches ambient iteration") {
  const double alpha = 1.0, gamma = 0.8;
  MapSpec m = make_mp_first_return(alpha, gamma, MpOptions{}, nullptr);
  REQUIRE(m.branches.size() == 40);
  CHECK(m.Y.lo == doctest::Approx(0.5));
  CHECK(m.Y.hi == doctest::Approx(1.0));
  CHECK(m.rho0 == doctest::Approx(2.0 * gamma));
  CHECK(m.dropped_mass > 0.0);
  CHECK(m.dropped_weight > 0.0);

  auto g = [&](double x) { return x * (1.0 + std::pow(2.0, alpha) * std::pow(x, alpha)); };
  for (const Branch& b : m.branches) {
    double y = b.dom.mid();
    double z = gamma * (2.0 * y - 1.0);
    int steps = 1;
    while (z < 0.5) {
      z = g(z);
      ++steps;
    }
    CHECK(steps == b.return_time);
    CHECK(b.f(y) == doctest::Approx(z).epsilon(1e-9));
  }
}

TEST_CASE("first-return tail control accepts and rejects") {
  CHECK_THROWS_AS(make_mp_first_return(1.0, 0.8, MpOptions{40, 1e-6}, nullptr),
                  ConfigError);
  CHECK_THROWS_AS(make_mp_first_return(1.0, 0.4, MpOptions{}, nullptr),
                  ConfigError);
  CHECK_THROWS_AS(make_mp_first_return(-1.0, 0.8, MpOptions{}, nullptr),
                  ConfigError);

  // The roof factor exp(eps0 * sup) tightens the effective tolerance, so a
  // truncation that passes bare can fail with a roof attached.
  RoofFunction roof = RoofFunction::one_plus_x_sq();
  CHECK_THROWS_AS(make_mp_first_return(1.0, 0.8, MpOptions{}, &roof),
                  ConfigError);
  MapSpec with_roof = make_mp_first_return(1.0, 0.8, MpOptions{60, 0.5}, &roof);
  CHECK(with_roof.branches.size() == 60);
}

TEST_CASE("cylinders and inverse branch enumeration") {
  MapSpec m2 = map_power(make_doubling(), 2);
  RoofFunction roof = RoofFunction::one_plus_x_sq();

  for (int i = 0; i < 4; ++i) {
    Interval c = cylinder_of_word(m2, {i});
    CHECK(c.lo == doctest::Approx(m2.branches[i].dom.lo));
    CHECK(c.hi == doctest::Approx(m2.branches[i].dom.hi));
  }
  Interval c12 = cylinder_of_word(m2, {1, 2});
  REQUIRE_FALSE(c12.empty());
  double y = c12.mid();
  CHECK(m2.branch_index(y) == 1);
  CHECK(m2.branch_index(m2.apply(y)) == 2);

  std::vector<InverseBranch> H2 = enumerate_branches(m2, 2);
  REQUIRE(H2.size() == 16);
  for (const InverseBranch& h : H2) {
    CHECK(h.dom.length() == doctest::Approx(1.0));
    InverseLeaf leaf = eval_branch(m2, roof, h, 0.37, true);
    CHECK(leaf.hprime == doctest::Approx(1.0 / 16.0));
    CHECK(m2.apply(m2.apply(leaf.y)) == doctest::Approx(0.37).epsilon(1e-9));
  }

  // Stage-summed weights: phi_2 collects all four base stages.
  {
    std::vector<double> orbit;
    InverseLeaf leaf = eval_branch(m2, roof, H2[5], 0.37, false, &orbit);
    REQUIRE(orbit.size() == 2);
    MapSpec base = make_doubling();
    double expect = 0;
    for (double z : orbit) expect += roof(z) + roof(base.apply(z));
    CHECK(leaf.phi_n == doctest::Approx(expect).epsilon(1e-10));
  }

  int count = 0;
  double mass = 0;
  for_each_preimage(m2, roof, 2, 0.3, false, [&](const InverseLeaf& l) {
    ++count;
    mass += l.hprime;
  });
  CHECK(count == 16);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(enumerate_branches(m2, 12, 100.0), BudgetError);
}

TEST_CASE("discontinuity catalog and image partitions") {
  MapSpec d2 = map_power(make_doubling(), 2);
  DiscontinuityCatalog cd = build_catalog(d2, 6);
  CHECK(cd.interior_points(d2.Y).empty());
  std::vector<Interval> atoms = partition_pk(d2, cd, 5);
  CHECK(atoms.size() == 1);

  MapSpec g2 = ensure_expansion(make_golden()).first;
  DiscontinuityCatalog cg = build_catalog(g2, 12);
  CHECK_FALSE(cg.interior_points(g2.Y).empty());
  std::vector<Interval> ga = partition_pk(g2, cg, 10);
  CHECK(ga.size() == 2);
  double total = 0;
  for (const Interval& a : ga) total += a.length();
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mixing times with and without domain gaps") {
  MapSpec d2 = map_power(make_doubling(), 2);
  CHECK(mixing_time(d2, 0.1, 64) == 2);
  CHECK(mixing_time(d2, 0.1, 1) == 0);  // cap reached

  // Sub-Markov holes: windows clip to the branch domains instead of dying
  // inside a truncation gap.
  MapSpec mp = make_mp_first_return(1.0, 0.8, MpOptions{}, nullptr);
  int k = mixing_time(mp, 0.02, 64);
  CHECK(k > 0);
  CHECK(k <= 8);
}

TEST_CASE("geometric constant table for the doubling iterate") {
  GeometricConstants gc = geometric_constants(make_doubling());
  CHECK(gc.iterate == 2);
  CHECK(gc.rho0 == doctest::Approx(4.0));
  CHECK(gc.rho == doctest::Approx(std::sqrt(2.0)));
  CHECK(gc.C1 == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(gc.K == doctest::Approx(1.0));
  CHECK(gc.delta0 == doctest::Approx(0.1));
  CHECK(gc.k1 == 2);
  CHECK(gc.N1 == 2);
}

TEST_CASE("geometric constant table for the first-return iterate") {
  GeometricConstants gc = geometric_constants(
      make_mp_first_return(1.0, 0.8, MpOptions{}, nullptr));
  CHECK(gc.iterate == 2);
  CHECK(gc.rho0 == doctest::Approx(5.724334).epsilon(1e-4));
  CHECK(gc.C1 == doctest::Approx(3.089769).epsilon(1e-4));
  CHECK(gc.K == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(gc.delta0 == doctest::Approx(0.00177666).epsilon(1e-3));
  CHECK(gc.k1 == 3);
}

TEST_CASE("roof families expose value, slope, and range") {
  Interval Y{0.0, 1.0};
  RoofFunction q = RoofFunction::one_plus_x_sq();
  CHECK(q(0.5) == doctest::Approx(1.25));
  CHECK(q.deriv(0.5) == doctest::Approx(1.0));
  CHECK(q.sup(Y) == doctest::Approx(2.0));
  CHECK(q.inf(Y) == doctest::Approx(1.0));
  CHECK(q.kind_name() == "one_plus_x_sq");
  CHECK(q.eps0 == doctest::Approx(0.25));

  RoofFunction c = RoofFunction::constant(1.7);
  CHECK(c(0.9) == doctest::Approx(1.7));
  CHECK(c.deriv(0.9) == 0.0);
  CHECK(c.sup(Y) == doctest::Approx(1.7));
  CHECK(c.kind_name() == "const");

  RoofFunction t = RoofFunction::table({0.0, 1.0}, {1.0, 2.0});
  CHECK(t(0.25) == doctest::Approx(1.25));
  CHECK(t.deriv(0.25) == doctest::Approx(1.0));
  CHECK(t.kind_name() == "table");
}

TEST_CASE("roof constants for the doubling iterate") {
  MapSpec d2 = map_power(make_doubling(), 2);
  RoofConstants rc = roof_constants(d2, RoofFunction::one_plus_x_sq());
  CHECK(rc.C2 == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(rc.C2p == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(rc.C3 == doctest::Approx(2.19364).epsilon(1e-3));
}

TEST_CASE("warm-started branch inversion") {
  MapSpec m = make_doubling();
  const Branch& b = m.branches[0];
  CHECK(branch_invert_warm(b, 0.5, 0.1) == doctest::Approx(0.25).epsilon(1e-10));
  double prev = 0.0;
  for (double y : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    double x = branch_invert_warm(b, y, prev);
    CHECK(x == doctest::Approx(0.5 * y).epsilon(1e-10));
    prev = x;
  }
}
