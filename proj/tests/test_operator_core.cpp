#include <doctest.h>

#include <random>

#include "src/operator_core.hpp"

using namespace afuw;

namespace {

const RoofFunction& roof() {
  static RoofFunction r = RoofFunction::one_plus_x_sq();
  return r;
}

// Smooth random trigonometric field with O(1) coefficients.
std::function<cplx(double)> fourier_field(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double a0 = U(rng);
  std::array<cplx, 3> c;
  for (auto& z : c) z = cplx(U(rng), U(rng));
  return [a0, c](double x) {
    cplx s = a0;
    for (int k = 0; k < 3; ++k)
      s += c[k] * std::exp(cplx(0.0, 2.0 * M_PI * (k + 1) * x));
    return s;
  };
}

// Integral of f over Y split at the interior image endpoints, so every panel
// is smooth for quadrature.
cplx integrate_split(const MapSpec& map, const std::function<cplx(double)>& f) {
  std::vector<double> cuts = {map.Y.lo};
  DiscontinuityCatalog cat = build_catalog(map, 1);
  for (const auto& [x, d] : cat.interior_points(map.Y)) cuts.push_back(x);
  cuts.push_back(map.Y.hi);
  std::sort(cuts.begin(), cuts.end());
  cplx total = 0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i], b = cuts[i + 1];
    int panels = 8;
    for (int p = 0; p < panels; ++p)
      total += gl8c(a + (b - a) * p / panels, a + (b - a) * (p + 1) / panels, f);
  }
  return total;
}

}  // namespace

TEST_CASE("transfer application is dual to composition") {
  for (MapSpec map : {map_power(make_doubling(), 2),
                      ensure_expansion(make_golden()).first}) {
    for (int trial = 0; trial < 4; ++trial) {
      auto v = fourier_field(100 + trial);
      auto w = fourier_field(200 + trial);
      cplx lhs = integrate_split(map, [&](double x) {
        return transfer_point(map, roof(), cplx(0, 0), 1, v, x) * w(x);
      });
      cplx rhs = 0;
      for (const Branch& b : map.branches) {
        int panels = 16;
        double a = b.dom.lo, c = b.dom.hi;
        for (int p = 0; p < panels; ++p)
          rhs += gl8c(a + (c - a) * p / panels, a + (c - a) * (p + 1) / panels,
                      [&](double y) { return v(y) * w(b.f(y)); });
      }
      CHECK(std::abs(lhs - rhs) < 1e-8);
    }
  }
}

TEST_CASE("normalized iterates compose exactly") {
  MapSpec d2 = map_power(make_doubling(), 2);
  SpectralData sd = eigendata(d2, roof(), 0.03125, 1024);
  cplx s(0.03125, 3.0);
  auto v = fourier_field(7);
  for (int i = 0; i < 20; ++i) {
    double x = (i + 0.5) / 20.0;
    cplx two = normalized_point(d2, roof(), sd, s, 2, v, x);
    cplx nested = normalized_point(d2, roof(), sd, s, 1,
                                   [&](double y) {
                                     return normalized_point(d2, roof(), sd, s,
                                                             1, v, y);
                                   },
                                   x);
    CHECK(std::abs(two - nested) <= 1e-10 * (1.0 + std::abs(two)));
  }
}

TEST_CASE("grid operator converges to the pointwise one") {
  MapSpec d2 = map_power(make_doubling(), 2);
  cplx s(0.01, 5.0);
  auto v = fourier_field(42);
  auto err_at = [&](int N) {
    UlamOperator op = assemble_ulam(d2, roof(), s, N);
    GridFunction vg = GridFunction::sample(d2.Y, N, v);
    GridFunction u = apply_ulam(op, vg);
    GridFunction p = apply_pointwise(d2, roof(), s, 1, v, N);
    double e = 0;
    for (int i = 0; i < N; ++i) e = std::max(e, std::abs(u.v[i] - p.v[i]));
    return e;
  };
  double e256 = err_at(256), e512 = err_at(512);
  CHECK(e512 < e256);
  CHECK(e256 / e512 >= 1.4);
}

TEST_CASE("grid operator preserves mass at sigma zero") {
  MapSpec d2 = map_power(make_doubling(), 2);
  UlamOperator op = assemble_ulam(d2, roof(), cplx(0, 0), 256);
  CHECK(op.n == 256);
  std::vector<double> colsum(256, 0.0);
  for (int r = 0; r < op.M.outerSize(); ++r)
    for (Eigen::SparseMatrix<cplx, Eigen::RowMajor>::InnerIterator it(op.M, r);
         it; ++it)
      colsum[it.col()] += it.value().real();
  for (int j = 0; j < 256; ++j)
    CHECK(colsum[j] == doctest::Approx(1.0).epsilon(1e-10));

  GridFunction vg = GridFunction::sample(d2.Y, 256, [](double x) {
    return cplx(std::sin(2 * M_PI * x) + 1.2, 0.0);
  });
  GridFunction once = apply_ulam(op, apply_ulam(op, vg));
  GridFunction twice = apply_ulam(op, vg, 2);
  for (int i = 0; i < 256; ++i)
    CHECK(std::abs(once.v[i] - twice.v[i]) < 1e-14);
}

TEST_CASE("leading eigendata at sigma zero") {
  MapSpec d2 = map_power(make_doubling(), 2);
  SpectralData sd = eigendata(d2, roof(), 0.0, 2048);
  CHECK(sd.lambda == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sd.residual < 1e-10);
  CHECK(l1_norm(sd.f) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sup_abs(sd.f, d2.Y) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sd.Lambda >= 1.0);

  MapSpec g2 = ensure_expansion(make_golden()).first;
  SpectralData sg = eigendata(g2, roof(), 0.0, 2048);
  CHECK(sg.lambda == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sg.residual < 1e-10);
  CHECK(var(sg.f) > 0.1);
  CHECK(inf_real(sg.f, g2.Y) > 0.1);
  CHECK(sup_real(sg.f, g2.Y) < 2.0);
  CHECK(l1_norm(sg.f) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("twisted eigenvalues square under iteration") {
  MapSpec d1 = make_doubling();
  MapSpec d2 = map_power(d1, 2);
  for (double sg : {0.03125, -0.03125}) {
    SpectralData s1 = eigendata(d1, roof(), sg, 2048);
    SpectralData s2 = eigendata(d2, roof(), sg, 2048);
    CHECK(s2.lambda == doctest::Approx(s1.lambda * s1.lambda).epsilon(1e-6));
  }
  SpectralData sp = eigendata(d1, roof(), 0.03125, 2048);
  SpectralData sm = eigendata(d1, roof(), -0.03125, 2048);
  CHECK(sp.lambda == doctest::Approx(1.042680175717).epsilon(1e-9));
  CHECK(sm.lambda == doctest::Approx(0.959309605354).epsilon(1e-9));
  CHECK(sp.residual < 1e-10);
  CHECK(sm.residual < 1e-10);
}

TEST_CASE("first-return eigenvalue reflects the truncated tail") {
  MapSpec mp = make_mp_first_return(1.0, 0.8, MpOptions{}, nullptr);
  SpectralData sd = eigendata(mp, roof(), 0.0, 2048);
  CHECK(sd.lambda == doctest::Approx(0.974106167).epsilon(1e-6));
  CHECK(sd.lambda < 1.0);
  CHECK(inf_real(sd.f, mp.Y) > 0.0);
}

TEST_CASE("branch weight bounds exact and certified") {
  MapSpec d2 = map_power(make_doubling(), 2);
  bool exact = false;
  double w1 = branch_weight_bound(d2, roof(), 0.0, 1, 3e5, &exact);
  CHECK(w1 == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(exact);
  double w2 = branch_weight_bound(d2, roof(), 0.0, 2, 3e5, &exact);
  CHECK(w2 == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(exact);

  double wp = branch_weight_bound(d2, roof(), 0.1, 1);
  CHECK(wp >= 0.25 * std::exp(0.2));
  CHECK(wp <= 0.25 * std::exp(0.4));

  // Tiny budget: certified by block submultiplicativity, never below truth.
  double w4_exact = branch_weight_bound(d2, roof(), 0.0, 4, 3e5, &exact);
  CHECK(exact);
  double w4_cap = branch_weight_bound(d2, roof(), 0.0, 4, 5.0, &exact);
  CHECK_FALSE(exact);
  CHECK(w4_cap >= w4_exact * (1.0 - 1e-12));
  CHECK(w4_cap <= std::pow(w1, 4) * (1.0 + 1e-12));
}

TEST_CASE("twist radius sweep on the doubling iterate") {
  MapSpec d2 = map_power(make_doubling(), 2);
  EpsilonChoice ec = pick_epsilon(d2, roof(), 512);
  CHECK(ec.eps == doctest::Approx(0.03125));
  CHECK(ec.checks >= 4);
  CHECK(ec.worst_ratio <= 1.0);
  CHECK(ec.worst_ratio > 0.0);
}

TEST_CASE("parameter continuity modulus") {
  MapSpec d2 = map_power(make_doubling(), 2);
  double zero = continuity_modulus(d2, roof(), {{0.01, 0.01}}, {{2.0, 2.0}},
                                   256, 4, 9);
  CHECK(zero == doctest::Approx(0.0));
  double lip = continuity_modulus(d2, roof(), {{0.0, 0.01}}, {{2.0, 2.5}},
                                  256, 4, 9);
  CHECK(lip > 0.0);
  CHECK(lip < 1e4);
}
