#pragma once

#include "common.hpp"

namespace afuw {

/*------------------------------ grid functions ------------------------------*/

// Right-continuous step function on a uniform grid over [lo, hi).
// Cell i covers [lo + i*h, lo + (i+1)*h); eval is constant on each cell.
struct GridFunction {
  double lo = 0.0, hi = 1.0;
  int n = 1;
  std::vector<cplx> v;

  double h() const { return (hi - lo) / n; }
  double mid(int i) const { return lo + (i + 0.5) * h(); }
  int cell(double x) const {
    int i = (int)std::floor((x - lo) / h());
    return std::clamp(i, 0, n - 1);
  }
  cplx eval(double x) const { return v[cell(x)]; }

  static GridFunction constant(const Interval& Y, int n, cplx c);
  static GridFunction sample(const Interval& Y, int n,
                             const std::function<cplx(double)>& f);
};

/*--------------------------------- norms ------------------------------------*/

// Total variation over the interior of I: sum of |v[i+1]-v[i]| across cell
// boundaries strictly inside I. Whole-domain overload spans all boundaries.
double var(const GridFunction& g, const Interval& I);
double var(const GridFunction& g);

// sup_{x != y in I} |v(x)-v(y)| (value-set diameter, 16-direction support;
// underestimates by at most 1.9% for genuinely complex data).
double osc(const GridFunction& g, const Interval& I);

double l1_norm(const GridFunction& g);
double sup_abs(const GridFunction& g, const Interval& I);
double inf_abs(const GridFunction& g, const Interval& I);
double sup_real(const GridFunction& g, const Interval& I);
double inf_real(const GridFunction& g, const Interval& I);

// Largest |one-sided difference| at the cell boundary nearest to x
// (0 when x falls strictly inside a cell).
double jump_at(const GridFunction& g, double x);

// max |v| over the cells whose closure contains x.
double limsup_abs_at(const GridFunction& g, double x);

// Averaged-oscillation seminorm: sup over dyadic radii kappa = 2^j * h of
// (1/kappa) Int Osc(v, B_kappa(x) cap dom) dx. Comparable to var: always in
// [var/2, 3*var] up to the grid's resolution slack.
double keller_var(const GridFunction& g);

// var/(1+|b|) + ||v||_1, the norm that balances oscillation against mass
// at frequency b.
double b_norm(const GridFunction& g, double b);

/*------------------------------ cone membership -----------------------------*/

// Weighted jump sum over marked points interior to I:
//   value     = sum over marked (x, depth) with depth > k of
//               rho^{-depth} * limsup |u| at x
//   remainder = bound on the contribution of depths beyond jmax_built,
//               using the per-depth count bound depth * n1.
struct ExtraTerm {
  double value = 0.0;
  double remainder = 0.0;
};
ExtraTerm extra_term(const GridFunction& u, const Interval& I,
                     const std::vector<std::pair<double, int>>& marked, int k,
                     double rho, int jmax_built, int n1);

struct ConeParams {
  double C7 = 1.0;   // jump allowance scale
  double C8 = 1.0;   // extra-term allowance scale
  double C10 = 1.0;  // oscillation allowance scale per unit |b| * length
  double rho = 2.0;  // jump depth decay base
  double b = 0.0;    // frequency
  int k = 0;         // depths <= k carry no jump constraint
  int jmax_built = 0;
  int n1 = 0;
};

// One margin per condition, normalized as (allowance - actual) / allowance;
// nonnegative margins (up to fp slack) mean (u, v) lies in the cone.
struct ConeReport {
  bool ok = false;
  double min_u = 0.0;          // positivity: min Re u
  double dominance_margin = 0.0;
  double size_margin = 0.0;    // over marked points with all depth tags > k
  double osc_margin = 0.0;     // over the supplied test intervals
  int size_checked = 0;
  int osc_checked = 0;
};

ConeReport cone_check(const GridFunction& u, const GridFunction& vf,
                      const std::vector<std::pair<double, int>>& marked,
                      const std::vector<Interval>& test_intervals,
                      const ConeParams& p);

}  // namespace afuw
