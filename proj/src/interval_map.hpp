#pragma once

#include <map>
#include <memory>
#include <optional>

#include "common.hpp"

namespace afuw {

/*============================ branches and maps =============================*/

// One monotone C^2 branch F|_[lo,hi) with image [img_lo, img_hi).
struct Branch {
  Interval dom;                            // [lo, hi) in Y
  Interval img;                            // F(dom), normalized increasing
  int orientation = +1;                    // sign of F'
  std::function<double(double)> f;         // forward map
  std::function<double(double)> df;        // F'
  std::function<double(double)> d2f;       // F''
  std::function<double(double)> inv;       // analytic inverse, may be empty
  int return_time = 1;                     // steps of the underlying map

  // For a composed branch (one step of F^m): fills pts with the intermediate
  // orbit y, F y, ..., F^{m-1} y and dvs with (F^j)'(y). Empty on elementary
  // branches, where the single stage is y itself.
  std::function<void(double, std::vector<double>&, std::vector<double>&)> stages;

  double invert(double x) const;           // solve F(y)=x on dom (clamped)
};

struct MapSpec {
  std::string family;                      // registry tag
  std::string label;                       // human-readable description
  Interval Y;
  std::vector<Branch> branches;            // ordered by domain, tiling Y
  int power = 1;                           // this map is (base map)^power
  double rho0 = 0;                         // inf |F'|
  double adler_c1 = 0;                     // sup |F''| / F'^2 (sampled)
  double K = 0;                            // min image length
  double dropped_mass = 0;                 // Lebesgue mass of truncated branches
  double dropped_weight = 0;               // estimated sup_x sum |h'| over them

  int branch_index(double x) const;        // half-open: boundary -> right branch
  double apply(double x) const;            // F(x)
  double apply_left(double x) const;       // left-limit value at x
  double deriv(double x) const;
  // iterate n steps; returns orbit x, F x, ..., F^n x
  std::vector<double> orbit(double x, int n) const;
};

/*--------------------------------- roofs -----------------------------------*/

struct RoofFunction {
  enum class Kind { Const, OnePlusXSq, Table } kind = Kind::OnePlusXSq;
  double c = 1.0;                          // Const value
  double eps0 = 0.25;                      // twist scale of the tail-sum bound
  std::vector<double> tx, ty;              // Table breakpoints (piecewise linear)

  double operator()(double x) const;
  double deriv(double x) const;
  double sup(const Interval& Y) const;
  double inf(const Interval& Y) const;
  std::string kind_name() const;

  static RoofFunction constant(double value, double eps0 = 0.25);
  static RoofFunction one_plus_x_sq(double eps0 = 0.25);
  static RoofFunction table(std::vector<double> x, std::vector<double> y,
                            double eps0 = 0.25);
};

/*------------------------------ map factories ------------------------------*/

struct MpOptions {
  int t_max = 40;          // truncate first-return branches with tau > t_max
  double tail_tol = 0.5;   // reject if estimated dropped |h'|-sum exceeds this
};

MapSpec make_shifted_beta(double beta, double alpha);
MapSpec make_doubling();                       // shifted_beta(2, 0)
MapSpec make_golden();                         // shifted_beta((1+sqrt5)/2, 0)
MapSpec make_mp_first_return(double alpha, double gamma, const MpOptions& opt,
                             const RoofFunction* roof_for_tail = nullptr);

// Branches of F^m (m-cylinders with composed forward maps).
MapSpec map_power(const MapSpec& base, int m);

// Smallest iterate with rho0 > 2^{4/3}; returns {map, m}.
std::pair<MapSpec, int> ensure_expansion(const MapSpec& base);

// Roof weight of one step through branch b: phi(y) for an elementary branch,
// the Birkhoff sum over b's stage points for a composed one. Optionally the
// y-derivative of that sum.
double roof_step(const Branch& b, const RoofFunction& roof, double y,
                 double* dphi = nullptr);

/*--------------------------- inverse branch algebra -------------------------*/

// Inverse branch h of F^n: word w[j] = branch index of the j-th orbit point.
// h = (F^n restricted to the cylinder)^{-1}; dom = F^n(cylinder).
struct InverseBranch {
  std::vector<int> word;
  Interval dom;                            // domain of h
  Interval cyl;                            // range of h (the cylinder)
};

// Evaluation record at a query point x in dom(h): the inverse orbit
// z_0 = h(x), z_1 = F(h(x)), ..., z_{n-1}; weight |h'(x)|; Birkhoff sum of
// roof_step over z_0..z_{n-1} (stage points included, so phi_n is the roof
// sum of the underlying flow); and d/dx of (phi_n o h) when requested.
struct InverseLeaf {
  double y = 0;                            // h(x) = z_0
  double hprime = 0;                       // |h'(x)|
  double phi_n = 0;                        // sum phi(z_j)
  double dphi_n = 0;                       // (phi_n o h)'(x)
  const std::vector<int>* word = nullptr;  // valid during callback only
};

// Enumerate all h in H_n whose domain contains x; calls cb once per branch.
// Budget counts visited tree nodes; throws BudgetError beyond it.
void for_each_preimage(const MapSpec& map, const RoofFunction& roof, int n,
                       double x, bool want_dphi,
                       const std::function<void(const InverseLeaf&)>& cb,
                       double budget = 8e6);

// Materialize H_n (all inverse branches with nonempty cylinder).
std::vector<InverseBranch> enumerate_branches(const MapSpec& map, int n,
                                              double budget = 8e6);

// Evaluate a materialized branch at x in dom; fills the orbit (z_0..z_{n-1}).
InverseLeaf eval_branch(const MapSpec& map, const RoofFunction& roof,
                        const InverseBranch& h, double x, bool want_dphi,
                        std::vector<double>* orbit = nullptr);

// Maximal interval of points sharing the itinerary `word`; empty if none.
Interval cylinder_of_word(const MapSpec& map, const std::vector<int>& word);

// Solve f(y) = x on an increasing branch with a known lower bound lo <= y.
// Much cheaper than Branch::invert when solves arrive in ascending order and
// each previous solution seeds the next.
double branch_invert_warm(const Branch& b, double x, double lo);

/*------------------------------ discontinuities -----------------------------*/

// X'_1 = branch image endpoints; X'_j = F(X'_{j-1}) with both one-sided
// images taken at branch-boundary points. Points are deduplicated per depth.
struct DiscontinuityCatalog {
  std::vector<std::vector<double>> by_depth;   // by_depth[j-1] -> sorted X'_j
  int n1 = 0;                                  // #X'_1

  // All interior points with their depth tags (multiplicity per depth).
  std::vector<std::pair<double, int>> interior_points(const Interval& Y) const;
};

DiscontinuityCatalog build_catalog(const MapSpec& map, int depth);

// Partition of Y refining the image partition of F^k: atoms between
// consecutive points of {Y endpoints} + union of X'_j (j<=k).
std::vector<Interval> partition_pk(const MapSpec& map,
                                   const DiscontinuityCatalog& cat, int k);

/*----------------------------- geometric constants --------------------------*/

struct GeometricConstants {
  double rho0 = 0;        // inf |F'|
  double rho = 0;         // rho0^{1/4}
  double C1 = 0;          // Adler constant (sampled sup |F''|/F'^2)
  double K = 0;           // min image length
  double delta0 = 0;      // K (rho0-2) / (5 e^{C1} rho0)
  int k1 = 0;             // mixing time for intervals of length delta0
  int N1 = 0;             // #X'_1
  int iterate = 1;        // power applied to reach rho0 > 2^{4/3}
};

// Computes the table above on ensure_expansion(map); k1 is certified on a
// sliding window of candidate intervals of length delta0.
GeometricConstants geometric_constants(const MapSpec& map, int k1_cap = 64);

// Smallest k such that F^k(J) covers Y for every J in a sliding window of
// intervals of length delta0 (step delta0/4). Returns 0 if cap exceeded.
int mixing_time(const MapSpec& map, double delta0, int cap = 64);

// Roof-derived constants: C2 = sup |(phi o h)'| over H_1, C2' = C2 rho0/(rho0-1),
// C3 = sup_x sum_h |h'| e^{eps0 phi(h x)} on a grid.
struct RoofConstants {
  double C2 = 0, C2p = 0, C3 = 0;
};
RoofConstants roof_constants(const MapSpec& map, const RoofFunction& roof,
                             int grid = 257);

}  // namespace afuw
