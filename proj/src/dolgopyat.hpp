#pragma once

#include "bv_space.hpp"
#include "interval_map.hpp"
#include "operator_core.hpp"

#include <map>

namespace afuw {

/*------------------------------ constant ledger -----------------------------*/

// One named inequality with the numbers that went into it.
struct LedgerDisplay {
  std::string name;
  double lhs = 0, rhs = 0;
  bool holds = false;
};

struct ConstantLedger {
  int iterate = 1;             // base-map power in use downstream
  // geometry of the (iterated) map
  double rho0 = 0, rho = 0, C1 = 0, K = 0, delta0 = 0;
  int k1 = 0, N1 = 0;
  double eta0 = 0;             // (sqrt 7 - 1)/2
  // spectral and roof data
  double eps = 0;              // twist radius (dyadic sweep output)
  double eps0 = 0;             // roof decay scale
  double C2 = 0, C2p = 0, C3 = 0;
  double lambda0 = 0;
  double C5 = 0, C6 = 0, C7 = 0, C8 = 0, C9 = 0, C10 = 0, C11 = 0;
  double K2 = 0;
  // block lengths
  int k = 0;                   // cone memory, multiple of 2*k1
  int k_budget = 0;            // depth with full H_{2k} enumeration in budget
  bool k_strict = false;       // all three k-displays hold at k
  std::string k_note;          // which display failed when not strict
  // uniform non-integrability
  int n0 = 0;
  double D = 0;                // min over atoms of the best-pair inf |psi'|
  double C0 = 0;               // max over atoms of the best-pair sup |psi'|
  double P_pair = 0;           // min |h'| over the selected branch pairs
  bool uni_degenerate = false;
  bool n0_multiple_of_k = false;
  // cancellation scales
  double Delta = 0, delta = 0, delta_p = 0;  // Delta = 2 pi / D, delta' rule
  double eta = 0;              // chi floor, max(eta0, 1 - delta P / 3)
  double eta1 = 0;             // measured covering constant
  double K1 = 0;               // 6 e^{C1} / eta1
  double b_min = 0;            // max(4 pi / D, 2)
  // filled by downstream passes (0 until computed)
  double c_ly = 0;             // affine constant of the variation inequality
  double M = 0, delta_pp = 0;  // sup/inf cap for L(u^2) and delta'' = delta'/(2M)
  double beta_l2 = 0;          // measured L2 decay factor
  double A = 0;                // schedule length constant (derived, flagged)

  std::vector<LedgerDisplay> displays;
  bool feasible = true;        // no display failed hard

  const LedgerDisplay* find(const std::string& name) const;
};

struct UniAtomReport {
  Interval atom;
  double D_best = 0;           // max over pairs of inf |psi'|
  double C0 = 0;               // sup |psi'| for the best pair
  double hp_min = 0;           // min |h'| over the best pair on the atom
  std::vector<int> h1, h2;     // words of the best pair
  int pairs_tried = 0;
};

// Everything the downstream passes share. Spectral data is cached per twist.
struct LedgerBundle {
  MapSpec map;                 // expansion-adjusted iterate
  RoofFunction roof;
  DiscontinuityCatalog catalog;
  std::vector<Interval> atoms; // partition P_k
  std::vector<UniAtomReport> uni;  // per-atom branch pairs (checked subset)
  SpectralData sd0;
  ConstantLedger led;
  int grid = 2048;

  const SpectralData& spectral(double sigma) const;
  mutable std::map<long long, SpectralData> cache;
};

struct LedgerOptions {
  int grid = 2048;             // eigendata grid
  int pick_grid = 512;         // grid for the twist-radius sweep
  int catalog_depth = 12;
  int k_cap = 64;
  double enum_budget = 2e6;    // cylinder-count budget for full enumerations
  int n0_cap = 12;
  int uni_grid = 33;           // per-atom sample grid for |psi'|
  int uni_pair_cap = 64;       // extreme-slope branches kept per side
  double eps_override = 0;     // force the twist radius when > 0
  bool with_ly = true;         // measure c_ly (and C11) during the build
  uint64_t seed = 0x5eed0001ULL;
};

LedgerBundle build_ledger(const MapSpec& base, const RoofFunction& roof,
                          const LedgerOptions& opt = {});

/*------------------------------------ UNI -----------------------------------*/

struct UniReport {
  int n0 = 0;
  double D = 0;                // min over atoms
  double C0 = 0;               // max over atoms
  double hp_min = 0;
  bool degenerate = false;     // D below tolerance: no cancellation mechanism
  std::vector<UniAtomReport> atoms;
};

// Maximizes inf_p |psi'| over branch pairs of H_{n0}, psi = phi_{n0} o h1 -
// phi_{n0} o h2, keeping only the pair_cap branches of extreme mean slope.
UniReport check_uni(const MapSpec& map, const RoofFunction& roof,
                    const std::vector<Interval>& atoms, int n0, int grid = 33,
                    int pair_cap = 64, double budget = 2e6);

/*-------------------------- lower transfer bound ----------------------------*/

struct MassFloorReport {
  double C9 = 0;               // min over samples of the atom-restricted sum
  int n = 0;                   // 2 * k
  int atoms_checked = 0, points_checked = 0;
  bool exact = false;          // full enumeration vs grid-power floor
  int grid = 0;                // grid used on the non-enumerable path
  int thin_atoms = 0;          // atoms below grid resolution, given thin_floor
};

// min over sampled x and atoms p of
//   lambda_sigma^{-n} sum_{h in H_n: cyl(h) in p, x in dom h} |h'(x)| e^{sigma
//   phi_n(h x)} / Leb(p),  n = 2k.
// On the grid path, atoms too thin to resolve contribute thin_floor (the
// covering-based per-atom bound) instead of a resolution artifact.
MassFloorReport mass_floor_check(const MapSpec& map, const RoofFunction& roof,
                                 const SpectralData& sd, double sigma, int k,
                                 const std::vector<Interval>& atoms,
                                 int sample = 9, double budget = 2e6,
                                 double thin_floor = 0.0);

struct CoveringReport {
  double eta1 = 0;             // 0.95 * measured min covering fraction
  double worst = 1;            // the measured min itself
  int n = 0;                   // cylinder depth used
  double tau = 0;              // minimum J length consistent with that depth
  int trials = 0, failures = 0;
};

// Covering check: fraction of J filled by n-cylinders inside J whose n-th
// image contains z, minimized over random (z, J) with Leb(J) >= tau.
CoveringReport measure_eta1(const MapSpec& map, double delta0, int k1,
                            int trials, uint64_t seed, double budget = 2e6);

/*------------------------------- cancellation -------------------------------*/

struct ConePair {
  GridFunction u;              // positive real part used
  GridFunction v;              // complex
  double b = 0;
  double sigma = 0;
};

struct TypedInterval {
  Interval I;
  int type = 0;                // 1 or 2: which branch carries the eta dip
  double margin = 0;           // validated slack of the case inequality
};

struct CancellationLayout {
  Interval atom;
  std::vector<TypedInterval> intervals;
  std::vector<Interval> gaps;
  GridFunction chi;
  double eta = 1;
  int case1 = 0, case2 = 0, untyped = 0;
  int gap_violations = 0;      // gaps wider than 2 Delta / |b|
  double chi_slope_bound = 0;  // 3 (1-eta) |b| / (delta P)
  double chi_slope_measured = 0;
  double max_phase_err = 0;    // worst residual of the antiphase search
  std::vector<int> h1, h2;     // branch pair used on this atom
};

// Two-case typing on a Delta/|b| net of the atom; phase search on a fixed
// 256-point net; every typing self-validated before acceptance.
CancellationLayout build_cancellation(const LedgerBundle& B,
                                      const ConePair& pair,
                                      const Interval& atom, int chi_grid = 4096);

struct CancellationCheck {
  double max_violation = 0;    // sup over grid of |Lt_s^{n0} v| - Lt_sig^{n0}(chi u)
  double min_slack_middle = 0; // min slack over middle thirds of typed intervals
  int grid = 0;
};

// Pointwise domination |Lt_s^{n0} v| <= Lt_sigma^{n0}(chi u) on a shared grid.
CancellationCheck verify_domination(const LedgerBundle& B, const ConePair& pair,
                                    const CancellationLayout& lay, int grid);

/*------------------------------ cone iteration ------------------------------*/

struct IterationResult {
  ConePair next;
  ConeReport cone;             // membership report for the output pair
  std::vector<CancellationLayout> layouts;
  std::vector<double> atom_ratio;  // sup u / inf u per atom (expect <= 4)
  DiscontinuityCatalog catalog;    // depth-shifted + created points
};

IterationResult iterate_pair(const LedgerBundle& B, const ConePair& pair,
                             const DiscontinuityCatalog& cat, int out_grid);

// Cone membership with the bundle's ledger constants.
ConeReport cone_check_pair(const LedgerBundle& B, const ConePair& pair,
                           const DiscontinuityCatalog& cat);

/*------------------------- variation inequality fit -------------------------*/

struct LyFit {
  double a = 0, c = 0;         // VarOut <= a VarIn + c (1+|b|) Lam^{nk} sqrt(..)
  double target = 0;           // rho^{-nk}
  bool a_ok = false;
  int n_steps = 0;
  std::vector<std::array<double, 3>> rows;  // VarOut, VarIn, weight term
};

LyFit verify_ly(const LedgerBundle& B, cplx s, int n_mult, int grid,
                int n_test, uint64_t seed);

// Single-application remainder constant: smallest C with
// Var(L v) <= a Var v + C (1+|b|) Lambda sqrt(sup|v| ||v||_1) over the family.
double remainder_envelope(const LedgerBundle& B, cplx s, int grid, int n_test,
                          uint64_t seed);

/*-------------------------------- L2 decay ----------------------------------*/

struct L2Report {
  std::vector<double> v_table;     // int |Lt_s^{m n0} v|^2
  std::vector<double> u_table;     // int u_m^2 for the chi-iteration
  double beta_fit = 0;             // geometric fit on the v table
  bool monotone = true;
  bool uni_failed = false;
};

L2Report l2_contraction(const LedgerBundle& B, cplx s, int m_max,
                        const GridFunction& v0, int grid);

/*----------------------------- hypothesis check -----------------------------*/

// Variation-vs-L1 hypothesis at block m: plain for sigma >= 0, reweighted by
// e^{sigma phi_{m n0}} for sigma < 0.
bool variation_hypothesis(const LedgerBundle& B, const GridFunction& v,
                          double sigma, double b, int m);

// Birkhoff sum of the roof along the forward orbit (stage points included).
double birkhoff_roof(const MapSpec& map, const RoofFunction& roof, double y,
                     int n);

/*----------------------------- contraction scan -----------------------------*/

struct SchedulePlan {
  std::vector<int> m;          // m_0, m_1, ...
  std::vector<bool> triple;    // whether block i ran 3 m_i n0 steps
  int passes = 0;              // times the H test failed (step-3 loops)
  int n_used = 0;
};

// Pure scheduling walk, injectable predicate for tests.
SchedulePlan schedule_plan(int n, int n0, double A, double b,
                           const std::function<bool(int, int)>& H_holds);

struct ScanRow {
  double b = 0;
  int n_used = 0;
  double gamma_fit = 0;        // exp of the mean log contraction per step
  double norm_ratio = 0;       // sup over tests of bnorm out / bnorm in
  SchedulePlan plan;
};

struct ScanReport {
  std::vector<ScanRow> rows;
  double A = 0;
  double beta = 0;             // L2 factor used for A
  bool uni_failed = false;
  int family_size = 0;
};

ScanReport contraction_scan(const LedgerBundle& B, double sigma,
                            const std::vector<double>& b_list, int grid,
                            int n_test, uint64_t seed);

/*------------------------------ resolvent norm ------------------------------*/

struct ResolventPoint {
  double b = 0;
  double norm_ratio = 0;       // sup over tests of bnorm w / bnorm v
  double residual = 0;         // worst linear-solve residual
};

ResolventPoint resolvent_norm(const LedgerBundle& B, cplx s, int grid,
                              int n_test, uint64_t seed);

/*------------------------- structural sanity checks -------------------------*/

struct PointBound {
  double x = 0;
  int depth = 0;
  double lhs = 0, rhs = 0;
  bool holds = false;
};

// Jump-size propagation bound at every catalog point of depth j > k.
std::vector<PointBound> jump_bound_check(const LedgerBundle& B,
                                         const ConePair& pair,
                                         const DiscontinuityCatalog& cat,
                                         double slack = 1.1);

struct ThirdsBalance {
  double int_I = 0, int_J = 0; // integrals over middle thirds and complement
  double delta_pp = 0;
  bool holds = false;
  double ratio_cap = 0;        // measured sup/inf of w over the atom
};

ThirdsBalance thirds_balance_check(const LedgerBundle& B,
                                   const CancellationLayout& lay,
                                   const GridFunction& w, double M);

struct AffineDistance {
  double distance = 0, bound = 0;
  bool holds = false;
  int pieces = 0;
};

// Affine interpolant on a rho^{-r}-fine refinement, endpoint-matched.
AffineDistance affine_distance_check(const LedgerBundle& B,
                                     const GridFunction& v, cplx s, int r,
                                     int grid);

struct PullbackMass {
  double lhs = 0, rhs = 0;     // ||v||_1 vs K1/Leb(I_r) * int_{F^-r I_r} |v|
  bool holds = false;
};

PullbackMass pullback_mass_check(const LedgerBundle& B, const GridFunction& v,
                                 const Interval& I_r, int r, int grid);

/*----------------------------- cone test inputs -----------------------------*/

// Deterministic cone-compatible random pair: positive u with mild slope, v =
// amplitude * e^{i slow phase} * u with |v| <= u; re-scaled until cone_check
// passes (the scale used is recorded in the pair's u).
ConePair random_cone_pair(const LedgerBundle& B, double b, double sigma,
                          int grid, uint64_t seed);

}  // namespace afuw
