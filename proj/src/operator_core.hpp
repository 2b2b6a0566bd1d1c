#pragma once

#include <Eigen/SparseCore>

#include "bv_space.hpp"
#include "interval_map.hpp"

namespace afuw {

/*------------------------------ Ulam operator -------------------------------*/

// Grid discretization of the one-step twisted transfer operator
//   (L_s v)(x) = sum_h exp(s phi(h x)) |h'(x)| v(h x).
// Entry (i, j) integrates exp(s phi(y)) over y in (branch inverse of cell i)
// intersected with cell j, divided by the cell width.
struct UlamOperator {
  Interval Y;
  int n = 0;
  double h = 0;
  cplx s = 0;
  Eigen::SparseMatrix<cplx, Eigen::RowMajor> M;
};

UlamOperator assemble_ulam(const MapSpec& map, const RoofFunction& roof, cplx s,
                           int grid);

GridFunction apply_ulam(const UlamOperator& op, const GridFunction& v,
                        int n = 1);

/*------------------------------ spectral data -------------------------------*/

// Leading eigendata of L_sigma at real sigma: eigenvalue lambda, positive
// eigenfunction f with unit integral, the eigenvalue at 2*sigma, and
// Lambda = max(1, sqrt(lambda_{2 sigma}) / lambda_sigma), the one-step L2
// growth factor of the normalized operator.
struct SpectralData {
  double sigma = 0;
  double lambda = 1;
  double lambda2 = 1;
  double Lambda = 1;
  double residual = 0;
  GridFunction f;
};

SpectralData eigendata(const MapSpec& map, const RoofFunction& roof,
                       double sigma, int grid, int max_iters = 20000,
                       double tol = 1e-12);

/*----------------------------- direct evaluation ----------------------------*/

// (L_s^n v)(x) by summing over the inverse branches through x.
cplx transfer_point(const MapSpec& map, const RoofFunction& roof, cplx s, int n,
                    const std::function<cplx(double)>& v, double x,
                    double budget = 8e6);

GridFunction apply_pointwise(const MapSpec& map, const RoofFunction& roof,
                             cplx s, int n, const std::function<cplx(double)>& v,
                             int grid, double budget = 8e6);

// Normalized operator: (Lt_s^n v)(x) = lambda^{-n} f(x)^{-1} L_s^n(f v)(x),
// with lambda, f taken at Re s. Lt_sigma fixes the constant function 1 up to
// the eigendata residual.
cplx normalized_point(const MapSpec& map, const RoofFunction& roof,
                      const SpectralData& sd, cplx s, int n,
                      const std::function<cplx(double)>& v, double x,
                      double budget = 8e6);

GridFunction normalized_apply(const MapSpec& map, const RoofFunction& roof,
                              const SpectralData& sd, cplx s, int n,
                              const GridFunction& v, int grid,
                              double budget = 8e6);

/*------------------------------ weight bounds -------------------------------*/

// W_n = sup_h sup_x |h'(x)| exp(sigma phi_n(h x)) over h in H_n. Exact up to
// branch sampling while the enumeration fits the budget; beyond it, certified
// from below-budget blocks via W_{m+n} <= W_m W_n. `exact` reports which.
double branch_weight_bound(const MapSpec& map, const RoofFunction& roof,
                           double sigma, int n, double budget = 3e5,
                           bool* exact = nullptr);

/*------------------------------ twist radius --------------------------------*/

// Largest dyadic eps = 2^-m (m in [2, 10]) such that at sigma in
// {+-eps, +-eps/2}: lambda_sigma > rho0^{-1/16}, f_sigma > 0, and
// lambda_sigma^{-n} W_n <= rho0^{-3n/4} for n = 1..3.
struct EpsilonChoice {
  double eps = 0;
  int checks = 0;      // sigma values inspected
  double worst_ratio = 0;  // max over checks of the weight-decay ratio
};
EpsilonChoice pick_epsilon(const MapSpec& map, const RoofFunction& roof,
                           int grid, double budget = 3e5);

/*--------------------------- parameter continuity ---------------------------*/

// Empirical Lipschitz modulus of s -> L_s: sup over the parameter pairs
// (sigma_i + i b_j crossed) and test fields of
// ||(L_{s1} - L_{s2}) v||_BV / |s1 - s2| at unit ||v||_BV, with
// ||.||_BV = var + ||.||_1. Coinciding pairs contribute 0.
double continuity_modulus(const MapSpec& map, const RoofFunction& roof,
                          const std::vector<std::pair<double, double>>& sigma_pairs,
                          const std::vector<std::pair<double, double>>& b_pairs,
                          int grid, int n_test, uint64_t seed);

}  // namespace afuw
