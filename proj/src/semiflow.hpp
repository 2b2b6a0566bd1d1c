#pragma once

#include "operator_core.hpp"

namespace afuw {

/*------------------------------ suspension flow -----------------------------*/

// Point of the suspension space: base y with height u in [0, phi(y)).
struct FlowPoint {
  double y = 0;
  double u = 0;
};

// Advance by time t: add to the height, roll through the base map while the
// height clears the roof. Throws when the orbit leaves the branch domains.
FlowPoint flow_advance(const MapSpec& map, const RoofFunction& roof, double y,
                       double u, double t);

/*------------------------------- correlations -------------------------------*/

struct CorrelationPoint {
  double t = 0;
  double rho = 0;              // empirical covariance of A and B after time t
  double se = 0;               // batch-means standard error
};

struct CorrelationReport {
  std::vector<CorrelationPoint> pts;
  double mean_a = 0, mean_b = 0;
  double phi_bar = 0;          // average roof under the invariant density
  long long samples = 0;
  long long escaped = 0;       // orbits dropped at the domain gaps
};

// Monte Carlo correlation of bounded observables A, B on the suspension,
// sampled from the normalized product measure: the base point by density-
// weighted rejection, the height uniformly under the roof. One stream of
// samples serves every requested time.
CorrelationReport flow_correlation(
    const MapSpec& map, const RoofFunction& roof, const SpectralData& sd,
    const std::function<double(double, double)>& A,
    const std::function<double(double, double)>& B,
    const std::vector<double>& t_list, long long n_samples, uint64_t seed);

/*----------------------------- decay-rate fitting ---------------------------*/

struct ExpFit {
  double a1 = 0;               // fitted decay rate, log|rho| ~ c - a1 t
  double ci_lo = 0, ci_hi = 0; // 95% band for a1
  double intercept = 0;
  double curvature = 0;        // quadratic coefficient of the same log data
  double curvature_se = 0;
  int n_points = 0;            // points above the noise floor
  bool conclusive = false;     // needs >= 8 usable points
};

// Straight-line fit of log|rho(t)| over the window where |rho| clears
// noise_mult times its standard error; quadratic refit reports curvature.
ExpFit fit_exponential(const CorrelationReport& rep, double noise_mult = 3.0);

// Two-sample Kolmogorov-Smirnov statistic (inputs need not be sorted).
double ks_statistic(std::vector<double> xs, std::vector<double> ys);

}  // namespace afuw
