#include "operator_core.hpp"

#include <Eigen/Dense>

namespace afuw {

/*------------------------------ Ulam operator -------------------------------*/

UlamOperator assemble_ulam(const MapSpec& map, const RoofFunction& roof, cplx s,
                           int grid) {
  UlamOperator op;
  op.Y = map.Y;
  op.n = grid;
  op.h = map.Y.length() / grid;
  op.s = s;
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(grid + grid * 8);
  const double h = op.h;
  for (const Branch& b : map.branches) {
    int i_lo = std::clamp((int)std::floor((b.img.lo - op.Y.lo) / h), 0, grid - 1);
    int i_hi =
        std::clamp((int)std::ceil((b.img.hi - op.Y.lo) / h) - 1, 0, grid - 1);
    double yb_prev = b.dom.lo;  // inverse of the previous boundary
    for (int i = i_lo; i <= i_hi; ++i) {
      double xa = std::max(b.img.lo, op.Y.lo + i * h);
      double xb = std::min(b.img.hi, op.Y.lo + (i + 1) * h);
      if (xb - xa < 1e-15) continue;
      double ya = yb_prev;
      double yb =
          (xb >= b.img.hi - 1e-15) ? b.dom.hi : branch_invert_warm(b, xb, ya);
      yb_prev = yb;
      if (yb < ya) std::swap(ya, yb);
      // split [ya, yb] at y-cell boundaries
      int j_lo = std::clamp((int)std::floor((ya - op.Y.lo) / h), 0, grid - 1);
      int j_hi = std::clamp((int)std::floor((yb - op.Y.lo - 1e-15) / h), 0,
                            grid - 1);
      for (int j = j_lo; j <= j_hi; ++j) {
        double pa = std::max(ya, op.Y.lo + j * h);
        double pb = std::min(yb, op.Y.lo + (j + 1) * h);
        if (pb - pa < 1e-16) continue;
        cplx w = gl8c(pa, pb,
                      [&](double y) { return std::exp(s * roof_step(b, roof, y)); });
        trip.emplace_back(i, j, w / h);
      }
    }
  }
  op.M.resize(grid, grid);
  op.M.setFromTriplets(trip.begin(), trip.end());
  return op;
}

GridFunction apply_ulam(const UlamOperator& op, const GridFunction& v, int n) {
  if (v.n != op.n) throw NumericsError("apply_ulam: grid mismatch");
  Eigen::VectorXcd x(op.n);
  for (int i = 0; i < op.n; ++i) x[i] = v.v[i];
  for (int r = 0; r < n; ++r) x = op.M * x;
  GridFunction out = v;
  for (int i = 0; i < op.n; ++i) out.v[i] = x[i];
  return out;
}

/*------------------------------ spectral data -------------------------------*/

namespace {

// Power iteration for the positive leading eigenpair of a real-weight matrix.
double leading_pair(const Eigen::SparseMatrix<cplx, Eigen::RowMajor>& M,
                    int max_iters, double tol, Eigen::VectorXd* vec,
                    double* residual) {
  int n = (int)M.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0);
  double lam = 1.0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> R = M.real();
  // Stop on the eigenpair residual, not the eigenvalue drift: a stochastic
  // column structure pins the value estimate at once while the vector still
  // carries its transient.
  double best_rr = 1e300;
  int stall = 0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = R * v;
    double nl = w.sum() / v.sum();
    double rr = (w - nl * v).lpNorm<1>() / v.lpNorm<1>();
    w /= w.lpNorm<1>() / n;
    bool done = rr < tol * std::max(1.0, std::abs(nl)) && it > 4;
    if (rr < 0.999 * best_rr) {
      best_rr = rr;
      stall = 0;
    } else if (++stall > 50) {
      done = true;  // floating-point floor reached
    }
    lam = nl;
    v = w;
    if (done) break;
  }
  if (residual) *residual = (R * v - lam * v).lpNorm<1>() / v.lpNorm<1>();
  if (vec) *vec = v;
  return lam;
}

}  // namespace

SpectralData eigendata(const MapSpec& map, const RoofFunction& roof,
                       double sigma, int grid, int max_iters, double tol) {
  SpectralData sd;
  sd.sigma = sigma;
  UlamOperator op = assemble_ulam(map, roof, sigma, grid);
  Eigen::VectorXd v;
  sd.lambda = leading_pair(op.M, max_iters, tol, &v, &sd.residual);
  if (!(sd.lambda > 0)) throw NumericsError("eigendata: nonpositive eigenvalue");
  double mass = v.sum() * op.h;
  sd.f.lo = map.Y.lo;
  sd.f.hi = map.Y.hi;
  sd.f.n = grid;
  sd.f.v.resize(grid);
  for (int i = 0; i < grid; ++i) {
    if (!(v[i] > 0)) throw NumericsError("eigendata: eigenfunction not positive");
    sd.f.v[i] = v[i] / mass;
  }
  UlamOperator op2 = assemble_ulam(map, roof, 2.0 * sigma, grid);
  sd.lambda2 = leading_pair(op2.M, max_iters, tol, nullptr, nullptr);
  sd.Lambda = std::max(1.0, std::sqrt(sd.lambda2) / sd.lambda);
  return sd;
}

/*----------------------------- direct evaluation ----------------------------*/

cplx transfer_point(const MapSpec& map, const RoofFunction& roof, cplx s, int n,
                    const std::function<cplx(double)>& v, double x,
                    double budget) {
  cplx sum = 0;
  for_each_preimage(
      map, roof, n, x, false,
      [&](const InverseLeaf& leaf) {
        sum += std::exp(s * leaf.phi_n) * leaf.hprime * v(leaf.y);
      },
      budget);
  return sum;
}

GridFunction apply_pointwise(const MapSpec& map, const RoofFunction& roof,
                             cplx s, int n,
                             const std::function<cplx(double)>& v, int grid,
                             double budget) {
  GridFunction out;
  out.lo = map.Y.lo;
  out.hi = map.Y.hi;
  out.n = grid;
  out.v.resize(grid);
  parallel_for(grid, [&](int i) {
    out.v[i] = transfer_point(map, roof, s, n, v, out.mid(i), budget);
  });
  return out;
}

cplx normalized_point(const MapSpec& map, const RoofFunction& roof,
                      const SpectralData& sd, cplx s, int n,
                      const std::function<cplx(double)>& v, double x,
                      double budget) {
  cplx num = transfer_point(
      map, roof, s, n,
      [&](double y) { return sd.f.eval(y).real() * v(y); }, x, budget);
  return num / (std::pow(sd.lambda, n) * sd.f.eval(x).real());
}

GridFunction normalized_apply(const MapSpec& map, const RoofFunction& roof,
                              const SpectralData& sd, cplx s, int n,
                              const GridFunction& v, int grid, double budget) {
  GridFunction out;
  out.lo = map.Y.lo;
  out.hi = map.Y.hi;
  out.n = grid;
  out.v.resize(grid);
  auto vf = [&](double y) { return v.eval(y); };
  parallel_for(grid, [&](int i) {
    out.v[i] = normalized_point(map, roof, sd, s, n, vf, out.mid(i), budget);
  });
  return out;
}

/*------------------------------ weight bounds -------------------------------*/

namespace {

double weight_block(const MapSpec& map, const RoofFunction& roof, double sigma,
                    int n, double budget) {
  auto hs = enumerate_branches(map, n, budget);
  double best = 0;
  for (const InverseBranch& h : hs) {
    for (int q = 0; q <= 4; ++q) {
      double x = h.dom.lo + (q / 4.0) * (h.dom.hi - h.dom.lo);
      if (q == 4) x = std::nexttoward(h.dom.hi, h.dom.lo);
      InverseLeaf leaf = eval_branch(map, roof, h, x, false);
      best = std::max(best, leaf.hprime * std::exp(sigma * leaf.phi_n));
    }
  }
  return best;
}

}  // namespace

double branch_weight_bound(const MapSpec& map, const RoofFunction& roof,
                           double sigma, int n, double budget, bool* exact) {
  double B = (double)map.branches.size();
  int n_exact = 0;
  double words = 1;
  while (n_exact < n && words * B <= budget) {
    words *= B;
    ++n_exact;
  }
  if (n_exact >= n) {
    if (exact) *exact = true;
    return weight_block(map, roof, sigma, n, budget * 4);
  }
  if (exact) *exact = false;
  if (n_exact == 0)
    throw BudgetError("branch_weight_bound: one step exceeds budget", B);
  double Wb = weight_block(map, roof, sigma, n_exact, budget * 4);
  int q = n / n_exact, r = n % n_exact;
  double W = std::pow(Wb, q);
  if (r > 0) W *= weight_block(map, roof, sigma, r, budget * 4);
  return W;
}

/*------------------------------ twist radius --------------------------------*/

EpsilonChoice pick_epsilon(const MapSpec& map, const RoofFunction& roof,
                           int grid, double budget) {
  EpsilonChoice out;
  double rho0 = map.rho0;
  double lam_floor = std::pow(rho0, -1.0 / 16.0);
  std::vector<std::pair<double, double>> lam_cache;  // sigma -> lambda
  auto lambda_at = [&](double sigma) {
    for (auto& [s, l] : lam_cache)
      if (s == sigma) return l;
    SpectralData sd = eigendata(map, roof, sigma, grid, 4000, 1e-10);
    ++out.checks;
    lam_cache.push_back({sigma, sd.lambda});
    return sd.lambda;
  };
  // W_n is monotone in sigma per fixed branch data; cache per (sigma, n).
  std::vector<std::tuple<double, int, double>> w_cache;
  auto weight_at = [&](double sigma, int n) {
    for (auto& [s, m, w] : w_cache)
      if (s == sigma && m == n) return w;
    double w = branch_weight_bound(map, roof, sigma, n, budget);
    w_cache.push_back({sigma, n, w});
    return w;
  };
  for (int m = 2; m <= 10; ++m) {
    double eps = std::pow(2.0, -m);
    bool ok = true;
    double worst = 0;
    for (double sigma : {-eps, eps, -eps / 2, eps / 2}) {
      double lam = lambda_at(sigma);
      if (!(lam > lam_floor)) {
        ok = false;
        break;
      }
      for (int n = 1; n <= 3 && ok; ++n) {
        double ratio = weight_at(sigma, n) /
                       (std::pow(lam, n) * std::pow(rho0, -0.75 * n));
        worst = std::max(worst, ratio);
        if (ratio > 1.0) ok = false;
      }
      if (!ok) break;
    }
    if (ok) {
      out.eps = eps;
      out.worst_ratio = worst;
      return out;
    }
  }
  throw NumericsError("pick_epsilon: no dyadic twist radius down to 2^-10");
}

/*--------------------------- parameter continuity ---------------------------*/

double continuity_modulus(const MapSpec& map, const RoofFunction& roof,
                          const std::vector<std::pair<double, double>>& sigma_pairs,
                          const std::vector<std::pair<double, double>>& b_pairs,
                          int grid, int n_test, uint64_t seed) {
  std::vector<cplx> params;
  std::vector<std::pair<int, int>> edges;
  auto intern = [&](cplx s) {
    for (size_t i = 0; i < params.size(); ++i)
      if (params[i] == s) return (int)i;
    params.push_back(s);
    return (int)params.size() - 1;
  };
  for (const auto& sp : sigma_pairs)
    for (const auto& bp : b_pairs) {
      cplx p1(sp.first, bp.first), p2(sp.second, bp.second);
      if (p1 == p2) continue;
      edges.emplace_back(intern(p1), intern(p2));
    }
  if (edges.empty()) return 0.0;
  std::vector<UlamOperator> ops;
  ops.reserve(params.size());
  for (cplx s : params) ops.push_back(assemble_ulam(map, roof, s, grid));

  std::uint64_t st = substream_seed(seed, 0xc027ULL);
  auto u01 = [&]() {
    st = splitmix64(st);
    return (st >> 11) * 0x1.0p-53;
  };
  double worst = 0;
  for (int t = 0; t < n_test; ++t) {
    GridFunction v;
    if (t % 2 == 0) {
      double c1 = 2 * u01() - 1, c2 = 2 * u01() - 1;
      double d1 = 2 * u01() - 1, d2 = 2 * u01() - 1;
      v = GridFunction::sample(map.Y, grid, [&](double x) {
        double tt = 2.0 * M_PI * (x - map.Y.lo) / map.Y.length();
        return cplx(c1 * std::cos(tt) + c2 * std::sin(2 * tt),
                    d1 * std::sin(tt) + d2 * std::cos(3 * tt));
      });
    } else {
      double cut = map.Y.lo + map.Y.length() * (0.2 + 0.6 * u01());
      cplx a(2 * u01() - 1, 2 * u01() - 1), b(2 * u01() - 1, 2 * u01() - 1);
      v = GridFunction::sample(map.Y, grid,
                               [&](double x) { return x < cut ? a : b; });
    }
    double nrm = var(v) + l1_norm(v);
    if (!(nrm > 0)) continue;
    for (auto& z : v.v) z /= nrm;
    std::vector<GridFunction> outs;
    outs.reserve(ops.size());
    for (const auto& op : ops) outs.push_back(apply_ulam(op, v, 1));
    for (const auto& e : edges) {
      GridFunction diff = outs[e.first];
      for (int q = 0; q < grid; ++q) diff.v[q] -= outs[e.second].v[q];
      worst = std::max(worst, (var(diff) + l1_norm(diff)) /
                                  std::abs(params[e.first] - params[e.second]));
    }
  }
  return worst;
}

}  // namespace afuw
