#include "dolgopyat.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cstring>
#include <numeric>

namespace afuw {

namespace {

struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() { return state = splitmix64(state); }
  double u01() { return (next() >> 11) * 0x1.0p-53; }
  double sym() { return 2.0 * u01() - 1.0; }
};

std::vector<double> atom_mids(const Interval& p, int m) {
  std::vector<double> xs(m);
  for (int i = 0; i < m; ++i) xs[i] = p.lo + (i + 0.5) * p.length() / m;
  return xs;
}

// Least-squares line y ~ a + b x; returns {intercept, slope}.
std::pair<double, double> line_fit(const std::vector<double>& x,
                                   const std::vector<double>& y) {
  double n = (double)x.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-300) return {sy / n, 0.0};
  return {(sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det};
}

double l2sq(const GridFunction& g) {
  double s = 0;
  for (const cplx& z : g.v) s += std::norm(z);
  return s * g.h();
}

// Largest-first atom selection, capped; output restored to position order.
std::vector<Interval> select_atoms(const std::vector<Interval>& atoms, int cap) {
  std::vector<Interval> sel = atoms;
  std::stable_sort(sel.begin(), sel.end(), [](const Interval& a, const Interval& b) {
    return a.length() > b.length();
  });
  if ((int)sel.size() > cap) sel.resize(cap);
  std::sort(sel.begin(), sel.end(), [](const Interval& a, const Interval& b) {
    return a.lo < b.lo;
  });
  return sel;
}

// Pullback samples of one inverse branch on ascending xs, warm-started per
// link. Matches eval_branch up to roundoff.
struct BranchSamples {
  std::vector<double> dphi, hprime, y0;
};

BranchSamples sample_branch(const MapSpec& map, const RoofFunction& roof,
                            const std::vector<int>& word,
                            const std::vector<double>& xs) {
  size_t n = word.size(), m = xs.size();
  std::vector<std::vector<double>> z(n + 1);
  z[n] = xs;
  for (int j = (int)n - 1; j >= 0; --j) {
    const Branch& b = map.branches[word[j]];
    z[j].resize(m);
    double prev = b.dom.lo;
    for (size_t i = 0; i < m; ++i) {
      double val = b.inv ? b.inv(z[j + 1][i]) : branch_invert_warm(b, z[j + 1][i], prev);
      z[j][i] = val;
      prev = val;
    }
  }
  BranchSamples out;
  out.dphi.resize(m);
  out.hprime.resize(m);
  out.y0 = z[0];
  for (size_t i = 0; i < m; ++i) {
    double slope = 1.0, dphi = 0.0, dstep = 0.0;
    for (int j = (int)n - 1; j >= 0; --j) {
      const Branch& b = map.branches[word[j]];
      slope /= b.df(z[j][i]);
      roof_step(b, roof, z[j][i], &dstep);
      dphi += dstep * slope;
    }
    out.hprime[i] = std::abs(slope);
    out.dphi[i] = dphi;
  }
  return out;
}

// Incremental enumeration: deepest H_d with d <= want whose size stays inside
// the budget, growth predicted from the last ratio.
std::vector<InverseBranch> enumerate_capped(const MapSpec& map, int want,
                                            int step, double budget, int* depth) {
  std::vector<InverseBranch> H;
  int d = step;
  try {
    H = enumerate_branches(map, step, budget);
  } catch (const BudgetError&) {
    if (step <= 1) throw;
    *depth = 1;
    return enumerate_branches(map, 1, budget);
  }
  double prev = (double)H.size(), ratio = prev;
  while (d + step <= want) {
    if (prev * ratio > budget) break;
    std::vector<InverseBranch> next;
    try {
      next = enumerate_branches(map, d + step, budget);
    } catch (const BudgetError&) {
      break;
    }
    ratio = (double)next.size() / std::max(1.0, prev);
    prev = (double)next.size();
    H = std::move(next);
    d += step;
  }
  *depth = d;
  return H;
}

}  // namespace

/*------------------------------ constant ledger -----------------------------*/

const LedgerDisplay* ConstantLedger::find(const std::string& name) const {
  for (const auto& d : displays)
    if (d.name == name) return &d;
  return nullptr;
}

const SpectralData& LedgerBundle::spectral(double sigma) const {
  long long key = (long long)std::llround(sigma * 1e12);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  SpectralData sd = eigendata(map, roof, sigma, grid);
  return cache.emplace(key, std::move(sd)).first->second;
}

/*------------------------------------ UNI -----------------------------------*/

UniReport check_uni(const MapSpec& map, const RoofFunction& roof,
                    const std::vector<Interval>& atoms, int n0, int grid,
                    int pair_cap, double budget) {
  if (n0 < 1) throw ConfigError("check_uni: n0 must be positive");
  auto H = enumerate_branches(map, n0, budget);
  UniReport rep;
  rep.n0 = n0;
  rep.D = std::numeric_limits<double>::infinity();
  rep.hp_min = std::numeric_limits<double>::infinity();
  for (const Interval& p : atoms) {
    UniAtomReport ar;
    ar.atom = p;
    std::vector<double> xs = atom_mids(p, grid);
    std::vector<const InverseBranch*> usable;
    for (const auto& h : H)
      if (h.dom.lo <= p.lo + 1e-13 && h.dom.hi >= p.hi - 1e-13)
        usable.push_back(&h);
    if (usable.size() < 2) {
      ar.D_best = 0;
      rep.atoms.push_back(ar);
      rep.D = 0;
      continue;
    }
    std::vector<BranchSamples> samp(usable.size());
    std::vector<double> mean(usable.size());
    for (size_t i = 0; i < usable.size(); ++i) {
      samp[i] = sample_branch(map, roof, usable[i]->word, xs);
      mean[i] = std::accumulate(samp[i].dphi.begin(), samp[i].dphi.end(), 0.0) /
                xs.size();
    }
    std::vector<int> order(usable.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return mean[a] < mean[b]; });
    int cap = std::min<int>(pair_cap, (int)order.size());
    std::vector<int> lows(order.begin(), order.begin() + cap);
    std::vector<int> highs(order.end() - cap, order.end());
    int best_i = -1, best_j = -1;
    double best = -1;
    for (int i : lows)
      for (int j : highs) {
        if (i == j) continue;
        double inf_abs = std::numeric_limits<double>::infinity();
        for (size_t t = 0; t < xs.size(); ++t)
          inf_abs = std::min(inf_abs, std::abs(samp[i].dphi[t] - samp[j].dphi[t]));
        ++ar.pairs_tried;
        if (inf_abs > best) {
          best = inf_abs;
          best_i = i;
          best_j = j;
        }
      }
    ar.D_best = std::max(0.0, best);
    if (best_i >= 0) {
      ar.h1 = usable[best_i]->word;
      ar.h2 = usable[best_j]->word;
      double sup = 0, hp = std::numeric_limits<double>::infinity();
      for (size_t t = 0; t < xs.size(); ++t) {
        sup = std::max(sup, std::abs(samp[best_i].dphi[t] - samp[best_j].dphi[t]));
        hp = std::min({hp, samp[best_i].hprime[t], samp[best_j].hprime[t]});
      }
      ar.C0 = sup;
      ar.hp_min = hp;
      rep.C0 = std::max(rep.C0, sup);
      rep.hp_min = std::min(rep.hp_min, hp);
    }
    rep.D = std::min(rep.D, ar.D_best);
    rep.atoms.push_back(std::move(ar));
  }
  if (rep.atoms.empty()) rep.D = 0;
  if (!std::isfinite(rep.D)) rep.D = 0;
  rep.degenerate = rep.D < 1e-9;
  return rep;
}

/*-------------------------- lower transfer bound ----------------------------*/

MassFloorReport mass_floor_check(const MapSpec& map, const RoofFunction& roof,
                                 const SpectralData& sd, double sigma, int k,
                                 const std::vector<Interval>& atoms, int sample,
                                 double budget, double thin_floor) {
  MassFloorReport rep;
  rep.n = 2 * k;
  std::vector<Interval> sel = select_atoms(atoms, 16);
  rep.atoms_checked = (int)sel.size();
  rep.points_checked = sample;
  std::vector<double> xs = atom_mids(map.Y, sample);
  double lam_n = std::pow(sd.lambda, rep.n);

  bool exact = true;
  std::vector<InverseBranch> H;
  try {
    H = enumerate_branches(map, rep.n, budget);
  } catch (const BudgetError&) {
    exact = false;
  }
  rep.exact = exact;

  double floor = std::numeric_limits<double>::infinity();
  if (exact) {
    std::vector<int> atom_of(H.size(), -1);
    for (size_t i = 0; i < H.size(); ++i)
      for (size_t a = 0; a < sel.size(); ++a)
        if (H[i].cyl.lo >= sel[a].lo - 1e-13 && H[i].cyl.hi <= sel[a].hi + 1e-13) {
          atom_of[i] = (int)a;
          break;
        }
    for (double x : xs) {
      std::vector<double> acc(sel.size(), 0.0);
      for (size_t i = 0; i < H.size(); ++i) {
        if (atom_of[i] < 0 || !H[i].dom.contains(x)) continue;
        InverseLeaf leaf = eval_branch(map, roof, H[i], x, false);
        acc[atom_of[i]] += leaf.hprime * std::exp(sigma * leaf.phi_n);
      }
      for (size_t a = 0; a < sel.size(); ++a)
        floor = std::min(floor, acc[a] / (lam_n * sel[a].length()));
    }
  } else {
    // Grid-power floor: apply the operator to the indicator of each atom
    // shrunk by the worst cylinder width plus the grid smear, so that every
    // counted branch has its whole cylinder inside the atom.
    int g = 2048;
    rep.grid = g;
    UlamOperator op = assemble_ulam(map, roof, cplx(sigma, 0.0), g);
    double w_cyl = std::exp(map.adler_c1) * std::pow(map.rho0, -rep.n) *
                   map.Y.length();
    double shrink = w_cyl + rep.n * map.Y.length() / g;
    double cell = map.Y.length() / g;
    for (const Interval& p : sel) {
      Interval ps{p.lo + shrink, p.hi - shrink};
      if (ps.hi - ps.lo < 2.0 * cell) {
        ++rep.thin_atoms;
        floor = std::min(floor, thin_floor);
        continue;
      }
      GridFunction ind = GridFunction::sample(map.Y, g, [&](double t) {
        return cplx(ps.contains(t) ? 1.0 : 0.0, 0.0);
      });
      GridFunction out = apply_ulam(op, ind, rep.n);
      for (double x : xs) {
        double val = std::max(0.0, out.eval(x).real());
        floor = std::min(floor, val / (lam_n * p.length()));
      }
    }
  }
  rep.C9 = std::isfinite(floor) ? floor : 0.0;
  return rep;
}

/*------------------------------ covering check ------------------------------*/

CoveringReport measure_eta1(const MapSpec& map, double delta0, int k1,
                            int trials, uint64_t seed, double budget) {
  CoveringReport rep;
  double K = map.K, rho0 = map.rho0, C1 = map.adler_c1;
  double LebY = map.Y.length();
  auto depth_for = [&](double tau) {
    double num = 2.0 * K * (rho0 - 2.0) / (std::exp(C1) * rho0 * tau);
    int extra = num <= 1.0 ? 0 : (int)std::ceil(std::log(num) / std::log(rho0 / 2.0));
    return k1 + std::max(0, extra);
  };
  int want = depth_for(delta0);
  int n = 0;
  std::vector<InverseBranch> H = enumerate_capped(map, want, 1, budget, &n);
  rep.n = n;
  double tau = delta0;
  if (n < want)
    tau = std::max(delta0, 2.0 * K * (rho0 - 2.0) /
                               (std::exp(C1) * rho0 * std::pow(rho0 / 2.0, n - k1)));
  if (2.0 * tau > 0.9 * LebY) tau = 0.45 * LebY;
  rep.tau = tau;

  std::sort(H.begin(), H.end(), [](const InverseBranch& a, const InverseBranch& b) {
    return a.cyl.lo < b.cyl.lo;
  });
  std::vector<double> starts(H.size());
  for (size_t i = 0; i < H.size(); ++i) starts[i] = H[i].cyl.lo;

  Rng rng(substream_seed(seed, 0x0c04e41ULL));
  rep.trials = trials;
  double worst = 1.0;
  for (int t = 0; t < trials; ++t) {
    double z = map.Y.lo + rng.u01() * LebY;
    double len = tau * (1.0 + rng.u01());
    len = std::min(len, 0.95 * LebY);
    double lo = map.Y.lo + rng.u01() * (LebY - len);
    Interval J{lo, lo + len};
    double covered = 0;
    auto it = std::lower_bound(starts.begin(), starts.end(), J.lo - 1e-15);
    for (size_t i = it - starts.begin(); i < H.size() && H[i].cyl.lo <= J.hi; ++i) {
      if (H[i].cyl.hi <= J.hi + 1e-15 && H[i].dom.contains(z))
        covered += H[i].cyl.length();
    }
    double frac = covered / len;
    worst = std::min(worst, frac);
    if (frac < 1e-12) ++rep.failures;
  }
  rep.worst = worst;
  rep.eta1 = 0.95 * worst;
  return rep;
}

/*------------------------------- ledger build -------------------------------*/

LedgerBundle build_ledger(const MapSpec& base, const RoofFunction& roof,
                          const LedgerOptions& opt) {
  LedgerBundle B;
  auto [map_i, iter] = ensure_expansion(base);
  B.map = std::move(map_i);
  B.roof = roof;
  B.grid = opt.grid;
  ConstantLedger& led = B.led;
  led.iterate = B.map.power;
  led.eta0 = 0.5 * (std::sqrt(7.0) - 1.0);
  led.eps0 = roof.eps0;

  GeometricConstants gc = geometric_constants(B.map);
  led.rho0 = gc.rho0;
  led.rho = gc.rho;
  led.C1 = gc.C1;
  led.K = gc.K;
  led.delta0 = gc.delta0;
  led.k1 = gc.k1 > 0 ? gc.k1 : 64;
  led.N1 = gc.N1;
  if (gc.k1 == 0)
    led.displays.push_back({"mixing-cap", 64, 64, false});

  RoofConstants rc = roof_constants(B.map, roof);
  led.C2 = rc.C2;
  led.C2p = rc.C2p;
  led.C3 = rc.C3;

  int depth = std::max(opt.catalog_depth, opt.k_cap);
  B.catalog = build_catalog(B.map, depth);

  B.sd0 = eigendata(B.map, roof, 0.0, opt.grid);
  led.lambda0 = B.sd0.lambda;
  B.cache.emplace(0LL, B.sd0);

  if (opt.eps_override > 0) {
    led.eps = opt.eps_override;
    led.displays.push_back({"weight-decay", 0, 1, true});
  } else {
    EpsilonChoice ec = pick_epsilon(B.map, roof, opt.pick_grid);
    led.eps = ec.eps;
    led.displays.push_back({"weight-decay", ec.worst_ratio, 1, ec.worst_ratio <= 1});
  }

  // f-ratio constants over the twist range.
  double lam_min = std::numeric_limits<double>::infinity();
  double C5 = 0;
  for (double sg : {-led.eps, -0.5 * led.eps, 0.5 * led.eps, led.eps}) {
    const SpectralData& sd = B.spectral(sg);
    lam_min = std::min(lam_min, sd.lambda);
    double ratio = sup_real(sd.f, B.map.Y) / inf_real(sd.f, B.map.Y);
    C5 = std::max(C5, ratio);
  }
  double lam_floor = std::pow(led.rho0, -1.0 / 16.0);
  led.displays.push_back({"twist-floor", lam_min, lam_floor, lam_min > lam_floor});
  led.C5 = C5;
  led.C6 = (led.eps * led.C2p + led.C1) * C5;
  led.C7 = std::pow(led.rho, 3.0) * C5;
  led.C8 = 3.0 * led.C7 / led.eta0;
  double R0 = sup_real(B.sd0.f, B.map.Y) / inf_real(B.sd0.f, B.map.Y);
  led.K2 = C5 * R0;

  // Enumeration budget depth, then a bootstrap mass floor measured there.
  // The floor is remeasured at the final memory length further down.
  int kg_depth = 0;
  enumerate_capped(B.map, 2 * (opt.k_cap / 2), 2, opt.enum_budget, &kg_depth);
  led.k_budget = std::max(1, kg_depth / 2);
  {
    std::vector<Interval> atoms_kg = partition_pk(B.map, B.catalog, led.k_budget);
    MassFloorReport mf = mass_floor_check(B.map, roof, B.sd0, 0.0, led.k_budget,
                                          atoms_kg, 9, opt.enum_budget);
    led.C9 = mf.C9;
  }

  CoveringReport cov = measure_eta1(B.map, led.delta0, led.k1, 50, opt.seed,
                                    opt.enum_budget);
  led.eta1 = cov.eta1;
  led.K1 = cov.eta1 > 0 ? 6.0 * std::exp(led.C1) / cov.eta1
                        : std::numeric_limits<double>::infinity();
  if (cov.eta1 <= 0) led.displays.push_back({"covering", cov.worst, 0, false});

  // Memory length: smallest multiple of 2 k1 passing all three displays, else
  // the smallest passing the contraction display alone.
  GridFunction f0 = B.sd0.f;
  GridFunction f0inv = f0;
  for (auto& z : f0inv.v) z = 1.0 / z.real();
  double mem_base = (sup_real(f0, B.map.Y) + var(f0)) *
                    (1.0 / inf_real(f0, B.map.Y) + var(f0inv));
  auto display_at = [&](int kk, LedgerDisplay d[3]) {
    d[0] = {"expansion-margin", std::pow(led.rho, kk) * (led.rho - 1.0),
            12.0 * led.N1 * led.C8, false};
    d[0].holds = d[0].lhs > d[0].rhs;
    double min_p = std::numeric_limits<double>::infinity();
    for (const Interval& p : partition_pk(B.map, B.catalog, kk))
      min_p = std::min(min_p, p.length());
    double rhs = led.C9 > 0
                     ? (16.0 * led.C8 / led.C9) * led.C5 * std::pow(led.rho, -kk)
                     : std::numeric_limits<double>::infinity();
    d[1] = {"atom-length", min_p, rhs, min_p > rhs};
    d[2] = {"memory-contraction", std::pow(led.rho, -2.0 * kk) * mem_base, 1.0,
            false};
    d[2].holds = d[2].lhs < d[2].rhs;
  };
  int k_pick = 0, k_fallback = 0;
  LedgerDisplay kd[3], kd_pick[3];
  std::string first_fail;
  for (int kk = 2 * led.k1; kk <= opt.k_cap; kk += 2 * led.k1) {
    display_at(kk, kd);
    if (kd[0].holds && kd[1].holds && kd[2].holds) {
      k_pick = kk;
      for (int i = 0; i < 3; ++i) kd_pick[i] = kd[i];
      break;
    }
    if (!k_fallback && kd[2].holds) k_fallback = kk;
  }
  if (k_pick) {
    led.k = k_pick;
    led.k_strict = true;
  } else {
    led.k = k_fallback ? k_fallback : 2 * led.k1;
    led.k_strict = false;
    display_at(led.k, kd_pick);
    for (int i = 0; i < 3; ++i)
      if (!kd_pick[i].holds && first_fail.empty()) first_fail = kd_pick[i].name;
    led.k_note = "unverified memory hypotheses; first failing display: " +
                 (first_fail.empty() ? std::string("none") : first_fail);
  }
  B.atoms = partition_pk(B.map, B.catalog, led.k);

  // Final mass floor at the chosen memory length, then the memory displays
  // restated against it.
  {
    double thin = led.eta1 > 0 ? 0.5 * led.eta1 * std::exp(-led.C1) : 0.0;
    MassFloorReport mf = mass_floor_check(B.map, roof, B.sd0, 0.0, led.k,
                                          B.atoms, 9, opt.enum_budget, thin);
    led.C9 = mf.C9;
    led.displays.push_back({"mass-floor", mf.C9, 0, mf.C9 > 0});
    display_at(led.k, kd_pick);
  }
  for (int i = 0; i < 3; ++i) led.displays.push_back(kd_pick[i]);

  // Net depth: smallest n0 whose measured slope floor D(n0) satisfies the
  // quarter-window bound. C10 only depends on k, fixed above.
  double denom = 2.0 * led.eta0 - 4.0 * std::pow(led.rho0, -led.k);
  led.displays.push_back({"net-denominator", 2.0 * led.eta0,
                          4.0 * std::pow(led.rho0, -led.k), denom > 0});
  led.C10 = (led.C1 * std::exp(led.C1) +
             2.0 * (1.0 + led.eps0) * std::exp(led.eps0 * led.C2p) * led.C2p +
             2.0 * led.C6) /
            std::max(denom, 1e-12);
  double window = 0.25 * std::sqrt(2.0 - 2.0 * std::cos(M_PI / 12.0));
  std::vector<Interval> uni_atoms = select_atoms(B.atoms, 16);
  UniReport best_uni;
  bool have_n0 = false;
  for (int n = 1; n <= opt.n0_cap && !have_n0; ++n) {
    UniReport rep;
    try {
      rep = check_uni(B.map, roof, uni_atoms, n, opt.uni_grid, opt.uni_pair_cap,
                      opt.enum_budget);
    } catch (const BudgetError&) {
      break;
    }
    if (rep.degenerate) {
      best_uni = rep;
      continue;
    }
    double lhs = led.C10 * std::pow(led.rho0, -n) * 4.0 * M_PI / rep.D;
    if (lhs <= window) {
      best_uni = rep;
      led.n0 = n;
      led.displays.push_back({"net-scale", lhs, window, true});
      have_n0 = true;
    } else {
      best_uni = rep;
    }
  }
  led.D = best_uni.D;
  led.C0 = best_uni.C0;
  led.P_pair = best_uni.hp_min;
  led.uni_degenerate = best_uni.degenerate || !have_n0;
  B.uni = best_uni.atoms;
  if (!led.uni_degenerate) {
    led.n0_multiple_of_k = led.k > 0 && led.n0 % led.k == 0;
    led.Delta = 2.0 * M_PI / led.D;
    led.delta = 0.95 * std::min({4.0 * M_PI / (3.0 * led.D),
                                 M_PI / (6.0 * std::max(led.C0, 1e-12)),
                                 0.999 * led.Delta});
    led.delta_p = led.delta / (4.0 * led.delta + 6.0 * led.Delta);
    led.b_min = std::max(4.0 * M_PI / led.D, 2.0);
    led.eta = std::max(led.eta0, 1.0 - led.delta * led.P_pair / 3.0);
    led.displays.push_back({"phase-window", led.delta * led.D / (16.0 * M_PI),
                            1.0 / 12.0, led.delta * led.D / (16.0 * M_PI) < 1.0 / 12.0});
    led.displays.push_back({"phase-drift", led.C0 * led.delta, M_PI / 6.0,
                            led.C0 * led.delta < M_PI / 6.0});

    // Branch-sum ratio cap M over the checked atoms, and the thirds weight.
    double M = 0;
    for (const Interval& p : uni_atoms) {
      std::vector<double> xs = atom_mids(p, 17);
      double s_lo = std::numeric_limits<double>::infinity(), s_hi = 0;
      for (double x : xs) {
        double s = transfer_point(B.map, roof, cplx(0, 0), led.n0,
                                  [](double) { return cplx(1, 0); }, x)
                       .real();
        s_lo = std::min(s_lo, s);
        s_hi = std::max(s_hi, s);
      }
      double f_ratio = sup_real(B.sd0.f, p) / inf_real(B.sd0.f, p);
      M = std::max(M, 16.0 * sqr(f_ratio) * (s_hi / std::max(s_lo, 1e-300)));
    }
    led.M = M;
    led.delta_pp = led.delta_p / (2.0 * M);
  } else {
    if (led.n0 <= 0) led.n0 = 1;  // block size for plain iteration
    led.Delta = std::numeric_limits<double>::infinity();
    led.b_min = std::numeric_limits<double>::infinity();
    led.displays.push_back({"net-scale", std::numeric_limits<double>::infinity(),
                            window, false});
  }

  if (opt.with_ly) {
    double b_ref = std::isfinite(led.b_min) ? std::max(8.0, led.b_min + 1.0) : 8.0;
    LyFit fit = verify_ly(B, cplx(0.0, b_ref), 1, std::min(opt.grid, 2048), 48,
                          substream_seed(opt.seed, 0x17fULL));
    led.c_ly = fit.c;
    const SpectralData& sd_hi = B.spectral(led.eps);  // f at twice eps/2
    double r2 = sup_real(sd_hi.f, B.map.Y) / inf_real(sd_hi.f, B.map.Y);
    led.C11 = 64.0 * sqr(1.0 + led.c_ly) * sqr(led.C5) * r2 * sqr(led.K2);
  }

  led.feasible = true;
  for (const auto& d : led.displays)
    if (!d.holds) led.feasible = false;
  return B;
}

/*------------------------------- cancellation -------------------------------*/

namespace {

struct PullEval {
  double y0 = 0, hp = 0, phi = 0;
};

PullEval pull(const MapSpec& map, const RoofFunction& roof,
              const std::vector<int>& word, double x) {
  InverseBranch h{word, {}, {}};
  InverseLeaf leaf = eval_branch(map, roof, h, x, false);
  return {leaf.y, leaf.hprime, leaf.phi_n};
}

// Branch pair for this atom: the one recorded during the ledger build, or a
// fresh scan when the atom was outside the checked subset.
UniAtomReport atom_pair(const LedgerBundle& B, const Interval& atom) {
  for (const auto& ar : B.uni)
    if (std::abs(ar.atom.lo - atom.lo) < 1e-12 &&
        std::abs(ar.atom.hi - atom.hi) < 1e-12)
      return ar;
  UniReport rep = check_uni(B.map, B.roof, {atom}, B.led.n0);
  if (rep.atoms.empty() || rep.atoms[0].h1.empty())
    throw NumericsError("cancellation: no usable branch pair on the atom");
  return rep.atoms[0];
}

// Normalized one-branch summands at a point: weight w_m = |h_m'| e^{sigma phi}
// f(h_m x) / (lambda^{n0} f(x)), value contributions w_m u(h_m x) and
// w_m e^{i b phi} v(h_m x).
struct TwoBranch {
  const LedgerBundle& B;
  const ConePair& pair;
  const SpectralData& sd;
  const std::vector<int>&w1, &w2;
  double lam_n;

  struct At {
    double u1, u2;      // weighted u pullbacks
    cplx v1, v2;        // weighted, twisted v pullbacks
    double y1, y2;      // h_m(x)
  };
  At eval(double x) const {
    At a;
    PullEval p1 = pull(B.map, B.roof, w1, x);
    PullEval p2 = pull(B.map, B.roof, w2, x);
    double fx = sd.f.eval(x).real();
    double g1 = p1.hp * std::exp(pair.sigma * p1.phi) * sd.f.eval(p1.y0).real() /
                (lam_n * fx);
    double g2 = p2.hp * std::exp(pair.sigma * p2.phi) * sd.f.eval(p2.y0).real() /
                (lam_n * fx);
    a.u1 = g1 * std::max(0.0, pair.u.eval(p1.y0).real());
    a.u2 = g2 * std::max(0.0, pair.u.eval(p2.y0).real());
    a.v1 = g1 * std::exp(cplx(0, pair.b * p1.phi)) * pair.v.eval(p1.y0);
    a.v2 = g2 * std::exp(cplx(0, pair.b * p2.phi)) * pair.v.eval(p2.y0);
    a.y1 = p1.y0;
    a.y2 = p2.y0;
    return a;
  }
  double psi(double x) const {
    return pull(B.map, B.roof, w1, x).phi - pull(B.map, B.roof, w2, x).phi;
  }
};

// Validated slack of the one-sided damping inequality on sampled points:
// type 1 damps the h1 term, type 2 the h2 term. Returns the minimum of
// (rhs - lhs) / rhs over the samples.
double type_margin(const TwoBranch& tb, const Interval& I, int type, int samples,
                   double eta0) {
  double margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    double x = I.lo + (i + 0.5) * I.length() / samples;
    TwoBranch::At a = tb.eval(x);
    double lhs = std::abs(a.v1 + a.v2);
    double rhs = type == 1 ? eta0 * a.u1 + a.u2 : a.u1 + eta0 * a.u2;
    if (rhs <= 0) return -std::numeric_limits<double>::infinity();
    margin = std::min(margin, (rhs - lhs) / rhs);
  }
  return margin;
}

}  // namespace

CancellationLayout build_cancellation(const LedgerBundle& B, const ConePair& pair,
                                      const Interval& atom, int chi_grid) {
  const ConstantLedger& led = B.led;
  if (led.uni_degenerate)
    throw NumericsError(
        "build_cancellation: no branch pair with a uniform phase slope");
  double absb = std::abs(pair.b);
  if (absb <= 2.0 * led.Delta)
    throw NumericsError("build_cancellation: |b| <= 2 Delta, frequency below "
                        "the net scale");

  CancellationLayout lay;
  lay.atom = atom;
  lay.eta = led.eta;
  UniAtomReport ap = atom_pair(B, atom);
  lay.h1 = ap.h1;
  lay.h2 = ap.h2;
  const SpectralData& sd = B.spectral(pair.sigma);
  TwoBranch tb{B, pair, sd, ap.h1, ap.h2,
               std::pow(sd.lambda, (double)led.n0)};

  double rnet = led.Delta / absb;   // net spacing and phase-search radius
  double rball = led.delta / absb;  // half-width of a typed interval
  int net = std::max(1, (int)std::ceil(atom.length() / rnet));
  const int val_samples = 33;
  double last_end = atom.lo;
  double max_gap = 2.0 * led.Delta / absb + 1e-9 / absb;

  for (int i = 0; i < net; ++i) {
    double y0 = atom.lo + (i + 0.5) * rnet;
    if (y0 >= atom.hi) break;
    Interval ball{std::max(atom.lo, y0 - rball), std::min(atom.hi, y0 + rball)};
    if (ball.length() < rball) continue;

    // Case split on the ball: a branch whose pulled-back |v| dips under half
    // the pulled-back u can be damped in place; otherwise search the phase.
    double inf_v1 = std::numeric_limits<double>::infinity(), sup_u1 = 0;
    double inf_v2 = std::numeric_limits<double>::infinity(), sup_u2 = 0;
    for (int t = 0; t < val_samples; ++t) {
      double x = ball.lo + (t + 0.5) * ball.length() / val_samples;
      TwoBranch::At a = tb.eval(x);
      inf_v1 = std::min(inf_v1, std::abs(a.v1));
      sup_u1 = std::max(sup_u1, a.u1);
      inf_v2 = std::min(inf_v2, std::abs(a.v2));
      sup_u2 = std::max(sup_u2, a.u2);
    }
    bool dip1 = inf_v1 <= 0.5 * sup_u1, dip2 = inf_v2 <= 0.5 * sup_u2;

    Interval cand = ball;
    bool case2 = false;
    if (!dip1 && !dip2) {
      // Both branches carry full-size v: move the base point so the two
      // twisted summands arrive antiphase, then damp either branch.
      case2 = true;
      double psi0 = tb.psi(y0);
      TwoBranch::At a0 = tb.eval(y0);
      double theta0 = std::arg(a0.v1) - std::arg(a0.v2);
      double target = wrap_angle(M_PI - theta0);
      Interval search{std::max(atom.lo, y0 - rnet), std::min(atom.hi, y0 + rnet)};
      double best_err = std::numeric_limits<double>::infinity(), y1 = y0;
      for (int t = 0; t < 256; ++t) {
        double yc = search.lo + (t + 0.5) * search.length() / 256;
        double err = std::abs(wrap_angle(pair.b * (tb.psi(yc) - psi0) - target));
        if (err < best_err) {
          best_err = err;
          y1 = yc;
        }
      }
      lay.max_phase_err = std::max(lay.max_phase_err, best_err);
      cand = Interval{std::max(atom.lo, y1 - rball), std::min(atom.hi, y1 + rball)};
      if (cand.length() < rball) continue;
    }

    if (cand.lo <= last_end) {
      cand.lo = last_end + 1e-3 * rball;
      if (cand.length() < rball) {
        ++lay.untyped;
        continue;
      }
    }
    double m1 = type_margin(tb, cand, 1, val_samples, led.eta0);
    double m2 = type_margin(tb, cand, 2, val_samples, led.eta0);
    if (m1 < 0 && m2 < 0) {
      ++lay.untyped;
      continue;
    }
    TypedInterval ti;
    ti.I = cand;
    ti.type = m1 >= m2 ? 1 : 2;
    ti.margin = std::max(m1, m2);
    if (cand.lo > last_end) {
      Interval gap{last_end, cand.lo};
      if (gap.length() > max_gap) ++lay.gap_violations;
      if (!gap.empty()) lay.gaps.push_back(gap);
    }
    last_end = cand.hi;
    if (case2)
      ++lay.case2;
    else
      ++lay.case1;
    lay.intervals.push_back(std::move(ti));
  }
  if (last_end < atom.hi) {
    Interval gap{last_end, atom.hi};
    if (gap.length() > max_gap) ++lay.gap_violations;
    lay.gaps.push_back(gap);
  }

  // Damping profile: 1 outside, eta on the middle third of each typed
  // interval's image under its own branch, linear ramps on the outer thirds.
  lay.chi = GridFunction::constant(B.map.Y, chi_grid, cplx(1, 0));
  for (const TypedInterval& ti : lay.intervals) {
    const std::vector<int>& w = ti.type == 1 ? ap.h1 : ap.h2;
    double a = ti.I.lo, d = ti.I.hi;
    double b3 = a + ti.I.length() / 3.0, c3 = a + 2.0 * ti.I.length() / 3.0;
    double ya = pull(B.map, B.roof, w, a).y0;
    double yb = pull(B.map, B.roof, w, b3).y0;
    double yc = pull(B.map, B.roof, w, c3).y0;
    double yd = pull(B.map, B.roof, w, d).y0;
    if (ya > yd) {
      std::swap(ya, yd);
      std::swap(yb, yc);
    }
    auto profile = [&](double t) {
      if (t <= ya || t >= yd) return 1.0;
      if (t < yb) return 1.0 + (led.eta - 1.0) * (t - ya) / std::max(yb - ya, 1e-300);
      if (t <= yc) return led.eta;
      return led.eta + (1.0 - led.eta) * (t - yc) / std::max(yd - yc, 1e-300);
    };
    double h = lay.chi.h();
    int i_lo = std::max(0, lay.chi.cell(ya) - 1);
    int i_hi = std::min(chi_grid - 1, lay.chi.cell(yd) + 1);
    for (int i = i_lo; i <= i_hi; ++i) {
      double t0 = lay.chi.lo + i * h, t1 = t0 + h;
      double val = std::min({profile(t0 + 1e-15), profile(0.5 * (t0 + t1)),
                             profile(t1 - 1e-15)});
      lay.chi.v[i] = std::min(lay.chi.v[i].real(), val);
    }
  }
  double P = std::max(ap.hp_min, 1e-300);
  lay.chi_slope_bound = 3.0 * (1.0 - led.eta) * absb / (led.delta * P);
  for (int i = 0; i + 1 < chi_grid; ++i)
    lay.chi_slope_measured =
        std::max(lay.chi_slope_measured,
                 std::abs(lay.chi.v[i + 1].real() - lay.chi.v[i].real()) /
                     lay.chi.h());
  return lay;
}

CancellationCheck verify_domination(const LedgerBundle& B, const ConePair& pair,
                                    const CancellationLayout& lay, int grid) {
  CancellationCheck out;
  out.grid = grid;
  const SpectralData& sd = B.spectral(pair.sigma);
  cplx s(pair.sigma, pair.b);
  auto vf = [&](double y) { return pair.v.eval(y); };
  auto chiu = [&](double y) {
    return cplx(lay.chi.eval(y).real() * std::max(0.0, pair.u.eval(y).real()), 0);
  };
  out.min_slack_middle = std::numeric_limits<double>::infinity();
  auto probe = [&](double x, bool middle) {
    double lhs = std::abs(normalized_point(B.map, B.roof, sd, s, B.led.n0, vf, x));
    double rhs =
        normalized_point(B.map, B.roof, sd, cplx(pair.sigma, 0), B.led.n0, chiu, x)
            .real();
    out.max_violation = std::max(out.max_violation, lhs - rhs);
    if (middle) out.min_slack_middle = std::min(out.min_slack_middle, rhs - lhs);
  };
  for (int i = 0; i < grid; ++i)
    probe(B.map.Y.lo + (i + 0.5) * B.map.Y.length() / grid, false);
  for (const TypedInterval& ti : lay.intervals) {
    double a = ti.I.lo + ti.I.length() / 3.0, b = ti.I.lo + 2.0 * ti.I.length() / 3.0;
    for (int i = 0; i < 5; ++i) probe(a + (i + 0.5) * (b - a) / 5, true);
  }
  if (!std::isfinite(out.min_slack_middle)) out.min_slack_middle = 0;
  return out;
}

/*------------------------------ cone iteration ------------------------------*/

ConeReport cone_check_pair(const LedgerBundle& B, const ConePair& pair,
                           const DiscontinuityCatalog& cat) {
  ConeParams cp;
  cp.C7 = B.led.C7;
  cp.C8 = B.led.C8;
  cp.C10 = B.led.C10;
  cp.rho = B.led.rho;
  cp.b = pair.b;
  cp.k = B.led.k;
  cp.jmax_built = (int)cat.by_depth.size();
  cp.n1 = B.led.N1;
  auto marked = cat.interior_points(B.map.Y);
  std::vector<Interval> tis;
  for (const Interval& p : B.atoms) {
    if (tis.size() + 7 > 256) break;
    tis.push_back(p);
    for (int parts : {2, 4}) {
      for (int j = 0; j < parts; ++j)
        tis.push_back({p.lo + j * p.length() / parts,
                       p.lo + (j + 1) * p.length() / parts});
    }
  }
  return cone_check(pair.u, pair.v, marked, tis, cp);
}

IterationResult iterate_pair(const LedgerBundle& B, const ConePair& pair,
                             const DiscontinuityCatalog& cat, int out_grid) {
  IterationResult res;
  GridFunction chi_total = GridFunction::constant(B.map.Y, out_grid, cplx(1, 0));
  for (const Interval& p : B.atoms) {
    CancellationLayout lay = build_cancellation(B, pair, p, out_grid);
    for (int i = 0; i < out_grid; ++i)
      chi_total.v[i] = std::min(chi_total.v[i].real(), lay.chi.v[i].real());
    res.layouts.push_back(std::move(lay));
  }
  const SpectralData& sd = B.spectral(pair.sigma);
  GridFunction chiu = chi_total;
  for (int i = 0; i < out_grid; ++i)
    chiu.v[i] = chi_total.v[i].real() *
                std::max(0.0, pair.u.eval(chiu.mid(i)).real());
  res.next.u = normalized_apply(B.map, B.roof, sd, cplx(pair.sigma, 0), B.led.n0,
                                chiu, out_grid);
  for (auto& z : res.next.u.v) z = cplx(std::max(0.0, z.real()), 0);
  res.next.v = normalized_apply(B.map, B.roof, sd, cplx(pair.sigma, pair.b),
                                B.led.n0, pair.v, out_grid);
  res.next.b = pair.b;
  res.next.sigma = pair.sigma;

  DiscontinuityCatalog created = build_catalog(B.map, B.led.n0);
  res.catalog.n1 = created.n1;
  res.catalog.by_depth = std::move(created.by_depth);
  for (const auto& level : cat.by_depth) res.catalog.by_depth.push_back(level);

  for (const Interval& p : B.atoms)
    res.atom_ratio.push_back(sup_real(res.next.u, p) /
                             std::max(inf_real(res.next.u, p), 1e-300));
  res.cone = cone_check_pair(B, res.next, res.catalog);
  return res;
}

/*------------------------- variation inequality fit -------------------------*/

namespace {

// One normalized Ulam step: w -> D^{-1} M (D w) / lambda, D = diag f_sigma.
struct NormOp {
  UlamOperator op;
  Eigen::VectorXcd f;
  double lam = 1;
  GridFunction proto;

  Eigen::VectorXcd apply(const Eigen::VectorXcd& w) const {
    Eigen::VectorXcd y = op.M * f.cwiseProduct(w);
    return y.cwiseQuotient(f) / lam;
  }
  GridFunction to_grid(const Eigen::VectorXcd& w) const {
    GridFunction g = proto;
    for (int i = 0; i < op.n; ++i) g.v[i] = w[i];
    return g;
  }
  Eigen::VectorXcd from_grid(const GridFunction& g) const {
    Eigen::VectorXcd w(op.n);
    for (int i = 0; i < op.n; ++i) w[i] = g.v[i];
    return w;
  }
};

NormOp make_normop(const LedgerBundle& B, cplx s, int grid) {
  NormOp no;
  no.op = assemble_ulam(B.map, B.roof, s, grid);
  no.proto = GridFunction::constant(B.map.Y, grid, cplx(0, 0));
  const SpectralData& sd = B.spectral(s.real());
  no.lam = sd.lambda;
  no.f.resize(grid);
  for (int i = 0; i < grid; ++i)
    no.f[i] = cplx(std::max(sd.f.eval(no.proto.mid(i)).real(), 1e-300), 0);
  return no;
}

// Deterministic test field: thirds of catalog-point steps, smooth trig
// blends, and sawteeth; each normalized to unit sup.
std::vector<GridFunction> test_family(const LedgerBundle& B, int grid,
                                      int n_test, uint64_t seed) {
  Rng rng(substream_seed(seed, 0xfa317ULL));
  std::vector<double> pts;
  for (const auto& pr : B.catalog.interior_points(B.map.Y))
    pts.push_back(pr.first);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const Interval Y = B.map.Y;
  std::vector<GridFunction> fam;
  fam.reserve(n_test);
  for (int t = 0; t < n_test; ++t) {
    GridFunction g;
    int kind = t % 3;
    if (kind == 0) {
      std::vector<double> bks;
      int nb = 3 + (int)(rng.u01() * 5.0);
      for (int j = 0; j < nb; ++j)
        bks.push_back(pts.empty()
                          ? Y.lo + rng.u01() * Y.length()
                          : pts[(size_t)(rng.u01() * pts.size()) % pts.size()]);
      std::sort(bks.begin(), bks.end());
      std::vector<cplx> vals(bks.size() + 1);
      for (auto& z : vals) z = cplx(rng.sym(), rng.sym());
      g = GridFunction::sample(Y, grid, [&](double x) {
        size_t i = std::upper_bound(bks.begin(), bks.end(), x) - bks.begin();
        return vals[i];
      });
    } else if (kind == 1) {
      double c[4], d[4], e[4], f2[4];
      for (int j = 0; j < 4; ++j) {
        c[j] = rng.sym();
        d[j] = rng.sym();
        e[j] = rng.sym();
        f2[j] = rng.sym();
      }
      g = GridFunction::sample(Y, grid, [&](double x) {
        double tt = 2.0 * M_PI * (x - Y.lo) / Y.length(), re = 0, im = 0;
        for (int j = 0; j < 4; ++j) {
          re += (c[j] * std::cos((j + 1) * tt) + d[j] * std::sin((j + 1) * tt)) /
                (j + 1.0);
          im += (e[j] * std::cos((j + 1) * tt) + f2[j] * std::sin((j + 1) * tt)) /
                (j + 1.0);
        }
        return cplx(re, im);
      });
    } else {
      int q = 3 + 2 * (int)(rng.u01() * 4.0);
      double ph = rng.u01(), amp = 0.5 + 0.5 * rng.u01(), ph2 = rng.u01();
      g = GridFunction::sample(Y, grid, [&](double x) {
        double tt = q * (x - Y.lo) / Y.length();
        double saw = 2.0 * (tt + ph - std::floor(tt + ph)) - 1.0;
        double saw2 = 2.0 * (tt + ph2 - std::floor(tt + ph2)) - 1.0;
        return cplx(amp * saw, (1.0 - amp) * saw2);
      });
    }
    double sup = sup_abs(g, Y);
    if (sup > 0)
      for (auto& z : g.v) z /= sup;
    fam.push_back(std::move(g));
  }
  return fam;
}

double integrate_real(const GridFunction& g, const Interval& I) {
  double s = 0, h = g.h();
  int i0 = std::clamp((int)std::floor((I.lo - g.lo) / h), 0, g.n - 1);
  int i1 = std::clamp((int)std::floor((I.hi - g.lo) / h), 0, g.n - 1);
  for (int i = i0; i <= i1; ++i) {
    double a = std::max(I.lo, g.lo + i * h);
    double b = std::min(I.hi, g.lo + (i + 1) * h);
    if (b > a) s += g.v[i].real() * (b - a);
  }
  return s;
}

}  // namespace

namespace {

LyFit ly_fit_steps(const LedgerBundle& B, cplx s, int n_steps, int grid,
                   int n_test, uint64_t seed) {
  const ConstantLedger& led = B.led;
  LyFit fit;
  fit.n_steps = std::max(1, n_steps);
  fit.target = std::pow(led.rho, -(double)fit.n_steps);
  NormOp op = make_normop(B, s, grid);
  const SpectralData& sd = B.spectral(s.real());
  double wfac = (1.0 + std::abs(s.imag())) *
                std::pow(sd.Lambda, (double)fit.n_steps);
  for (const GridFunction& g : test_family(B, grid, n_test, seed)) {
    double VI = var(g);
    double W =
        wfac * std::sqrt(std::max(sup_abs(g, B.map.Y) * l1_norm(g), 0.0));
    Eigen::VectorXcd w = op.from_grid(g);
    for (int t = 0; t < fit.n_steps; ++t) w = op.apply(w);
    double VO = var(op.to_grid(w));
    fit.rows.push_back({VO, VI, W});
  }
  // nonnegative 2x2 least squares, then inflate to a certified envelope
  double s11 = 0, s12 = 0, s22 = 0, r1 = 0, r2 = 0;
  for (const auto& row : fit.rows) {
    s11 += row[1] * row[1];
    s12 += row[1] * row[2];
    s22 += row[2] * row[2];
    r1 += row[1] * row[0];
    r2 += row[2] * row[0];
  }
  double det = s11 * s22 - s12 * s12, a = 0, c = 0;
  if (det > 1e-300) {
    a = (r1 * s22 - r2 * s12) / det;
    c = (s11 * r2 - s12 * r1) / det;
  }
  if (a < 0) {
    a = 0;
    c = s22 > 0 ? r2 / s22 : 0;
  }
  if (c < 0) {
    c = 0;
    a = s11 > 0 ? r1 / s11 : 0;
  }
  a = std::max(a, 0.0);
  c = std::max(c, 0.0);
  double infl = 1.0;
  bool degenerate = false;
  for (const auto& row : fit.rows) {
    double den = a * row[1] + c * row[2];
    if (row[0] <= 0) continue;
    if (den > 0)
      infl = std::max(infl, row[0] / den);
    else
      degenerate = true;
  }
  if (degenerate) {
    a = 0;
    c = 0;
    for (const auto& row : fit.rows)
      if (row[2] > 0) c = std::max(c, row[0] / row[2]);
    infl = 1.0;
  }
  fit.a = a * infl;
  fit.c = c * infl;
  fit.a_ok = fit.a <= 1.05 * fit.target;
  return fit;
}

}  // namespace

LyFit verify_ly(const LedgerBundle& B, cplx s, int n_mult, int grid, int n_test,
                uint64_t seed) {
  return ly_fit_steps(B, s, std::max(1, n_mult) * B.led.k, grid, n_test, seed);
}

double remainder_envelope(const LedgerBundle& B, cplx s, int grid, int n_test,
                          uint64_t seed) {
  return ly_fit_steps(B, s, 1, grid, n_test, seed).c;
}

/*-------------------------------- L2 decay ----------------------------------*/

L2Report l2_contraction(const LedgerBundle& B, cplx s, int m_max,
                        const GridFunction& v0, int grid) {
  L2Report rep;
  const ConstantLedger& led = B.led;
  double sigma = s.real(), b = s.imag();
  rep.uni_failed = led.uni_degenerate || !(std::abs(b) > 2.0 * led.Delta);
  const SpectralData& sd = B.spectral(sigma);
  GridFunction v = v0.n == grid
                       ? v0
                       : GridFunction::sample(B.map.Y, grid,
                                              [&](double x) { return v0.eval(x); });
  double s0 = std::max(sup_abs(v, B.map.Y), 1e-12);
  GridFunction u = GridFunction::constant(B.map.Y, grid, cplx(s0, 0));
  rep.v_table.push_back(l2sq(v));
  rep.u_table.push_back(l2sq(u));
  for (int m = 0; m < m_max; ++m) {
    GridFunction chiu = u;
    if (!rep.uni_failed) {
      ConePair pair;
      pair.u = u;
      pair.v = v;
      pair.b = b;
      pair.sigma = sigma;
      GridFunction chi = GridFunction::constant(B.map.Y, grid, cplx(1, 0));
      for (const Interval& p : B.atoms) {
        CancellationLayout lay = build_cancellation(B, pair, p, grid);
        for (int i = 0; i < grid; ++i)
          chi.v[i] = std::min(chi.v[i].real(), lay.chi.v[i].real());
      }
      for (int i = 0; i < grid; ++i)
        chiu.v[i] = chi.v[i].real() * std::max(0.0, u.v[i].real());
    }
    u = normalized_apply(B.map, B.roof, sd, cplx(sigma, 0), led.n0, chiu, grid);
    for (auto& z : u.v) z = cplx(std::max(0.0, z.real()), 0);
    v = normalized_apply(B.map, B.roof, sd, s, led.n0, v, grid);
    rep.v_table.push_back(l2sq(v));
    rep.u_table.push_back(l2sq(u));
  }
  std::vector<double> xs, ys;
  for (int m = 1; m < (int)rep.v_table.size(); ++m) {
    if (!(rep.v_table[m] > 0)) break;
    xs.push_back(m);
    ys.push_back(std::log(rep.v_table[m]));
  }
  if (xs.size() >= 2) rep.beta_fit = std::exp(line_fit(xs, ys).second);
  for (size_t m = 1; m + 1 < rep.v_table.size(); ++m)
    if (rep.v_table[m + 1] > 1.01 * rep.v_table[m]) rep.monotone = false;
  return rep;
}

/*----------------------------- hypothesis check -----------------------------*/

double birkhoff_roof(const MapSpec& map, const RoofFunction& roof, double y,
                     int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) {
    int bi = map.branch_index(y);
    if (bi < 0)
      throw NumericsError("birkhoff_roof: orbit leaves the branch domains");
    s += roof_step(map.branches[bi], roof, y);
    y = map.apply(y);
  }
  return s;
}

bool variation_hypothesis(const LedgerBundle& B, const GridFunction& v,
                          double sigma, double b, int m) {
  const ConstantLedger& led = B.led;
  GridFunction w = v;
  if (sigma < 0) {
    for (int i = 0; i < w.n; ++i)
      w.v[i] *= std::exp(sigma * birkhoff_roof(B.map, B.roof, w.mid(i),
                                               m * led.n0));
  }
  double lhs = var(w);
  double rhs = led.C11 * b * b * std::pow(led.rho, (double)m * led.n0) *
               l1_norm(w);
  return lhs <= rhs;
}

/*----------------------------- contraction scan -----------------------------*/

SchedulePlan schedule_plan(int n, int n0, double A, double b,
                           const std::function<bool(int, int)>& H_holds) {
  if (n0 <= 0) throw ConfigError("schedule_plan: n0 must be positive");
  SchedulePlan p;
  int remaining = n, i = 0;
  // Blocks shorter than half the log(1+b) budget cannot beat the b^2
  // variation factor; the walk stops there and the tail is absorbed.
  int m_floor =
      std::max(1, (int)std::ceil(A * std::log1p(std::abs(b)) / (6.0 * n0)));
  for (;;) {
    int m = remaining / (3 * n0);
    if (m < m_floor) break;
    if (H_holds(i, m)) {
      p.m.push_back(m);
      p.triple.push_back(true);
      p.n_used += 3 * m * n0;
      break;
    }
    p.m.push_back(m);
    p.triple.push_back(false);
    p.n_used += m * n0;
    remaining -= m * n0;
    ++i;
    ++p.passes;
  }
  return p;
}

ScanReport contraction_scan(const LedgerBundle& B, double sigma,
                            const std::vector<double>& b_list, int grid,
                            int n_test, uint64_t seed) {
  const ConstantLedger& led = B.led;
  ScanReport rep;
  rep.uni_failed = led.uni_degenerate;
  rep.family_size = n_test;
  for (double b : b_list)
    if (std::abs(b) < led.b_min)
      throw ConfigError(
          "contraction_scan: |b| below b_min; the net-scale hypothesis "
          "requires |b| >= max(4 pi / D, 2)");
  double beta = led.beta_l2;
  if (!(beta > 0) || !(beta < 1)) {
    double b_ref = b_list.empty() ? std::max(8.0, led.b_min) : b_list[0];
    int g2 = std::min(grid, 512);
    GridFunction v0 = GridFunction::sample(B.map.Y, g2, [&](double x) {
      return std::exp(cplx(0, 2.0 * M_PI * (x - B.map.Y.lo) / B.map.Y.length()));
    });
    L2Report l2 = l2_contraction(B, cplx(sigma, b_ref), 6, v0, g2);
    beta = l2.beta_fit;
    rep.uni_failed = rep.uni_failed || l2.uni_failed;
  }
  beta = std::clamp(beta, 1e-6, 0.9999);
  rep.beta = beta;
  const SpectralData& sd = B.spectral(sigma);
  double g0 = std::max(std::pow(sd.Lambda, 2.0 * led.n0) / led.rho,
                       std::pow(sd.Lambda, (double)led.n0) * std::sqrt(beta));
  if (!(g0 < 1))
    throw NumericsError("contraction_scan: no contraction at this twist");
  double A = 1.05 * 6.0 * std::log(2.0 * led.C10 + led.c_ly) / (-std::log(g0));
  rep.A = A;
  for (double b : b_list) {
    ScanRow row;
    row.b = b;
    int n3 = 3 * led.n0;
    int n_b = n3 * (int)std::ceil(A * std::log1p(std::abs(b)) / n3);
    n_b = std::max(n_b, n3);
    NormOp op = make_normop(B, cplx(sigma, b), grid);
    double worst_log = -std::numeric_limits<double>::infinity();
    double worst_ratio = 0;
    SchedulePlan last_plan;
    uint64_t sub = substream_seed(seed, (uint64_t)std::llround(std::abs(b) * 64));
    for (const GridFunction& g : test_family(B, grid, n_test, sub)) {
      Eigen::VectorXcd w = op.from_grid(g);
      double log_in = std::log(std::max(b_norm(g, b), 1e-300));
      double logacc = 0;
      auto run_steps = [&](int t) {
        for (int j = 0; j < t; ++j) {
          w = op.apply(w);
          double m0 = w.cwiseAbs().maxCoeff();
          if (m0 > 0 && (m0 > 1e6 || m0 < 1e-6)) {
            w /= m0;
            logacc += std::log(m0);
          }
        }
      };
      auto H = [&](int, int m) {
        bool hold = variation_hypothesis(B, op.to_grid(w), sigma, b, m);
        if (!hold) run_steps(m * led.n0);
        return hold;
      };
      SchedulePlan plan = schedule_plan(n_b, led.n0, A, b, H);
      if (!plan.triple.empty() && plan.triple.back())
        run_steps(3 * plan.m.back() * led.n0);
      double log_out =
          logacc + std::log(std::max(b_norm(op.to_grid(w), b), 1e-300));
      int used = std::max(plan.n_used, 1);
      worst_log = std::max(worst_log, (log_out - log_in) / used);
      worst_ratio = std::max(worst_ratio, std::exp(log_out - log_in));
      last_plan = std::move(plan);
    }
    row.gamma_fit = std::exp(worst_log);
    row.norm_ratio = worst_ratio;
    row.n_used = last_plan.n_used;
    row.plan = std::move(last_plan);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

/*------------------------------ resolvent norm ------------------------------*/

ResolventPoint resolvent_norm(const LedgerBundle& B, cplx s, int grid,
                              int n_test, uint64_t seed) {
  ResolventPoint rp;
  rp.b = s.imag();
  NormOp op = make_normop(B, s, grid);
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(op.op.M.nonZeros() + grid);
  for (int i = 0; i < op.op.M.outerSize(); ++i)
    for (Eigen::SparseMatrix<cplx, Eigen::RowMajor>::InnerIterator it(op.op.M, i);
         it; ++it)
      trip.emplace_back((int)it.row(), (int)it.col(),
                        -it.value() * op.f[it.col()] /
                            (op.f[it.row()] * op.lam));
  for (int i = 0; i < grid; ++i) trip.emplace_back(i, i, cplx(1, 0));
  Eigen::SparseMatrix<cplx> A(grid, grid);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success)
    throw NumericsError(
        "resolvent_norm: factorization failed, operator within roundoff of "
        "singular at this parameter");
  for (const GridFunction& g : test_family(B, grid, n_test, seed)) {
    Eigen::VectorXcd rhs = op.from_grid(g);
    Eigen::VectorXcd w = lu.solve(rhs);
    if (lu.info() != Eigen::Success)
      throw NumericsError("resolvent_norm: linear solve failed");
    double resid = (A * w - rhs).cwiseAbs().maxCoeff();
    rp.residual = std::max(rp.residual, resid);
    double wmax = w.cwiseAbs().maxCoeff();
    if (resid > 1e-6 * std::max(1.0, wmax))
      throw NumericsError(
          "resolvent_norm: ill-conditioned solve, condition estimate " +
          std::to_string(wmax / std::max(resid, 1e-300)));
    rp.norm_ratio =
        std::max(rp.norm_ratio, b_norm(op.to_grid(w), s.imag()) /
                                    std::max(b_norm(g, s.imag()), 1e-300));
  }
  return rp;
}

/*------------------------- structural sanity checks -------------------------*/

std::vector<PointBound> jump_bound_check(const LedgerBundle& B,
                                         const ConePair& pair,
                                         const DiscontinuityCatalog& cat,
                                         double slack) {
  std::vector<PointBound> out;
  const ConstantLedger& led = B.led;
  for (int j = led.k + 1; j <= (int)cat.by_depth.size(); ++j) {
    for (double x : cat.by_depth[j - 1]) {
      if (x <= B.map.Y.lo || x >= B.map.Y.hi) continue;
      PointBound pb;
      pb.x = x;
      pb.depth = j;
      pb.lhs = jump_at(pair.v, x);
      const Interval* atom = &B.map.Y;
      for (const Interval& p : B.atoms)
        if (p.contains(x)) {
          atom = &p;
          break;
        }
      double ratio = sup_real(pair.u, *atom) /
                     std::max(inf_real(pair.u, *atom), 1e-300);
      double ux = std::max(limsup_abs_at(pair.u, x), 1e-300);
      pb.rhs = slack * led.C7 * std::pow(led.rho, -(double)j) * ux *
               std::max(1.0, ratio / 4.0);
      pb.holds = pb.lhs <= pb.rhs;
      out.push_back(pb);
    }
  }
  return out;
}

ThirdsBalance thirds_balance_check(const LedgerBundle& B,
                                   const CancellationLayout& lay,
                                   const GridFunction& w, double M) {
  ThirdsBalance tb;
  tb.delta_pp = B.led.delta_p / (2.0 * std::max(M, 1.0));
  for (const TypedInterval& ti : lay.intervals) {
    Interval mid{ti.I.lo + ti.I.length() / 3.0,
                 ti.I.lo + 2.0 * ti.I.length() / 3.0};
    tb.int_I += integrate_real(w, mid);
  }
  tb.int_J = integrate_real(w, lay.atom);
  tb.ratio_cap =
      sup_real(w, lay.atom) / std::max(inf_real(w, lay.atom), 1e-300);
  tb.holds = tb.int_I >= tb.delta_pp * tb.int_J;
  return tb;
}

AffineDistance affine_distance_check(const LedgerBundle& B,
                                     const GridFunction& v, cplx s, int r,
                                     int grid) {
  AffineDistance ad;
  const ConstantLedger& led = B.led;
  NormOp op = make_normop(B, s, grid);
  GridFunction vg = v.n == grid
                        ? v
                        : GridFunction::sample(B.map.Y, grid,
                                               [&](double x) { return v.eval(x); });
  Eigen::VectorXcd w = op.from_grid(vg);
  for (int i = 0; i < r; ++i) w = op.apply(w);
  GridFunction gr = op.to_grid(w);
  double scale = std::pow(led.rho, -(double)r);
  ad.bound = 2.0 * led.C10 * scale * std::abs(s.imag()) * sup_abs(vg, B.map.Y);
  std::vector<Interval> P = partition_pk(
      B.map, B.catalog, std::min(r, (int)B.catalog.by_depth.size()));
  for (const Interval& p : P) {
    int parts = std::max(1, (int)std::floor(p.length() / scale));
    for (int q = 0; q < parts; ++q) {
      Interval piece{p.lo + q * p.length() / parts,
                     p.lo + (q + 1) * p.length() / parts};
      ++ad.pieces;
      cplx ga = gr.eval(piece.lo + 1e-12);
      cplx gb = gr.eval(piece.hi - 1e-12);
      int ia = gr.cell(piece.lo), ib = gr.cell(piece.hi - 1e-15);
      for (int i = ia; i <= ib; ++i) {
        double x = gr.mid(i);
        if (x <= piece.lo || x >= piece.hi) continue;
        double t = (x - piece.lo) / piece.length();
        ad.distance = std::max(ad.distance,
                               std::abs(gr.v[i] - (ga + (gb - ga) * t)));
      }
    }
  }
  ad.holds = ad.distance <= ad.bound;
  return ad;
}

PullbackMass pullback_mass_check(const LedgerBundle& B, const GridFunction& v,
                                 const Interval& I_r, int r, int grid) {
  const ConstantLedger& led = B.led;
  double leb = I_r.length();
  if (!(leb > 0))
    throw ConfigError("pullback_mass_check: empty target interval");
  int r_min = led.k1;
  double arg = 2.0 * led.K * (led.rho0 - 2.0) /
               (std::exp(led.C1) * led.rho0 * leb);
  if (arg > 1.0)
    r_min += (int)std::ceil(std::log(arg) / std::log(led.rho0 / 2.0));
  if (r < r_min)
    throw ConfigError("pullback_mass_check: depth " + std::to_string(r) +
                      " below the covering threshold " + std::to_string(r_min) +
                      " for an interval of this length");
  PullbackMass pm;
  double h = B.map.Y.length() / grid;
  double inside = 0, total = 0;
  for (int i = 0; i < grid; ++i) {
    double x = B.map.Y.lo + (i + 0.5) * h;
    double ax = std::abs(v.eval(x));
    total += ax * h;
    double y = x;
    bool ok = true;
    for (int t = 0; t < r; ++t) {
      int bi = B.map.branch_index(y);
      if (bi < 0) {
        ok = false;
        break;
      }
      y = B.map.apply(y);
    }
    if (ok && I_r.contains(y)) inside += ax * h;
  }
  pm.lhs = total;
  pm.rhs = led.K1 / leb * inside;
  pm.holds = pm.lhs <= pm.rhs;
  return pm;
}

/*----------------------------- cone test inputs -----------------------------*/

ConePair random_cone_pair(const LedgerBundle& B, double b, double sigma,
                          int grid, uint64_t seed) {
  Rng rng(substream_seed(seed, 0xc43eULL));
  double cu[3], du[3], ca[2], da[2], cp[2], dp[2];
  for (int j = 0; j < 3; ++j) {
    cu[j] = rng.sym();
    du[j] = rng.sym();
  }
  for (int j = 0; j < 2; ++j) {
    ca[j] = rng.sym();
    da[j] = rng.sym();
    cp[j] = rng.sym();
    dp[j] = rng.sym();
  }
  double len = B.map.Y.length();
  ConePair pair;
  pair.b = b;
  pair.sigma = sigma;
  for (int attempt = 0; attempt < 7; ++attempt) {
    double scale = std::pow(0.5, attempt);
    auto field = [&](double x, const double* c, const double* d, int m) {
      double t = 2.0 * M_PI * (x - B.map.Y.lo) / len, s = 0;
      for (int j = 0; j < m; ++j)
        s += (c[j] * std::cos((j + 1) * t) + d[j] * std::sin((j + 1) * t)) /
             sqr(j + 1.0);
      return s * scale;
    };
    pair.u = GridFunction::sample(B.map.Y, grid, [&](double x) {
      return cplx(std::exp(0.3 * field(x, cu, du, 3)), 0);
    });
    pair.v = GridFunction::sample(B.map.Y, grid, [&](double x) {
      double amp = 0.55 + 0.35 * std::sin(field(x, ca, da, 2) * 2.0);
      double ph = 2.5 * field(x, cp, dp, 2);
      return amp * std::exp(cplx(0, ph)) * std::exp(0.3 * field(x, cu, du, 3));
    });
    if (cone_check_pair(B, pair, B.catalog).ok) break;
  }
  return pair;
}

}  // namespace afuw
