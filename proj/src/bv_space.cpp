#include "bv_space.hpp"

namespace afuw {

GridFunction GridFunction::constant(const Interval& Y, int n, cplx c) {
  GridFunction g;
  g.lo = Y.lo;
  g.hi = Y.hi;
  g.n = n;
  g.v.assign(n, c);
  return g;
}

GridFunction GridFunction::sample(const Interval& Y, int n,
                                  const std::function<cplx(double)>& f) {
  GridFunction g;
  g.lo = Y.lo;
  g.hi = Y.hi;
  g.n = n;
  g.v.resize(n);
  for (int i = 0; i < n; ++i) g.v[i] = f(g.mid(i));
  return g;
}

/*--------------------------------- norms ------------------------------------*/

namespace {

// Cell range [i0, i1] whose cells meet the open interior of I.
bool cell_range(const GridFunction& g, const Interval& I, int* i0, int* i1) {
  double a = std::max(I.lo, g.lo), b = std::min(I.hi, g.hi);
  if (b - a <= 1e-15) return false;
  double h = g.h();
  *i0 = std::clamp((int)std::floor((a - g.lo) / h + 1e-12), 0, g.n - 1);
  *i1 = std::clamp((int)std::ceil((b - g.lo) / h - 1e-12) - 1, 0, g.n - 1);
  return *i1 >= *i0;
}

}  // namespace

double var(const GridFunction& g, const Interval& I) {
  int i0, i1;
  if (!cell_range(g, I, &i0, &i1)) return 0.0;
  double s = 0;
  for (int i = i0; i < i1; ++i) s += std::abs(g.v[i + 1] - g.v[i]);
  return s;
}

double var(const GridFunction& g) { return var(g, {g.lo, g.hi}); }

double osc(const GridFunction& g, const Interval& I) {
  int i0, i1;
  if (!cell_range(g, I, &i0, &i1)) return 0.0;
  constexpr int D = 16;
  double mx[D], mn[D];
  for (int d = 0; d < D; ++d) {
    mx[d] = -1e300;
    mn[d] = 1e300;
  }
  for (int i = i0; i <= i1; ++i) {
    double re = g.v[i].real(), im = g.v[i].imag();
    for (int d = 0; d < D; ++d) {
      double th = M_PI * d / D;
      double p = re * std::cos(th) + im * std::sin(th);
      mx[d] = std::max(mx[d], p);
      mn[d] = std::min(mn[d], p);
    }
  }
  double best = 0;
  for (int d = 0; d < D; ++d) best = std::max(best, mx[d] - mn[d]);
  return best;
}

double l1_norm(const GridFunction& g) {
  double s = 0;
  for (const cplx& z : g.v) s += std::abs(z);
  return s * g.h();
}

double sup_abs(const GridFunction& g, const Interval& I) {
  int i0, i1;
  if (!cell_range(g, I, &i0, &i1)) return 0.0;
  double s = 0;
  for (int i = i0; i <= i1; ++i) s = std::max(s, std::abs(g.v[i]));
  return s;
}

double inf_abs(const GridFunction& g, const Interval& I) {
  int i0, i1;
  if (!cell_range(g, I, &i0, &i1)) return 0.0;
  double s = 1e300;
  for (int i = i0; i <= i1; ++i) s = std::min(s, std::abs(g.v[i]));
  return s;
}

double sup_real(const GridFunction& g, const Interval& I) {
  int i0, i1;
  if (!cell_range(g, I, &i0, &i1)) return 0.0;
  double s = -1e300;
  for (int i = i0; i <= i1; ++i) s = std::max(s, g.v[i].real());
  return s;
}

double inf_real(const GridFunction& g, const Interval& I) {
  int i0, i1;
  if (!cell_range(g, I, &i0, &i1)) return 0.0;
  double s = 1e300;
  for (int i = i0; i <= i1; ++i) s = std::min(s, g.v[i].real());
  return s;
}

double jump_at(const GridFunction& g, double x) {
  double h = g.h();
  double t = (x - g.lo) / h;
  int boundary = (int)std::llround(t);
  if (std::abs(t - boundary) > 1e-6) return 0.0;  // interior to a cell
  if (boundary <= 0 || boundary >= g.n) return 0.0;
  return std::abs(g.v[boundary] - g.v[boundary - 1]);
}

double limsup_abs_at(const GridFunction& g, double x) {
  double h = g.h();
  double t = (x - g.lo) / h;
  int boundary = (int)std::llround(t);
  if (std::abs(t - boundary) <= 1e-6) {
    double s = 0;
    if (boundary > 0) s = std::max(s, std::abs(g.v[boundary - 1]));
    if (boundary < g.n) s = std::max(s, std::abs(g.v[boundary]));
    return s;
  }
  return std::abs(g.v[g.cell(x)]);
}

namespace {

// Sliding max of p over windows [c-m, c+m] clipped to [0, n); monotone deque.
void sliding_max(const std::vector<double>& p, int m, std::vector<double>* out) {
  int n = (int)p.size();
  std::vector<int> dq(n);
  int head = 0, tail = 0, r = 0;
  for (int c = 0; c < n; ++c) {
    for (int stop = std::min(n - 1, c + m); r <= stop; ++r) {
      while (tail > head && p[dq[tail - 1]] <= p[r]) --tail;
      dq[tail++] = r;
    }
    while (dq[head] < c - m) ++head;
    (*out)[c] = p[dq[head]];
  }
}

}  // namespace

double keller_var(const GridFunction& g) {
  constexpr int D = 16;
  double h = g.h();
  // Per-direction projections once; window extrema by sliding deque per
  // radius. Matches osc() cell for cell.
  std::vector<std::vector<double>> proj(2 * D, std::vector<double>(g.n));
  for (int d = 0; d < D; ++d) {
    double th = M_PI * d / D;
    double ct = std::cos(th), st = std::sin(th);
    for (int i = 0; i < g.n; ++i) {
      double p = g.v[i].real() * ct + g.v[i].imag() * st;
      proj[d][i] = p;
      proj[D + d][i] = -p;
    }
  }
  std::vector<double> wmax(g.n), wmin(g.n), oscs(g.n);
  double best = 0;
  for (double kappa = h; kappa <= 0.5 * (g.hi - g.lo) + 1e-15; kappa *= 2) {
    int m = (int)std::floor(kappa / h + 0.5 - 1e-9);  // cells reached each side
    std::fill(oscs.begin(), oscs.end(), 0.0);
    for (int d = 0; d < D; ++d) {
      sliding_max(proj[d], m, &wmax);
      sliding_max(proj[D + d], m, &wmin);
      for (int c = 0; c < g.n; ++c)
        oscs[c] = std::max(oscs[c], wmax[c] + wmin[c]);
    }
    double integral = 0;
    for (int c = 0; c < g.n; ++c) integral += oscs[c] * h;
    best = std::max(best, integral / kappa);
  }
  return best;
}

double b_norm(const GridFunction& g, double b) {
  return var(g) / (1.0 + std::abs(b)) + l1_norm(g);
}

/*------------------------------ cone membership -----------------------------*/

ExtraTerm extra_term(const GridFunction& u, const Interval& I,
                     const std::vector<std::pair<double, int>>& marked, int k,
                     double rho, int jmax_built, int n1) {
  ExtraTerm e;
  for (const auto& [x, depth] : marked) {
    if (depth <= k) continue;
    if (x <= I.lo + 1e-12 || x >= I.hi - 1e-12) continue;
    e.value += std::pow(rho, -depth) * limsup_abs_at(u, x);
  }
  double supu = sup_abs(u, {u.lo, u.hi});
  for (int j = std::max(jmax_built, k) + 1; j <= jmax_built + 400; ++j) {
    double t = (double)j * n1 * std::pow(rho, -j) * supu;
    e.remainder += t;
    if (t < 1e-300) break;
  }
  return e;
}

ConeReport cone_check(const GridFunction& u, const GridFunction& vf,
                      const std::vector<std::pair<double, int>>& marked,
                      const std::vector<Interval>& test_intervals,
                      const ConeParams& p) {
  ConeReport r;
  r.min_u = inf_real(u, {u.lo, u.hi});

  double scale = std::max(sup_abs(u, {u.lo, u.hi}), 1e-300);
  double dmar = 1e300;
  for (int i = 0; i < u.n; ++i)
    dmar = std::min(dmar, (u.v[i].real() - std::abs(vf.v[i])) / scale);
  r.dominance_margin = dmar;

  // Group marked points sharing a location; the jump constraint applies only
  // when every depth tag there exceeds k, with allowances summed over tags.
  std::vector<std::pair<double, int>> pts = marked;
  std::sort(pts.begin(), pts.end());
  double smar = 1e300;
  std::size_t i = 0;
  while (i < pts.size()) {
    std::size_t j = i;
    double allow = 0;
    bool active = true;
    while (j < pts.size() && pts[j].first - pts[i].first < 1e-10) {
      if (pts[j].second <= p.k) active = false;
      allow += std::pow(p.rho, -pts[j].second);
      ++j;
    }
    if (active) {
      double x = pts[i].first;
      double a = p.C7 * allow * limsup_abs_at(u, x);
      double actual = jump_at(vf, x);
      smar = std::min(smar, (a - actual) / std::max(a, 1e-300));
      ++r.size_checked;
    }
    i = j;
  }
  r.size_margin = (r.size_checked > 0) ? smar : 1.0;

  double omar = 1e300;
  for (const Interval& I : test_intervals) {
    if (I.length() < 1e-13) continue;
    ExtraTerm e = extra_term(u, I, marked, p.k, p.rho, p.jmax_built, p.n1);
    double a = p.C10 * std::abs(p.b) * I.length() * sup_abs(u, I) +
               p.C8 * e.value;
    double actual = osc(vf, I);
    omar = std::min(omar, (a - actual) / std::max(a, 1e-300));
    ++r.osc_checked;
  }
  r.osc_margin = (r.osc_checked > 0) ? omar : 1.0;

  r.ok = r.min_u > 0 && r.dominance_margin > -1e-9 && r.size_margin > -1e-9 &&
         r.osc_margin > -1e-9;
  return r;
}

}  // namespace afuw
