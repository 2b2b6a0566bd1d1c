#include "interval_map.hpp"

#include <cassert>
#include <cstdio>
#include <set>

namespace afuw {

/*--------------------------------- Branch ----------------------------------*/

double Branch::invert(double x) const {
  if (inv) return inv(x);
  // Safeguarded Newton on the closure of dom; monotone branch.
  double lo = dom.lo, hi = dom.hi;
  bool inc = orientation > 0;
  double y = 0.5 * (lo + hi);
  for (int it = 0; it < 120; ++it) {
    double fy = f(y);
    if ((fy > x) == inc)
      hi = y;
    else
      lo = y;
    double dfy = df(y);
    double yn = (dfy != 0.0) ? y - (fy - x) / dfy : 0.5 * (lo + hi);
    if (!(yn > lo && yn < hi)) yn = 0.5 * (lo + hi);
    if (std::abs(yn - y) < 1e-15 || hi - lo < 1e-15) {
      y = yn;
      break;
    }
    y = yn;
  }
  return std::clamp(y, dom.lo, dom.hi);
}

double branch_invert_warm(const Branch& b, double x, double lo) {
  if (b.inv) return b.inv(x);
  double hi = b.dom.hi;
  double y = lo;
  for (int it = 0; it < 80; ++it) {
    double fy = b.f(y);
    if (fy > x)
      hi = y;
    else
      lo = y;
    double dfy = b.df(y);
    double yn = (dfy != 0.0) ? y - (fy - x) / dfy : 0.5 * (lo + hi);
    if (!(yn >= lo && yn <= hi)) yn = 0.5 * (lo + hi);
    if (std::abs(yn - y) < 1e-15 || hi - lo < 1e-15) return yn;
    y = yn;
  }
  return y;
}

/*--------------------------------- MapSpec ---------------------------------*/

int MapSpec::branch_index(double x) const {
  for (int i = 0; i < (int)branches.size(); ++i)
    if (branches[i].dom.contains(x)) return i;
  return -1;
}

double MapSpec::apply(double x) const {
  int i = branch_index(x);
  if (i < 0) throw NumericsError("apply: point outside branch domains");
  return branches[i].f(x);
}

double MapSpec::apply_left(double x) const {
  // Left-limit value: the branch whose closure touches x from the left.
  for (const Branch& b : branches)
    if (std::abs(b.dom.hi - x) < 1e-12 || (b.dom.contains(x) && x > b.dom.lo))
      return b.f(x);
  throw NumericsError("apply_left: no branch to the left");
}

double MapSpec::deriv(double x) const {
  int i = branch_index(x);
  if (i < 0) throw NumericsError("deriv: point outside branch domains");
  return branches[i].df(x);
}

std::vector<double> MapSpec::orbit(double x, int n) const {
  std::vector<double> o(n + 1);
  o[0] = x;
  for (int j = 0; j < n; ++j) o[j + 1] = apply(o[j]);
  return o;
}

/*------------------------------- RoofFunction ------------------------------*/

double RoofFunction::operator()(double x) const {
  switch (kind) {
    case Kind::Const:
      return c;
    case Kind::OnePlusXSq:
      return 1.0 + x * x;
    case Kind::Table: {
      auto it = std::upper_bound(tx.begin(), tx.end(), x);
      if (it == tx.begin()) return ty.front();
      if (it == tx.end()) return ty.back();
      std::size_t i = it - tx.begin();
      double t = (x - tx[i - 1]) / (tx[i] - tx[i - 1]);
      return ty[i - 1] + t * (ty[i] - ty[i - 1]);
    }
  }
  return c;
}

double RoofFunction::deriv(double x) const {
  switch (kind) {
    case Kind::Const:
      return 0.0;
    case Kind::OnePlusXSq:
      return 2.0 * x;
    case Kind::Table: {
      auto it = std::upper_bound(tx.begin(), tx.end(), x);
      if (it == tx.begin() || it == tx.end()) return 0.0;
      std::size_t i = it - tx.begin();
      return (ty[i] - ty[i - 1]) / (tx[i] - tx[i - 1]);
    }
  }
  return 0.0;
}

double RoofFunction::sup(const Interval& Y) const {
  switch (kind) {
    case Kind::Const:
      return c;
    case Kind::OnePlusXSq:
      return 1.0 + std::max(Y.lo * Y.lo, Y.hi * Y.hi);
    case Kind::Table:
      return *std::max_element(ty.begin(), ty.end());
  }
  return c;
}

double RoofFunction::inf(const Interval& Y) const {
  switch (kind) {
    case Kind::Const:
      return c;
    case Kind::OnePlusXSq:
      return (Y.lo <= 0 && Y.hi > 0) ? 1.0
                                     : 1.0 + std::min(Y.lo * Y.lo, Y.hi * Y.hi);
    case Kind::Table:
      return *std::min_element(ty.begin(), ty.end());
  }
  return c;
}

std::string RoofFunction::kind_name() const {
  switch (kind) {
    case Kind::Const:
      return "const";
    case Kind::OnePlusXSq:
      return "one_plus_x_sq";
    case Kind::Table:
      return "table";
  }
  return "?";
}

RoofFunction RoofFunction::constant(double value, double eps0) {
  if (value < 1.0) throw ConfigError("roof must satisfy phi >= 1");
  RoofFunction r;
  r.kind = Kind::Const;
  r.c = value;
  r.eps0 = eps0;
  return r;
}

RoofFunction RoofFunction::one_plus_x_sq(double eps0) {
  RoofFunction r;
  r.kind = Kind::OnePlusXSq;
  r.eps0 = eps0;
  return r;
}

RoofFunction RoofFunction::table(std::vector<double> x, std::vector<double> y,
                                 double eps0) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("roof table needs >= 2 matched points");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] <= x[i - 1]) throw ConfigError("roof table x not increasing");
  for (double v : y)
    if (v < 1.0) throw ConfigError("roof must satisfy phi >= 1");
  RoofFunction r;
  r.kind = Kind::Table;
  r.tx = std::move(x);
  r.ty = std::move(y);
  r.eps0 = eps0;
  return r;
}

/*----------------------------- sampled map stats ----------------------------*/

static void finalize_stats(MapSpec& m, int samples_per_branch = 65) {
  double rho0 = 1e300, c1 = 0.0, K = 1e300;
  for (const Branch& b : m.branches) {
    K = std::min(K, b.img.length());
    for (int i = 0; i <= samples_per_branch; ++i) {
      double t = (double)i / samples_per_branch;
      double x = b.dom.lo + t * (b.dom.hi - b.dom.lo);
      if (i == samples_per_branch) x = std::nexttoward(b.dom.hi, b.dom.lo);
      double d = std::abs(b.df(x));
      rho0 = std::min(rho0, d);
      c1 = std::max(c1, std::abs(b.d2f(x)) / (d * d));
    }
  }
  m.rho0 = rho0;
  m.adler_c1 = c1;
  m.K = K;
}

/*------------------------------- shifted beta -------------------------------*/

MapSpec make_shifted_beta(double beta, double alpha) {
  if (beta <= 1.0) throw ConfigError("shifted_beta: beta must exceed 1");
  if (alpha < 0.0 || alpha >= 1.0) throw ConfigError("shifted_beta: alpha in [0,1)");
  MapSpec m;
  m.family = "shifted_beta";
  char buf[96];
  std::snprintf(buf, sizeof buf, "x -> %.6g x + %.6g mod 1", beta, alpha);
  m.label = buf;
  m.Y = {0.0, 1.0};
  int jmax = (int)std::ceil(beta + alpha) - 1;
  std::vector<double> cuts{0.0};
  for (int j = 1; j <= jmax; ++j) cuts.push_back((j - alpha) / beta);
  cuts.push_back(1.0);
  for (int j = 0; j <= jmax; ++j) {
    Branch b;
    b.dom = {cuts[j], cuts[j + 1]};
    if (b.dom.length() < 1e-14) continue;
    double off = alpha - j;
    b.img = {beta * b.dom.lo + off, beta * b.dom.hi + off};
    b.img.lo = std::max(0.0, b.img.lo);
    b.img.hi = std::min(1.0, b.img.hi);
    b.orientation = +1;
    b.f = [beta, off](double x) { return beta * x + off; };
    b.df = [beta](double) { return beta; };
    b.d2f = [](double) { return 0.0; };
    b.inv = [beta, off](double x) { return (x - off) / beta; };
    m.branches.push_back(std::move(b));
  }
  finalize_stats(m);
  return m;
}

MapSpec make_doubling() {
  MapSpec m = make_shifted_beta(2.0, 0.0);
  m.family = "doubling";
  m.label = "x -> 2x mod 1";
  return m;
}

MapSpec make_golden() {
  MapSpec m = make_shifted_beta(0.5 * (1.0 + std::sqrt(5.0)), 0.0);
  m.family = "golden";
  m.label = "x -> golden-ratio x mod 1";
  return m;
}

/*----------------------- Manneville-Pomeau first return ---------------------*/

namespace {

struct MpBase {
  double alpha, gamma, pow2a;
  bool unit = false;  // alpha == 1: avoid pow in the hot chain
  double xa(double x) const { return unit ? x : std::pow(x, alpha); }
  double g(double x) const { return x * (1.0 + pow2a * xa(x)); }
  double dg(double x) const { return 1.0 + pow2a * (1.0 + alpha) * xa(x); }
  double d2g(double x) const {
    return unit ? 2.0 * pow2a
                : pow2a * (1.0 + alpha) * alpha * std::pow(x, alpha - 1.0);
  }
  // g^n with first and second derivatives by the chain rule.
  void gn(double x, int n, double* val, double* d, double* dd) const {
    double v = x, dv = 1.0, ddv = 0.0;
    for (int i = 0; i < n; ++i) {
      double gd = dg(v);
      if (dd) ddv = d2g(v) * dv * dv + gd * ddv;
      dv *= gd;
      v = g(v);
    }
    *val = v;
    if (d) *d = dv;
    if (dd) *dd = ddv;
  }
};

}  // namespace

MapSpec make_mp_first_return(double alpha, double gamma, const MpOptions& opt,
                             const RoofFunction* roof_for_tail) {
  if (alpha <= 0) throw ConfigError("mp_first_return: alpha must be positive");
  if (gamma <= 0.5 || gamma > 1.0)
    throw ConfigError("mp_first_return: gamma in (1/2, 1]");
  MpBase mp{alpha, gamma, std::pow(2.0, alpha), alpha == 1.0};

  // xi_0 = 1/2, xi_{n+1} = g^{-1}(xi_n); branch tau=n+1 has f(x) in [xi_n, xi_{n-1}).
  std::vector<double> xi{0.5};
  for (int n = 1; n < opt.t_max; ++n) {
    double prev = xi.back();
    double next = bisect([&](double z) { return mp.g(z); }, 0.0, 0.5, prev);
    xi.push_back(next);
  }

  MapSpec m;
  m.family = "mp_first_return";
  char buf[96];
  std::snprintf(buf, sizeof buf,
                "first return to [1/2,1) of the MP map (alpha=%.3g, gamma=%.3g)",
                alpha, gamma);
  m.label = buf;
  m.Y = {0.5, 1.0};

  auto x_of = [&](double z) { return 0.5 + z / (2.0 * gamma); };  // f(x)=z

  // tau = 1: f(x) = gamma(2x-1) already in [1/2, gamma).
  {
    Branch b;
    b.dom = {x_of(0.5), 1.0};
    b.img = {0.5, gamma};
    b.orientation = +1;
    b.return_time = 1;
    b.f = [gamma](double x) { return gamma * (2.0 * x - 1.0); };
    b.df = [gamma](double) { return 2.0 * gamma; };
    b.d2f = [](double) { return 0.0; };
    b.inv = [gamma](double y) { return 0.5 * (y / gamma + 1.0); };
    m.branches.push_back(std::move(b));
  }
  // tau = n+1: domain [x(xi_n), x(xi_{n-1})), F = g^n o f.
  for (int n = 1; n < opt.t_max; ++n) {
    Branch b;
    b.dom = {x_of(xi[n]), x_of(xi[n - 1])};
    b.img = {0.5, 1.0};
    b.orientation = +1;
    b.return_time = n + 1;
    b.f = [mp, gamma, n](double x) {
      double v;
      mp.gn(gamma * (2.0 * x - 1.0), n, &v, nullptr, nullptr);
      return v;
    };
    b.df = [mp, gamma, n](double x) {
      double v, d;
      mp.gn(gamma * (2.0 * x - 1.0), n, &v, &d, nullptr);
      return d * 2.0 * gamma;
    };
    b.d2f = [mp, gamma, n](double x) {
      double v, d, dd;
      mp.gn(gamma * (2.0 * x - 1.0), n, &v, &d, &dd);
      return dd * 4.0 * gamma * gamma;
    };
    m.branches.push_back(std::move(b));
  }
  std::sort(m.branches.begin(), m.branches.end(),
            [](const Branch& a, const Branch& b) { return a.dom.lo < b.dom.lo; });
  finalize_stats(m);

  // Dropped branches all have full image [1/2, 1), so the distortion bound
  // on their |h'|-sum is exp(C1) * mass / Leb(Y).
  m.dropped_mass = xi.back() / (2.0 * gamma);
  m.dropped_weight = std::exp(m.adler_c1) * m.dropped_mass / m.Y.length();
  double tail = m.dropped_weight;
  if (roof_for_tail)
    tail *= std::exp(roof_for_tail->eps0 * roof_for_tail->sup(m.Y));
  if (tail > opt.tail_tol) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "mp_first_return: truncation tail estimate %.3g exceeds "
                  "tolerance %.3g; raise t_max",
                  tail, opt.tail_tol);
    throw ConfigError(msg);
  }
  return m;
}

/*--------------------------------- map power --------------------------------*/

namespace {

struct CylNode {
  std::vector<int> word;
  Interval cyl;
  Interval img;
};

std::vector<CylNode> build_cylinders(const MapSpec& base, int depth,
                                     double budget) {
  for (const Branch& b : base.branches)
    if (b.orientation != +1)
      throw NumericsError("cylinder enumeration assumes increasing branches");
  std::vector<CylNode> level;
  for (int i = 0; i < (int)base.branches.size(); ++i)
    level.push_back({{i}, base.branches[i].dom, base.branches[i].img});
  double count = level.size();
  std::vector<double> hint;
  for (int d = 1; d < depth; ++d) {
    std::vector<CylNode> next;
    next.reserve(level.size() * 2);
    for (const CylNode& c : level) {
      // Extensions are processed in ascending branch order, so the values
      // pulled back through the parent word ascend; each level's previous
      // solution seeds the next solve.
      hint.assign(c.word.size(), -1e300);
      auto pull = [&](double v) {
        for (int j = (int)c.word.size() - 1; j >= 0; --j) {
          const Branch& br = base.branches[c.word[j]];
          v = branch_invert_warm(br, v, std::max(br.dom.lo, hint[j]));
          hint[j] = v;
        }
        return v;
      };
      for (int b = 0; b < (int)base.branches.size(); ++b) {
        if ((count += 1.0) > budget)
          throw BudgetError("cylinder enumeration over budget",
                            std::pow((double)base.branches.size(), depth));
        Interval J = intersect(c.img, base.branches[b].dom);
        if (J.length() < 1e-13) continue;
        CylNode n;
        n.word = c.word;
        n.word.push_back(b);
        n.cyl = intersect({pull(J.lo), pull(J.hi)}, c.cyl);
        if (n.cyl.length() < 1e-13) continue;
        n.img = {base.branches[b].f(J.lo), base.branches[b].f(J.hi)};
        next.push_back(std::move(n));
      }
    }
    level = std::move(next);
  }
  return level;
}

}  // namespace

Interval cylinder_of_word(const MapSpec& map, const std::vector<int>& word) {
  int n = (int)word.size();
  Interval A = map.branches[word[n - 1]].dom;
  for (int j = n - 2; j >= 0; --j) {
    const Branch& b = map.branches[word[j]];
    Interval J = intersect(A, b.img);
    if (J.empty()) return {0, 0};
    A = {b.invert(J.lo), b.invert(J.hi)};
    A = intersect(A, b.dom);
  }
  return A;
}

MapSpec map_power(const MapSpec& base, int m) {
  if (m <= 1) return base;
  auto cyls = build_cylinders(base, m, 8e6);
  MapSpec out;
  out.family = base.family;
  out.label = base.label + " (iterate " + std::to_string(m * base.power) + ")";
  out.Y = base.Y;
  out.power = base.power * m;
  for (const CylNode& c : cyls) {
    Branch nb;
    nb.dom = c.cyl;
    nb.img = c.img;
    nb.orientation = +1;
    std::vector<Branch> chain;
    int rt = 0;
    for (int idx : c.word) {
      chain.push_back(base.branches[idx]);
      rt += base.branches[idx].return_time;
    }
    nb.return_time = rt;
    nb.f = [chain](double y) {
      double v = y;
      for (const Branch& b : chain) v = b.f(v);
      return v;
    };
    nb.df = [chain](double y) {
      double v = y, d = 1.0;
      for (const Branch& b : chain) {
        d *= b.df(v);
        v = b.f(v);
      }
      return d;
    };
    nb.d2f = [chain](double y) {
      double v = y, d = 1.0, dd = 0.0;
      for (const Branch& b : chain) {
        double bd = b.df(v);
        dd = b.d2f(v) * d * d + bd * dd;
        d *= bd;
        v = b.f(v);
      }
      return dd;
    };
    bool analytic = std::all_of(chain.begin(), chain.end(),
                                [](const Branch& b) { return (bool)b.inv; });
    if (analytic)
      nb.inv = [chain](double x) {
        double v = x;
        for (auto it = chain.rbegin(); it != chain.rend(); ++it)
          v = it->invert(v);
        return v;
      };
    nb.stages = [chain](double y, std::vector<double>& pts,
                        std::vector<double>& dvs) {
      pts.clear();
      dvs.clear();
      std::vector<double> sp, sd;
      double v = y, d = 1.0;
      for (const Branch& b : chain) {
        if (b.stages) {
          b.stages(v, sp, sd);
          for (size_t i = 0; i < sp.size(); ++i) {
            pts.push_back(sp[i]);
            dvs.push_back(d * sd[i]);
          }
        } else {
          pts.push_back(v);
          dvs.push_back(d);
        }
        d *= b.df(v);
        v = b.f(v);
      }
    };
    out.branches.push_back(std::move(nb));
  }
  std::sort(out.branches.begin(), out.branches.end(),
            [](const Branch& a, const Branch& b) { return a.dom.lo < b.dom.lo; });
  finalize_stats(out);
  double covered = 0;
  for (const Branch& b : out.branches) covered += b.dom.length();
  out.dropped_mass = std::max(0.0, out.Y.length() - covered);
  out.dropped_weight = std::exp(out.adler_c1) * out.dropped_mass / out.K;
  return out;
}

std::pair<MapSpec, int> ensure_expansion(const MapSpec& base) {
  const double bound = std::pow(2.0, 4.0 / 3.0);
  if (base.rho0 > bound) return {base, 1};
  for (int m = 2; m <= 6; ++m) {
    MapSpec p = map_power(base, m);
    if (p.rho0 > bound) return {std::move(p), m};
  }
  throw NumericsError("ensure_expansion: no iterate up to 6 reaches rho0 > 2^{4/3}");
}

double roof_step(const Branch& b, const RoofFunction& roof, double y,
                 double* dphi) {
  if (!b.stages) {
    if (dphi) *dphi = roof.deriv(y);
    return roof(y);
  }
  thread_local std::vector<double> pts, dvs;
  b.stages(y, pts, dvs);
  double phi = 0, dp = 0;
  for (size_t j = 0; j < pts.size(); ++j) {
    phi += roof(pts[j]);
    if (dphi) dp += roof.deriv(pts[j]) * dvs[j];
  }
  if (dphi) *dphi = dp;
  return phi;
}

/*---------------------------- preimage recursion ----------------------------*/

void for_each_preimage(const MapSpec& map, const RoofFunction& roof, int n,
                       double x, bool want_dphi,
                       const std::function<void(const InverseLeaf&)>& cb,
                       double budget) {
  std::vector<double> z(n);
  std::vector<int> w(n);
  double count = 0;
  std::function<void(int, double)> rec = [&](int j, double t) {
    for (int b = 0; b < (int)map.branches.size(); ++b) {
      const Branch& br = map.branches[b];
      if (!br.img.contains(t)) continue;
      if (++count > budget)
        throw BudgetError("preimage recursion over budget",
                          std::pow((double)map.branches.size(), n));
      double zz = br.invert(t);
      w[j] = b;
      z[j] = zz;
      if (j == 0) {
        InverseLeaf leaf;
        leaf.word = &w;
        leaf.y = z[0];
        double hp = 1.0, phi = 0.0;
        for (int i = 0; i < n; ++i) {
          hp /= std::abs(map.branches[w[i]].df(z[i]));
          phi += roof_step(map.branches[w[i]], roof, z[i]);
        }
        leaf.hprime = hp;
        leaf.phi_n = phi;
        if (want_dphi) {
          double slope = 1.0, dphi = 0.0, dstep = 0.0;
          for (int i = n - 1; i >= 0; --i) {
            slope /= map.branches[w[i]].df(z[i]);
            roof_step(map.branches[w[i]], roof, z[i], &dstep);
            dphi += dstep * slope;
          }
          leaf.dphi_n = dphi;
        }
        cb(leaf);
      } else {
        rec(j - 1, zz);
      }
    }
  };
  rec(n - 1, x);
}

std::vector<InverseBranch> enumerate_branches(const MapSpec& map, int n,
                                              double budget) {
  auto cyls = build_cylinders(map, n, budget);
  std::vector<InverseBranch> out;
  out.reserve(cyls.size());
  for (auto& c : cyls) out.push_back({std::move(c.word), c.img, c.cyl});
  std::sort(out.begin(), out.end(), [](const InverseBranch& a,
                                       const InverseBranch& b) {
    return a.cyl.lo < b.cyl.lo;
  });
  return out;
}

InverseLeaf eval_branch(const MapSpec& map, const RoofFunction& roof,
                        const InverseBranch& h, double x, bool want_dphi,
                        std::vector<double>* orbit) {
  int n = (int)h.word.size();
  std::vector<double> z(n);
  double t = x;
  for (int j = n - 1; j >= 0; --j) {
    z[j] = map.branches[h.word[j]].invert(t);
    t = z[j];
  }
  InverseLeaf leaf;
  leaf.y = z[0];
  double hp = 1.0, phi = 0.0;
  for (int i = 0; i < n; ++i) {
    hp /= std::abs(map.branches[h.word[i]].df(z[i]));
    phi += roof_step(map.branches[h.word[i]], roof, z[i]);
  }
  leaf.hprime = hp;
  leaf.phi_n = phi;
  if (want_dphi) {
    double slope = 1.0, dphi = 0.0, dstep = 0.0;
    for (int i = n - 1; i >= 0; --i) {
      slope /= map.branches[h.word[i]].df(z[i]);
      roof_step(map.branches[h.word[i]], roof, z[i], &dstep);
      dphi += dstep * slope;
    }
    leaf.dphi_n = dphi;
  }
  if (orbit) *orbit = std::move(z);
  return leaf;
}

/*----------------------------- discontinuities ------------------------------*/

namespace {

void insert_pt(std::vector<double>& v, double x, double tol = 1e-11) {
  for (double y : v)
    if (std::abs(y - x) < tol) return;
  v.push_back(x);
}

}  // namespace

DiscontinuityCatalog build_catalog(const MapSpec& map, int depth) {
  DiscontinuityCatalog cat;
  cat.by_depth.resize(depth);
  std::vector<double>& x1 = cat.by_depth[0];
  for (const Branch& b : map.branches) {
    insert_pt(x1, b.img.lo);
    insert_pt(x1, b.img.hi);
  }
  std::sort(x1.begin(), x1.end());
  cat.n1 = (int)x1.size();

  for (int j = 1; j < depth; ++j) {
    std::vector<double>& cur = cat.by_depth[j];
    for (double x : cat.by_depth[j - 1]) {
      bool on_boundary = std::abs(x - map.Y.hi) < 1e-12;
      for (const Branch& b : map.branches) {
        if (std::abs(x - b.dom.lo) < 1e-12 || std::abs(x - b.dom.hi) < 1e-12)
          on_boundary = true;
      }
      int bi = map.branch_index(x);
      if (bi >= 0) insert_pt(cur, map.branches[bi].f(x));
      if (on_boundary) {
        // also take the left-limit image when a branch closure ends at x
        for (const Branch& b : map.branches)
          if (std::abs(b.dom.hi - x) < 1e-12) insert_pt(cur, b.f(x));
      }
    }
    std::sort(cur.begin(), cur.end());
  }
  return cat;
}

std::vector<std::pair<double, int>> DiscontinuityCatalog::interior_points(
    const Interval& Y) const {
  std::vector<std::pair<double, int>> out;
  for (int j = 0; j < (int)by_depth.size(); ++j)
    for (double x : by_depth[j])
      if (x > Y.lo + 1e-12 && x < Y.hi - 1e-12) out.push_back({x, j + 1});
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Interval> partition_pk(const MapSpec& map,
                                   const DiscontinuityCatalog& cat, int k) {
  std::vector<double> cuts{map.Y.lo, map.Y.hi};
  int depth = std::min<int>(k, (int)cat.by_depth.size());
  for (int j = 0; j < depth; ++j)
    for (double x : cat.by_depth[j])
      if (x > map.Y.lo + 1e-11 && x < map.Y.hi - 1e-11) insert_pt(cuts, x);
  std::sort(cuts.begin(), cuts.end());
  std::vector<Interval> atoms;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] - cuts[i] > 1e-11) atoms.push_back({cuts[i], cuts[i + 1]});
  return atoms;
}

/*---------------------------- geometric constants ---------------------------*/

namespace {

// Union-of-intervals image under one application of the map.
std::vector<Interval> apply_to_set(const MapSpec& map,
                                   const std::vector<Interval>& set) {
  std::vector<Interval> img;
  for (const Interval& s : set) {
    for (const Branch& b : map.branches) {
      Interval piece = intersect(s, b.dom);
      if (piece.length() < 1e-14) continue;
      double a = b.f(piece.lo), c = b.f(piece.hi);
      if (a > c) std::swap(a, c);
      img.push_back({a, c});
    }
  }
  std::sort(img.begin(), img.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const Interval& s : img) {
    if (!merged.empty() && s.lo <= merged.back().hi + 1e-12)
      merged.back().hi = std::max(merged.back().hi, s.hi);
    else
      merged.push_back(s);
  }
  return merged;
}

bool covers(const std::vector<Interval>& set, const Interval& Y) {
  double cursor = Y.lo;
  for (const Interval& s : set) {
    if (s.lo > cursor + 1e-10) return false;
    cursor = std::max(cursor, s.hi);
    if (cursor >= Y.hi - 1e-10) return true;
  }
  return cursor >= Y.hi - 1e-10;
}

}  // namespace

int mixing_time(const MapSpec& map, double delta0, int cap) {
  if (delta0 <= 0) throw NumericsError("mixing_time: delta0 must be positive");
  double span = map.Y.length() - delta0;
  int nwin = std::min(512, std::max(1, (int)std::ceil(span / (delta0 / 4))));
  int worst = 0;
  for (int wi = 0; wi <= nwin; ++wi) {
    double a = map.Y.lo + span * wi / nwin;
    // windows quantify over the domain of definition: clip away domain gaps
    std::vector<Interval> set;
    for (const Branch& b : map.branches) {
      Interval piece = intersect({a, a + delta0}, b.dom);
      if (piece.length() >= 1e-14) set.push_back(piece);
    }
    if (set.empty()) continue;
    int k = 0;
    while (!covers(set, map.Y)) {
      if (++k > cap || set.empty()) return 0;
      set = apply_to_set(map, set);
    }
    worst = std::max(worst, k);
  }
  return worst;
}

GeometricConstants geometric_constants(const MapSpec& map, int k1_cap) {
  GeometricConstants g;
  auto [work, m] = ensure_expansion(map);
  g.iterate = m;
  g.rho0 = work.rho0;
  g.rho = std::pow(work.rho0, 0.25);
  g.C1 = work.adler_c1;
  g.K = work.K;
  g.delta0 = g.K * (g.rho0 - 2.0) / (5.0 * std::exp(g.C1) * g.rho0);
  if (g.delta0 <= 0)
    throw NumericsError("geometric_constants: delta0 <= 0 after iterate");
  g.k1 = mixing_time(work, g.delta0, k1_cap);
  auto cat = build_catalog(work, 1);
  g.N1 = cat.n1;
  return g;
}

RoofConstants roof_constants(const MapSpec& map, const RoofFunction& roof,
                             int grid) {
  RoofConstants rc;
  std::vector<double> xs;
  for (int i = 0; i < grid; ++i)
    xs.push_back(map.Y.lo + (i + 0.5) * map.Y.length() / grid);
  for (const Branch& b : map.branches) {
    xs.push_back(std::max(map.Y.lo, b.img.lo + 1e-12));
    xs.push_back(std::min(b.img.hi - 1e-12, map.Y.hi - 1e-12));
  }
  double C2 = 0, C3 = 0;
  for (double x : xs) {
    if (!map.Y.contains(x)) continue;
    double sum = 0;
    for_each_preimage(map, roof, 1, x, true, [&](const InverseLeaf& leaf) {
      C2 = std::max(C2, std::abs(leaf.dphi_n));
      sum += leaf.hprime * std::exp(roof.eps0 * leaf.phi_n);
    });
    C3 = std::max(C3, sum);
  }
  rc.C2 = C2;
  rc.C2p = C2 * map.rho0 / (map.rho0 - 1.0);
  rc.C3 = C3;
  return rc;
}

}  // namespace afuw
