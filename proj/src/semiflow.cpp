#include "semiflow.hpp"

#include <algorithm>
#include <numeric>

namespace afuw {

namespace {

// Advance without throwing; false when the orbit hits a domain gap.
bool advance(const MapSpec& map, const RoofFunction& roof, double& y, double& u,
             double t) {
  u += t;
  for (;;) {
    int bi = map.branch_index(y);
    if (bi < 0) return false;
    double ph = roof_step(map.branches[bi], roof, y);
    if (u < ph) return true;
    u -= ph;
    y = map.apply(y);
  }
}

}  // namespace

FlowPoint flow_advance(const MapSpec& map, const RoofFunction& roof, double y,
                       double u, double t) {
  if (t < 0) throw ConfigError("flow_advance: negative time");
  if (!advance(map, roof, y, u, t))
    throw NumericsError("flow_advance: orbit leaves the branch domains");
  return {y, u};
}

CorrelationReport flow_correlation(
    const MapSpec& map, const RoofFunction& roof, const SpectralData& sd,
    const std::function<double(double, double)>& A,
    const std::function<double(double, double)>& B,
    const std::vector<double>& t_list, long long n_samples, uint64_t seed) {
  CorrelationReport rep;
  if (t_list.empty() || n_samples <= 0) return rep;
  std::vector<double> ts = t_list;
  std::sort(ts.begin(), ts.end());
  const int nt = (int)ts.size();
  if (ts.front() < 0) throw ConfigError("flow_correlation: negative time");

  // proposal cap for density-weighted rejection, with a safety margin
  const int probe = 4096;
  double cap = 0, phi_num = 0;
  for (int i = 0; i < probe; ++i) {
    double y = map.Y.lo + (i + 0.5) * map.Y.length() / probe;
    int bi = map.branch_index(y);
    if (bi < 0) continue;
    double w = sd.f.eval(y).real() * roof_step(map.branches[bi], roof, y);
    cap = std::max(cap, w);
    phi_num += w * map.Y.length() / probe;
  }
  cap *= 1.10;
  rep.phi_bar = phi_num;  // f integrates to one
  if (!(cap > 0)) throw NumericsError("flow_correlation: degenerate density");

  const int nb = (int)std::clamp((long long)std::sqrt((double)n_samples), 8LL,
                                 1024LL);
  std::vector<double> sum_ab((size_t)nb * nt, 0.0), sum_bt((size_t)nb * nt, 0.0);
  std::vector<double> sum_a(nb, 0.0), count(nb, 0.0);

  std::uint64_t st = substream_seed(seed, 0xf10eULL);
  auto u01 = [&]() {
    st = splitmix64(st);
    return (st >> 11) * 0x1.0p-53;
  };

  std::vector<double> bt(nt);
  for (long long i = 0; i < n_samples; ++i) {
    // base point by rejection against f * phi, height uniform under the roof
    double y = 0, ph = 0;
    for (;;) {
      y = map.Y.lo + u01() * map.Y.length();
      int bi = map.branch_index(y);
      if (bi < 0) continue;
      ph = roof_step(map.branches[bi], roof, y);
      if (u01() * cap <= sd.f.eval(y).real() * ph) break;
    }
    double u = u01() * ph;
    double a0 = A(y, u);

    double cy = y, cu = u, done = 0;
    bool ok = true;
    for (int j = 0; j < nt; ++j) {
      if (!advance(map, roof, cy, cu, ts[j] - done)) {
        ok = false;
        break;
      }
      done = ts[j];
      bt[j] = B(cy, cu);
    }
    if (!ok) {
      ++rep.escaped;
      continue;
    }
    int batch = (int)((i * (long long)nb) / n_samples);
    count[batch] += 1;
    sum_a[batch] += a0;
    for (int j = 0; j < nt; ++j) {
      sum_ab[(size_t)batch * nt + j] += a0 * bt[j];
      sum_bt[(size_t)batch * nt + j] += bt[j];
    }
  }

  double tot = std::accumulate(count.begin(), count.end(), 0.0);
  if (tot <= 0) throw NumericsError("flow_correlation: every sample escaped");
  rep.samples = (long long)tot;
  rep.mean_a = std::accumulate(sum_a.begin(), sum_a.end(), 0.0) / tot;
  double mb = 0;
  for (int j = 0; j < nt; ++j)
    for (int q = 0; q < nb; ++q) mb += sum_bt[(size_t)q * nt + j];
  rep.mean_b = mb / (tot * nt);

  for (int j = 0; j < nt; ++j) {
    // per-batch covariance estimates; their spread gives the error bar
    double m1 = 0, m2 = 0;
    int used = 0;
    std::vector<double> cj;
    cj.reserve(nb);
    for (int q = 0; q < nb; ++q) {
      if (count[q] < 2) continue;
      double ma = sum_a[q] / count[q];
      double mbt = sum_bt[(size_t)q * nt + j] / count[q];
      double mab = sum_ab[(size_t)q * nt + j] / count[q];
      cj.push_back(mab - ma * mbt);
      ++used;
    }
    for (double c : cj) m1 += c;
    m1 /= std::max(used, 1);
    for (double c : cj) m2 += sqr(c - m1);
    CorrelationPoint pt;
    pt.t = ts[j];
    pt.rho = m1;
    pt.se = used > 1 ? std::sqrt(m2 / (used - 1.0) / used) : 0.0;
    rep.pts.push_back(pt);
  }
  return rep;
}

ExpFit fit_exponential(const CorrelationReport& rep, double noise_mult) {
  ExpFit fit;
  std::vector<double> xs, ys;
  for (const CorrelationPoint& p : rep.pts) {
    double floor = noise_mult * p.se;
    if (std::abs(p.rho) > floor && std::abs(p.rho) > 0) {
      xs.push_back(p.t);
      ys.push_back(std::log(std::abs(p.rho)));
    }
  }
  fit.n_points = (int)xs.size();
  fit.conclusive = fit.n_points >= 8;
  size_t n = xs.size();
  if (n >= 2) {
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
      sxx += sqr(xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    double slope = sxx > 0 ? sxy / sxx : 0;
    fit.intercept = my - slope * mx;
    fit.a1 = -slope;
    double rss = 0;
    for (size_t i = 0; i < n; ++i)
      rss += sqr(ys[i] - (fit.intercept + slope * xs[i]));
    double se = n > 2 && sxx > 0 ? std::sqrt(rss / (n - 2.0) / sxx) : 0;
    fit.ci_lo = fit.a1 - 1.96 * se;
    fit.ci_hi = fit.a1 + 1.96 * se;
  }
  if (n >= 4) {
    // quadratic refit for curvature, solved from the 3x3 normal equations
    double S[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double R[3] = {0, 0, 0};
    for (size_t i = 0; i < n; ++i) {
      double p[3] = {1.0, xs[i], xs[i] * xs[i]};
      for (int r = 0; r < 3; ++r) {
        R[r] += p[r] * ys[i];
        for (int c = 0; c < 3; ++c) S[r][c] += p[r] * p[c];
      }
    }
    double inv22 = 0;
    double coef[3] = {0, 0, 0};
    {
      double M[3][4];
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) M[r][c] = S[r][c];
        M[r][3] = R[r];
      }
      // track the (2,2) entry of the inverse through the same elimination
      double E[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
      bool singular = false;
      for (int col = 0; col < 3 && !singular; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
          if (std::abs(M[r][col]) > std::abs(M[piv][col])) piv = r;
        if (std::abs(M[piv][col]) < 1e-300) {
          singular = true;
          break;
        }
        std::swap(M[piv], M[col]);
        std::swap(E[piv], E[col]);
        double d = M[col][col];
        for (int c = 0; c < 4; ++c) M[col][c] /= d;
        for (int c = 0; c < 3; ++c) E[col][c] /= d;
        for (int r = 0; r < 3; ++r) {
          if (r == col) continue;
          double f = M[r][col];
          for (int c = 0; c < 4; ++c) M[r][c] -= f * M[col][c];
          for (int c = 0; c < 3; ++c) E[r][c] -= f * E[col][c];
        }
      }
      if (!singular) {
        for (int r = 0; r < 3; ++r) coef[r] = M[r][3];
        inv22 = E[2][2];
      }
    }
    fit.curvature = coef[2];
    double rss = 0;
    for (size_t i = 0; i < n; ++i)
      rss += sqr(ys[i] - (coef[0] + coef[1] * xs[i] + coef[2] * xs[i] * xs[i]));
    if (n > 3 && inv22 > 0)
      fit.curvature_se = std::sqrt(rss / (n - 3.0) * inv22);
  }
  return fit;
}

double ks_statistic(std::vector<double> xs, std::vector<double> ys) {
  if (xs.empty() || ys.empty())
    throw ConfigError("ks_statistic: empty sample");
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  size_t i = 0, j = 0;
  double worst = 0;
  while (i < xs.size() && j < ys.size()) {
    if (xs[i] <= ys[j])
      ++i;
    else
      ++j;
    worst = std::max(worst, std::abs((double)i / xs.size() -
                                     (double)j / ys.size()));
  }
  return worst;
}

}  // namespace afuw
