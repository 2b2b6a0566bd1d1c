#include "src/config.hpp"
#include "src/report.hpp"
#include "src/semiflow.hpp"

#include <CLI11.hpp>

#include <cstdio>

using namespace afuw;

namespace {

struct Common {
  std::string config_path;
  std::string out_dir = "out";
  int threads = 0;
  uint64_t seed = 0x5eed0001ULL;
  int grid = 0;  // 0 keeps the per-command default
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key=value config file");
  cmd->add_option("--out", c.out_dir, "output directory");
  cmd->add_option("--threads", c.threads, "worker threads, 0 = host default");
  cmd->add_option("--seed", c.seed, "64-bit rng seed");
  cmd->add_option("--grid", c.grid, "resolution override for this command");
}

int fail(const char* check) {
  std::fprintf(stderr, "FAIL %s\n", check);
  return 1;
}

LedgerBundle make_bundle(const Config& cfg, const Common& c) {
  MapSpec base = map_from_config(cfg);
  RoofFunction roof = roof_from_config(cfg, base.Y);
  LedgerOptions opt;
  opt.seed = c.seed;
  opt.grid = (int)cfg.integer("ledger_grid", opt.grid);
  opt.k_cap = (int)cfg.integer("k_cap", opt.k_cap);
  opt.n0_cap = (int)cfg.integer("n0_cap", opt.n0_cap);
  opt.enum_budget = cfg.num("enum_budget", opt.enum_budget);
  opt.eps_override = cfg.num("eps", 0.0);
  opt.with_ly = cfg.integer("ledger_with_ly", 1) != 0;
  return build_ledger(base, roof, opt);
}

int cmd_density(const Common& c) {
  Config cfg = load_config(c.config_path);
  int grid = c.grid > 0 ? c.grid : 16384;
  LedgerBundle B = make_bundle(cfg, c);
  double sigma = cfg.num("sigma", 0.0);
  SpectralData sd = eigendata(B.map, B.roof, sigma, grid);
  UlamOperator op = assemble_ulam(B.map, B.roof, cplx(sigma, 0), grid);
  GridFunction lf = apply_ulam(op, sd.f, 1);
  GridFunction diff = lf;
  for (int i = 0; i < grid; ++i)
    diff.v[i] = lf.v[i] / sd.lambda - sd.f.v[i];
  double resid = l1_norm(diff);

  ordered_json j = report_header("density", B.map, B.roof, B.led, c.seed, grid);
  j["sigma"] = sigma;
  j["lambda"] = sd.lambda;
  j["lambda2"] = sd.lambda2;
  j["Lambda"] = sd.Lambda;
  j["power_residual"] = sd.residual;
  j["fixed_point_l1"] = resid;
  ensure_dir(c.out_dir);
  write_json(c.out_dir + "/density.json", j);
  std::vector<std::vector<double>> rows;
  rows.reserve(grid);
  for (int i = 0; i < grid; ++i)
    rows.push_back({sd.f.mid(i), sd.f.v[i].real()});
  write_csv(c.out_dir + "/density.csv", {"x", "f"}, rows);
  std::printf("density: lambda=%.12g fixed_point_l1=%.3g grid=%d\n", sd.lambda,
              resid, grid);
  double tol = cfg.num("density_tol", 1e-6);
  if (resid > tol) return fail("density-residual");
  return 0;
}

int cmd_ledger(const Common& c) {
  Config cfg = load_config(c.config_path);
  LedgerBundle B = make_bundle(cfg, c);
  ordered_json j =
      report_header("ledger", B.map, B.roof, B.led, c.seed, B.grid);
  ensure_dir(c.out_dir);
  write_json(c.out_dir + "/ledger.json", j);
  std::vector<std::vector<double>> rows;
  for (const Interval& p : B.atoms) rows.push_back({p.lo, p.hi, p.length()});
  write_csv(c.out_dir + "/ledger_atoms.csv", {"lo", "hi", "length"}, rows);
  std::printf("ledger: k=%d n0=%d D=%.6g feasible=%d displays=%zu\n", B.led.k,
              B.led.n0, B.led.D, (int)B.led.feasible, B.led.displays.size());
  for (const LedgerDisplay& d : B.led.displays)
    if (!d.holds) {
      std::fprintf(stderr, "display '%s' fails: lhs=%g rhs=%g\n",
                   d.name.c_str(), d.lhs, d.rhs);
      return fail(d.name.c_str());
    }
  return 0;
}

int cmd_uni(const Common& c) {
  Config cfg = load_config(c.config_path);
  LedgerBundle B = make_bundle(cfg, c);
  ordered_json j = report_header("uni", B.map, B.roof, B.led, c.seed, B.grid);
  j["n0"] = B.led.n0;
  j["D"] = B.led.D;
  j["C0"] = B.led.C0;
  j["P_pair"] = B.led.P_pair;
  j["degenerate"] = B.led.uni_degenerate;
  ordered_json atoms = ordered_json::array();
  std::vector<std::vector<double>> rows;
  for (const UniAtomReport& ar : B.uni) {
    ordered_json e;
    e["lo"] = ar.atom.lo;
    e["hi"] = ar.atom.hi;
    e["D_best"] = ar.D_best;
    e["C0"] = ar.C0;
    e["hp_min"] = ar.hp_min;
    e["pairs_tried"] = ar.pairs_tried;
    e["h1"] = ar.h1;
    e["h2"] = ar.h2;
    atoms.push_back(e);
    rows.push_back({ar.atom.lo, ar.atom.hi, ar.D_best, ar.C0, ar.hp_min,
                    (double)ar.pairs_tried});
  }
  j["atoms"] = atoms;
  ensure_dir(c.out_dir);
  write_json(c.out_dir + "/uni.json", j);
  write_csv(c.out_dir + "/uni.csv",
            {"lo", "hi", "D_best", "C0", "hp_min", "pairs_tried"}, rows);
  std::printf("uni: n0=%d D=%.6g C0=%.6g degenerate=%d atoms=%zu\n", B.led.n0,
              B.led.D, B.led.C0, (int)B.led.uni_degenerate, B.uni.size());
  if (B.led.uni_degenerate) return fail("uni-degenerate");
  return 0;
}

int cmd_scan(const Common& c) {
  Config cfg = load_config(c.config_path);
  int grid = c.grid > 0 ? c.grid : 1024;
  LedgerBundle B = make_bundle(cfg, c);
  double sigma = cfg.num("sigma", 0.0);
  std::vector<double> bs = cfg.list("b_list", {20.0, 40.0, 80.0});
  int n_test = (int)cfg.integer("n_test", 9);
  ScanReport rep = contraction_scan(B, sigma, bs, grid, n_test, c.seed);
  ordered_json j = report_header("scan", B.map, B.roof, B.led, c.seed, grid);
  j["sigma"] = sigma;
  j["A"] = rep.A;
  j["beta"] = rep.beta;
  j["uni_failed"] = rep.uni_failed;
  j["family_size"] = rep.family_size;
  ordered_json jr = ordered_json::array();
  std::vector<std::vector<double>> rows;
  for (const ScanRow& r : rep.rows) {
    ordered_json e;
    e["b"] = r.b;
    e["n_used"] = r.n_used;
    e["gamma_fit"] = r.gamma_fit;
    e["norm_ratio"] = r.norm_ratio;
    e["passes"] = r.plan.passes;
    e["blocks"] = r.plan.m;
    jr.push_back(e);
    rows.push_back({r.b, (double)r.n_used, r.gamma_fit, r.norm_ratio,
                    (double)r.plan.passes});
  }
  j["rows"] = jr;
  ensure_dir(c.out_dir);
  write_json(c.out_dir + "/scan.json", j);
  write_csv(c.out_dir + "/scan.csv",
            {"b", "n_used", "gamma_fit", "norm_ratio", "passes"}, rows);
  for (const ScanRow& r : rep.rows)
    std::printf("scan: b=%g n_used=%d gamma_fit=%.6f norm_ratio=%.4g\n", r.b,
                r.n_used, r.gamma_fit, r.norm_ratio);
  for (const ScanRow& r : rep.rows)
    if (!(r.gamma_fit < 1.0)) return fail("scan-contraction");
  return 0;
}

int cmd_l2(const Common& c) {
  Config cfg = load_config(c.config_path);
  int grid = c.grid > 0 ? c.grid : 1024;
  LedgerBundle B = make_bundle(cfg, c);
  double sigma = cfg.num("sigma", 0.0);
  double b = cfg.num("b", 50.0);
  int m_max = (int)cfg.integer("m_max", 8);
  GridFunction v0 = GridFunction::sample(B.map.Y, grid, [&](double x) {
    double t = 2.0 * M_PI * (x - B.map.Y.lo) / B.map.Y.length();
    return std::exp(cplx(0, t));
  });
  L2Report rep = l2_contraction(B, cplx(sigma, b), m_max, v0, grid);
  ordered_json j = report_header("l2", B.map, B.roof, B.led, c.seed, grid);
  j["sigma"] = sigma;
  j["b"] = b;
  j["beta_fit"] = rep.beta_fit;
  j["monotone"] = rep.monotone;
  j["uni_failed"] = rep.uni_failed;
  j["v_table"] = rep.v_table;
  j["u_table"] = rep.u_table;
  ensure_dir(c.out_dir);
  write_json(c.out_dir + "/l2.json", j);
  std::vector<std::vector<double>> rows;
  for (size_t m = 0; m < rep.v_table.size(); ++m)
    rows.push_back({(double)m, rep.v_table[m], rep.u_table[m]});
  write_csv(c.out_dir + "/l2.csv", {"m", "v_l2sq", "u_l2sq"}, rows);
  std::printf("l2: beta_fit=%.6f monotone=%d uni_failed=%d\n", rep.beta_fit,
              (int)rep.monotone, (int)rep.uni_failed);
  if (!rep.monotone) return fail("l2-monotone");
  return 0;
}

int cmd_cone(const Common& c) {
  Config cfg = load_config(c.config_path);
  int grid = c.grid > 0 ? c.grid : 1024;
  LedgerBundle B = make_bundle(cfg, c);
  double sigma = cfg.num("sigma", 0.0);
  double b = cfg.num("b", 50.0);
  int iters = (int)cfg.integer("cone_iters", 3);
  ConePair pair = random_cone_pair(B, b, sigma, grid, c.seed);
  ordered_json j = report_header("cone", B.map, B.roof, B.led, c.seed, grid);
  j["sigma"] = sigma;
  j["b"] = b;
  ordered_json steps = ordered_json::array();
  DiscontinuityCatalog cat = B.catalog;
  double worst_violation = 0;
  bool ok = true;
  for (int it = 0; it < iters; ++it) {
    IterationResult res = iterate_pair(B, pair, cat, grid);
    int case1 = 0, case2 = 0, untyped = 0, gapv = 0;
    for (const CancellationLayout& lay : res.layouts) {
      case1 += lay.case1;
      case2 += lay.case2;
      untyped += lay.untyped;
      gapv += lay.gap_violations;
      CancellationCheck chk = verify_domination(B, pair, lay, 256);
      worst_violation = std::max(worst_violation, chk.max_violation);
    }
    ordered_json e;
    e["cone_ok"] = res.cone.ok;
    e["min_u"] = res.cone.min_u;
    e["dominance_margin"] = res.cone.dominance_margin;
    e["case1"] = case1;
    e["case2"] = case2;
    e["untyped"] = untyped;
    e["gap_violations"] = gapv;
    e["atom_ratio_max"] =
        res.atom_ratio.empty()
            ? 0.0
            : *std::max_element(res.atom_ratio.begin(), res.atom_ratio.end());
    steps.push_back(e);
    ok = ok && res.cone.ok;
    pair = res.next;
    cat = res.catalog;
  }
  j["iterations"] = steps;
  j["domination_violation"] = worst_violation;
  ensure_dir(c.out_dir);
  write_json(c.out_dir + "/cone.json", j);
  std::printf("cone: iterations=%d ok=%d domination_violation=%.3g\n", iters,
              (int)ok, worst_violation);
  if (!ok) return fail("cone-membership");
  if (worst_violation > 1e-8) return fail("cone-domination");
  return 0;
}

int cmd_correlation(const Common& c) {
  Config cfg = load_config(c.config_path);
  LedgerBundle B = make_bundle(cfg, c);
  double sigma = 0.0;
  const SpectralData& sd = B.spectral(sigma);
  std::vector<double> t_def;
  for (int i = 1; i <= 12; ++i) t_def.push_back(0.5 * i);
  std::vector<double> ts = cfg.list("t_list", t_def);
  long long n = cfg.integer("n_samples", 200000);
  double ylo = B.map.Y.lo, ylen = B.map.Y.length();
  auto A = [&](double y, double u) {
    return std::sin(2.0 * M_PI * (y - ylo) / ylen) * std::cos(u);
  };
  auto Bo = [&](double y, double u) {
    return std::cos(2.0 * M_PI * (y - ylo) / ylen) + 0.5 * std::sin(2.0 * u);
  };
  CorrelationReport rep =
      flow_correlation(B.map, B.roof, sd, A, Bo, ts, n, c.seed);
  ExpFit fit = fit_exponential(rep);
  ordered_json j =
      report_header("correlation", B.map, B.roof, B.led, c.seed, B.grid);
  j["n_samples"] = rep.samples;
  j["escaped"] = rep.escaped;
  j["phi_bar"] = rep.phi_bar;
  j["a1"] = fit.a1;
  j["ci_lo"] = fit.ci_lo;
  j["ci_hi"] = fit.ci_hi;
  j["curvature"] = fit.curvature;
  j["curvature_se"] = fit.curvature_se;
  j["fit_points"] = fit.n_points;
  j["conclusive"] = fit.conclusive;
  ensure_dir(c.out_dir);
  write_json(c.out_dir + "/correlation.json", j);
  std::vector<std::vector<double>> rows;
  for (const CorrelationPoint& p : rep.pts)
    rows.push_back({p.t, p.rho, p.se});
  write_csv(c.out_dir + "/correlation.csv", {"t", "rho", "se"}, rows);
  std::printf("correlation: a1=%.4f ci=[%.4f, %.4f] points=%d conclusive=%d\n",
              fit.a1, fit.ci_lo, fit.ci_hi, fit.n_points, (int)fit.conclusive);
  if (cfg.integer("expect_decay", 0) != 0) {
    if (!fit.conclusive) return fail("correlation-window");
    if (!(fit.ci_lo > 0)) return fail("correlation-decay");
  }
  return 0;
}

int cmd_resolvent(const Common& c) {
  Config cfg = load_config(c.config_path);
  int grid = c.grid > 0 ? c.grid : 4096;
  LedgerBundle B = make_bundle(cfg, c);
  double sigma = cfg.num("sigma", 0.0);
  std::vector<double> bs = cfg.list("b_list", {20.0, 40.0, 80.0, 160.0});
  int n_test = (int)cfg.integer("n_test", 9);
  ordered_json j =
      report_header("resolvent", B.map, B.roof, B.led, c.seed, grid);
  j["sigma"] = sigma;
  ordered_json jr = ordered_json::array();
  std::vector<std::vector<double>> rows;
  std::vector<double> lx, ly;
  for (double b : bs) {
    ResolventPoint pt = resolvent_norm(B, cplx(sigma, b), grid, n_test, c.seed);
    ordered_json e;
    e["b"] = pt.b;
    e["norm_ratio"] = pt.norm_ratio;
    e["residual"] = pt.residual;
    jr.push_back(e);
    rows.push_back({pt.b, pt.norm_ratio, pt.residual});
    if (pt.b > 0 && pt.norm_ratio > 0) {
      lx.push_back(std::log(pt.b));
      ly.push_back(std::log(pt.norm_ratio));
    }
    std::printf("resolvent: b=%g norm_ratio=%.6g residual=%.3g\n", pt.b,
                pt.norm_ratio, pt.residual);
  }
  double slope = 0;
  if (lx.size() >= 2) {
    double mx = 0, my = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
    }
    mx /= lx.size();
    my /= lx.size();
    double sxx = 0, sxy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
      sxx += (lx[i] - mx) * (lx[i] - mx);
      sxy += (lx[i] - mx) * (ly[i] - my);
    }
    slope = sxx > 0 ? sxy / sxx : 0;
  }
  j["rows"] = jr;
  j["loglog_slope"] = slope;
  ensure_dir(c.out_dir);
  write_json(c.out_dir + "/resolvent.json", j);
  write_csv(c.out_dir + "/resolvent.csv", {"b", "norm_ratio", "residual"},
            rows);
  std::printf("resolvent: loglog_slope=%.4f\n", slope);
  if (lx.size() >= 2 && !(slope < 1.0)) return fail("resolvent-slope");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerics workbench for twisted transfer operators on AFU maps"};
  app.require_subcommand(1);
  Common c;
  struct Cmd {
    const char* name;
    const char* blurb;
    int (*fn)(const Common&);
  };
  const Cmd cmds[] = {
      {"density", "invariant density and leading eigenvalue", cmd_density},
      {"ledger", "constant ledger with its feasibility displays", cmd_ledger},
      {"uni", "branch-pair phase-slope measurement", cmd_uni},
      {"scan", "norm contraction scan over frequencies", cmd_scan},
      {"l2", "L2 decay of the damped iteration", cmd_l2},
      {"cone", "cone iteration with cancellation layouts", cmd_cone},
      {"correlation", "semiflow correlation decay", cmd_correlation},
      {"resolvent", "resolvent norm growth across frequencies", cmd_resolvent}};
  for (const Cmd& cmd : cmds) add_common(app.add_subcommand(cmd.name, cmd.blurb), c);
  CLI11_PARSE(app, argc, argv);
  if (c.threads > 0) thread_budget() = c.threads;
  try {
    for (const Cmd& cmd : cmds)
      if (app.get_subcommand(cmd.name)->parsed()) return cmd.fn(c);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const BudgetError& e) {
    std::fprintf(stderr, "budget error: %s\n", e.what());
    return 2;
  } catch (const NumericsError& e) {
    std::fprintf(stderr, "numerics error: %s\n", e.what());
    return 2;
  }
  return 0;
}
