#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "src/config.hpp"
#include "src/report.hpp"

using namespace afuw;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing and typed accessors") {
  Config cfg = parse_config(
      "map = doubling   # trailing comment\n"
      "\n"
      "beta= 2.5\n"
      "count =12\n"
      "bs = 2, 8 , 32\n"
      "label = run one\n");
  CHECK(cfg.has("map"));
  CHECK_FALSE(cfg.has("missing"));
  CHECK(cfg.str("map", "x") == "doubling");
  CHECK(cfg.str("label", "") == "run one");
  CHECK(cfg.str("missing", "fallback") == "fallback");
  CHECK(cfg.num("beta", 0.0) == doctest::Approx(2.5));
  CHECK(cfg.num("missing", -1.5) == doctest::Approx(-1.5));
  CHECK(cfg.integer("count", 0) == 12);
  std::vector<double> bs = cfg.list("bs", {});
  REQUIRE(bs.size() == 3);
  CHECK(bs[0] == 2.0);
  CHECK(bs[2] == 32.0);
  CHECK(cfg.list("missing", {7.0}).at(0) == 7.0);
}

TEST_CASE("config errors carry the offending line or key") {
  try {
    parse_config("ok = 1\nthis line has no equals\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("= valueless\n"), ConfigError);

  Config cfg = parse_config("beta = fast\nn = 2.5\nxs = 1, owl\n");
  CHECK_THROWS_AS(cfg.num("beta", 0.0), ConfigError);
  CHECK_THROWS_AS(cfg.integer("n", 0), ConfigError);
  CHECK_THROWS_AS(cfg.list("xs", {}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/path/x.cfg"), ConfigError);
  CHECK(load_config("").kv.empty());
}

TEST_CASE("map registry builds every family") {
  std::vector<std::string> names = builtin_map_names();
  REQUIRE(names.size() == 5);
  for (const std::string& n : names) {
    Config cfg = parse_config("map = " + n + "\n");
    MapSpec m = map_from_config(cfg);
    CHECK(m.branches.size() >= 2);
    CHECK(m.rho0 > 1.0);
    CHECK(m.Y.length() > 0.0);
  }
  CHECK_THROWS_AS(map_from_config(parse_config("map = unknown\n")),
                  ConfigError);

  MapSpec sb = map_from_config(parse_config("map = shifted_beta\nbeta = 3.5\n"));
  CHECK(sb.rho0 == doctest::Approx(3.5));

  MapSpec mp = map_from_config(parse_config("map = mp\nt_max = 20\n"));
  CHECK(mp.branches.size() == 20);
  CHECK(mp.Y.lo == doctest::Approx(0.5));
}

TEST_CASE("roof registry covers the four kinds") {
  Interval Y{0.0, 1.0};
  RoofFunction c = roof_from_config(parse_config("roof = const\nroof_c = 2.5\n"), Y);
  CHECK(c(0.3) == doctest::Approx(2.5));
  CHECK(c.deriv(0.3) == 0.0);

  RoofFunction q = roof_from_config(parse_config("roof = one_plus_x_sq\n"), Y);
  CHECK(q(0.5) == doctest::Approx(1.25));
  CHECK(q.deriv(0.5) == doctest::Approx(1.0));
  CHECK(q.sup(Y) == doctest::Approx(2.0));
  CHECK(q.inf(Y) == doctest::Approx(1.0));

  RoofFunction lin = roof_from_config(parse_config("roof = linear\n"), Y);
  CHECK(lin(0.0) == doctest::Approx(1.0));
  CHECK(lin(0.5) == doctest::Approx(1.5));
  CHECK(lin.deriv(0.25) == doctest::Approx(1.0));

  RoofFunction tab = roof_from_config(
      parse_config("roof = table\nroof_x = 0, 0.5, 1\nroof_y = 1, 3, 1\n"), Y);
  CHECK(tab(0.25) == doctest::Approx(2.0));
  CHECK(tab(0.75) == doctest::Approx(2.0));
  CHECK(tab.deriv(0.25) == doctest::Approx(4.0));
  CHECK(tab.deriv(0.75) == doctest::Approx(-4.0));

  CHECK_THROWS_AS(roof_from_config(parse_config("roof = dome\n"), Y),
                  ConfigError);
}

TEST_CASE("ledger serialization is complete and ordered") {
  ConstantLedger led;
  led.rho0 = 4.0;
  led.C9 = 0.9;
  led.k = 20;
  led.n0 = 5;
  led.k_note = "all good";
  led.displays.push_back({"mass-floor", 0.9, 0.0, true});
  led.displays.push_back({"atom-length", 1.0, 0.5, false});
  led.feasible = false;

  ordered_json j = ledger_to_json(led);
  for (const char* key :
       {"iterate", "rho0", "rho", "C1", "K", "delta0", "k1", "N1", "eta0",
        "eps", "eps0", "C2", "C2p", "C3", "lambda0", "C5", "C6", "C7", "C8",
        "C9", "C10", "C11", "K2", "k", "k_budget", "k_strict", "k_note", "n0",
        "D", "C0", "P_pair", "uni_degenerate", "Delta", "delta", "delta_p",
        "eta", "eta1", "K1", "b_min", "c_ly", "M", "delta_pp", "beta_l2", "A",
        "feasible", "displays"})
    CHECK_MESSAGE(j.contains(key), "missing key: ", key);
  CHECK(j["C9"].get<double>() == 0.9);
  CHECK(j["displays"].size() == 2);
  CHECK(j["displays"][1]["name"] == "atom-length");
  CHECK(j["displays"][1]["holds"] == false);
  CHECK(j["feasible"] == false);
}

TEST_CASE("report envelope pins the schema and embeds the ledger") {
  MapSpec m = make_doubling();
  RoofFunction roof = RoofFunction::one_plus_x_sq();
  ConstantLedger led;
  led.k = 8;
  ordered_json j = report_header("density", m, roof, led, 42u, 1024);
  CHECK(j["schema_version"] == kSchemaVersion);
  CHECK(std::string(kSchemaVersion) == "1.0.0");
  CHECK(j["kind"] == "density");
  CHECK(j["map"] == "doubling");
  CHECK(j["roof"] == roof.kind_name());
  CHECK(j["seed"] == 42u);
  CHECK(j["grid"] == 1024);
  CHECK(j["ledger"]["k"] == 8);

  // Byte-identical on repeat: nothing clock- or address-dependent inside.
  ordered_json j2 = report_header("density", m, roof, led, 42u, 1024);
  CHECK(j.dump(2) == j2.dump(2));
}

TEST_CASE("json and csv writers round-trip through files") {
  ensure_dir("report_test_tmp/nested");

  ordered_json j;
  j["alpha"] = 0.1 + 0.2;
  j["words"] = ordered_json::array({"a", "b"});
  write_json("report_test_tmp/nested/x.json", j);
  ordered_json back = ordered_json::parse(slurp("report_test_tmp/nested/x.json"));
  CHECK(back["alpha"].get<double>() == 0.1 + 0.2);
  CHECK(back["words"][1] == "b");

  write_json("report_test_tmp/nested/y.json", j);
  CHECK(slurp("report_test_tmp/nested/x.json") ==
        slurp("report_test_tmp/nested/y.json"));

  std::vector<std::string> header = {"t", "rho"};
  std::vector<std::vector<double>> rows = {{0.25, 1.0 / 3.0},
                                           {0.5, -2.718281828459045}};
  write_csv("report_test_tmp/nested/x.csv", header, rows);
  std::string csv = slurp("report_test_tmp/nested/x.csv");
  CHECK(csv.substr(0, csv.find('\n')) == "t,rho");

  // Full round-trip precision: parsing the second cell recovers 1/3 exactly.
  std::stringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  std::getline(ss, line);
  double parsed = std::stod(line.substr(line.find(',') + 1));
  CHECK(parsed == 1.0 / 3.0);

  CHECK_THROWS_AS(write_csv("report_test_tmp/nested/bad.csv", header, {{1.0}}),
                  ConfigError);
  CHECK_THROWS_AS(write_json("/nonexistent/dir/x.json", j), ConfigError);

  std::remove("report_test_tmp/nested/x.json");
  std::remove("report_test_tmp/nested/y.json");
  std::remove("report_test_tmp/nested/x.csv");
  std::remove("report_test_tmp/nested/bad.csv");
}
