#include "report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace afuw {

ordered_json ledger_to_json(const ConstantLedger& led) {
  ordered_json j;
  j["iterate"] = led.iterate;
  j["rho0"] = led.rho0;
  j["rho"] = led.rho;
  j["C1"] = led.C1;
  j["K"] = led.K;
  j["delta0"] = led.delta0;
  j["k1"] = led.k1;
  j["N1"] = led.N1;
  j["eta0"] = led.eta0;
  j["eps"] = led.eps;
  j["eps0"] = led.eps0;
  j["C2"] = led.C2;
  j["C2p"] = led.C2p;
  j["C3"] = led.C3;
  j["lambda0"] = led.lambda0;
  j["C5"] = led.C5;
  j["C6"] = led.C6;
  j["C7"] = led.C7;
  j["C8"] = led.C8;
  j["C9"] = led.C9;
  j["C10"] = led.C10;
  j["C11"] = led.C11;
  j["K2"] = led.K2;
  j["k"] = led.k;
  j["k_budget"] = led.k_budget;
  j["k_strict"] = led.k_strict;
  j["k_note"] = led.k_note;
  j["n0"] = led.n0;
  j["D"] = led.D;
  j["C0"] = led.C0;
  j["P_pair"] = led.P_pair;
  j["uni_degenerate"] = led.uni_degenerate;
  j["n0_multiple_of_k"] = led.n0_multiple_of_k;
  j["Delta"] = led.Delta;
  j["delta"] = led.delta;
  j["delta_p"] = led.delta_p;
  j["eta"] = led.eta;
  j["eta1"] = led.eta1;
  j["K1"] = led.K1;
  j["b_min"] = led.b_min;
  j["c_ly"] = led.c_ly;
  j["M"] = led.M;
  j["delta_pp"] = led.delta_pp;
  j["beta_l2"] = led.beta_l2;
  j["A"] = led.A;
  j["feasible"] = led.feasible;
  ordered_json ds = ordered_json::array();
  for (const LedgerDisplay& d : led.displays) {
    ordered_json e;
    e["name"] = d.name;
    e["lhs"] = d.lhs;
    e["rhs"] = d.rhs;
    e["holds"] = d.holds;
    ds.push_back(e);
  }
  j["displays"] = ds;
  return j;
}

ordered_json report_header(const std::string& kind, const MapSpec& map,
                           const RoofFunction& roof, const ConstantLedger& led,
                           uint64_t seed, int grid) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  j["map"] = map.family;
  j["map_label"] = map.label;
  j["roof"] = roof.kind_name();
  j["seed"] = seed;
  j["grid"] = grid;
  j["ledger"] = ledger_to_json(led);
  return j;
}

void write_json(const std::string& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("report: cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("report: cannot write " + path);
  for (size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "\n");
  char buf[64];
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw ConfigError("report: csv row width does not match the header");
    for (size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out << buf << (i + 1 < row.size() ? "," : "\n");
    }
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("report: cannot create directory " + dir);
}

}  // namespace afuw
