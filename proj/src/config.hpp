#pragma once

#include "interval_map.hpp"

#include <map>

namespace afuw {

/*------------------------------- flat configs -------------------------------*/

// key = value pairs, one per line; '#' starts a comment. Values stay strings
// until a typed accessor parses them.
struct Config {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const;
  std::string str(const std::string& key, const std::string& dflt) const;
  double num(const std::string& key, double dflt) const;
  long long integer(const std::string& key, long long dflt) const;
  std::vector<double> list(const std::string& key,
                           const std::vector<double>& dflt) const;
};

Config parse_config(const std::string& text);
Config load_config(const std::string& path);  // empty path -> empty config

/*----------------------------- builtin registry -----------------------------*/

// map = doubling | beta3 | golden | shifted_beta | mp
//   shifted_beta reads beta, alpha; mp reads alpha, gamma, t_max.
// The base map is returned as specified; expansion adjustment happens in the
// ledger build.
MapSpec map_from_config(const Config& cfg);

// roof = const | one_plus_x_sq | linear | table
//   const reads roof_c; linear ramps 1 -> 2 across the domain; table reads
//   roof_x, roof_y breakpoint lists.
RoofFunction roof_from_config(const Config& cfg, const Interval& Y);

std::vector<std::string> builtin_map_names();

}  // namespace afuw
