#include "config.hpp"

#include <fstream>
#include <sstream>

namespace afuw {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

bool Config::has(const std::string& key) const { return kv.count(key) > 0; }

std::string Config::str(const std::string& key, const std::string& dflt) const {
  auto it = kv.find(key);
  return it == kv.end() ? dflt : it->second;
}

double Config::num(const std::string& key, double dflt) const {
  auto it = kv.find(key);
  if (it == kv.end()) return dflt;
  size_t pos = 0;
  double v;
  try {
    v = std::stod(it->second, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is not a number: " +
                      it->second);
  }
  if (trim(it->second.substr(pos)) != "")
    throw ConfigError("config: trailing characters after number for '" + key +
                      "'");
  return v;
}

long long Config::integer(const std::string& key, long long dflt) const {
  double v = num(key, (double)dflt);
  long long r = (long long)std::llround(v);
  if (std::abs(v - (double)r) > 1e-9)
    throw ConfigError("config: key '" + key + "' is not an integer");
  return r;
}

std::vector<double> Config::list(const std::string& key,
                                 const std::vector<double>& dflt) const {
  auto it = kv.find(key);
  if (it == kv.end()) return dflt;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("config: bad list entry for '" + key + "': " + item);
    }
  }
  if (out.empty())
    throw ConfigError("config: empty list for '" + key + "'");
  return out;
}

Config parse_config(const std::string& text) {
  Config cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " has no '='");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " has an empty key");
    cfg.kv[key] = val;
  }
  return cfg;
}

Config load_config(const std::string& path) {
  if (path.empty()) return Config{};
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

MapSpec map_from_config(const Config& cfg) {
  std::string name = cfg.str("map", "doubling");
  if (name == "doubling") return make_doubling();
  if (name == "beta3") return make_shifted_beta(3.0, 0.0);
  if (name == "golden") return make_golden();
  if (name == "shifted_beta")
    return make_shifted_beta(cfg.num("beta", 2.5), cfg.num("alpha", 0.3));
  if (name == "mp") {
    MpOptions opt;
    opt.t_max = (int)cfg.integer("t_max", opt.t_max);
    return make_mp_first_return(cfg.num("alpha", 1.0), cfg.num("gamma", 0.8),
                                opt);
  }
  throw ConfigError("config: unknown map '" + name + "'");
}

RoofFunction roof_from_config(const Config& cfg, const Interval& Y) {
  std::string name = cfg.str("roof", "one_plus_x_sq");
  if (name == "const") return RoofFunction::constant(cfg.num("roof_c", 1.0));
  if (name == "one_plus_x_sq") return RoofFunction::one_plus_x_sq();
  if (name == "linear") return RoofFunction::table({Y.lo, Y.hi}, {1.0, 2.0});
  if (name == "table") {
    std::vector<double> xs = cfg.list("roof_x", {});
    std::vector<double> ys = cfg.list("roof_y", {});
    return RoofFunction::table(xs, ys);
  }
  throw ConfigError("config: unknown roof '" + name + "'");
}

std::vector<std::string> builtin_map_names() {
  return {"doubling", "beta3", "golden", "shifted_beta", "mp"};
}

}  // namespace afuw
