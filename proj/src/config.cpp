#include "cgff/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

namespace cgff {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& v, const std::string& what, int line) {
  throw ConfigError(key + ": cannot read '" + v + "' as " + what, line);
}

double to_double(const std::string& key, const std::string& v, int line) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) bad_value(key, v, "a finite number", line);
    return x;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number", line);
  }
}

int64_t to_int(const std::string& key, const std::string& v, int line) {
  try {
    size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) bad_value(key, v, "an integer", line);
    return x;
  } catch (const std::logic_error&) {
    bad_value(key, v, "an integer", line);
  }
}

// "a, b, c" or "start:stop:step" (stop included up to rounding)
std::vector<double> to_double_list(const std::string& key, const std::string& v, int line) {
  std::vector<double> out;
  if (v.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(trim(p));
    if (parts.size() != 3) bad_value(key, v, "start:stop:step", line);
    const double a = to_double(key, parts[0], line), b = to_double(key, parts[1], line),
                 st = to_double(key, parts[2], line);
    if (!(st > 0.0) || b < a) bad_value(key, v, "an increasing range with positive step", line);
    const int64_t n = int64_t(std::floor((b - a) / st + 1e-9));
    if (n > 100000) bad_value(key, v, "a range of at most 100000 points", line);
    for (int64_t i = 0; i <= n; ++i) out.push_back(std::round((a + double(i) * st) * 1e12) / 1e12);
    return out;
  }
  for (const auto& s : split_list(v)) out.push_back(to_double(key, s, line));
  if (out.empty()) bad_value(key, v, "a nonempty list", line);
  return out;
}

std::vector<int64_t> to_int_list(const std::string& key, const std::string& v, int line) {
  std::vector<int64_t> out;
  for (const auto& s : split_list(v)) out.push_back(to_int(key, s, line));
  if (out.empty()) bad_value(key, v, "a nonempty list", line);
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += fmt(v[i]);
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s;
}

struct Field {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, int)> set;
};

#define CGFF_INT(name, member)                                                                     \
  {                                                                                                \
    name, {                                                                                        \
      [](const ExperimentConfig& c) { return std::to_string(c.member); },                          \
          [](ExperimentConfig& c, const std::string& v, int line) {                                \
            c.member = static_cast<decltype(c.member)>(to_int(name, v, line));                     \
          }                                                                                        \
    }                                                                                              \
  }
#define CGFF_DBL(name, member)                                                                          \
  {                                                                                                     \
    name, {                                                                                             \
      [](const ExperimentConfig& c) { return fmt(c.member); },                                          \
          [](ExperimentConfig& c, const std::string& v, int line) { c.member = to_double(name, v, line); } \
    }                                                                                                   \
  }
#define CGFF_STR(name, member)                                                              \
  {                                                                                         \
    name, {                                                                                 \
      [](const ExperimentConfig& c) { return c.member; },                                   \
          [](ExperimentConfig& c, const std::string& v, int) { c.member = v; }              \
    }                                                                                       \
  }
#define CGFF_DLIST(name, member)                                                                            \
  {                                                                                                         \
    name, {                                                                                                 \
      [](const ExperimentConfig& c) { return join(c.member); },                                             \
          [](ExperimentConfig& c, const std::string& v, int line) { c.member = to_double_list(name, v, line); } \
    }                                                                                                       \
  }
#define CGFF_ILIST(name, member)                                                                         \
  {                                                                                                      \
    name, {                                                                                              \
      [](const ExperimentConfig& c) { return join(c.member); },                                          \
          [](ExperimentConfig& c, const std::string& v, int line) { c.member = to_int_list(name, v, line); } \
    }                                                                                                    \
  }

const std::map<std::string, Field>& schema() {
  static const std::map<std::string, Field> m = {
      CGFF_STR("experiment.kind", kind),
      CGFF_INT("lattice.d", d),
      CGFF_ILIST("lattice.L", L),
      CGFF_INT("lattice.slab_thickness", slab_thickness),
      CGFF_INT("lattice.window", window),
      CGFF_STR("lattice.mode", mode),
      CGFF_DLIST("levels.h", h),
      CGFF_DLIST("levels.u", u),
      CGFF_DLIST("levels.eps", eps),
      CGFF_INT("run.replicas", replicas),
      CGFF_INT("run.seed", seed),
      CGFF_INT("run.threads", threads),
      CGFF_INT("run.bootstrap", bootstrap),
      CGFF_STR("run.out", out),
      CGFF_DBL("constants.C0", constants.C0),
      CGFF_DBL("constants.c0", constants.c0),
      CGFF_DBL("constants.C1", constants.C1),
      CGFF_DBL("constants.c1", constants.c1),
      CGFF_DBL("constants.C1p", constants.C1p),
      CGFF_DBL("constants.c1p", constants.c1p),
      CGFF_DBL("constants.delta", delta),
      CGFF_DBL("constants.halo_factor", halo_factor),
      CGFF_DBL("constants.buffer_fraction", buffer_fraction),
      CGFF_DBL("constants.truncation_K", truncation_K),
      CGFF_INT("renorm.L0", L0),
      CGFF_INT("renorm.l0", l0),
      CGFF_INT("renorm.ld", ld),
      CGFF_INT("renorm.n_max", n_max),
      CGFF_DBL("renorm.q", q),
      CGFF_DBL("renorm.K", K),
      CGFF_STR("renorm.seed_kind", seed_kind),
      CGFF_INT("renorm.cascade_instances", cascade_instances),
      CGFF_INT("renorm.cascade_d", cascade_d),
      CGFF_STR("decouple.kind", decouple_kind),
      CGFF_INT("decouple.r", r),
      CGFF_INT("decouple.s", s),
      CGFF_INT("decouple.pilot", pilot),
      CGFF_INT("flip.boundaries", boundaries),
      CGFF_INT("flip.inner", inner),
      CGFF_ILIST("psi.T", T),
      CGFF_INT("psi.k", k),
      CGFF_INT("psi.confine_from", confine_from),
      CGFF_INT("laplace.potentials", potentials),
      CGFF_DBL("laplace.strength", strength),
  };
  return m;
}

#undef CGFF_INT
#undef CGFF_DBL
#undef CGFF_STR
#undef CGFF_DLIST
#undef CGFF_ILIST

// Line of every "key =" inside its section, for error messages.
std::map<std::string, int> ini_lines(const std::string& text) {
  std::map<std::string, int> lines;
  std::istringstream in(text);
  std::string raw, section;
  int n = 0;
  while (std::getline(in, raw)) {
    ++n;
    const std::string t = trim(raw);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      if (!lines.count(section)) lines[section] = n;
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) continue;
    lines[(section.empty() ? "" : section + ".") + trim(t.substr(0, eq))] = n;
  }
  return lines;
}

std::string kind_from_ptree(const boost::property_tree::ptree& pt) {
  auto k = pt.get_optional<std::string>("experiment.kind");
  return k ? trim(*k) : "";
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k = {"verify-iso", "estimate-hstar", "cable-contrast",
                                             "flip",       "renorm-cert",    "decouple",
                                             "connectivity", "psi-growth",   "laplace-check"};
  return k;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& kv : schema()) out.push_back(kv.first);
  return out;
}

std::string ExperimentConfig::canonical() const {
  std::string s;
  for (const auto& [key, f] : schema()) {
    if (key == "run.out" || key == "run.threads") continue;  // do not change results
    s += key + " = " + f.get(*this) + "\n";
  }
  return s;
}

std::string ExperimentConfig::hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig default_config(const std::string& kind) {
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    throw ConfigError("unknown experiment kind '" + kind + "'");
  }
  ExperimentConfig c;
  c.kind = kind;
  if (kind == "verify-iso") {
    c.replicas = 100000;
    c.u = {1.0};
    c.window = 10;
  } else if (kind == "estimate-hstar") {
    c.replicas = 400;
    c.h = to_double_list("levels.h", "-0.2:1.0:0.02", 0);
  } else if (kind == "cable-contrast") {
    c.replicas = 1000;
    c.h = {0.0};
  } else if (kind == "flip") {
    c.h = {0.02, 0.05, 0.1, 0.2, 0.3, 0.5};
    c.replicas = 1;
  } else if (kind == "renorm-cert") {
    c.replicas = 500;
  } else if (kind == "decouple") {
    c.replicas = 10000;
  } else if (kind == "connectivity") {
    c.replicas = 500;
    c.window = 8;
    c.eps = {0.1, 0.25, 0.5};
  } else if (kind == "psi-growth") {
    c.replicas = 1000;
    c.eps = {1.0 / 3.0};
  } else if (kind == "laplace-check") {
    c.replicas = 20000;
  }
  return c;
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value, int line) {
  const auto& m = schema();
  auto it = m.find(key);
  if (it == m.end()) throw ConfigError("unknown key '" + key + "'", line);
  it->second.set(c, trim(value), line);
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& kind_hint) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.message(), int(e.line()));
  }
  const auto lines = ini_lines(text);
  auto line_of = [&](const std::string& k) {
    auto it = lines.find(k);
    return it == lines.end() ? 0 : it->second;
  };
  std::string kind = kind_from_ptree(tree);
  if (kind.empty()) kind = kind_hint;
  if (kind.empty()) throw ConfigError("experiment.kind missing and no subcommand given");
  if (!kind_hint.empty() && kind != kind_hint) {
    throw ConfigError("config is for '" + kind + "' but the subcommand is '" + kind_hint + "'",
                      line_of("experiment.kind"));
  }
  ExperimentConfig c = default_config(kind);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("key '" + section + "' outside any section", line_of(section));
    }
    for (const auto& [key, val] : body) {
      const std::string full = section + "." + key;
      set_config_value(c, full, val.data(), line_of(full));
    }
  }
  return c;
}

ExperimentConfig parse_config_json(const std::string& text, const std::string& kind_hint) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("JSON config must be an object of sections");
  std::string kind = kind_hint;
  if (j.contains("experiment") && j["experiment"].contains("kind")) kind = j["experiment"]["kind"].get<std::string>();
  if (kind.empty()) throw ConfigError("experiment.kind missing and no subcommand given");
  if (!kind_hint.empty() && kind != kind_hint) {
    throw ConfigError("config is for '" + kind + "' but the subcommand is '" + kind_hint + "'");
  }
  ExperimentConfig c = default_config(kind);
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw ConfigError("section '" + section + "' must be an object");
    for (const auto& [key, val] : body.items()) {
      std::string v;
      if (val.is_string()) {
        v = val.get<std::string>();
      } else if (val.is_array()) {
        for (size_t i = 0; i < val.size(); ++i) v += (i ? "," : "") + val[i].dump();
      } else {
        v = val.dump();
      }
      set_config_value(c, section + "." + key, v);
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path, const std::string& kind_hint) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  const bool json = (path.size() > 5 && path.substr(path.size() - 5) == ".json") ||
                    trim(text).rfind('{', 0) == 0;
  return json ? parse_config_json(text, kind_hint) : parse_config_text(text, kind_hint);
}

std::vector<std::string> apply_env_overrides(ExperimentConfig& c) {
  std::vector<std::string> applied;
  for (const auto& [key, f] : schema()) {
    std::string var = "CGFF_" + key;
    for (char& ch : var) ch = ch == '.' ? '_' : char(std::toupper(static_cast<unsigned char>(ch)));
    if (const char* v = std::getenv(var.c_str())) {
      try {
        f.set(c, trim(v), 0);
      } catch (const ConfigError& e) {
        throw ConfigError(var + ": " + e.what());
      }
      applied.push_back(key);
    }
  }
  return applied;
}

void validate(const ExperimentConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  const auto& kinds = experiment_kinds();
  need(std::find(kinds.begin(), kinds.end(), c.kind) != kinds.end(), "unknown experiment kind '" + c.kind + "'");
  need(c.d >= 3, "lattice.d = " + std::to_string(c.d) +
                     " rejected: the field and the interlacements need a transient walk, so d >= 3");
  need(c.d <= 6, "lattice.d must be at most 6");
  need(c.replicas >= 1, "run.replicas must be >= 1");
  need(c.threads >= 1, "run.threads must be >= 1");
  need(c.bootstrap >= 10, "run.bootstrap must be >= 10");
  for (int64_t L : c.L) need(L >= 2, "lattice.L entries must be >= 2");
  need(c.window >= 1, "lattice.window must be >= 1");
  for (double u : c.u) need(u > 0.0, "levels.u entries must be > 0");
  need(c.halo_factor >= 1.0, "constants.halo_factor must be >= 1");
  need(c.buffer_fraction >= 0.0, "constants.buffer_fraction must be >= 0");
  need(c.constants.C0 > 0 && c.constants.c0 > 0 && c.constants.C1 > 0 && c.constants.c1 > 0 &&
           c.constants.C1p > 0 && c.constants.c1p > 0,
       "truncation constants must be positive");
  need(c.delta > 0.0 && c.delta < 1.0, "constants.delta must lie in (0, 1)");
  if (c.kind == "estimate-hstar") {
    need(c.L.size() >= 2, "estimate-hstar needs at least two sizes in lattice.L");
    need(c.h.size() >= 2, "estimate-hstar needs an h grid");
  }
  if (c.kind == "estimate-hstar" || c.kind == "cable-contrast") {
    need(!c.h.empty(), "levels.h must be nonempty");
    need(c.mode == "lattice" || c.mode == "cable" || c.mode == "slab" || c.mode == "truncated",
         "lattice.mode must be lattice, cable, slab or truncated");
  }
  if (c.kind == "flip") {
    for (double h : c.h) need(h > 0.0 && h <= 1.0, "flip levels must lie in (0, 1]");
    need(c.boundaries >= 1 && c.inner >= 2, "flip.boundaries >= 1 and flip.inner >= 2");
  }
  if (c.kind == "renorm-cert") {
    need(c.seed_kind == "iid" || c.seed_kind == "gff-c", "renorm.seed_kind must be iid or gff-c");
    need(c.L0 >= 1 && c.l0 >= 2 && c.ld >= 1 && c.n_max >= 0 && c.n_max <= 4, "renorm scale parameters out of range");
    need(c.q >= 0.0 && c.q <= 1.0, "renorm.q must lie in [0, 1]");
    need(c.cascade_d == 2 || c.cascade_d == 3, "renorm.cascade_d must be 2 or 3");
  }
  if (c.kind == "decouple") {
    need(c.decouple_kind == "interlacement" || c.decouple_kind == "gff" || c.decouple_kind == "both",
         "decouple.kind must be interlacement, gff or both");
    need(c.r >= 1 && c.s >= 1, "decouple.r and decouple.s must be >= 1");
    for (double e : c.eps) need(e > 0.0 && e < 1.0, "levels.eps entries must lie in (0, 1)");
  }
  if (c.kind == "connectivity") {
    for (double e : c.eps) need(e > 0.0 && e < 1.0, "levels.eps entries must lie in (0, 1)");
  }
  if (c.kind == "psi-growth") {
    need(c.k >= 1 && c.k <= std::max(1, c.d - 2), "psi.k must lie in 1 .. d - 2");
    for (int64_t t : c.T) need(t >= 1, "psi.T entries must be >= 1");
  }
  if (c.kind == "laplace-check") {
    need(c.potentials >= 1, "laplace.potentials must be >= 1");
    need(c.strength > 0.0, "laplace.strength must be > 0");
  }
}

}  // namespace cgff
