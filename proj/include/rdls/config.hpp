#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rdls/error.hpp"
#include "rdls/linsolve.hpp"
#include "rdls/mesh.hpp"
#include "rdls/physics.hpp"

namespace rdls {

// Configuration grammar:
//
//   # comment
//   [section]
//   key = value
//
// Every key belongs to a section and is addressed as `section.key`.
// Unknown sections and keys are errors. Vectors are three numbers separated
// by spaces or commas; lists are comma-separated integers; booleans are
// true/false/yes/no/on/off/1/0.

enum class RunMode { simulate, strong_scaling, weak_scaling, fit_only };

struct MeshSpec {
  std::string file;  // load instead of generating when set
  GeometryPrimitive outer = GeometryPrimitive::box({0, 0, 0}, {30, 30, 20});
  GeometryPrimitive inner = GeometryPrimitive::centered_box({15, 15, 10}, {13, 13, 4});
  double coarse_h = 0.0;
  double fine_h = 0.0;
  std::size_t max_elements = MeshLimits{}.max_elements;
};

struct SimConfig {
  MeshSpec mesh;
  ChemParams chem;
  double dt = 0.025;
  double end_time = 0.0;
  double init_c_mg = 0.0;  // medium
  double init_c_film = 0.0;
  int workers = 1;
  int overlap = 1;
  unsigned seed = 0;
  SolverConfig mg_solver;
  SolverConfig ls_solver;
  bool penalty = true;
  double penalty_weight = 1e10;
  bool lump_mg = true;
  FilmScheme film_scheme = FilmScheme::conservative;
  double band_width = 3.0;  // in units of the minimum edge length
  std::string out_dir = "out";
  int snapshot_interval = 0;  // steps; 0 disables snapshots
  bool solver_log = false;
  RunMode mode = RunMode::simulate;
  int measure_steps = 5;
  std::vector<int> scaling_workers{1, 2, 4, 8};
  std::string timings_input;
  std::string law = "amdahl";

  int num_steps() const { return static_cast<int>(std::floor(end_time / dt + 1e-9)); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError(key, "expected a number, got '" + v + "'");
  return x;
}

inline long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(key, "expected a boolean, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::string s = v;
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream ss(s);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

inline Vec3 to_vec3(const std::string& key, const std::string& v) {
  const auto t = split_list(v);
  if (t.size() != 3) throw ConfigError(key, "expected three numbers, got '" + v + "'");
  return {to_double(key, t[0]), to_double(key, t[1]), to_double(key, t[2])};
}

inline std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string fmt(const Vec3& v) { return fmt(v[0]) + " " + fmt(v[1]) + " " + fmt(v[2]); }

template <class E>
struct EnumNames {
  std::vector<std::pair<E, std::string>> names;

  E parse(const std::string& key, const std::string& v) const {
    for (const auto& [e, n] : names)
      if (n == v) return e;
    std::string all;
    for (const auto& [e, n] : names) all += (all.empty() ? "" : "|") + n;
    throw ConfigError(key, "expected one of " + all + ", got '" + v + "'");
  }

  std::string name(E e) const {
    for (const auto& [x, n] : names)
      if (x == e) return n;
    return "?";
  }
};

inline const EnumNames<PreconditionerKind> preconditioner_names{
    {{PreconditionerKind::none, "none"}, {PreconditionerKind::jacobi, "jacobi"}, {PreconditionerKind::ras, "ras"}}};
inline const EnumNames<LocalSolverKind> local_solver_names{{{LocalSolverKind::automatic, "auto"},
                                                            {LocalSolverKind::dense_lu, "dense_lu"},
                                                            {LocalSolverKind::ilu0, "ilu0"}}};
inline const EnumNames<FilmScheme> film_scheme_names{
    {{FilmScheme::conservative, "conservative"}, {FilmScheme::implicit, "implicit"}}};
inline const EnumNames<RunMode> run_mode_names{{{RunMode::simulate, "simulate"},
                                                {RunMode::strong_scaling, "strong_scaling"},
                                                {RunMode::weak_scaling, "weak_scaling"},
                                                {RunMode::fit_only, "fit_only"}}};

struct ConfigField {
  std::string key;  // section.name
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

inline void add_solver_fields(std::vector<ConfigField>& f, const std::string& sec, SolverConfig& s) {
  f.push_back({sec + ".method",
               [sec](const std::string& v) {
                 if (v != "gmres") throw ConfigError(sec + ".method", "only 'gmres' is supported");
               },
               [] { return std::string("gmres"); }});
  f.push_back({sec + ".restart", [&s, sec](const std::string& v) { s.restart = static_cast<int>(to_int(sec + ".restart", v)); },
               [&s] { return std::to_string(s.restart); }});
  f.push_back({sec + ".rel_tol", [&s, sec](const std::string& v) { s.rel_tol = to_double(sec + ".rel_tol", v); },
               [&s] { return fmt(s.rel_tol); }});
  f.push_back({sec + ".abs_tol", [&s, sec](const std::string& v) { s.abs_tol = to_double(sec + ".abs_tol", v); },
               [&s] { return fmt(s.abs_tol); }});
  f.push_back({sec + ".max_iters",
               [&s, sec](const std::string& v) { s.max_iters = static_cast<int>(to_int(sec + ".max_iters", v)); },
               [&s] { return std::to_string(s.max_iters); }});
  f.push_back({sec + ".preconditioner",
               [&s, sec](const std::string& v) { s.preconditioner = preconditioner_names.parse(sec + ".preconditioner", v); },
               [&s] { return preconditioner_names.name(s.preconditioner); }});
  f.push_back({sec + ".local_solver",
               [&s, sec](const std::string& v) { s.ras_local_solver = local_solver_names.parse(sec + ".local_solver", v); },
               [&s] { return local_solver_names.name(s.ras_local_solver); }});
  f.push_back({sec + ".dense_threshold",
               [&s, sec](const std::string& v) {
                 const auto n = to_int(sec + ".dense_threshold", v);
                 if (n < 0) throw ConfigError(sec + ".dense_threshold", "must be >= 0");
                 s.dense_threshold = static_cast<std::size_t>(n);
               },
               [&s] { return std::to_string(s.dense_threshold); }});
  f.push_back({sec + ".inner_sweeps",
               [&s, sec](const std::string& v) { s.inner_sweeps = static_cast<int>(to_int(sec + ".inner_sweeps", v)); },
               [&s] { return std::to_string(s.inner_sweeps); }});
}

inline std::vector<ConfigField> config_schema(SimConfig& c) {
  std::vector<ConfigField> f;
  auto num = [&f](const std::string& key, double& target) {
    f.push_back({key, [&target, key](const std::string& v) { target = to_double(key, v); },
                 [&target] { return fmt(target); }});
  };
  auto integer = [&f](const std::string& key, int& target) {
    f.push_back({key, [&target, key](const std::string& v) { target = static_cast<int>(to_int(key, v)); },
                 [&target] { return std::to_string(target); }});
  };
  auto boolean = [&f](const std::string& key, bool& target) {
    f.push_back({key, [&target, key](const std::string& v) { target = to_bool(key, v); },
                 [&target] { return std::string(target ? "true" : "false"); }});
  };
  auto text = [&f](const std::string& key, std::string& target) {
    f.push_back({key, [&target](const std::string& v) { target = v; }, [&target] { return target; }});
  };
  auto vec = [&f](const std::string& key, Vec3& target) {
    f.push_back({key, [&target, key](const std::string& v) { target = to_vec3(key, v); },
                 [&target] { return fmt(target); }});
  };

  MeshSpec& m = c.mesh;
  text("mesh.file", m.file);
  vec("mesh.outer_lo", m.outer.lo);
  vec("mesh.outer_hi", m.outer.hi);
  f.push_back({"mesh.inner",
               [&m](const std::string& v) {
                 if (v == "box") m.inner.kind = GeometryPrimitive::Kind::box;
                 else if (v == "sphere") m.inner.kind = GeometryPrimitive::Kind::sphere;
                 else throw ConfigError("mesh.inner", "expected box|sphere, got '" + v + "'");
               },
               [&m] { return std::string(m.inner.kind == GeometryPrimitive::Kind::box ? "box" : "sphere"); }});
  vec("mesh.inner_lo", m.inner.lo);
  vec("mesh.inner_hi", m.inner.hi);
  vec("mesh.inner_center", m.inner.center);
  num("mesh.inner_radius", m.inner.radius);
  num("mesh.coarse_h", m.coarse_h);
  num("mesh.fine_h", m.fine_h);
  f.push_back({"mesh.max_elements",
               [&m](const std::string& v) {
                 const auto n = to_int("mesh.max_elements", v);
                 if (n < 1) throw ConfigError("mesh.max_elements", "must be >= 1");
                 m.max_elements = static_cast<std::size_t>(n);
               },
               [&m] { return std::to_string(m.max_elements); }});

  ChemParams& p = c.chem;
  num("chem.d_mg", p.d_mg);
  num("chem.k1", p.k1);
  num("chem.k2", p.k2);
  num("chem.cl", p.cl);
  num("chem.rho_film", p.rho_film);
  num("chem.porosity", p.porosity);
  num("chem.tortuosity", p.tortuosity);
  num("chem.mg_sol", p.mg_sol);
  num("chem.mg_sat", p.mg_sat);
  num("chem.mg_molar", p.mg_molar);
  num("chem.temperature", p.temperature);
  num("chem.pressure", p.pressure);

  num("time.dt", c.dt);
  num("time.end_time", c.end_time);
  num("init.c_mg", c.init_c_mg);
  num("init.c_film", c.init_c_film);

  integer("parallel.workers", c.workers);
  integer("parallel.overlap", c.overlap);
  f.push_back({"parallel.seed",
               [&c](const std::string& v) {
                 const auto n = to_int("parallel.seed", v);
                 if (n < 0) throw ConfigError("parallel.seed", "must be >= 0");
                 c.seed = static_cast<unsigned>(n);
               },
               [&c] { return std::to_string(c.seed); }});

  add_solver_fields(f, "solver.mg", c.mg_solver);
  add_solver_fields(f, "solver.ls", c.ls_solver);

  boolean("fem.penalty", c.penalty);
  num("fem.penalty_weight", c.penalty_weight);
  boolean("fem.lump_mg", c.lump_mg);
  f.push_back({"fem.film_scheme",
               [&c](const std::string& v) { c.film_scheme = film_scheme_names.parse("fem.film_scheme", v); },
               [&c] { return film_scheme_names.name(c.film_scheme); }});
  num("levelset.band_width", c.band_width);

  text("output.dir", c.out_dir);
  integer("output.snapshot_interval", c.snapshot_interval);
  boolean("output.solver_log", c.solver_log);

  f.push_back({"run.mode", [&c](const std::string& v) { c.mode = run_mode_names.parse("run.mode", v); },
               [&c] { return run_mode_names.name(c.mode); }});
  integer("run.measure_steps", c.measure_steps);
  f.push_back({"run.workers_list",
               [&c](const std::string& v) {
                 c.scaling_workers.clear();
                 for (const auto& t : split_list(v)) c.scaling_workers.push_back(static_cast<int>(to_int("run.workers_list", t)));
               },
               [&c] {
                 std::string s;
                 for (int n : c.scaling_workers) s += (s.empty() ? "" : ",") + std::to_string(n);
                 return s;
               }});
  text("run.timings", c.timings_input);
  text("run.law", c.law);
  return f;
}

}  // namespace detail

/// Checks value constraints; errors name the offending key.
inline void validate_config(const SimConfig& c) {
  auto need = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
  };
  if (c.mode != RunMode::fit_only) {
    need(c.dt > 0.0, "time.dt", "must be positive");
    need(c.end_time >= c.dt, "time.end_time", "must be >= time.dt");
    if (c.mesh.file.empty()) {
      need(c.mesh.fine_h > 0.0, "mesh.fine_h", "must be positive");
      need(c.mesh.coarse_h >= c.mesh.fine_h, "mesh.coarse_h", "must be >= mesh.fine_h");
      try {
        c.mesh.outer.validate();
      } catch (const GeometryError& e) {
        throw ConfigError("mesh.outer_hi", e.what());
      }
    }
    try {
      c.mesh.inner.validate();
    } catch (const GeometryError& e) {
      throw ConfigError(c.mesh.inner.kind == GeometryPrimitive::Kind::box ? "mesh.inner_hi" : "mesh.inner_radius",
                        e.what());
    }
    try {
      c.chem.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("chem." + e.key(), "constraint violated");
    }
    need(c.init_c_mg >= 0.0, "init.c_mg", "must be >= 0");
    need(c.init_c_film >= 0.0 && c.init_c_film <= c.chem.film_max(), "init.c_film", "must lie in [0, film_max]");
    need(c.workers >= 1, "parallel.workers", "must be >= 1");
    need(c.overlap >= 0, "parallel.overlap", "must be >= 0");
    need(c.penalty_weight > 0.0, "fem.penalty_weight", "must be positive");
    need(c.band_width > 0.0, "levelset.band_width", "must be positive");
    need(c.snapshot_interval >= 0, "output.snapshot_interval", "must be >= 0");
    need(c.measure_steps >= 1, "run.measure_steps", "must be >= 1");
    need(!c.scaling_workers.empty(), "run.workers_list", "must not be empty");
    for (int n : c.scaling_workers) need(n >= 1, "run.workers_list", "worker counts must be >= 1");
    for (const auto* s : {&c.mg_solver, &c.ls_solver}) {
      const std::string sec = s == &c.mg_solver ? "solver.mg" : "solver.ls";
      if (s->restart < 1) throw ConfigError(sec + ".restart", "must be >= 1");
      if (!(s->rel_tol > 0.0)) throw ConfigError(sec + ".rel_tol", "must be positive");
      if (!(s->abs_tol > 0.0)) throw ConfigError(sec + ".abs_tol", "must be positive");
      if (s->max_iters < 1) throw ConfigError(sec + ".max_iters", "must be >= 1");
      if (s->inner_sweeps < 1) throw ConfigError(sec + ".inner_sweeps", "must be >= 1");
    }
  } else {
    need(!c.timings_input.empty(), "run.timings", "required in fit_only mode");
  }
  need(c.law == "amdahl" || c.law == "gustafson", "run.law", "expected amdahl|gustafson");
}

inline SimConfig parse_config(std::istream& in) {
  SimConfig c;
  auto schema = detail::config_schema(c);
  std::map<std::string, const detail::ConfigField*> by_key;
  std::set<std::string> sections;
  for (const auto& f : schema) {
    by_key[f.key] = &f;
    sections.insert(f.key.substr(0, f.key.rfind('.')));
  }
  std::set<std::string> seen;
  std::string section, line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto p = line.find('#'); p != std::string::npos) line.resize(p);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(no, "unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ConfigError(section, "unknown section (line " + std::to_string(no) + ")");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(no, "expected 'key = value'");
    const std::string name = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    const std::string key = section.empty() ? name : section + "." + name;
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(key, "unknown key (line " + std::to_string(no) + ")");
    if (!seen.insert(key).second) throw ConfigError(key, "given twice (line " + std::to_string(no) + ")");
    it->second->set(value);
  }
  if (c.mode != RunMode::fit_only) {
    if (!seen.count("time.end_time")) throw ConfigError("time.end_time", "required key missing");
    if (c.mesh.file.empty() && !seen.count("mesh.fine_h"))
      throw ConfigError("mesh.fine_h", "required key missing (or give mesh.file)");
    if (c.mesh.file.empty() && !seen.count("mesh.coarse_h")) c.mesh.coarse_h = c.mesh.fine_h;
  }
  validate_config(c);
  return c;
}

inline SimConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config '" + path + "'");
  return parse_config(in);
}

/// Every effective value, in the input grammar (re-parseable).
inline void write_config(const SimConfig& cfg, std::ostream& os) {
  SimConfig copy = cfg;
  std::string section;
  for (const auto& f : detail::config_schema(copy)) {
    const auto dot = f.key.rfind('.');
    const std::string sec = f.key.substr(0, dot);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    const std::string v = f.get();
    if (f.key == "mesh.file" && v.empty()) continue;
    if (f.key == "run.timings" && v.empty()) continue;
    os << f.key.substr(dot + 1) << " = " << v << '\n';
  }
}

}  // namespace rdls
