#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rdls/error.hpp"

namespace rdls {

/// Wall time of one time step on N workers, per PDE, in seconds.
struct TimingRecord {
  int workers = 1;
  int step = 0;
  double ls_pde = 0.0;
  double mg_pde = 0.0;
  double film_pde = 0.0;
  double total = 0.0;
  int ls_iterations = 0;
  int mg_iterations = 0;
};

enum class ScalingMode { strong, weak };

inline double amdahl_speedup(double f, double n) { return 1.0 / (f + (1.0 - f) / n); }
inline double gustafson_speedup(double f, double n) { return f + (1.0 - f) * n; }

namespace detail {

/// Least-squares f in [0, 1]: a grid scan brackets the minimum, golden
/// section refines it; the endpoints are always candidates.
template <class Model>
double fit_fraction(std::span<const double> n, std::span<const double> s, Model model) {
  auto sse = [&](double f) {
    double e = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const double d = model(f, n[i]) - s[i];
      e += d * d;
    }
    return e;
  };
  constexpr int grid = 1000;
  int best = 0;
  double best_e = sse(0.0);
  for (int k = 1; k <= grid; ++k) {
    const double e = sse(static_cast<double>(k) / grid);
    if (e < best_e) {
      best_e = e;
      best = k;
    }
  }
  double a = std::max(0, best - 1) / static_cast<double>(grid);
  double b = std::min(grid, best + 1) / static_cast<double>(grid);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = sse(c), fd = sse(d);
  while (b - a > 1e-13) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = sse(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = sse(d);
    }
  }
  double f = 0.5 * (a + b);
  for (double edge : {0.0, 1.0})
    if (sse(edge) <= sse(f)) f = edge;
  return f;
}

inline void check_points(std::span<const double> n, std::span<const double> s) {
  if (n.size() != s.size()) throw ConformanceError("fit: worker counts and speedups differ in length");
  if (n.size() < 2) throw ArgumentError("fit: need at least two data points");
  for (std::size_t i = 0; i < n.size(); ++i)
    if (!(n[i] >= 1.0) || !(s[i] > 0.0) || !std::isfinite(s[i])) throw ArgumentError("fit: invalid data point");
}

}  // namespace detail

/// Serial fraction f of S(N) = 1 / (f + (1 - f)/N).
inline double fit_amdahl(std::span<const double> workers, std::span<const double> speedup) {
  detail::check_points(workers, speedup);
  return detail::fit_fraction(workers, speedup, amdahl_speedup);
}

/// Serial fraction f of S(N) = f + (1 - f) N.
inline double fit_gustafson(std::span<const double> workers, std::span<const double> speedup) {
  detail::check_points(workers, speedup);
  return detail::fit_fraction(workers, speedup, gustafson_speedup);
}

/// One row per worker count: per-bucket medians over that count's steps.
inline std::vector<TimingRecord> aggregate_by_workers(std::span<const TimingRecord> records) {
  std::map<int, std::vector<TimingRecord>> by;
  for (const auto& r : records) by[r.workers].push_back(r);
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  std::vector<TimingRecord> out;
  for (const auto& [n, rs] : by) {
    TimingRecord a;
    a.workers = n;
    a.step = -1;
    std::vector<double> ls, mg, film, tot;
    std::vector<double> li, mi;
    for (const auto& r : rs) {
      ls.push_back(r.ls_pde);
      mg.push_back(r.mg_pde);
      film.push_back(r.film_pde);
      tot.push_back(r.total);
      li.push_back(r.ls_iterations);
      mi.push_back(r.mg_iterations);
    }
    a.ls_pde = median(ls);
    a.mg_pde = median(mg);
    a.film_pde = median(film);
    a.total = median(tot);
    a.ls_iterations = static_cast<int>(median(li));
    a.mg_iterations = static_cast<int>(median(mi));
    out.push_back(a);
  }
  return out;
}

/// Speedups from total times. Strong: T(1)/T(N). Weak (work grows with N):
/// the scaled speedup N T(1)/T(N).
inline std::vector<double> speedups(std::span<const TimingRecord> per_n, ScalingMode mode) {
  const auto base = std::find_if(per_n.begin(), per_n.end(), [](const TimingRecord& r) { return r.workers == 1; });
  if (base == per_n.end()) throw ArgumentError("speedup: no N=1 baseline record");
  if (!(base->total > 0.0)) throw ArgumentError("speedup: N=1 baseline time must be positive");
  std::vector<double> s;
  for (const auto& r : per_n) {
    if (!(r.total > 0.0)) throw ArgumentError("speedup: non-positive total time for N=" + std::to_string(r.workers));
    const double t = base->total / r.total;
    s.push_back(mode == ScalingMode::weak ? r.workers * t : t);
  }
  return s;
}

inline std::vector<double> worker_counts(std::span<const TimingRecord> per_n) {
  std::vector<double> n;
  for (const auto& r : per_n) n.push_back(r.workers);
  return n;
}

inline double fit_amdahl(std::span<const TimingRecord> records) {
  const auto a = aggregate_by_workers(records);
  return fit_amdahl(worker_counts(a), speedups(a, ScalingMode::strong));
}

inline double fit_gustafson(std::span<const TimingRecord> records) {
  const auto a = aggregate_by_workers(records);
  return fit_gustafson(worker_counts(a), speedups(a, ScalingMode::weak));
}

struct ScalingReport {
  ScalingMode mode = ScalingMode::strong;
  std::vector<TimingRecord> records;  // one per worker count
  std::vector<double> speedup, efficiency;
  std::vector<bool> superlinear;
  double f_amdahl = 0.0, f_gustafson = 0.0;
};

inline ScalingReport make_report(std::span<const TimingRecord> raw, ScalingMode mode) {
  ScalingReport r;
  r.mode = mode;
  r.records = aggregate_by_workers(raw);
  r.speedup = speedups(r.records, mode);
  const auto n = worker_counts(r.records);
  for (std::size_t i = 0; i < n.size(); ++i) {
    // Weak-scaling efficiency is T(1)/T(N): the scaled speedup over N.
    const double e = r.speedup[i] / n[i];
    r.efficiency.push_back(e);
    r.superlinear.push_back(e > 1.0 + 1e-12);
  }
  if (r.records.size() >= 2) {
    const auto strong = speedups(r.records, ScalingMode::strong);
    const auto weak = speedups(r.records, ScalingMode::weak);
    r.f_amdahl = fit_amdahl(n, strong);
    r.f_gustafson = fit_gustafson(n, weak);
  }
  return r;
}

inline constexpr const char* timings_header = "N,step,ls_pde_s,mg_pde_s,film_pde_s,total_s";

inline void write_timings_csv(std::span<const TimingRecord> rs, std::ostream& os) {
  os << timings_header << '\n';
  char buf[256];
  for (const auto& r : rs) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g,%.9g,%.9g\n", r.workers, r.step, r.ls_pde, r.mg_pde,
                  r.film_pde, r.total);
    os << buf;
  }
}

inline std::vector<TimingRecord> read_timings_csv(std::istream& in) {
  std::string line;
  std::size_t no = 0;
  auto next = [&] {
    while (std::getline(in, line)) {
      ++no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next() || line != timings_header) throw ParseError(no, std::string("expected header '") + timings_header + "'");
  std::vector<TimingRecord> out;
  while (next()) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw ParseError(no, "expected 6 fields");
    TimingRecord r;
    try {
      std::size_t pos = 0;
      auto num = [&](const std::string& s) {
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
      };
      r.workers = static_cast<int>(num(f[0]));
      r.step = static_cast<int>(num(f[1]));
      r.ls_pde = num(f[2]);
      r.mg_pde = num(f[3]);
      r.film_pde = num(f[4]);
      r.total = num(f[5]);
    } catch (const std::exception&) {
      throw ParseError(no, "malformed number");
    }
    if (r.workers < 1) throw ParseError(no, "worker count must be >= 1");
    out.push_back(r);
  }
  return out;
}

inline std::vector<TimingRecord> load_timings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open '" + path + "'");
  return read_timings_csv(in);
}

inline void save_timings_csv(std::span<const TimingRecord> rs, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ArgumentError("cannot write '" + path + "'");
  write_timings_csv(rs, os);
}

/// Worker counts as columns, PDE buckets as rows.
inline void write_report_table(const ScalingReport& r, std::ostream& os) {
  auto row = [&](const char* label, auto get, const char* fmt) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-20s", label);
    os << buf;
    for (std::size_t i = 0; i < r.records.size(); ++i) {
      std::snprintf(buf, sizeof buf, fmt, get(i));
      os << buf;
    }
    os << '\n';
  };
  row("Workers", [&](std::size_t i) { return r.records[i].workers; }, "%10d");
  row("LS PDE (s)", [&](std::size_t i) { return r.records[i].ls_pde; }, "%10.4f");
  row("Mg PDE (s)", [&](std::size_t i) { return r.records[i].mg_pde; }, "%10.4f");
  row("Film PDE (s)", [&](std::size_t i) { return r.records[i].film_pde; }, "%10.4f");
  row("Total (s)", [&](std::size_t i) { return r.records[i].total; }, "%10.4f");
  row(r.mode == ScalingMode::weak ? "Scaled speedup" : "Speedup", [&](std::size_t i) { return r.speedup[i]; },
      "%10.3f");
  row("Efficiency", [&](std::size_t i) { return r.efficiency[i]; }, "%10.3f");
  char buf[128];
  std::snprintf(buf, sizeof buf, "f (Amdahl) = %.6f\nf (Gustafson) = %.6f\n", r.f_amdahl, r.f_gustafson);
  os << buf;
  for (std::size_t i = 0; i < r.records.size(); ++i)
    if (r.superlinear[i]) os << "note: superlinear efficiency at N=" << r.records[i].workers << '\n';
}

inline void write_report_csv(const ScalingReport& r, std::ostream& os) {
  os << "N,ls_pde_s,mg_pde_s,film_pde_s,total_s,speedup,efficiency\n";
  char buf[256];
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& t = r.records[i];
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", t.workers, t.ls_pde, t.mg_pde, t.film_pde,
                  t.total, r.speedup[i], r.efficiency[i]);
    os << buf;
  }
}

/// A parsed `pde=<name> iters=<n> resid=<r> t=<seconds>` line.
struct SolveLogEntry {
  std::string pde;
  int iterations = 0;
  double residual = 0.0;
  double seconds = 0.0;
};

inline std::optional<SolveLogEntry> parse_solve_log(const std::string& line) {
  std::istringstream ss(line);
  std::string tok;
  SolveLogEntry e;
  int seen = 0;
  try {
    while (ss >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
      if (k == "pde") e.pde = v, seen |= 1;
      else if (k == "iters") e.iterations = std::stoi(v), seen |= 2;
      else if (k == "resid") e.residual = std::stod(v), seen |= 4;
      else if (k == "t") e.seconds = std::stod(v), seen |= 8;
    }
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (seen != 15) return std::nullopt;
  return e;
}

}  // namespace rdls
