#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "rdls/cluster.hpp"
#include "rdls/config.hpp"
#include "rdls/error.hpp"
#include "rdls/levelset.hpp"
#include "rdls/locate.hpp"
#include "rdls/mesh.hpp"
#include "rdls/perf.hpp"
#include "rdls/physics.hpp"
#include "rdls/vtk.hpp"

namespace rdls {

inline Mesh build_mesh(const SimConfig& c) {
  if (!c.mesh.file.empty()) return load_mesh(c.mesh.file);
  MeshLimits lim;
  lim.max_elements = c.mesh.max_elements;
  return generate_box_mesh(c.mesh.outer, c.mesh.inner, c.mesh.coarse_h, c.mesh.fine_h, lim);
}

/// Weak-scaling geometry for `copies` workers: the medium is `copies` unit
/// sub-blocks stacked along x, and the inner box is stretched across all of
/// them with the same margins, so the work per worker stays constant.
inline SimConfig weak_scaled(const SimConfig& c, int copies) {
  if (copies < 1) throw ArgumentError("weak_scaled: copies must be >= 1");
  if (!c.mesh.file.empty()) throw ArgumentError("weak scaling needs a generated mesh, not mesh.file");
  if (c.mesh.inner.kind != GeometryPrimitive::Kind::box) throw ArgumentError("weak scaling needs a box inner body");
  SimConfig s = c;
  const double len = c.mesh.outer.hi[0] - c.mesh.outer.lo[0];
  s.mesh.outer.hi[0] += (copies - 1) * len;
  s.mesh.inner.hi[0] += (copies - 1) * len;
  s.workers = copies;
  return s;
}

struct Observables {
  double time = 0.0;          // h
  double mass_lost = 0.0;     // g
  double hydrogen = 0.0;      // m^3 H2 per m^2 of surface; NaN without surface
  double area = 0.0;          // mm^2
  double solid_volume = 0.0;  // mm^3
};

inline constexpr const char* observables_header = "time_h,mass_lost_g,hydrogen,area_mm2,solid_volume_mm3";

inline void write_observables_row(const Observables& o, std::ostream& os) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", o.time, o.mass_lost, o.hydrogen, o.area,
                o.solid_volume);
  os << buf;
}

/// Coupled Mg / film / level-set model on a worker cluster.
class Simulation {
 public:
  Simulation(const SimConfig& cfg, Mesh mesh, int workers)
      : cfg_(cfg),
        mesh_(std::make_unique<Mesh>(std::move(mesh))),
        cluster_(std::make_unique<Cluster>(*mesh_, workers, cfg.overlap, cfg.seed)),
        locator_(std::make_unique<PointLocator>(*mesh_)),
        velocity_(*mesh_, *locator_, cfg.band_width),
        graph_(*mesh_),
        recovery_(*mesh_) {
    const std::size_t n = mesh_->num_nodes();
    state_.phi = init_signed_distance(*mesh_, cfg.mesh.inner);
    state_.c_mg.assign(n, cfg.init_c_mg);
    state_.c_film.assign(n, cfg.init_c_film);
    if (cfg.penalty)
      for (std::size_t i = 0; i < n; ++i)
        if (state_.phi[i] >= 0.0) state_.c_mg[i] = cfg.chem.mg_sol;
    volume0_ = solid_volume(*cluster_, state_.phi);
  }

  explicit Simulation(const SimConfig& cfg) : Simulation(cfg, build_mesh(cfg), cfg.workers) {}

  const SimConfig& config() const noexcept { return cfg_; }
  const Mesh& mesh() const noexcept { return *mesh_; }
  Cluster& cluster() noexcept { return *cluster_; }
  FieldState& state() noexcept { return state_; }
  const FieldState& state() const noexcept { return state_; }
  int steps_taken() const noexcept { return step_; }
  double initial_volume() const noexcept { return volume0_; }
  std::size_t clamped_total() const noexcept { return clamped_; }

  /// Solver log lines go here when set.
  void set_log(std::ostream* log) { log_ = log; }

  /// Advances one time step and returns its wall times (no I/O included).
  TimingRecord step() {
    using clock = std::chrono::steady_clock;
    auto secs = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };
    const int k = step_ + 1;
    const double dt = cfg_.dt;
    TimingRecord t;
    t.workers = cluster_->size();
    t.step = k;
    const auto t0 = clock::now();

    MgStepOptions mo;
    mo.solver = cfg_.mg_solver;
    mo.penalty = cfg_.penalty;
    mo.penalty_weight = cfg_.penalty_weight;
    mo.lump_mass = cfg_.lump_mg;
    try {
      const auto r = step_mg(state_, *cluster_, cfg_.chem, dt, mo);
      clamped_ += r.clamped;
      t.mg_iterations = r.stats.iterations;
      if (log_ && cfg_.solver_log) *log_ << "step=" << k << ' ' << format_solve_log("mg", r.stats) << '\n';
    } catch (const Error& e) {
      throw StepError(k, "mg", e.what());
    }
    const auto t1 = clock::now();

    try {
      step_film(state_, *cluster_, cfg_.chem, dt, cfg_.film_scheme);
    } catch (const Error& e) {
      throw StepError(k, "film", e.what());
    }
    const auto t2 = clock::now();

    try {
      recovery_.compute(*cluster_, state_.phi, gradient_);
      const auto& rg = gradient_;
      const std::size_t n = mesh_->num_nodes();
      std::vector<double> v(n, 0.0);
      std::vector<char> band(n, 0);
      cluster_->for_owned([&](int, Index g) {
        if (velocity_.in_band(state_.phi[g])) {
          band[g] = 1;
          v[g] = velocity_.at(g, state_.phi, rg.grad, state_.c_mg, state_.c_film, cfg_.chem);
        }
      });
      graph_.extend(band, v);
      const auto stats = advance_levelset(*cluster_, state_.phi, v, rg.magnitude, dt, cfg_.ls_solver);
      t.ls_iterations = stats.iterations;
      if (log_ && cfg_.solver_log) *log_ << "step=" << k << ' ' << format_solve_log("ls", stats) << '\n';
    } catch (const Error& e) {
      throw StepError(k, "level-set", e.what());
    }
    const auto t3 = clock::now();

    t.mg_pde = secs(t0, t1);
    t.film_pde = secs(t1, t2);
    t.ls_pde = secs(t2, t3);
    t.total = secs(t0, t3);
    state_.time = k * dt;
    step_ = k;
    return t;
  }

  Observables observe() {
    Observables o;
    o.time = state_.time;
    o.solid_volume = solid_volume(*cluster_, state_.phi);
    o.area = interface_area(*cluster_, state_.phi);
    o.mass_lost = mass_loss(volume0_, o.solid_volume, cfg_.chem);
    o.hydrogen = o.area > 0.0 ? hydrogen_volume(o.mass_lost, o.area * 1e-6, cfg_.chem)
                              : std::numeric_limits<double>::quiet_NaN();
    return o;
  }

  void save_snapshot(const std::string& path) const {
    rdls::save_snapshot(*mesh_, state_.phi, state_.c_mg, state_.c_film, path);
  }

 private:
  SimConfig cfg_;
  std::unique_ptr<Mesh> mesh_;
  std::unique_ptr<Cluster> cluster_;
  std::unique_ptr<PointLocator> locator_;
  InterfaceVelocity velocity_;
  NodeGraph graph_;
  GradientRecovery recovery_;
  RecoveredGradient gradient_;
  FieldState state_;
  double volume0_ = 0.0;
  int step_ = 0;
  std::size_t clamped_ = 0;
  std::ostream* log_ = nullptr;
};

inline void warn_oversubscription(int workers, std::ostream& log) {
  const unsigned hw = std::thread::hardware_concurrency();
  if (hw != 0 && static_cast<unsigned>(workers) > hw)
    log << "warning: " << workers << " workers on " << hw
        << " hardware thread(s); timings measure oversubscribed execution\n";
}

/// Runs `steps` steps and returns each step's timings.
inline std::vector<TimingRecord> measure_steps(Simulation& sim, int steps) {
  if (steps < 1) throw ArgumentError("measure_steps: steps must be >= 1");
  std::vector<TimingRecord> out;
  for (int i = 0; i < steps; ++i) out.push_back(sim.step());
  return out;
}

/// Median per-bucket step time over `steps` steps.
inline TimingRecord measure_step(Simulation& sim, int steps = 5) {
  const auto rs = measure_steps(sim, steps);
  return aggregate_by_workers(rs).front();
}

struct RunSummary {
  int steps = 0;
  Observables last;
  std::size_t nodes = 0, elements = 0, clamped = 0;
  double wall = 0.0;
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw ArgumentError("cannot write '" + p.string() + "'");
  return os;
}

}  // namespace detail

/// Full time loop. Writes observables.csv, timings.csv, config.used and
/// snapshot_<step>.vtk files into cfg.out_dir. Rows are flushed every step,
/// so the output written before a failure survives it.
inline RunSummary run_simulation(const SimConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  log << "# effective configuration\n";
  write_config(cfg, log);
  {
    auto os = detail::open_out(dir / "config.used");
    write_config(cfg, os);
  }
  warn_oversubscription(cfg.workers, log);

  const auto w0 = std::chrono::steady_clock::now();
  Simulation sim(cfg);
  sim.set_log(&log);
  log << "operator order: D,alpha from c_film -> Mg solve -> film update -> band velocity -> level-set solve -> "
         "observables\n";
  log << "mesh: " << sim.mesh().num_nodes() << " nodes, " << sim.mesh().num_tets() << " elements, h_min "
      << sim.mesh().min_edge_h() << " mm; workers " << sim.cluster().size() << '\n';

  auto obs = detail::open_out(dir / "observables.csv");
  auto tim = detail::open_out(dir / "timings.csv");
  obs << observables_header << '\n';
  tim << timings_header << '\n';
  auto snapshot = [&](int k) { sim.save_snapshot((dir / ("snapshot_" + std::to_string(k) + ".vtk")).string()); };
  if (cfg.snapshot_interval > 0) snapshot(0);

  RunSummary sum;
  const int steps = cfg.num_steps();
  for (int k = 1; k <= steps; ++k) {
    const TimingRecord t = sim.step();
    const Observables o = sim.observe();
    write_observables_row(o, obs);
    obs.flush();
    const TimingRecord one[] = {t};
    std::ostringstream row;
    write_timings_csv(one, row);
    const std::string r = row.str();
    tim << r.substr(r.find('\n') + 1);  // drop the header
    tim.flush();
    if (cfg.snapshot_interval > 0 && k % cfg.snapshot_interval == 0) snapshot(k);
    sum.last = o;
    sum.steps = k;
  }
  sum.nodes = sim.mesh().num_nodes();
  sum.elements = sim.mesh().num_tets();
  sum.clamped = sim.clamped_total();
  sum.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - w0).count();

  char buf[512];
  std::snprintf(buf, sizeof buf,
                "summary: steps=%d t=%.6g h mass_lost=%.6e g hydrogen=%.6e area=%.6g mm2 volume=%.6g mm3 "
                "clamped=%zu wall=%.3f s\n",
                sum.steps, sum.last.time, sum.last.mass_lost, sum.last.hydrogen, sum.last.area, sum.last.solid_volume,
                sum.clamped, sum.wall);
  log << buf;
  return sum;
}

/// Times `cfg.measure_steps` steps for each worker count and writes
/// timings.csv (every step) and scaling.csv (per-N medians) into cfg.out_dir.
inline ScalingReport run_scaling(const SimConfig& cfg, ScalingMode mode, std::span<const int> workers,
                                 std::ostream& log) {
  namespace fs = std::filesystem;
  if (workers.empty()) throw ArgumentError("scaling: no worker counts given");
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  std::vector<TimingRecord> all;
  std::unique_ptr<Mesh> shared;
  if (mode == ScalingMode::strong) shared = std::make_unique<Mesh>(build_mesh(cfg));
  for (int n : workers) {
    warn_oversubscription(n, log);
    const SimConfig c = mode == ScalingMode::weak ? weak_scaled(cfg, n) : cfg;
    Simulation sim(c, mode == ScalingMode::weak ? build_mesh(c) : *shared, n);
    const auto rs = measure_steps(sim, cfg.measure_steps);
    all.insert(all.end(), rs.begin(), rs.end());
    const auto med = aggregate_by_workers(rs).front();
    char buf[256];
    std::snprintf(buf, sizeof buf, "N=%d nodes=%zu median step %.4f s (mg %.4f, film %.4f, ls %.4f)\n", n,
                  sim.mesh().num_nodes(), med.total, med.mg_pde, med.film_pde, med.ls_pde);
    log << buf;
  }
  save_timings_csv(all, (dir / "timings.csv").string());
  const auto report = make_report(all, mode);
  auto os = detail::open_out(dir / "scaling.csv");
  write_report_csv(report, os);
  return report;
}

}  // namespace rdls
