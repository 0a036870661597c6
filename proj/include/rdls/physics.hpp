#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "rdls/cluster.hpp"
#include "rdls/error.hpp"
#include "rdls/linsolve.hpp"

namespace rdls {

/// Model coefficients. Units: mm, h, g/L, mol/L, K, Pa.
struct ChemParams {
  double d_mg = 0.05;        // mm^2/h
  double k1 = 0.5;           // 1/h, film formation
  double k2 = 1.0;           // (L/mol)^2/h, film breakdown by chloride
  double cl = 0.15;          // mol/L
  double rho_film = 2344.0;  // g/L, Mg(OH)2
  double porosity = 0.5;
  double tortuosity = 2.0;
  double mg_sol = 1740.0;    // g/L
  double mg_sat = 134.0;     // g/L
  double mg_molar = 24.305;  // g/mol
  double temperature = 310.15;
  double pressure = 101325.0;

  double film_max() const { return rho_film * (1.0 - porosity); }

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(what, "constraint violated");
    };
    need(d_mg >= 0.0, "d_mg");
    need(k1 >= 0.0, "k1");
    need(k2 >= 0.0, "k2");
    need(cl >= 0.0, "cl");
    need(porosity >= 0.0 && porosity <= 1.0, "porosity");
    need(tortuosity >= 1.0, "tortuosity");
    need(rho_film > 0.0, "rho_film");
    need(mg_sol > mg_sat, "mg_sol");
    need(mg_sat >= 0.0, "mg_sat");
    need(mg_molar > 0.0, "mg_molar");
    need(temperature > 0.0, "temperature");
    need(pressure > 0.0, "pressure");
  }
};

struct FieldState {
  std::vector<double> c_mg, c_film, phi;
  double time = 0.0;
};

/// Porosity/tortuosity-weighted diffusivity through a partially filmed node.
inline double effective_diffusion(double c_film, const ChemParams& p) {
  const double fm = p.film_max();
  if (!(fm > 0.0)) throw ConfigError("film_max", "must be positive");
  const double r = c_film / fm;
  return p.d_mg * ((1.0 - r) + r * (p.porosity / p.tortuosity));
}

/// Saturation factor s = 1 - c/film_max, clamped to [0, 1].
inline double saturation(double c_film, const ChemParams& p) {
  return std::clamp(1.0 - c_film / p.film_max(), 0.0, 1.0);
}

inline double alpha_coefficient(double c_film, double dt, const ChemParams& p) {
  if (!(dt > 0.0)) throw ArgumentError("alpha_coefficient: dt must be positive");
  return 1.0 / (1.0 + dt * p.k1 * saturation(c_film, p));
}

enum class FilmScheme {
  /// c' = c + dt (k1 s(c) c_mg' - k2 cl^2 c): the exact partner of the Mg
  /// step's reaction terms, so mass moves between the two fields without loss.
  conservative,
  /// Backward Euler in c' with the saturation term taken at c'.
  implicit,
};

inline double film_update(double c, double c_mg, double dt, const ChemParams& p, FilmScheme scheme) {
  const double fm = p.film_max();
  const double q2 = p.cl * p.cl;
  double next;
  if (scheme == FilmScheme::implicit) {
    next = (c + dt * p.k1 * c_mg) / (1.0 + dt * (p.k1 * c_mg / fm + p.k2 * q2));
  } else {
    next = c + dt * (p.k1 * saturation(c, p) * c_mg - p.k2 * q2 * c);
  }
  return std::clamp(next, 0.0, fm);
}

/// Nodewise film update using the new c_mg; serial over all nodes.
inline void step_film(FieldState& s, const ChemParams& p, double dt, FilmScheme scheme = FilmScheme::conservative) {
  if (s.c_film.size() != s.c_mg.size()) throw ConformanceError("step_film: field sizes differ");
  for (std::size_t i = 0; i < s.c_film.size(); ++i) s.c_film[i] = film_update(s.c_film[i], s.c_mg[i], dt, p, scheme);
}

inline void step_film(FieldState& s, Cluster& cluster, const ChemParams& p, double dt,
                      FilmScheme scheme = FilmScheme::conservative) {
  if (s.c_film.size() != cluster.mesh().num_nodes()) throw ConformanceError("step_film: field size");
  cluster.for_owned([&](int, Index g) { s.c_film[g] = film_update(s.c_film[g], s.c_mg[g], dt, p, scheme); });
}

struct MgStepOptions {
  SolverConfig solver;
  bool penalty = true;  // pin c_mg = mg_sol where phi >= 0
  double penalty_weight = 1e10;
  bool lump_mass = true;
};

struct MgStepResult {
  SolveStats stats;
  std::size_t clamped = 0;  // nodes with negative c_mg reset to 0
};

/// One backward-Euler step of the Mg transport equation. Coefficients come
/// from the current c_film; the solution replaces `s.c_mg`.
inline MgStepResult step_mg(FieldState& s, Cluster& cluster, const ChemParams& p, double dt,
                            const MgStepOptions& opt) {
  const std::size_t n = cluster.mesh().num_nodes();
  if (s.c_mg.size() != n || s.c_film.size() != n || s.phi.size() != n)
    throw ConformanceError("step_mg: field sizes do not match the mesh");
  if (!(dt > 0.0)) throw ArgumentError("step_mg: dt must be positive");

  std::vector<double> diff(n), alpha(n), src(n), prev(s.c_mg);
  std::vector<char> pen(opt.penalty ? n : 0, 0);
  const double q2 = p.cl * p.cl;
  cluster.for_owned([&](int, Index g) {
    diff[g] = effective_diffusion(s.c_film[g], p);
    alpha[g] = alpha_coefficient(s.c_film[g], dt, p);
    src[g] = p.k2 * s.c_film[g] * q2;
    if (opt.penalty) pen[g] = s.phi[g] >= 0.0;
  });

  StepSystem sys;
  sys.dt = dt;
  sys.diffusion = diff;
  sys.alpha = alpha;
  sys.source = src;
  sys.previous = prev;
  sys.lump_mass = opt.lump_mass;
  sys.penalized = pen;
  sys.penalty_target = p.mg_sol;
  sys.penalty_weight = opt.penalty_weight;

  MgStepResult r;
  r.stats = cluster.solve(sys, s.c_mg, opt.solver);
  r.clamped = static_cast<std::size_t>(cluster.reduce([&](int w) {
    double c = 0;
    for (Index g : cluster.owned()[w])
      if (s.c_mg[g] < 0.0) {
        s.c_mg[g] = 0.0;
        ++c;
      }
    return c;
  }));
  return r;
}

}  // namespace rdls
