#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rdls/decomp.hpp"
#include "rdls/error.hpp"
#include "rdls/sparse.hpp"

namespace rdls {

enum class PreconditionerKind { none, jacobi, ras };
enum class LocalSolverKind { automatic, dense_lu, ilu0 };

struct SolverConfig {
  int restart = 30;
  double rel_tol = 1e-8;
  double abs_tol = 1e-14;
  int max_iters = 1000;
  PreconditionerKind preconditioner = PreconditionerKind::ras;
  LocalSolverKind ras_local_solver = LocalSolverKind::automatic;
  /// `automatic` picks dense LU up to this many local unknowns, ILU(0) above.
  std::size_t dense_threshold = 2000;
  /// ILU(0)-preconditioned Richardson sweeps per local solve.
  int inner_sweeps = 2;

  void validate() const {
    if (restart < 1) throw ArgumentError("solver: restart must be >= 1");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ArgumentError("solver: tolerances must be positive");
    if (max_iters < 1) throw ArgumentError("solver: max_iters must be >= 1");
    if (inner_sweeps < 1) throw ArgumentError("solver: inner_sweeps must be >= 1");
  }
};

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;  // true residual 2-norm at exit
  double wall_seconds = 0.0;
  /// Residual estimate after each inner iteration; restarts are marked by
  /// `restart_starts`.
  std::vector<double> history;
  std::vector<std::size_t> restart_starts;
};

/// `pde=<name> iters=<n> resid=<r> t=<seconds>`
inline std::string format_solve_log(const std::string& pde, const SolveStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "pde=%s iters=%d resid=%.6e t=%.6f", pde.c_str(), s.iterations, s.residual,
                s.wall_seconds);
  return buf;
}

/// Vector operations over all entries, in index order.
struct SerialSpace {
  double dot(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }

  void gram(const std::vector<std::vector<double>>& v, int k, std::span<const double> w, std::span<double> h) const {
    for (int j = 0; j < k; ++j) h[j] = dot(v[j], w);
  }

  /// w += sign * sum_j c_j v_j
  void combine(const std::vector<std::vector<double>>& v, int k, std::span<const double> c, double sign,
               std::span<double> w) const {
    for (int j = 0; j < k; ++j) {
      const double a = sign * c[j];
      const auto& vj = v[j];
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += a * vj[i];
    }
  }

  void scale(double a, std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a * x[i];
  }

  /// y = b - y
  void rsub(std::span<const double> b, std::span<double> y) const {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = b[i] - y[i];
  }
};

/// Scales every row of `a` and `b` by 1 / a_ii and returns the factors.
/// Penalty rows are many orders of magnitude larger than the rest; without
/// this, ||b|| and hence the relative tolerance only see the penalty rows.
inline std::vector<double> equilibrate_rows(CsrMatrix& a, std::span<double> b) {
  std::vector<double> s(a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double d = a.diagonal(i);
    if (d == 0.0) throw SingularError("equilibrate_rows: zero diagonal in row " + std::to_string(i));
    s[i] = 1.0 / d;
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) a.val[k] *= s[i];
    b[i] *= s[i];
  }
  return s;
}

struct IdentityPreconditioner {
  void apply(std::span<const double> r, std::span<double> z) const { std::copy(r.begin(), r.end(), z.begin()); }
};

class JacobiPreconditioner {
 public:
  explicit JacobiPreconditioner(const CsrMatrix& a) : inv_(a.rows) {
    for (std::size_t i = 0; i < a.rows; ++i) {
      const double d = a.diagonal(i);
      if (d == 0.0) throw SingularError("Jacobi: zero diagonal in row " + std::to_string(i));
      inv_[i] = 1.0 / d;
    }
  }

  void apply(std::span<const double> r, std::span<double> z) const {
    for (std::size_t i = 0; i < inv_.size(); ++i) z[i] = r[i] * inv_[i];
  }

 private:
  std::vector<double> inv_;
};

/// Approximate inverse of one subdomain matrix: exact dense LU for small
/// blocks, a fixed number of ILU(0)-preconditioned Richardson sweeps
/// otherwise (a fixed linear operator, so outer GMRES stays valid).
class LocalSolver {
 public:
  LocalSolver() = default;

  LocalSolver(CsrMatrix a, const SolverConfig& cfg, int subdomain = -1) : sweeps_(cfg.inner_sweeps) {
    bool dense = cfg.ras_local_solver == LocalSolverKind::dense_lu ||
                 (cfg.ras_local_solver == LocalSolverKind::automatic && a.rows <= cfg.dense_threshold);
    try {
      if (dense) {
        impl_ = DenseLu(a);
      } else {
        impl_ = Ilu0(a);
        if (sweeps_ > 1) a_ = std::move(a);
      }
    } catch (const SingularError& e) {
      throw SingularError("subdomain " + std::to_string(subdomain) + ": " + e.what(), subdomain);
    }
  }

  bool is_dense() const noexcept { return std::holds_alternative<DenseLu>(impl_); }

  /// z = approx A^{-1} r; `work` is scratch of the same size.
  void solve(std::span<const double> r, std::span<double> z, std::vector<double>& work) const {
    if (const auto* lu = std::get_if<DenseLu>(&impl_)) {
      std::copy(r.begin(), r.end(), z.begin());
      lu->solve(z);
      return;
    }
    const auto& ilu = std::get<Ilu0>(impl_);
    std::copy(r.begin(), r.end(), z.begin());
    ilu.solve(z);
    if (sweeps_ <= 1) return;
    work.resize(z.size());
    for (int s = 1; s < sweeps_; ++s) {
      a_.multiply(z, work);
      for (std::size_t i = 0; i < work.size(); ++i) work[i] = r[i] - work[i];
      ilu.solve(work);
      for (std::size_t i = 0; i < work.size(); ++i) z[i] += work[i];
    }
  }

 private:
  std::variant<std::monostate, DenseLu, Ilu0> impl_;
  CsrMatrix a_;
  int sweeps_ = 1;
};

/// Restricted additive Schwarz, M^{-1} = sum_i R_i^T D_i A_i^{-1} R_i, with
/// A_i = R_i A R_i^T taken algebraically from an assembled global matrix.
class RasPreconditioner {
 public:
  RasPreconditioner(const CsrMatrix& a, const OverlapDecomposition& dec, const SolverConfig& cfg) : dec_(&dec) {
    if (a.rows != dec.num_global_nodes) throw ConformanceError("RAS: matrix does not match decomposition");
    for (int s = 0; s < dec.size(); ++s) {
      const auto& sd = dec.subdomains[s];
      local_.emplace_back(principal_submatrix(a, sd.local_nodes()), cfg, s);
    }
  }

  void apply(std::span<const double> r, std::span<double> z) const {
    std::fill(z.begin(), z.end(), 0.0);
    std::vector<double> rl, zl, work;
    for (int s = 0; s < dec_->size(); ++s) {
      const auto& sd = dec_->subdomains[s];
      rl.resize(sd.num_local_nodes);
      zl.resize(sd.num_local_nodes);
      for (std::size_t l = 0; l < sd.num_local_nodes; ++l) rl[l] = r[sd.nodes[l]];
      local_[s].solve(rl, zl, work);
      for (std::size_t l = 0; l < sd.num_local_nodes; ++l) z[sd.nodes[l]] += sd.pou_weight[l] * zl[l];
    }
  }

 private:
  const OverlapDecomposition* dec_;
  std::vector<LocalSolver> local_;
};

/// Restarted GMRES, right preconditioned: solves A M^{-1} y = b, x = M^{-1} y,
/// so the monitored residual is the residual of the original system.
/// `x` holds the initial guess on entry and the solution on exit.
///
/// Throws SingularError on breakdown without convergence and
/// ConvergenceError (carrying the best iterate) when `max_iters` is reached.
template <class Op, class Prec, class Space = SerialSpace>
SolveStats gmres_solve(const Op& a, std::span<const double> b, std::span<double> x, const Prec& m,
                       const SolverConfig& cfg, const Space& space = {}) {
  cfg.validate();
  if (b.size() != x.size()) throw ConformanceError("gmres: b and x sizes differ");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = b.size();
  const int restart = cfg.restart;

  SolveStats st;
  auto finish = [&] {
    st.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return st;
  };

  const double bnorm = std::sqrt(space.dot(b, b));
  const double tol = std::max(cfg.rel_tol * bnorm, cfg.abs_tol);

  std::vector<std::vector<double>> v(restart + 1, std::vector<double>(n)), z(restart, std::vector<double>(n));
  std::vector<double> w(n), r(n);
  std::vector<double> h((restart + 1) * restart), cs(restart), sn(restart), g(restart + 1), y(restart),
      hcol(restart + 1), hcol2(restart + 1);
  auto H = [&](int i, int j) -> double& { return h[static_cast<std::size_t>(i) * restart + j]; };

  auto true_residual = [&] {
    a.apply(x, r);
    space.rsub(b, r);
    return std::sqrt(space.dot(r, r));
  };

  double beta = true_residual();
  st.residual = beta;
  for (;;) {
    if (beta <= tol) return finish();
    if (st.iterations >= cfg.max_iters) {
      finish();
      throw ConvergenceError("gmres: no convergence after " + std::to_string(st.iterations) +
                                 " iterations (residual " + std::to_string(beta) + ")",
                             std::vector<double>(x.begin(), x.end()), st.iterations, beta);
    }
    st.restart_starts.push_back(st.history.size());
    space.scale(1.0 / beta, r, v[0]);
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    int k = 0;
    bool breakdown = false;
    for (int j = 0; j < restart && st.iterations < cfg.max_iters; ++j) {
      m.apply(v[j], z[j]);
      a.apply(z[j], w);
      const double wnorm0 = std::sqrt(space.dot(w, w));
      // Classical Gram-Schmidt, applied twice.
      space.gram(v, j + 1, w, hcol);
      space.combine(v, j + 1, hcol, -1.0, w);
      space.gram(v, j + 1, w, hcol2);
      space.combine(v, j + 1, hcol2, -1.0, w);
      for (int i = 0; i <= j; ++i) H(i, j) = hcol[i] + hcol2[i];
      const double hn = std::sqrt(space.dot(w, w));
      H(j + 1, j) = hn;

      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double rho = std::hypot(H(j, j), H(j + 1, j));
      if (rho == 0.0) {
        // Krylov space collapsed with a singular projected matrix.
        finish();
        throw SingularError("gmres: breakdown, operator is singular on the Krylov space");
      }
      cs[j] = H(j, j) / rho;
      sn[j] = H(j + 1, j) / rho;
      H(j, j) = rho;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];

      ++st.iterations;
      k = j + 1;
      st.history.push_back(std::abs(g[j + 1]));
      if (hn <= 1e-14 * wnorm0 || hn == 0.0) {
        breakdown = true;
        break;
      }
      if (std::abs(g[j + 1]) <= tol) break;
      space.scale(1.0 / hn, w, v[j + 1]);
    }

    for (int i = k - 1; i >= 0; --i) {
      double s = g[i];
      for (int l = i + 1; l < k; ++l) s -= H(i, l) * y[l];
      y[i] = s / H(i, i);
    }
    space.combine(z, k, y, 1.0, x);
    beta = true_residual();
    st.residual = beta;
    if (breakdown && beta > tol) {
      finish();
      throw SingularError("gmres: breakdown without convergence (residual " + std::to_string(beta) + ")");
    }
  }
}

template <class Op, class Prec>
std::pair<std::vector<double>, SolveStats> gmres_solve(const Op& a, std::span<const double> b, const Prec& m,
                                                       const SolverConfig& cfg) {
  std::vector<double> x(b.size(), 0.0);
  auto st = gmres_solve(a, b, std::span<double>(x), m, cfg);
  return {std::move(x), std::move(st)};
}

}  // namespace rdls
