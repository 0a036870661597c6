#pragma once

#include <memory>
#include <span>
#include <vector>

#include "rdls/decomp.hpp"
#include "rdls/fem.hpp"
#include "rdls/linsolve.hpp"
#include "rdls/mesh.hpp"
#include "rdls/workers.hpp"

namespace rdls {

/// Vector operations split over workers by node ownership. Reductions are
/// per-worker partial sums added in worker order, so results depend on the
/// worker count but never on scheduling.
class DistributedSpace {
 public:
  DistributedSpace(WorkerPool& pool, const std::vector<std::vector<Index>>& owned)
      : pool_(&pool), owned_(&owned), partial_(owned.size()) {}

  double dot(std::span<const double> a, std::span<const double> b) const {
    pool_->run([&](int w) {
      double s = 0.0;
      for (Index g : (*owned_)[w]) s += a[g] * b[g];
      partial_[w].assign(1, s);
    });
    double s = 0.0;
    for (const auto& p : partial_) s += p[0];
    return s;
  }

  void gram(const std::vector<std::vector<double>>& v, int k, std::span<const double> x, std::span<double> h) const {
    pool_->run([&](int w) {
      auto& p = partial_[w];
      p.assign(k, 0.0);
      for (int j = 0; j < k; ++j) {
        const auto& vj = v[j];
        double s = 0.0;
        for (Index g : (*owned_)[w]) s += vj[g] * x[g];
        p[j] = s;
      }
    });
    for (int j = 0; j < k; ++j) {
      double s = 0.0;
      for (const auto& p : partial_) s += p[j];
      h[j] = s;
    }
  }

  void combine(const std::vector<std::vector<double>>& v, int k, std::span<const double> c, double sign,
               std::span<double> x) const {
    pool_->run([&](int w) {
      for (Index g : (*owned_)[w]) {
        double s = x[g];
        for (int j = 0; j < k; ++j) s += sign * c[j] * v[j][g];
        x[g] = s;
      }
    });
  }

  void scale(double a, std::span<const double> x, std::span<double> y) const {
    pool_->run([&](int w) {
      for (Index g : (*owned_)[w]) y[g] = a * x[g];
    });
  }

  void rsub(std::span<const double> b, std::span<double> y) const {
    pool_->run([&](int w) {
      for (Index g : (*owned_)[w]) y[g] = b[g] - y[g];
    });
  }

 private:
  WorkerPool* pool_;
  const std::vector<std::vector<Index>>* owned_;
  mutable std::vector<std::vector<double>> partial_;
};

/// Coefficients of one linear step `A u = b` (see AssemblyInput), as global
/// nodal vectors. `penalized` may be empty.
struct StepSystem {
  double dt = 0.0;
  std::span<const double> diffusion, alpha, source, previous;
  bool lump_mass = false;
  std::span<const char> penalized;
  double penalty_target = 0.0;
  double penalty_weight = 1e10;
};

/// N persistent subdomain workers over one mesh. Each worker owns the
/// assembly, matrix rows and local solver of its subdomain; global nodal
/// vectors live in shared buffers where a worker writes only the entries it
/// owns and reads ghost entries after the next barrier.
class Cluster {
 public:
  Cluster(const Mesh& mesh, int workers, int delta = 1, unsigned seed = 0)
      : Cluster(mesh, build_overlap(mesh, partition_mesh(mesh, workers, seed), delta)) {}

  Cluster(const Mesh& mesh, OverlapDecomposition dec)
      : mesh_(&mesh), dec_(std::move(dec)), pool_(dec_.size()), workers_(dec_.size()) {
    if (dec_.num_global_nodes != mesh.num_nodes()) throw ConformanceError("Cluster: decomposition does not match mesh");
    owned_.resize(dec_.size());
    pool_.run([&](int w) {
      const auto& sd = dec_.subdomains[w];
      auto& wk = workers_[w];
      wk.assembler = LocalAssembler(mesh, sd.elements, sd.local_tets, sd.nodes.size());
      for (Index l : sd.owned) owned_[w].push_back(sd.nodes[l]);
    });
  }

  int size() const noexcept { return dec_.size(); }
  const Mesh& mesh() const noexcept { return *mesh_; }
  const OverlapDecomposition& decomposition() const noexcept { return dec_; }
  const std::vector<std::vector<Index>>& owned() const noexcept { return owned_; }
  WorkerPool& pool() noexcept { return pool_; }
  DistributedSpace space() { return DistributedSpace(pool_, owned_); }

  /// Runs `f(worker, global_node)` over every worker's owned nodes.
  template <class F>
  void for_owned(F&& f) {
    pool_.run([&](int w) {
      for (Index g : owned_[w]) f(w, g);
    });
  }

  /// Deterministic sum of per-worker partials `f(worker)`.
  template <class F>
  double reduce(F&& f) {
    std::vector<double> part(size());
    pool_.run([&](int w) { part[w] = f(w); });
    double s = 0.0;
    for (double p : part) s += p;
    return s;
  }

  /// Assembles the system on every worker, equilibrates rows, builds the
  /// preconditioner and solves with GMRES. `x` is the initial guess on entry.
  SolveStats solve(const StepSystem& sys, std::span<double> x, const SolverConfig& cfg) {
    cfg.validate();
    const std::size_t n = mesh_->num_nodes();
    if (x.size() != n) throw ConformanceError("Cluster::solve: solution vector has wrong size");
    b_.assign(n, 0.0);
    pool_.run([&](int w) { assemble_worker(w, sys, cfg); });

    Operator op{this};
    SolveStats st;
    switch (cfg.preconditioner) {
      case PreconditionerKind::none:
        st = gmres_solve(op, b_, x, NoPrec{this}, cfg, space());
        break;
      case PreconditionerKind::jacobi:
        st = gmres_solve(op, b_, x, JacobiPrec{this}, cfg, space());
        break;
      case PreconditionerKind::ras:
        st = gmres_solve(op, b_, x, RasPrec{this}, cfg, space());
        break;
    }
    return st;
  }

  /// Local matrix of worker `w` after the last `solve` (rows equilibrated).
  const CsrMatrix& local_matrix(int w) const { return workers_[w].assembler.matrix(); }

 private:
  struct Worker {
    LocalAssembler assembler;
    std::vector<double> rhs, inv_diag, coef[4], r, z, work;
    std::vector<char> pen;
    LocalSolver solver;
  };

  void assemble_worker(int w, const StepSystem& sys, const SolverConfig& cfg) {
    const auto& sd = dec_.subdomains[w];
    auto& wk = workers_[w];
    const std::size_t nl = sd.nodes.size();
    const std::span<const double> src[4] = {sys.diffusion, sys.alpha, sys.source, sys.previous};
    for (int c = 0; c < 4; ++c) {
      wk.coef[c].resize(nl);
      for (std::size_t l = 0; l < nl; ++l) wk.coef[c][l] = src[c][sd.nodes[l]];
    }
    wk.pen.assign(nl, 0);
    if (!sys.penalized.empty())
      for (std::size_t l = 0; l < nl; ++l) wk.pen[l] = sys.penalized[sd.nodes[l]];
    wk.assembler.assemble(sys.dt, wk.coef[0], wk.coef[1], wk.coef[2], wk.coef[3], sys.lump_mass, wk.pen,
                          sys.penalty_target, sys.penalty_weight, wk.rhs);

    // Row equilibration: penalty rows are ~1e10 larger than the rest, which
    // would make ||b|| (and hence the relative tolerance) meaningless.
    CsrMatrix& a = wk.assembler.matrix();
    wk.inv_diag.assign(sd.num_local_nodes, 0.0);
    for (std::size_t l = 0; l < sd.num_local_nodes; ++l) {
      const double d = a.diagonal(l);
      if (!(d > 0.0)) throw SingularError("non-positive diagonal in subdomain " + std::to_string(w), w);
      const double s = 1.0 / d;
      wk.inv_diag[l] = s;
      for (auto k = a.row_ptr[l]; k < a.row_ptr[l + 1]; ++k) a.val[k] *= s;
      wk.rhs[l] *= s;
    }
    for (Index l : sd.owned) b_[sd.nodes[l]] = wk.rhs[l];
    if (cfg.preconditioner == PreconditionerKind::ras)
      wk.solver = LocalSolver(leading_block(a, sd.num_local_nodes), cfg, w);
  }

  struct Operator {
    Cluster* c;
    void apply(std::span<const double> x, std::span<double> y) const {
      c->pool_.run([&](int w) {
        const auto& sd = c->dec_.subdomains[w];
        const CsrMatrix& a = c->workers_[w].assembler.matrix();
        for (Index l : sd.owned) {
          double s = 0.0;
          for (auto k = a.row_ptr[l]; k < a.row_ptr[l + 1]; ++k) s += a.val[k] * x[sd.nodes[a.col[k]]];
          y[sd.nodes[l]] = s;
        }
      });
    }
  };

  struct NoPrec {
    Cluster* c;
    void apply(std::span<const double> r, std::span<double> z) const { c->space().scale(1.0, r, z); }
  };

  // After equilibration every diagonal entry is 1, so Jacobi reduces to a copy.
  struct JacobiPrec {
    Cluster* c;
    void apply(std::span<const double> r, std::span<double> z) const { c->space().scale(1.0, r, z); }
  };

  struct RasPrec {
    Cluster* c;
    void apply(std::span<const double> r, std::span<double> z) const {
      c->pool_.run([&](int w) {
        const auto& sd = c->dec_.subdomains[w];
        auto& wk = c->workers_[w];
        wk.r.resize(sd.num_local_nodes);
        wk.z.resize(sd.num_local_nodes);
        for (std::size_t l = 0; l < sd.num_local_nodes; ++l) wk.r[l] = r[sd.nodes[l]];
        wk.solver.solve(wk.r, wk.z, wk.work);
        // Boolean partition of unity: only the owner's copy has weight 1.
        for (Index l : sd.owned) z[sd.nodes[l]] = wk.z[l];
      });
    }
  };

  const Mesh* mesh_;
  OverlapDecomposition dec_;
  WorkerPool pool_;
  std::vector<Worker> workers_;
  std::vector<std::vector<Index>> owned_;
  std::vector<double> b_;
};

}  // namespace rdls
