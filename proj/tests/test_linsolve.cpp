#include <gtest/gtest.h>

#include "rdls/cluster.hpp"
#include "rdls/fem.hpp"
#include "rdls/linsolve.hpp"
#include "support.hpp"

using namespace rdls;
using rdls::test::rel_diff;
using rdls::test::unit_cube;

namespace {

SolverConfig plain(PreconditionerKind p = PreconditionerKind::none) {
  SolverConfig c;
  c.preconditioner = p;
  return c;
}

/// A diffusion-reaction system with penalty rows, like the Mg step, row-equilibrated.
std::pair<CsrMatrix, std::vector<double>> sample_system(const Mesh& m) {
  const std::size_t n = m.num_nodes();
  std::vector<double> d(n), alpha(n), f(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& x = m.nodes()[i];
    d[i] = 0.05 + 0.1 * x[0];
    alpha[i] = 1.0 / (1.0 + 0.025 * (0.5 + x[1]));
    f[i] = x[2];
    u[i] = std::sin(3 * x[0]) * x[1];
  }
  AssemblyInput in;
  in.mesh = &m;
  in.dt = 0.25;
  in.diffusion = d;
  in.alpha = alpha;
  in.source = f;
  in.previous = u;
  in.lump_mass = true;
  for (std::size_t i = 0; i < n; ++i)
    if (m.nodes()[i][0] < 0.3) in.penalty.nodes.push_back(static_cast<Index>(i));
  in.penalty.target = 2.0;
  auto sys = assemble_system(in);
  equilibrate_rows(sys.first, sys.second);
  return sys;
}

}  // namespace

TEST(Gmres, IdentityConvergesInOneIteration) {
  const CsrMatrix a = CsrMatrix::identity(5);
  const std::vector<double> b{1, 2, 3, 4, 5};
  const auto [x, st] = gmres_solve(a, b, IdentityPreconditioner{}, plain());
  EXPECT_EQ(st.iterations, 1);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(x[i], b[i], 1e-14);
}

TEST(Gmres, TwoByTwo) {
  const CsrMatrix a = CsrMatrix::from_dense({{4, 1}, {1, 3}});
  const auto [x, st] = gmres_solve(a, std::vector<double>{1, 2}, IdentityPreconditioner{}, plain());
  EXPECT_NEAR(x[0], 1.0 / 11.0, 1e-12);
  EXPECT_NEAR(x[1], 7.0 / 11.0, 1e-12);
  EXPECT_LE(st.residual, 1e-8 * std::sqrt(5.0));
}

TEST(Gmres, InconsistentSingularSystemIsAnError) {
  const CsrMatrix a = CsrMatrix::from_dense({{1, 0}, {0, 0}});
  const std::vector<double> b{1, 1};
  EXPECT_THROW(gmres_solve(a, b, IdentityPreconditioner{}, plain()), SingularError);
}

TEST(Gmres, IterationCapCarriesBestIterate) {
  const Mesh m = unit_cube(4);
  const auto [a, b] = sample_system(m);
  SolverConfig cfg = plain();
  cfg.max_iters = 3;
  cfg.restart = 2;
  try {
    gmres_solve(a, b, IdentityPreconditioner{}, cfg);
    FAIL() << "expected non-convergence";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.iterations(), 3);
    ASSERT_EQ(e.best_iterate().size(), b.size());
    std::vector<double> r(b.size());
    a.multiply(e.best_iterate(), r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    EXPECT_NEAR(rdls::test::norm2(r), e.residual(), 1e-9 * rdls::test::norm2(b));
  }
}

TEST(Gmres, ResidualNonIncreasingWithinRestartCycles) {
  const Mesh m = unit_cube(5);
  const auto [a, b] = sample_system(m);
  SolverConfig cfg = plain();
  cfg.restart = 10;
  std::vector<double> x(b.size(), 0.0);
  const auto st = gmres_solve(a, b, std::span<double>(x), IdentityPreconditioner{}, cfg);
  ASSERT_GE(st.restart_starts.size(), 2u);
  for (std::size_t c = 0; c < st.restart_starts.size(); ++c) {
    const std::size_t lo = st.restart_starts[c];
    const std::size_t hi = c + 1 < st.restart_starts.size() ? st.restart_starts[c + 1] : st.history.size();
    for (std::size_t k = lo + 1; k < hi; ++k) EXPECT_LE(st.history[k], st.history[k - 1] * (1 + 1e-12));
  }
  const auto ref = rdls::test::dense_solve(a, b);
  EXPECT_LT(rel_diff(x, ref), 1e-6);
}

TEST(Ras, SingleSubdomainIsAnExactSolve) {
  const Mesh m = unit_cube(3);
  const auto [a, b] = sample_system(m);
  const auto dec = build_overlap(m, partition_mesh(m, 1), 1);
  SolverConfig cfg;
  cfg.ras_local_solver = LocalSolverKind::dense_lu;
  const RasPreconditioner ras(a, dec, cfg);
  std::vector<double> z(b.size());
  ras.apply(b, z);
  EXPECT_LT(rel_diff(z, rdls::test::dense_solve(a, b)), 1e-10);
}

TEST(Ras, DiagonalMatrixReducesToJacobi) {
  const Mesh m = unit_cube(3);
  const auto dvals = rdls::test::random_vector(m.num_nodes(), 5, 0.5, 3.0);
  CsrMatrix a = pattern_from_elements(m.num_nodes(), m.tets());
  for (std::size_t i = 0; i < a.rows; ++i) a.val[a.find(i, static_cast<Index>(i))] = dvals[i];
  const auto r = rdls::test::random_vector(m.num_nodes(), 6);
  const JacobiPreconditioner jac(a);
  std::vector<double> zj(r.size()), zr(r.size());
  jac.apply(r, zj);
  for (int n : {1, 2, 4, 8}) {
    const auto dec = build_overlap(m, partition_mesh(m, n), 1);
    for (auto kind : {LocalSolverKind::dense_lu, LocalSolverKind::ilu0}) {
      SolverConfig cfg;
      cfg.ras_local_solver = kind;
      RasPreconditioner(a, dec, cfg).apply(r, zr);
      for (std::size_t i = 0; i < r.size(); ++i) EXPECT_DOUBLE_EQ(zr[i], zj[i]);
    }
  }
}

TEST(Ras, TwoSubdomainsMatchDenseSolve) {
  const Mesh m = unit_cube(4);
  const auto [a, b] = sample_system(m);
  const auto dec = build_overlap(m, partition_mesh(m, 2), 1);
  SolverConfig cfg;
  cfg.rel_tol = 1e-12;
  const RasPreconditioner ras(a, dec, cfg);
  std::vector<double> x(b.size(), 0.0);
  gmres_solve(a, b, std::span<double>(x), ras, cfg);
  EXPECT_LT(rel_diff(x, rdls::test::dense_solve(a, b)), 1e-8);
}

TEST(Ras, SingularLocalBlockNamesTheSubdomain) {
  const Mesh m = unit_cube(2);
  CsrMatrix a = pattern_from_elements(m.num_nodes(), m.tets());
  for (std::size_t i = 0; i < a.rows; ++i) a.val[a.find(i, static_cast<Index>(i))] = 1.0;
  const auto dec = build_overlap(m, partition_mesh(m, 2), 0);
  const Index victim = dec.subdomains[1].nodes[0];
  a.val[a.find(victim, victim)] = 0.0;
  SolverConfig cfg;
  cfg.ras_local_solver = LocalSolverKind::ilu0;
  try {
    RasPreconditioner ras(a, dec, cfg);
    FAIL() << "expected a singular subdomain";
  } catch (const SingularError& e) {
    EXPECT_GE(e.subdomain(), 0);
    EXPECT_NE(std::string(e.what()).find("subdomain"), std::string::npos);
  }
}

TEST(LocalSolver, IluSweepsApproachTheExactSolve) {
  const Mesh m = unit_cube(4);
  const auto [a, b] = sample_system(m);
  const auto exact = rdls::test::dense_solve(a, b);
  double prev = 1e300;
  for (int sweeps : {1, 2, 4, 8}) {
    SolverConfig cfg;
    cfg.ras_local_solver = LocalSolverKind::ilu0;
    cfg.inner_sweeps = sweeps;
    const LocalSolver ls(a, cfg);
    EXPECT_FALSE(ls.is_dense());
    std::vector<double> z(b.size()), w;
    ls.solve(b, z, w);
    const double err = rel_diff(z, exact);
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(ClusterSolve, SolutionIndependentOfDecomposition) {
  const Mesh m = generate_box_mesh(GeometryPrimitive::box({0, 0, 0}, {1, 1, 1}),
                                   GeometryPrimitive::centered_box({0.5, 0.5, 0.5}, {0.3, 0.3, 0.3}), 0.2, 0.08);
  const std::size_t n = m.num_nodes();
  std::vector<double> d(n), alpha(n), f(n), u(n);
  std::vector<char> pen(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& x = m.nodes()[i];
    d[i] = 0.05 + 0.1 * x[0];
    alpha[i] = 1.0 / (1.0 + 0.025 * (0.5 + x[1]));
    f[i] = x[2];
    u[i] = 0.0;
    pen[i] = std::max({std::abs(x[0] - 0.5), std::abs(x[1] - 0.5), std::abs(x[2] - 0.5)}) <= 0.15;
  }
  StepSystem sys;
  sys.dt = 0.025;
  sys.diffusion = d;
  sys.alpha = alpha;
  sys.source = f;
  sys.previous = u;
  sys.lump_mass = true;
  sys.penalized = pen;
  sys.penalty_target = 1740.0;
  SolverConfig cfg;
  std::vector<std::vector<double>> sols;
  for (int w : {1, 2, 4, 8}) {
    Cluster c(m, w, 1);
    std::vector<double> x(n, 0.0);
    const auto st = c.solve(sys, x, cfg);
    EXPECT_GT(st.iterations, 0);
    sols.push_back(x);
  }
  for (std::size_t i = 0; i < sols.size(); ++i)
    for (std::size_t j = i + 1; j < sols.size(); ++j) EXPECT_LT(rel_diff(sols[i], sols[j]), 10 * cfg.rel_tol);
}

TEST(ClusterSolve, MatchesSerialAssemblyAndIsReproducible) {
  const Mesh m = unit_cube(5);
  const std::size_t n = m.num_nodes();
  const auto u = rdls::test::random_vector(n, 4, 0.0, 1.0);
  const std::vector<double> d(n, 0.2), alpha(n, 0.9), f(n, 0.3);
  StepSystem sys;
  sys.dt = 0.1;
  sys.diffusion = d;
  sys.alpha = alpha;
  sys.source = f;
  sys.previous = u;
  AssemblyInput in;
  in.mesh = &m;
  in.dt = 0.1;
  in.diffusion = d;
  in.alpha = alpha;
  in.source = f;
  in.previous = u;
  const auto [a, b] = assemble_system(in);
  const auto ref = rdls::test::dense_solve(a, b);
  for (auto p : {PreconditionerKind::none, PreconditionerKind::jacobi, PreconditionerKind::ras}) {
    SolverConfig cfg;
    cfg.preconditioner = p;
    cfg.rel_tol = 1e-12;
    Cluster c(m, 3, 1);
    std::vector<double> x1(n, 0.0), x2(n, 0.0);
    const auto s1 = c.solve(sys, x1, cfg);
    const auto s2 = c.solve(sys, x2, cfg);
    EXPECT_LT(rel_diff(x1, ref), 1e-10);
    EXPECT_EQ(x1, x2);
    EXPECT_EQ(s1.iterations, s2.iterations);
  }
}

TEST(SolveLog, Format) {
  SolveStats s;
  s.iterations = 12;
  s.residual = 3.5e-9;
  s.wall_seconds = 0.25;
  EXPECT_EQ(format_solve_log("mg", s), "pde=mg iters=12 resid=3.500000e-09 t=0.250000");
}
