#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "rdls/fem.hpp"
#include "rdls/linsolve.hpp"
#include "support.hpp"

using namespace rdls;
using rdls::test::reference_tet;
using rdls::test::unit_cube;

TEST(ElementMatrices, ReferenceTetMass) {
  const auto em = element_matrices(reference_tet(), 0);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) EXPECT_NEAR(em.mass[a][b], a == b ? 1.0 / 60 : 1.0 / 120, 1e-16);
}

TEST(ElementMatrices, StiffnessRowsSumToZeroAndScale) {
  const std::array<Vec3, 4> x{Vec3{0.1, 0.2, 0.0}, Vec3{1.3, 0.1, 0.2}, Vec3{0.3, 1.1, 0.1}, Vec3{0.2, 0.4, 0.9}};
  const auto em = element_matrices(x);
  std::array<Vec3, 4> y;
  for (int a = 0; a < 4; ++a) y[a] = 2.0 * x[a];
  const auto e2 = element_matrices(y);
  for (int a = 0; a < 4; ++a) {
    double s = 0.0;
    for (int b = 0; b < 4; ++b) {
      s += em.stiffness[a][b];
      EXPECT_NEAR(e2.mass[a][b], 8.0 * em.mass[a][b], 1e-14);
      EXPECT_NEAR(e2.stiffness[a][b], 2.0 * em.stiffness[a][b], 1e-13);
    }
    EXPECT_NEAR(s, 0.0, 1e-14);
  }
}

TEST(ElementMatrices, DegenerateTetIsAnAssemblyError) {
  const std::array<Vec3, 4> flat{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{1, 1, 0}};
  EXPECT_THROW(element_matrices(flat), AssemblyError);
}

namespace {

struct Uniform {
  std::vector<double> d, alpha, f, u;
  Uniform(std::size_t n, double dv, double av, double fv, double uv) : d(n, dv), alpha(n, av), f(n, fv), u(n, uv) {}
  AssemblyInput input(const Mesh& m, double dt) const {
    AssemblyInput in;
    in.mesh = &m;
    in.dt = dt;
    in.diffusion = d;
    in.alpha = alpha;
    in.source = f;
    in.previous = u;
    return in;
  }
};

}  // namespace

TEST(Assembly, PureIdentityStep) {
  const Mesh m = unit_cube(3);
  Uniform c(m.num_nodes(), 0.0, 1.0, 0.0, 0.0);
  c.u = rdls::test::random_vector(m.num_nodes(), 1);
  const auto [a, b] = assemble_system(c.input(m, 0.1));
  const CsrMatrix mm = mass_matrix(m);
  ASSERT_EQ(a.val.size(), mm.val.size());
  for (std::size_t k = 0; k < a.val.size(); ++k) EXPECT_NEAR(a.val[k], mm.val[k], 1e-15);
  const auto x = rdls::test::dense_solve(a, b);
  EXPECT_LT(rdls::test::rel_diff(x, c.u), 1e-12);
}

TEST(Assembly, SingleElementMatchesDenseOracle) {
  const Mesh m = reference_tet();
  Uniform c(4, 1.0, 1.0, 0.0, 0.0);
  const auto [a, b] = assemble_system(c.input(m, 1.0));
  // Oracle: M from exact integration, K from the explicit reference gradients.
  const double g[4][3] = {{-1, -1, -1}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double mij = (i == j ? 2.0 : 1.0) / 120.0;
      const double kij = (g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2]) / 6.0;
      EXPECT_NEAR(a.at(i, j), mij + kij, 1e-15);
    }
}

TEST(Assembly, PenaltyPinsTheTarget) {
  const Mesh m = unit_cube(3);
  Uniform c(m.num_nodes(), 0.1, 0.9, 0.0, 0.0);
  AssemblyInput in = c.input(m, 0.05);
  in.penalty.nodes = {0, 7, 20};
  in.penalty.target = 278.0;
  in.penalty.weight = 1e10;
  const auto [a, b] = assemble_system(in);
  const auto x = rdls::test::dense_solve(a, b);
  for (Index k : in.penalty.nodes) EXPECT_NEAR(x[k], 278.0, 278.0 * 1e-6);
}

TEST(Assembly, InputValidation) {
  const Mesh m = unit_cube(2);
  Uniform c(m.num_nodes(), 1.0, 1.0, 0.0, 0.0);
  EXPECT_THROW(assemble_system(c.input(m, 0.0)), ValidationError);
  Uniform shortv(m.num_nodes() - 1, 1.0, 1.0, 0.0, 0.0);
  AssemblyInput in = c.input(m, 0.1);
  in.alpha = shortv.alpha;
  EXPECT_THROW(assemble_system(in), ConformanceError);
  Uniform nan(m.num_nodes(), 1.0, 1.0, 0.0, 0.0);
  nan.f[3] = std::nan("");
  EXPECT_THROW(assemble_system(nan.input(m, 0.1)), ValidationError);
  Uniform neg(m.num_nodes(), -1.0, 1.0, 0.0, 0.0);
  EXPECT_THROW(assemble_system(neg.input(m, 0.1)), ValidationError);
  Uniform big(m.num_nodes(), 1.0, 1.5, 0.0, 0.0);
  EXPECT_THROW(assemble_system(big.input(m, 0.1)), ValidationError);
}

TEST(Assembly, PatternIsSymmetricWithSortedColumns) {
  const Mesh m = generate_box_mesh(GeometryPrimitive::box({0, 0, 0}, {1, 1, 1}),
                                   GeometryPrimitive::centered_box({0.5, 0.5, 0.5}, {0.3, 0.3, 0.3}), 0.3, 0.1);
  const CsrMatrix k = stiffness_matrix(m);
  for (std::size_t i = 0; i < k.rows; ++i)
    for (auto p = k.row_ptr[i]; p < k.row_ptr[i + 1]; ++p) {
      if (p + 1 < k.row_ptr[i + 1]) {
        ASSERT_LT(k.col[p], k.col[p + 1]);
      }
      ASSERT_GE(k.find(static_cast<std::size_t>(k.col[p]), static_cast<Index>(i)), 0);
      EXPECT_NEAR(k.val[p], k.at(k.col[p], static_cast<Index>(i)), 1e-14);
    }
}

TEST(MassMatrix, ConsistentMassIsPositiveDefinite) {
  const Mesh m = unit_cube(3);
  const CsrMatrix mm = mass_matrix(m);
  Eigen::MatrixXd d(mm.rows, mm.cols);
  const auto dense = mm.to_dense();
  for (std::size_t i = 0; i < mm.rows; ++i)
    for (std::size_t j = 0; j < mm.cols; ++j) d(i, j) = dense[i][j];
  EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(d).info(), Eigen::Success);
  for (unsigned s = 0; s < 5; ++s) {
    const auto v = rdls::test::random_vector(mm.rows, s);
    const auto mv = mm * v;
    double q = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) q += v[i] * mv[i];
    EXPECT_GT(q, 0.0);
  }
}

TEST(MassMatrix, StiffnessAnnihilatesConstants) {
  const Mesh m = unit_cube(4);
  const CsrMatrix k = stiffness_matrix(m);
  const std::vector<double> one(m.num_nodes(), 1.0);
  EXPECT_LE(rdls::test::norm2(k * one), 1e-12 * k.norm());
}

TEST(Lumping, RowSums) {
  const Mesh t = reference_tet();
  for (double v : lump_mass(mass_matrix(t))) EXPECT_NEAR(v, 1.0 / 24.0, 1e-17);
  const Mesh m = unit_cube(3);
  const auto l = lump_mass(mass_matrix(m));
  double s = 0.0;
  for (double v : l) s += v;
  EXPECT_NEAR(s, m.total_volume(), 1e-13);
  const auto l2 = lumped_mass(m);
  for (std::size_t i = 0; i < l.size(); ++i) EXPECT_NEAR(l[i], l2[i], 1e-15);
  const CsrMatrix diag = CsrMatrix::from_dense({{2, 0}, {0, 5}});
  EXPECT_EQ(lump_mass(diag), (std::vector<double>{2, 5}));
  EXPECT_THROW(lump_mass(CsrMatrix::from_dense({{1, -2}, {0, 1}})), GeometryError);
}

TEST(Assembly, PureDiffusionConservesLumpedMass) {
  const Mesh m = unit_cube(4);
  Uniform c(m.num_nodes(), 0.3, 1.0, 0.0, 0.0);
  c.u = rdls::test::random_vector(m.num_nodes(), 9, 0.0, 1.0);
  AssemblyInput in = c.input(m, 0.1);
  in.lump_mass = true;
  const auto [a, b] = assemble_system(in);
  std::vector<double> x(b.size(), 0.0);
  SolverConfig cfg;
  cfg.preconditioner = PreconditionerKind::jacobi;
  cfg.rel_tol = 1e-13;
  gmres_solve(a, b, std::span<double>(x), JacobiPreconditioner(a), cfg);
  const auto lm = lumped_mass(m);
  double before = 0.0, after = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    before += lm[i] * c.u[i];
    after += lm[i] * x[i];
  }
  EXPECT_NEAR(after, before, 1e-11 * before);
}

TEST(MatrixMarket, Export) {
  const CsrMatrix a = CsrMatrix::from_dense({{4, 1}, {0, 3}});
  std::stringstream ss;
  write_matrix_market(a, ss);
  EXPECT_EQ(ss.str(), "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 4\n1 2 1\n2 2 3\n");
}
