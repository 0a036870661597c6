#include <gtest/gtest.h>

#include <sstream>

#include "rdls/config.hpp"

using namespace rdls;

namespace {

const char* minimal = R"(
[mesh]
fine_h = 2   # mm
[time]
end_time = 0.5
)";

std::string key_of(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

}  // namespace

TEST(Config, MinimalGetsDefaults) {
  const SimConfig c = parse_config_string(minimal);
  EXPECT_DOUBLE_EQ(c.dt, 0.025);
  EXPECT_DOUBLE_EQ(c.end_time, 0.5);
  EXPECT_EQ(c.num_steps(), 20);
  EXPECT_DOUBLE_EQ(c.mesh.fine_h, 2.0);
  EXPECT_DOUBLE_EQ(c.mesh.coarse_h, 2.0);
  EXPECT_EQ(c.workers, 1);
  EXPECT_EQ(c.overlap, 1);
  EXPECT_TRUE(c.penalty);
  EXPECT_EQ(c.film_scheme, FilmScheme::conservative);
  EXPECT_EQ(c.mode, RunMode::simulate);
  EXPECT_EQ(c.measure_steps, 5);
}

TEST(Config, EchoListsDefaultsAndReparses) {
  SimConfig c = parse_config_string(minimal);
  c.workers = 3;
  c.chem.k1 = 0.75;
  c.mg_solver.preconditioner = PreconditionerKind::jacobi;
  std::ostringstream os;
  write_config(c, os);
  const std::string echo = os.str();
  EXPECT_NE(echo.find("dt = 0.025"), std::string::npos);
  EXPECT_NE(echo.find("[solver.ls]"), std::string::npos);
  const SimConfig back = parse_config_string(echo);
  std::ostringstream again;
  write_config(back, again);
  EXPECT_EQ(again.str(), echo);
  EXPECT_EQ(back.workers, 3);
  EXPECT_DOUBLE_EQ(back.chem.k1, 0.75);
  EXPECT_EQ(back.mg_solver.preconditioner, PreconditionerKind::jacobi);
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_config_string(std::string(minimal) + "foo = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(e.key().find("foo"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("foo"), std::string::npos);
  }
  EXPECT_EQ(key_of(std::string(minimal) + "[nosuch]\n"), "nosuch");
}

TEST(Config, NegativeStepIsNamed) {
  EXPECT_EQ(key_of(std::string(minimal) + "dt = -1\n"), "time.dt");
}

TEST(Config, ValueErrorsNameTheirKey) {
  EXPECT_EQ(key_of("[time]\nend_time = 1\n"), "mesh.fine_h");
  EXPECT_EQ(key_of("[mesh]\nfine_h = 1\n"), "time.end_time");
  EXPECT_EQ(key_of(std::string(minimal) + "[fem]\npenalty = maybe\n"), "fem.penalty");
  EXPECT_EQ(key_of(std::string(minimal) + "[fem]\nfilm_scheme = explicit\n"), "fem.film_scheme");
  EXPECT_EQ(key_of(std::string(minimal) + "[chem]\nporosity = 2\n"), "chem.porosity");
  EXPECT_EQ(key_of(std::string(minimal) + "[parallel]\nworkers = 0\n"), "parallel.workers");
  EXPECT_EQ(key_of(std::string(minimal) + "[mesh]\ninner_lo = 1 2\n"), "mesh.inner_lo");
  EXPECT_EQ(key_of(std::string(minimal) + "end_time = 2\n"), "time.end_time");  // duplicate
  EXPECT_EQ(key_of(std::string(minimal) + "[solver.mg]\nrel_tol = abc\n"), "solver.mg.rel_tol");
  EXPECT_EQ(key_of(std::string(minimal) + "[solver.ls]\nmethod = cg\n"), "solver.ls.method");
}

TEST(Config, SyntaxErrorsCarryLine) {
  try {
    parse_config_string("[mesh]\nfine_h 2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_config_string("[mesh\n"), ParseError);
}

TEST(Config, SectionsAndTypes) {
  const SimConfig c = parse_config_string(R"(
[mesh]
outer_lo = 0, 0, 0
outer_hi = 10 10 10
inner = sphere
inner_center = 5 5 5
inner_radius = 2
coarse_h = 2
fine_h = 0.5
[time]
dt = 0.01
end_time = 0.1
[parallel]
workers = 4
seed = 9
[run]
mode = strong_scaling
workers_list = 1, 2, 4
[output]
snapshot_interval = 5
solver_log = yes
)");
  EXPECT_EQ(c.mesh.inner.kind, GeometryPrimitive::Kind::sphere);
  EXPECT_DOUBLE_EQ(c.mesh.inner.radius, 2.0);
  EXPECT_DOUBLE_EQ(c.mesh.outer.hi[2], 10.0);
  EXPECT_EQ(c.workers, 4);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.mode, RunMode::strong_scaling);
  EXPECT_EQ(c.scaling_workers, (std::vector<int>{1, 2, 4}));
  EXPECT_EQ(c.snapshot_interval, 5);
  EXPECT_TRUE(c.solver_log);
}

TEST(Config, FitOnlyNeedsNoMesh) {
  const SimConfig c = parse_config_string("[run]\nmode = fit_only\ntimings = t.csv\nlaw = gustafson\n");
  EXPECT_EQ(c.mode, RunMode::fit_only);
  EXPECT_EQ(c.law, "gustafson");
  EXPECT_EQ(key_of("[run]\nmode = fit_only\n"), "run.timings");
}
