#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "rdls/perf.hpp"
#include "rdls/vtk.hpp"
#include "support.hpp"

using namespace rdls;

namespace {

std::vector<TimingRecord> reference_timings() { return load_timings_csv(RDLS_TEST_DATA "/reference_strong_scaling.csv"); }

// Brute-force oracle: dense scan of the sum of squared residuals.
template <class Model>
double scan_minimum(const std::vector<double>& n, const std::vector<double>& s, Model model, int points = 200000) {
  double best = 0.0, best_e = 1e300;
  for (int k = 0; k <= points; ++k) {
    const double f = static_cast<double>(k) / points;
    double e = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) e += std::pow(model(f, n[i]) - s[i], 2);
    if (e < best_e) best_e = e, best = f;
  }
  return best;
}

}  // namespace

TEST(Laws, ClosedForms) {
  EXPECT_DOUBLE_EQ(amdahl_speedup(0.0, 8), 8.0);
  EXPECT_DOUBLE_EQ(amdahl_speedup(1.0, 8), 1.0);
  EXPECT_DOUBLE_EQ(amdahl_speedup(0.5, 2), 1.0 / 0.75);
  EXPECT_DOUBLE_EQ(gustafson_speedup(0.0, 8), 8.0);
  EXPECT_DOUBLE_EQ(gustafson_speedup(1.0, 8), 1.0);
}

TEST(Fit, AmdahlRecoversSyntheticFraction) {
  std::vector<double> n{1, 2, 4, 8, 16}, s;
  for (double x : n) s.push_back(amdahl_speedup(0.25, x));
  EXPECT_NEAR(fit_amdahl(n, s), 0.25, 1e-9);
}

TEST(Fit, GustafsonEndpoints) {
  const std::vector<double> n{1, 2, 4, 8};
  EXPECT_NEAR(fit_gustafson(n, n), 0.0, 1e-12);
  const std::vector<double> ones(4, 1.0);
  EXPECT_NEAR(fit_gustafson(n, ones), 1.0, 1e-12);
}

TEST(Fit, GustafsonRoundTrip) {
  std::vector<double> n{1, 2, 4, 8, 16, 32}, s;
  for (double x : n) s.push_back(gustafson_speedup(0.18, x));
  EXPECT_NEAR(fit_gustafson(n, s), 0.18, 1e-9);
}

TEST(Fit, RandomFractionsRecovered) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<double> n{1, 3, 6, 12, 24};
  for (int trial = 0; trial < 50; ++trial) {
    const double f = u(rng);
    std::vector<double> sa, sg;
    for (double x : n) {
      sa.push_back(amdahl_speedup(f, x));
      sg.push_back(gustafson_speedup(f, x));
    }
    EXPECT_NEAR(fit_amdahl(n, sa), f, 1e-8);
    EXPECT_NEAR(fit_gustafson(n, sg), f, 1e-8);
  }
}

TEST(Fit, NoisyDataMatchesBruteForceScan) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<double> n{1, 2, 4, 8, 16}, s;
  for (double x : n) s.push_back(amdahl_speedup(0.1, x) * (1.0 + noise(rng)));
  EXPECT_NEAR(fit_amdahl(n, s), scan_minimum(n, s, amdahl_speedup), 1e-5);
}

TEST(Fit, ReferenceTimingsSerialFraction) {
  const auto recs = reference_timings();
  const auto per_n = aggregate_by_workers(recs);
  const auto n = worker_counts(per_n);
  const auto s = speedups(per_n, ScalingMode::strong);
  const double f = fit_amdahl(recs);
  EXPECT_NEAR(f, 0.01, 0.005);
  EXPECT_NEAR(f, scan_minimum(n, s, amdahl_speedup), 1e-5);
}

TEST(Fit, RejectsBadInput) {
  const std::vector<double> n{2, 4}, s{1.5, 2.5};
  std::vector<TimingRecord> recs(2);
  recs[0].workers = 2;
  recs[0].total = 1.0;
  recs[1].workers = 4;
  recs[1].total = 0.6;
  EXPECT_THROW(fit_amdahl(recs), ArgumentError);
  const std::vector<double> n1{1}, s1{1};
  EXPECT_THROW(fit_amdahl(n1, s1), ArgumentError);
  const std::vector<double> bad{1, 2}, neg{1, -1};
  EXPECT_THROW(fit_gustafson(bad, neg), ArgumentError);
}

TEST(Aggregate, MedianPerBucket) {
  std::vector<TimingRecord> rs;
  for (double t : {5.0, 1.0, 3.0}) {
    TimingRecord r;
    r.workers = 2;
    r.total = t;
    r.mg_pde = 2 * t;
    rs.push_back(r);
  }
  const auto a = aggregate_by_workers(rs);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].total, 3.0);
  EXPECT_EQ(a[0].mg_pde, 6.0);
}

TEST(Speedup, WeakIsScaled) {
  std::vector<TimingRecord> rs(2);
  rs[0].workers = 1;
  rs[0].total = 2.0;
  rs[1].workers = 4;
  rs[1].total = 2.5;
  const auto s = speedups(rs, ScalingMode::weak);
  EXPECT_DOUBLE_EQ(s[1], 4 * 2.0 / 2.5);
  const auto r = make_report(rs, ScalingMode::weak);
  EXPECT_DOUBLE_EQ(r.efficiency[1], 0.8);
}

TEST(Report, SuperlinearFlagged) {
  std::vector<TimingRecord> rs(2);
  rs[0].workers = 1;
  rs[0].total = 10.0;
  rs[1].workers = 2;
  rs[1].total = 4.0;
  const auto r = make_report(rs, ScalingMode::strong);
  EXPECT_FALSE(r.superlinear[0]);
  EXPECT_TRUE(r.superlinear[1]);
  std::ostringstream os;
  write_report_table(r, os);
  EXPECT_NE(os.str().find("superlinear"), std::string::npos);
}

TEST(TimingsCsv, RoundTrip) {
  std::vector<TimingRecord> rs(3);
  for (int i = 0; i < 3; ++i) {
    rs[i].workers = 1 << i;
    rs[i].step = i + 1;
    rs[i].ls_pde = 0.125 * (i + 1);
    rs[i].mg_pde = 0.25;
    rs[i].film_pde = 0.0625;
    rs[i].total = 0.5 + i;
  }
  std::stringstream ss;
  write_timings_csv(rs, ss);
  const auto back = read_timings_csv(ss);
  ASSERT_EQ(back.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].workers, rs[i].workers);
    EXPECT_EQ(back[i].step, rs[i].step);
    EXPECT_EQ(back[i].ls_pde, rs[i].ls_pde);
    EXPECT_EQ(back[i].total, rs[i].total);
  }
}

TEST(TimingsCsv, MalformedRowNamesLine) {
  std::istringstream in(std::string(timings_header) + "\n1,0,1,1,1,3\n2,0,x,1,1,2\n");
  try {
    read_timings_csv(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream bad("N,step\n");
  EXPECT_THROW(read_timings_csv(bad), ParseError);
}

TEST(SolveLog, Parses) {
  const auto e = parse_solve_log("step=3 pde=mg iters=12 resid=1.5e-09 t=0.25");
  ASSERT_TRUE(e);
  EXPECT_EQ(e->pde, "mg");
  EXPECT_EQ(e->iterations, 12);
  EXPECT_DOUBLE_EQ(e->residual, 1.5e-9);
  EXPECT_DOUBLE_EQ(e->seconds, 0.25);
  EXPECT_FALSE(parse_solve_log("pde=mg iters=x resid=1 t=1"));
  EXPECT_FALSE(parse_solve_log("hello"));
}

TEST(Vtk, LegacyLayout) {
  const Mesh m = test::reference_tet();
  const std::vector<double> f{0, 1, 2, 3}, c{7};
  const VtkField pf[] = {{"phi", f}};
  const VtkField cf[] = {{"part", c}};
  std::ostringstream os;
  write_vtk(m, pf, cf, os);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("# vtk DataFile Version 3.0", 0), 0u);
  EXPECT_NE(s.find("POINTS 4 double"), std::string::npos);
  EXPECT_NE(s.find("CELLS 1 5\n4 0 1 2 3"), std::string::npos);
  EXPECT_NE(s.find("CELL_TYPES 1\n10"), std::string::npos);
  EXPECT_NE(s.find("POINT_DATA 4\nSCALARS phi double 1"), std::string::npos);
  EXPECT_NE(s.find("CELL_DATA 1\nSCALARS part double 1"), std::string::npos);
  const std::vector<double> short_field{1, 2};
  const VtkField bad[] = {{"x", short_field}};
  std::ostringstream sink;
  EXPECT_THROW(write_vtk(m, bad, {}, sink), ConformanceError);
}
