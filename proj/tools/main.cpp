// rdls command-line driver: simulate, scaling studies, law fits.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "rdls/rdls.hpp"

using namespace rdls;

namespace {

std::vector<int> parse_workers(const std::string& list) {
  std::vector<int> out;
  std::stringstream ss(list);
  for (std::string t; std::getline(ss, t, ',');) {
    std::size_t pos = 0;
    int n = 0;
    try {
      n = std::stoi(t, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != t.size() || n < 1) throw ArgumentError("--workers: bad entry '" + t + "'");
    out.push_back(n);
  }
  if (out.empty()) throw ArgumentError("--workers: empty list");
  return out;
}

int fit(const std::string& input, const std::string& law) {
  const auto recs = load_timings_csv(input);
  const auto mode = law == "gustafson" ? ScalingMode::weak : ScalingMode::strong;
  const auto report = make_report(recs, mode);
  write_report_table(report, std::cout);
  const double f = law == "gustafson" ? report.f_gustafson : report.f_amdahl;
  std::printf("f_%s = %.6f\n", law.c_str(), f);
  return 0;
}

int scaling(SimConfig cfg, ScalingMode mode, const std::vector<int>& workers) {
  const auto report = run_scaling(cfg, mode, workers, std::cerr);
  write_report_table(report, std::cout);
  return 0;
}

int simulate(const SimConfig& cfg) {
  switch (cfg.mode) {
    case RunMode::simulate:
      run_simulation(cfg, std::cerr);
      return 0;
    case RunMode::strong_scaling:
      return scaling(cfg, ScalingMode::strong, cfg.scaling_workers);
    case RunMode::weak_scaling:
      return scaling(cfg, ScalingMode::weak, cfg.scaling_workers);
    case RunMode::fit_only:
      return fit(cfg.timings_input, cfg.law);
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mg degradation: reaction-diffusion with level-set interface tracking"};
  app.require_subcommand(1);

  std::string config_path, out_dir, workers_list, mode = "strong", input, law = "amdahl";
  int workers = 0;

  auto* sim = app.add_subcommand("simulate", "Run the time loop (or the mode named in run.mode)");
  sim->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  sim->add_option("--workers", workers, "Worker count (overrides parallel.workers)")->check(CLI::PositiveNumber);
  sim->add_option("--out", out_dir, "Output directory (overrides output.dir)");

  auto* scale = app.add_subcommand("scaling", "Time steps for several worker counts");
  scale->add_option("--mode", mode, "strong or weak")->check(CLI::IsMember({"strong", "weak"}));
  scale->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  scale->add_option("--workers", workers_list, "Comma-separated worker counts, e.g. 1,2,4,8");
  scale->add_option("--out", out_dir, "Output directory (overrides output.dir)");

  auto* fitc = app.add_subcommand("fit", "Fit Amdahl or Gustafson's law to a timings CSV");
  fitc->add_option("--input", input, "timings.csv")->required()->check(CLI::ExistingFile);
  fitc->add_option("--law", law, "amdahl or gustafson")->check(CLI::IsMember({"amdahl", "gustafson"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (fitc->parsed()) return fit(input, law);
    SimConfig cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (sim->parsed()) {
      if (workers > 0) cfg.workers = workers;
      validate_config(cfg);
      return simulate(cfg);
    }
    const auto list = workers_list.empty() ? cfg.scaling_workers : parse_workers(workers_list);
    return scaling(cfg, mode == "weak" ? ScalingMode::weak : ScalingMode::strong, list);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const StepError& e) {
    std::cerr << "simulation aborted at " << e.what() << " (partial outputs kept)\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
}
