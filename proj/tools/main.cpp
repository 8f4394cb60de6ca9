// Command-line front end: calibrate, simulate, compare, report.
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "islanding/error.hpp"
#include "islanding/harness.hpp"

namespace fs = std::filesystem;
using namespace islanding;

namespace {

enum Exit { ok = 0, input_error = 1, divergence = 2, calibration_error = 3 };

std::vector<harness::ScenarioSpec> gather_scenarios(const std::vector<std::string>& paths) {
  std::vector<harness::ScenarioSpec> out;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      auto dir = harness::load_scenario_dir(p);
      out.insert(out.end(), dir.begin(), dir.end());
    } else {
      out.push_back(harness::load_scenario_file(p));
    }
  }
  if (out.empty()) throw InputError("no scenarios given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coherency-based controlled islanding studies"};
  app.require_subcommand(1);

  std::string case_path = ISLANDING_DEFAULT_CASE;
  std::vector<std::string> scenarios;
  std::string thresholds_path, out_dir;
  harness::RunConfig cfg;
  std::optional<double> confirm;
  bool serial = false, islanding_on = false;

  auto common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--case", case_path, "Network case (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--dt", cfg.dt, "Integration step, s")->check(CLI::PositiveNumber);
    sub->add_option("--confirm", confirm, "Confirmation window, s")->check(CLI::NonNegativeNumber);
    sub->add_flag("--serial", serial, "Disable the parallel kernels");
    auto* o = sub->add_option("--out", out_dir, "Output directory");
    if (needs_out) o->required();
  };

  auto* cal = app.add_subcommand("calibrate", "Run a scenario batch and derive PSI thresholds");
  common(cal, true);
  cal->add_option("--scenario", scenarios, "Scenario files or directories")->required();

  auto* sim = app.add_subcommand("simulate", "Run one scenario and export its report");
  common(sim, true);
  sim->add_option("--scenario", scenarios, "Scenario file")->required()->expected(1);
  sim->add_option("--thresholds", thresholds_path, "Thresholds (JSON) for the islanding signal")
      ->check(CLI::ExistingFile);
  sim->add_flag("--islanding", islanding_on, "Act on the signal (needs --thresholds)");

  auto* cmp = app.add_subcommand("compare", "Run a scenario with and without controlled islanding");
  common(cmp, true);
  cmp->add_option("--scenario", scenarios, "Scenario file")->required()->expected(1);
  cmp->add_option("--thresholds", thresholds_path, "Thresholds (JSON)")->required()->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("report", "Print the summary of an exported run");
  rep->add_option("--out", out_dir, "Report directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Exit::ok : Exit::input_error;
  }

  try {
    if (confirm) cfg.confirm = *confirm;
    cfg.parallel = !serial;

    if (rep->parsed()) {
      std::cout << harness::summarize(harness::read_report(out_dir));
      return Exit::ok;
    }

    const auto network = grid::load_case_file(case_path);
    if (cal->parsed()) {
      const auto report = harness::run_calibration(network, gather_scenarios(scenarios), cfg);
      harness::export_calibration(report, out_dir);
      for (const auto& r : report.rows) {
        std::cout << r.scenario << " " << prot::to_string(r.label) << " peaks " << r.peak.g_cgc << " "
                  << r.peak.g_igc << " " << r.peak.g_dcgc << "\n";
      }
      std::cout << "thresholds " << report.thresholds.th_cgc << " " << report.thresholds.th_igc << " "
                << report.thresholds.th_dcgc << "\n";
    } else if (sim->parsed()) {
      const auto spec = harness::load_scenario_file(scenarios.front());
      std::optional<psi::Thresholds> th;
      if (!thresholds_path.empty()) th = psi::load_thresholds(thresholds_path);
      if (islanding_on && !th) throw InputError("--islanding needs --thresholds");
      const auto report = islanding_on ? harness::run_controlled(network, spec, *th, cfg)
                                       : harness::run_scenario(network, spec, cfg, th);
      harness::export_report(report, out_dir);
      std::cout << harness::summarize(report);
    } else if (cmp->parsed()) {
      const auto spec = harness::load_scenario_file(scenarios.front());
      const auto report = harness::run_comparison(network, spec, psi::load_thresholds(thresholds_path), cfg);
      harness::export_comparison(report, out_dir);
      std::cout << "without islanding:\n" << harness::summarize(report.without_islanding);
      std::cout << "with islanding:\n" << harness::summarize(report.with_islanding);
      std::cout << "served load saving: " << report.comparison.saving_mw << " MW ("
                << 100.0 * report.comparison.saving_fraction << " %)\n";
    }
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return Exit::divergence;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << "\n";
    return Exit::calibration_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Exit::input_error;
  }
  return Exit::ok;
}
