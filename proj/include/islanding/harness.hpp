#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "islanding/coherency.hpp"
#include "islanding/executor.hpp"
#include "islanding/power_flow.hpp"
#include "islanding/protection.hpp"
#include "islanding/psi.hpp"

namespace islanding::harness {

struct DistanceOverrides {
  bool enabled = true;
  std::optional<double> zone1_reach, zone2_reach, zone2_delay;
  std::optional<std::vector<std::string>> branches;  // replaces the default relay set
};

struct RRdotOverrides {
  double t_slope = 0.05;
  double threshold_fraction = 0.5;
};

struct ScenarioSpec {
  std::string id;
  std::string description;
  std::vector<dyn::Event> events;  // time-ordered (stable) after parsing
  double t_end = 5.0;
  double load_scale = 1.0;            // uniform scaling of every load and every dispatch
  std::optional<double> damping;      // machine-base D for every machine
  std::optional<coh::PartitionOverride> partition;
  DistanceOverrides distance;
  RRdotOverrides rrdot;
  std::optional<double> confirm;
  std::optional<prot::StabilityClass> expected_label;
};

/// Parses a scenario file. A string-valued "partition" names an override file,
/// resolved against `base_dir`. Throws InputError.
ScenarioSpec parse_scenario(std::string_view json_text, const std::string& base_dir = ".");
ScenarioSpec load_scenario_file(const std::string& path);
/// Every *.json file of a directory, sorted by file name.
std::vector<ScenarioSpec> load_scenario_dir(const std::string& dir);

struct RunConfig {
  double dt = 1e-3;
  int record_stride = 10;
  double confirm = 0.04;  // used when the scenario does not set its own
  bool parallel = true;
};

/// A case prepared for simulation at one loading level. Not copyable: the
/// simulator keeps references into it.
struct StudyCase {
  grid::NetworkCase network;
  steady::PowerFlowSolution pf;
  steady::DynamicInit init;

  StudyCase(const grid::NetworkCase& base, double load_scale);
  StudyCase(const StudyCase&) = delete;
  StudyCase& operator=(const StudyCase&) = delete;
};

struct RunReport {
  std::string scenario_id;
  std::vector<std::string> machine_ids;
  dyn::SystemTrajectory trajectory;
  std::vector<psi::PsiSample> psi;
  std::vector<psi::GrowthPercent> growth;
  psi::GrowthPercent peak;
  psi::IslandingSignal signal;
  std::vector<dyn::Event> relay_log;  // every applied event, scenario and relay
  prot::StabilityLabel label;
  std::optional<exec::IslandOutcome> outcome;
  GeneratorPartition partition;
};

/// Number of relay-initiated (non-scenario) branch trips in a log.
std::size_t relay_trip_count(const std::vector<dyn::Event>& log);

/// Partition in force for a scenario: the override or the baseline clustering.
coh::PartitionOverride scenario_partition(const StudyCase& sc, const ScenarioSpec& spec);

/// Protected simulation, PSI, growths, label and outcome. When thresholds are
/// given the signal is evaluated offline (nothing acts on it).
RunReport run_scenario(const grid::NetworkCase& base, const ScenarioSpec& spec, const RunConfig& cfg,
                       const std::optional<psi::Thresholds>& th = std::nullopt);

/// Same scenario with online detection and controlled islanding.
RunReport run_controlled(const grid::NetworkCase& base, const ScenarioSpec& spec, const psi::Thresholds& th,
                         const RunConfig& cfg);

struct CalibrationReport {
  std::vector<psi::CalibrationRow> rows;
  psi::Thresholds thresholds;
};

/// Runs the batch (concurrently when cfg.parallel) and calibrates on the labels.
CalibrationReport run_calibration(const grid::NetworkCase& base, const std::vector<ScenarioSpec>& specs,
                                  const RunConfig& cfg);

struct ComparisonReport {
  RunReport with_islanding;
  RunReport without_islanding;
  exec::LoadLossComparison comparison;
};

ComparisonReport run_comparison(const grid::NetworkCase& base, const ScenarioSpec& spec, const psi::Thresholds& th,
                                const RunConfig& cfg);

// Flat-file reports. Numbers use the shortest round-trip form, so exporting the
// same report twice gives identical bytes and reading back gives equal values.
void export_report(const RunReport& r, const std::string& dir);
RunReport read_report(const std::string& dir);
/// Equality over everything export_report writes.
bool same_exported_content(const RunReport& a, const RunReport& b);

void export_calibration(const CalibrationReport& r, const std::string& dir);
CalibrationReport read_calibration(const std::string& dir);

void export_comparison(const ComparisonReport& r, const std::string& dir);

/// Human-readable digest used by the CLI.
std::string summarize(const RunReport& r);

}  // namespace islanding::harness
