#pragma once

#include <optional>
#include <string>
#include <vector>

#include "islanding/dynamics.hpp"
#include "islanding/protection.hpp"
#include "islanding/psi_series.hpp"

namespace islanding::exec {

struct IslandingPlan {
  std::vector<std::string> boundary_branches;  // case branch order
  std::vector<std::size_t> bus_group;          // group index of every bus (case bus order)
  double arm_time = 0.0;
};

/// Boundary = every in-service branch whose end buses sit in different group
/// regions. Without explicit regions each bus joins the group of the
/// electrically nearest machine (minimum |z| path; ties go to the lower group).
/// Throws InputError for u < 2, unreachable buses or malformed regions.
IslandingPlan derive_plan(const GeneratorPartition& partition, const grid::NetworkCase& c,
                          const std::optional<std::vector<std::vector<int>>>& bus_regions = std::nullopt);

/// Speed band (per unit) an island's centre of inertia must end inside.
inline constexpr double kSurvivalBand = 0.05;

struct Island {
  int id = 0;
  std::vector<std::string> machines;
  std::vector<int> buses;
  double load_mw = 0.0;
  bool survived = false;
  bool diverged = false;
};

struct IslandOutcome {
  std::string case_name;
  std::vector<Island> islands;
  double total_mw = 0.0;
  double served_mw = 0.0;
  double lost_mw = 0.0;         // non-surviving islands plus shed load
  double deenergized_mw = 0.0;  // components left without a running machine
};

/// Outcome at the end of a run: islands are the energized components of the
/// final topology. `diverged` lists machine ids whose simulation blew up.
IslandOutcome assess_outcome(const grid::NetworkCase& c, const dyn::MachineModel& model,
                             const dyn::SystemTrajectory& traj, const std::vector<std::string>& diverged = {});

struct LoadLossComparison {
  double total_mw = 0.0;
  double served_with = 0.0, served_without = 0.0;
  double lost_with = 0.0, lost_without = 0.0;
  double deenergized_with = 0.0, deenergized_without = 0.0;
  double saving_mw = 0.0;  // served_with - served_without
  double saving_fraction = 0.0;
};

/// Throws InputError when the two outcomes come from different cases.
LoadLossComparison compare_load_loss(const IslandOutcome& with, const IslandOutcome& without);

struct ExecutionInputs {
  const grid::NetworkCase& network;
  const steady::DynamicInit& init;
  const dyn::MachineModel& model;
  std::vector<dyn::Event> events;
  dyn::SimConfig cfg;
  std::vector<prot::DistanceRelaySetting> distance;
  psi::PsiEvaluator evaluator;
  psi::Thresholds thresholds;
  double confirm = 0.04;
  IslandingPlan plan;
  double rrdot_t_slope = 0.05;
  double rrdot_threshold_fraction = 0.5;
};

struct ExecutionResult {
  dyn::SystemTrajectory trajectory;  // merged over all islands
  psi::IslandingSignal signal;
  std::vector<std::string> armed;  // boundary branches armed at the signal
  std::optional<double> split_time;
  std::vector<std::string> diverged;  // machines of islands whose continuation diverged
  IslandOutcome outcome;
};

/// Runs a scenario with online detection. At the signal the R-Rdot relays of
/// the still-closed boundary branches are armed; once all of them have tripped
/// the islands are simulated on their own to t_end (concurrently when
/// `parallel`). Without a signal the run is the plain protected simulation.
ExecutionResult execute_islanding(const ExecutionInputs& in, bool parallel = true);

}  // namespace islanding::exec
