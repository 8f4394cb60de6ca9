#pragma once

#include <optional>
#include <string>
#include <vector>

#include "islanding/dynamics.hpp"
#include "islanding/partition.hpp"

namespace islanding::prot {

/// Below this current magnitude the apparent impedance is "out of reach".
inline constexpr double kMinRelayCurrent = 1e-9;

std::optional<Complex> apparent_impedance(Complex v_end, Complex i_line);

/// True when z lies strictly inside the mho circle through the origin with
/// diameter `reach` (a complex impedance).
bool inside_mho(Complex z, Complex reach);

struct DistanceRelaySetting {
  std::string branch;
  double zone1_reach = 0.8;
  double zone2_reach = 1.2;
  double zone2_delay = 0.3;

  void validate() const;
};

/// Default settings for every in-service transmission line (transformers with an
/// off-nominal tap and radial generator connections are excluded).
std::vector<DistanceRelaySetting> default_distance_settings(const grid::NetworkCase& c);

enum class Zone { none, zone1, zone2 };

/// Zone classification of one apparent impedance against a line impedance.
Zone classify(std::optional<Complex> z, Complex z_line, const DistanceRelaySetting& s);

/// Per-relay pickup memory (one entry per branch end).
struct DistanceRelayState {
  std::vector<std::optional<double>> zone2_since;  // 2 entries per setting: from end, to end
};

struct Pickup {
  std::string branch;
  bool from_end = true;
  Zone zone = Zone::none;
};

struct DistanceScan {
  std::vector<Pickup> pickups;
  std::vector<dyn::Event> trips;
};

/// One scan over all relays at a tick. Out-of-service branches are skipped.
/// A branch carrying an active fault still reports its pickups, but its trip
/// is left to the fault's own clearing event (the scenario's clearing time
/// already stands for relay plus breaker time). Trips carry origin
/// distance_relay.
DistanceScan distance_scan(const dyn::TickView& tick, const std::vector<DistanceRelaySetting>& settings,
                           DistanceRelayState& state);

/// Monitor adapter around distance_scan.
class DistanceProtection : public dyn::Monitor {
 public:
  DistanceProtection(const grid::NetworkCase& c, std::vector<DistanceRelaySetting> settings);
  std::vector<dyn::Event> on_tick(const dyn::TickView& tick) override;
  const std::vector<DistanceRelaySetting>& settings() const { return settings_; }

 private:
  std::vector<DistanceRelaySetting> settings_;
  DistanceRelayState state_;
};

enum class BranchEnd { from, to };

struct RRdotRelaySetting {
  std::string branch;
  double t_slope = 0.05;
  double u_threshold = 0.0;  // per-unit resistance
  BranchEnd end = BranchEnd::from;
  bool armed = false;

  void validate() const;
};

struct RSample {
  double t = 0.0;
  double r = 0.0;
};

/// First sample time where U = R + T dR/dt (backward difference) drops below
/// the threshold. Never trips a disarmed relay.
std::optional<double> rrdot_evaluate(const std::vector<RSample>& r_series, const RRdotRelaySetting& s);

/// Defaults for the given boundary branches: the measuring end is the sending
/// end of the base-case flow and the threshold is a fraction of the apparent
/// resistance seen there.
std::vector<RRdotRelaySetting> default_rrdot_settings(const grid::NetworkCase& c, const steady::DynamicInit& init,
                                                      const std::vector<std::string>& branches,
                                                      double t_slope = 0.05, double threshold_fraction = 0.5);

/// Online R-Rdot relays. R is tracked on every tick; trips only once armed.
class RRdotProtection : public dyn::Monitor {
 public:
  RRdotProtection(const grid::NetworkCase& c, std::vector<RRdotRelaySetting> settings);
  std::vector<dyn::Event> on_tick(const dyn::TickView& tick) override;

  void arm_all();
  const std::vector<RRdotRelaySetting>& settings() const { return settings_; }
  bool all_done() const;

 private:
  const grid::NetworkCase& case_;
  std::vector<RRdotRelaySetting> settings_;
  std::vector<std::size_t> branch_;
  std::vector<std::optional<RSample>> last_;
  std::vector<bool> done_;
};

enum class StabilityClass { stable_low_swing, machine_instability, island_formation };
const char* to_string(StabilityClass s);
StabilityClass parse_stability_class(const std::string& s);

struct StabilityLabel {
  StabilityClass value = StabilityClass::stable_low_swing;
  /// Two sides of the separation (group indices) for island_formation.
  std::vector<std::vector<std::size_t>> separated_groups;
  std::optional<double> time;  // first sample at which the label condition held
};

/// Pole-slip criteria used by label_stability.
inline constexpr double kGroupGap = 3.14159265358979323846;        // 180 deg
inline constexpr double kIntraSpread = 3.14159265358979323846 / 2;  // 90 deg

/// Classifies a finished run. `inertia` weights the group means (case order).
StabilityLabel label_stability(const dyn::SystemTrajectory& traj, const GeneratorPartition& partition,
                               const std::vector<double>& inertia);

}  // namespace islanding::prot
