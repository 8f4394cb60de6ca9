#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "islanding/grid.hpp"
#include "islanding/network_state.hpp"
#include "islanding/power_flow.hpp"

namespace islanding::dyn {

/// Synchronous speed for a 60 Hz system, rad/s.
inline constexpr double kOmegaSync = 2.0 * 3.14159265358979323846 * 60.0;

struct MachineState {
  double delta = 0.0;  // rad
  double omega = 0.0;  // per-unit speed deviation
};

enum class EventKind { apply_fault, clear_fault, trip_branch, trip_machine, trip_load };
enum class EventOrigin { scenario, distance_relay, rrdot_relay, executor };

const char* to_string(EventKind k);
const char* to_string(EventOrigin o);
EventKind parse_event_kind(const std::string& s);
EventOrigin parse_event_origin(const std::string& s);

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::trip_branch;
  std::string target;  // branch id, machine id, or bus id for trip_load
  double position = 0.5;
  bool open_branch = true;
  EventOrigin origin = EventOrigin::scenario;

  static Event fault(double t, std::string branch, double position);
  static Event clear(double t, std::string branch, bool open);
  static Event trip_branch(double t, std::string branch, EventOrigin origin = EventOrigin::scenario);
  static Event trip_machine(double t, std::string machine, EventOrigin origin = EventOrigin::scenario);
  static Event trip_load(double t, int bus, EventOrigin origin = EventOrigin::scenario);

  bool operator==(const Event&) const = default;
};

struct SimConfig {
  double dt = 1e-3;
  double t_end = 5.0;
  int record_stride = 10;  // integration steps per recorded (monitoring) sample

  double tick() const { return dt * record_stride; }
};

/// Swing-equation parameters on the system base, in case machine order.
struct MachineModel {
  std::vector<double> emf;
  std::vector<double> p_mech;
  std::vector<double> inertia;  // M = 2H, seconds
  std::vector<double> damping;  // D, per-unit torque per per-unit speed
};

/// Builds the model from the case and the initial conditions. A non-negative
/// damping_override (machine base) replaces every machine's d.
MachineModel make_machine_model(const grid::NetworkCase& c, const steady::DynamicInit& init,
                                std::optional<double> damping_override = std::nullopt);

/// Parameters gathered into reduced-network order.
struct SwingParams {
  std::vector<double> emf;
  std::vector<double> p_mech;
  std::vector<double> inertia;
  std::vector<double> damping;
  double omega_s = kOmegaSync;
};

/// P_i = E_i^2 G_ii + sum_j E_i E_j (B_ij sin d_ij + G_ij cos d_ij).
std::vector<double> electrical_power(const grid::ReducedNetwork& red, const std::vector<double>& emf,
                                     const std::vector<double>& delta);

/// Right-hand side of the swing equations for the reduced machines.
std::vector<MachineState> derivatives(const std::vector<MachineState>& x, const grid::ReducedNetwork& red,
                                      const SwingParams& p);

/// One classical RK4 step. Throws DivergenceError (carrying `time`) on a non-finite state.
std::vector<MachineState> step(const std::vector<MachineState>& x, double dt, const grid::ReducedNetwork& red,
                               const SwingParams& p, double time = 0.0);

struct EpochSpan {
  double t_start = 0.0;
  std::shared_ptr<const NetworkEpoch> epoch;
};

struct Sample {
  double t = 0.0;
  std::vector<double> delta;  // case machine order
  std::vector<double> omega;
  std::size_t epoch = 0;      // index into SystemTrajectory::epochs
};

struct SystemTrajectory {
  std::vector<std::string> machine_ids;
  std::vector<Sample> samples;
  std::vector<Event> event_log;
  std::vector<EpochSpan> epochs;
  bool stopped_early = false;

  const NetworkEpoch& epoch_of(const Sample& s) const { return *epochs[s.epoch].epoch; }
  std::vector<double> times() const;
};

/// Read-only snapshot handed to monitors at every recorded sample.
struct TickView {
  double time;
  const grid::NetworkCase& network;
  const NetworkEpoch& epoch;
  const MachineModel& model;
  const std::vector<double>& delta;  // case order
  const std::vector<double>& omega;

  /// Internal EMF phasors of the reduced-network machines.
  std::vector<Complex> emf_phasors() const;
};

/// Protection and detection hooks. Returned events are applied at the tick time.
class Monitor {
 public:
  virtual ~Monitor() = default;
  virtual std::vector<Event> on_tick(const TickView& tick) = 0;
  /// Asked after every tick; true ends the run at the current time.
  virtual bool stop_requested() const { return false; }
};

struct InitialCondition {
  double t0 = 0.0;
  std::vector<MachineState> state;  // case order
  Topology topology;
};

/// Fixed-step simulator. Rebuilds the reduced network on every switching event.
class Simulator {
 public:
  Simulator(const grid::NetworkCase& c, const steady::DynamicInit& init, MachineModel model, SimConfig cfg);
  Simulator(const grid::NetworkCase& c, const steady::DynamicInit& init, MachineModel model, SimConfig cfg,
            InitialCondition ic);

  void schedule(Event e);
  void add_monitor(Monitor* m) { monitors_.push_back(m); }

  /// Integrates to cfg.t_end (or until a monitor asks to stop).
  SystemTrajectory run();

  /// What has been recorded so far; still valid after run() threw.
  const SystemTrajectory& recorded() const { return traj_; }

 private:
  void apply(const Event& e, double now);
  void rebuild(double now);
  SwingParams gather() const;
  void record(double now);

  const grid::NetworkCase& case_;
  const steady::DynamicInit& init_;
  MachineModel model_;
  SimConfig cfg_;
  double t0_ = 0.0;
  Topology topo_;
  std::vector<MachineState> state_;
  std::vector<Event> pending_;
  std::vector<Monitor*> monitors_;
  SystemTrajectory traj_;
  std::shared_ptr<const NetworkEpoch> epoch_;
};

/// Convenience wrapper: schedules the events, attaches the monitors and runs.
SystemTrajectory simulate(const grid::NetworkCase& c, const steady::DynamicInit& init, const MachineModel& model,
                          std::vector<Event> events, const SimConfig& cfg, const std::vector<Monitor*>& monitors = {});

/// Equilibrium state from the initial conditions (delta0, zero speed deviation).
std::vector<MachineState> equilibrium_state(const steady::DynamicInit& init);

}  // namespace islanding::dyn
