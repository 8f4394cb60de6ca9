#include "islanding/harness.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>

#include <json.hpp>

#include "islanding/error.hpp"
#include "islanding/psi_series.hpp"
#include "text_io.hpp"

namespace islanding::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

dyn::Event parse_event(const json& j) {
  dyn::Event e;
  e.time = j.at("time").get<double>();
  e.kind = dyn::parse_event_kind(j.at("kind").get<std::string>());
  switch (e.kind) {
    case dyn::EventKind::apply_fault:
      e.target = j.at("branch").get<std::string>();
      e.position = j.value("position", 0.5);
      e.open_branch = false;
      break;
    case dyn::EventKind::clear_fault:
      e.target = j.at("branch").get<std::string>();
      e.open_branch = j.value("open_branch", true);
      break;
    case dyn::EventKind::trip_branch:
      e.target = j.at("branch").get<std::string>();
      break;
    case dyn::EventKind::trip_machine:
      e.target = j.at("machine").get<std::string>();
      e.open_branch = false;
      break;
    case dyn::EventKind::trip_load:
      e.target = std::to_string(j.at("bus").get<int>());
      e.open_branch = false;
      break;
  }
  if (!(e.time >= 0.0)) throw InputError("event time must be non-negative");
  if (!(e.position >= 0.0 && e.position <= 1.0)) throw InputError("fault position must lie in [0, 1]");
  return e;
}

void check_targets(const grid::NetworkCase& c, const ScenarioSpec& spec) {
  for (const auto& e : spec.events) {
    switch (e.kind) {
      case dyn::EventKind::apply_fault:
      case dyn::EventKind::clear_fault:
      case dyn::EventKind::trip_branch:
        if (!c.find_branch(e.target)) throw InputError("event on unknown branch '" + e.target + "'");
        break;
      case dyn::EventKind::trip_machine:
        if (!c.find_machine(e.target)) throw InputError("event on unknown machine '" + e.target + "'");
        break;
      case dyn::EventKind::trip_load:
        if (!c.find_bus(std::stoi(e.target))) throw InputError("event on unknown bus " + e.target);
        break;
    }
  }
  if (spec.distance.branches) {
    for (const auto& b : *spec.distance.branches) {
      if (!c.find_branch(b)) throw InputError("distance relay on unknown branch '" + b + "'");
    }
  }
}

// Re-raises an error with the scenario id in front, keeping its type.
[[noreturn]] void rethrow_tagged(const std::string& id) {
  const std::string tag = "scenario " + id + ": ";
  try {
    throw;
  } catch (const DivergenceError& e) {
    throw DivergenceError(tag + e.what(), e.time());
  } catch (const CalibrationError& e) {
    throw CalibrationError(tag + e.what());
  } catch (const SaturatedIndexError& e) {
    throw SaturatedIndexError(tag + e.what(), e.floor());
  } catch (const UndefinedIndexError& e) {
    throw UndefinedIndexError(tag + e.what());
  } catch (const SolverError& e) {
    throw SolverError(tag + e.what());
  } catch (const InputError& e) {
    throw InputError(tag + e.what());
  }
}

template <class F>
auto tagged(const std::string& id, F&& f) {
  try {
    return f();
  } catch (const Error&) {
    rethrow_tagged(id);
  }
}

std::vector<prot::DistanceRelaySetting> distance_settings(const grid::NetworkCase& c, const DistanceOverrides& o) {
  if (!o.enabled) return {};
  std::vector<prot::DistanceRelaySetting> out;
  if (o.branches) {
    for (const auto& b : *o.branches) out.push_back({b});
  } else {
    out = prot::default_distance_settings(c);
  }
  for (auto& s : out) {
    if (o.zone1_reach) s.zone1_reach = *o.zone1_reach;
    if (o.zone2_reach) s.zone2_reach = *o.zone2_reach;
    if (o.zone2_delay) s.zone2_delay = *o.zone2_delay;
    s.validate();
  }
  return out;
}

dyn::SimConfig sim_config(const ScenarioSpec& spec, const RunConfig& cfg) {
  dyn::SimConfig s;
  s.dt = cfg.dt;
  s.t_end = spec.t_end;
  s.record_stride = cfg.record_stride;
  return s;
}

// Equilibrium epoch and evaluator shared by every run of a scenario.
psi::PsiEvaluator baseline_evaluator(const StudyCase& sc, const GeneratorPartition& part) {
  const auto epoch = build_epoch(sc.network, Topology::from_case(sc.network), sc.init.load_admittance);
  return psi::make_evaluator(part, epoch, sc.init.emf, sc.init.delta0);
}

void fill_psi(RunReport& r, const dyn::MachineModel& model, const psi::PsiEvaluator& ev, bool parallel) {
  r.psi = parallel ? psi::psi_series_parallel(r.trajectory, model, ev) : psi::psi_series_serial(r.trajectory, model, ev);
  r.growth = psi::growth_series(r.psi);
  r.peak = psi::peak_growth(r.growth);
}

}  // namespace

ScenarioSpec parse_scenario(std::string_view json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario file: ") + e.what());
  }
  ScenarioSpec s;
  try {
    s.id = j.at("id").get<std::string>();
    s.description = j.value("description", "");
    s.t_end = j.value("t_end", 5.0);
    s.load_scale = j.value("load_scale", 1.0);
    if (j.contains("damping")) s.damping = j.at("damping").get<double>();
    if (j.contains("confirm")) s.confirm = j.at("confirm").get<double>();
    if (j.contains("expected_label")) {
      s.expected_label = prot::parse_stability_class(j.at("expected_label").get<std::string>());
    }
    for (const auto& e : j.value("events", json::array())) s.events.push_back(parse_event(e));
    if (j.contains("partition")) {
      const auto& p = j.at("partition");
      if (p.is_string()) {
        s.partition = coh::load_partition_override((fs::path(base_dir) / p.get<std::string>()).string());
      } else {
        s.partition = coh::parse_partition_override(p.dump());
      }
    }
    if (j.contains("relays")) {
      const auto& r = j.at("relays");
      if (r.contains("distance")) {
        const auto& d = r.at("distance");
        s.distance.enabled = d.value("enabled", true);
        if (d.contains("zone1_reach")) s.distance.zone1_reach = d.at("zone1_reach").get<double>();
        if (d.contains("zone2_reach")) s.distance.zone2_reach = d.at("zone2_reach").get<double>();
        if (d.contains("zone2_delay")) s.distance.zone2_delay = d.at("zone2_delay").get<double>();
        if (d.contains("branches")) s.distance.branches = d.at("branches").get<std::vector<std::string>>();
      }
      if (r.contains("rrdot")) {
        const auto& d = r.at("rrdot");
        s.rrdot.t_slope = d.value("t_slope", s.rrdot.t_slope);
        s.rrdot.threshold_fraction = d.value("threshold_fraction", s.rrdot.threshold_fraction);
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario file: ") + e.what());
  } catch (const InputError& e) {
    throw InputError(std::string("scenario file: ") + e.what());
  }
  if (s.id.empty()) throw InputError("scenario file: empty id");
  if (!(s.t_end > 0.0)) throw InputError("scenario " + s.id + ": t_end must be positive");
  if (!(s.load_scale > 0.0)) throw InputError("scenario " + s.id + ": load_scale must be positive");
  if (s.damping && !(*s.damping >= 0.0)) throw InputError("scenario " + s.id + ": damping must be non-negative");
  if (s.confirm && !(*s.confirm >= 0.0)) throw InputError("scenario " + s.id + ": confirm must be non-negative");
  if (!(s.rrdot.t_slope > 0.0) || !(s.rrdot.threshold_fraction > 0.0)) {
    throw InputError("scenario " + s.id + ": bad R-Rdot settings");
  }
  for (const auto& e : s.events) {
    if (e.time > s.t_end) throw InputError("scenario " + s.id + ": event after t_end");
  }
  std::stable_sort(s.events.begin(), s.events.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  return s;
}

ScenarioSpec load_scenario_file(const std::string& path) {
  const auto text = detail::read_text_file(path, "scenario file");
  try {
    return parse_scenario(text, fs::path(path).parent_path().string());
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::vector<ScenarioSpec> load_scenario_dir(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw InputError("not a scenario directory: '" + dir + "'");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ScenarioSpec> out;
  for (const auto& f : files) out.push_back(load_scenario_file(f.string()));
  return out;
}

namespace {

grid::NetworkCase scaled(const grid::NetworkCase& base, double k) {
  auto c = base;
  for (auto& b : c.buses) {
    b.load_p *= k;
    b.load_q *= k;
  }
  for (auto& m : c.machines) m.p_gen *= k;
  return grid::make_case(std::move(c));
}

}  // namespace

StudyCase::StudyCase(const grid::NetworkCase& base, double load_scale)
    : network(load_scale == 1.0 ? base : scaled(base, load_scale)),
      pf(steady::solve_power_flow(network)),
      init(steady::init_classical(network, pf)) {}

std::size_t relay_trip_count(const std::vector<dyn::Event>& log) {
  return static_cast<std::size_t>(std::count_if(log.begin(), log.end(), [](const dyn::Event& e) {
    return e.origin != dyn::EventOrigin::scenario && e.kind == dyn::EventKind::trip_branch;
  }));
}

coh::PartitionOverride scenario_partition(const StudyCase& sc, const ScenarioSpec& spec) {
  if (spec.partition) return *spec.partition;
  const auto& red = sc.init.reduced;
  std::vector<double> emf, delta;
  for (const auto& id : red.machine_ids) {
    const auto k = sc.network.machine_index(id);
    emf.push_back(sc.init.emf[k]);
    delta.push_back(sc.init.delta0[k]);
  }
  return {coh::cluster_coherent_groups(coh::sync_coefficients(red, emf, delta)), std::nullopt};
}

RunReport run_scenario(const grid::NetworkCase& base, const ScenarioSpec& spec, const RunConfig& cfg,
                       const std::optional<psi::Thresholds>& th) {
  return tagged(spec.id, [&] {
    check_targets(base, spec);
    StudyCase sc(base, spec.load_scale);
    const auto model = dyn::make_machine_model(sc.network, sc.init, spec.damping);
    const auto part = scenario_partition(sc, spec);
    const auto ev = baseline_evaluator(sc, part.partition);

    prot::DistanceProtection dist(sc.network, distance_settings(sc.network, spec.distance));
    RunReport r;
    r.scenario_id = spec.id;
    r.partition = part.partition;
    r.trajectory = dyn::simulate(sc.network, sc.init, model, spec.events, sim_config(spec, cfg), {&dist});
    r.machine_ids = r.trajectory.machine_ids;
    r.relay_log = r.trajectory.event_log;
    fill_psi(r, model, ev, cfg.parallel);
    if (th) r.signal = psi::detect(r.growth, *th, spec.confirm.value_or(cfg.confirm));
    r.label = prot::label_stability(r.trajectory, part.partition, model.inertia);
    r.outcome = exec::assess_outcome(sc.network, model, r.trajectory);
    return r;
  });
}

RunReport run_controlled(const grid::NetworkCase& base, const ScenarioSpec& spec, const psi::Thresholds& th,
                         const RunConfig& cfg) {
  return tagged(spec.id, [&] {
    check_targets(base, spec);
    StudyCase sc(base, spec.load_scale);
    const auto model = dyn::make_machine_model(sc.network, sc.init, spec.damping);
    const auto part = scenario_partition(sc, spec);
    const auto ev = baseline_evaluator(sc, part.partition);

    exec::ExecutionInputs in{
        .network = sc.network,
        .init = sc.init,
        .model = model,
        .events = spec.events,
        .cfg = sim_config(spec, cfg),
        .distance = distance_settings(sc.network, spec.distance),
        .evaluator = ev,
        .thresholds = th,
        .confirm = spec.confirm.value_or(cfg.confirm),
        .plan = exec::derive_plan(part.partition, sc.network, part.bus_regions),
        .rrdot_t_slope = spec.rrdot.t_slope,
        .rrdot_threshold_fraction = spec.rrdot.threshold_fraction,
    };
    auto res = exec::execute_islanding(in, cfg.parallel);

    RunReport r;
    r.scenario_id = spec.id;
    r.partition = part.partition;
    r.trajectory = std::move(res.trajectory);
    r.machine_ids = r.trajectory.machine_ids;
    r.relay_log = r.trajectory.event_log;
    fill_psi(r, model, ev, cfg.parallel);
    r.signal = res.signal;
    r.label = prot::label_stability(r.trajectory, part.partition, model.inertia);
    r.outcome = std::move(res.outcome);
    return r;
  });
}

CalibrationReport run_calibration(const grid::NetworkCase& base, const std::vector<ScenarioSpec>& specs,
                                  const RunConfig& cfg) {
  CalibrationReport out;
  out.rows.resize(specs.size());
  // Scenarios in parallel; each pipeline itself stays serial.
  RunConfig inner = cfg;
  inner.parallel = false;
  const auto n = static_cast<long>(specs.size());
  std::vector<std::exception_ptr> errs(specs.size());
#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      const auto r = run_scenario(base, specs[k], inner);
      out.rows[k] = {specs[k].id, r.label.value, r.peak};
    } catch (...) {
      errs[k] = std::current_exception();
    }
  }
  // First failure in batch order, independent of scheduling.
  for (const auto& e : errs) {
    if (e) std::rethrow_exception(e);
  }
  out.thresholds = psi::calibrate_thresholds(out.rows);
  return out;
}

ComparisonReport run_comparison(const grid::NetworkCase& base, const ScenarioSpec& spec, const psi::Thresholds& th,
                                const RunConfig& cfg) {
  ComparisonReport out;
  out.without_islanding = run_scenario(base, spec, cfg, th);
  out.with_islanding = run_controlled(base, spec, th, cfg);
  out.comparison = exec::compare_load_loss(*out.with_islanding.outcome, *out.without_islanding.outcome);
  return out;
}

}  // namespace islanding::harness
