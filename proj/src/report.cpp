#include <filesystem>
#include <fstream>
#include <sstream>
#include <map>

#include "islanding/error.hpp"
#include "islanding/harness.hpp"
#include "text_io.hpp"

namespace islanding::harness {

namespace fs = std::filesystem;
using detail::format_double;

namespace {

std::string fmt(double v) { return format_double(v); }
std::string fmt(const std::optional<double>& v) { return v ? format_double(*v) : "none"; }

std::string join(const std::vector<std::string>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += v[i];
  }
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw InputError("write failed for '" + p.string() + "'");
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create '" + dir + "': " + ec.message());
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p, const std::string& header) {
  std::istringstream in(detail::read_text_file(p.string(), "report file"));
  std::string line;
  if (!std::getline(in, line) || line != header) throw InputError("unexpected header in '" + p.string() + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split(line, ','));
  }
  return rows;
}

double num(const std::string& s) { return detail::parse_double(s, "report"); }
std::optional<double> opt_num(const std::string& s) {
  if (s == "none") return std::nullopt;
  return num(s);
}

std::string trajectory_header(const std::vector<std::string>& ids) {
  std::string h = "t";
  for (const auto& id : ids) h += ",delta_" + id;
  for (const auto& id : ids) h += ",omega_" + id;
  return h;
}

constexpr const char* kPsiHeader = "t,cgc,igc,dcgc,g_cgc,g_igc,g_dcgc,signal,saturated";
constexpr const char* kRelayHeader = "time,kind,target,position,open_branch,origin";
constexpr const char* kOutcomeHeader = "island_id,machines,load_served_mw,survived,load_mw,diverged,buses";
constexpr const char* kCalibrationHeader = "scenario,label,peak_cgc,peak_igc,peak_dcgc";

std::string groups_text(const GeneratorPartition& p) {
  std::vector<std::string> g;
  for (const auto& grp : p.groups) g.push_back(join(grp, ','));
  return join(g, '|');
}

std::string separated_text(const std::vector<std::vector<std::size_t>>& sides) {
  std::vector<std::string> out;
  for (const auto& side : sides) {
    std::vector<std::string> s;
    for (auto g : side) s.push_back(std::to_string(g));
    out.push_back(join(s, ','));
  }
  return join(out, '|');
}

}  // namespace

void export_report(const RunReport& r, const std::string& dir) {
  make_dir(dir);
  const fs::path d(dir);

  std::string traj = trajectory_header(r.machine_ids) + "\n";
  for (const auto& s : r.trajectory.samples) {
    traj += fmt(s.t);
    for (double v : s.delta) traj += "," + fmt(v);
    for (double v : s.omega) traj += "," + fmt(v);
    traj += "\n";
  }
  write_file(d / "trajectory.csv", traj);

  std::string psi = std::string(kPsiHeader) + "\n";
  for (std::size_t i = 0; i < r.psi.size(); ++i) {
    const auto& p = r.psi[i];
    const auto& g = r.growth[i];
    const bool at_signal = r.signal.fired && p.time == r.signal.time;
    psi += fmt(p.time) + "," + fmt(p.cgc) + "," + fmt(p.igc) + "," + fmt(p.dcgc) + "," + fmt(g.g_cgc) + "," +
           fmt(g.g_igc) + "," + fmt(g.g_dcgc) + "," + (at_signal ? "1" : "0") + "," + (p.saturated ? "1" : "0") +
           "\n";
  }
  write_file(d / "psi.csv", psi);

  std::string relay = std::string(kRelayHeader) + "\n";
  for (const auto& e : r.relay_log) {
    relay += fmt(e.time) + "," + dyn::to_string(e.kind) + "," + e.target + "," + fmt(e.position) + "," +
             (e.open_branch ? "1" : "0") + "," + dyn::to_string(e.origin) + "\n";
  }
  write_file(d / "relay_log.csv", relay);

  if (r.outcome) {
    std::string oc = std::string(kOutcomeHeader) + "\n";
    for (const auto& isl : r.outcome->islands) {
      std::vector<std::string> buses;
      for (int b : isl.buses) buses.push_back(std::to_string(b));
      oc += std::to_string(isl.id) + "," + join(isl.machines, ';') + "," + fmt(isl.survived ? isl.load_mw : 0.0) +
            "," + (isl.survived ? "1" : "0") + "," + fmt(isl.load_mw) + "," + (isl.diverged ? "1" : "0") + "," +
            join(buses, ';') + "\n";
    }
    write_file(d / "outcome.csv", oc);
  } else {
    std::error_code ec;
    fs::remove(d / "outcome.csv", ec);
  }

  std::string sum;
  sum += "scenario=" + r.scenario_id + "\n";
  sum += "machines=" + join(r.machine_ids, ',') + "\n";
  sum += "partition=" + groups_text(r.partition) + "\n";
  sum += std::string("label=") + prot::to_string(r.label.value) + "\n";
  sum += "label_time=" + fmt(r.label.time) + "\n";
  sum += "separated=" + separated_text(r.label.separated_groups) + "\n";
  sum += std::string("signal_fired=") + (r.signal.fired ? "1" : "0") + "\n";
  sum += "signal_time=" + fmt(r.signal.time) + "\n";
  sum += "t_cgc=" + fmt(r.signal.t_cgc) + "\n";
  sum += "t_igc=" + fmt(r.signal.t_igc) + "\n";
  sum += "t_dcgc=" + fmt(r.signal.t_dcgc) + "\n";
  sum += "peak_time=" + fmt(r.peak.time) + "\n";
  sum += "peak_cgc=" + fmt(r.peak.g_cgc) + "\n";
  sum += "peak_igc=" + fmt(r.peak.g_igc) + "\n";
  sum += "peak_dcgc=" + fmt(r.peak.g_dcgc) + "\n";
  sum += "relay_trips=" + std::to_string(relay_trip_count(r.relay_log)) + "\n";
  if (r.outcome) {
    sum += "case=" + r.outcome->case_name + "\n";
    sum += "total_mw=" + fmt(r.outcome->total_mw) + "\n";
    sum += "served_mw=" + fmt(r.outcome->served_mw) + "\n";
    sum += "lost_mw=" + fmt(r.outcome->lost_mw) + "\n";
    sum += "deenergized_mw=" + fmt(r.outcome->deenergized_mw) + "\n";
  }
  write_file(d / "summary.txt", sum);
}

RunReport read_report(const std::string& dir) {
  const fs::path d(dir);
  std::map<std::string, std::string> kv;
  {
    std::istringstream in(detail::read_text_file((d / "summary.txt").string(), "report summary"));
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw InputError("report summary: malformed line '" + line + "'");
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw InputError("report summary: missing '" + k + "'");
    return it->second;
  };

  RunReport r;
  r.scenario_id = get("scenario");
  r.machine_ids = split(get("machines"), ',');
  for (const auto& g : split(get("partition"), '|')) r.partition.groups.push_back(split(g, ','));
  r.label.value = prot::parse_stability_class(get("label"));
  r.label.time = opt_num(get("label_time"));
  for (const auto& side : split(get("separated"), '|')) {
    std::vector<std::size_t> s;
    for (const auto& g : split(side, ',')) s.push_back(static_cast<std::size_t>(std::stoul(g)));
    r.label.separated_groups.push_back(s);
  }
  r.signal.fired = get("signal_fired") == "1";
  r.signal.time = num(get("signal_time"));
  r.signal.t_cgc = opt_num(get("t_cgc"));
  r.signal.t_igc = opt_num(get("t_igc"));
  r.signal.t_dcgc = opt_num(get("t_dcgc"));
  r.peak = {num(get("peak_time")), num(get("peak_cgc")), num(get("peak_igc")), num(get("peak_dcgc"))};

  const std::size_t m = r.machine_ids.size();
  r.trajectory.machine_ids = r.machine_ids;
  for (const auto& row : read_csv(d / "trajectory.csv", trajectory_header(r.machine_ids))) {
    if (row.size() != 1 + 2 * m) throw InputError("trajectory.csv: wrong column count");
    dyn::Sample s;
    s.t = num(row[0]);
    for (std::size_t k = 0; k < m; ++k) s.delta.push_back(num(row[1 + k]));
    for (std::size_t k = 0; k < m; ++k) s.omega.push_back(num(row[1 + m + k]));
    r.trajectory.samples.push_back(std::move(s));
  }
  for (const auto& row : read_csv(d / "psi.csv", kPsiHeader)) {
    if (row.size() != 9) throw InputError("psi.csv: wrong column count");
    r.psi.push_back({num(row[0]), num(row[1]), num(row[2]), num(row[3]), row[8] == "1"});
    r.growth.push_back({num(row[0]), num(row[4]), num(row[5]), num(row[6])});
  }
  for (const auto& row : read_csv(d / "relay_log.csv", kRelayHeader)) {
    if (row.size() != 6) throw InputError("relay_log.csv: wrong column count");
    dyn::Event e;
    e.time = num(row[0]);
    e.kind = dyn::parse_event_kind(row[1]);
    e.target = row[2];
    e.position = num(row[3]);
    e.open_branch = row[4] == "1";
    e.origin = dyn::parse_event_origin(row[5]);
    r.relay_log.push_back(std::move(e));
  }
  r.trajectory.event_log = r.relay_log;

  if (fs::exists(d / "outcome.csv")) {
    exec::IslandOutcome oc;
    oc.case_name = get("case");
    oc.total_mw = num(get("total_mw"));
    oc.served_mw = num(get("served_mw"));
    oc.lost_mw = num(get("lost_mw"));
    oc.deenergized_mw = num(get("deenergized_mw"));
    for (const auto& row : read_csv(d / "outcome.csv", kOutcomeHeader)) {
      if (row.size() != 7) throw InputError("outcome.csv: wrong column count");
      exec::Island isl;
      isl.id = std::stoi(row[0]);
      isl.machines = split(row[1], ';');
      isl.survived = row[3] == "1";
      isl.load_mw = num(row[4]);
      isl.diverged = row[5] == "1";
      for (const auto& b : split(row[6], ';')) isl.buses.push_back(std::stoi(b));
      oc.islands.push_back(std::move(isl));
    }
    r.outcome = std::move(oc);
  }
  return r;
}

bool same_exported_content(const RunReport& a, const RunReport& b) {
  auto same_samples = [](const dyn::SystemTrajectory& x, const dyn::SystemTrajectory& y) {
    if (x.samples.size() != y.samples.size()) return false;
    for (std::size_t i = 0; i < x.samples.size(); ++i) {
      const auto &p = x.samples[i], &q = y.samples[i];
      if (p.t != q.t || p.delta != q.delta || p.omega != q.omega) return false;
    }
    return true;
  };
  auto same_psi = [](const psi::PsiSample& p, const psi::PsiSample& q) {
    return p.time == q.time && p.cgc == q.cgc && p.igc == q.igc && p.dcgc == q.dcgc && p.saturated == q.saturated;
  };
  auto same_growth = [](const psi::GrowthPercent& p, const psi::GrowthPercent& q) {
    return p.time == q.time && p.g_cgc == q.g_cgc && p.g_igc == q.g_igc && p.g_dcgc == q.g_dcgc;
  };
  auto same_outcome = [](const exec::IslandOutcome& p, const exec::IslandOutcome& q) {
    if (p.case_name != q.case_name || p.total_mw != q.total_mw || p.served_mw != q.served_mw ||
        p.lost_mw != q.lost_mw || p.deenergized_mw != q.deenergized_mw || p.islands.size() != q.islands.size()) {
      return false;
    }
    for (std::size_t i = 0; i < p.islands.size(); ++i) {
      const auto &x = p.islands[i], &y = q.islands[i];
      if (x.id != y.id || x.machines != y.machines || x.buses != y.buses || x.load_mw != y.load_mw ||
          x.survived != y.survived || x.diverged != y.diverged) {
        return false;
      }
    }
    return true;
  };

  if (a.scenario_id != b.scenario_id || a.machine_ids != b.machine_ids || !(a.partition == b.partition)) return false;
  if (!same_samples(a.trajectory, b.trajectory)) return false;
  if (a.psi.size() != b.psi.size() || a.growth.size() != b.growth.size()) return false;
  for (std::size_t i = 0; i < a.psi.size(); ++i) {
    if (!same_psi(a.psi[i], b.psi[i]) || !same_growth(a.growth[i], b.growth[i])) return false;
  }
  if (!same_growth(a.peak, b.peak)) return false;
  if (a.signal.fired != b.signal.fired || a.signal.time != b.signal.time || a.signal.t_cgc != b.signal.t_cgc ||
      a.signal.t_igc != b.signal.t_igc || a.signal.t_dcgc != b.signal.t_dcgc) {
    return false;
  }
  if (a.relay_log != b.relay_log) return false;
  if (a.label.value != b.label.value || a.label.time != b.label.time ||
      a.label.separated_groups != b.label.separated_groups) {
    return false;
  }
  if (a.outcome.has_value() != b.outcome.has_value()) return false;
  return !a.outcome || same_outcome(*a.outcome, *b.outcome);
}

void export_calibration(const CalibrationReport& r, const std::string& dir) {
  make_dir(dir);
  std::string csv = std::string(kCalibrationHeader) + "\n";
  for (const auto& row : r.rows) {
    csv += row.scenario + "," + prot::to_string(row.label) + "," + fmt(row.peak.g_cgc) + "," + fmt(row.peak.g_igc) +
           "," + fmt(row.peak.g_dcgc) + "\n";
  }
  write_file(fs::path(dir) / "calibration.csv", csv);
  write_file(fs::path(dir) / "thresholds.json", psi::thresholds_to_json(r.thresholds));
}

CalibrationReport read_calibration(const std::string& dir) {
  CalibrationReport r;
  for (const auto& row : read_csv(fs::path(dir) / "calibration.csv", kCalibrationHeader)) {
    if (row.size() != 5) throw InputError("calibration.csv: wrong column count");
    psi::CalibrationRow c;
    c.scenario = row[0];
    c.label = prot::parse_stability_class(row[1]);
    c.peak = {0.0, num(row[2]), num(row[3]), num(row[4])};
    r.rows.push_back(c);
  }
  r.thresholds = psi::load_thresholds((fs::path(dir) / "thresholds.json").string());
  return r;
}

void export_comparison(const ComparisonReport& r, const std::string& dir) {
  make_dir(dir);
  export_report(r.with_islanding, (fs::path(dir) / "with_islanding").string());
  export_report(r.without_islanding, (fs::path(dir) / "without_islanding").string());
  const auto& c = r.comparison;
  std::string csv =
      "total_mw,served_with_mw,served_without_mw,lost_with_mw,lost_without_mw,deenergized_with_mw,"
      "deenergized_without_mw,saving_mw,saving_fraction\n";
  csv += fmt(c.total_mw) + "," + fmt(c.served_with) + "," + fmt(c.served_without) + "," + fmt(c.lost_with) + "," +
         fmt(c.lost_without) + "," + fmt(c.deenergized_with) + "," + fmt(c.deenergized_without) + "," +
         fmt(c.saving_mw) + "," + fmt(c.saving_fraction) + "\n";
  write_file(fs::path(dir) / "comparison.csv", csv);
}

std::string summarize(const RunReport& r) {
  std::ostringstream os;
  os << "scenario " << r.scenario_id << ": " << prot::to_string(r.label.value);
  if (r.label.time) os << " at t=" << fmt(*r.label.time) << " s";
  os << "\n  partition: " << groups_text(r.partition) << "\n";
  os << "  peak growth %: cgc " << fmt(r.peak.g_cgc) << ", igc " << fmt(r.peak.g_igc) << ", dcgc "
     << fmt(r.peak.g_dcgc) << "\n";
  if (r.signal.fired) {
    os << "  islanding signal at t=" << fmt(r.signal.time) << " s\n";
  } else {
    os << "  no islanding signal\n";
  }
  os << "  relay trips: " << relay_trip_count(r.relay_log) << "\n";
  for (const auto& e : r.relay_log) {
    if (e.origin == dyn::EventOrigin::scenario) continue;
    os << "    t=" << fmt(e.time) << " " << dyn::to_string(e.kind) << " " << e.target << " (" << dyn::to_string(e.origin)
       << ")\n";
  }
  if (r.outcome) {
    os << "  load served " << fmt(r.outcome->served_mw) << " of " << fmt(r.outcome->total_mw) << " MW (lost "
       << fmt(r.outcome->lost_mw) << ", de-energized " << fmt(r.outcome->deenergized_mw) << ")\n";
    for (const auto& isl : r.outcome->islands) {
      os << "    island " << isl.id << " [" << join(isl.machines, ' ') << "] " << fmt(isl.load_mw) << " MW "
         << (isl.survived ? "survived" : (isl.diverged ? "diverged" : "lost")) << "\n";
    }
  }
  return os.str();
}

}  // namespace islanding::harness
