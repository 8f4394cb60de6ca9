#include "islanding/grid.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "islanding/error.hpp"

namespace islanding::grid {

namespace {

using nlohmann::json;

BusKind parse_kind(const std::string& s) {
  if (s == "slack") return BusKind::slack;
  if (s == "PV") return BusKind::pv;
  if (s == "PQ") return BusKind::pq;
  throw InputError("unknown bus kind '" + s + "'");
}

const char* kind_name(BusKind k) {
  switch (k) {
    case BusKind::slack: return "slack";
    case BusKind::pv: return "PV";
    case BusKind::pq: return "PQ";
  }
  return "PQ";
}

template <class T>
T field(const json& j, const char* key, const char* section) {
  if (!j.contains(key)) {
    throw InputError(std::string("missing field '") + key + "' in " + section);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("bad field '") + key + "' in " + section + ": " + e.what());
  }
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("bad field '") + key + "': " + e.what());
  }
}

}  // namespace

std::size_t NetworkCase::bus_index(int bus_id) const {
  auto it = bus_lookup_.find(bus_id);
  if (it == bus_lookup_.end()) throw InputError("unknown bus " + std::to_string(bus_id));
  return it->second;
}

std::size_t NetworkCase::branch_index(std::string_view branch_id) const {
  auto it = branch_lookup_.find(std::string(branch_id));
  if (it == branch_lookup_.end()) throw InputError("unknown branch '" + std::string(branch_id) + "'");
  return it->second;
}

std::size_t NetworkCase::machine_index(std::string_view machine_id) const {
  auto it = machine_lookup_.find(std::string(machine_id));
  if (it == machine_lookup_.end()) throw InputError("unknown machine '" + std::string(machine_id) + "'");
  return it->second;
}

std::optional<std::size_t> NetworkCase::find_bus(int bus_id) const {
  auto it = bus_lookup_.find(bus_id);
  if (it == bus_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> NetworkCase::find_branch(std::string_view branch_id) const {
  auto it = branch_lookup_.find(std::string(branch_id));
  if (it == branch_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> NetworkCase::find_machine(std::string_view machine_id) const {
  auto it = machine_lookup_.find(std::string(machine_id));
  if (it == machine_lookup_.end()) return std::nullopt;
  return it->second;
}

double NetworkCase::total_load_p() const {
  return std::accumulate(buses.begin(), buses.end(), 0.0,
                         [](double acc, const BusRecord& b) { return acc + b.load_p; });
}

void NetworkCase::reindex() {
  bus_lookup_.clear();
  branch_lookup_.clear();
  machine_lookup_.clear();
  for (std::size_t i = 0; i < buses.size(); ++i) bus_lookup_[buses[i].id] = i;
  for (std::size_t i = 0; i < branches.size(); ++i) branch_lookup_[branches[i].id] = i;
  for (std::size_t i = 0; i < machines.size(); ++i) machine_lookup_[machines[i].id] = i;
}

NetworkCase make_case(NetworkCase c) {
  if (!(c.base_mva > 0)) throw InputError("base_mva must be positive");
  if (c.buses.empty()) throw InputError("case has no buses");

  std::set<int> bus_ids;
  int slack_count = 0;
  for (const auto& b : c.buses) {
    if (!bus_ids.insert(b.id).second) throw InputError("duplicate bus id " + std::to_string(b.id));
    if (b.kind == BusKind::slack) ++slack_count;
    if (b.kind != BusKind::pq && !(b.voltage_setpoint > 0)) {
      throw InputError("bus " + std::to_string(b.id) + " needs a positive voltage setpoint");
    }
  }
  if (slack_count != 1) {
    throw InputError("case must have exactly one slack bus (found " + std::to_string(slack_count) + ")");
  }

  std::set<std::string> branch_ids;
  for (const auto& br : c.branches) {
    if (!branch_ids.insert(br.id).second) throw InputError("duplicate branch id '" + br.id + "'");
    if (!bus_ids.count(br.from_bus) || !bus_ids.count(br.to_bus)) {
      throw InputError("branch '" + br.id + "' references a missing bus");
    }
    if (br.from_bus == br.to_bus) throw InputError("branch '" + br.id + "' is a self loop");
    if (br.x == 0.0) throw InputError("branch '" + br.id + "' has zero reactance");
    if (!(br.tap > 0)) throw InputError("branch '" + br.id + "' has a non-positive tap");
  }

  std::set<std::string> machine_ids;
  for (const auto& m : c.machines) {
    if (!machine_ids.insert(m.id).second) throw InputError("duplicate machine id '" + m.id + "'");
    if (!bus_ids.count(m.bus)) throw InputError("machine '" + m.id + "' references a missing bus");
    if (!(m.h > 0)) throw InputError("machine '" + m.id + "' needs h > 0");
    if (!(m.xdp > 0)) throw InputError("machine '" + m.id + "' needs xdp > 0");
    if (!(m.mva_base > 0)) throw InputError("machine '" + m.id + "' needs mva_base > 0");
  }

  c.reindex();

  std::vector<bool> in(c.branches.size());
  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    in[k] = c.branches[k].status == BranchStatus::in_service;
  }
  auto comp = bus_components(c, in);
  if (std::any_of(comp.begin(), comp.end(), [](int x) { return x != 0; })) {
    throw InputError("case graph is disconnected over in-service branches");
  }
  return c;
}

NetworkCase load_case(std::string_view source) {
  json j;
  try {
    j = json::parse(source);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("case file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("case file must be an object");
  for (const char* s : {"buses", "branches", "machines"}) {
    if (!j.contains(s) || !j.at(s).is_array()) {
      throw InputError(std::string("case file needs an array section '") + s + "'");
    }
  }

  NetworkCase c;
  c.name = field_or<std::string>(j, "name", "case");
  c.base_mva = field<double>(j, "base_mva", "case");

  for (const auto& jb : j.at("buses")) {
    BusRecord b;
    b.id = field<int>(jb, "id", "buses");
    b.kind = parse_kind(field<std::string>(jb, "kind", "buses"));
    b.voltage_setpoint = field_or<double>(jb, "voltage_setpoint", 1.0);
    b.base_kv = field_or<double>(jb, "base_kv", 0.0);
    b.load_p = field_or<double>(jb, "load_p", 0.0);
    b.load_q = field_or<double>(jb, "load_q", 0.0);
    b.shunt_g = field_or<double>(jb, "shunt_g", 0.0);
    b.shunt_b = field_or<double>(jb, "shunt_b", 0.0);
    c.buses.push_back(b);
  }
  for (const auto& jb : j.at("branches")) {
    BranchRecord br;
    br.id = field<std::string>(jb, "id", "branches");
    br.from_bus = field<int>(jb, "from_bus", "branches");
    br.to_bus = field<int>(jb, "to_bus", "branches");
    br.r = field<double>(jb, "r", "branches");
    br.x = field<double>(jb, "x", "branches");
    br.b_charging = field_or<double>(jb, "b_charging", 0.0);
    br.tap = field_or<double>(jb, "tap", 1.0);
    const auto status = field_or<std::string>(jb, "status", "in-service");
    if (status == "in-service") {
      br.status = BranchStatus::in_service;
    } else if (status == "out") {
      br.status = BranchStatus::out;
    } else {
      throw InputError("unknown branch status '" + status + "'");
    }
    c.branches.push_back(br);
  }
  for (const auto& jm : j.at("machines")) {
    MachineRecord m;
    m.id = field<std::string>(jm, "id", "machines");
    m.bus = field<int>(jm, "bus", "machines");
    m.h = field<double>(jm, "h", "machines");
    m.d = field_or<double>(jm, "d", 0.0);
    m.xdp = field<double>(jm, "xdp", "machines");
    m.mva_base = field_or<double>(jm, "mva_base", c.base_mva);
    m.p_gen = field_or<double>(jm, "p_gen", 0.0);
    m.q_gen = field_or<double>(jm, "q_gen", 0.0);
    c.machines.push_back(m);
  }
  return make_case(std::move(c));
}

NetworkCase load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open case file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_case(ss.str());
}

std::string case_to_json(const NetworkCase& c) {
  json j;
  j["name"] = c.name;
  j["base_mva"] = c.base_mva;
  j["buses"] = json::array();
  for (const auto& b : c.buses) {
    j["buses"].push_back({{"id", b.id}, {"kind", kind_name(b.kind)}, {"voltage_setpoint", b.voltage_setpoint},
                          {"base_kv", b.base_kv}, {"load_p", b.load_p}, {"load_q", b.load_q},
                          {"shunt_g", b.shunt_g}, {"shunt_b", b.shunt_b}});
  }
  j["branches"] = json::array();
  for (const auto& br : c.branches) {
    j["branches"].push_back({{"id", br.id}, {"from_bus", br.from_bus}, {"to_bus", br.to_bus}, {"r", br.r},
                             {"x", br.x}, {"b_charging", br.b_charging}, {"tap", br.tap},
                             {"status", br.status == BranchStatus::in_service ? "in-service" : "out"}});
  }
  j["machines"] = json::array();
  for (const auto& m : c.machines) {
    j["machines"].push_back({{"id", m.id}, {"bus", m.bus}, {"h", m.h}, {"d", m.d}, {"xdp", m.xdp},
                             {"mva_base", m.mva_base}, {"p_gen", m.p_gen}, {"q_gen", m.q_gen}});
  }
  return j.dump(1);
}

BranchStamp section_stamp(Complex z, double b_charging, double tap) {
  const Complex y = 1.0 / z;
  const Complex half_b{0.0, b_charging / 2.0};
  return {(y + half_b) / (tap * tap), -y / tap, -y / tap, y + half_b};
}

BranchStamp branch_stamp(const BranchRecord& br) {
  return section_stamp(br.series_impedance(), br.b_charging, br.tap);
}

void stamp_branch(ComplexMatrix& y, std::size_t f, std::size_t t, const BranchStamp& s, double sign) {
  const auto fi = static_cast<Eigen::Index>(f);
  const auto ti = static_cast<Eigen::Index>(t);
  y(fi, fi) += sign * s.yff;
  y(fi, ti) += sign * s.yft;
  y(ti, fi) += sign * s.ytf;
  y(ti, ti) += sign * s.ytt;
}

AdmittanceMatrix build_ybus(const NetworkCase& c) {
  const auto n = static_cast<Eigen::Index>(c.buses.size());
  AdmittanceMatrix y{ComplexMatrix::Zero(n, n)};
  for (const auto& br : c.branches) {
    if (br.status != BranchStatus::in_service) continue;
    if (br.x == 0.0) throw InputError("branch '" + br.id + "' has zero reactance");
    stamp_branch(y.entries, c.bus_index(br.from_bus), c.bus_index(br.to_bus), branch_stamp(br));
  }
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    y.entries(ii, ii) += Complex{c.buses[i].shunt_g, c.buses[i].shunt_b};
  }
  return y;
}

KronResult kron_reduce(const ComplexMatrix& y_aug, std::span<const std::size_t> retained) {
  const auto n = static_cast<std::size_t>(y_aug.rows());
  std::vector<bool> keep(n, false);
  for (auto r : retained) {
    if (r >= n) throw InputError("retained node out of range");
    keep[r] = true;
  }
  KronResult out;
  out.retained.assign(retained.begin(), retained.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) out.eliminated.push_back(i);
  }
  const auto nr = static_cast<Eigen::Index>(out.retained.size());
  const auto ne = static_cast<Eigen::Index>(out.eliminated.size());

  ComplexMatrix yrr(nr, nr), yre(nr, ne), yer(ne, nr), yee(ne, ne);
  for (Eigen::Index a = 0; a < nr; ++a) {
    for (Eigen::Index b = 0; b < nr; ++b) yrr(a, b) = y_aug(out.retained[a], out.retained[b]);
    for (Eigen::Index b = 0; b < ne; ++b) yre(a, b) = y_aug(out.retained[a], out.eliminated[b]);
  }
  for (Eigen::Index a = 0; a < ne; ++a) {
    for (Eigen::Index b = 0; b < nr; ++b) yer(a, b) = y_aug(out.eliminated[a], out.retained[b]);
    for (Eigen::Index b = 0; b < ne; ++b) yee(a, b) = y_aug(out.eliminated[a], out.eliminated[b]);
  }

  if (ne == 0) {
    out.y_red = yrr;
    out.recovery = ComplexMatrix::Zero(0, nr);
    return out;
  }

  Eigen::FullPivLU<ComplexMatrix> lu(yee);
  if (!lu.isInvertible()) {
    throw SolverError("Kron reduction: eliminated block is singular (isolated island without retained nodes)");
  }
  out.recovery = -lu.solve(yer);
  out.y_red = yrr + yre * out.recovery;
  return out;
}

ReducedNetwork kron_reduce(const AdmittanceMatrix& y_aug, std::span<const std::size_t> retained,
                           std::vector<std::string> machine_ids) {
  if (machine_ids.size() != retained.size()) {
    throw InputError("kron_reduce: one machine id per retained node is required");
  }
  auto k = kron_reduce(y_aug.entries, retained);
  return {std::move(machine_ids), std::move(k.y_red)};
}

std::vector<int> bus_components(const NetworkCase& c, const std::vector<bool>& branch_in) {
  const std::size_t n = c.buses.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    if (!branch_in[k]) continue;
    auto a = find(c.bus_index(c.branches[k].from_bus));
    auto b = find(c.bus_index(c.branches[k].to_bus));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  // Labels numbered by lowest bus index in each component.
  std::vector<int> label(n, -1);
  std::vector<int> root_label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = find(i);
    if (root_label[r] < 0) root_label[r] = next++;
    label[i] = root_label[r];
  }
  return label;
}

}  // namespace islanding::grid
