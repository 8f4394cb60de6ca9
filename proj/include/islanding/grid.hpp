#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace islanding {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;

namespace grid {

enum class BusKind { slack, pv, pq };
enum class BranchStatus { in_service, out };

struct BusRecord {
  int id = 0;
  BusKind kind = BusKind::pq;
  double voltage_setpoint = 1.0;
  double base_kv = 0.0;
  double load_p = 0.0;
  double load_q = 0.0;
  double shunt_g = 0.0;
  double shunt_b = 0.0;
};

struct BranchRecord {
  std::string id;
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charging = 0.0;
  double tap = 1.0;
  BranchStatus status = BranchStatus::in_service;

  Complex series_impedance() const { return {r, x}; }
};

// h, d and xdp are stored as given on the machine base; the *_sys accessors
// return them on the system base.
struct MachineRecord {
  std::string id;
  int bus = 0;
  double h = 0.0;
  double d = 0.0;
  double xdp = 0.0;
  double mva_base = 100.0;
  double p_gen = 0.0;
  double q_gen = 0.0;

  double h_sys(double base_mva) const { return h * mva_base / base_mva; }
  double d_sys(double base_mva) const { return d * mva_base / base_mva; }
  double xdp_sys(double base_mva) const { return xdp * base_mva / mva_base; }
};

/// Static grid description. Construct through load_case() or make_case() so
/// the invariants (referential integrity, single slack, connectivity) hold.
class NetworkCase {
 public:
  std::string name;
  double base_mva = 100.0;
  std::vector<BusRecord> buses;
  std::vector<BranchRecord> branches;
  std::vector<MachineRecord> machines;

  std::size_t bus_index(int bus_id) const;
  std::size_t branch_index(std::string_view branch_id) const;
  std::size_t machine_index(std::string_view machine_id) const;
  std::optional<std::size_t> find_bus(int bus_id) const;
  std::optional<std::size_t> find_branch(std::string_view branch_id) const;
  std::optional<std::size_t> find_machine(std::string_view machine_id) const;

  double total_load_p() const;

  /// Rebuilds the lookup tables; called by make_case().
  void reindex();

 private:
  std::unordered_map<int, std::size_t> bus_lookup_;
  std::unordered_map<std::string, std::size_t> branch_lookup_;
  std::unordered_map<std::string, std::size_t> machine_lookup_;
};

/// Validates the records and returns an indexed case. Throws InputError.
NetworkCase make_case(NetworkCase raw);

/// Parses the JSON case format (sections buses, branches, machines).
NetworkCase load_case(std::string_view source);
NetworkCase load_case_file(const std::string& path);
std::string case_to_json(const NetworkCase& c);

struct AdmittanceMatrix {
  ComplexMatrix entries;
  std::size_t order() const { return static_cast<std::size_t>(entries.rows()); }
};

/// pi-model stamp of a branch: [I_from; I_to] = [yff yft; ytf ytt] [V_from; V_to].
struct BranchStamp {
  Complex yff, yft, ytf, ytt;
};
BranchStamp branch_stamp(const BranchRecord& br);
BranchStamp section_stamp(Complex z, double b_charging, double tap);

/// Bus admittance matrix over in-service branches plus bus shunts.
AdmittanceMatrix build_ybus(const NetworkCase& c);
void stamp_branch(ComplexMatrix& y, std::size_t f, std::size_t t, const BranchStamp& s, double sign = 1.0);

struct ReducedNetwork {
  std::vector<std::string> machine_ids;
  ComplexMatrix y_red;
  std::size_t order() const { return machine_ids.size(); }
};

struct KronResult {
  ComplexMatrix y_red;
  /// Maps retained-node voltages to eliminated-node voltages: V_e = recovery * V_r.
  ComplexMatrix recovery;
  std::vector<std::size_t> retained;
  std::vector<std::size_t> eliminated;
};

/// Schur complement Y_rr - Y_re Y_ee^-1 Y_er. Throws SolverError if Y_ee is singular.
KronResult kron_reduce(const ComplexMatrix& y_aug, std::span<const std::size_t> retained);
ReducedNetwork kron_reduce(const AdmittanceMatrix& y_aug, std::span<const std::size_t> retained,
                           std::vector<std::string> machine_ids);

/// Connected components over in-service branches; returns a component label per bus.
std::vector<int> bus_components(const NetworkCase& c, const std::vector<bool>& branch_in);

}  // namespace grid
}  // namespace islanding
