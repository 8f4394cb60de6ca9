#pragma once

#include <string>

#include "islanding/grid.hpp"
#include "islanding/harness.hpp"

namespace testing_support {

inline std::string data_path(const std::string& rel) { return std::string(ISLANDING_DATA_DIR) + "/" + rel; }

inline const islanding::grid::NetworkCase& ieee39() {
  static const auto c = islanding::grid::load_case_file(data_path("cases/ieee39.json"));
  return c;
}

/// Machine G1 (bus 1) against a near-infinite machine G2 (bus 2, slack) over a
/// lossless line; no loads, no charging.
inline islanding::grid::NetworkCase smib(double x_line = 0.3, double p = 0.8, double h = 4.0, double xdp = 0.2,
                                         double d = 0.0) {
  using namespace islanding::grid;
  NetworkCase c;
  c.name = "smib";
  c.base_mva = 100.0;
  BusRecord b1;
  b1.id = 1;
  b1.kind = BusKind::pv;
  b1.voltage_setpoint = 1.0;
  BusRecord b2;
  b2.id = 2;
  b2.kind = BusKind::slack;
  b2.voltage_setpoint = 1.0;
  c.buses = {b1, b2};
  BranchRecord br;
  br.id = "1-2";
  br.from_bus = 1;
  br.to_bus = 2;
  br.x = x_line;
  c.branches = {br};
  MachineRecord g1;
  g1.id = "G1";
  g1.bus = 1;
  g1.h = h;
  g1.d = d;
  g1.xdp = xdp;
  g1.p_gen = p;
  MachineRecord g2;
  g2.id = "G2";
  g2.bus = 2;
  g2.h = 1e7;
  g2.xdp = 1e-3;
  c.machines = {g1, g2};
  return make_case(std::move(c));
}

}  // namespace testing_support
