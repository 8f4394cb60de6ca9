#pragma once

#include <vector>

#include "islanding/grid.hpp"

namespace islanding::steady {

struct PowerFlowOptions {
  double tol = 1e-8;
  int max_iter = 20;
};

struct PowerFlowSolution {
  std::vector<Complex> voltages;
  double mismatch_inf_norm = 0.0;
  int iterations = 0;
};

/// Polar Newton-Raphson from a flat start. PV reactive limits are not enforced.
/// Throws SolverError on non-convergence or a singular Jacobian.
PowerFlowSolution solve_power_flow(const grid::NetworkCase& c, const PowerFlowOptions& opt = {});

/// Specified net injections (generation minus load) per bus, per-unit.
std::vector<Complex> scheduled_injections(const grid::NetworkCase& c);

/// Complex power injections S = V conj(Y V) computed from a voltage profile.
std::vector<Complex> computed_injections(const grid::AdmittanceMatrix& y, const std::vector<Complex>& v);

/// Largest P/Q mismatch at the buses where it is specified (P at PV/PQ, Q at PQ).
double mismatch_norm(const grid::NetworkCase& c, const grid::AdmittanceMatrix& y, const std::vector<Complex>& v);

/// Machine dispatch implied by a converged solution (slack and PV reactive output
/// filled in from the bus balance; split by p_gen share when machines share a bus).
std::vector<Complex> machine_dispatch(const grid::NetworkCase& c, const PowerFlowSolution& pf);

/// Classical-model initial conditions.
struct DynamicInit {
  std::vector<double> emf;       // |E| per machine, case order
  std::vector<double> delta0;    // radians
  std::vector<double> p_mech;    // per-unit system base
  std::vector<Complex> terminal_voltage;
  std::vector<Complex> load_admittance;  // constant-impedance load per bus
  grid::ReducedNetwork reduced;
  double base_mva = 100.0;
};

/// E at angle delta0 behind X'd for a single machine: E = V + jX'd conj(S / V).
Complex internal_emf(Complex v_terminal, Complex s_gen, double xdp);

/// Builds internal EMFs, constant-impedance loads, the reduced network and the
/// equilibrium mechanical powers. Throws InputError for a machine at a dead bus.
DynamicInit init_classical(const grid::NetworkCase& c, const PowerFlowSolution& pf);

}  // namespace islanding::steady
