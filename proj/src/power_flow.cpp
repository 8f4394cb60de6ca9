#include "islanding/power_flow.hpp"

#include <algorithm>
#include <cmath>

#include "islanding/error.hpp"
#include "islanding/network_state.hpp"

namespace islanding::steady {

using grid::BusKind;

std::vector<Complex> scheduled_injections(const grid::NetworkCase& c) {
  std::vector<Complex> s(c.buses.size());
  for (std::size_t i = 0; i < c.buses.size(); ++i) s[i] = -Complex{c.buses[i].load_p, c.buses[i].load_q};
  for (const auto& m : c.machines) s[c.bus_index(m.bus)] += Complex{m.p_gen, m.q_gen};
  return s;
}

std::vector<Complex> computed_injections(const grid::AdmittanceMatrix& y, const std::vector<Complex>& v) {
  const auto n = static_cast<Eigen::Index>(v.size());
  ComplexVector vv(n);
  for (Eigen::Index i = 0; i < n; ++i) vv(i) = v[i];
  ComplexVector cur = y.entries * vv;
  std::vector<Complex> s(v.size());
  for (Eigen::Index i = 0; i < n; ++i) s[i] = vv(i) * std::conj(cur(i));
  return s;
}

double mismatch_norm(const grid::NetworkCase& c, const grid::AdmittanceMatrix& y, const std::vector<Complex>& v) {
  const auto sched = scheduled_injections(c);
  const auto calc = computed_injections(y, v);
  double worst = 0.0;
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    const auto kind = c.buses[i].kind;
    if (kind == BusKind::slack) continue;
    worst = std::max(worst, std::abs(sched[i].real() - calc[i].real()));
    if (kind == BusKind::pq) worst = std::max(worst, std::abs(sched[i].imag() - calc[i].imag()));
  }
  return worst;
}

PowerFlowSolution solve_power_flow(const grid::NetworkCase& c, const PowerFlowOptions& opt) {
  const std::size_t n = c.buses.size();
  const auto y = grid::build_ybus(c);
  const auto& Y = y.entries;
  const auto sched = scheduled_injections(c);

  std::vector<double> vm(n, 1.0), va(n, 0.0);
  std::vector<std::size_t> pvpq, pq;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = c.buses[i];
    if (b.kind != BusKind::pq) vm[i] = b.voltage_setpoint;
    if (b.kind != BusKind::slack) pvpq.push_back(i);
    if (b.kind == BusKind::pq) pq.push_back(i);
  }
  const auto npvpq = static_cast<Eigen::Index>(pvpq.size());
  const auto npq = static_cast<Eigen::Index>(pq.size());
  std::vector<Eigen::Index> pq_pos(n, -1);
  for (Eigen::Index k = 0; k < npq; ++k) pq_pos[pq[k]] = k;
  std::vector<Eigen::Index> ang_pos(n, -1);
  for (Eigen::Index k = 0; k < npvpq; ++k) ang_pos[pvpq[k]] = k;

  auto voltages = [&] {
    std::vector<Complex> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::polar(vm[i], va[i]);
    return v;
  };

  PowerFlowSolution sol;
  const Eigen::Index dim = npvpq + npq;
  for (int iter = 0;; ++iter) {
    const auto v = voltages();
    const auto s = computed_injections(y, v);
    Eigen::VectorXd f(dim);
    for (Eigen::Index k = 0; k < npvpq; ++k) f(k) = sched[pvpq[k]].real() - s[pvpq[k]].real();
    for (Eigen::Index k = 0; k < npq; ++k) f(npvpq + k) = sched[pq[k]].imag() - s[pq[k]].imag();
    const double norm = dim == 0 ? 0.0 : f.lpNorm<Eigen::Infinity>();
    sol.iterations = iter;
    sol.mismatch_inf_norm = norm;
    if (norm <= opt.tol) {
      sol.voltages = v;
      return sol;
    }
    if (iter >= opt.max_iter) {
      throw SolverError("power flow did not converge in " + std::to_string(opt.max_iter) +
                        " iterations (mismatch " + std::to_string(norm) + ")");
    }

    // Jacobian blocks in polar form: [dP/dth dP/dV; dQ/dth dQ/dV].
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < n; ++i) {
      if (c.buses[i].kind == BusKind::slack) continue;
      const Eigen::Index rp = ang_pos[i];
      const Eigen::Index rq = pq_pos[i] >= 0 ? npvpq + pq_pos[i] : -1;
      const double pi = s[i].real(), qi = s[i].imag();
      for (std::size_t k = 0; k < n; ++k) {
        const Complex yik = Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        if (yik == Complex{} && i != k) continue;
        const double gik = yik.real(), bik = yik.imag();
        const double th = va[i] - va[k];
        const double ct = std::cos(th), st = std::sin(th);
        const Eigen::Index ca = ang_pos[k];
        const Eigen::Index cv = pq_pos[k] >= 0 ? npvpq + pq_pos[k] : -1;
        if (i != k) {
          const double dp_dth = vm[i] * vm[k] * (gik * st - bik * ct);
          const double dp_dv = vm[i] * (gik * ct + bik * st);
          const double dq_dth = -vm[i] * vm[k] * (gik * ct + bik * st);
          const double dq_dv = vm[i] * (gik * st - bik * ct);
          if (ca >= 0) {
            jac(rp, ca) = dp_dth;
            if (rq >= 0) jac(rq, ca) = dq_dth;
          }
          if (cv >= 0) {
            jac(rp, cv) = dp_dv;
            if (rq >= 0) jac(rq, cv) = dq_dv;
          }
        } else {
          const double gii = gik, bii = bik;
          jac(rp, ca) = -qi - bii * vm[i] * vm[i];
          if (rq >= 0) jac(rq, ca) = pi - gii * vm[i] * vm[i];
          if (cv >= 0) {
            jac(rp, cv) = pi / vm[i] + gii * vm[i];
            jac(rq, cv) = qi / vm[i] - bii * vm[i];
          }
        }
      }
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    if (!(lu.rcond() > 1e-14)) throw SolverError("power flow Jacobian is singular");
    const Eigen::VectorXd dx = lu.solve(f);
    if (!dx.allFinite()) throw SolverError("power flow Jacobian is singular");
    for (Eigen::Index k = 0; k < npvpq; ++k) va[pvpq[k]] += dx(k);
    for (Eigen::Index k = 0; k < npq; ++k) vm[pq[k]] += dx(npvpq + k);
  }
}

std::vector<Complex> machine_dispatch(const grid::NetworkCase& c, const PowerFlowSolution& pf) {
  const auto y = grid::build_ybus(c);
  const auto s = computed_injections(y, pf.voltages);
  std::vector<Complex> bus_gen(c.buses.size());
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    bus_gen[i] = s[i] + Complex{c.buses[i].load_p, c.buses[i].load_q};
  }
  std::vector<double> p_share_total(c.buses.size(), 0.0);
  std::vector<int> count(c.buses.size(), 0);
  for (const auto& m : c.machines) {
    const auto b = c.bus_index(m.bus);
    p_share_total[b] += m.p_gen;
    ++count[b];
  }
  std::vector<Complex> out(c.machines.size());
  for (std::size_t k = 0; k < c.machines.size(); ++k) {
    const auto b = c.bus_index(c.machines[k].bus);
    const double share = p_share_total[b] != 0.0 ? c.machines[k].p_gen / p_share_total[b] : 1.0 / count[b];
    out[k] = bus_gen[b] * share;
  }
  return out;
}

Complex internal_emf(Complex v_terminal, Complex s_gen, double xdp) {
  const Complex current = std::conj(s_gen / v_terminal);
  return v_terminal + Complex{0.0, xdp} * current;
}

DynamicInit init_classical(const grid::NetworkCase& c, const PowerFlowSolution& pf) {
  if (pf.voltages.size() != c.buses.size()) throw InputError("power-flow solution does not match the case");
  DynamicInit init;
  init.base_mva = c.base_mva;
  init.terminal_voltage.resize(c.machines.size());
  init.load_admittance.resize(c.buses.size());
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    const double vmag = std::abs(pf.voltages[i]);
    const Complex s_load{c.buses[i].load_p, c.buses[i].load_q};
    if (s_load == Complex{}) continue;
    if (vmag == 0.0) throw InputError("load at a bus with zero voltage");
    init.load_admittance[i] = std::conj(s_load) / (vmag * vmag);
  }

  const auto dispatch = machine_dispatch(c, pf);
  std::vector<Complex> emf(c.machines.size());
  for (std::size_t k = 0; k < c.machines.size(); ++k) {
    const auto& m = c.machines[k];
    const Complex vt = pf.voltages[c.bus_index(m.bus)];
    if (std::abs(vt) == 0.0) throw InputError("machine '" + m.id + "' sits at a bus with zero voltage");
    init.terminal_voltage[k] = vt;
    emf[k] = internal_emf(vt, dispatch[k], m.xdp_sys(c.base_mva));
  }
  init.emf.resize(emf.size());
  init.delta0.resize(emf.size());
  for (std::size_t k = 0; k < emf.size(); ++k) {
    init.emf[k] = std::abs(emf[k]);
    init.delta0[k] = std::arg(emf[k]);
  }

  const auto topo = Topology::from_case(c);
  const auto epoch = build_epoch(c, topo, init.load_admittance);
  init.reduced = epoch.reduced;

  // Equilibrium: mechanical power equals electrical power at (E, delta0).
  init.p_mech.assign(c.machines.size(), 0.0);
  const auto& yr = epoch.reduced.y_red;
  for (std::size_t a = 0; a < epoch.machine_index.size(); ++a) {
    const auto ka = epoch.machine_index[a];
    Complex i_inj{};
    for (std::size_t b = 0; b < epoch.machine_index.size(); ++b) {
      const auto kb = epoch.machine_index[b];
      i_inj += yr(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * emf[kb];
    }
    init.p_mech[ka] = (emf[ka] * std::conj(i_inj)).real();
  }
  return init;
}

}  // namespace islanding::steady
