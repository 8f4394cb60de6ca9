#pragma once

// Slow, direct reference implementations used to check the library.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "islanding/grid.hpp"
#include "islanding/power_flow.hpp"

namespace oracles {

using namespace islanding;

// Independent solver: rectangular coordinates, Jacobian by central differences.
inline std::vector<Complex> rectangular_power_flow(const grid::NetworkCase& c) {
  const auto y = grid::build_ybus(c).entries;
  const auto n = c.buses.size();
  const auto sched = steady::scheduled_injections(c);
  std::vector<std::size_t> var;  // non-slack buses
  for (std::size_t i = 0; i < n; ++i) {
    if (c.buses[i].kind != grid::BusKind::slack) var.push_back(i);
  }
  std::vector<Complex> v(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (c.buses[i].kind != grid::BusKind::pq) v[i] = c.buses[i].voltage_setpoint;
  }
  const auto m = var.size();
  auto residual = [&](const Eigen::VectorXd& x) {
    std::vector<Complex> vv = v;
    for (std::size_t k = 0; k < m; ++k) vv[var[k]] = {x(2 * k), x(2 * k + 1)};
    Eigen::VectorXd r(2 * m);
    for (std::size_t k = 0; k < m; ++k) {
      const auto i = var[k];
      Complex cur = 0.0;
      for (std::size_t j = 0; j < n; ++j) cur += y(i, j) * vv[j];
      const Complex s = vv[i] * std::conj(cur);
      r(2 * k) = s.real() - sched[i].real();
      if (c.buses[i].kind == grid::BusKind::pq) {
        r(2 * k + 1) = s.imag() - sched[i].imag();
      } else {
        r(2 * k + 1) = std::norm(vv[i]) - std::pow(c.buses[i].voltage_setpoint, 2);
      }
    }
    return r;
  };
  Eigen::VectorXd x(2 * m);
  for (std::size_t k = 0; k < m; ++k) {
    x(2 * k) = v[var[k]].real();
    x(2 * k + 1) = v[var[k]].imag();
  }
  for (int it = 0; it < 50; ++it) {
    const auto r = residual(x);
    if (r.lpNorm<Eigen::Infinity>() < 1e-10) break;
    Eigen::MatrixXd jac(2 * m, 2 * m);
    const double h = 1e-7;
    for (Eigen::Index col = 0; col < x.size(); ++col) {
      auto xp = x, xm = x;
      xp(col) += h;
      xm(col) -= h;
      jac.col(col) = (residual(xp) - residual(xm)) / (2 * h);
    }
    x -= jac.fullPivLu().solve(r);
  }
  for (std::size_t k = 0; k < m; ++k) v[var[k]] = {x(2 * k), x(2 * k + 1)};
  return v;
}

inline grid::ReducedNetwork random_network(std::mt19937& rng, int m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  grid::ReducedNetwork red;
  red.y_red = ComplexMatrix(m, m);
  for (int i = 0; i < m; ++i) {
    red.machine_ids.push_back("M" + std::to_string(i));
    for (int j = 0; j <= i; ++j) red.y_red(i, j) = red.y_red(j, i) = Complex{0.3 * u(rng), 4.0 * u(rng)};
  }
  return red;
}

// Newman modularity written out from its definition.
inline double naive_modularity(const RealMatrix& w, const std::vector<int>& lab) {
  const auto n = w.rows();
  double two_m = 0.0;
  std::vector<double> k(n, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k[i] += w(i, j);
      two_m += w(i, j);
    }
  }
  double q = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (lab[i] == lab[j]) q += w(i, j) - k[i] * k[j] / two_m;
    }
  }
  return q / two_m;
}

// Best modularity over every set partition (restricted-growth strings).
inline double brute_force_best(const RealMatrix& w) {
  const auto n = static_cast<int>(w.rows());
  std::vector<int> a(n, 0);
  double best = -1.0;
  std::function<void(int, int)> rec = [&](int i, int maxv) {
    if (i == n) {
      best = std::max(best, naive_modularity(w, a));
      return;
    }
    for (int v = 0; v <= maxv + 1; ++v) {
      a[i] = v;
      rec(i + 1, std::max(maxv, v));
    }
  };
  a[0] = 0;
  rec(1, 0);
  return best;
}

}  // namespace oracles
