#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "islanding/dynamics.hpp"
#include "islanding/error.hpp"
#include "support.hpp"

using namespace islanding;
using testing_support::ieee39;
using testing_support::smib;

namespace {

struct Prepared {
  grid::NetworkCase c;
  steady::PowerFlowSolution pf;
  steady::DynamicInit init;
  dyn::MachineModel model;
  explicit Prepared(grid::NetworkCase cc)
      : c(std::move(cc)), pf(steady::solve_power_flow(c)), init(steady::init_classical(c, pf)),
        model(dyn::make_machine_model(c, init)) {}
};

dyn::SwingParams params_for(const Prepared& p) {
  dyn::SwingParams sp;
  for (const auto& id : p.init.reduced.machine_ids) {
    const auto k = p.c.machine_index(id);
    sp.emf.push_back(p.model.emf[k]);
    sp.p_mech.push_back(p.model.p_mech[k]);
    sp.inertia.push_back(p.model.inertia[k]);
    sp.damping.push_back(p.model.damping[k]);
  }
  return sp;
}

std::vector<dyn::MachineState> start_state(const Prepared& p, double domega) {
  std::vector<dyn::MachineState> x;
  for (const auto& id : p.init.reduced.machine_ids) x.push_back({p.init.delta0[p.c.machine_index(id)], 0.0});
  x[0].omega = domega;
  return x;
}

std::vector<dyn::MachineState> integrate(const Prepared& p, std::vector<dyn::MachineState> x, double dt, double t) {
  const auto sp = params_for(p);
  const auto n = static_cast<long>(std::llround(t / dt));
  for (long k = 0; k < n; ++k) x = dyn::step(x, dt, p.init.reduced, sp);
  return x;
}

}  // namespace

TEST_CASE("electrical power matches a naive double loop") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 2 + trial % 5;
    grid::ReducedNetwork red;
    red.y_red = ComplexMatrix(m, m);
    for (int i = 0; i < m; ++i) {
      red.machine_ids.push_back("M" + std::to_string(i));
      for (int j = 0; j <= i; ++j) red.y_red(i, j) = red.y_red(j, i) = Complex{u(rng), 5 * u(rng)};
    }
    std::vector<double> e(m), d(m);
    for (int i = 0; i < m; ++i) {
      e[i] = 1.0 + 0.1 * u(rng);
      d[i] = u(rng);
    }
    const auto pe = dyn::electrical_power(red, e, d);
    for (int i = 0; i < m; ++i) {
      double p = e[i] * e[i] * red.y_red(i, i).real();
      for (int j = 0; j < m; ++j) {
        if (j == i) continue;
        const double g = red.y_red(i, j).real(), b = red.y_red(i, j).imag();
        p += e[i] * e[j] * (b * std::sin(d[i] - d[j]) + g * std::cos(d[i] - d[j]));
      }
      CHECK(pe[i] == doctest::Approx(p).epsilon(1e-12));
    }
  }
}

TEST_CASE("RK4 error falls with the fourth power of the step") {
  const Prepared p(smib());
  const auto x0 = start_state(p, 2e-3);
  const auto ref = integrate(p, x0, 0.01 / 8, 1.0);
  const auto a = integrate(p, x0, 0.01, 1.0);
  const auto b = integrate(p, x0, 0.005, 1.0);
  const double ea = std::abs(a[0].delta - ref[0].delta);
  const double eb = std::abs(b[0].delta - ref[0].delta);
  const double ratio = ea / eb;
  CHECK(ratio >= 8.0);
  CHECK(ratio <= 32.0);
}

TEST_CASE("SMIB small-signal frequency matches the linearization") {
  const double x_line = 0.3, p = 0.8, h = 4.0, xdp = 0.2;
  const Prepared pr(smib(x_line, p, h, xdp));
  const double e1 = pr.init.emf[0], e2 = pr.init.emf[1];
  const double x_total = xdp + x_line + 1e-3;
  const double d12 = pr.init.delta0[0] - pr.init.delta0[1];
  const double ks = e1 * e2 / x_total * std::cos(d12);
  const double f_expected = std::sqrt(ks * dyn::kOmegaSync / (2.0 * h)) / (2.0 * std::numbers::pi);

  // Upward zero crossings of the speed deviation over 5 s.
  auto x = start_state(pr, 1e-4);
  const auto sp = params_for(pr);
  const double dt = 1e-3;
  std::vector<double> ups;
  double prev = x[0].omega;
  for (int k = 1; k <= 5000; ++k) {
    x = dyn::step(x, dt, pr.init.reduced, sp);
    if (prev < 0.0 && x[0].omega >= 0.0) ups.push_back(k * dt - dt * x[0].omega / (x[0].omega - prev));
    prev = x[0].omega;
  }
  REQUIRE(ups.size() >= 3);
  const double f = static_cast<double>(ups.size() - 1) / (ups.back() - ups.front());
  CHECK(std::abs(f - f_expected) / f_expected < 0.02);
}

TEST_CASE("a lossless system conserves its transient energy") {
  const Prepared p(smib());
  auto x = start_state(p, 5e-3);
  const auto sp = params_for(p);
  const auto& y = p.init.reduced.y_red;
  auto energy = [&](const std::vector<dyn::MachineState>& s) {
    double w = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      w += 0.5 * sp.inertia[i] * dyn::kOmegaSync * s[i].omega * s[i].omega - sp.p_mech[i] * s[i].delta;
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        w -= sp.emf[i] * sp.emf[j] * y(i, j).imag() * std::cos(s[i].delta - s[j].delta);
      }
    }
    return w;
  };
  const double w0 = energy(x);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    x = dyn::step(x, 1e-3, p.init.reduced, sp);
    worst = std::max(worst, std::abs(energy(x) - w0));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("critical clearing time matches the equal-area criterion") {
  const double x_line = 0.3, p = 0.9, h = 4.0, xdp = 0.2;
  const Prepared pr(smib(x_line, p, h, xdp));
  const double pmax = pr.init.emf[0] * pr.init.emf[1] / (xdp + x_line + 1e-3);
  const double d0 = pr.init.delta0[0] - pr.init.delta0[1];
  const double dmax = std::numbers::pi - d0;
  const double dcr = std::acos(p / pmax * (dmax - d0) + std::cos(dmax));
  // Bolted terminal fault: no electrical output, so delta is a parabola.
  const double t_analytic = std::sqrt(2.0 * 2.0 * h * (dcr - d0) / (dyn::kOmegaSync * p));

  dyn::SimConfig cfg;
  cfg.dt = 1e-4;
  cfg.t_end = 2.0;
  cfg.record_stride = 10;
  auto stable = [&](double clear) {
    std::vector<dyn::Event> ev{dyn::Event::fault(0.0, "1-2", 0.0), dyn::Event::clear(clear, "1-2", false)};
    const auto traj = dyn::simulate(pr.c, pr.init, pr.model, ev, cfg);
    for (const auto& s : traj.samples) {
      if (s.delta[0] - s.delta[1] > std::numbers::pi) return false;
    }
    return true;
  };
  double lo = 0.05, hi = 0.5;
  REQUIRE(stable(lo));
  REQUIRE_FALSE(stable(hi));
  while (hi - lo > 2e-4) {
    const double mid = 0.5 * (lo + hi);
    (stable(mid) ? lo : hi) = mid;
  }
  CHECK(std::abs(lo - t_analytic) < 0.01 * t_analytic);
}

TEST_CASE("39-bus system with no events stays at equilibrium") {
  const auto t0 = std::chrono::steady_clock::now();
  const Prepared p(ieee39());
  dyn::SimConfig cfg;
  cfg.t_end = 5.0;
  const auto traj = dyn::simulate(p.c, p.init, p.model, {}, cfg);
  double worst = 0.0;
  for (const auto& s : traj.samples) {
    for (std::size_t k = 0; k < s.delta.size(); ++k) worst = std::max(worst, std::abs(s.delta[k] - p.init.delta0[k]));
  }
  CHECK(worst < 1e-6);
  CHECK(traj.samples.size() == 501);
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 10.0);
}

TEST_CASE("simulator applies, logs and validates events") {
  const Prepared p(ieee39());
  dyn::SimConfig cfg;
  cfg.t_end = 0.5;
  const auto traj = dyn::simulate(
      p.c, p.init, p.model,
      {dyn::Event::fault(0.1, "16-17", 0.5), dyn::Event::clear(0.2, "16-17", true), dyn::Event::trip_load(0.3, 4)},
      cfg);
  REQUIRE(traj.event_log.size() == 3);
  CHECK(traj.epochs.size() == 4);
  const auto& last = traj.epoch_of(traj.samples.back()).topology;
  CHECK_FALSE(last.branch_in[p.c.branch_index("16-17")]);
  CHECK_FALSE(last.load_in[p.c.bus_index(4)]);
  CHECK(last.faults.empty());

  CHECK_THROWS_AS(dyn::simulate(p.c, p.init, p.model, {dyn::Event::clear(0.1, "16-17", false)}, cfg), InputError);
  CHECK_THROWS_AS(dyn::simulate(p.c, p.init, p.model, {dyn::Event::fault(0.1, "no-such", 0.5)}, cfg), InputError);
  dyn::SimConfig bad = cfg;
  bad.dt = 0.0;
  CHECK_THROWS_AS(dyn::Simulator(p.c, p.init, p.model, bad), InputError);
}

TEST_CASE("non-finite states raise a divergence error with its time") {
  const Prepared p(smib());
  auto sp = params_for(p);
  sp.inertia[0] = 0.0;  // forces an infinite acceleration
  auto x = start_state(p, 0.0);
  x[0].delta += 0.1;
  try {
    dyn::step(x, 1e-3, p.init.reduced, sp, 2.0);
    FAIL("expected a divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.time() == doctest::Approx(2.001));
  }
}
