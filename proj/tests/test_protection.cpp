#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "islanding/error.hpp"
#include "islanding/protection.hpp"
#include "support.hpp"

using namespace islanding;
using namespace islanding::prot;
using testing_support::ieee39;

namespace {

// Synthetic trajectory with one machine per group of the given partition sizes.
dyn::SystemTrajectory synthetic(const std::vector<std::string>& ids,
                                const std::vector<std::vector<double>>& deltas, double tick = 0.1) {
  dyn::SystemTrajectory t;
  t.machine_ids = ids;
  Topology topo;
  topo.machine_in.assign(ids.size(), true);
  auto epoch = std::make_shared<NetworkEpoch>();
  epoch->topology = topo;
  t.epochs.push_back({0.0, epoch});
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    dyn::Sample s;
    s.t = k * tick;
    s.delta = deltas[k];
    s.omega.assign(ids.size(), 0.0);
    t.samples.push_back(s);
  }
  return t;
}

}  // namespace

TEST_CASE("apparent impedance and mho characteristic") {
  CHECK_FALSE(apparent_impedance({1.0, 0.0}, {0.0, 0.0}));
  CHECK(*apparent_impedance({1.0, 0.0}, {0.0, -2.0}) == Complex{0.0, 0.5});
  const Complex reach{0.0, 1.0};
  CHECK(inside_mho({0.0, 0.5}, reach));
  CHECK(inside_mho({0.1, 0.9}, reach));
  CHECK_FALSE(inside_mho({0.0, 1.0}, reach));  // on the circle: outside
  CHECK_FALSE(inside_mho({0.6, 0.5}, reach));
  CHECK_FALSE(inside_mho({0.0, -0.1}, reach));
}

TEST_CASE("zone classification against a line impedance") {
  DistanceRelaySetting s{"x"};
  const Complex zl{0.01, 0.1};
  CHECK(classify(Complex{0.004, 0.04}, zl, s) == Zone::zone1);
  CHECK(classify(Complex{0.009, 0.09}, zl, s) == Zone::zone2);
  CHECK(classify(Complex{0.02, 0.2}, zl, s) == Zone::none);
  CHECK(classify(std::nullopt, zl, s) == Zone::none);
  DistanceRelaySetting bad{"x", 1.3, 1.2, 0.3};
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("default distance relays skip transformers and radial generator ties") {
  const auto& c = ieee39();
  const auto s = default_distance_settings(c);
  auto has = [&](const std::string& id) {
    return std::any_of(s.begin(), s.end(), [&](const auto& r) { return r.branch == id; });
  };
  CHECK(has("16-17"));
  CHECK(has("1-39"));
  CHECK_FALSE(has("6-31"));
  CHECK_FALSE(has("2-30"));
  CHECK_FALSE(has("12-11"));
}

TEST_CASE("R-Rdot evaluation uses the backward difference") {
  RRdotRelaySetting s{"x", 0.05, 0.5, BranchEnd::from, true};
  // R falls 1.0 -> 0.8 over 10 ms: U = 0.8 + 0.05 * (-20) = -0.2 < 0.5.
  CHECK(*rrdot_evaluate({{0.0, 1.0}, {0.01, 0.8}}, s) == doctest::Approx(0.01));
  // Slow drift stays above.
  CHECK_FALSE(rrdot_evaluate({{0.0, 1.0}, {0.01, 0.999}}, s));
  s.armed = false;
  CHECK_FALSE(rrdot_evaluate({{0.0, 1.0}, {0.01, 0.8}}, s));
  s.t_slope = 0.0;
  CHECK_THROWS_AS(s.validate(), InputError);
}

TEST_CASE("R-Rdot defaults measure at the sending end") {
  const auto& c = ieee39();
  const auto init = steady::init_classical(c, steady::solve_power_flow(c));
  const auto s = default_rrdot_settings(c, init, {"16-17", "14-15"});
  REQUIRE(s.size() == 2);
  for (const auto& r : s) {
    CHECK(r.u_threshold > 0.0);
    CHECK_FALSE(r.armed);
  }
  CHECK_THROWS_AS(default_rrdot_settings(c, init, {"nope"}), InputError);
}

TEST_CASE("stability labels") {
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  const GeneratorPartition part{{{"a", "b"}, {"c", "d"}}};
  const std::vector<double> m{1, 1, 1, 1};

  SUBCASE("small swings are stable") {
    const auto t = synthetic(ids, {{0, 0, 0, 0}, {0.2, 0.1, -0.1, -0.2}, {0, 0, 0, 0}});
    const auto l = label_stability(t, part, m);
    CHECK(l.value == StabilityClass::stable_low_swing);
    CHECK_FALSE(l.time);
  }
  SUBCASE("two coherent groups pulling apart form islands") {
    const auto t = synthetic(ids, {{0, 0, 0, 0}, {1, 1.1, -1, -1.1}, {2, 2.1, -2, -2.1}});
    const auto l = label_stability(t, part, m);
    CHECK(l.value == StabilityClass::island_formation);
    CHECK(*l.time == doctest::Approx(0.2));
    CHECK(l.separated_groups == std::vector<std::vector<std::size_t>>{{0}, {1}});
  }
  SUBCASE("one machine slipping inside its group is machine instability") {
    const auto t = synthetic(ids, {{0, 0, 0, 0}, {0, 2, 0, 0}, {0, 7, 0, 0}});
    const auto l = label_stability(t, part, m);
    CHECK(l.value == StabilityClass::machine_instability);
    CHECK(*l.time == doctest::Approx(0.2));
  }
  SUBCASE("inertia weights the group means") {
    const std::vector<double> heavy{100, 1, 1, 1};
    const auto t = synthetic(ids, {{0, 0, 0, 0}, {0, 3.3, 0, 0}});
    CHECK(label_stability(t, part, heavy).value == StabilityClass::machine_instability);
    CHECK(label_stability(t, part, m).value == StabilityClass::stable_low_swing);
  }
  CHECK_THROWS_AS(label_stability(synthetic(ids, {{0, 0, 0, 0}}), part, {1, 1}), InputError);
  CHECK(parse_stability_class("island_formation") == StabilityClass::island_formation);
  CHECK_THROWS_AS(parse_stability_class("unstable"), InputError);
}
