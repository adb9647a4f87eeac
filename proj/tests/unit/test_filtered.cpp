#include <doctest.h>

#include <cmath>

#include "../support/fixtures.hpp"
#include "../support/oracle.hpp"
#include "targetiv/filtered.hpp"
#include "targetiv/simulator.hpp"

using namespace targetiv;
using testsupport::grid;
using testsupport::rv;
using testsupport::UnitOracle;

namespace {

OutcomeSpec d_outcomes(std::size_t nt, std::vector<double> mu) {
  OutcomeSpec y;
  y.filtered_arms = true;
  y.mu = mu;
  y.loading = Grid<double>(mu.size(), nt, 0.0);
  for (std::size_t a = 0; a < mu.size(); ++a)
    for (std::size_t t = 0; t < nt; ++t) y.loading(a, t) = 0.3 * (a + 1) * (t == a ? 1.0 : 0.5);
  y.noise.assign(mu.size(), 1.0);
  return y;
}

// Double hurdle: treatment a answers to the first instrument, b to the second.
ModelSpec factorial_model() {
  MeanValueMatrix U(TreatmentSet({"0", "a", "b"}), InstrumentSet({"00", "10", "01", "11"}),
                    grid<double>({{0, -0.5, -0.3}, {0, 0.5, -0.3}, {0, -0.5, 0.6}, {0, 0.5, 0.6}}));
  return {U, FilterMap(3, TreatmentSet({"0", "1"}), {0, 1, 1})};
}

void check_against_oracle(const IdentificationReport& rep, const UnitOracle& o, double tol) {
  for (auto& e : rep.estimands) {
    auto v = o.value(e);
    if (!v) continue;
    INFO(e.name);
    CHECK(std::abs(e.value - *v) <= tol * std::max(1.0, std::abs(*v)));
  }
}

}  // namespace

TEST_CASE("factorial scores from a constructed double-hurdle population") {
  // 4 never-takers, 1 answering only b, 2 only a, 1 either, 2 always-takers (per ten units)
  auto spec = factorial_model();
  std::vector<std::vector<double>> types;
  auto add = [&](int k, std::vector<double> s) {
    for (int i = 0; i < k; ++i) types.push_back(s);
  };
  add(4, {0, -5, -5});
  add(1, {0, -5, 0});
  add(2, {0, 0, -5});
  add(1, {0, 0, 0});
  add(2, {0, 5, -5});
  auto pop = population_from_errors(spec, grid(types), d_outcomes(3, {1, 2}), {});
  auto md = oracle_moments_filtered(pop);
  CHECK(md.P(0, 0) == doctest::Approx(0.8));
  CHECK(md.P(1, 0) == doctest::Approx(0.5));
  CHECK(md.P(2, 0) == doctest::Approx(0.6));
  CHECK(md.P(3, 0) == doctest::Approx(0.4));
  auto rep = identify_factorial(md);
  CHECK(rep.value("Pr(A_0)") == doctest::Approx(0.4));
  CHECK(rep.value("Pr(C_0011)") == doctest::Approx(0.1));
  CHECK(rep.value("Pr(C_0101)") == doctest::Approx(0.2));
  CHECK(rep.value("Pr(C_0111)") == doctest::Approx(0.1));
  CHECK(rep.value("Pr(A_1)") == doctest::Approx(0.2));
  CHECK(rep.implications_hold(1e-12));
  auto f = *spec.filter;
  check_against_oracle(rep, UnitOracle{pop, &f}, 1e-10);
}

TEST_CASE("factorial with inert instruments has no compliers") {
  auto md = testsupport::moments({{0.7, 0.3}, {0.7, 0.3}, {0.7, 0.3}, {0.7, 0.3}},
                                 {{0.7, 0.6}, {0.7, 0.6}, {0.7, 0.6}, {0.7, 0.6}});
  auto rep = identify_factorial(md);
  CHECK(rep.value("Pr(C_0111)") == doctest::Approx(0.0));
  CHECK(rep.find("LATE(C_0111)") == nullptr);
  CHECK(rep.suppressed.size() >= 3);
}

TEST_CASE("factorial on drawn populations") {
  auto spec = factorial_model();
  SimulationOptions so;
  so.seed = 31;
  auto pop = draw_population(spec, ErrorSpec::independent_normal({0, 0, 0}, {1, 1, 1}),
                             d_outcomes(3, {1, 2}), 50000, so);
  auto f = *spec.filter;
  check_against_oracle(identify_factorial(oracle_moments_filtered(pop)), UnitOracle{pop, &f},
                       1e-10);
}

TEST_CASE("star design needs one-sided non-compliance") {
  auto mk = [](double leak) {
    return testsupport::moments({{1 - leak, leak}, {0.7, 0.3}, {0.5, 0.5}},
                                {{0.1, leak}, {0.1, 0.4}, {0.1, 0.7}});
  };
  CHECK_THROWS_AS(identify_star(mk(0.02)), DesignViolated);
  auto small = identify_star(mk(0.005));
  CHECK_FALSE(small.notes.empty());
  auto clean = identify_star(mk(0));
  CHECK(clean.value("Pr(C_011)") == doctest::Approx(0.3));
  CHECK(clean.value("Pr(C_001)") == doctest::Approx(0.2));
  CHECK(clean.value("Pr(A_0)") == doctest::Approx(0.5));
}

TEST_CASE("star without take-up under 1x0 suppresses its LATE") {
  auto md = testsupport::moments({{1, 0}, {1, 0}, {0.5, 0.5}}, {{0.1, 0}, {0.1, 0}, {0.1, 0.7}});
  auto rep = identify_star(md);
  CHECK(rep.find("LATE(C_011)") == nullptr);
  CHECK(rep.find("LATE(C_001)") != nullptr);
}

TEST_CASE("star on a drawn population") {
  MeanValueMatrix U(TreatmentSet({"0", "1"}), InstrumentSet({"ctl", "10", "11"}),
                    grid<double>({{0, NEG_INF}, {0, -0.5}, {0, 0.4}}));
  ModelSpec spec{U, FilterMap(2, TreatmentSet({"0", "1"}), {0, 1})};
  SimulationOptions so;
  so.seed = 2;
  auto pop = draw_population(spec, ErrorSpec::independent_normal({0, 0}, {1, 1}),
                             d_outcomes(2, {0, 1}), 40000, so);
  auto f = *spec.filter;
  check_against_oracle(identify_star(oracle_moments_filtered(pop)), UnitOracle{pop, &f}, 1e-10);
}

TEST_CASE("3x2: symmetric targeting gives equal effects") {
  // two routes into the same observed arm, each instrument pulling one of them
  MeanValueMatrix U(TreatmentSet({"0", "1", "2"}), InstrumentSet({"a", "b", "c"}),
                    grid<double>({{0, 0, 0}, {0, 1, 0}, {0, 0, 1}}));
  ModelSpec spec{U, FilterMap(3, TreatmentSet({"n", "y"}), {0, 1, 1})};
  // shocks for t1 and t2 mirrored, so both LATEs share a population value
  std::vector<std::vector<double>> s;
  for (int i = 0; i < 400; ++i) {
    double a = std::sin(0.37 * i) * 1.5, b = std::cos(0.91 * i) * 1.5;
    s.push_back({0, a, b});
    s.push_back({0, b, a});
  }
  OutcomeSpec y = d_outcomes(3, {0, 1});
  y.noise = {0, 0};
  y.loading = grid<double>({{0, 0.4, 0.4}, {0, 0.7, 0.7}});
  auto pop = population_from_errors(spec, grid(s), y, {});
  auto rep = identify_3x2(oracle_moments_filtered(pop));
  CHECK(rep.value("LATE(a)") == doctest::Approx(rep.value("LATE(b)")).epsilon(1e-10));
  auto f = *spec.filter;
  UnitOracle o{pop, &f};
  check_against_oracle(rep, o, 1e-10);
  auto* iv = rep.find_interval("Pr(C_011)");
  REQUIRE(iv);
  double p = o.prob({rv({0, 1, 1})});
  CHECK(iv->lo <= p + 1e-12);
  CHECK(p <= iv->hi + 1e-12);
}

TEST_CASE("m1 Wald is suppressed without a first stage") {
  auto md = testsupport::moments({{0.6, 0.4}, {0.6, 0.4}}, {{0.3, 0.8}, {0.3, 0.9}});
  auto rep = identify_M1(md);
  CHECK(rep.find("Wald") == nullptr);
  CHECK(rep.level == "D");
}

TEST_CASE("m3 on a drawn population") {
  MeanValueMatrix U(TreatmentSet({"0", "1", "2", "3"}), InstrumentSet({"a", "b"}),
                    grid<double>({{0, 0, 0.3, -0.2}, {0, 1.2, 0.3, -0.2}}));
  ModelSpec spec{U, FilterMap(4, TreatmentSet({"n", "y", "o"}), {0, 1, 2, 2})};
  SimulationOptions so;
  so.seed = 8;
  auto pop = draw_population(spec, ErrorSpec::independent_normal({0, 0, 0, 0}, {1, 1, 1, 1}),
                             d_outcomes(4, {0, 1, 2}), 40000, so);
  auto f = *spec.filter;
  UnitOracle o{pop, &f};
  auto rep = identify_M3(oracle_moments_filtered(pop));
  check_against_oracle(rep, o, 1e-10);
  double a0 = rep.value("alpha(0)"), a2 = rep.value("alpha(2)");
  CHECK(a0 + a2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("filtered routines check table shape and roles") {
  auto md = testsupport::moments({{0.6, 0.4}, {0.5, 0.5}}, {{0, 0}, {0, 0}});
  CHECK_THROWS_AS(identify_3x2(md), AssumptionViolated);
  CHECK_THROWS_AS(identify_M1(md, FilteredRoles{{0, 0}, {}}), InvalidInput);
  CHECK_THROWS_AS(identify_filtered("nope", md), InvalidInput);
}

TEST_CASE("aggregation to observed groups matches the per-unit loop") {
  auto spec = factorial_model();
  SimulationOptions so;
  so.seed = 4;
  auto pop = draw_population(spec, ErrorSpec::independent_normal({0, 0, 0}, {1, 1, 1}),
                             d_outcomes(3, {1, 2}), 20000, so);
  auto g = aggregate_to_filtered(oracle_group_stats(pop), *spec.filter);
  auto f = *spec.filter;
  UnitOracle o{pop, &f};
  for (auto& [r, p] : o.frequencies()) CHECK(g.prob(rv(r)) == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("catalogue pools treatment classes") {
  auto ts = derive_targeting(canonical_one_to_one_model(3, 3));
  auto c = build_catalogue("3x2", enumerate_classes(ts),
                           FilterMap(3, TreatmentSet({"n", "y"}), {0, 1, 1}));
  CHECK(c.members.at("C_011").size() == 1);
  CHECK(c.members.at("A_1").size() == 4);
  CHECK(c.members.at("A_0").size() == 1);
}
