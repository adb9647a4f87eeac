#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../support/fixtures.hpp"
#include "../support/oracle.hpp"
#include "targetiv/simulator.hpp"

using namespace targetiv;
using testsupport::mean_values;

namespace {

ModelSpec spec3x3() { return {canonical_one_to_one_model(3, 3), std::nullopt}; }

OutcomeSpec default_outcomes_for_test() {
  return OutcomeSpec::selection({0, 1, 2}, {0, 0, 0}, {1, 1, 1});
}

Population draw(const ModelSpec& s, std::size_t n, std::uint64_t seed, int threads = 1) {
  SimulationOptions o;
  o.seed = seed;
  o.threads = threads;
  auto e = ErrorSpec::independent_normal({0, 0, 0}, {1, 1, 1});
  auto y = OutcomeSpec::selection({0, 1, 2}, {0.5, 0.5, 0.5}, {1, 1, 1});
  return draw_population(s, e, y, n, o);
}

}  // namespace

TEST_CASE("draws do not depend on the thread count") {
  auto a = draw(spec3x3(), 50000, 11, 1);
  auto b = draw(spec3x3(), 50000, 11, 8);
  CHECK(a.u == b.u);
  CHECK(a.t_cf == b.t_cf);
  CHECK(a.y_cf == b.y_cf);
  CHECK(a.z == b.z);
  auto c = draw(spec3x3(), 50000, 12, 1);
  CHECK(a.u != c.u);
}

TEST_CASE("a prefix of a larger draw is the smaller draw") {
  auto a = draw(spec3x3(), 1000, 5);
  auto b = draw(spec3x3(), 3000, 5);
  CHECK(std::equal(a.u.begin(), a.u.end(), b.u.begin()));
}

TEST_CASE("choices maximize utility given the shocks") {
  auto pop = draw(spec3x3(), 5000, 1);
  const auto& U = pop.spec.U;
  for (std::size_t i = 0; i < pop.n; ++i)
    for (std::size_t z = 0; z < pop.nz; ++z) {
      int best = 0;
      for (int t = 1; t < 3; ++t)
        if (U(z, t) + pop.shock(i, t) > U(z, best) + pop.shock(i, best)) best = t;
      CHECK(pop.T(i, z) == best);
    }
  for (std::size_t i = 0; i < pop.n; ++i) {
    CHECK(pop.t[i] == pop.T(i, pop.z[i]));
    CHECK(pop.y[i] == pop.Y(i, pop.t[i]));
  }
}

TEST_CASE("unavailable arms are never chosen") {
  ModelSpec s{mean_values({{0, NEG_INF, 0}, {0, 1, 0}, {0, NEG_INF, 1}}), std::nullopt};
  auto pop = draw(s, 20000, 3);
  for (std::size_t i = 0; i < pop.n; ++i) {
    CHECK(pop.T(i, 0) != 1);
    CHECK(pop.T(i, 2) != 1);
  }
}

TEST_CASE("degenerate error laws need an explicit opt-in") {
  auto e = ErrorSpec::independent_normal({0, 0, 0}, {1, 0, 1});
  CHECK_THROWS_AS(e.validate(3), AssumptionViolated);
  e.allow_degenerate = true;
  CHECK_NOTHROW(e.validate(3));
  Grid<double> bad = testsupport::grid<double>({{1, 2}, {2, 1}});
  CHECK_THROWS_AS(ErrorSpec::correlated_normal({0, 0}, bad).validate(2), InvalidInput);
  CHECK_THROWS_AS(ErrorSpec::uniform_box({0, 1}, {1, 0}).validate(2), InvalidInput);
}

TEST_CASE("correlated normal draws reproduce the covariance") {
  auto cov = testsupport::grid<double>({{1, 0.5, 0}, {0.5, 2, 0.3}, {0, 0.3, 1}});
  SimulationOptions o;
  o.seed = 9;
  auto pop = draw_population(spec3x3(), ErrorSpec::correlated_normal({0, 1, 0}, cov),
                             default_outcomes_for_test(), 200000, o);
  double m1 = 0, c01 = 0, v1 = 0;
  for (std::size_t i = 0; i < pop.n; ++i) m1 += pop.shock(i, 1);
  m1 /= pop.n;
  for (std::size_t i = 0; i < pop.n; ++i) {
    c01 += pop.shock(i, 0) * (pop.shock(i, 1) - m1);
    v1 += (pop.shock(i, 1) - m1) * (pop.shock(i, 1) - m1);
  }
  CHECK(m1 == doctest::Approx(1).epsilon(0.02));
  CHECK(c01 / pop.n == doctest::Approx(0.5).epsilon(0.03));
  CHECK(v1 / pop.n == doctest::Approx(2).epsilon(0.03));
}

TEST_CASE("gumbel transform has the Euler-Mascheroni mean") {
  SimulationOptions o;
  o.seed = 4;
  auto e = ErrorSpec::quantile("gumbel", {0, 0, 1}, {1, 1, 2});
  auto pop = draw_population(spec3x3(), e, default_outcomes_for_test(), 200000, o);
  double m2 = 0;
  for (std::size_t i = 0; i < pop.n; ++i) m2 += pop.shock(i, 2);
  CHECK(m2 / pop.n == doctest::Approx(1 + 2 * 0.5772156649).epsilon(0.01));
  CHECK(e.center(3)[2] == doctest::Approx(1 + 2 * 0.5772156649));
  CHECK_THROWS_AS(ErrorSpec::quantile("cauchy", {0}, {1}), InvalidInput);
}

TEST_CASE("strict one-to-one units fall in their classes") {
  auto pop = draw(spec3x3(), 100000, 8);
  auto ts = derive_targeting(pop.spec.U);
  auto cl = classify_units(pop, ts);
  CHECK(cl.classes_defined);
  CHECK(cl.inconsistent == 0);
  CHECK(two_way_flows(pop).empty());
  for (std::size_t i = 0; i < 200; ++i) {
    REQUIRE(cl.class_index[i] >= 0);
    CHECK(cl.classes[cl.class_index[i]].admits(pop.response(i)));
  }
}

TEST_CASE("oracle moments come from counterfactuals") {
  auto pop = draw(spec3x3(), 20000, 2);
  auto m = oracle_moments(pop, 3);
  testsupport::UnitOracle o{pop};
  for (int z = 0; z < 3; ++z) {
    double s = 0;
    for (int t = 0; t < 3; ++t) {
      CHECK(m.P(z, t) == doctest::Approx(o.score(z, t)).epsilon(1e-12));
      double e = 0;
      for (std::size_t i = 0; i < pop.n; ++i)
        if (pop.T(i, z) == t) e += pop.Y(i, t);
      CHECK(m.E(z, t) == doctest::Approx(e / pop.n).epsilon(1e-12));
      s += m.P(z, t);
    }
    CHECK(s == doctest::Approx(1.0));
  }
}

TEST_CASE("group table agrees with a per-unit loop") {
  auto pop = draw(spec3x3(), 20000, 6);
  auto g = oracle_group_stats(pop, 4);
  testsupport::UnitOracle o{pop};
  for (auto& [code, st] : g.groups()) {
    auto r = ResponseVector::decode(code, 3, 3);
    CHECK(g.prob(r) == doctest::Approx(o.prob({r})).epsilon(1e-12));
    for (int a = 0; a < 3; ++a)
      CHECK(g.mean(a, {r}) == doctest::Approx(o.mean(a, {r})).epsilon(1e-12));
  }
}

TEST_CASE("streaming matches the stored population") {
  SimulationOptions o;
  o.seed = 21;
  o.threads = 2;
  auto e = ErrorSpec::independent_normal({0, 0, 0}, {1, 1, 1});
  auto y = OutcomeSpec::selection({0, 1, 2}, {0.5, 0.5, 0.5}, {1, 1, 1});
  auto pop = draw_population(spec3x3(), e, y, 70000, o);
  auto s = stream_population(spec3x3(), e, y, 70000, o);
  auto m = oracle_moments(pop);
  for (int z = 0; z < 3; ++z)
    for (int t = 0; t < 3; ++t) {
      CHECK(s.oracle.P(z, t) == m.P(z, t));
      CHECK(s.oracle.E(z, t) == doctest::Approx(m.E(z, t)).epsilon(1e-13));
    }
  CHECK(s.groups.groups().size() == oracle_group_stats(pop).groups().size());
}

TEST_CASE("clusters share their instrument value") {
  SimulationOptions o;
  o.seed = 3;
  o.cluster_size = 10;
  o.z_probs = {0.2, 0.3, 0.5};
  auto pop = draw_population(spec3x3(), ErrorSpec::independent_normal({0, 0, 0}, {1, 1, 1}),
                             default_outcomes_for_test(), 100000, o);
  for (std::size_t i = 0; i + 1 < pop.n; ++i)
    if (pop.cluster[i] == pop.cluster[i + 1]) CHECK(pop.z[i] == pop.z[i + 1]);
  CHECK(pop.cluster.back() == 9999);
  double share2 = std::count(pop.z.begin(), pop.z.end(), 2) / double(pop.n);
  CHECK(share2 == doctest::Approx(0.5).epsilon(0.05));
  o.z_probs = {0.5, 0.6, 0.1};
  CHECK_THROWS_AS(draw_population(spec3x3(), ErrorSpec::independent_normal({0, 0, 0}, {1, 1, 1}),
                                  default_outcomes_for_test(), 10, o),
                  InvalidInput);
}

TEST_CASE("filtered collapse can create two-way flows") {
  ModelSpec s{mean_values({{0, 1, 2}, {0, 3, 0}}),
              FilterMap(3, TreatmentSet({"0", "1"}), {0, 1, 1})};
  SimulationOptions o;
  o.seed = 17;
  auto e = ErrorSpec::uniform_box({-10, -10, -10}, {10, 10, 10});
  OutcomeSpec y = OutcomeSpec::selection({0, 1, 2}, {0, 0, 0}, {1, 1, 1});
  auto pop = draw_population(s, e, y, 100000, o);
  CHECK(two_way_flows(pop).empty());
  CHECK_FALSE(two_way_flows(pop, true).empty());
}

TEST_CASE("prescribed shocks") {
  auto pop = testsupport::constructed_3x3({{"A_0", 2}, {"C_112", 3}}, default_outcomes_for_test());
  CHECK(pop.n == 5);
  CHECK(pop.response(0).name(3) == "A_0");
  CHECK(pop.response(4).name(3) == "C_112");
}
