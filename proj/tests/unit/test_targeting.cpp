#include <doctest.h>

#include <algorithm>
#include <set>

#include "../support/fixtures.hpp"
#include "targetiv/ident.hpp"
#include "targetiv/targeting.hpp"

using namespace targetiv;
using testsupport::mean_values;

namespace {

std::set<std::string> class_names(const std::vector<ClassSpec>& cs) {
  std::set<std::string> s;
  for (auto& c : cs) s.insert(c.name);
  return s;
}

}  // namespace

TEST_CASE("targeting structure of the canonical 3x3 model") {
  auto ts = derive_targeting(canonical_one_to_one_model(3, 3));
  CHECK(ts.targeted == std::vector<int>{1, 2});
  CHECK(ts.z_star == std::vector<int>{1, 2});
  CHECK(ts.z_zero == std::vector<int>{0});
  CHECK(ts.z_bar[1] == std::vector<int>{1});
  CHECK(ts.z_bar[2] == std::vector<int>{2});
  CHECK(ts.t_bar[1] == std::vector<int>{1});
  CHECK(ts.t_bar[0].empty());
  CHECK(ts.delta_bar[1] == 1.0);
  CHECK(ts.eps == doctest::Approx(1e-9));
  CHECK(check_one_to_one(ts).holds());
  CHECK(check_strict(ts).holds);
  CHECK(check_reference(ts).holds);
}

TEST_CASE("constant relative means leave a treatment untargeted") {
  auto ts = derive_targeting(mean_values({{0, 0.3, 0}, {0, 0.3, 1}}));
  CHECK(ts.targeted == std::vector<int>{2});
  CHECK_FALSE(ts.is_targeted(1));
}

TEST_CASE("a treatment unavailable at every instrument value is rejected") {
  CHECK_THROWS_AS(derive_targeting(mean_values({{0, NEG_INF, 0}, {0, NEG_INF, 1}})), InvalidModel);
}

TEST_CASE("one-to-one failures come with witnesses") {
  // z1 maximizes both non-reference treatments
  auto both = derive_targeting(mean_values({{0, 0, 0}, {0, 1, 1}}));
  auto v = check_one_to_one(both);
  CHECK_FALSE(v.part_ii.holds);
  CHECK(v.part_i.holds);
  CHECK_FALSE(v.part_ii.witnesses.empty());
  // t1 maximized at two instrument values
  auto twice = derive_targeting(mean_values({{0, 0}, {0, 1}, {0, 1}}));
  auto w = check_one_to_one(twice);
  CHECK_FALSE(w.part_i.holds);
  CHECK(std::any_of(w.part_i.witnesses.begin(), w.part_i.witnesses.end(),
                    [](const Witness& x) { return x.t == 1; }));
}

TEST_CASE("strict targeting needs a common off-target value") {
  auto ts = derive_targeting(mean_values({{0, 0, 0}, {0, 1, 0.5}, {0, 0, 1}}));
  CHECK(check_one_to_one(ts).holds());
  auto s = check_strict(ts);
  CHECK_FALSE(s.holds);
  CHECK_THROWS_AS(enumerate_classes(ts), AssumptionViolated);
  CHECK_THROWS_AS(excluded_groups(ts, Regime::StrictOneToOne), AssumptionViolated);
  CHECK_NOTHROW(excluded_groups(ts, Regime::OneToOne));
}

TEST_CASE("universal subsidy: rising relative means everywhere break strictness") {
  auto ts = derive_targeting(mean_values({{0, -1, -2}, {0, -0.5, -1}, {0, 0, 0}}));
  CHECK_FALSE(check_strict(ts).holds);
}

TEST_CASE("near ties are grouped and reported") {
  auto ts = derive_targeting(mean_values({{0, 0, 0}, {0, 1, 0}, {0, 1 + 1e-12, 1}}));
  CHECK(ts.z_bar[1].size() == 2);
  CHECK_FALSE(ts.warnings.empty());
  auto plain = derive_targeting(mean_values({{0, 0, 0}, {0, 1, 0}, {0, 1 + 1e-12, 1}}), 0.0);
  CHECK(plain.z_bar[1] == std::vector<int>{2});
}

TEST_CASE("reference must be targeted by nothing somewhere") {
  auto ts = derive_targeting(mean_values({{0, 1, 0}, {0, 0, 1}}));
  CHECK(ts.z_zero.empty());
  CHECK_FALSE(check_reference(ts).holds);
  CHECK_THROWS_AS(enumerate_classes(ts), AssumptionViolated);
}

TEST_CASE("classes of the 3x3 design") {
  auto cs = enumerate_classes(derive_targeting(canonical_one_to_one_model(3, 3)));
  CHECK(class_names(cs) == std::set<std::string>{"A_0", "A_1", "A_2", "C_010", "C_002",
                                                  "C_012", "C_112", "C_212"});
  for (auto& c : cs) CHECK(c.resolved);
}

TEST_CASE("classes of the 2x2 design") {
  auto cs = enumerate_classes(derive_targeting(canonical_one_to_one_model(2, 2)));
  CHECK(class_names(cs) == std::set<std::string>{"A_0", "A_1", "C_01"});
}

TEST_CASE("2xT classes: every untargeted treatment has always-takers and compliers") {
  auto cs = enumerate_classes(derive_targeting(canonical_one_to_one_model(4, 2)));
  CHECK(class_names(cs) ==
        std::set<std::string>{"A_0", "A_1", "A_2", "A_3", "C_01", "C_21", "C_31"});
}

TEST_CASE("class count closed form") {
  CHECK(count_classes(2, 2) == 3);
  CHECK(count_classes(3, 3) == 8);
  CHECK(count_classes(5, 2) == 9);
  CHECK(count_classes(4, 4) == 20);
  CHECK_THROWS_AS(count_classes(2, 3), InvalidInput);
  CHECK_THROWS_AS(count_classes(3, 1), InvalidInput);
  for (int t = 2; t <= 6; ++t)
    for (int z = 2; z <= t; ++z)
      CHECK(enumerate_classes(derive_targeting(canonical_one_to_one_model(t, z))).size() ==
            count_classes(t, z));
}

TEST_CASE("strict targeting without one-to-one leaves unresolved classes") {
  // z1 targets t1 and t2 at once
  auto ts = derive_targeting(mean_values({{0, 0, 0}, {0, 1, 1}}));
  REQUIRE(check_strict(ts).holds);
  auto cs = enumerate_classes(ts);
  CHECK(std::any_of(cs.begin(), cs.end(), [](const ClassSpec& c) { return !c.resolved; }));
  for (auto& c : cs)
    if (!c.resolved) CHECK_FALSE(c.response().has_value());
}

TEST_CASE("excluded groups in the 3x3 design") {
  auto ts = derive_targeting(canonical_one_to_one_model(3, 3));
  auto strict = excluded_groups(ts, Regime::StrictOneToOne);
  CHECK(strict.elemental.size() == 19);
  auto o2o = excluded_groups(ts, Regime::OneToOne);
  CHECK(o2o.elemental.size() == 10);
  CHECK(o2o.composite.size() == 4);
  // every one-to-one exclusion is also excluded under strict one-to-one
  for (auto& r : o2o.elemental)
    CHECK(std::find(strict.elemental.begin(), strict.elemental.end(), r) != strict.elemental.end());
  // classes are never excluded
  for (auto& c : enumerate_classes(ts))
    CHECK(std::find(strict.elemental.begin(), strict.elemental.end(), *c.response()) ==
          strict.elemental.end());
}

TEST_CASE("regime names") {
  CHECK(parse_regime("one_to_one") == Regime::OneToOne);
  CHECK(parse_regime("strict") == Regime::Strict);
  CHECK(to_string(parse_regime("strict-one-to-one")) == "strict_one_to_one");
  CHECK_THROWS_AS(parse_regime("loose"), InvalidInput);
}

TEST_CASE("monotonicity and irrelevance versus targeting classes") {
  auto ts = derive_targeting(canonical_one_to_one_model(3, 3));
  auto full = kirkeboen_equivalence_check(ts);
  CHECK(full.equivalent);
  CHECK(full.survivors.size() == 8);
  auto no_irr = kirkeboen_equivalence_check(ts, {.drop_irrelevance = true});
  CHECK_FALSE(no_irr.equivalent);
  CHECK(no_irr.survivors.size() == 15);
  auto no_mono = kirkeboen_equivalence_check(ts, {.drop_monotonicity = true});
  CHECK_FALSE(no_mono.equivalent);
  CHECK(no_mono.survivors.size() == 16);
}

TEST_CASE("3x3 roles follow targeting, not table order") {
  // instruments listed as (targets t2, reference, targets t1)
  auto ts = derive_targeting(mean_values({{0, 0, 1}, {0, 0, 0}, {0, 1, 0}}));
  auto r = roles_from_targeting(ts);
  CHECK(r.z0 == 1);
  CHECK(r.z1 == 2);
  CHECK(r.z2 == 0);
  CHECK(r.t1 == 1);
  CHECK(r.t2 == 2);
}

TEST_CASE("identifying system of the 3x3 design") {
  auto ts = derive_targeting(canonical_one_to_one_model(3, 3));
  auto s = identifying_system(ts);
  CHECK(s.n_classes() == 8);
  CHECK(s.rank == 7);
  CHECK(s.unidentified_dimension() == 1);
  auto unit = [&](std::vector<std::string> names) {
    std::vector<Rational> v(s.n_classes(), 0);
    for (std::size_t k = 0; k < s.n_classes(); ++k)
      if (std::find(names.begin(), names.end(), s.classes[k].name) != names.end()) v[k] = 1;
    return v;
  };
  CHECK(s.identifies(unit({"A_1"})));
  CHECK(s.identifies(unit({"C_112"})));
  CHECK(s.identifies(unit({"A_0", "C_010"})));
  CHECK(s.identifies(unit({"C_010", "C_012"})));
  CHECK_FALSE(s.identifies(unit({"A_0"})));
  CHECK_FALSE(s.identifies(unit({"C_012"})));
}

TEST_CASE("identifying system of 2xT designs has full rank") {
  auto s = identifying_system(derive_targeting(canonical_one_to_one_model(4, 2)));
  CHECK(s.n_classes() == 7);
  CHECK(s.rank == 7);
  CHECK(s.unidentified_dimension() == 0);
}

TEST_CASE("two binary instruments without complementarity") {
  MeanValueMatrix U(TreatmentSet({"0", "1", "2"}), InstrumentSet({"0x0", "1x0", "0x1", "1x1"}),
                    testsupport::grid<double>({{0, -0.5, -0.3}, {0, 0.5, -0.3}, {0, -0.5, 0.6},
                                               {0, 0.5, 0.6}}));
  auto ts = derive_targeting(U);
  CHECK(ts.z_bar[1] == std::vector<int>{1, 3});
  CHECK(ts.z_bar[2] == std::vector<int>{2, 3});
  CHECK(ts.t_bar[3] == std::vector<int>{1, 2});
  auto v = check_one_to_one(ts);
  CHECK_FALSE(v.part_i.holds);
  CHECK_FALSE(v.part_ii.holds);
  auto has_z = [](const AssumptionVerdict& a, int z) {
    return std::any_of(a.witnesses.begin(), a.witnesses.end(),
                       [&](const Witness& w) { return w.z == z; });
  };
  CHECK(has_z(v.part_i, 3));
  CHECK(has_z(v.part_ii, 3));
  CHECK(check_strict(ts).holds);
}
