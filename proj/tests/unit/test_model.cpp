#include <doctest.h>

#include <cmath>

#include "../support/fixtures.hpp"
#include "targetiv/model.hpp"

using namespace targetiv;
using testsupport::grid;

TEST_CASE("label sets reject empty and duplicate labels") {
  CHECK_THROWS_AS(LabelSet({"a", "a"}), InvalidModel);
  CHECK_THROWS_AS(LabelSet({"a", ""}), InvalidModel);
  LabelSet s({"x", "y"});
  CHECK(s.index_of("y") == 1);
  CHECK_FALSE(s.find("q").has_value());
  CHECK_THROWS_AS(s.index_of("q"), InvalidInput);
}

TEST_CASE("treatment reference by label or index") {
  TreatmentSet t({"none", "vocational", "academic"}, "academic");
  CHECK(t.reference() == 2);
  CHECK(t.reference_label() == "academic");
  CHECK_THROWS_AS(TreatmentSet({"a", "b"}, "c"), InvalidModel);
  CHECK_THROWS_AS(TreatmentSet({"a", "b"}, 5), InvalidModel);
}

TEST_CASE("mean-value matrix validation") {
  TreatmentSet t({"0", "1"});
  InstrumentSet z({"a", "b"});
  CHECK_NOTHROW(MeanValueMatrix(t, z, grid<double>({{0, NEG_INF}, {0, 1}})));
  CHECK_THROWS_AS(MeanValueMatrix(t, z, grid<double>({{0, NAN}, {0, 1}})), InvalidModel);
  CHECK_THROWS_AS(MeanValueMatrix(t, z, grid<double>({{0, INFINITY}, {0, 1}})), InvalidModel);
  CHECK_THROWS_AS(MeanValueMatrix(t, z, grid<double>({{NEG_INF, 0}, {0, 1}})), InvalidModel);
  CHECK_THROWS_AS(MeanValueMatrix(TreatmentSet({"0"}), z, grid<double>({{0}, {0}})), InvalidModel);
  CHECK_THROWS_AS(MeanValueMatrix(t, InstrumentSet({"a"}), grid<double>({{0, 1}})), InvalidModel);
}

TEST_CASE("relative means subtract the reference column") {
  MeanValueMatrix u(TreatmentSet({"0", "1", "2"}, 1), InstrumentSet({"a", "b"}),
                    grid<double>({{1, 2, NEG_INF}, {0, -1, 3}}));
  auto d = relative_means(u);
  CHECK(d(0, 0) == -1);
  CHECK(d(0, 1) == 0);
  CHECK(d(0, 2) == NEG_INF);
  CHECK(d(1, 0) == 1);
  CHECK(d(1, 2) == 4);
}

TEST_CASE("filter maps must be total and surjective") {
  TreatmentSet d({"no", "yes"});
  FilterMap f(3, d, {0, 1, 1});
  CHECK(f(2) == 1);
  CHECK(f.preimage(1) == std::vector<int>{1, 2});
  CHECK_THROWS_AS(FilterMap(3, d, {0, 0, 0}), InvalidModel);
  CHECK_THROWS_AS(FilterMap(3, d, {0, 1}), InvalidModel);
  CHECK_THROWS_AS(FilterMap(2, d, {0, 2}), InvalidModel);
}

TEST_CASE("response vector names and codes") {
  CHECK(ResponseVector{{0, 0, 0}}.name(3) == "A_0");
  CHECK(ResponseVector{{0, 1, 2}}.name(3) == "C_012");
  CHECK(ResponseVector{{2, 1, 2}}.name(3) == "C_212");
  // dotted tokens once indices can have two digits
  CHECK(ResponseVector{{0, 11}}.name(12) == "C_0.11");
  for (std::uint64_t c = 0; c < 27; ++c) {
    auto r = ResponseVector::decode(c, 3, 3);
    CHECK(r.code(3) == c);
  }
  CHECK(all_response_vectors(3, 3).size() == 27);
  CHECK(all_response_vectors(2, 4).front().t == std::vector<int>{0, 0});
  CHECK(all_response_vectors(2, 4).back().t == std::vector<int>{3, 3});
}

TEST_CASE("composite patterns") {
  auto p = CompositeResponseVector::wildcard(3, 3).fix(0, 1).fix(2, 0);
  CHECK(p.name(3) == "C_1*0");
  CHECK(p.expand(3).size() == 3);
  CHECK(p.matches(ResponseVector{{1, 2, 0}}));
  CHECK_FALSE(p.matches(ResponseVector{{0, 2, 0}}));
  CompositeResponseVector q{{0b011, 0b111}};
  CHECK(q.name(3) == "C_{0,1}*");
  CHECK(q.expand(3).size() == 6);
}

TEST_CASE("moment tables check scores") {
  using testsupport::moments;
  CHECK_NOTHROW(moments({{0.5, 0.5}, {0.2, 0.8}}, {{1, 1}, {0, 2}}));
  CHECK_THROWS_AS(moments({{0.6, 0.5}, {0.2, 0.8}}, {{1, 1}, {0, 2}}), InvalidInput);
  CHECK_THROWS_AS(moments({{1.2, -0.2}, {0.2, 0.8}}, {{1, 1}, {0, 2}}), InvalidInput);
  CHECK_THROWS_AS(moments({{0.5, 0.5}, {0.2, 0.8}}, {{NAN, 1}, {0, 2}}), InvalidInput);
  auto m = moments({{0.5, 0.5}, {0.2, 0.8}}, {{1, 1}, {0, 2}});
  CHECK(m.outcome_mean(1) == doctest::Approx(2.0));
}

TEST_CASE("empty instrument rows are allowed when unit count is zero") {
  MomentTable m(TreatmentSet({"0", "1"}), InstrumentSet({"a", "b"}),
                grid<double>({{0, 0}, {0.3, 0.7}}), grid<double>({{0, 0}, {0, 1}}), {0, 10});
  CHECK(m.unit_count(0) == 0);
}

TEST_CASE("filtering sums scores inside each preimage") {
  auto m = testsupport::moments({{0.5, 0.3, 0.2}, {0.1, 0.6, 0.3}}, {{1, 2, 3}, {4, 5, 6}});
  FilterMap f(3, TreatmentSet({"n", "y"}), {0, 1, 1});
  auto md = filter_moments(m, f);
  CHECK(md.P(0, 1) == doctest::Approx(0.5));
  CHECK(md.P(1, 0) == doctest::Approx(0.1));
  CHECK(md.E(0, 1) == doctest::Approx(5));
  CHECK(md.E(1, 1) == doctest::Approx(11));
  CHECK(md.treatments().labels() == std::vector<std::string>{"n", "y"});
}

TEST_CASE("merging weights instruments by unit count") {
  MomentTable m(TreatmentSet({"0", "1"}), InstrumentSet({"a", "b", "c"}),
                grid<double>({{1, 0}, {0, 1}, {0.5, 0.5}}), grid<double>({{2, 0}, {0, 4}, {1, 1}}),
                {30, 10, 20});
  auto mm = merge_instruments(m, {{0, 1}, {2}}, {"ab", "c"});
  CHECK(mm.n_instruments() == 2);
  CHECK(mm.P(0, 0) == doctest::Approx(0.75));
  CHECK(mm.E(0, 1) == doctest::Approx(1.0));
  CHECK(mm.E(0, 0) == doctest::Approx(1.5));
  CHECK(mm.unit_count(0) == 40);
  CHECK_THROWS_AS(merge_instruments(m, {{0, 1}}, {"ab"}), InvalidInput);
  CHECK_THROWS_AS(merge_instruments(m, {{0, 1}, {1, 2}}, {"x", "y"}), InvalidInput);
}
