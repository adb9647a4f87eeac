#include <doctest.h>

#include <cmath>

#include "targetiv/io.hpp"

using namespace targetiv;

namespace {

json model_json() {
  return json::parse(R"({
    "treatments": ["none", "voc", "acad"], "reference": "none",
    "instruments": ["z0", "zv", "za"],
    "U": {"z0": {"none": 0, "voc": 0, "acad": "-inf"},
          "zv": {"none": 0, "voc": 1, "acad": 0},
          "za": {"none": 0, "voc": 0, "acad": 1}},
    "filter": {"none": "n", "voc": "y", "acad": "y"}
  })");
}

}  // namespace

TEST_CASE("model round trip keeps infinities and the filter") {
  auto m = model_from_json(model_json());
  CHECK(m.U.treatments().reference_label() == "none");
  CHECK(m.U(0, 2) == NEG_INF);
  REQUIRE(m.filter);
  CHECK(m.filter->observed().labels() == std::vector<std::string>{"n", "y"});
  CHECK((*m.filter)(2) == 1);
  auto back = model_from_json(to_json(m));
  CHECK(back.U.values() == m.U.values());
  CHECK(back.filter->image() == m.filter->image());
}

TEST_CASE("model rows as arrays") {
  auto j = json::parse(R"({"treatments": ["0","1"], "instruments": ["a","b"],
                           "U": [[0, 0], [0, 1]]})");
  auto m = model_from_json(j);
  CHECK(m.U(1, 1) == 1);
  CHECK(m.U.treatments().reference() == 0);
  CHECK_FALSE(m.filter);
}

TEST_CASE("malformed models") {
  CHECK_THROWS_AS(parse_json("{not json"), ParseError);
  CHECK_THROWS_AS(model_from_json(json::parse(R"({"treatments": ["0","1"]})")), ParseError);
  auto bad = model_json();
  bad["U"]["zv"]["voc"] = "+inf";
  CHECK_THROWS_AS(model_from_json(bad), Error);
  auto inf = model_json();
  inf["U"]["zv"]["voc"] = "inf";
  CHECK_THROWS_AS(model_from_json(inf), InvalidModel);
  auto missing = model_json();
  missing["U"]["zv"].erase("acad");
  CHECK_THROWS_AS(model_from_json(missing), ParseError);
  auto filt = model_json();
  filt["filter"] = {{"none", "n"}, {"voc", "n"}, {"acad", "n"}};
  filt["filter"]["observed"] = {"n", "y"};
  CHECK_THROWS_AS(model_from_json(filt), InvalidModel);
  CHECK_THROWS_AS(read_json_file("/nonexistent/model.json"), ParseError);
}

TEST_CASE("numbers") {
  CHECK(number_from_json("-inf", "x") == NEG_INF);
  CHECK(number_from_json(2.5, "x") == 2.5);
  CHECK_THROWS_AS(number_from_json("abc", "x"), ParseError);
  CHECK(number_to_json(std::nan("")).is_null());
  CHECK(number_to_json(NEG_INF) == "-inf");
}

TEST_CASE("moments round trip") {
  auto j = json::parse(R"({
    "treatments": ["0","1"], "instruments": ["a","b"],
    "P": {"a": {"0": 0.6, "1": 0.4}, "b": {"0": 0.3, "1": 0.7}},
    "E": [[0.2, 0.5], [0.1, 1.1]],
    "unit_count": [100, 120],
    "roles": {"z": ["b", "a"]}
  })");
  auto m = moments_from_json(j);
  CHECK(m.P(1, 1) == 0.7);
  CHECK(m.E(1, 1) == 1.1);
  CHECK(m.unit_count(1) == 120);
  auto m2 = moments_from_json(to_json(m));
  CHECK(m2.scores() == m.scores());
  CHECK(m2.averages() == m.averages());
  auto r = roles_from_json(j);
  CHECK(r.z == std::vector<std::string>{"b", "a"});
  j["P"]["a"]["1"] = 0.5;
  CHECK_THROWS_AS(moments_from_json(j), InvalidInput);
}

TEST_CASE("error laws from JSON") {
  TreatmentSet T({"0", "1"});
  auto e = errors_from_json(json::parse(R"({"family": "correlated_normal",
                                           "cov": [[1, 0.2], [0.2, 1]]})"), T);
  CHECK(e.family == ErrorSpec::Family::CorrelatedNormal);
  CHECK_THROWS_AS(errors_from_json(json::parse(R"({"family": "laplace"})"), T), ParseError);
  auto g = errors_from_json(json::parse(R"({"family": "gumbel"})"), T);
  CHECK(g.family == ErrorSpec::Family::Transform);
  auto deg = errors_from_json(json::parse(R"({"sd": [1, 0], "allow_degenerate": true})"), T);
  CHECK_NOTHROW(deg.validate(2));
}

TEST_CASE("outcomes default to observed arms under a filter") {
  auto m = model_from_json(model_json());
  auto o = outcomes_from_json(json::object(), m);
  CHECK(o.filtered_arms);
  CHECK(o.n_arms() == 2);
  auto t = outcomes_from_json(json::parse(R"({"arms": "treatment", "mu": [0, 1, 2]})"), m);
  CHECK_FALSE(t.filtered_arms);
  CHECK(t.mu[2] == 2);
}

TEST_CASE("config hash is stable and order sensitive") {
  auto a = json::parse(R"({"x": 1, "y": 2})");
  auto b = json::parse(R"({"y": 2, "x": 1})");
  CHECK(config_hash(a) == config_hash(a));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(b));
}
