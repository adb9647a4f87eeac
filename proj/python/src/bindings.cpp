#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "targetiv/commands.hpp"
#include "targetiv/rng.hpp"

namespace py = pybind11;
using namespace targetiv;

namespace {

std::optional<json> maybe(const std::optional<std::string>& s) {
  if (!s) return std::nullopt;
  return parse_json(*s);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "JSON-level entry points of the targetiv library";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<InvalidModel>(m, "InvalidModel", base.ptr());
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<AssumptionViolated>(m, "AssumptionViolated", base.ptr());
  py::register_exception<WeakIdentification>(m, "WeakIdentification", base.ptr());
  py::register_exception<RankDeficient>(m, "RankDeficient", base.ptr());
  py::register_exception<DesignViolated>(m, "DesignViolated", base.ptr());

  m.def("count_classes", &count_classes, py::arg("n_treatments"), py::arg("n_instruments"));

  m.def("philox4x32", [](std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    return Philox4x32::generate(ctr, key);
  });

  m.def(
      "enumerate",
      [](const std::string& model, const std::string& regime) {
        return run_enumerate(parse_json(model), regime).dump();
      },
      py::arg("model"), py::arg("regime") = "strict_one_to_one");

  m.def(
      "simulate",
      [](const std::string& model, std::optional<std::string> errors,
         std::optional<std::string> outcomes, std::size_t n, std::uint64_t seed, int threads,
         bool filter, std::string dump) {
        SimulateArgs a;
        a.n = n;
        a.seed = seed;
        a.threads = threads;
        a.filter = filter;
        a.dump = std::move(dump);
        py::gil_scoped_release nogil;
        return run_simulate(parse_json(model), maybe(errors), maybe(outcomes), a).dump();
      },
      py::arg("model"), py::arg("errors") = py::none(), py::arg("outcomes") = py::none(),
      py::arg("n") = 10000, py::arg("seed") = 0, py::arg("threads") = 1, py::arg("filter") = false,
      py::arg("dump") = "");

  m.def(
      "identify",
      [](const std::string& moments, const std::string& design, std::vector<std::string> homog,
         bool tsls, bool strict_estimands, double min_denominator, std::vector<std::string> merge) {
        IdentifyArgs a{design, std::move(homog), tsls, strict_estimands, min_denominator,
                       std::move(merge)};
        return run_identify(parse_json(moments), a).dump();
      },
      py::arg("moments"), py::arg("design"), py::arg("homog") = std::vector<std::string>{},
      py::arg("tsls") = false, py::arg("strict_estimands") = false,
      py::arg("min_denominator") = 1e-12, py::arg("merge") = std::vector<std::string>{});

  m.def(
      "estimate",
      [](const std::string& path, const std::string& design, int boot, std::uint64_t seed,
         std::optional<std::string> cluster, std::optional<std::string> by, std::string y,
         std::string arm, std::string z, std::string reference, double min_first_stage,
         int threads) {
        EstimateArgs a;
        a.ident.design = design;
        a.ident.min_denominator = min_first_stage;
        a.schema.y = std::move(y);
        a.schema.arm = std::move(arm);
        a.schema.z = std::move(z);
        a.schema.cluster = std::move(cluster);
        a.schema.cell = std::move(by);
        a.reference = std::move(reference);
        a.boot = boot;
        a.seed = seed;
        a.threads = threads;
        py::gil_scoped_release nogil;
        return run_estimate(load_dataset(path, a.schema), a).dump();
      },
      py::arg("path"), py::arg("design"), py::arg("boot") = 999, py::arg("seed") = 0,
      py::arg("cluster") = py::none(), py::arg("by") = py::none(), py::arg("y") = "y",
      py::arg("arm") = "t", py::arg("z") = "z", py::arg("reference") = "",
      py::arg("min_first_stage") = 0.01, py::arg("threads") = 1);

  m.def(
      "validate",
      [](const std::string& model, std::optional<std::string> errors,
         std::optional<std::string> outcomes, std::size_t n, std::uint64_t seed, int threads,
         double tol) {
        ValidateArgs a{n, seed, threads, tol};
        py::gil_scoped_release nogil;
        return run_validate(parse_json(model), maybe(errors), maybe(outcomes), a).dump();
      },
      py::arg("model"), py::arg("errors") = py::none(), py::arg("outcomes") = py::none(),
      py::arg("n") = 200000, py::arg("seed") = 0, py::arg("threads") = 1, py::arg("tol") = 1e-10);
}
