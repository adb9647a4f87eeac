#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "targetiv/io.hpp"
#include "targetiv/pipeline.hpp"

namespace targetiv {

// Subcommand bodies shared by the executable and the Python module. Inputs are parsed
// documents; outputs are the JSON reports the executable prints.

json run_enumerate(const json& model, const std::string& regime = "strict_one_to_one");

struct SimulateArgs {
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  int threads = 1;
  bool filter = false;  // also report observed-treatment moments and groups
  std::vector<double> z_probs;
  std::size_t cluster_size = 0;
  bool allow_degenerate = false;
  bool stream = false;  // accumulate without storing units
  std::string dump;     // per-unit CSV path, empty for none
};
json run_simulate(const json& model, const std::optional<json>& errors,
                  const std::optional<json>& outcomes, const SimulateArgs& a);

struct IdentifyArgs {
  std::string design;
  std::vector<std::string> homog;
  bool tsls = false;
  bool strict_estimands = false;
  double min_denominator = 1e-12;
  // "label=a,b" pools instrument values a and b into a new value named label.
  std::vector<std::string> merge;
};
json run_identify(const json& moments, const IdentifyArgs& a);

struct EstimateArgs {
  IdentifyArgs ident;
  DatasetSchema schema;
  std::vector<std::string> treatments, instruments;  // empty: sorted labels from the data
  std::string reference;
  std::vector<std::string> roles_z, roles_t;
  int boot = 999;
  std::uint64_t seed = 0;
  int threads = 1;
  double level = 0.95;
};
json run_estimate(const Dataset& d, const EstimateArgs& a);

struct ValidateArgs {
  std::size_t n = 200000;
  std::uint64_t seed = 0;
  int threads = 1;
  double tol = 1e-10;
};
json run_validate(const json& model, const std::optional<json>& errors,
                  const std::optional<json>& outcomes, const ValidateArgs& a);

// Applies "label=a,b" merges in order.
MomentTable apply_merges(const MomentTable& m, const std::vector<std::string>& merges);

// Writes the per-unit table: u_*, T_at_*, Y_at_*, Z, T, D, Y, class, cluster.
void write_unit_csv(const Population& pop, const TargetingStructure& ts, const std::string& path);

}  // namespace targetiv
