#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "targetiv/estimation.hpp"
#include "targetiv/filtered.hpp"
#include "targetiv/ident.hpp"
#include "targetiv/io.hpp"
#include "targetiv/simulator.hpp"

namespace targetiv {

// A design plus its positional roles. z and t are table indices in the order the design
// documents; t holds observed arms for filtered designs. Empty means defaults.
struct DesignRequest {
  std::string design;  // 2xT, 3x3, m1, m3, 3x2, factorial, star
  std::vector<int> z, t;
  std::vector<std::string> homog;  // eq1, eq2, eq3
  bool tsls = false;
};

bool is_filtered_design(const std::string& design);
std::vector<std::string> all_designs();

// Binds role labels to indices of the table.
DesignRequest resolve_roles(DesignRequest req, const MomentTable& m, const RoleLabels& labels);

IdentificationReport identify_design(const MomentTable& m, const DesignRequest& req,
                                     const IdentOptions& o = {});
Routine make_routine(const DesignRequest& req, const IdentOptions& o = {});

// Designs whose preconditions the model meets, with roles derived from targeting. Roles of
// filtered designs index observed arms.
std::vector<DesignRequest> applicable_designs(const ModelSpec& spec, const TargetingStructure& ts);

struct ValidateOptions {
  std::size_t n = 200000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::optional<ErrorSpec> errors;
  std::optional<OutcomeSpec> outcomes;
  double tol = 1e-10;
};

struct Check {
  std::string name;
  bool passed = true;
  double max_deviation = 0;
  std::string detail;
};

struct ValidationReport {
  json targeting, verdicts;
  std::vector<std::string> designs;
  std::vector<std::string> skipped;  // explanations for identification steps not run
  std::vector<Check> checks;
  std::vector<IdentificationReport> reports;
  std::size_t n = 0, ties = 0;
  bool passed() const;
};

ValidationReport validate_model(const ModelSpec& spec, const ValidateOptions& opts);
json to_json(const ValidationReport& v);

}  // namespace targetiv
