#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "targetiv/estimation.hpp"
#include "targetiv/filtered.hpp"
#include "targetiv/ident.hpp"
#include "targetiv/model.hpp"
#include "targetiv/report.hpp"
#include "targetiv/simulator.hpp"
#include "targetiv/targeting.hpp"

namespace targetiv {

using json = nlohmann::ordered_json;

// Throws ParseError on unreadable files or malformed JSON.
json read_json_file(const std::string& path);
json parse_json(const std::string& text);
// path "-" writes to standard output.
void write_json(const json& j, const std::string& path);
// FNV-1a 64 of the compact dump, as hex.
std::string config_hash(const json& j);

// Numbers, "-inf" and "inf" strings; NaN and infinities are written back as strings/null.
double number_from_json(const json& j, const std::string& what);
json number_to_json(double v);

// {treatments, reference, instruments, U: {z: {t: x}} or rows, filter: {t: d} | null}.
// The filter may carry "observed" (order) and "observed_reference".
ModelSpec model_from_json(const json& j);
json to_json(const ModelSpec& m);

// {treatments, reference, instruments, P, E, unit_count, tolerance?, roles?}.
MomentTable moments_from_json(const json& j);
json to_json(const MomentTable& m);

// Optional "roles": {"z": [labels], "t": [labels]} or "d" for observed arms.
struct RoleLabels {
  std::vector<std::string> z, t;
};
RoleLabels roles_from_json(const json& moments);

ErrorSpec errors_from_json(const json& j, const TreatmentSet& treatments);
// Arms are observed treatments when arms = "observed" or, by default, when the model has a
// filter.
OutcomeSpec outcomes_from_json(const json& j, const ModelSpec& m);
OutcomeSpec default_outcomes(const ModelSpec& m, bool filtered_arms);

json to_json(const TargetingStructure& ts);
json to_json(const AssumptionVerdict& v);
json to_json(const OneToOneVerdict& v);
json to_json(const StrictVerdict& v);
json to_json(const ClassSpec& c, const TargetingStructure& ts);
json to_json(const ExclusionSet& e, std::size_t n_treatments);
json to_json(const EquivalenceResult& e, std::size_t n_treatments);
json to_json(const IdentifyingSystem& s, const TargetingStructure& ts);
json to_json(const IdentificationReport& r);
json to_json(const BootstrapResult& b);
json to_json(const Roles3x3& r, const TargetingStructure& ts);

}  // namespace targetiv
