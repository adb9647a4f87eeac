#pragma once

#include <map>
#include <string>
#include <vector>

#include "targetiv/ident.hpp"
#include "targetiv/model.hpp"
#include "targetiv/report.hpp"

namespace targetiv {

// All routines take observed-treatment moments. Roles map design positions to table
// indices: z lists instruments in the order documented for each design, d lists observed
// arms starting with the untreated one. Empty vectors mean table order, with the table's
// reference arm first.
struct FilteredRoles {
  std::vector<int> z;
  std::vector<int> d;
};

// Binary observed treatment: D = 1 exactly for the targeted treatment. (z0, z1).
IdentificationReport identify_M1(const MomentTable& md, const FilteredRoles& roles = {},
                                   const IdentOptions& o = {});

// Three observed arms: reference, the targeted treatment, and the pooled rest. (z0, z1).
IdentificationReport identify_M3(const MomentTable& md, const FilteredRoles& roles = {},
                                   const IdentOptions& o = {});

// Three instrument values targeting two treatments that share an observed arm. (z0, z1, z2).
IdentificationReport identify_3x2(const MomentTable& md, const FilteredRoles& roles = {},
                                   const IdentOptions& o = {});

// Two binary instruments, ordered (0x0, 1x0, 0x1, 1x1), binary observed treatment.
IdentificationReport identify_factorial(const MomentTable& md, const FilteredRoles& roles = {},
                                   const IdentOptions& o = {});

// Three arms (control, 1x0, 1x1) with one-sided non-compliance under control.
IdentificationReport identify_star(const MomentTable& md, const FilteredRoles& roles = {},
                                   const IdentOptions& o = {});

// Observed-level groups of a design and the treatment-level groups they pool.
struct DesignCatalogue {
  std::string design;
  std::map<std::string, std::vector<std::string>> members;  // observed name -> treatment names
};

// Observed-level image of every resolved treatment-level class.
DesignCatalogue build_catalogue(const std::string& design, const std::vector<ClassSpec>& classes,
                                const FilterMap& f);

class GroupTable;
// Pools treatment-level group sums into observed-level groups. Y^D(d) of a group is the
// outcome under the first instrument value sending it to d; left undefined otherwise.
GroupTable aggregate_to_filtered(const GroupTable& g, const FilterMap& f);

std::vector<std::string> filtered_designs();

// Dispatches on a design name: m1, m3, 3x2, factorial, star.
IdentificationReport identify_filtered(const std::string& design, const MomentTable& md,
                                       const FilteredRoles& roles = {},
                                       const IdentOptions& o = {});

}  // namespace targetiv
