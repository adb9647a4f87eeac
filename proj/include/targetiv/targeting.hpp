#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "targetiv/model.hpp"

namespace targetiv {

// Which instruments give each treatment its largest relative mean.
struct TargetingStructure {
  TreatmentSet treatments;
  InstrumentSet instruments;
  Grid<double> delta;
  double eps = 0;
  std::vector<double> delta_bar;        // per treatment
  std::vector<std::vector<int>> z_bar;  // per treatment, sorted instrument indices
  std::vector<int> targeted;            // T*
  std::vector<int> z_star;              // instruments that target something
  std::vector<int> z_zero;              // instruments that target nothing
  std::vector<std::vector<int>> t_bar;  // per instrument, targeted treatments it maximizes
  std::vector<std::string> warnings;    // tie-grouping that merged distinct values

  std::size_t n_treatments() const { return treatments.size(); }
  std::size_t n_instruments() const { return instruments.size(); }
  bool is_targeted(int t) const;
  bool in_z_bar(int t, int z) const;
};

struct Witness {
  int z;
  int t;
  bool operator==(const Witness&) const = default;
};

struct AssumptionVerdict {
  bool holds = true;
  std::vector<Witness> witnesses;
  std::string detail;
};

struct OneToOneVerdict {
  AssumptionVerdict part_i;   // each targeted treatment has a single targeting instrument
  AssumptionVerdict part_ii;  // each instrument targets at most one treatment
  bool holds() const { return part_i.holds && part_ii.holds; }
};

struct StrictVerdict : AssumptionVerdict {
  std::vector<double> delta_low;  // common off-target value per treatment
};

// eps defaults to 1e-9 * max(1, max |Delta|) over finite entries.
TargetingStructure derive_targeting(const MeanValueMatrix& u, std::optional<double> eps = {});
OneToOneVerdict check_one_to_one(const TargetingStructure& ts);
StrictVerdict check_strict(const TargetingStructure& ts);
AssumptionVerdict check_reference(const TargetingStructure& ts);

// c(A, tau): targeted instruments in A send units to their targeted treatment, everything
// else sends them to tau.
struct ClassSpec {
  std::vector<int> A;
  int tau = 0;
  // Admissible treatments per instrument. Singletons when the class is resolved.
  std::vector<std::vector<int>> assignment;
  bool resolved = true;
  std::string name;

  std::optional<ResponseVector> response() const;
  bool admits(const ResponseVector& r) const;
};

// Requires strict targeting and a non-empty reference set.
std::vector<ClassSpec> enumerate_classes(const TargetingStructure& ts);

// (2|T| - |Z| + 1) * 2^(|Z| - 2) under strict one-to-one targeting with one reference value.
std::uint64_t count_classes(int n_treatments, int n_instruments);

enum class Regime { OneToOne, Strict, StrictOneToOne };
Regime parse_regime(const std::string& s);
std::string to_string(Regime r);

struct ExclusionSet {
  std::vector<ResponseVector> elemental;
  std::vector<CompositeResponseVector> composite;
};

ExclusionSet excluded_groups(const TargetingStructure& ts, Regime regime);

struct EquivalenceOptions {
  bool drop_irrelevance = false;
  bool drop_monotonicity = false;
};

struct EquivalenceResult {
  bool equivalent = false;
  std::vector<CompositeResponseVector> monotonicity_patterns, irrelevance_patterns;
  std::vector<ResponseVector> monotonicity_excluded, irrelevance_excluded;
  std::vector<ResponseVector> survivors;  // vectors surviving the active restrictions
  std::vector<ResponseVector> classes;    // vectors admitted by targeting
};

// 3x3 comparison of targeting classes with the monotonicity + irrelevance restrictions
// of Kirkeboen, Leuven and Mogstad.
EquivalenceResult kirkeboen_equivalence_check(const TargetingStructure& ts,
                                              EquivalenceOptions opts = {});

// Role binding for the 3x3 design: reference instrument, then the instrument targeting
// the first and second targeted treatment.
struct Roles3x3 {
  int z0, z1, z2;
  int t0, t1, t2;
};
Roles3x3 roles_from_targeting(const TargetingStructure& ts);

// Strict one-to-one model with Z = {z0} U Z*, z_k targeting t_k.
MeanValueMatrix canonical_one_to_one_model(int n_treatments, int n_instruments);

}  // namespace targetiv
