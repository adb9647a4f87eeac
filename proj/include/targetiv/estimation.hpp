#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "targetiv/model.hpp"
#include "targetiv/report.hpp"

namespace targetiv {

struct Population;

// Realized data: one row per unit.
struct Dataset {
  std::vector<double> y;
  std::vector<std::string> arm;      // observed treatment label
  std::vector<std::string> z;        // instrument label
  std::vector<std::string> cluster;  // empty when unclustered
  std::vector<std::string> cell;     // empty when there is no grouping column

  std::size_t size() const { return y.size(); }
  bool clustered() const { return !cluster.empty(); }
  // Rows whose cell equals the given label.
  Dataset subset_cell(const std::string& label) const;
  std::vector<std::string> cells() const;  // sorted unique cell labels
};

struct DatasetSchema {
  std::string y = "y", arm = "t", z = "z";
  std::optional<std::string> cluster, cell;
};

// CSV with a header row. ParseError names the offending row.
Dataset parse_dataset(std::istream& in, const DatasetSchema& schema);
Dataset load_dataset(const std::string& path, const DatasetSchema& schema);

// Realized rows of a population; the arm is the observed treatment when filtered.
Dataset dataset_from_population(const Population& pop, bool filtered = false);

// Labels in order of first appearance, for data without declared label sets.
std::vector<std::string> labels_in_order(const std::vector<std::string>& column);

MomentTable empirical_moments(const Dataset& d, const TreatmentSet& treatments,
                              const InstrumentSet& instruments);

struct RelevanceResult {
  bool full_rank = false;
  std::size_t rank = 0;
  std::vector<double> singular_values;
  Grid<double> matrix;  // E[1(Z=z) 1(T=t)]
};
RelevanceResult check_relevance(const Dataset& d, const TreatmentSet& treatments,
                                const InstrumentSet& instruments);

using Routine = std::function<IdentificationReport(const MomentTable&)>;

struct BootstrapOptions {
  int B = 999;
  std::uint64_t seed = 0;
  bool cluster = false;
  int threads = 1;
  double level = 0.95;
  double max_failure_rate = 0.05;  // above this an estimate is flagged unstable
};

struct BootEstimate {
  std::string name;
  double point = 0;
  double se = 0, lo = 0, hi = 0;
  std::size_t successes = 0, failures = 0;
  bool estimable = true;  // false when every replicate failed
  bool unstable = false;
  double failure_rate() const {
    const auto n = successes + failures;
    return n ? static_cast<double>(failures) / static_cast<double>(n) : 0.0;
  }
};

struct BootstrapResult {
  IdentificationReport point;
  std::vector<BootEstimate> estimates;  // point estimands then interval endpoints
  std::size_t B = 0;
  std::size_t replicate_failures = 0;   // replicates where the routine failed outright
  std::size_t n_rows = 0, n_clusters = 0;
  const BootEstimate* find(const std::string& name) const;
};

// Nonparametric (or cluster) bootstrap with percentile intervals. Rows are put in a
// canonical order first, so results do not depend on input row order.
BootstrapResult bootstrap(const Dataset& d, const TreatmentSet& treatments,
                          const InstrumentSet& instruments, const Routine& routine,
                          const BootstrapOptions& opts);

// Runs the bootstrap pipeline separately for every cell of the grouping column.
std::map<std::string, BootstrapResult> bootstrap_by_cell(const Dataset& d,
                                                         const TreatmentSet& treatments,
                                                         const InstrumentSet& instruments,
                                                         const Routine& routine,
                                                         const BootstrapOptions& opts);

// Quantile with linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& sorted, double q);

}  // namespace targetiv
