#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "targetiv/model.hpp"
#include "targetiv/targeting.hpp"

namespace targetiv {

// Joint law of the idiosyncratic utility shocks u_i = (u_it)_t.
struct ErrorSpec {
  enum class Family { IndependentNormal, CorrelatedNormal, UniformBox, Transform };

  Family family = Family::IndependentNormal;
  std::vector<double> mean;  // normal families
  std::vector<double> sd;    // independent normal
  Grid<double> cov;          // correlated normal
  std::vector<double> lo, hi;  // uniform box
  // Transform family: maps n_uniforms draws on (0,1) to a shock vector.
  std::function<void(const double* uniforms, double* out)> transform;
  int n_uniforms = 0;
  std::vector<double> transform_center;
  std::string transform_name;
  bool allow_degenerate = false;

  static ErrorSpec independent_normal(std::vector<double> mean, std::vector<double> sd);
  static ErrorSpec correlated_normal(std::vector<double> mean, Grid<double> cov);
  static ErrorSpec uniform_box(std::vector<double> lo, std::vector<double> hi);
  static ErrorSpec custom(std::string name, int n_uniforms,
                          std::function<void(const double*, double*)> fn,
                          std::vector<double> center);
  // Per-coordinate quantile transforms: "gumbel", "logistic" (location, scale).
  static ErrorSpec quantile(const std::string& name, std::vector<double> location,
                            std::vector<double> scale);

  // Mean of each coordinate, used to center outcome loadings.
  std::vector<double> center(std::size_t n_treatments) const;
  // AssumptionViolated for degenerate laws unless allow_degenerate.
  void validate(std::size_t n_treatments) const;
};

// Potential outcomes Y_i(a) = mu_a + sum_s L[a][s] (u_is - c_s) + noise_a e_ia
//                             + common_noise h_i + cluster_noise k_c(i).
// Arms are treatments, or observed treatments when filtered_arms is set; in that case
// Y_i(t) = Y_i(M(t)).
struct OutcomeSpec {
  bool filtered_arms = false;
  std::vector<double> mu;
  Grid<double> loading;  // arms x treatments
  std::vector<double> noise;
  double common_noise = 0;
  double cluster_noise = 0;
  std::optional<std::vector<double>> center;

  // Own-coordinate selection loading lambda_t on treatment arms.
  static OutcomeSpec selection(std::vector<double> mu, std::vector<double> lambda,
                               std::vector<double> noise);
  std::size_t n_arms() const { return mu.size(); }
};

struct SimulationOptions {
  std::vector<double> z_probs;  // empty: uniform
  std::uint64_t seed = 0;
  int threads = 1;
  std::size_t cluster_size = 0;  // 0: no clusters; Z is assigned per cluster otherwise
};

// Units with every counterfactual stored.
struct Population {
  ModelSpec spec;
  std::size_t n = 0;
  std::size_t nz = 0, nt = 0;
  std::vector<double> u;     // n x nt
  std::vector<int> t_cf;     // n x nz, T_i(z)
  std::vector<double> y_cf;  // n x nt, Y_i(t)
  std::vector<int> z, t;     // realized instrument and treatment
  std::vector<double> y;
  std::vector<std::int64_t> cluster;  // -1 when unclustered
  std::size_t ties = 0;

  int T(std::size_t i, std::size_t zz) const { return t_cf[i * nz + zz]; }
  double Y(std::size_t i, std::size_t tt) const { return y_cf[i * nt + tt]; }
  double shock(std::size_t i, std::size_t tt) const { return u[i * nt + tt]; }
  ResponseVector response(std::size_t i) const;
};

Population draw_population(const ModelSpec& spec, const ErrorSpec& errors,
                           const OutcomeSpec& outcomes, std::size_t n,
                           const SimulationOptions& opts);

// Population with prescribed shocks (one row per unit), for constructed designs.
Population population_from_errors(const ModelSpec& spec, const Grid<double>& shocks,
                                  const OutcomeSpec& outcomes, const SimulationOptions& opts);

// Per-unit class diagnostics computed from shocks, independently of argmax choices.
struct Classification {
  std::vector<std::uint64_t> response;  // codes of T_i(.)
  bool classes_defined = false;
  std::vector<ClassSpec> classes;
  std::vector<int> class_index;  // -1 when undefined
  std::vector<double> delta_star;
  std::vector<int> tau_star;
  std::size_t inconsistent = 0;  // units whose response falls outside their class
};

Classification classify_units(const Population& pop, const TargetingStructure& ts);

// Sums per response group. arms are treatments at the treatment level and observed
// treatments at the filtered level.
struct GroupStat {
  double count = 0;
  std::vector<double> sum;      // sum of Y(a) over members with Y(a) defined
  std::vector<double> defined;  // members with Y(a) defined
};

class GroupTable {
 public:
  GroupTable() = default;
  GroupTable(std::size_t n_units, std::size_t n_instruments, std::size_t n_arms)
      : n_units_(n_units), nz_(n_instruments), na_(n_arms) {}

  std::size_t n_units() const { return n_units_; }
  std::size_t n_instruments() const { return nz_; }
  std::size_t n_arms() const { return na_; }
  const std::map<std::uint64_t, GroupStat>& groups() const { return groups_; }
  std::map<std::uint64_t, GroupStat>& groups() { return groups_; }

  GroupStat aggregate(const std::vector<ResponseVector>& members) const;
  double prob(const std::vector<ResponseVector>& members) const;
  // NaN for empty groups.
  double mean(int arm, const std::vector<ResponseVector>& members) const;
  double effect(int arm, int base, const std::vector<ResponseVector>& members) const;
  // Sum over members of Y(arm), divided by the population size.
  double mass(int arm, const std::vector<ResponseVector>& members) const;
  double prob(const ResponseVector& r) const { return prob(std::vector{r}); }

  void merge(const GroupTable& o);
  std::size_t ambiguous = 0;  // units with several treatments per observed arm and unequal Y

 private:
  std::size_t n_units_ = 0, nz_ = 0, na_ = 0;
  std::map<std::uint64_t, GroupStat> groups_;
};

GroupTable oracle_group_stats(const Population& pop, int threads = 1);
// Requires a filter in the population's model.
GroupTable oracle_group_stats_filtered(const Population& pop, int threads = 1);
GroupTable oracle_group_stats_filtered(const Population& pop, const FilterMap& f, int threads = 1);
MomentTable oracle_moments(const Population& pop, int threads = 1);
MomentTable oracle_moments_filtered(const Population& pop, int threads = 1);

struct FlowWitness {
  int z, z2, t, t2;
};
// Pairs of instrument values between which units move in both directions.
std::vector<FlowWitness> two_way_flows(const Population& pop, bool filtered = false);

// Moments and group sums accumulated without storing units.
struct StreamSummary {
  MomentTable oracle;
  GroupTable groups;
  std::size_t ties = 0;
  std::size_t n = 0;
};
StreamSummary stream_population(const ModelSpec& spec, const ErrorSpec& errors,
                                const OutcomeSpec& outcomes, std::size_t n,
                                const SimulationOptions& opts);

}  // namespace targetiv
