#pragma once

#include <optional>
#include <string>
#include <vector>

#include "targetiv/model.hpp"

namespace targetiv {

class GroupTable;

enum class EstimandKind {
  Probability,  // Pr(groups)
  Mean,         // E[Y(arm) | groups]
  Effect,       // E[Y(arm) - Y(base) | groups]
  Share,        // Pr(groups) / Pr(denominator groups)
  Contrast,     // E[Y(r(za)) - Y(r(zb)) | groups], outcome under two instrument values
  Other,        // no group-level oracle (regression coefficients and the like)
};

std::string to_string(EstimandKind k);

struct Estimand {
  std::string name;
  double value = 0;
  EstimandKind kind = EstimandKind::Other;
  std::vector<ResponseVector> groups;
  std::vector<ResponseVector> denominator_groups;
  int arm = -1, base = -1;
  int za = -1, zb = -1;
  std::string formula;
  // Extra restriction the formula relies on, empty when none.
  std::string condition;
};

// Probability that is linear in the free parameter p of a partially identified design.
struct LinearInP {
  std::string name;
  double intercept = 0, slope = 0;
  std::vector<ResponseVector> groups;
  double at(double p) const { return intercept + slope * p; }
};

struct PartialInterval {
  std::string name;  // parameter, e.g. "Pr(A_0)"
  double lo = 0, hi = 0;
  std::vector<ResponseVector> groups;
  std::vector<LinearInP> dependents;
  std::string formula;
};

// Testable implication: residual >= 0 when the restriction is compatible with the data.
struct Implication {
  std::string description;
  double residual = 0;
  bool holds(double tol) const { return residual >= -tol; }
};

struct Suppressed {
  std::string name;
  std::string reason;
  double denominator = 0;
};

struct IdentificationReport {
  std::string design;
  std::string level = "T";  // "D" for observed-treatment designs
  std::vector<std::string> treatment_labels, instrument_labels;
  std::vector<std::string> assumptions;
  std::vector<Estimand> estimands;
  std::vector<PartialInterval> intervals;
  std::vector<Implication> implications;
  std::vector<Suppressed> suppressed;
  std::vector<std::string> notes;

  const Estimand* find(const std::string& name) const;
  const PartialInterval* find_interval(const std::string& name) const;
  // Throws InvalidInput when the estimand is missing or suppressed.
  double value(const std::string& name) const;
  void append(const IdentificationReport& other);
  bool implications_hold(double tol) const;
};

struct IdentOptions {
  double min_denominator = 1e-12;
  // Throw WeakIdentification instead of recording a suppressed estimand.
  bool strict = false;
};

// Oracle value of a group-level estimand; nullopt for kinds without one.
std::optional<double> oracle_value(const Estimand& e, const GroupTable& g);

// Naming helpers shared by the design routines.
std::string union_name(const std::vector<ResponseVector>& groups, std::size_t n_arms);
std::string prob_name(const std::vector<ResponseVector>& groups, std::size_t n_arms);
std::string mean_name(int arm, const std::vector<ResponseVector>& groups, std::size_t n_arms);
std::string effect_name(int arm, int base, const std::vector<ResponseVector>& groups,
                        std::size_t n_arms);

// Accumulates estimands with the weak-denominator policy applied.
class ReportBuilder {
 public:
  ReportBuilder(IdentificationReport& r, const IdentOptions& o, std::size_t n_arms)
      : r_(r), o_(o), na_(n_arms) {}

  void prob(const std::vector<ResponseVector>& g, double v, const std::string& formula);
  void ratio(Estimand e, double num, double den);
  void mean(int arm, const std::vector<ResponseVector>& g, double num, double den,
            const std::string& formula, const std::string& condition = "");
  void effect(int arm, int base, const std::vector<ResponseVector>& g, double num, double den,
              const std::string& formula, const std::string& condition = "");
  void contrast(const std::string& name, int za, int zb, const std::vector<ResponseVector>& g,
                double num, double den, const std::string& formula);
  void share(const std::string& name, const std::vector<ResponseVector>& g,
             const std::vector<ResponseVector>& denom, double num, double den,
             const std::string& formula);
  void implication(const std::string& d, double residual);
  // Records a suppression and returns false when den is too small.
  bool denominator_ok(const std::string& name, double den);
  std::size_t n_arms() const { return na_; }

 private:
  IdentificationReport& r_;
  const IdentOptions& o_;
  std::size_t na_;
};

}  // namespace targetiv
