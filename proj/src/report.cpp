#include "targetiv/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "targetiv/simulator.hpp"

namespace targetiv {

std::string to_string(EstimandKind k) {
  switch (k) {
    case EstimandKind::Probability: return "probability";
    case EstimandKind::Mean: return "mean";
    case EstimandKind::Effect: return "effect";
    case EstimandKind::Share: return "share";
    case EstimandKind::Contrast: return "contrast";
    case EstimandKind::Other: return "other";
  }
  return "?";
}

const Estimand* IdentificationReport::find(const std::string& name) const {
  for (const auto& e : estimands)
    if (e.name == name) return &e;
  return nullptr;
}

const PartialInterval* IdentificationReport::find_interval(const std::string& name) const {
  for (const auto& i : intervals)
    if (i.name == name) return &i;
  return nullptr;
}

double IdentificationReport::value(const std::string& name) const {
  if (auto* e = find(name)) return e->value;
  for (const auto& s : suppressed)
    if (s.name == name) throw InvalidInput("estimand '" + name + "' was suppressed: " + s.reason);
  throw InvalidInput("no estimand named '" + name + "'");
}

void IdentificationReport::append(const IdentificationReport& o) {
  estimands.insert(estimands.end(), o.estimands.begin(), o.estimands.end());
  intervals.insert(intervals.end(), o.intervals.begin(), o.intervals.end());
  implications.insert(implications.end(), o.implications.begin(), o.implications.end());
  suppressed.insert(suppressed.end(), o.suppressed.begin(), o.suppressed.end());
  notes.insert(notes.end(), o.notes.begin(), o.notes.end());
  for (const auto& a : o.assumptions)
    if (std::find(assumptions.begin(), assumptions.end(), a) == assumptions.end())
      assumptions.push_back(a);
}

bool IdentificationReport::implications_hold(double tol) const {
  for (const auto& i : implications)
    if (!i.holds(tol)) return false;
  return true;
}

std::optional<double> oracle_value(const Estimand& e, const GroupTable& g) {
  switch (e.kind) {
    case EstimandKind::Probability: return g.prob(e.groups);
    case EstimandKind::Mean: return g.mean(e.arm, e.groups);
    case EstimandKind::Effect: return g.effect(e.arm, e.base, e.groups);
    case EstimandKind::Share: return g.prob(e.groups) / g.prob(e.denominator_groups);
    case EstimandKind::Contrast: {
      double num = 0, cnt = 0;
      for (const auto& r : e.groups) {
        auto it = g.groups().find(r.code(g.n_arms()));
        if (it == g.groups().end()) continue;
        const auto& s = it->second;
        const int a = r.t[e.za], b = r.t[e.zb];
        if (s.defined[a] != s.count || s.defined[b] != s.count) return std::nullopt;
        num += s.sum[a] - s.sum[b];
        cnt += s.count;
      }
      if (cnt == 0) return std::nan("");
      return num / cnt;
    }
    case EstimandKind::Other: return std::nullopt;
  }
  return std::nullopt;
}

std::string union_name(const std::vector<ResponseVector>& groups, std::size_t n_arms) {
  std::string s;
  for (std::size_t k = 0; k < groups.size(); ++k)
    s += (k ? "+" : "") + groups[k].name(n_arms);
  return s;
}

std::string prob_name(const std::vector<ResponseVector>& groups, std::size_t n_arms) {
  return "Pr(" + union_name(groups, n_arms) + ")";
}

std::string mean_name(int arm, const std::vector<ResponseVector>& groups, std::size_t n_arms) {
  return "E[Y(" + index_token(arm, n_arms) + ")|" + union_name(groups, n_arms) + "]";
}

std::string effect_name(int arm, int base, const std::vector<ResponseVector>& groups,
                        std::size_t n_arms) {
  return "E[Y(" + index_token(arm, n_arms) + ")-Y(" + index_token(base, n_arms) + ")|" +
         union_name(groups, n_arms) + "]";
}

void ReportBuilder::prob(const std::vector<ResponseVector>& g, double v,
                         const std::string& formula) {
  Estimand e;
  e.name = prob_name(g, na_);
  e.value = v;
  e.kind = EstimandKind::Probability;
  e.groups = g;
  e.formula = formula;
  r_.estimands.push_back(std::move(e));
}

bool ReportBuilder::denominator_ok(const std::string& name, double den) {
  if (std::abs(den) >= o_.min_denominator) return true;
  std::ostringstream os;
  os << "denominator " << den << " below threshold " << o_.min_denominator;
  if (o_.strict) throw WeakIdentification(name, "weak identification of " + name + ": " + os.str());
  r_.suppressed.push_back({name, os.str(), den});
  return false;
}

void ReportBuilder::ratio(Estimand e, double num, double den) {
  if (!denominator_ok(e.name, den)) return;
  e.value = num / den;
  r_.estimands.push_back(std::move(e));
}

void ReportBuilder::mean(int arm, const std::vector<ResponseVector>& g, double num, double den,
                         const std::string& formula, const std::string& condition) {
  Estimand e;
  e.name = mean_name(arm, g, na_);
  e.kind = EstimandKind::Mean;
  e.groups = g;
  e.arm = arm;
  e.formula = formula;
  e.condition = condition;
  ratio(std::move(e), num, den);
}

void ReportBuilder::effect(int arm, int base, const std::vector<ResponseVector>& g, double num,
                           double den, const std::string& formula, const std::string& condition) {
  Estimand e;
  e.name = effect_name(arm, base, g, na_);
  e.kind = EstimandKind::Effect;
  e.groups = g;
  e.arm = arm;
  e.base = base;
  e.formula = formula;
  e.condition = condition;
  ratio(std::move(e), num, den);
}

void ReportBuilder::contrast(const std::string& name, int za, int zb,
                             const std::vector<ResponseVector>& g, double num, double den,
                             const std::string& formula) {
  Estimand e;
  e.name = name;
  e.kind = EstimandKind::Contrast;
  e.groups = g;
  e.za = za;
  e.zb = zb;
  e.formula = formula;
  ratio(std::move(e), num, den);
}

void ReportBuilder::share(const std::string& name, const std::vector<ResponseVector>& g,
                          const std::vector<ResponseVector>& denom, double num, double den,
                          const std::string& formula) {
  Estimand e;
  e.name = name;
  e.kind = EstimandKind::Share;
  e.groups = g;
  e.denominator_groups = denom;
  e.formula = formula;
  ratio(std::move(e), num, den);
}

void ReportBuilder::implication(const std::string& d, double residual) {
  r_.implications.push_back({d, residual});
}

}  // namespace targetiv
