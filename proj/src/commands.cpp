#include "targetiv/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace targetiv {

namespace {

json error_spec_hash_input(const std::optional<json>& j) { return j ? *j : json(nullptr); }

json groups_to_json(const GroupTable& g, std::size_t nz, std::size_t na) {
  json a = json::array();
  for (const auto& [code, s] : g.groups()) {
    auto r = ResponseVector::decode(code, nz, na);
    a.push_back({{"name", r.name(na)},
                 {"prob", s.count / static_cast<double>(g.n_units())},
                 {"count", s.count}});
  }
  return a;
}

json flows_to_json(const std::vector<FlowWitness>& f, const LabelSet& Z, const LabelSet& A) {
  json a = json::array();
  for (const auto& w : f)
    a.push_back({{"z", Z[w.z]}, {"z2", Z[w.z2]}, {"t", A[w.t]}, {"t2", A[w.t2]}});
  return a;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

ErrorSpec errors_or_default(const std::optional<json>& j, const TreatmentSet& T, bool degenerate) {
  ErrorSpec e = j ? errors_from_json(*j, T)
                  : ErrorSpec::independent_normal(std::vector<double>(T.size(), 0.0),
                                                  std::vector<double>(T.size(), 1.0));
  if (degenerate) e.allow_degenerate = true;
  return e;
}

OutcomeSpec outcomes_or_default(const std::optional<json>& j, const ModelSpec& m) {
  return j ? outcomes_from_json(*j, m) : default_outcomes(m, m.filter.has_value());
}

}  // namespace

json run_enumerate(const json& model, const std::string& regime_name) {
  const auto spec = model_from_json(model);
  const auto regime = parse_regime(regime_name);
  const auto ts = derive_targeting(spec.U);
  const auto o2o = check_one_to_one(ts);
  const auto strict = check_strict(ts);
  const auto ref = check_reference(ts);
  const auto nt = ts.n_treatments(), nz = ts.n_instruments();
  json j;
  j["config_hash"] = config_hash(model);
  j["regime"] = to_string(regime);
  j["targeting"] = to_json(ts);
  j["verdicts"] = {{"one_to_one", to_json(o2o)},
                   {"strict", to_json(strict)},
                   {"reference", to_json(ref)},
                   {"strict_one_to_one", strict.holds && o2o.holds()}};
  json counts;
  std::uint64_t nvec = 1;
  for (std::size_t z = 0; z < nz; ++z) nvec *= nt;
  counts["response_vectors"] = nvec;
  std::vector<std::string> notes;
  if (strict.holds && ref.holds) {
    auto classes = enumerate_classes(ts);
    json cl = json::array();
    for (const auto& c : classes) cl.push_back(to_json(c, ts));
    j["classes"] = cl;
    counts["classes"] = classes.size();
    if (o2o.holds() && nz >= 2 && nz <= nt && ts.z_zero.size() == 1)
      counts["formula"] = count_classes(static_cast<int>(nt), static_cast<int>(nz));
  } else {
    j["classes"] = nullptr;
    notes.push_back(strict.holds ? "no instrument value targets nothing; classes not enumerated"
                                 : "strict targeting fails; classes not enumerated");
  }
  const bool regime_ok = regime == Regime::Strict ? strict.holds
                         : regime == Regime::OneToOne ? o2o.holds()
                                                      : strict.holds && o2o.holds();
  if (regime_ok && ref.holds) {
    auto ex = excluded_groups(ts, regime);
    j["excluded"] = to_json(ex, nt);
    counts["excluded_elemental"] = ex.elemental.size();
    counts["excluded_composite"] = ex.composite.size();
    std::set<ResponseVector> all(ex.elemental.begin(), ex.elemental.end());
    for (const auto& c : ex.composite)
      for (const auto& r : c.expand(nt)) all.insert(r);
    counts["excluded_vectors"] = all.size();
  } else {
    j["excluded"] = nullptr;
    notes.push_back("regime " + to_string(regime) + " does not hold; exclusions not derived");
  }
  if (strict.holds && o2o.holds() && ref.holds) {
    j["identifying_system"] = to_json(identifying_system(ts), ts);
    if (nz == 3 && nt == 3 && ts.targeted.size() == 2) {
      json eq;
      eq["full"] = to_json(kirkeboen_equivalence_check(ts), nt);
      eq["without_irrelevance"] = to_json(kirkeboen_equivalence_check(ts, {true, false}), nt);
      eq["without_monotonicity"] = to_json(kirkeboen_equivalence_check(ts, {false, true}), nt);
      j["equivalence"] = eq;
    }
  }
  j["counts"] = counts;
  j["notes"] = notes;
  return j;
}

void write_unit_csv(const Population& pop, const TargetingStructure& ts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  const auto& T = pop.spec.U.treatments();
  const auto& Z = pop.spec.U.instruments();
  Classification cls = classify_units(pop, ts);
  for (std::size_t t = 0; t < pop.nt; ++t) out << "u_" << T[t] << ",";
  for (std::size_t z = 0; z < pop.nz; ++z) out << "T_at_" << Z[z] << ",";
  for (std::size_t t = 0; t < pop.nt; ++t) out << "Y_at_" << T[t] << ",";
  out << "Z,T,D,Y,class,cluster\n";
  for (std::size_t i = 0; i < pop.n; ++i) {
    for (std::size_t t = 0; t < pop.nt; ++t) out << fmt(pop.shock(i, t)) << ",";
    for (std::size_t z = 0; z < pop.nz; ++z) out << T[pop.T(i, z)] << ",";
    for (std::size_t t = 0; t < pop.nt; ++t) out << fmt(pop.Y(i, t)) << ",";
    out << Z[pop.z[i]] << "," << T[pop.t[i]] << ",";
    out << (pop.spec.filter ? pop.spec.filter->observed()[(*pop.spec.filter)(pop.t[i])] : T[pop.t[i]]);
    out << "," << fmt(pop.y[i]) << ",";
    if (cls.classes_defined && cls.class_index[i] >= 0) out << cls.classes[cls.class_index[i]].name;
    out << "," << (pop.cluster[i] >= 0 ? std::to_string(pop.cluster[i]) : std::string()) << "\n";
  }
}

json run_simulate(const json& model, const std::optional<json>& errors,
                  const std::optional<json>& outcomes, const SimulateArgs& a) {
  const auto spec = model_from_json(model);
  if (a.filter && !spec.filter) throw InvalidInput("--filter needs a filter in the model");
  const auto& T = spec.U.treatments();
  const auto& Z = spec.U.instruments();
  const auto ts = derive_targeting(spec.U);
  ErrorSpec e = errors_or_default(errors, T, a.allow_degenerate);
  OutcomeSpec o = outcomes_or_default(outcomes, spec);
  SimulationOptions so;
  so.seed = a.seed;
  so.threads = a.threads;
  so.z_probs = a.z_probs;
  so.cluster_size = a.cluster_size;

  json j;
  j["config_hash"] = config_hash({{"model", model},
                                  {"errors", error_spec_hash_input(errors)},
                                  {"outcomes", error_spec_hash_input(outcomes)},
                                  {"n", a.n},
                                  {"z_probs", a.z_probs},
                                  {"cluster_size", a.cluster_size}});
  j["seed"] = a.seed;
  j["n"] = a.n;
  j["targeting"] = to_json(ts);
  j["verdicts"] = {{"one_to_one", to_json(check_one_to_one(ts))},
                   {"strict", to_json(check_strict(ts))},
                   {"reference", to_json(check_reference(ts))}};
  if (a.stream) {
    if (!a.dump.empty()) throw InvalidInput("streaming mode stores no units to dump");
    auto s = stream_population(spec, e, o, a.n, so);
    j["mode"] = "stream";
    j["ties"] = s.ties;
    j["moments"] = to_json(s.oracle);
    j["groups"] = groups_to_json(s.groups, Z.size(), T.size());
    if (a.filter) {
      auto g = aggregate_to_filtered(s.groups, *spec.filter);
      j["filtered"] = {{"moments", to_json(filter_moments(s.oracle, *spec.filter))},
                       {"groups", groups_to_json(g, Z.size(), spec.filter->observed().size())}};
    }
    return j;
  }
  auto pop = draw_population(spec, e, o, a.n, so);
  j["mode"] = "stored";
  j["ties"] = pop.ties;
  j["moments"] = to_json(oracle_moments(pop, a.threads));
  j["groups"] = groups_to_json(oracle_group_stats(pop, a.threads), Z.size(), T.size());
  j["two_way_flows"] = flows_to_json(two_way_flows(pop, false), Z, T);
  auto cls = classify_units(pop, ts);
  if (cls.classes_defined) {
    std::vector<double> counts(cls.classes.size(), 0.0);
    for (int k : cls.class_index)
      if (k >= 0) counts[k] += 1;
    json c = json::array();
    for (std::size_t k = 0; k < counts.size(); ++k)
      c.push_back({{"name", cls.classes[k].name}, {"prob", counts[k] / static_cast<double>(pop.n)}});
    j["classes"] = c;
    j["inconsistent_units"] = cls.inconsistent;
  }
  if (a.filter) {
    const auto& D = spec.filter->observed();
    auto g = oracle_group_stats_filtered(pop, a.threads);
    j["filtered"] = {{"moments", to_json(oracle_moments_filtered(pop, a.threads))},
                     {"groups", groups_to_json(g, Z.size(), D.size())},
                     {"ambiguous_outcomes", g.ambiguous},
                     {"two_way_flows", flows_to_json(two_way_flows(pop, true), Z, D)}};
  }
  if (!a.dump.empty()) {
    write_unit_csv(pop, ts, a.dump);
    j["dump"] = a.dump;
  }
  return j;
}

MomentTable apply_merges(const MomentTable& m0, const std::vector<std::string>& merges) {
  MomentTable m = m0;
  for (const auto& spec : merges) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidInput("merge must look like label=a,b: " + spec);
    const std::string label = spec.substr(0, eq);
    std::vector<int> members;
    for (const auto& s : split(spec.substr(eq + 1), ',')) members.push_back(m.instruments().index_of(s));
    if (members.size() < 2) throw InvalidInput("merge needs at least two instrument values: " + spec);
    std::sort(members.begin(), members.end());
    std::vector<std::vector<int>> groups;
    std::vector<std::string> labels;
    for (int z = 0; z < static_cast<int>(m.n_instruments()); ++z) {
      if (z == members.front()) {
        groups.push_back(members);
        labels.push_back(label);
      } else if (!std::binary_search(members.begin(), members.end(), z)) {
        groups.push_back({z});
        labels.push_back(m.instruments()[z]);
      }
    }
    m = merge_instruments(m, groups, labels);
  }
  return m;
}

namespace {

IdentOptions ident_options(const IdentifyArgs& a) {
  IdentOptions o;
  o.min_denominator = a.min_denominator;
  o.strict = a.strict_estimands;
  return o;
}

DesignRequest request_of(const IdentifyArgs& a) {
  DesignRequest r;
  r.design = a.design;
  r.homog = a.homog;
  r.tsls = a.tsls;
  return r;
}

}  // namespace

json run_identify(const json& moments, const IdentifyArgs& a) {
  auto m = apply_merges(moments_from_json(moments), a.merge);
  auto req = resolve_roles(request_of(a), m, roles_from_json(moments));
  auto rep = identify_design(m, req, ident_options(a));
  json j = to_json(rep);
  j["config_hash"] = config_hash({{"moments", moments},
                                  {"design", a.design},
                                  {"homog", a.homog},
                                  {"tsls", a.tsls},
                                  {"merge", a.merge}});
  return j;
}

json run_estimate(const Dataset& d, const EstimateArgs& a) {
  auto sorted_unique = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  auto tl = a.treatments.empty() ? sorted_unique(d.arm) : a.treatments;
  auto zl = a.instruments.empty() ? sorted_unique(d.z) : a.instruments;
  TreatmentSet T(tl, a.reference.empty() ? tl.front() : a.reference);
  InstrumentSet Z(zl);
  const IdentOptions o = ident_options(a.ident);
  const auto merges = a.ident.merge;

  // Roles refer to labels after merging.
  auto point = apply_merges(empirical_moments(d, T, Z), merges);
  auto req = resolve_roles(request_of(a.ident), point, {a.roles_z, a.roles_t});
  Routine routine = [req, o, merges](const MomentTable& m) {
    return identify_design(apply_merges(m, merges), req, o);
  };

  BootstrapOptions bo;
  bo.B = a.boot;
  bo.seed = a.seed;
  bo.cluster = d.clustered();
  bo.threads = a.threads;
  bo.level = a.level;

  json j;
  double ysum = 0;
  for (double y : d.y) ysum += y;
  j["config_hash"] = config_hash({{"design", a.ident.design},
                                  {"treatments", tl},
                                  {"instruments", zl},
                                  {"rows", d.size()},
                                  {"y_sum", ysum},
                                  {"boot", a.boot},
                                  {"clustered", d.clustered()},
                                  {"merge", merges}});
  j["seed"] = a.seed;
  j["design"] = a.ident.design;
  j["min_first_stage"] = a.ident.min_denominator;
  json rows = json::object();
  for (std::size_t z = 0; z < Z.size(); ++z)
    rows[Z[z]] = std::count(d.z.begin(), d.z.end(), Z[z]);
  j["rows_per_instrument"] = rows;
  auto rel = check_relevance(d, T, Z);
  j["relevance"] = {{"full_rank", rel.full_rank},
                    {"rank", rel.rank},
                    {"singular_values", rel.singular_values}};
  if (d.cell.empty()) {
    j["result"] = to_json(bootstrap(d, T, Z, routine, bo));
  } else {
    json cells = json::object();
    for (const auto& [c, r] : bootstrap_by_cell(d, T, Z, routine, bo)) cells[c] = to_json(r);
    j["cells"] = cells;
  }
  return j;
}

json run_validate(const json& model, const std::optional<json>& errors,
                  const std::optional<json>& outcomes, const ValidateArgs& a) {
  const auto spec = model_from_json(model);
  ValidateOptions vo;
  vo.n = a.n;
  vo.seed = a.seed;
  vo.threads = a.threads;
  vo.tol = a.tol;
  if (errors) vo.errors = errors_from_json(*errors, spec.U.treatments());
  if (outcomes) vo.outcomes = outcomes_from_json(*outcomes, spec);
  auto v = validate_model(spec, vo);
  json j;
  j["config_hash"] = config_hash({{"model", model},
                                  {"errors", error_spec_hash_input(errors)},
                                  {"outcomes", error_spec_hash_input(outcomes)},
                                  {"n", a.n}});
  j["seed"] = a.seed;
  const json body = to_json(v);
  for (const auto& [k, x] : body.items()) j[k] = x;
  return j;
}

}  // namespace targetiv
