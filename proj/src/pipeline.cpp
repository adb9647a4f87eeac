#include "targetiv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace targetiv {

bool is_filtered_design(const std::string& d) {
  auto f = filtered_designs();
  return std::find(f.begin(), f.end(), d) != f.end();
}

std::vector<std::string> all_designs() {
  std::vector<std::string> d = {"2xT", "3x3"};
  for (const auto& x : filtered_designs()) d.push_back(x);
  return d;
}

DesignRequest resolve_roles(DesignRequest req, const MomentTable& m, const RoleLabels& labels) {
  if (!labels.z.empty()) {
    req.z.clear();
    for (const auto& s : labels.z) req.z.push_back(m.instruments().index_of(s));
  }
  if (!labels.t.empty()) {
    req.t.clear();
    for (const auto& s : labels.t) req.t.push_back(m.treatments().index_of(s));
  }
  return req;
}

namespace {

void need(const DesignRequest& r, std::size_t nz, std::size_t nt) {
  if ((!r.z.empty() && r.z.size() != nz) || (!r.t.empty() && r.t.size() != nt))
    throw InvalidInput("design " + r.design + " takes " + std::to_string(nz) +
                       " instrument roles and " + std::to_string(nt) + " treatment roles");
}

void append(IdentificationReport& into, const IdentificationReport& r) {
  if (into.design.empty()) {
    into = r;
    return;
  }
  into.append(r);
}

// Keeps estimands (and suppressions) whose names are listed.
IdentificationReport select(IdentificationReport r, const std::vector<std::string>& names) {
  auto keep = [&](const std::string& n) {
    return std::find(names.begin(), names.end(), n) != names.end();
  };
  std::erase_if(r.estimands, [&](const Estimand& e) { return !keep(e.name); });
  std::erase_if(r.suppressed, [&](const Suppressed& s) { return !keep(s.name); });
  return r;
}

}  // namespace

IdentificationReport identify_design(const MomentTable& m, const DesignRequest& req,
                                     const IdentOptions& o) {
  IdentificationReport rep;
  if (req.design == "2xT") {
    need(req, 2, 2);
    Roles2xT r = default_roles_2xT(m);
    if (!req.z.empty()) r.z0 = req.z[0], r.z1 = req.z[1];
    if (!req.t.empty()) r.t0 = req.t[0], r.t1 = req.t[1];
    append(rep, identify_2xT_probs(m, r, o));
    append(rep, identify_2xT_means(m, r, o));
    for (const auto& h : req.homog) {
      if (h != "eq1") throw InvalidInput("2xT homogeneity option is eq1, got '" + h + "'");
      auto x = ate_2xT_homog(m, r, o);
      append(rep, x);
      for (const auto& a : x.assumptions)
        if (std::find(rep.assumptions.begin(), rep.assumptions.end(), a) == rep.assumptions.end())
          rep.assumptions.push_back(a);
    }
    return rep;
  }
  if (req.design == "3x3") {
    need(req, 3, 3);
    Roles3x3 r = default_roles_3x3(m);
    if (!req.z.empty()) r.z0 = req.z[0], r.z1 = req.z[1], r.z2 = req.z[2];
    if (!req.t.empty()) r.t0 = req.t[0], r.t1 = req.t[1], r.t2 = req.t[2];
    append(rep, identify_3x3_probs(m, r, o));
    append(rep, identify_3x3_means(m, r, o));
    if (req.tsls) append(rep, identify_3x3_tsls(m, r));
    if (!req.homog.empty()) {
      const auto g = groups_3x3(r);
      std::vector<std::string> names;
      for (const auto& h : req.homog) {
        if (h == "eq1") {
          names.push_back(effect_name(r.t1, r.t0, {g.C010, g.C012}, 3));
          rep.assumptions.push_back("E[Y(t1)|C112] = E[Y(t1)|C212]");
        } else if (h == "eq2") {
          names.push_back(effect_name(r.t2, r.t0, {g.C002, g.C012}, 3));
          rep.assumptions.push_back("E[Y(t2)|C112] = E[Y(t2)|C212]");
        } else if (h == "eq3") {
          names.push_back(effect_name(r.t1, r.t2, {g.C112, g.C212}, 3));
        } else {
          throw InvalidInput("3x3 homogeneity options are eq1, eq2, eq3, got '" + h + "'");
        }
      }
      if (std::find(req.homog.begin(), req.homog.end(), "eq3") != req.homog.end() &&
          std::find(req.homog.begin(), req.homog.end(), "eq1") == req.homog.end())
        rep.assumptions.push_back("E[Y(t1)|C112] = E[Y(t1)|C212]");
      if (std::find(req.homog.begin(), req.homog.end(), "eq3") != req.homog.end() &&
          std::find(req.homog.begin(), req.homog.end(), "eq2") == req.homog.end())
        rep.assumptions.push_back("E[Y(t2)|C112] = E[Y(t2)|C212]");
      append(rep, select(ate_3x3_homog(m, r, o), names));
    }
    return rep;
  }
  if (is_filtered_design(req.design)) {
    if (!req.homog.empty() || req.tsls)
      throw InvalidInput("homogeneity and TSLS options apply to 2xT and 3x3 only");
    return identify_filtered(req.design, m, FilteredRoles{req.z, req.t}, o);
  }
  throw InvalidInput("unknown design '" + req.design + "'");
}

Routine make_routine(const DesignRequest& req, const IdentOptions& o) {
  return [req, o](const MomentTable& m) { return identify_design(m, req, o); };
}

std::vector<DesignRequest> applicable_designs(const ModelSpec& spec, const TargetingStructure& ts) {
  std::vector<DesignRequest> out;
  const auto nz = ts.n_instruments(), nt = ts.n_treatments();
  const int t0 = ts.treatments.reference();
  const bool strict = check_strict(ts).holds;
  const bool o2o = check_one_to_one(ts).holds();
  const bool ref = check_reference(ts).holds;
  const std::optional<FilterMap>& f = spec.filter;

  std::optional<Roles2xT> r2;
  if (nz == 2 && strict && o2o && ref && ts.targeted.size() == 1) {
    r2 = roles_2xT_from_targeting(ts);
    out.push_back({"2xT", {r2->z0, r2->z1}, {r2->t0, r2->t1}, {}, false});
  }
  std::optional<Roles3x3> r3;
  if (nz == 3 && nt == 3 && strict && o2o && ref && ts.targeted.size() == 2) {
    r3 = roles_from_targeting(ts);
    out.push_back({"3x3", {r3->z0, r3->z1, r3->z2}, {r3->t0, r3->t1, r3->t2}, {}, true});
  }
  if (f) {
    const auto nd = f->observed().size();
    const int d0 = (*f)(t0);
    if (r2) {
      const int d1 = (*f)(r2->t1);
      const bool t1_alone = f->preimage(d1).size() == 1;
      if (nd == 2 && t1_alone && d0 != d1) out.push_back({"m1", {r2->z0, r2->z1}, {d0, d1}, {}, false});
      if (nd == 3 && t1_alone && f->preimage(d0).size() == 1 && d0 != d1) {
        int d2 = 3 - d0 - d1;
        out.push_back({"m3", {r2->z0, r2->z1}, {d0, d1, d2}, {}, false});
      }
    }
    if (r3 && nd == 2) {
      const int d1 = (*f)(r3->t1);
      if (d1 == (*f)(r3->t2) && d1 != d0)
        out.push_back({"3x2", {r3->z0, r3->z1, r3->z2}, {d0, d1}, {}, false});
    }
    // Two treatments pooled into the treated arm, each shifted by its own binary instrument.
    if (nz == 4 && nt == 3 && nd == 2 && strict && ref && ts.targeted.size() == 2 &&
        ts.z_zero.size() == 1) {
      const int ta = ts.targeted[0], tb = ts.targeted[1];
      const auto& za = ts.z_bar[ta];
      const auto& zb = ts.z_bar[tb];
      const int d1 = (*f)(ta);
      if (za.size() == 2 && zb.size() == 2 && d1 == (*f)(tb) && d1 != d0) {
        std::vector<int> shared;
        std::set_intersection(za.begin(), za.end(), zb.begin(), zb.end(), std::back_inserter(shared));
        if (shared.size() == 1) {
          const int z11 = shared[0];
          const int z10 = za[0] == z11 ? za[1] : za[0];
          const int z01 = zb[0] == z11 ? zb[1] : zb[0];
          out.push_back({"factorial", {ts.z_zero[0], z10, z01, z11}, {d0, d1}, {}, false});
        }
      }
    }
  }
  // Binary treatment, one instrument value making it unavailable, the other two ordered.
  if (nz == 3 && nt == 2 && (!f || f->observed().size() == 2)) {
    const int t1 = 1 - t0;
    int zc = -1;
    for (std::size_t z = 0; z < nz; ++z)
      if (ts.delta(z, t1) == NEG_INF) zc = zc == -1 ? static_cast<int>(z) : -2;
    if (zc >= 0) {
      std::vector<int> rest;
      for (int z = 0; z < 3; ++z)
        if (z != zc) rest.push_back(z);
      if (ts.delta(rest[0], t1) > ts.delta(rest[1], t1)) std::swap(rest[0], rest[1]);
      if (std::isfinite(ts.delta(rest[0], t1)) && ts.delta(rest[0], t1) < ts.delta(rest[1], t1)) {
        std::vector<int> d = {t0, t1};
        if (f) d = {(*f)(t0), (*f)(t1)};
        out.push_back({"star", {zc, rest[0], rest[1]}, d, {}, false});
      }
    }
  }
  return out;
}

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

namespace {

struct Deviation {
  double worst = 0;
  std::string where;
  void add(double got, double want, const std::string& what) {
    double d;
    if (std::isnan(got) && std::isnan(want)) d = 0;
    else if (std::isnan(got) || std::isnan(want)) d = std::numeric_limits<double>::infinity();
    else d = std::abs(got - want) / std::max(1.0, std::abs(want));
    if (d > worst || (std::isinf(d) && where.empty())) {
      worst = d;
      where = what;
    }
  }
};

Check make_check(const std::string& name, const Deviation& d, double tol) {
  Check c;
  c.name = name;
  c.max_deviation = d.worst;
  c.passed = d.worst <= tol;
  if (!c.passed) c.detail = "worst at " + d.where;
  return c;
}

// Estimands with a group-level oracle, compared to it.
Check compare_estimands(const std::string& name, const IdentificationReport& rep,
                        const GroupTable& g, double tol) {
  Deviation d;
  std::size_t compared = 0;
  for (const auto& e : rep.estimands) {
    if (!e.condition.empty()) continue;
    auto v = oracle_value(e, g);
    if (!v) continue;
    d.add(e.value, *v, e.name);
    ++compared;
  }
  auto c = make_check(name, d, tol);
  if (c.passed) c.detail = std::to_string(compared) + " estimands compared";
  return c;
}

Check intervals_contain(const std::string& name, const IdentificationReport& rep,
                        const GroupTable& g, double tol) {
  Check c;
  c.name = name;
  std::ostringstream os;
  for (const auto& iv : rep.intervals) {
    const double p = g.prob(iv.groups);
    double out = std::max({0.0, iv.lo - p, p - iv.hi});
    c.max_deviation = std::max(c.max_deviation, out);
    if (out > tol) os << iv.name << " oracle " << p << " outside [" << iv.lo << ", " << iv.hi << "]; ";
    for (const auto& dep : iv.dependents) {
      const double want = g.prob(dep.groups);
      const double dev = std::abs(dep.at(p) - want);
      c.max_deviation = std::max(c.max_deviation, dev);
      if (dev > tol) os << dep.name << " off by " << dev << "; ";
    }
  }
  c.detail = os.str();
  c.passed = c.detail.empty();
  if (c.passed) c.detail = std::to_string(rep.intervals.size()) + " intervals";
  return c;
}

Check implications_hold(const std::string& name, const IdentificationReport& rep, double tol) {
  Check c;
  c.name = name;
  for (const auto& i : rep.implications) {
    if (!i.holds(tol)) {
      c.passed = false;
      c.detail += i.description + " residual " + std::to_string(i.residual) + "; ";
    }
    c.max_deviation = std::max(c.max_deviation, std::max(0.0, -i.residual));
  }
  return c;
}

// Wald at the observed level against the treatment-level complier average.
Check wald_decomposition(const std::string& name, const IdentificationReport& rep,
                         const GroupTable& gt, const DesignRequest& tl, double tol) {
  Check c;
  c.name = name;
  const auto* w = rep.find("Wald");
  if (!w) {
    c.detail = "Wald suppressed";
    return c;
  }
  const int z0 = tl.z[0], z1 = tl.z[1], t1 = tl.t[1];
  const auto nt = gt.n_arms();
  double num = 0, mass = 0;
  for (int t = 0; t < static_cast<int>(nt); ++t) {
    if (t == t1) continue;
    ResponseVector r{std::vector<int>(2, 0)};
    r.t[z0] = t;
    r.t[z1] = t1;
    const double p = gt.prob(r);
    if (p == 0) continue;
    num += p * gt.effect(t1, t, {r});
    mass += p;
  }
  Deviation d;
  d.add(w->value, num / mass, "Wald");
  return make_check(name, d, tol);
}

}  // namespace

ValidationReport validate_model(const ModelSpec& spec, const ValidateOptions& opts) {
  ValidationReport v;
  const auto ts = derive_targeting(spec.U);
  const auto o2o = check_one_to_one(ts);
  const auto strict = check_strict(ts);
  const auto ref = check_reference(ts);
  v.targeting = to_json(ts);
  v.verdicts = {{"one_to_one", to_json(o2o)},
                {"strict", to_json(strict)},
                {"reference", to_json(ref)},
                {"strict_one_to_one", strict.holds && o2o.holds()}};
  const double tol = opts.tol;

  const auto nt = spec.U.n_treatments();
  ErrorSpec errors = opts.errors ? *opts.errors
                                 : ErrorSpec::independent_normal(std::vector<double>(nt, 0.0),
                                                                 std::vector<double>(nt, 1.0));
  OutcomeSpec outcomes = opts.outcomes ? *opts.outcomes : default_outcomes(spec, spec.filter.has_value());
  SimulationOptions so;
  so.seed = opts.seed;
  so.threads = opts.threads;
  auto pop = draw_population(spec, errors, outcomes, opts.n, so);
  v.n = pop.n;
  v.ties = pop.ties;
  {
    Check c;
    c.name = "argmax ties";
    c.max_deviation = static_cast<double>(pop.ties);
    c.passed = pop.ties == 0;
    if (!c.passed) c.detail = std::to_string(pop.ties) + " units with tied utilities";
    v.checks.push_back(c);
  }
  {
    auto flows = two_way_flows(pop, false);
    Check c;
    c.name = "no two-way flows at the treatment level";
    c.max_deviation = static_cast<double>(flows.size());
    c.passed = flows.empty();
    if (!c.passed) c.detail = std::to_string(flows.size()) + " instrument pairs with flows both ways";
    v.checks.push_back(c);
  }

  const auto gt = oracle_group_stats(pop, opts.threads);
  const auto mt = oracle_moments(pop, opts.threads);

  if (!strict.holds || !ref.holds) {
    v.skipped.push_back("class enumeration and identification skipped: " +
                        (strict.holds ? std::string("no instrument value targets nothing")
                                      : "strict targeting fails: " + strict.detail));
  } else {
    auto cls = classify_units(pop, ts);
    Check c;
    c.name = "units fall in their targeting class";
    c.max_deviation = static_cast<double>(cls.inconsistent);
    c.passed = cls.inconsistent == 0;
    if (!c.passed) c.detail = std::to_string(cls.inconsistent) + " inconsistent units";
    v.checks.push_back(c);
  }

  // Excluded response groups never occur.
  {
    std::optional<Regime> regime;
    if (strict.holds && o2o.holds()) regime = Regime::StrictOneToOne;
    else if (o2o.holds()) regime = Regime::OneToOne;
    else if (strict.holds) regime = Regime::Strict;
    if (regime && ref.holds) {
      auto ex = excluded_groups(ts, *regime);
      Check c;
      c.name = "excluded groups have zero frequency (" + to_string(*regime) + ")";
      for (const auto& r : ex.elemental) {
        const double p = gt.prob(r);
        if (p > 0) c.detail += r.name(nt) + " ";
        c.max_deviation = std::max(c.max_deviation, p);
      }
      for (const auto& cr : ex.composite) {
        double p = 0;
        for (const auto& [code, s] : gt.groups())
          if (cr.matches(ResponseVector::decode(code, ts.n_instruments(), nt))) p += s.count;
        p /= static_cast<double>(gt.n_units());
        if (p > 0) c.detail += cr.name(nt) + " ";
        c.max_deviation = std::max(c.max_deviation, p);
      }
      c.passed = c.max_deviation == 0;
      if (c.passed)
        c.detail = std::to_string(ex.elemental.size()) + " elemental, " +
                   std::to_string(ex.composite.size()) + " composite";
      v.checks.push_back(c);
    }
  }

  // Forward map of the generic system reproduces the scores.
  if (strict.holds && o2o.holds() && ref.holds) {
    auto sys = identifying_system(ts);
    std::vector<double> probs;
    for (const auto& c : sys.classes) probs.push_back(gt.prob(*c.response()));
    auto fw = sys.forward_map(probs);
    Deviation d;
    for (std::size_t k = 0; k < sys.cells.size(); ++k) {
      auto [z, t] = sys.cells[k];
      d.add(fw[k], mt.P(z, t), "P(" + ts.treatments[t] + "|" + ts.instruments[z] + ")");
    }
    v.checks.push_back(make_check("class probabilities reproduce the scores", d, tol));
  }

  std::optional<GroupTable> gd;
  std::optional<MomentTable> md;
  if (spec.filter) {
    gd = oracle_group_stats_filtered(pop, opts.threads);
    md = oracle_moments_filtered(pop, opts.threads);
    auto agg = aggregate_to_filtered(gt, *spec.filter);
    Deviation d;
    const auto nd = spec.filter->observed().size();
    for (const auto& [code, s] : agg.groups()) {
      auto r = ResponseVector::decode(code, ts.n_instruments(), nd);
      d.add(agg.prob(r), gd->prob(r), r.name(nd));
    }
    for (const auto& [code, s] : gd->groups()) {
      auto r = ResponseVector::decode(code, ts.n_instruments(), nd);
      d.add(gd->prob(r), agg.prob(r), r.name(nd));
    }
    v.checks.push_back(make_check("treatment groups aggregate to observed groups", d, tol));
    auto ref_m = filter_moments(mt, *spec.filter);
    Deviation dm;
    for (std::size_t z = 0; z < ts.n_instruments(); ++z)
      for (std::size_t a = 0; a < nd; ++a) {
        dm.add(ref_m.P(z, a), md->P(z, a), "P");
        dm.add(ref_m.E(z, a), md->E(z, a), "E");
      }
    v.checks.push_back(make_check("filtered moments equal aggregated moments", dm, tol));
  }

  const auto designs = applicable_designs(spec, ts);
  std::optional<DesignRequest> two_by_t;
  for (const auto& req : designs)
    if (req.design == "2xT") two_by_t = req;
  for (const auto& req : designs) {
    // star on an unfiltered binary model runs on treatment arms
    const bool dlevel = is_filtered_design(req.design) && spec.filter;
    const MomentTable& m = dlevel ? *md : mt;
    const GroupTable& g = dlevel ? *gd : gt;
    IdentificationReport rep;
    try {
      rep = identify_design(m, req, {});
    } catch (const Error& e) {
      Check c;
      c.name = req.design + ": identification runs";
      c.passed = false;
      c.detail = e.what();
      v.checks.push_back(c);
      continue;
    }
    v.designs.push_back(req.design);
    const std::string tag = req.design + ": ";
    v.checks.push_back(compare_estimands(tag + "estimands match the oracle", rep, g, tol));
    if (!rep.intervals.empty())
      v.checks.push_back(intervals_contain(tag + "intervals contain the oracle", rep, g, tol));
    if (!rep.implications.empty())
      v.checks.push_back(implications_hold(tag + "testable implications hold", rep, tol));
    if ((req.design == "m1" || req.design == "m3") && two_by_t)
      v.checks.push_back(wald_decomposition(tag + "Wald equals the complier-weighted effects", rep,
                                            gt, *two_by_t, tol));
    if (req.design == "3x3") {
      Roles3x3 r{req.z[0], req.z[1], req.z[2], req.t[0], req.t[1], req.t[2]};
      Deviation d;
      try {
        auto a = tsls_3x3(m, r);
        auto b = tsls_3x3(g, r);
        d.add(b.beta0, a.beta0, "beta0");
        d.add(b.beta1, a.beta1, "beta1");
        d.add(b.beta2, a.beta2, "beta2");
        auto dec = tsls_decomposition(g, r);
        d.add(dec.late1 + dec.bias1, a.beta1, "late1 + bias1");
        d.add(dec.late2 + dec.bias2, a.beta2, "late2 + bias2");
        v.checks.push_back(make_check(tag + "TSLS routes agree", d, 1e-8));
      } catch (const RankDeficient& e) {
        v.skipped.push_back(tag + "TSLS skipped: " + e.what());
      }
      auto eq = kirkeboen_equivalence_check(ts);
      Check c;
      c.name = tag + "targeting classes equal the monotonicity and irrelevance survivors";
      c.passed = eq.equivalent;
      v.checks.push_back(c);
    }
    v.reports.push_back(rep);
  }
  if (designs.empty() && strict.holds && ref.holds)
    v.skipped.push_back("no closed-form design applies to this model");
  return v;
}

json to_json(const ValidationReport& v) {
  json j;
  j["n"] = v.n;
  j["ties"] = v.ties;
  j["targeting"] = v.targeting;
  j["verdicts"] = v.verdicts;
  j["designs"] = v.designs;
  j["skipped"] = v.skipped;
  json cs = json::array();
  for (const auto& c : v.checks)
    cs.push_back({{"name", c.name},
                  {"passed", c.passed},
                  {"max_deviation", number_to_json(c.max_deviation)},
                  {"detail", c.detail}});
  j["checks"] = cs;
  json rs = json::array();
  for (const auto& r : v.reports) rs.push_back(to_json(r));
  j["reports"] = rs;
  j["passed"] = v.passed();
  return j;
}

}  // namespace targetiv
