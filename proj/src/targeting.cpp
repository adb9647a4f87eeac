#include "targetiv/targeting.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace targetiv {

namespace {

bool contains(const std::vector<int>& v, int x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

std::string fmt_witnesses(const TargetingStructure& ts, const std::vector<Witness>& w) {
  std::ostringstream os;
  for (std::size_t k = 0; k < w.size(); ++k)
    os << (k ? ", " : "") << "(" << ts.instruments[w[k].z] << "," << ts.treatments[w[k].t]
       << ")";
  return os.str();
}

}  // namespace

bool TargetingStructure::is_targeted(int t) const { return contains(targeted, t); }

bool TargetingStructure::in_z_bar(int t, int z) const { return contains(z_bar.at(t), z); }

TargetingStructure derive_targeting(const MeanValueMatrix& u, std::optional<double> eps) {
  TargetingStructure ts;
  ts.treatments = u.treatments();
  ts.instruments = u.instruments();
  ts.delta = relative_means(u);
  const auto nz = u.n_instruments(), nt = u.n_treatments();

  double scale = 1.0;
  for (double v : ts.delta.data())
    if (std::isfinite(v)) scale = std::max(scale, std::abs(v));
  ts.eps = eps ? *eps : 1e-9 * scale;
  if (!(ts.eps >= 0)) throw InvalidInput("eps must be non-negative");

  ts.delta_bar.assign(nt, NEG_INF);
  ts.z_bar.assign(nt, {});
  ts.t_bar.assign(nz, {});
  for (std::size_t t = 0; t < nt; ++t) {
    double best = NEG_INF;
    for (std::size_t z = 0; z < nz; ++z) best = std::max(best, ts.delta(z, t));
    if (best == NEG_INF)
      throw InvalidModel("treatment '" + ts.treatments[t] +
                         "' is unavailable at every instrument value");
    ts.delta_bar[t] = best;
    for (std::size_t z = 0; z < nz; ++z) {
      double d = ts.delta(z, t);
      if (d >= best - ts.eps) {
        ts.z_bar[t].push_back(static_cast<int>(z));
        if (d != best) {
          std::ostringstream os;
          os << "near tie for treatment '" << ts.treatments[t] << "' at instrument '"
             << ts.instruments[z] << "' (gap " << best - d << ")";
          ts.warnings.push_back(os.str());
        }
      }
    }
    if (ts.z_bar[t].size() != nz) ts.targeted.push_back(static_cast<int>(t));
  }

  std::set<int> zs;
  for (int t : ts.targeted)
    for (int z : ts.z_bar[t]) {
      zs.insert(z);
      ts.t_bar[z].push_back(t);
    }
  ts.z_star.assign(zs.begin(), zs.end());
  for (std::size_t z = 0; z < nz; ++z)
    if (!zs.count(static_cast<int>(z))) ts.z_zero.push_back(static_cast<int>(z));
  return ts;
}

OneToOneVerdict check_one_to_one(const TargetingStructure& ts) {
  OneToOneVerdict v;
  for (int t : ts.targeted)
    if (ts.z_bar[t].size() > 1) {
      v.part_i.holds = false;
      for (int z : ts.z_bar[t]) v.part_i.witnesses.push_back({z, t});
    }
  for (std::size_t z = 0; z < ts.n_instruments(); ++z)
    if (ts.t_bar[z].size() > 1) {
      v.part_ii.holds = false;
      for (int t : ts.t_bar[z]) v.part_ii.witnesses.push_back({static_cast<int>(z), t});
    }
  v.part_i.detail = v.part_i.holds ? "every targeted treatment has one targeting instrument"
                                   : "shared targeting: " + fmt_witnesses(ts, v.part_i.witnesses);
  v.part_ii.detail = v.part_ii.holds
                         ? "every instrument targets at most one treatment"
                         : "instrument targets several: " + fmt_witnesses(ts, v.part_ii.witnesses);
  return v;
}

StrictVerdict check_strict(const TargetingStructure& ts) {
  StrictVerdict v;
  v.delta_low = ts.delta_bar;
  for (int t : ts.targeted) {
    std::vector<int> off;
    for (std::size_t z = 0; z < ts.n_instruments(); ++z)
      if (!ts.in_z_bar(t, static_cast<int>(z))) off.push_back(static_cast<int>(z));
    double lo = ts.delta(off[0], t), hi = lo;
    for (int z : off) {
      lo = std::min(lo, ts.delta(z, t));
      hi = std::max(hi, ts.delta(z, t));
    }
    // all-NEG_INF rows count as constant
    bool constant = (lo == hi) || (std::isfinite(lo) && hi - lo <= ts.eps);
    v.delta_low[t] = ts.delta(off[0], t);
    if (!constant) {
      v.holds = false;
      for (int z : off) v.witnesses.push_back({z, t});
    }
  }
  v.detail = v.holds ? "off-target relative means are constant"
                     : "off-target relative means vary: " + fmt_witnesses(ts, v.witnesses);
  return v;
}

AssumptionVerdict check_reference(const TargetingStructure& ts) {
  AssumptionVerdict v;
  v.holds = !ts.z_zero.empty();
  if (!v.holds)
    for (int z : ts.z_star) v.witnesses.push_back({z, ts.t_bar[z].front()});
  v.detail = v.holds ? "reference instrument set is non-empty"
                     : "every instrument targets some treatment: " + fmt_witnesses(ts, v.witnesses);
  return v;
}

std::optional<ResponseVector> ClassSpec::response() const {
  if (!resolved) return std::nullopt;
  ResponseVector r;
  for (const auto& s : assignment) r.t.push_back(s.front());
  return r;
}

bool ClassSpec::admits(const ResponseVector& r) const {
  if (r.size() != assignment.size()) return false;
  for (std::size_t z = 0; z < r.size(); ++z)
    if (!contains(assignment[z], r.t[z])) return false;
  return true;
}

std::vector<ClassSpec> enumerate_classes(const TargetingStructure& ts) {
  auto strict = check_strict(ts);
  if (!strict.holds) throw AssumptionViolated("strict targeting fails: " + strict.detail);
  auto ref = check_reference(ts);
  if (!ref.holds) throw AssumptionViolated(ref.detail);
  const bool o2o = check_one_to_one(ts).holds();
  const auto k = ts.z_star.size();
  if (k > 20) throw InvalidInput("too many targeting instruments to enumerate classes");

  std::vector<ClassSpec> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    std::vector<int> A;
    for (std::size_t j = 0; j < k; ++j)
      if (mask >> j & 1u) A.push_back(ts.z_star[j]);
    for (std::size_t tau = 0; tau < ts.n_treatments(); ++tau) {
      const int t = static_cast<int>(tau);
      bool ok;
      if (!ts.is_targeted(t)) {
        ok = true;
      } else if (o2o) {
        ok = std::any_of(A.begin(), A.end(), [&](int z) { return ts.t_bar[z].front() == t; });
      } else {
        ok = std::all_of(ts.z_bar[t].begin(), ts.z_bar[t].end(),
                         [&](int z) { return contains(A, z); });
      }
      if (!ok) continue;
      ClassSpec c;
      c.A = A;
      c.tau = t;
      c.assignment.assign(ts.n_instruments(), {t});
      for (int z : A) {
        c.assignment[z] = ts.t_bar[z];
        if (ts.t_bar[z].size() > 1) c.resolved = false;
      }
      if (c.resolved) {
        c.name = c.response()->name(ts.n_treatments());
      } else {
        std::ostringstream os;
        os << "c(A={";
        for (std::size_t j = 0; j < A.size(); ++j) os << (j ? "," : "") << ts.instruments[A[j]];
        os << "},tau=" << ts.treatments[t] << ")";
        c.name = os.str();
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::uint64_t count_classes(int n_treatments, int n_instruments) {
  if (n_instruments < 2) throw InvalidInput("need at least two instrument values");
  if (n_instruments > n_treatments)
    throw InvalidInput("one-to-one targeting needs |Z| - 1 <= |T| - 1");
  if (n_instruments > 62) throw InvalidInput("too many instrument values");
  return static_cast<std::uint64_t>(2 * n_treatments - n_instruments + 1)
         << (n_instruments - 2);
}

Regime parse_regime(const std::string& s) {
  if (s == "one_to_one" || s == "one-to-one") return Regime::OneToOne;
  if (s == "strict") return Regime::Strict;
  if (s == "strict_one_to_one" || s == "strict-one-to-one") return Regime::StrictOneToOne;
  throw InvalidInput("unknown regime '" + s + "'");
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::OneToOne: return "one_to_one";
    case Regime::Strict: return "strict";
    case Regime::StrictOneToOne: return "strict_one_to_one";
  }
  return "?";
}

namespace {

// Groups ruled out without strictness: r(zbar) = t0 forces r(z') != t for t targeted by zbar.
std::vector<CompositeResponseVector> one_to_one_patterns(const TargetingStructure& ts) {
  std::vector<CompositeResponseVector> out;
  const int t0 = ts.treatments.reference();
  for (int t : ts.targeted) {
    int zb = ts.z_bar[t].front();
    for (std::size_t z = 0; z < ts.n_instruments(); ++z) {
      if (static_cast<int>(z) == zb) continue;
      auto c = CompositeResponseVector::wildcard(ts.n_instruments(), ts.n_treatments());
      c.fix(zb, t0).fix(z, t);
      out.push_back(c);
    }
  }
  return out;
}

std::vector<ResponseVector> expand_union(const std::vector<CompositeResponseVector>& pats,
                                         std::size_t nt) {
  std::set<ResponseVector> s;
  for (const auto& p : pats)
    for (auto& r : p.expand(nt)) s.insert(r);
  return {s.begin(), s.end()};
}

}  // namespace

ExclusionSet excluded_groups(const TargetingStructure& ts, Regime regime) {
  ExclusionSet out;
  const auto nt = ts.n_treatments(), nz = ts.n_instruments();
  if (regime == Regime::OneToOne || regime == Regime::StrictOneToOne) {
    auto o2o = check_one_to_one(ts);
    if (!o2o.holds())
      throw AssumptionViolated("one-to-one targeting fails: " +
                               (o2o.part_i.holds ? o2o.part_ii.detail : o2o.part_i.detail));
    out.composite = one_to_one_patterns(ts);
  }
  if (regime == Regime::OneToOne) {
    out.elemental = expand_union(out.composite, nt);
    return out;
  }
  auto classes = enumerate_classes(ts);
  for (auto& r : all_response_vectors(nz, nt)) {
    bool admitted = std::any_of(classes.begin(), classes.end(),
                                [&](const ClassSpec& c) { return c.admits(r); });
    if (!admitted) out.elemental.push_back(r);
  }
  return out;
}

Roles3x3 roles_from_targeting(const TargetingStructure& ts) {
  if (ts.n_instruments() != 3 || ts.n_treatments() != 3)
    throw AssumptionViolated("3x3 design needs three instrument values and three treatments");
  auto o2o = check_one_to_one(ts);
  if (!o2o.holds() || ts.targeted.size() != 2 || ts.z_zero.size() != 1)
    throw AssumptionViolated("3x3 design needs one-to-one targeting of two treatments");
  Roles3x3 r;
  r.t0 = ts.treatments.reference();
  r.t1 = ts.targeted[0];
  r.t2 = ts.targeted[1];
  r.z0 = ts.z_zero[0];
  r.z1 = ts.z_bar[r.t1].front();
  r.z2 = ts.z_bar[r.t2].front();
  return r;
}

EquivalenceResult kirkeboen_equivalence_check(const TargetingStructure& ts,
                                              EquivalenceOptions opts) {
  auto strict = check_strict(ts);
  if (!strict.holds) throw AssumptionViolated("strict targeting fails: " + strict.detail);
  const Roles3x3 r = roles_from_targeting(ts);
  const int z[3] = {r.z0, r.z1, r.z2};
  const int t[3] = {r.t0, r.t1, r.t2};
  // digits are role positions: pattern "1 0 *" means T(z0)=t1, T(z1)=t0, T(z2) free
  auto pat = [&](const char* s) {
    auto c = CompositeResponseVector::wildcard(3, 3);
    for (int k = 0; k < 3; ++k)
      if (s[k] != '*') c.fix(z[k], t[s[k] - '0']);
    return c;
  };
  EquivalenceResult res;
  for (const char* s : {"10*", "12*", "2*0", "2*1"}) res.monotonicity_patterns.push_back(pat(s));
  for (const char* s : {"02*", "20*", "0*1", "1*0"}) res.irrelevance_patterns.push_back(pat(s));
  res.monotonicity_excluded = expand_union(res.monotonicity_patterns, 3);
  res.irrelevance_excluded = expand_union(res.irrelevance_patterns, 3);

  std::set<ResponseVector> excluded;
  if (!opts.drop_monotonicity) excluded.insert(res.monotonicity_excluded.begin(),
                                               res.monotonicity_excluded.end());
  if (!opts.drop_irrelevance) excluded.insert(res.irrelevance_excluded.begin(),
                                              res.irrelevance_excluded.end());
  for (auto& v : all_response_vectors(3, 3))
    if (!excluded.count(v)) res.survivors.push_back(v);

  for (auto& c : enumerate_classes(ts)) res.classes.push_back(*c.response());
  std::sort(res.classes.begin(), res.classes.end());
  res.equivalent = res.classes == res.survivors;
  return res;
}

MeanValueMatrix canonical_one_to_one_model(int n_treatments, int n_instruments) {
  if (n_instruments < 2 || n_instruments > n_treatments)
    throw InvalidInput("canonical model needs 2 <= |Z| <= |T|");
  std::vector<std::string> tl, zl;
  for (int t = 0; t < n_treatments; ++t) tl.push_back(std::to_string(t));
  for (int z = 0; z < n_instruments; ++z) zl.push_back(std::to_string(z));
  Grid<double> u(n_instruments, n_treatments, 0.0);
  for (int z = 0; z < n_instruments; ++z)
    for (int t = 1; t < n_treatments; ++t) u(z, t) = (z == t) ? 1.0 : 0.0;
  return MeanValueMatrix(TreatmentSet(tl, 0), InstrumentSet(zl), u);
}

}  // namespace targetiv
