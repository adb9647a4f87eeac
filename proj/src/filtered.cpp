#include "targetiv/filtered.hpp"

#include <algorithm>
#include <cmath>

#include "targetiv/simulator.hpp"

namespace targetiv {

namespace {

// Design positions bound to table indices.
struct Ctx {
  const MomentTable& m;
  std::vector<int> z, d;

  Ctx(const MomentTable& md, const FilteredRoles& r, std::size_t nz, std::size_t nd,
      const std::string& design)
      : m(md), z(r.z), d(r.d) {
    if (md.n_instruments() != nz || md.n_treatments() != nd)
      throw AssumptionViolated(design + " design needs " + std::to_string(nz) +
                               " instrument values and " + std::to_string(nd) +
                               " observed treatments");
    if (z.empty())
      for (std::size_t k = 0; k < nz; ++k) z.push_back(static_cast<int>(k));
    if (d.empty()) {
      d.push_back(md.treatments().reference());
      for (int j = 0; j < static_cast<int>(nd); ++j)
        if (j != md.treatments().reference()) d.push_back(j);
    }
    auto check = [](const std::vector<int>& v, std::size_t n, const char* what) {
      std::vector<int> s = v;
      std::sort(s.begin(), s.end());
      for (std::size_t k = 0; k < s.size(); ++k)
        if (s.size() != n || s[k] != static_cast<int>(k))
          throw InvalidInput(std::string(what) + " roles must be a permutation of the table");
    };
    check(z, nz, "instrument");
    check(d, nd, "observed treatment");
  }

  double P(int k, int j) const { return m.P(z[k], d[j]); }
  double E(int k, int j) const { return m.E(z[k], d[j]); }
  double Y(int k) const { return m.outcome_mean(z[k]); }
  std::string Pf(int k, int j) const {
    return "P(" + m.treatments()[d[j]] + "|" + m.instruments()[z[k]] + ")";
  }
  std::string Ef(int k, int j) const {
    return "E_" + m.instruments()[z[k]] + "(" + m.treatments()[d[j]] + ")";
  }
  std::string Yf(int k) const { return "E[Y|" + m.instruments()[z[k]] + "]"; }
  // digits over design positions; digit j stands for observed arm d[j]
  ResponseVector vec(const char* digits) const {
    ResponseVector v{std::vector<int>(z.size(), 0)};
    for (std::size_t k = 0; k < z.size(); ++k) v.t[z[k]] = d[digits[k] - '0'];
    return v;
  }
  std::string tok(const char* digits) const {
    return vec(digits).name(m.n_treatments());
  }
};

IdentificationReport start(const MomentTable& m, const std::string& design) {
  IdentificationReport r;
  r.design = design;
  r.level = "D";
  r.treatment_labels = m.treatments().labels();
  r.instrument_labels = m.instruments().labels();
  return r;
}

IdentificationReport two_by_t_filtered(const Ctx& c, const IdentOptions& o,
                                       const std::string& design) {
  Roles2xT r;
  r.z0 = c.z[0];
  r.z1 = c.z[1];
  r.t0 = c.d[0];
  r.t1 = c.d[1];
  auto rep = start(c.m, design);
  rep.assumptions = {"strict one-to-one targeting at the treatment level",
                     "instrument validity for the observed treatment"};
  auto p = identify_2xT_probs(c.m, r, o);
  auto m = identify_2xT_means(c.m, r, o);
  rep.estimands = p.estimands;
  rep.estimands.insert(rep.estimands.end(), m.estimands.begin(), m.estimands.end());
  rep.implications = p.implications;
  rep.suppressed = p.suppressed;
  rep.suppressed.insert(rep.suppressed.end(), m.suppressed.begin(), m.suppressed.end());
  return rep;
}

}  // namespace

IdentificationReport identify_M1(const MomentTable& md, const FilteredRoles& roles,
                                 const IdentOptions& o) {
  Ctx c(md, roles, 2, 2, "m1");
  auto rep = two_by_t_filtered(c, o, "m1");
  rep.notes.push_back(
      "Wald = E[Y(1)|C_01] minus the complier-share weighted mean of the untargeted "
      "treatment outcomes; the weights are not identified from observed-treatment moments");
  return rep;
}

IdentificationReport identify_M3(const MomentTable& md, const FilteredRoles& roles,
                                 const IdentOptions& o) {
  Ctx c(md, roles, 2, 3, "m3");
  auto rep = two_by_t_filtered(c, o, "m3");
  rep.notes.push_back(
      "Wald = E[Y(1)|C_01+C_21] - alpha(0) E[Y(0)|C_01] - (1 - alpha(0)) times the weighted "
      "mean of the pooled arm outcomes under its complier groups");
  return rep;
}

IdentificationReport identify_3x2(const MomentTable& md, const FilteredRoles& roles,
                                  const IdentOptions& o) {
  Ctx c(md, roles, 3, 2, "3x2");
  auto rep = start(md, "3x2");
  rep.assumptions = {"strict one-to-one targeting at the treatment level",
                     "instrument validity for the observed treatment"};
  ReportBuilder b(rep, o, 2);
  const int d0 = c.d[0], d1 = c.d[1];
  auto P0 = [&](int k) { return c.P(k, 0); };
  const auto A0 = c.vec("000"), A1 = c.vec("111"), C001 = c.vec("001"), C010 = c.vec("010"),
             C011 = c.vec("011");

  b.prob({A1}, c.P(0, 1), c.Pf(0, 1));
  b.prob({A0, C001}, P0(1), c.Pf(1, 0));
  b.prob({A0, C010}, P0(2), c.Pf(2, 0));
  b.prob({C010, C011}, P0(0) - P0(1), c.Pf(0, 0) + " - " + c.Pf(1, 0));
  b.prob({C001, C011}, P0(0) - P0(2), c.Pf(0, 0) + " - " + c.Pf(2, 0));

  PartialInterval iv;
  iv.name = prob_name({C011}, 2);
  iv.groups = {C011};
  iv.lo = std::max(0.0, P0(0) - P0(1) - P0(2));
  iv.hi = P0(0) - std::max(P0(1), P0(2));
  iv.formula = "max{0, " + c.Pf(0, 0) + " - " + c.Pf(1, 0) + " - " + c.Pf(2, 0) + "} <= p <= " +
               c.Pf(0, 0) + " - max{" + c.Pf(1, 0) + ", " + c.Pf(2, 0) + "}";
  iv.dependents.push_back({prob_name({C010}, 2), P0(0) - P0(1), -1.0, {C010}});
  iv.dependents.push_back({prob_name({C001}, 2), P0(0) - P0(2), -1.0, {C001}});
  iv.dependents.push_back({prob_name({A0}, 2), P0(1) + P0(2) - P0(0), 1.0, {A0}});
  rep.intervals.push_back(iv);

  b.implication(c.Pf(0, 0) + " >= " + c.Pf(1, 0), P0(0) - P0(1));
  b.implication(c.Pf(0, 0) + " >= " + c.Pf(2, 0), P0(0) - P0(2));
  b.implication("interval for " + iv.name + " is non-empty", iv.hi - iv.lo);

  b.mean(d1, {A1}, c.E(0, 1), c.P(0, 1), c.Ef(0, 1) + " / " + c.Pf(0, 1));
  for (int k : {1, 2}) {
    // Units at d0 under position k: A0 and the group that ignores that value.
    const ResponseVector& side = k == 1 ? C010 : C001;
    const ResponseVector& stay = k == 1 ? C001 : C010;
    b.mean(d0, {A0, stay}, c.E(k, 0), P0(k), c.Ef(k, 0) + " / " + c.Pf(k, 0));
    const std::vector<ResponseVector> movers = {side, C011};
    const double den = P0(0) - P0(k);
    const std::string dens = "(" + c.Pf(0, 0) + " - " + c.Pf(k, 0) + ")";
    b.mean(d0, movers, c.E(0, 0) - c.E(k, 0), den,
           "(" + c.Ef(0, 0) + " - " + c.Ef(k, 0) + ") / " + dens);
    b.mean(d1, movers, c.E(k, 1) - c.E(0, 1), den,
           "(" + c.Ef(k, 1) + " - " + c.Ef(0, 1) + ") / " + dens);
    b.contrast(k == 1 ? "LATE(a)" : "LATE(b)", c.z[k], c.z[0], movers, c.Y(k) - c.Y(0),
               c.P(k, 1) - c.P(0, 1),
               "(" + c.Yf(k) + " - " + c.Yf(0) + ") / (" + c.Pf(k, 1) + " - " + c.Pf(0, 1) + ")");
  }
  rep.notes.push_back("observed-treatment defiers between the two targeting values are allowed");
  return rep;
}

IdentificationReport identify_factorial(const MomentTable& md, const FilteredRoles& roles,
                                        const IdentOptions& o) {
  Ctx c(md, roles, 4, 2, "factorial");
  auto rep = start(md, "factorial");
  rep.assumptions = {"strict targeting without complementarity", "instrument validity"};
  const int d0 = c.d[0], d1 = c.d[1];
  ReportBuilder b(rep, o, 2);
  enum { z00 = 0, z10 = 1, z01 = 2, z11 = 3 };
  auto P0 = [&](int k) { return c.P(k, 0); };
  auto P1 = [&](int k) { return c.P(k, 1); };
  const auto A0 = c.vec("0000"), A1 = c.vec("1111"), C0011 = c.vec("0011"),
             C0101 = c.vec("0101"), C0111 = c.vec("0111");

  b.prob({A0}, P0(z11), c.Pf(z11, 0));
  b.prob({A1}, P1(z00), c.Pf(z00, 1));
  b.prob({C0011}, P0(z10) - P0(z11), c.Pf(z10, 0) + " - " + c.Pf(z11, 0));
  b.prob({C0101}, P0(z01) - P0(z11), c.Pf(z01, 0) + " - " + c.Pf(z11, 0));
  b.prob({C0111}, P0(z00) + P0(z11) - P0(z10) - P0(z01),
         c.Pf(z00, 0) + " + " + c.Pf(z11, 0) + " - " + c.Pf(z10, 0) + " - " + c.Pf(z01, 0));
  b.implication(c.Pf(z10, 0) + " >= " + c.Pf(z11, 0), P0(z10) - P0(z11));
  b.implication(c.Pf(z01, 0) + " >= " + c.Pf(z11, 0), P0(z01) - P0(z11));
  b.implication(c.Pf(z00, 0) + " + " + c.Pf(z11, 0) + " >= " + c.Pf(z10, 0) + " + " +
                    c.Pf(z01, 0),
                P0(z00) + P0(z11) - P0(z10) - P0(z01));

  b.contrast("LATE(" + c.tok("0101") + ")", c.z[z11], c.z[z01], {C0101}, c.Y(z11) - c.Y(z01),
             P1(z11) - P1(z01),
             "(" + c.Yf(z11) + " - " + c.Yf(z01) + ") / (" + c.Pf(z11, 1) + " - " + c.Pf(z01, 1) + ")");
  b.contrast("LATE(" + c.tok("0011") + ")", c.z[z11], c.z[z10], {C0011}, c.Y(z11) - c.Y(z10),
             P1(z11) - P1(z10),
             "(" + c.Yf(z11) + " - " + c.Yf(z10) + ") / (" + c.Pf(z11, 1) + " - " + c.Pf(z10, 1) + ")");
  b.contrast("LATE(" + c.tok("0111") + ")", c.z[z10], c.z[z00], {C0111},
             c.Y(z10) + c.Y(z01) - c.Y(z11) - c.Y(z00), P1(z10) + P1(z01) - P1(z11) - P1(z00),
             "(" + c.Yf(z10) + " + " + c.Yf(z01) + " - " + c.Yf(z11) + " - " + c.Yf(z00) +
                 ") / (" + c.Pf(z10, 1) + " + " + c.Pf(z01, 1) + " - " + c.Pf(z11, 1) + " - " +
                 c.Pf(z00, 1) + ")");
  b.mean(d1, {A1}, c.E(z00, 1), P1(z00), c.Ef(z00, 1) + " / " + c.Pf(z00, 1));
  b.mean(d0, {A0}, c.E(z11, 0), P0(z11), c.Ef(z11, 0) + " / " + c.Pf(z11, 0));
  return rep;
}

IdentificationReport identify_star(const MomentTable& md, const FilteredRoles& roles,
                                   const IdentOptions& o) {
  Ctx c(md, roles, 3, 2, "star");
  const int d0 = c.d[0], d1 = c.d[1];
  enum { zc = 0, z10 = 1, z11 = 2 };
  const double leak = c.P(zc, 1);
  if (leak > 0.01)
    throw DesignViolated("control arm take-up " + std::to_string(leak) +
                         " exceeds 0.01; one-sided non-compliance fails");
  auto rep = start(md, "star");
  rep.assumptions = {"services unavailable under control", "instrument validity",
                     "take-up under 1x1 at least take-up under 1x0"};
  ReportBuilder b(rep, o, 2);
  const auto A0 = c.vec("000"), C001 = c.vec("001"), C011 = c.vec("011");
  auto P1 = [&](int k) { return c.P(k, 1); };

  if (leak > md.tolerance())
    rep.notes.push_back("control arm take-up " + std::to_string(leak) + " treated as zero");
  b.prob({A0}, 1 - P1(z11), "1 - " + c.Pf(z11, 1));
  b.prob({C001}, P1(z11) - P1(z10), c.Pf(z11, 1) + " - " + c.Pf(z10, 1));
  b.prob({C011}, P1(z10), c.Pf(z10, 1));
  b.implication(c.Pf(z11, 1) + " >= " + c.Pf(z10, 1), P1(z11) - P1(z10));
  b.contrast("LATE(" + c.tok("011") + ")", c.z[z10], c.z[zc], {C011}, c.Y(z10) - c.Y(zc),
             P1(z10), "(" + c.Yf(z10) + " - " + c.Yf(zc) + ") / " + c.Pf(z10, 1));
  b.contrast("LATE(" + c.tok("001") + ")", c.z[z11], c.z[z10], {C001}, c.Y(z11) - c.Y(z10),
             P1(z11) - P1(z10),
             "(" + c.Yf(z11) + " - " + c.Yf(z10) + ") / (" + c.Pf(z11, 1) + " - " + c.Pf(z10, 1) + ")");
  b.mean(d1, {C011}, c.E(z10, 1), P1(z10), c.Ef(z10, 1) + " / " + c.Pf(z10, 1));
  b.mean(d1, {C001, C011}, c.E(z11, 1), P1(z11), c.Ef(z11, 1) + " / " + c.Pf(z11, 1));
  b.mean(d0, {A0}, c.E(z11, 0), c.P(z11, 0), c.Ef(z11, 0) + " / " + c.Pf(z11, 0));
  return rep;
}

DesignCatalogue build_catalogue(const std::string& design, const std::vector<ClassSpec>& classes,
                                const FilterMap& f) {
  DesignCatalogue c;
  c.design = design;
  const auto nt = f.n_treatments(), nd = f.observed().size();
  for (const auto& k : classes) {
    auto r = k.response();
    if (!r) throw AssumptionViolated("catalogue needs resolved classes");
    c.members[apply_filter(*r, f).name(nd)].push_back(r->name(nt));
  }
  return c;
}

GroupTable aggregate_to_filtered(const GroupTable& g, const FilterMap& f) {
  const auto nt = g.n_arms(), nz = g.n_instruments(), nd = f.observed().size();
  if (f.n_treatments() != nt) throw InvalidInput("filter and group table disagree");
  GroupTable out(g.n_units(), nz, nd);
  for (const auto& [code, s] : g.groups()) {
    auto r = ResponseVector::decode(code, nz, nt);
    auto rd = apply_filter(r, f);
    auto& o = out.groups()[rd.code(nd)];
    if (o.sum.empty()) {
      o.sum.assign(nd, 0.0);
      o.defined.assign(nd, 0.0);
    }
    o.count += s.count;
    for (std::size_t d = 0; d < nd; ++d)
      for (std::size_t z = 0; z < nz; ++z)
        if (rd.t[z] == static_cast<int>(d)) {
          o.sum[d] += s.sum[r.t[z]];
          o.defined[d] += s.defined[r.t[z]];
          break;
        }
  }
  return out;
}

std::vector<std::string> filtered_designs() { return {"m1", "m3", "3x2", "factorial", "star"}; }

IdentificationReport identify_filtered(const std::string& design, const MomentTable& md,
                                       const FilteredRoles& roles, const IdentOptions& o) {
  if (design == "m1") return identify_M1(md, roles, o);
  if (design == "m3") return identify_M3(md, roles, o);
  if (design == "3x2") return identify_3x2(md, roles, o);
  if (design == "factorial") return identify_factorial(md, roles, o);
  if (design == "star") return identify_star(md, roles, o);
  throw InvalidInput("unknown filtered design '" + design + "'");
}

}  // namespace targetiv
