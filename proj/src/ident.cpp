#include "targetiv/ident.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "targetiv/simulator.hpp"

namespace targetiv {

namespace {

// Formula text in terms of the moment table's labels.
struct Fmt {
  const MomentTable& m;
  std::string P(int z, int t) const {
    return "P(" + m.treatments()[t] + "|" + m.instruments()[z] + ")";
  }
  std::string E(int z, int t) const {
    return "E_" + m.instruments()[z] + "(" + m.treatments()[t] + ")";
  }
  std::string Y(int z) const { return "E[Y|" + m.instruments()[z] + "]"; }
};

IdentificationReport start(const MomentTable& m, const std::string& design) {
  IdentificationReport r;
  r.design = design;
  r.treatment_labels = m.treatments().labels();
  r.instrument_labels = m.instruments().labels();
  return r;
}

void check_roles(const MomentTable& m, std::initializer_list<int> zs,
                 std::initializer_list<int> ts) {
  std::vector<int> seen;
  for (int z : zs) {
    if (z < 0 || static_cast<std::size_t>(z) >= m.n_instruments())
      throw InvalidInput("instrument role out of range");
    if (std::find(seen.begin(), seen.end(), z) != seen.end())
      throw InvalidInput("instrument roles must be distinct");
    seen.push_back(z);
  }
  seen.clear();
  for (int t : ts) {
    if (t < 0 || static_cast<std::size_t>(t) >= m.n_treatments())
      throw InvalidInput("treatment role out of range");
    if (std::find(seen.begin(), seen.end(), t) != seen.end())
      throw InvalidInput("treatment roles must be distinct");
    seen.push_back(t);
  }
}

}  // namespace

std::string to_string(const Rational& q) { return q.str(); }

std::size_t IdentifyingSystem::equations() const {
  std::size_t nz = 0, nt = 0;
  for (auto [z, t] : cells) {
    nz = std::max<std::size_t>(nz, z + 1);
    nt = std::max<std::size_t>(nt, t + 1);
  }
  return (nt - 1) * nz;
}

bool IdentifyingSystem::identifies(const std::vector<Rational>& c) const {
  if (c.size() != classes.size()) throw InvalidInput("combination length mismatch");
  std::vector<Rational> res = c;
  for (std::size_t k = 0; k < row_basis.size(); ++k) {
    Rational f = res[pivots[k]];
    if (f == 0) continue;
    for (std::size_t j = 0; j < res.size(); ++j) res[j] -= f * row_basis[k][j];
  }
  return std::all_of(res.begin(), res.end(), [](const Rational& q) { return q == 0; });
}

std::vector<double> IdentifyingSystem::forward_map(const std::vector<double>& probs) const {
  if (probs.size() != classes.size()) throw InvalidInput("class probability length mismatch");
  std::vector<double> out(cells.size(), 0.0);
  for (std::size_t r = 0; r < cells.size(); ++r)
    for (std::size_t c = 0; c < classes.size(); ++c)
      if (forward(r, c)) out[r] += probs[c];
  return out;
}

IdentifyingSystem identifying_system(const TargetingStructure& ts) {
  if (!check_one_to_one(ts).holds())
    throw AssumptionViolated("identifying system needs one-to-one targeting");
  IdentifyingSystem s;
  s.classes = enumerate_classes(ts);
  const auto nz = ts.n_instruments(), nt = ts.n_treatments(), nc = s.classes.size();
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t t = 0; t < nt; ++t) s.cells.emplace_back(static_cast<int>(z), static_cast<int>(t));
  s.forward = Grid<int>(s.cells.size(), nc, 0);
  for (std::size_t r = 0; r < s.cells.size(); ++r)
    for (std::size_t c = 0; c < nc; ++c)
      s.forward(r, c) = s.classes[c].response()->t[s.cells[r].first] == s.cells[r].second;

  // Exact reduced row echelon form.
  std::vector<std::vector<Rational>> a(s.cells.size(), std::vector<Rational>(nc));
  for (std::size_t r = 0; r < s.cells.size(); ++r)
    for (std::size_t c = 0; c < nc; ++c) a[r][c] = s.forward(r, c);
  std::size_t row = 0;
  for (std::size_t col = 0; col < nc && row < a.size(); ++col) {
    std::size_t piv = row;
    while (piv < a.size() && a[piv][col] == 0) ++piv;
    if (piv == a.size()) continue;
    std::swap(a[row], a[piv]);
    Rational inv = 1 / a[row][col];
    for (auto& x : a[row]) x *= inv;
    for (std::size_t r = 0; r < a.size(); ++r) {
      if (r == row || a[r][col] == 0) continue;
      Rational f = a[r][col];
      for (std::size_t j = 0; j < nc; ++j) a[r][j] -= f * a[row][j];
    }
    s.pivots.push_back(col);
    ++row;
  }
  s.rank = row;
  s.row_basis.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(row));
  for (std::size_t free = 0; free < nc; ++free) {
    if (std::find(s.pivots.begin(), s.pivots.end(), free) != s.pivots.end()) continue;
    std::vector<Rational> v(nc, 0);
    v[free] = 1;
    for (std::size_t k = 0; k < s.rank; ++k) v[s.pivots[k]] = -s.row_basis[k][free];
    s.kernel_basis.push_back(std::move(v));
  }
  return s;
}

Roles2xT default_roles_2xT(const MomentTable& m) {
  if (m.n_instruments() != 2) throw AssumptionViolated("2xT design needs two instrument values");
  Roles2xT r;
  r.t0 = m.treatments().reference();
  r.t1 = r.t0 == 0 ? 1 : 0;
  return r;
}

Roles2xT roles_2xT_from_targeting(const TargetingStructure& ts) {
  if (ts.n_instruments() != 2 || ts.targeted.size() != 1 || ts.z_zero.size() != 1)
    throw AssumptionViolated("2xT design needs two instrument values, one of them targeting");
  Roles2xT r;
  r.t0 = ts.treatments.reference();
  r.t1 = ts.targeted[0];
  r.z0 = ts.z_zero[0];
  r.z1 = ts.z_bar[r.t1].front();
  return r;
}

Roles3x3 default_roles_3x3(const MomentTable& m) {
  if (m.n_instruments() != 3 || m.n_treatments() != 3)
    throw AssumptionViolated("3x3 design needs three instrument values and three treatments");
  Roles3x3 r{0, 1, 2, m.treatments().reference(), 0, 0};
  std::vector<int> rest;
  for (int t = 0; t < 3; ++t)
    if (t != r.t0) rest.push_back(t);
  r.t1 = rest[0];
  r.t2 = rest[1];
  return r;
}

namespace {

struct Groups2xT {
  const Roles2xT& r;
  std::size_t nt;
  ResponseVector vec(int a, int b) const {
    ResponseVector v{{0, 0}};
    v.t[r.z0] = a;
    v.t[r.z1] = b;
    return v;
  }
  ResponseVector A(int t) const { return vec(t, t); }
  ResponseVector C(int t) const { return vec(t, r.t1); }
  std::vector<ResponseVector> compliers() const {
    std::vector<ResponseVector> out;
    for (std::size_t t = 0; t < nt; ++t)
      if (static_cast<int>(t) != r.t1) out.push_back(C(static_cast<int>(t)));
    return out;
  }
};

}  // namespace

IdentificationReport identify_2xT_probs(const MomentTable& m, const Roles2xT& r,
                                        const IdentOptions& o) {
  if (m.n_instruments() != 2) throw AssumptionViolated("2xT design needs two instrument values");
  check_roles(m, {r.z0, r.z1}, {r.t0, r.t1});
  auto rep = start(m, "2xT");
  rep.assumptions = {"strict one-to-one targeting", "instrument validity"};
  ReportBuilder b(rep, o, m.n_treatments());
  Groups2xT g{r, m.n_treatments()};
  Fmt f{m};
  const int nt = static_cast<int>(m.n_treatments());
  for (int t = 0; t < nt; ++t) {
    if (t == r.t1) b.prob({g.A(t)}, m.P(r.z0, t), f.P(r.z0, t));
    else b.prob({g.A(t)}, m.P(r.z1, t), f.P(r.z1, t));
  }
  for (int t = 0; t < nt; ++t) {
    if (t == r.t1) continue;
    const double d = m.P(r.z0, t) - m.P(r.z1, t);
    b.prob({g.C(t)}, d, f.P(r.z0, t) + " - " + f.P(r.z1, t));
    b.implication(f.P(r.z0, t) + " >= " + f.P(r.z1, t), d);
  }
  // With two arms the union is C_01 itself, already reported.
  if (nt > 2)
    b.prob(g.compliers(), m.P(r.z1, r.t1) - m.P(r.z0, r.t1),
           f.P(r.z1, r.t1) + " - " + f.P(r.z0, r.t1));
  return rep;
}

IdentificationReport identify_2xT_means(const MomentTable& m, const Roles2xT& r,
                                        const IdentOptions& o) {
  if (m.n_instruments() != 2) throw AssumptionViolated("2xT design needs two instrument values");
  check_roles(m, {r.z0, r.z1}, {r.t0, r.t1});
  auto rep = start(m, "2xT");
  rep.assumptions = {"strict one-to-one targeting", "instrument validity"};
  ReportBuilder b(rep, o, m.n_treatments());
  Groups2xT g{r, m.n_treatments()};
  Fmt f{m};
  const int nt = static_cast<int>(m.n_treatments());
  const int z0 = r.z0, z1 = r.z1, t1 = r.t1;
  b.mean(t1, {g.A(t1)}, m.E(z0, t1), m.P(z0, t1), f.E(z0, t1) + " / " + f.P(z0, t1));
  for (int t = 0; t < nt; ++t) {
    if (t == t1) continue;
    b.mean(t, {g.A(t)}, m.E(z1, t), m.P(z1, t), f.E(z1, t) + " / " + f.P(z1, t));
    b.mean(t, {g.C(t)}, m.E(z0, t) - m.E(z1, t), m.P(z0, t) - m.P(z1, t),
           "(" + f.E(z0, t) + " - " + f.E(z1, t) + ") / (" + f.P(z0, t) + " - " + f.P(z1, t) + ")");
  }
  const double den = m.P(z1, t1) - m.P(z0, t1);
  const std::string dens = "(" + f.P(z1, t1) + " - " + f.P(z0, t1) + ")";
  b.mean(t1, g.compliers(), m.E(z1, t1) - m.E(z0, t1), den,
         "(" + f.E(z1, t1) + " - " + f.E(z0, t1) + ") / " + dens);
  b.contrast("Wald", z1, z0, g.compliers(), m.outcome_mean(z1) - m.outcome_mean(z0), den,
             "(" + f.Y(z1) + " - " + f.Y(z0) + ") / " + dens);
  for (int t = 0; t < nt; ++t) {
    if (t == t1) continue;
    b.share("alpha(" + index_token(t, nt) + ")", {g.C(t)}, g.compliers(),
            m.P(z0, t) - m.P(z1, t), den,
            "(" + f.P(z0, t) + " - " + f.P(z1, t) + ") / " + dens);
  }
  return rep;
}

IdentificationReport ate_2xT_homog(const MomentTable& m, const Roles2xT& r,
                                   const IdentOptions& o) {
  if (m.n_instruments() != 2) throw AssumptionViolated("2xT design needs two instrument values");
  check_roles(m, {r.z0, r.z1}, {r.t0, r.t1});
  auto rep = start(m, "2xT");
  rep.assumptions = {"strict one-to-one targeting", "instrument validity",
                     "E[Y(t1)|C_t t1] equal across t"};
  ReportBuilder b(rep, o, m.n_treatments());
  Groups2xT g{r, m.n_treatments()};
  Fmt f{m};
  const int nt = static_cast<int>(m.n_treatments());
  const int z0 = r.z0, z1 = r.z1, t1 = r.t1;
  const double den = m.P(z1, t1) - m.P(z0, t1);
  for (int t = 0; t < nt; ++t) {
    if (t == t1) continue;
    const std::string name = effect_name(t1, t, {g.C(t)}, m.n_treatments());
    const double dt = m.P(z0, t) - m.P(z1, t);
    if (!b.denominator_ok(name, den) || !b.denominator_ok(name, dt)) continue;
    const double v = (m.E(z1, t1) - m.E(z0, t1)) / den - (m.E(z0, t) - m.E(z1, t)) / dt;
    b.effect(t1, t, {g.C(t)}, v, 1.0,
             "(" + f.E(z1, t1) + " - " + f.E(z0, t1) + ") / (" + f.P(z1, t1) + " - " +
                 f.P(z0, t1) + ") - (" + f.E(z0, t) + " - " + f.E(z1, t) + ") / (" +
                 f.P(z0, t) + " - " + f.P(z1, t) + ")",
             "mean of Y(t1) equal across complier groups");
  }
  return rep;
}

Groups3x3 groups_3x3(const Roles3x3& r, std::size_t nz) {
  const int t[3] = {r.t0, r.t1, r.t2};
  auto v = [&](int a, int b, int c) {
    ResponseVector x{std::vector<int>(nz, 0)};
    x.t[r.z0] = t[a];
    x.t[r.z1] = t[b];
    x.t[r.z2] = t[c];
    return x;
  };
  return {v(0, 0, 0), v(1, 1, 1), v(2, 2, 2), v(0, 0, 2),
          v(0, 1, 0), v(0, 1, 2), v(1, 1, 2), v(2, 1, 2)};
}

IdentificationReport identify_3x3_probs(const MomentTable& m, const Roles3x3& r,
                                        const IdentOptions& o) {
  if (m.n_instruments() != 3 || m.n_treatments() != 3)
    throw AssumptionViolated("3x3 design needs three instrument values and three treatments");
  check_roles(m, {r.z0, r.z1, r.z2}, {r.t0, r.t1, r.t2});
  auto rep = start(m, "3x3");
  rep.assumptions = {"strict one-to-one targeting", "instrument validity"};
  ReportBuilder b(rep, o, 3);
  const auto g = groups_3x3(r);
  Fmt f{m};
  const int z0 = r.z0, z1 = r.z1, z2 = r.z2, t0 = r.t0, t1 = r.t1, t2 = r.t2;
  auto P = [&](int z, int t) { return m.P(z, t); };

  b.prob({g.A1}, P(z2, t1), f.P(z2, t1));
  b.prob({g.A2}, P(z1, t2), f.P(z1, t2));
  b.prob({g.C112}, P(z0, t1) - P(z2, t1), f.P(z0, t1) + " - " + f.P(z2, t1));
  b.prob({g.C212}, P(z0, t2) - P(z1, t2), f.P(z0, t2) + " - " + f.P(z1, t2));
  b.prob({g.C010, g.C012}, P(z0, t0) - P(z1, t0), f.P(z0, t0) + " - " + f.P(z1, t0));
  b.prob({g.C002, g.C012}, P(z0, t0) - P(z2, t0), f.P(z0, t0) + " - " + f.P(z2, t0));
  b.prob({g.A0, g.C010}, P(z2, t0), f.P(z2, t0));
  b.prob({g.A0, g.C002}, P(z1, t0), f.P(z1, t0));

  PartialInterval iv;
  iv.name = prob_name({g.A0}, 3);
  iv.groups = {g.A0};
  iv.lo = std::max(0.0, P(z1, t0) + P(z2, t0) - P(z0, t0));
  iv.hi = std::min({1.0, P(z1, t0), P(z2, t0)});
  iv.formula = "max{0, " + f.P(z1, t0) + " + " + f.P(z2, t0) + " - " + f.P(z0, t0) +
               "} <= p <= min{1, " + f.P(z1, t0) + ", " + f.P(z2, t0) + "}";
  iv.dependents.push_back({prob_name({g.C002}, 3), P(z1, t0), -1.0, {g.C002}});
  iv.dependents.push_back({prob_name({g.C010}, 3), P(z2, t0), -1.0, {g.C010}});
  iv.dependents.push_back(
      {prob_name({g.C012}, 3), P(z0, t0) - P(z1, t0) - P(z2, t0), 1.0, {g.C012}});
  rep.intervals.push_back(iv);

  b.implication(f.P(z0, t1) + " >= " + f.P(z2, t1), P(z0, t1) - P(z2, t1));
  b.implication(f.P(z0, t2) + " >= " + f.P(z1, t2), P(z0, t2) - P(z1, t2));
  b.implication(f.P(z0, t0) + " >= " + f.P(z1, t0), P(z0, t0) - P(z1, t0));
  b.implication(f.P(z0, t0) + " >= " + f.P(z2, t0), P(z0, t0) - P(z2, t0));
  return rep;
}

IdentificationReport identify_3x3_means(const MomentTable& m, const Roles3x3& r,
                                        const IdentOptions& o) {
  if (m.n_instruments() != 3 || m.n_treatments() != 3)
    throw AssumptionViolated("3x3 design needs three instrument values and three treatments");
  check_roles(m, {r.z0, r.z1, r.z2}, {r.t0, r.t1, r.t2});
  auto rep = start(m, "3x3");
  rep.assumptions = {"strict one-to-one targeting", "instrument validity"};
  ReportBuilder b(rep, o, 3);
  const auto g = groups_3x3(r);
  Fmt f{m};
  const int z0 = r.z0, z1 = r.z1, z2 = r.z2, t0 = r.t0, t1 = r.t1, t2 = r.t2;
  auto diff = [&](int t, int za, int zb, const std::vector<ResponseVector>& grp) {
    b.mean(t, grp, m.E(za, t) - m.E(zb, t), m.P(za, t) - m.P(zb, t),
           "(" + f.E(za, t) + " - " + f.E(zb, t) + ") / (" + f.P(za, t) + " - " + f.P(zb, t) +
               ")");
  };
  b.mean(t1, {g.A1}, m.E(z2, t1), m.P(z2, t1), f.E(z2, t1) + " / " + f.P(z2, t1));
  b.mean(t2, {g.A2}, m.E(z1, t2), m.P(z1, t2), f.E(z1, t2) + " / " + f.P(z1, t2));
  diff(t0, z0, z1, {g.C010, g.C012});
  diff(t0, z0, z2, {g.C002, g.C012});
  diff(t1, z1, z0, {g.C010, g.C012, g.C212});
  diff(t1, z0, z2, {g.C112});
  diff(t2, z2, z0, {g.C002, g.C012, g.C112});
  diff(t2, z0, z1, {g.C212});
  b.mean(t0, {g.A0, g.C010}, m.E(z2, t0), m.P(z2, t0), f.E(z2, t0) + " / " + f.P(z2, t0));
  b.mean(t0, {g.A0, g.C002}, m.E(z1, t0), m.P(z1, t0), f.E(z1, t0) + " / " + f.P(z1, t0));

  return rep;
}

IdentificationReport identify_3x3_tsls(const MomentTable& m, const Roles3x3& r) {
  if (m.n_instruments() != 3 || m.n_treatments() != 3)
    throw AssumptionViolated("3x3 design needs three instrument values and three treatments");
  auto rep = start(m, "3x3");
  rep.assumptions = {"instrument validity"};
  const int t1 = r.t1, t2 = r.t2;
  try {
    auto ts = tsls_3x3(m, r);
    Estimand e1, e2;
    e1.name = "beta(" + index_token(t1, 3) + ")";
    e1.value = ts.beta1;
    e1.formula = "IV of Y on 1(T=" + m.treatments()[t1] + "), 1(T=" + m.treatments()[t2] +
                 ") with instrument dummies";
    e2 = e1;
    e2.name = "beta(" + index_token(t2, 3) + ")";
    e2.value = ts.beta2;
    rep.estimands.push_back(e1);
    rep.estimands.push_back(e2);
  } catch (const RankDeficient& ex) {
    rep.suppressed.push_back({"beta", ex.what(), 0.0});
  }
  return rep;
}

IdentificationReport ate_3x3_homog(const MomentTable& m, const Roles3x3& r,
                                   const IdentOptions& o) {
  if (m.n_instruments() != 3 || m.n_treatments() != 3)
    throw AssumptionViolated("3x3 design needs three instrument values and three treatments");
  check_roles(m, {r.z0, r.z1, r.z2}, {r.t0, r.t1, r.t2});
  auto rep = start(m, "3x3");
  rep.assumptions = {"strict one-to-one targeting", "instrument validity"};
  ReportBuilder b(rep, o, 3);
  const auto g = groups_3x3(r);
  Fmt f{m};
  const int z0 = r.z0, z1 = r.z1, z2 = r.z2, t0 = r.t0, t1 = r.t1, t2 = r.t2;
  auto P = [&](int z, int t) { return m.P(z, t); };
  auto E = [&](int z, int t) { return m.E(z, t); };

  const double p112 = P(z0, t1) - P(z2, t1);  // Pr(C112)
  const double p212 = P(z0, t2) - P(z1, t2);  // Pr(C212)
  const double m1_112 = E(z0, t1) - E(z2, t1);  // E[Y(t1) 1(C112)]
  const double m2_212 = E(z0, t2) - E(z1, t2);  // E[Y(t2) 1(C212)]

  {
    const std::string name = effect_name(t1, t0, {g.C010, g.C012}, 3);
    const double den = P(z0, t0) - P(z1, t0);
    if (b.denominator_ok(name, p112) && b.denominator_ok(name, den)) {
      const double num = E(z1, t1) - E(z0, t1) - p212 / p112 * m1_112 - (E(z0, t0) - E(z1, t0));
      b.effect(t1, t0, {g.C010, g.C012}, num, den,
               "[" + f.E(z1, t1) + " - " + f.E(z0, t1) + " - (" + f.P(z0, t2) + " - " +
                   f.P(z1, t2) + ")/(" + f.P(z0, t1) + " - " + f.P(z2, t1) + ") (" +
                   f.E(z0, t1) + " - " + f.E(z2, t1) + ") - (" + f.E(z0, t0) + " - " +
                   f.E(z1, t0) + ")] / (" + f.P(z0, t0) + " - " + f.P(z1, t0) + ")",
               "E[Y(t1)|C112] = E[Y(t1)|C212]");
    }
  }
  {
    const std::string name = effect_name(t2, t0, {g.C002, g.C012}, 3);
    const double den = P(z0, t0) - P(z2, t0);
    if (b.denominator_ok(name, p212) && b.denominator_ok(name, den)) {
      const double num = E(z2, t2) - E(z0, t2) - p112 / p212 * m2_212 - (E(z0, t0) - E(z2, t0));
      b.effect(t2, t0, {g.C002, g.C012}, num, den,
               "[" + f.E(z2, t2) + " - " + f.E(z0, t2) + " - (" + f.P(z0, t1) + " - " +
                   f.P(z2, t1) + ")/(" + f.P(z0, t2) + " - " + f.P(z1, t2) + ") (" +
                   f.E(z0, t2) + " - " + f.E(z1, t2) + ") - (" + f.E(z0, t0) + " - " +
                   f.E(z2, t0) + ")] / (" + f.P(z0, t0) + " - " + f.P(z2, t0) + ")",
               "E[Y(t2)|C112] = E[Y(t2)|C212]");
    }
  }
  {
    const std::string name = effect_name(t1, t2, {g.C112, g.C212}, 3);
    if (b.denominator_ok(name, p112) && b.denominator_ok(name, p212)) {
      b.effect(t1, t2, {g.C112, g.C212}, m1_112 / p112 - m2_212 / p212, 1.0,
               "(" + f.E(z0, t1) + " - " + f.E(z2, t1) + ")/(" + f.P(z0, t1) + " - " +
                   f.P(z2, t1) + ") - (" + f.E(z0, t2) + " - " + f.E(z1, t2) + ")/(" +
                   f.P(z0, t2) + " - " + f.P(z1, t2) + ")",
               "E[Y(t1)|C112] = E[Y(t1)|C212] and E[Y(t2)|C112] = E[Y(t2)|C212]");
    }
  }
  return rep;
}

namespace {

void check_det(double det, double scale, const std::string& what) {
  if (!(std::abs(det) >= 1e-10 * scale))
    throw RankDeficient(what + " is rank deficient (det " + std::to_string(det) + ")");
}

void solve_w(TslsResult& out) {
  const double det = out.W[0][0] * out.W[1][1] - out.W[0][1] * out.W[1][0];
  const double scale = std::hypot(out.W[0][0], out.W[0][1]) * std::hypot(out.W[1][0], out.W[1][1]);
  check_det(det, scale, "group-weighted TSLS system");
  out.beta1 = (out.rhs[0] * out.W[1][1] - out.W[0][1] * out.rhs[1]) / det;
  out.beta2 = (out.W[0][0] * out.rhs[1] - out.W[1][0] * out.rhs[0]) / det;
}

}  // namespace

TslsResult tsls_3x3(const MomentTable& m, const Roles3x3& r) {
  check_roles(m, {r.z0, r.z1, r.z2}, {r.t0, r.t1, r.t2});
  Eigen::Matrix3d X;
  Eigen::Vector3d y;
  const int zs[3] = {r.z0, r.z1, r.z2};
  double scale = 1;
  for (int k = 0; k < 3; ++k) {
    X(k, 0) = 1;
    X(k, 1) = m.P(zs[k], r.t1);
    X(k, 2) = m.P(zs[k], r.t2);
    y(k) = m.outcome_mean(zs[k]);
    scale *= X.row(k).norm();
  }
  check_det(X.determinant(), scale, "first-stage score matrix");
  Eigen::Vector3d beta = X.fullPivLu().solve(y);
  TslsResult out;
  out.route = "moments";
  out.beta0 = beta(0);
  out.beta1 = beta(1);
  out.beta2 = beta(2);
  out.W[0][0] = m.P(r.z1, r.t1) - m.P(r.z0, r.t1);
  out.W[0][1] = -(m.P(r.z0, r.t2) - m.P(r.z1, r.t2));
  out.W[1][0] = -(m.P(r.z0, r.t1) - m.P(r.z2, r.t1));
  out.W[1][1] = m.P(r.z2, r.t2) - m.P(r.z0, r.t2);
  out.rhs[0] = m.outcome_mean(r.z1) - m.outcome_mean(r.z0);
  out.rhs[1] = m.outcome_mean(r.z2) - m.outcome_mean(r.z0);
  return out;
}

TslsResult tsls_3x3(const GroupTable& g, const Roles3x3& r) {
  if (g.n_instruments() != 3 || g.n_arms() != 3)
    throw AssumptionViolated("3x3 design needs three instrument values and three treatments");
  const auto G = groups_3x3(r);
  const std::vector<ResponseVector> c1 = {G.C010, G.C012, G.C212}, c2 = {G.C002, G.C012, G.C112};
  TslsResult out;
  out.route = "groups";
  out.W[0][0] = g.prob(c1);
  out.W[0][1] = -g.prob({G.C212});
  out.W[1][0] = -g.prob({G.C112});
  out.W[1][1] = g.prob(c2);
  out.rhs[0] = (g.mass(r.t1, c1) - g.mass(r.t0, c1)) -
               (g.mass(r.t2, {G.C212}) - g.mass(r.t0, {G.C212}));
  out.rhs[1] = (g.mass(r.t2, c2) - g.mass(r.t0, c2)) -
               (g.mass(r.t1, {G.C112}) - g.mass(r.t0, {G.C112}));
  solve_w(out);
  // Intercept from the reference instrument row.
  double ey = 0, p1 = 0, p2 = 0;
  const double n = static_cast<double>(g.n_units());
  for (const auto& [code, s] : g.groups()) {
    auto v = ResponseVector::decode(code, 3, 3);
    const int t = v.t[r.z0];
    ey += s.sum[t] / n;
    if (t == r.t1) p1 += s.count / n;
    if (t == r.t2) p2 += s.count / n;
  }
  out.beta0 = ey - out.beta1 * p1 - out.beta2 * p2;
  return out;
}

TslsDecomposition tsls_decomposition(const GroupTable& g, const Roles3x3& r) {
  const auto G = groups_3x3(r);
  // Complier sets for each targeted treatment: every group moved into t_k by some value.
  const std::vector<ResponseVector> k1 = {G.C010, G.C012, G.C212, G.C112};
  const std::vector<ResponseVector> k2 = {G.C002, G.C012, G.C112, G.C212};
  TslsDecomposition d;
  d.late1 = g.effect(r.t1, r.t0, k1);
  d.late2 = g.effect(r.t2, r.t0, k2);
  const double p112 = g.prob({G.C112}), p212 = g.prob({G.C212});
  double k = 0;
  if (p112 > 0) k += (g.effect(r.t1, r.t0, {G.C112}) - d.late1) * p112;
  if (p212 > 0) k += (g.effect(r.t2, r.t0, {G.C212}) - d.late2) * p212;
  auto ts = tsls_3x3(g, r);
  const double det = ts.W[0][0] * ts.W[1][1] - ts.W[0][1] * ts.W[1][0];
  // beta - late = -W^{-1} (k, k)
  d.bias1 = -(k * ts.W[1][1] - ts.W[0][1] * k) / det;
  d.bias2 = -(ts.W[0][0] * k - ts.W[1][0] * k) / det;
  return d;
}

}  // namespace targetiv
