#include "targetiv/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace targetiv {

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_json(const json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path == "-" || path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  out << text;
}

std::string config_hash(const json& j) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double number_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf" || s == "-Infinity") return NEG_INF;
    if (s == "inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
  }
  throw ParseError(what + ": expected a number, got " + j.dump());
}

json number_to_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  return v;
}

namespace {

std::vector<std::string> labels_from(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) throw ParseError(std::string("missing array '") + key + "'");
  std::vector<std::string> out;
  for (const auto& x : j[key]) {
    if (x.is_string()) out.push_back(x.get<std::string>());
    else if (x.is_number_integer()) out.push_back(std::to_string(x.get<long long>()));
    else throw ParseError(std::string("labels in '") + key + "' must be strings");
  }
  return out;
}

// Rows by instrument, columns by treatment: nested objects keyed by label or a matrix.
Grid<double> grid_from(const json& j, const LabelSet& rows, const LabelSet& cols,
                       const std::string& what, double fill = std::nan("")) {
  Grid<double> g(rows.size(), cols.size(), fill);
  if (j.is_array()) {
    if (j.size() != rows.size()) throw ParseError(what + ": wrong number of rows");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!j[r].is_array() || j[r].size() != cols.size())
        throw ParseError(what + ": wrong number of columns in row " + std::to_string(r));
      for (std::size_t c = 0; c < cols.size(); ++c) g(r, c) = number_from_json(j[r][c], what);
    }
  } else if (j.is_object()) {
    for (const auto& [rk, row] : j.items()) {
      auto r = rows.find(rk);
      if (!r) throw ParseError(what + ": unknown row label '" + rk + "'");
      if (!row.is_object()) throw ParseError(what + ": row '" + rk + "' must be an object");
      for (const auto& [ck, v] : row.items()) {
        auto c = cols.find(ck);
        if (!c) throw ParseError(what + ": unknown column label '" + ck + "'");
        g(*r, *c) = number_from_json(v, what);
      }
    }
  } else {
    throw ParseError(what + ": expected an object or a matrix");
  }
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (std::isnan(g(r, c)))
        throw ParseError(what + ": missing entry for (" + rows[r] + ", " + cols[c] + ")");
  return g;
}

json grid_to(const Grid<double>& g, const LabelSet& rows, const LabelSet& cols) {
  json out = json::object();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    json row = json::object();
    for (std::size_t c = 0; c < cols.size(); ++c) row[cols[c]] = number_to_json(g(r, c));
    out[rows[r]] = row;
  }
  return out;
}

// Scalar (broadcast), array, or object keyed by label.
std::vector<double> vector_from(const json& j, const LabelSet& labels, const std::string& what) {
  std::vector<double> v(labels.size(), std::nan(""));
  if (j.is_number() || j.is_string()) {
    std::fill(v.begin(), v.end(), number_from_json(j, what));
  } else if (j.is_array()) {
    if (j.size() != labels.size()) throw ParseError(what + ": expected " + std::to_string(labels.size()) + " entries");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = number_from_json(j[i], what);
  } else if (j.is_object()) {
    for (const auto& [k, x] : j.items()) {
      auto i = labels.find(k);
      if (!i) throw ParseError(what + ": unknown label '" + k + "'");
      v[*i] = number_from_json(x, what);
    }
    for (std::size_t i = 0; i < v.size(); ++i)
      if (std::isnan(v[i])) throw ParseError(what + ": missing entry for '" + labels[i] + "'");
  } else {
    throw ParseError(what + ": expected a number, array or object");
  }
  return v;
}

json vector_to(const std::vector<double>& v, const LabelSet& labels) {
  json o = json::object();
  for (std::size_t i = 0; i < v.size(); ++i) o[labels[i]] = number_to_json(v[i]);
  return o;
}

std::string reference_from(const json& j, const std::vector<std::string>& labels, const char* key) {
  if (!j.contains(key)) return labels.empty() ? std::string() : labels.front();
  if (!j[key].is_string()) throw ParseError(std::string("'") + key + "' must be a label");
  return j[key].get<std::string>();
}

template <class F>
auto wrap_parse(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad JSON field: ") + e.what());
  }
}

json names_of(const std::vector<ResponseVector>& g, std::size_t na) {
  json a = json::array();
  for (const auto& r : g) a.push_back(r.name(na));
  return a;
}

json labels_of(const std::vector<int>& idx, const LabelSet& s) {
  json a = json::array();
  for (int i : idx) a.push_back(s[i]);
  return a;
}

}  // namespace

ModelSpec model_from_json(const json& j) {
  return wrap_parse([&] {
    if (!j.is_object()) throw ParseError("model must be a JSON object");
    auto tl = labels_from(j, "treatments");
    auto zl = labels_from(j, "instruments");
    TreatmentSet T(tl, reference_from(j, tl, "reference"));
    InstrumentSet Z(zl);
    if (!j.contains("U")) throw ParseError("model has no 'U'");
    ModelSpec m{MeanValueMatrix(T, Z, grid_from(j["U"], Z, T, "U")), std::nullopt};
    if (j.contains("filter") && !j["filter"].is_null()) {
      const auto& f = j["filter"];
      if (!f.is_object()) throw ParseError("filter must map treatments to observed labels");
      const json& map = f.contains("map") ? f["map"] : f;
      std::vector<std::string> dl;
      if (f.contains("observed")) dl = labels_from(f, "observed");
      std::vector<std::string> image(T.size());
      for (const auto& [k, v] : map.items()) {
        if (k == "observed" || k == "observed_reference") continue;
        auto t = T.find(k);
        if (!t) throw ParseError("filter: unknown treatment '" + k + "'");
        if (!v.is_string()) throw ParseError("filter: observed labels must be strings");
        image[*t] = v.get<std::string>();
      }
      for (std::size_t t = 0; t < T.size(); ++t)
        if (image[t].empty()) throw ParseError("filter: no image for treatment '" + T[t] + "'");
      if (dl.empty()) {
        // Order of first appearance along the treatment order.
        for (const auto& d : image)
          if (std::find(dl.begin(), dl.end(), d) == dl.end()) dl.push_back(d);
      }
      std::string dref = f.contains("observed_reference") ? f["observed_reference"].get<std::string>()
                                                          : image[T.reference()];
      TreatmentSet D(dl, dref);
      std::vector<int> idx(T.size());
      for (std::size_t t = 0; t < T.size(); ++t) idx[t] = D.index_of(image[t]);
      m.filter = FilterMap(T.size(), D, idx);
    }
    return m;
  });
}

json to_json(const ModelSpec& m) {
  const auto& T = m.U.treatments();
  json j;
  j["treatments"] = T.labels();
  j["reference"] = T.reference_label();
  j["instruments"] = m.U.instruments().labels();
  j["U"] = grid_to(m.U.values(), m.U.instruments(), T);
  if (m.filter) {
    json f = json::object();
    for (std::size_t t = 0; t < T.size(); ++t) f[T[t]] = m.filter->observed()[(*m.filter)(static_cast<int>(t))];
    j["filter"] = f;
  } else {
    j["filter"] = nullptr;
  }
  return j;
}

MomentTable moments_from_json(const json& j) {
  return wrap_parse([&] {
    if (!j.is_object()) throw ParseError("moments must be a JSON object");
    auto tl = labels_from(j, "treatments");
    auto zl = labels_from(j, "instruments");
    TreatmentSet T(tl, reference_from(j, tl, "reference"));
    InstrumentSet Z(zl);
    if (!j.contains("P") || !j.contains("E")) throw ParseError("moments need 'P' and 'E'");
    auto P = grid_from(j["P"], Z, T, "P");
    auto E = grid_from(j["E"], Z, T, "E");
    std::vector<double> n(Z.size(), 1.0);
    if (j.contains("unit_count")) n = vector_from(j["unit_count"], Z, "unit_count");
    double tol = MomentTable::kExactTolerance;
    if (j.contains("tolerance")) tol = j["tolerance"].get<double>();
    return MomentTable(T, Z, P, E, n, tol);
  });
}

json to_json(const MomentTable& m) {
  json j;
  j["treatments"] = m.treatments().labels();
  j["reference"] = m.treatments().reference_label();
  j["instruments"] = m.instruments().labels();
  j["P"] = grid_to(m.scores(), m.instruments(), m.treatments());
  j["E"] = grid_to(m.averages(), m.instruments(), m.treatments());
  j["unit_count"] = vector_to(m.unit_counts(), m.instruments());
  j["tolerance"] = m.tolerance();
  return j;
}

RoleLabels roles_from_json(const json& j) {
  RoleLabels r;
  if (!j.is_object() || !j.contains("roles")) return r;
  return wrap_parse([&] {
    const auto& x = j["roles"];
    if (x.contains("z")) r.z = labels_from(x, "z");
    if (x.contains("t")) r.t = labels_from(x, "t");
    else if (x.contains("d")) r.t = labels_from(x, "d");
    return r;
  });
}

ErrorSpec errors_from_json(const json& j, const TreatmentSet& T) {
  return wrap_parse([&] {
    if (!j.is_object()) throw ParseError("errors must be a JSON object");
    const std::string fam = j.value("family", std::string("independent_normal"));
    auto vec = [&](const char* key, double dflt) {
      if (!j.contains(key)) return std::vector<double>(T.size(), dflt);
      return vector_from(j[key], T, key);
    };
    ErrorSpec e;
    if (fam == "independent_normal") {
      e = ErrorSpec::independent_normal(vec("mean", 0.0), vec("sd", 1.0));
    } else if (fam == "correlated_normal") {
      if (!j.contains("cov")) throw ParseError("correlated_normal needs 'cov'");
      e = ErrorSpec::correlated_normal(vec("mean", 0.0), grid_from(j["cov"], T, T, "cov"));
    } else if (fam == "uniform_box") {
      e = ErrorSpec::uniform_box(vec("lo", -1.0), vec("hi", 1.0));
    } else if (fam == "gumbel" || fam == "logistic") {
      e = ErrorSpec::quantile(fam, vec("location", 0.0), vec("scale", 1.0));
    } else {
      throw ParseError("unknown error family '" + fam + "'");
    }
    e.allow_degenerate = j.value("allow_degenerate", false);
    return e;
  });
}

OutcomeSpec default_outcomes(const ModelSpec& m, bool filtered_arms) {
  const std::size_t nt = m.U.n_treatments();
  if (!filtered_arms) {
    std::vector<double> mu(nt);
    for (std::size_t t = 0; t < nt; ++t) mu[t] = static_cast<double>(t);
    return OutcomeSpec::selection(mu, std::vector<double>(nt, 0.5), std::vector<double>(nt, 1.0));
  }
  const auto& f = *m.filter;
  const std::size_t nd = f.observed().size();
  OutcomeSpec o;
  o.filtered_arms = true;
  o.mu.resize(nd);
  o.noise.assign(nd, 1.0);
  o.loading = Grid<double>(nd, nt, 0.0);
  for (std::size_t d = 0; d < nd; ++d) {
    o.mu[d] = static_cast<double>(d);
    auto pre = f.preimage(static_cast<int>(d));
    for (int t : pre) o.loading(d, t) = 0.5 / static_cast<double>(pre.size());
  }
  return o;
}

OutcomeSpec outcomes_from_json(const json& j, const ModelSpec& m) {
  return wrap_parse([&] {
    if (!j.is_object()) throw ParseError("outcomes must be a JSON object");
    bool filtered = m.filter.has_value();
    if (j.contains("arms")) {
      const auto a = j["arms"].get<std::string>();
      if (a == "observed") filtered = true;
      else if (a == "treatment") filtered = false;
      else throw ParseError("outcomes.arms must be 'treatment' or 'observed'");
    }
    if (filtered && !m.filter) throw ParseError("observed-arm outcomes need a filter in the model");
    const TreatmentSet& T = m.U.treatments();
    const TreatmentSet& A = filtered ? m.filter->observed() : T;
    OutcomeSpec o = default_outcomes(m, filtered);
    if (j.contains("mu")) o.mu = vector_from(j["mu"], A, "mu");
    if (j.contains("noise")) o.noise = vector_from(j["noise"], A, "noise");
    if (j.contains("selection")) {
      auto lam = vector_from(j["selection"], A, "selection");
      o.loading = Grid<double>(A.size(), T.size(), 0.0);
      for (std::size_t a = 0; a < A.size(); ++a) {
        if (!filtered) {
          o.loading(a, a) = lam[a];
          continue;
        }
        auto pre = m.filter->preimage(static_cast<int>(a));
        for (int t : pre) o.loading(a, t) = lam[a] / static_cast<double>(pre.size());
      }
    }
    if (j.contains("loading")) o.loading = grid_from(j["loading"], A, T, "loading");
    o.common_noise = j.value("common_noise", 0.0);
    o.cluster_noise = j.value("cluster_noise", 0.0);
    if (j.contains("center")) o.center = vector_from(j["center"], T, "center");
    return o;
  });
}

json to_json(const TargetingStructure& ts) {
  const auto& T = ts.treatments;
  const auto& Z = ts.instruments;
  json j;
  j["eps"] = ts.eps;
  j["delta"] = grid_to(ts.delta, Z, T);
  json bar = json::object(), zbar = json::object();
  for (std::size_t t = 0; t < T.size(); ++t) {
    bar[T[t]] = number_to_json(ts.delta_bar[t]);
    zbar[T[t]] = labels_of(ts.z_bar[t], Z);
  }
  j["delta_bar"] = bar;
  j["z_bar"] = zbar;
  j["targeted"] = labels_of(ts.targeted, T);
  j["z_star"] = labels_of(ts.z_star, Z);
  j["z_zero"] = labels_of(ts.z_zero, Z);
  json tb = json::object();
  for (std::size_t z = 0; z < Z.size(); ++z) tb[Z[z]] = labels_of(ts.t_bar[z], T);
  j["t_bar"] = tb;
  j["warnings"] = ts.warnings;
  return j;
}

json to_json(const AssumptionVerdict& v) {
  json j;
  j["holds"] = v.holds;
  json w = json::array();
  for (const auto& x : v.witnesses) w.push_back({{"z", x.z}, {"t", x.t}});
  j["witnesses"] = w;
  j["detail"] = v.detail;
  return j;
}

json to_json(const OneToOneVerdict& v) {
  return {{"holds", v.holds()}, {"part_i", to_json(v.part_i)}, {"part_ii", to_json(v.part_ii)}};
}

json to_json(const StrictVerdict& v) {
  json j = to_json(static_cast<const AssumptionVerdict&>(v));
  json d = json::array();
  for (double x : v.delta_low) d.push_back(number_to_json(x));
  j["delta_low"] = d;
  return j;
}

json to_json(const ClassSpec& c, const TargetingStructure& ts) {
  json j;
  j["name"] = c.name;
  j["A"] = labels_of(c.A, ts.instruments);
  j["tau"] = ts.treatments[c.tau];
  j["resolved"] = c.resolved;
  json a = json::object();
  for (std::size_t z = 0; z < c.assignment.size(); ++z)
    a[ts.instruments[z]] = labels_of(c.assignment[z], ts.treatments);
  j["assignment"] = a;
  return j;
}

json to_json(const ExclusionSet& e, std::size_t nt) {
  json el = json::array(), co = json::array();
  for (const auto& r : e.elemental) el.push_back(r.name(nt));
  for (const auto& c : e.composite) co.push_back(c.name(nt));
  return {{"elemental", el}, {"composite", co}};
}

json to_json(const EquivalenceResult& e, std::size_t nt) {
  json j;
  j["equivalent"] = e.equivalent;
  auto pats = [&](const std::vector<CompositeResponseVector>& v) {
    json a = json::array();
    for (const auto& c : v) a.push_back(c.name(nt));
    return a;
  };
  j["monotonicity_patterns"] = pats(e.monotonicity_patterns);
  j["irrelevance_patterns"] = pats(e.irrelevance_patterns);
  j["monotonicity_excluded"] = names_of(e.monotonicity_excluded, nt);
  j["irrelevance_excluded"] = names_of(e.irrelevance_excluded, nt);
  j["survivors"] = names_of(e.survivors, nt);
  j["classes"] = names_of(e.classes, nt);
  return j;
}

json to_json(const IdentifyingSystem& s, const TargetingStructure& ts) {
  json j;
  json cls = json::array();
  for (const auto& c : s.classes) cls.push_back(c.name);
  j["classes"] = cls;
  json cells = json::array();
  for (auto [z, t] : s.cells) cells.push_back("P(" + ts.treatments[t] + "|" + ts.instruments[z] + ")");
  j["cells"] = cells;
  json fw = json::array();
  for (std::size_t r = 0; r < s.forward.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < s.forward.cols(); ++c) row.push_back(s.forward(r, c));
    fw.push_back(row);
  }
  j["forward"] = fw;
  j["rank"] = s.rank;
  j["unknowns"] = s.unknowns();
  j["equations"] = s.equations();
  j["unidentified_dimension"] = s.unidentified_dimension();
  auto rat = [](const std::vector<std::vector<Rational>>& rows) {
    json a = json::array();
    for (const auto& r : rows) {
      json row = json::array();
      for (const auto& q : r) row.push_back(to_string(q));
      a.push_back(row);
    }
    return a;
  };
  j["row_basis"] = rat(s.row_basis);
  j["kernel_basis"] = rat(s.kernel_basis);
  json ident = json::array();
  for (std::size_t c = 0; c < s.n_classes(); ++c) {
    std::vector<Rational> e(s.n_classes(), 0);
    e[c] = 1;
    if (s.identifies(e)) ident.push_back(s.classes[c].name);
  }
  j["identified_classes"] = ident;
  return j;
}

json to_json(const IdentificationReport& r) {
  const std::size_t na = r.treatment_labels.size();
  json j;
  j["design"] = r.design;
  j["level"] = r.level;
  j["treatments"] = r.treatment_labels;
  j["instruments"] = r.instrument_labels;
  j["assumptions"] = r.assumptions;
  json es = json::array();
  for (const auto& e : r.estimands) {
    json x;
    x["name"] = e.name;
    x["value"] = number_to_json(e.value);
    x["kind"] = to_string(e.kind);
    x["groups"] = names_of(e.groups, na);
    if (!e.denominator_groups.empty()) x["denominator_groups"] = names_of(e.denominator_groups, na);
    x["formula"] = e.formula;
    if (!e.condition.empty()) x["condition"] = e.condition;
    es.push_back(x);
  }
  j["estimands"] = es;
  json iv = json::array();
  for (const auto& p : r.intervals) {
    json x;
    x["name"] = p.name;
    x["lo"] = number_to_json(p.lo);
    x["hi"] = number_to_json(p.hi);
    x["groups"] = names_of(p.groups, na);
    x["formula"] = p.formula;
    json deps = json::array();
    for (const auto& d : p.dependents) {
      const double a = d.at(p.lo), b = d.at(p.hi);
      deps.push_back({{"name", d.name},
                      {"intercept", number_to_json(d.intercept)},
                      {"slope", d.slope},
                      {"lo", number_to_json(std::min(a, b))},
                      {"hi", number_to_json(std::max(a, b))}});
    }
    x["dependents"] = deps;
    iv.push_back(x);
  }
  j["intervals"] = iv;
  json im = json::array();
  for (const auto& i : r.implications)
    im.push_back({{"description", i.description},
                  {"residual", number_to_json(i.residual)},
                  {"holds", i.holds(1e-12)}});
  j["implications"] = im;
  json su = json::array();
  for (const auto& s : r.suppressed)
    su.push_back({{"name", s.name}, {"reason", s.reason}, {"denominator", number_to_json(s.denominator)}});
  j["suppressed"] = su;
  j["notes"] = r.notes;
  return j;
}

json to_json(const BootstrapResult& b) {
  json j;
  j["point"] = to_json(b.point);
  j["B"] = b.B;
  j["replicate_failures"] = b.replicate_failures;
  j["n_rows"] = b.n_rows;
  j["n_clusters"] = b.n_clusters;
  json es = json::array();
  for (const auto& e : b.estimates) {
    json x;
    x["name"] = e.name;
    x["point"] = number_to_json(e.point);
    x["se"] = number_to_json(e.se);
    x["ci"] = json::array({number_to_json(e.lo), number_to_json(e.hi)});
    x["successes"] = e.successes;
    x["failures"] = e.failures;
    x["failure_rate"] = e.failure_rate();
    x["estimable"] = e.estimable;
    x["unstable"] = e.unstable;
    const auto n = e.name.size();
    if (n > 3 && (e.name.compare(n - 3, 3, ".lo") == 0 || e.name.compare(n - 3, 3, ".hi") == 0))
      x["ci_type"] = "endpoint-wise, not uniform";
    es.push_back(x);
  }
  j["estimates"] = es;
  return j;
}

json to_json(const Roles3x3& r, const TargetingStructure& ts) {
  const auto& Z = ts.instruments;
  const auto& T = ts.treatments;
  return {{"z", {Z[r.z0], Z[r.z1], Z[r.z2]}}, {"t", {T[r.t0], T[r.t1], T[r.t2]}}};
}

}  // namespace targetiv
