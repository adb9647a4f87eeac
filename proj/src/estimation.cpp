#include "targetiv/estimation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <set>
#include <sstream>

#include "targetiv/parallel.hpp"
#include "targetiv/rng.hpp"
#include "targetiv/simulator.hpp"

namespace targetiv {

namespace {

// One CSV record; handles quoted fields with doubled quotes.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  std::string cur;
  bool quoted = false, any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          cur += '"';
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        cur += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c == '\n') {
      ++line;
      fields.push_back(cur);
      return true;
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field at line " + std::to_string(line + 1));
  if (!any) return false;
  fields.push_back(cur);
  return true;
}

}  // namespace

Dataset Dataset::subset_cell(const std::string& label) const {
  if (cell.empty()) throw InvalidInput("dataset has no grouping column");
  Dataset out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (cell[i] != label) continue;
    out.y.push_back(y[i]);
    out.arm.push_back(arm[i]);
    out.z.push_back(z[i]);
    if (clustered()) out.cluster.push_back(cluster[i]);
    out.cell.push_back(cell[i]);
  }
  return out;
}

std::vector<std::string> Dataset::cells() const {
  std::set<std::string> s(cell.begin(), cell.end());
  return {s.begin(), s.end()};
}

Dataset parse_dataset(std::istream& in, const DatasetSchema& schema) {
  std::vector<std::string> header, rec;
  std::size_t line = 0;
  if (!read_record(in, header, line)) throw ParseError("empty data file");
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cy = col(schema.y), ca = col(schema.arm), cz = col(schema.z);
  std::optional<std::size_t> cc, ce;
  if (schema.cluster) cc = col(*schema.cluster);
  if (schema.cell) ce = col(*schema.cell);
  Dataset d;
  std::size_t row = 0;
  while (read_record(in, rec, line)) {
    ++row;
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != header.size())
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(rec.size()));
    double y;
    try {
      std::size_t pos = 0;
      y = std::stod(rec[cy], &pos);
      if (pos != rec[cy].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("row " + std::to_string(row) + ": outcome '" + rec[cy] + "' is not a number");
    }
    if (!std::isfinite(y)) throw ParseError("row " + std::to_string(row) + ": non-finite outcome");
    if (rec[ca].empty() || rec[cz].empty())
      throw ParseError("row " + std::to_string(row) + ": empty treatment or instrument");
    d.y.push_back(y);
    d.arm.push_back(rec[ca]);
    d.z.push_back(rec[cz]);
    if (cc) d.cluster.push_back(rec[*cc]);
    if (ce) d.cell.push_back(rec[*ce]);
  }
  return d;
}

Dataset load_dataset(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open data file '" + path + "'");
  return parse_dataset(in, schema);
}

Dataset dataset_from_population(const Population& pop, bool filtered) {
  if (filtered && !pop.spec.filter) throw InvalidInput("population model has no filter");
  const auto& tl = pop.spec.U.treatments();
  const auto& zl = pop.spec.U.instruments();
  Dataset d;
  d.y = pop.y;
  d.arm.reserve(pop.n);
  d.z.reserve(pop.n);
  const bool clustered = std::any_of(pop.cluster.begin(), pop.cluster.end(),
                                     [](std::int64_t c) { return c >= 0; });
  for (std::size_t i = 0; i < pop.n; ++i) {
    d.arm.push_back(filtered ? pop.spec.filter->observed()[(*pop.spec.filter)(pop.t[i])]
                             : tl[pop.t[i]]);
    d.z.push_back(zl[pop.z[i]]);
    if (clustered) d.cluster.push_back(std::to_string(pop.cluster[i]));
  }
  return d;
}

std::vector<std::string> labels_in_order(const std::vector<std::string>& column) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& s : column)
    if (seen.insert(s).second) out.push_back(s);
  return out;
}

namespace {

struct Indexed {
  std::vector<int> zi, ti;
};

Indexed index_rows(const Dataset& d, const TreatmentSet& T, const InstrumentSet& Z) {
  Indexed x;
  x.zi.reserve(d.size());
  x.ti.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto t = T.find(d.arm[i]);
    auto z = Z.find(d.z[i]);
    if (!t) throw InvalidInput("row " + std::to_string(i + 1) + ": unknown treatment '" + d.arm[i] + "'");
    if (!z) throw InvalidInput("row " + std::to_string(i + 1) + ": unknown instrument '" + d.z[i] + "'");
    x.ti.push_back(*t);
    x.zi.push_back(*z);
  }
  return x;
}

// Returns nullopt when some instrument value has no rows.
std::optional<MomentTable> moments_from_sums(const TreatmentSet& T, const InstrumentSet& Z,
                                             const std::vector<double>& count,
                                             const std::vector<double>& sum) {
  const auto nz = Z.size(), nt = T.size();
  Grid<double> P(nz, nt), E(nz, nt);
  std::vector<double> nzc(nz, 0.0);
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t t = 0; t < nt; ++t) nzc[z] += count[z * nt + t];
    if (nzc[z] == 0) return std::nullopt;
    for (std::size_t t = 0; t < nt; ++t) {
      P(z, t) = count[z * nt + t] / nzc[z];
      E(z, t) = sum[z * nt + t] / nzc[z];
    }
  }
  return MomentTable(T, Z, P, E, nzc, MomentTable::kEstimatedTolerance);
}

}  // namespace

MomentTable empirical_moments(const Dataset& d, const TreatmentSet& T, const InstrumentSet& Z) {
  auto x = index_rows(d, T, Z);
  const auto nt = T.size();
  std::vector<double> count(Z.size() * nt, 0.0), sum(Z.size() * nt, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    count[x.zi[i] * nt + x.ti[i]] += 1;
    sum[x.zi[i] * nt + x.ti[i]] += d.y[i];
  }
  auto m = moments_from_sums(T, Z, count, sum);
  if (!m) throw InvalidInput("some instrument value has no observations");
  return *m;
}

RelevanceResult check_relevance(const Dataset& d, const TreatmentSet& T, const InstrumentSet& Z) {
  auto x = index_rows(d, T, Z);
  if (d.size() == 0) throw InvalidInput("empty dataset");
  RelevanceResult r;
  r.matrix = Grid<double>(Z.size(), T.size(), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i)
    r.matrix(x.zi[i], x.ti[i]) += 1.0 / static_cast<double>(d.size());
  Eigen::MatrixXd M(Z.size(), T.size());
  for (std::size_t a = 0; a < Z.size(); ++a)
    for (std::size_t b = 0; b < T.size(); ++b) M(a, b) = r.matrix(a, b);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  const double tol = 1e-10 * (sv.size() ? sv(0) : 0.0);
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    r.singular_values.push_back(sv(k));
    if (sv(k) > tol) ++r.rank;
  }
  r.full_rank = r.rank == std::min(Z.size(), T.size());
  return r;
}

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return std::nan("");
  const double h = (static_cast<double>(v.size()) - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

const BootEstimate* BootstrapResult::find(const std::string& name) const {
  for (const auto& e : estimates)
    if (e.name == name) return &e;
  return nullptr;
}

BootstrapResult bootstrap(const Dataset& d, const TreatmentSet& T, const InstrumentSet& Z,
                          const Routine& routine, const BootstrapOptions& opts) {
  if (opts.B < 1) throw InvalidInput("bootstrap needs at least one replicate");
  if (opts.cluster && !d.clustered()) throw InvalidInput("cluster bootstrap needs a cluster column");
  auto x = index_rows(d, T, Z);
  const auto nt = T.size(), cells = Z.size() * nt;

  // Canonical row order.
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    return std::make_tuple(d.clustered() ? d.cluster[i] : std::string(), x.zi[i], x.ti[i], d.y[i]);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

  // Resampling units: clusters, or single rows.
  struct Entry {
    int cell;
    double y;
  };
  std::vector<std::vector<Entry>> units;
  if (opts.cluster) {
    std::string last;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto i = order[k];
      if (k == 0 || d.cluster[i] != last) {
        units.emplace_back();
        last = d.cluster[i];
      }
      units.back().push_back({x.zi[i] * static_cast<int>(nt) + x.ti[i], d.y[i]});
    }
  } else {
    units.reserve(order.size());
    for (auto i : order) units.push_back({{x.zi[i] * static_cast<int>(nt) + x.ti[i], d.y[i]}});
  }

  BootstrapResult res;
  res.B = static_cast<std::size_t>(opts.B);
  res.n_rows = d.size();
  res.n_clusters = units.size();
  res.point = routine(empirical_moments(d, T, Z));

  std::vector<std::string> names;
  for (const auto& e : res.point.estimands) names.push_back(e.name);
  for (const auto& iv : res.point.intervals) {
    names.push_back(iv.name + ".lo");
    names.push_back(iv.name + ".hi");
  }
  const std::size_t K = names.size(), B = res.B;
  std::vector<double> draws(B * K, std::nan(""));
  std::vector<char> failed(B, 0);

  parallel_chunks(B, 8, opts.threads, [&](std::size_t, std::size_t b0, std::size_t b1) {
    std::vector<double> count(cells), sum(cells);
    for (std::size_t b = b0; b < b1; ++b) {
      std::fill(count.begin(), count.end(), 0.0);
      std::fill(sum.begin(), sum.end(), 0.0);
      CounterStream rs(opts.seed, 7, b);
      for (std::size_t k = 0; k < units.size(); ++k) {
        const auto& u = units[rs.below(units.size())];
        for (const auto& e : u) {
          count[e.cell] += 1;
          sum[e.cell] += e.y;
        }
      }
      auto m = moments_from_sums(T, Z, count, sum);
      if (!m) {
        failed[b] = 1;
        continue;
      }
      try {
        auto rep = routine(*m);
        for (std::size_t k = 0; k < K; ++k) {
          const std::string& nm = names[k];
          if (auto* e = rep.find(nm)) {
            draws[b * K + k] = e->value;
            continue;
          }
          const bool lo = nm.size() > 3 && nm.compare(nm.size() - 3, 3, ".lo") == 0;
          const bool hi = nm.size() > 3 && nm.compare(nm.size() - 3, 3, ".hi") == 0;
          if (lo || hi)
            if (auto* iv = rep.find_interval(nm.substr(0, nm.size() - 3)))
              draws[b * K + k] = lo ? iv->lo : iv->hi;
        }
      } catch (const Error&) {
        failed[b] = 1;
      }
    }
  });
  for (char f : failed) res.replicate_failures += f;

  const double alpha = 1 - opts.level;
  auto point_of = [&](std::size_t k) {
    const std::string& nm = names[k];
    if (auto* e = res.point.find(nm)) return e->value;
    auto* iv = res.point.find_interval(nm.substr(0, nm.size() - 3));
    return nm.back() == 'o' ? iv->lo : iv->hi;
  };
  for (std::size_t k = 0; k < K; ++k) {
    BootEstimate be;
    be.name = names[k];
    be.point = point_of(k);
    std::vector<double> v;
    for (std::size_t b = 0; b < B; ++b) {
      double x = draws[b * K + k];
      if (std::isfinite(x)) v.push_back(x);
    }
    be.successes = v.size();
    be.failures = B - v.size();
    std::sort(v.begin(), v.end());
    if (v.size() > 1) {
      double mean = 0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0;
      for (double x : v) ss += (x - mean) * (x - mean);
      be.se = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    be.lo = quantile_sorted(v, alpha / 2);
    be.hi = quantile_sorted(v, 1 - alpha / 2);
    be.estimable = be.successes > 0;
    be.unstable = be.failure_rate() > opts.max_failure_rate;
    res.estimates.push_back(be);
  }
  for (const auto& s : res.point.suppressed) {
    BootEstimate be;
    be.name = s.name;
    be.point = std::nan("");
    be.se = be.lo = be.hi = std::nan("");
    be.estimable = false;
    res.estimates.push_back(be);
  }
  return res;
}

std::map<std::string, BootstrapResult> bootstrap_by_cell(const Dataset& d, const TreatmentSet& T,
                                                         const InstrumentSet& Z,
                                                         const Routine& routine,
                                                         const BootstrapOptions& opts) {
  std::map<std::string, BootstrapResult> out;
  for (const auto& c : d.cells()) out.emplace(c, bootstrap(d.subset_cell(c), T, Z, routine, opts));
  return out;
}

}  // namespace targetiv
