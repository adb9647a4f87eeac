#include "targetiv/simulator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "targetiv/parallel.hpp"
#include "targetiv/rng.hpp"

namespace targetiv {

namespace {

constexpr std::size_t kChunk = 16384;

enum Stream : std::uint32_t { kShocks = 0, kOutcome = 1, kAssign = 2, kCluster = 3 };

void check_len(const std::vector<double>& v, std::size_t n, const char* what) {
  if (v.size() != n)
    throw InvalidInput(std::string(what) + " has " + std::to_string(v.size()) +
                       " entries, expected " + std::to_string(n));
}

}  // namespace

ErrorSpec ErrorSpec::independent_normal(std::vector<double> mean, std::vector<double> sd) {
  ErrorSpec e;
  e.family = Family::IndependentNormal;
  e.mean = std::move(mean);
  e.sd = std::move(sd);
  return e;
}

ErrorSpec ErrorSpec::correlated_normal(std::vector<double> mean, Grid<double> cov) {
  ErrorSpec e;
  e.family = Family::CorrelatedNormal;
  e.mean = std::move(mean);
  e.cov = std::move(cov);
  return e;
}

ErrorSpec ErrorSpec::uniform_box(std::vector<double> lo, std::vector<double> hi) {
  ErrorSpec e;
  e.family = Family::UniformBox;
  e.lo = std::move(lo);
  e.hi = std::move(hi);
  return e;
}

ErrorSpec ErrorSpec::custom(std::string name, int n_uniforms,
                            std::function<void(const double*, double*)> fn,
                            std::vector<double> center) {
  ErrorSpec e;
  e.family = Family::Transform;
  e.transform_name = std::move(name);
  e.n_uniforms = n_uniforms;
  e.transform = std::move(fn);
  e.transform_center = std::move(center);
  return e;
}

ErrorSpec ErrorSpec::quantile(const std::string& name, std::vector<double> location,
                              std::vector<double> scale) {
  if (location.size() != scale.size()) throw InvalidInput("location and scale lengths differ");
  for (double s : scale)
    if (!(s > 0)) throw AssumptionViolated("quantile transform needs positive scale");
  const std::size_t k = location.size();
  std::vector<double> center = location;
  std::function<void(const double*, double*)> fn;
  if (name == "gumbel") {
    constexpr double euler_gamma = 0.57721566490153286061;
    for (std::size_t j = 0; j < k; ++j) center[j] += euler_gamma * scale[j];
    fn = [location, scale, k](const double* v, double* out) {
      for (std::size_t j = 0; j < k; ++j) out[j] = location[j] - scale[j] * std::log(-std::log(v[j]));
    };
  } else if (name == "logistic") {
    fn = [location, scale, k](const double* v, double* out) {
      for (std::size_t j = 0; j < k; ++j) out[j] = location[j] + scale[j] * std::log(v[j] / (1 - v[j]));
    };
  } else {
    throw InvalidInput("unknown quantile transform '" + name + "'");
  }
  return custom(name, static_cast<int>(k), fn, center);
}

std::vector<double> ErrorSpec::center(std::size_t nt) const {
  switch (family) {
    case Family::IndependentNormal:
    case Family::CorrelatedNormal:
      return mean;
    case Family::UniformBox: {
      std::vector<double> c(nt);
      for (std::size_t j = 0; j < nt; ++j) c[j] = 0.5 * (lo[j] + hi[j]);
      return c;
    }
    case Family::Transform:
      return transform_center.empty() ? std::vector<double>(nt, 0.0) : transform_center;
  }
  return {};
}

void ErrorSpec::validate(std::size_t nt) const {
  auto degenerate = [&](const std::string& msg) {
    if (!allow_degenerate) throw AssumptionViolated("degenerate error law: " + msg);
  };
  switch (family) {
    case Family::IndependentNormal:
      check_len(mean, nt, "mean");
      check_len(sd, nt, "sd");
      for (double s : sd) {
        if (!(s >= 0)) throw InvalidInput("negative standard deviation");
        if (s == 0) degenerate("zero standard deviation");
      }
      break;
    case Family::CorrelatedNormal: {
      check_len(mean, nt, "mean");
      if (cov.rows() != nt || cov.cols() != nt) throw InvalidInput("covariance shape mismatch");
      Eigen::MatrixXd c(nt, nt);
      for (std::size_t a = 0; a < nt; ++a)
        for (std::size_t b = 0; b < nt; ++b) c(a, b) = cov(a, b);
      if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1 + c.cwiseAbs().maxCoeff()))
        throw InvalidInput("covariance is not symmetric");
      for (std::size_t a = 0; a < nt; ++a)
        if (!(c(a, a) > 0)) degenerate("non-positive variance");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
      if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()))
        throw InvalidInput("covariance is not positive semi-definite");
      break;
    }
    case Family::UniformBox:
      check_len(lo, nt, "lo");
      check_len(hi, nt, "hi");
      for (std::size_t j = 0; j < nt; ++j) {
        if (hi[j] < lo[j]) throw InvalidInput("uniform box with hi < lo");
        if (hi[j] == lo[j]) degenerate("zero-width uniform box");
      }
      break;
    case Family::Transform:
      if (!transform) throw InvalidInput("transform family without a transform");
      if (n_uniforms < 0) throw InvalidInput("negative uniform count");
      if (!transform_center.empty()) check_len(transform_center, nt, "center");
      break;
  }
}

OutcomeSpec OutcomeSpec::selection(std::vector<double> mu, std::vector<double> lambda,
                                   std::vector<double> noise) {
  OutcomeSpec o;
  const auto k = mu.size();
  check_len(lambda, k, "selection loading");
  check_len(noise, k, "noise");
  o.mu = std::move(mu);
  o.noise = std::move(noise);
  o.loading = Grid<double>(k, k, 0.0);
  for (std::size_t a = 0; a < k; ++a) o.loading(a, a) = lambda[a];
  return o;
}

ResponseVector Population::response(std::size_t i) const {
  ResponseVector r;
  r.t.assign(t_cf.begin() + i * nz, t_cf.begin() + (i + 1) * nz);
  return r;
}

namespace {

class ShockSampler {
 public:
  ShockSampler(const ErrorSpec& e, std::size_t nt) : e_(e), nt_(nt) {
    e.validate(nt);
    if (e.family == ErrorSpec::Family::CorrelatedNormal) {
      Eigen::MatrixXd c(nt, nt);
      for (std::size_t a = 0; a < nt; ++a)
        for (std::size_t b = 0; b < nt; ++b) c(a, b) = e.cov(a, b);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
      Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      factor_ = es.eigenvectors() * root.asDiagonal();
    }
  }

  void draw(CounterStream& rs, double* out) const {
    switch (e_.family) {
      case ErrorSpec::Family::IndependentNormal:
        for (std::size_t j = 0; j < nt_; ++j) out[j] = e_.mean[j] + e_.sd[j] * rs.normal();
        break;
      case ErrorSpec::Family::CorrelatedNormal: {
        Eigen::VectorXd g(nt_);
        for (std::size_t j = 0; j < nt_; ++j) g[j] = rs.normal();
        Eigen::VectorXd x = factor_ * g;
        for (std::size_t j = 0; j < nt_; ++j) out[j] = e_.mean[j] + x[j];
        break;
      }
      case ErrorSpec::Family::UniformBox:
        for (std::size_t j = 0; j < nt_; ++j)
          out[j] = e_.lo[j] + (e_.hi[j] - e_.lo[j]) * rs.uniform();
        break;
      case ErrorSpec::Family::Transform: {
        std::vector<double> v(e_.n_uniforms);
        for (auto& x : v) x = rs.uniform();
        e_.transform(v.data(), out);
        break;
      }
    }
  }

 private:
  const ErrorSpec& e_;
  std::size_t nt_;
  Eigen::MatrixXd factor_;
};

// Everything needed to realize unit i deterministically.
struct UnitDrawer {
  const ModelSpec& spec;
  const OutcomeSpec& out;
  const SimulationOptions& opts;
  std::size_t nz, nt;
  std::vector<double> center;
  std::vector<double> z_cum;
  std::vector<int> arm_of;  // treatment -> outcome arm

  UnitDrawer(const ModelSpec& s, const OutcomeSpec& o, const SimulationOptions& op,
             std::vector<double> c)
      : spec(s), out(o), opts(op), nz(s.U.n_instruments()), nt(s.U.n_treatments()),
        center(std::move(c)) {
    std::size_t arms = nt;
    if (o.filtered_arms) {
      if (!s.filter) throw InvalidInput("filtered outcome arms need a filter in the model");
      arms = s.filter->observed().size();
      arm_of = s.filter->image();
    } else {
      arm_of.resize(nt);
      std::iota(arm_of.begin(), arm_of.end(), 0);
    }
    check_len(o.mu, arms, "outcome mu");
    check_len(o.noise, arms, "outcome noise");
    if (o.loading.rows() != arms || o.loading.cols() != nt)
      throw InvalidInput("outcome loading must be arms x treatments");
    if (o.center) center = *o.center;
    check_len(center, nt, "outcome center");
    for (double s : o.noise)
      if (!(s >= 0)) throw InvalidInput("negative outcome noise");
    if (o.common_noise < 0 || o.cluster_noise < 0) throw InvalidInput("negative outcome noise");

    std::vector<double> p = op.z_probs;
    if (p.empty()) p.assign(nz, 1.0 / static_cast<double>(nz));
    check_len(p, nz, "z_probs");
    double tot = 0;
    for (double x : p) {
      if (!(x >= 0)) throw InvalidInput("negative instrument probability");
      tot += x;
    }
    if (std::abs(tot - 1) > 1e-9) throw InvalidInput("instrument probabilities must sum to one");
    double acc = 0;
    for (double x : p) z_cum.push_back(acc += x);
    z_cum.back() = 1.0;
  }

  std::int64_t cluster_of(std::size_t i) const {
    return opts.cluster_size ? static_cast<std::int64_t>(i / opts.cluster_size) : -1;
  }

  // u must already hold the shocks of unit i.
  void realize(std::size_t i, const double* u, int* tcf, double* ycf, int& z, int& t, double& y,
               std::int64_t& cl, std::size_t& ties) const {
    for (std::size_t zz = 0; zz < nz; ++zz) {
      double best = NEG_INF;
      int bi = -1;
      bool tie = false;
      for (std::size_t tt = 0; tt < nt; ++tt) {
        double v = spec.U(static_cast<int>(zz), static_cast<int>(tt)) + u[tt];
        if (v > best) {
          best = v;
          bi = static_cast<int>(tt);
          tie = false;
        } else if (v == best && std::isfinite(v)) {
          tie = true;
        }
      }
      tcf[zz] = bi;
      ties += tie;
    }
    const std::size_t arms = out.mu.size();
    CounterStream rs(opts.seed, kOutcome, i);
    double ya[64];
    std::vector<double> big;
    double* yv = ya;
    if (arms > 64) {
      big.resize(arms);
      yv = big.data();
    }
    for (std::size_t a = 0; a < arms; ++a) {
      double v = out.mu[a];
      for (std::size_t s = 0; s < nt; ++s) {
        double w = out.loading(a, s);
        if (w != 0) v += w * (u[s] - center[s]);
      }
      double e = rs.normal();
      if (out.noise[a] != 0) v += out.noise[a] * e;
      yv[a] = v;
    }
    const double h = rs.normal();
    cl = cluster_of(i);
    double k = 0;
    if (out.cluster_noise != 0 && cl >= 0)
      k = CounterStream(opts.seed, kCluster, static_cast<std::uint64_t>(cl)).normal();
    for (std::size_t tt = 0; tt < nt; ++tt)
      ycf[tt] = yv[arm_of[tt]] + out.common_noise * h + out.cluster_noise * k;

    const std::uint64_t az = cl >= 0 ? static_cast<std::uint64_t>(cl) : i;
    const double r = CounterStream(opts.seed, kAssign, az).uniform();
    z = static_cast<int>(std::upper_bound(z_cum.begin(), z_cum.end(), r) - z_cum.begin());
    if (z >= static_cast<int>(nz)) z = static_cast<int>(nz) - 1;
    t = tcf[z];
    y = ycf[t];
  }
};

Population empty_population(const ModelSpec& spec, std::size_t n) {
  Population p;
  p.spec = spec;
  p.n = n;
  p.nz = spec.U.n_instruments();
  p.nt = spec.U.n_treatments();
  p.u.assign(n * p.nt, 0.0);
  p.t_cf.assign(n * p.nz, 0);
  p.y_cf.assign(n * p.nt, 0.0);
  p.z.assign(n, 0);
  p.t.assign(n, 0);
  p.y.assign(n, 0.0);
  p.cluster.assign(n, -1);
  return p;
}

// Fills units [begin, end) of the global index space into pop rows starting at base.
void fill_units(Population& pop, const UnitDrawer& d, const ShockSampler* sampler,
                std::size_t begin, std::size_t end, std::size_t base, int threads) {
  const std::size_t len = end - begin;
  std::vector<std::size_t> ties(n_chunks(len, kChunk), 0);
  parallel_chunks(len, kChunk, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const std::size_t i = begin + k, row = base + k;
      double* u = &pop.u[row * pop.nt];
      if (sampler) {
        CounterStream rs(d.opts.seed, kShocks, i);
        sampler->draw(rs, u);
      }
      d.realize(i, u, &pop.t_cf[row * pop.nz], &pop.y_cf[row * pop.nt], pop.z[row], pop.t[row],
                pop.y[row], pop.cluster[row], ties[c]);
    }
  });
  for (auto x : ties) pop.ties += x;
}

struct MomentPartial {
  std::vector<std::int64_t> count;
  std::vector<double> sum;
};

void moment_partial(const Population& pop, std::size_t b, std::size_t e, MomentPartial& out) {
  out.count.assign(pop.nz * pop.nt, 0);
  out.sum.assign(pop.nz * pop.nt, 0.0);
  for (std::size_t i = b; i < e; ++i)
    for (std::size_t z = 0; z < pop.nz; ++z) {
      const int t = pop.T(i, z);
      out.count[z * pop.nt + t]++;
      out.sum[z * pop.nt + t] += pop.Y(i, t);
    }
}

MomentTable moments_from_partials(const Population& pop, const std::vector<MomentPartial>& parts,
                                  std::size_t n) {
  std::vector<std::int64_t> count(pop.nz * pop.nt, 0);
  std::vector<double> sum(pop.nz * pop.nt, 0.0);
  for (const auto& p : parts)
    for (std::size_t k = 0; k < count.size(); ++k) {
      count[k] += p.count[k];
      sum[k] += p.sum[k];
    }
  Grid<double> P(pop.nz, pop.nt), E(pop.nz, pop.nt);
  const double nn = static_cast<double>(n);
  for (std::size_t z = 0; z < pop.nz; ++z)
    for (std::size_t t = 0; t < pop.nt; ++t) {
      P(z, t) = static_cast<double>(count[z * pop.nt + t]) / nn;
      E(z, t) = sum[z * pop.nt + t] / nn;
    }
  return MomentTable(pop.spec.U.treatments(), pop.spec.U.instruments(), P, E,
                     std::vector<double>(pop.nz, nn), MomentTable::kExactTolerance);
}

void group_partial(const Population& pop, std::size_t b, std::size_t e, GroupTable& g) {
  for (std::size_t i = b; i < e; ++i) {
    auto& s = g.groups()[pop.response(i).code(pop.nt)];
    if (s.sum.empty()) {
      s.sum.assign(pop.nt, 0.0);
      s.defined.assign(pop.nt, 0.0);
    }
    s.count += 1;
    for (std::size_t t = 0; t < pop.nt; ++t) {
      s.sum[t] += pop.Y(i, t);
      s.defined[t] += 1;
    }
  }
}

void group_partial_filtered(const Population& pop, const FilterMap& f, std::size_t b,
                            std::size_t e, GroupTable& g) {
  const std::size_t nd = f.observed().size();
  std::vector<std::vector<int>> pre(nd);
  for (std::size_t d = 0; d < nd; ++d) pre[d] = f.preimage(static_cast<int>(d));
  for (std::size_t i = b; i < e; ++i) {
    ResponseVector r = apply_filter(pop.response(i), f);
    auto& s = g.groups()[r.code(nd)];
    if (s.sum.empty()) {
      s.sum.assign(nd, 0.0);
      s.defined.assign(nd, 0.0);
    }
    s.count += 1;
    bool amb = false;
    for (std::size_t d = 0; d < nd; ++d) {
      // Y^D_i(d): outcome under the first instrument value sending i to d, or the common
      // value of Y over the preimage when outcomes only depend on the observed arm.
      std::optional<double> v;
      for (std::size_t z = 0; z < pop.nz; ++z) {
        if (r.t[z] != static_cast<int>(d)) continue;
        double yz = pop.Y(i, pop.T(i, z));
        if (!v) v = yz;
        else if (yz != *v) amb = true;
      }
      if (!v) {
        double y0 = pop.Y(i, pre[d].front());
        bool same = std::all_of(pre[d].begin(), pre[d].end(),
                                [&](int t) { return pop.Y(i, t) == y0; });
        if (same) v = y0;
      }
      if (v) {
        s.sum[d] += *v;
        s.defined[d] += 1;
      }
    }
    g.ambiguous += amb;
  }
}

template <class F>
GroupTable chunked_groups(const Population& pop, std::size_t arms, int threads, F f) {
  std::vector<GroupTable> parts(n_chunks(pop.n, kChunk),
                                GroupTable(pop.n, pop.nz, arms));
  parallel_chunks(pop.n, kChunk, threads,
                  [&](std::size_t c, std::size_t b, std::size_t e) { f(pop, b, e, parts[c]); });
  GroupTable g(pop.n, pop.nz, arms);
  for (const auto& p : parts) g.merge(p);
  return g;
}

}  // namespace

Population draw_population(const ModelSpec& spec, const ErrorSpec& errors,
                           const OutcomeSpec& outcomes, std::size_t n,
                           const SimulationOptions& opts) {
  if (n == 0) throw InvalidInput("population size must be positive");
  const auto nt = spec.U.n_treatments();
  ShockSampler sampler(errors, nt);
  UnitDrawer d(spec, outcomes, opts, errors.center(nt));
  Population pop = empty_population(spec, n);
  fill_units(pop, d, &sampler, 0, n, 0, opts.threads);
  return pop;
}

Population population_from_errors(const ModelSpec& spec, const Grid<double>& shocks,
                                  const OutcomeSpec& outcomes, const SimulationOptions& opts) {
  const auto nt = spec.U.n_treatments();
  if (shocks.cols() != nt) throw InvalidInput("shock rows must have one entry per treatment");
  if (shocks.rows() == 0) throw InvalidInput("population size must be positive");
  std::vector<double> center(nt, 0.0);
  for (std::size_t i = 0; i < shocks.rows(); ++i)
    for (std::size_t t = 0; t < nt; ++t) center[t] += shocks(i, t) / static_cast<double>(shocks.rows());
  UnitDrawer d(spec, outcomes, opts, center);
  Population pop = empty_population(spec, shocks.rows());
  pop.u = shocks.data();
  fill_units(pop, d, nullptr, 0, pop.n, 0, opts.threads);
  return pop;
}

Classification classify_units(const Population& pop, const TargetingStructure& ts) {
  Classification c;
  c.response.resize(pop.n);
  for (std::size_t i = 0; i < pop.n; ++i) c.response[i] = pop.response(i).code(pop.nt);
  auto strict = check_strict(ts);
  if (!strict.holds || !check_reference(ts).holds) return c;
  c.classes_defined = true;
  c.classes = enumerate_classes(ts);
  std::map<std::pair<std::uint64_t, int>, int> lookup;
  auto mask_of = [&](const std::vector<int>& A) {
    std::uint64_t m = 0;
    for (int z : A) m |= std::uint64_t{1} << z;
    return m;
  };
  for (std::size_t k = 0; k < c.classes.size(); ++k)
    lookup[{mask_of(c.classes[k].A), c.classes[k].tau}] = static_cast<int>(k);

  c.class_index.assign(pop.n, -1);
  c.delta_star.assign(pop.n, 0.0);
  c.tau_star.assign(pop.n, 0);
  for (std::size_t i = 0; i < pop.n; ++i) {
    double ds = NEG_INF;
    int tau = 0;
    for (std::size_t t = 0; t < pop.nt; ++t) {
      double v = strict.delta_low[t] + pop.shock(i, t);
      if (v > ds) {
        ds = v;
        tau = static_cast<int>(t);
      }
    }
    std::uint64_t m = 0;
    for (int z : ts.z_star) {
      double vs = NEG_INF;
      for (int t : ts.t_bar[z]) vs = std::max(vs, ts.delta_bar[t] + pop.shock(i, t));
      if (vs > ds) m |= std::uint64_t{1} << z;
    }
    c.delta_star[i] = ds;
    c.tau_star[i] = tau;
    auto it = lookup.find({m, tau});
    if (it == lookup.end()) {
      c.inconsistent++;
      continue;
    }
    c.class_index[i] = it->second;
    if (!c.classes[it->second].admits(pop.response(i))) c.inconsistent++;
  }
  return c;
}

GroupStat GroupTable::aggregate(const std::vector<ResponseVector>& members) const {
  GroupStat s;
  s.sum.assign(na_, 0.0);
  s.defined.assign(na_, 0.0);
  const std::size_t base = na_;
  for (const auto& r : members) {
    auto it = groups_.find(r.code(base));
    if (it == groups_.end()) continue;
    s.count += it->second.count;
    for (std::size_t a = 0; a < na_; ++a) {
      s.sum[a] += it->second.sum[a];
      s.defined[a] += it->second.defined[a];
    }
  }
  return s;
}

double GroupTable::prob(const std::vector<ResponseVector>& members) const {
  return aggregate(members).count / static_cast<double>(n_units_);
}

double GroupTable::mean(int arm, const std::vector<ResponseVector>& members) const {
  auto s = aggregate(members);
  if (s.defined.at(arm) == 0) return std::nan("");
  return s.sum[arm] / s.defined[arm];
}

double GroupTable::effect(int arm, int base, const std::vector<ResponseVector>& members) const {
  return mean(arm, members) - mean(base, members);
}

double GroupTable::mass(int arm, const std::vector<ResponseVector>& members) const {
  return aggregate(members).sum.at(arm) / static_cast<double>(n_units_);
}

void GroupTable::merge(const GroupTable& o) {
  for (const auto& [k, v] : o.groups_) {
    auto& s = groups_[k];
    if (s.sum.empty()) {
      s.sum.assign(na_, 0.0);
      s.defined.assign(na_, 0.0);
    }
    s.count += v.count;
    for (std::size_t a = 0; a < na_; ++a) {
      s.sum[a] += v.sum[a];
      s.defined[a] += v.defined[a];
    }
  }
  ambiguous += o.ambiguous;
}

GroupTable oracle_group_stats(const Population& pop, int threads) {
  return chunked_groups(pop, pop.nt, threads, group_partial);
}

GroupTable oracle_group_stats_filtered(const Population& pop, int threads) {
  if (!pop.spec.filter) throw InvalidInput("population model has no filter");
  return oracle_group_stats_filtered(pop, *pop.spec.filter, threads);
}

GroupTable oracle_group_stats_filtered(const Population& pop, const FilterMap& f, int threads) {
  if (f.n_treatments() != pop.nt) throw InvalidInput("filter does not match the population");
  return chunked_groups(pop, f.observed().size(), threads,
                        [&f](const Population& p, std::size_t b, std::size_t e, GroupTable& g) {
                          group_partial_filtered(p, f, b, e, g);
                        });
}

MomentTable oracle_moments(const Population& pop, int threads) {
  std::vector<MomentPartial> parts(n_chunks(pop.n, kChunk));
  parallel_chunks(pop.n, kChunk, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    moment_partial(pop, b, e, parts[c]);
  });
  return moments_from_partials(pop, parts, pop.n);
}

MomentTable oracle_moments_filtered(const Population& pop, int threads) {
  if (!pop.spec.filter) throw InvalidInput("population model has no filter");
  return filter_moments(oracle_moments(pop, threads), *pop.spec.filter);
}

std::vector<FlowWitness> two_way_flows(const Population& pop, bool filtered) {
  if (filtered && !pop.spec.filter) throw InvalidInput("population model has no filter");
  const std::size_t na = filtered ? pop.spec.filter->observed().size() : pop.nt;
  auto arm = [&](std::size_t i, std::size_t z) {
    int t = pop.T(i, z);
    return filtered ? (*pop.spec.filter)(t) : t;
  };
  std::vector<FlowWitness> out;
  for (std::size_t z = 0; z < pop.nz; ++z)
    for (std::size_t z2 = z + 1; z2 < pop.nz; ++z2) {
      std::vector<char> seen(na * na, 0);
      for (std::size_t i = 0; i < pop.n; ++i) {
        int a = arm(i, z), b = arm(i, z2);
        if (a != b) seen[a * na + b] = 1;
      }
      for (std::size_t a = 0; a < na; ++a)
        for (std::size_t b = a + 1; b < na; ++b)
          if (seen[a * na + b] && seen[b * na + a])
            out.push_back({static_cast<int>(z), static_cast<int>(z2), static_cast<int>(a),
                           static_cast<int>(b)});
    }
  return out;
}

StreamSummary stream_population(const ModelSpec& spec, const ErrorSpec& errors,
                                const OutcomeSpec& outcomes, std::size_t n,
                                const SimulationOptions& opts) {
  if (n == 0) throw InvalidInput("population size must be positive");
  const auto nt = spec.U.n_treatments();
  ShockSampler sampler(errors, nt);
  UnitDrawer d(spec, outcomes, opts, errors.center(nt));
  // Batches are whole multiples of the chunk so partials line up with draw_population.
  const std::size_t batch = kChunk * 64;
  std::vector<MomentPartial> parts;
  StreamSummary s;
  s.n = n;
  s.groups = GroupTable(n, spec.U.n_instruments(), nt);
  Population proto = empty_population(spec, std::min(n, batch));
  for (std::size_t b = 0; b < n; b += batch) {
    const std::size_t e = std::min(n, b + batch);
    Population chunk = proto;
    chunk.n = e - b;
    chunk.ties = 0;
    fill_units(chunk, d, &sampler, b, e, 0, opts.threads);
    s.ties += chunk.ties;
    const std::size_t nc = n_chunks(chunk.n, kChunk);
    std::vector<MomentPartial> mp(nc);
    std::vector<GroupTable> gp(nc, GroupTable(n, spec.U.n_instruments(), nt));
    parallel_chunks(chunk.n, kChunk, opts.threads,
                    [&](std::size_t c, std::size_t lo, std::size_t hi) {
                      moment_partial(chunk, lo, hi, mp[c]);
                      group_partial(chunk, lo, hi, gp[c]);
                    });
    for (auto& m : mp) parts.push_back(std::move(m));
    for (auto& g : gp) s.groups.merge(g);
  }
  s.oracle = moments_from_partials(proto, parts, n);
  return s;
}

}  // namespace targetiv
