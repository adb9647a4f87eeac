#include "targetiv/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace targetiv {

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw InvalidModel("empty label");
    if (!seen.insert(l).second) throw InvalidModel("duplicate label '" + l + "'");
  }
}

std::optional<int> LabelSet::find(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<int>(it - labels_.begin());
}

int LabelSet::index_of(const std::string& label) const {
  auto i = find(label);
  if (!i) throw InvalidInput("unknown label '" + label + "'");
  return *i;
}

TreatmentSet::TreatmentSet(std::vector<std::string> labels, const std::string& reference)
    : LabelSet(std::move(labels)) {
  auto i = find(reference);
  if (!i) throw InvalidModel("reference treatment '" + reference + "' is not a treatment");
  reference_ = *i;
}

TreatmentSet::TreatmentSet(std::vector<std::string> labels, int reference)
    : LabelSet(std::move(labels)), reference_(reference) {
  if (size() == 0) throw InvalidModel("treatment set is empty");
  if (reference < 0 || static_cast<std::size_t>(reference) >= size())
    throw InvalidModel("reference index out of range");
}

MeanValueMatrix::MeanValueMatrix(TreatmentSet treatments, InstrumentSet instruments,
                                 Grid<double> values)
    : treatments_(std::move(treatments)),
      instruments_(std::move(instruments)),
      values_(std::move(values)) {
  if (treatments_.size() < 2) throw InvalidModel("need at least two treatments");
  if (instruments_.size() < 2) throw InvalidModel("need at least two instrument values");
  if (values_.rows() != instruments_.size() || values_.cols() != treatments_.size())
    throw InvalidModel("mean-value matrix shape does not match labels");
  const int t0 = treatments_.reference();
  for (std::size_t z = 0; z < values_.rows(); ++z) {
    for (std::size_t t = 0; t < values_.cols(); ++t) {
      double v = values_(z, t);
      if (std::isnan(v)) throw InvalidModel("NaN in mean-value matrix");
      if (v == std::numeric_limits<double>::infinity())
        throw InvalidModel("+inf in mean-value matrix");
    }
    if (!std::isfinite(values_(z, t0)))
      throw InvalidModel("reference treatment must have finite mean value at instrument '" +
                         instruments_[z] + "'");
  }
}

Grid<double> relative_means(const MeanValueMatrix& u) {
  const int t0 = u.treatments().reference();
  Grid<double> d(u.n_instruments(), u.n_treatments());
  for (std::size_t z = 0; z < u.n_instruments(); ++z)
    for (std::size_t t = 0; t < u.n_treatments(); ++t) d(z, t) = u(z, t) - u(z, t0);
  return d;
}

FilterMap::FilterMap(std::size_t n_treatments, TreatmentSet observed, std::vector<int> image)
    : observed_(std::move(observed)), image_(std::move(image)) {
  if (image_.size() != n_treatments) throw InvalidModel("filter must map every treatment");
  std::vector<bool> hit(observed_.size(), false);
  for (int d : image_) {
    if (d < 0 || static_cast<std::size_t>(d) >= observed_.size())
      throw InvalidModel("filter image out of range");
    hit[d] = true;
  }
  if (std::find(hit.begin(), hit.end(), false) != hit.end())
    throw InvalidModel("filter is not surjective");
}

std::vector<int> FilterMap::preimage(int d) const {
  std::vector<int> out;
  for (std::size_t t = 0; t < image_.size(); ++t)
    if (image_[t] == d) out.push_back(static_cast<int>(t));
  return out;
}

std::string index_token(int i, std::size_t /*n_treatments*/) { return std::to_string(i); }

namespace {

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t n_treatments) {
  std::string out;
  const bool dotted = n_treatments > 10;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (dotted && k > 0) out += '.';
    out += tokens[k];
  }
  return out;
}

}  // namespace

bool ResponseVector::constant() const {
  return std::adjacent_find(t.begin(), t.end(), std::not_equal_to<>()) == t.end();
}

std::string ResponseVector::name(std::size_t n_treatments) const {
  if (constant() && !t.empty()) return "A_" + index_token(t[0], n_treatments);
  std::vector<std::string> tokens;
  for (int x : t) tokens.push_back(index_token(x, n_treatments));
  return "C_" + join_tokens(tokens, n_treatments);
}

std::uint64_t ResponseVector::code(std::size_t n_treatments) const {
  std::uint64_t c = 0;
  for (int x : t) c = c * n_treatments + static_cast<std::uint64_t>(x);
  return c;
}

ResponseVector ResponseVector::decode(std::uint64_t code, std::size_t n_instruments,
                                      std::size_t n_treatments) {
  ResponseVector r;
  r.t.assign(n_instruments, 0);
  for (std::size_t k = n_instruments; k-- > 0;) {
    r.t[k] = static_cast<int>(code % n_treatments);
    code /= n_treatments;
  }
  return r;
}

CompositeResponseVector CompositeResponseVector::wildcard(std::size_t n_instruments,
                                                          std::size_t n_treatments) {
  if (n_treatments > 63) throw InvalidInput("too many treatments for composite patterns");
  CompositeResponseVector c;
  c.allowed.assign(n_instruments, (std::uint64_t{1} << n_treatments) - 1);
  return c;
}

CompositeResponseVector& CompositeResponseVector::fix(std::size_t z, int t) {
  allowed.at(z) = std::uint64_t{1} << t;
  return *this;
}

bool CompositeResponseVector::matches(const ResponseVector& r) const {
  if (r.size() != allowed.size()) return false;
  for (std::size_t z = 0; z < allowed.size(); ++z)
    if (!(allowed[z] >> r.t[z] & 1u)) return false;
  return true;
}

std::vector<ResponseVector> CompositeResponseVector::expand(std::size_t n_treatments) const {
  std::vector<ResponseVector> out;
  for (auto& r : all_response_vectors(allowed.size(), n_treatments))
    if (matches(r)) out.push_back(r);
  return out;
}

std::string CompositeResponseVector::name(std::size_t n_treatments) const {
  const std::uint64_t full = (std::uint64_t{1} << n_treatments) - 1;
  std::vector<std::string> tokens;
  for (auto mask : allowed) {
    if (mask == full) {
      tokens.push_back("*");
      continue;
    }
    std::vector<std::string> members;
    for (std::size_t t = 0; t < n_treatments; ++t)
      if (mask >> t & 1u) members.push_back(index_token(static_cast<int>(t), n_treatments));
    if (members.size() == 1) {
      tokens.push_back(members[0]);
    } else {
      std::string s = "{";
      for (std::size_t k = 0; k < members.size(); ++k) s += (k ? "," : "") + members[k];
      tokens.push_back(s + "}");
    }
  }
  return "C_" + join_tokens(tokens, n_treatments);
}

ResponseVector apply_filter(const ResponseVector& r, const FilterMap& m) {
  ResponseVector out;
  out.t.reserve(r.size());
  for (int t : r.t) out.t.push_back(m(t));
  return out;
}

std::vector<ResponseVector> all_response_vectors(std::size_t n_instruments,
                                                 std::size_t n_treatments) {
  double total = std::pow(static_cast<double>(n_treatments), static_cast<double>(n_instruments));
  if (total > 5e6) throw InvalidInput("response space too large to enumerate");
  std::vector<ResponseVector> out;
  out.reserve(static_cast<std::size_t>(total));
  for (std::uint64_t c = 0; c < static_cast<std::uint64_t>(total); ++c)
    out.push_back(ResponseVector::decode(c, n_instruments, n_treatments));
  return out;
}

MomentTable::MomentTable(TreatmentSet treatments, InstrumentSet instruments, Grid<double> scores,
                         Grid<double> averages, std::vector<double> unit_count, double tolerance)
    : treatments_(std::move(treatments)),
      instruments_(std::move(instruments)),
      scores_(std::move(scores)),
      averages_(std::move(averages)),
      unit_count_(std::move(unit_count)),
      tolerance_(tolerance) {
  const auto nz = instruments_.size(), nt = treatments_.size();
  if (scores_.rows() != nz || scores_.cols() != nt || averages_.rows() != nz ||
      averages_.cols() != nt)
    throw InvalidInput("moment table shape does not match labels");
  if (unit_count_.empty()) unit_count_.assign(nz, 1.0);
  if (unit_count_.size() != nz) throw InvalidInput("unit_count length mismatch");
  for (std::size_t z = 0; z < nz; ++z) {
    double s = 0;
    for (std::size_t t = 0; t < nt; ++t) {
      double p = scores_(z, t);
      if (!std::isfinite(p) || p < -tolerance_ || p > 1 + tolerance_)
        throw InvalidInput("score P(" + treatments_[t] + "|" + instruments_[z] +
                           ") outside [0,1]");
      if (!std::isfinite(averages_(z, t)))
        throw InvalidInput("non-finite outcome moment at instrument '" + instruments_[z] + "'");
      s += p;
    }
    if (unit_count_[z] > 0 && std::abs(s - 1.0) > tolerance_ * static_cast<double>(nt) + 1e-15)
      throw InvalidInput("scores at instrument '" + instruments_[z] + "' do not sum to one");
  }
}

double MomentTable::outcome_mean(int z) const {
  double s = 0;
  for (std::size_t t = 0; t < n_treatments(); ++t) s += averages_(z, t);
  return s;
}

MomentTable filter_moments(const MomentTable& m, const FilterMap& f) {
  if (f.n_treatments() != m.n_treatments())
    throw InvalidInput("filter and moment table disagree on treatments");
  const auto& obs = f.observed();
  Grid<double> P(m.n_instruments(), obs.size()), E(m.n_instruments(), obs.size());
  for (std::size_t z = 0; z < m.n_instruments(); ++z)
    for (std::size_t t = 0; t < m.n_treatments(); ++t) {
      P(z, f(static_cast<int>(t))) += m.P(z, t);
      E(z, f(static_cast<int>(t))) += m.E(z, t);
    }
  return MomentTable(obs, m.instruments(), P, E, m.unit_counts(), m.tolerance());
}

MomentTable merge_instruments(const MomentTable& m, const std::vector<std::vector<int>>& groups,
                              const std::vector<std::string>& labels) {
  if (groups.size() != labels.size()) throw InvalidInput("merge groups and labels differ");
  std::vector<int> used(m.n_instruments(), 0);
  const auto nt = m.n_treatments();
  Grid<double> P(groups.size(), nt), E(groups.size(), nt);
  std::vector<double> count(groups.size(), 0.0);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].empty()) throw InvalidInput("empty merge group");
    double w = 0;
    for (int z : groups[k]) {
      if (z < 0 || static_cast<std::size_t>(z) >= m.n_instruments())
        throw InvalidInput("merge index out of range");
      if (used[z]++) throw InvalidInput("instrument used in two merge groups");
      w += m.unit_count(z);
    }
    if (w <= 0) throw InvalidInput("merged instrument has no units");
    for (int z : groups[k])
      for (std::size_t t = 0; t < nt; ++t) {
        P(k, t) += m.unit_count(z) / w * m.P(z, t);
        E(k, t) += m.unit_count(z) / w * m.E(z, t);
      }
    count[k] = w;
  }
  for (std::size_t z = 0; z < m.n_instruments(); ++z)
    if (!used[z]) throw InvalidInput("instrument '" + m.instruments()[z] + "' not merged");
  return MomentTable(m.treatments(), InstrumentSet(labels), P, E, count, m.tolerance());
}

}  // namespace targetiv
