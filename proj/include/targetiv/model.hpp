#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "targetiv/errors.hpp"

namespace targetiv {

// Sentinel for "treatment never chosen at this instrument value".
inline constexpr double NEG_INF = -std::numeric_limits<double>::infinity();

// Ordered, duplicate-free list of opaque labels.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::string& operator[](std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }

  // Throws InvalidInput for unknown labels.
  int index_of(const std::string& label) const;
  std::optional<int> find(const std::string& label) const;

  bool operator==(const LabelSet& o) const { return labels_ == o.labels_; }

 private:
  std::vector<std::string> labels_;
};

// Treatment labels plus the reference (untreated) treatment.
class TreatmentSet : public LabelSet {
 public:
  TreatmentSet() = default;
  TreatmentSet(std::vector<std::string> labels, const std::string& reference);
  TreatmentSet(std::vector<std::string> labels, int reference = 0);

  int reference() const { return reference_; }
  const std::string& reference_label() const { return (*this)[reference_]; }

  bool operator==(const TreatmentSet& o) const {
    return LabelSet::operator==(o) && reference_ == o.reference_;
  }

 private:
  int reference_ = 0;
};

using InstrumentSet = LabelSet;

// Dense row-major table, rows are instruments and columns treatments.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

// U_z(t): mean utility of treatment t when Z = z. NEG_INF marks an unavailable arm.
class MeanValueMatrix {
 public:
  MeanValueMatrix() = default;
  MeanValueMatrix(TreatmentSet treatments, InstrumentSet instruments, Grid<double> values);

  const TreatmentSet& treatments() const { return treatments_; }
  const InstrumentSet& instruments() const { return instruments_; }
  double operator()(int z, int t) const { return values_(z, t); }
  const Grid<double>& values() const { return values_; }
  std::size_t n_treatments() const { return treatments_.size(); }
  std::size_t n_instruments() const { return instruments_.size(); }

 private:
  TreatmentSet treatments_;
  InstrumentSet instruments_;
  Grid<double> values_;
};

// Delta_z(t) = U_z(t) - U_z(t0). Arithmetic on NEG_INF follows IEEE rules.
Grid<double> relative_means(const MeanValueMatrix& u);

// Many-to-one coarsening of treatments into observed treatments.
class FilterMap {
 public:
  FilterMap() = default;
  // image[t] is an index into observed. Every observed label must be hit.
  FilterMap(std::size_t n_treatments, TreatmentSet observed, std::vector<int> image);

  const TreatmentSet& observed() const { return observed_; }
  int operator()(int t) const { return image_.at(t); }
  const std::vector<int>& image() const { return image_; }
  std::size_t n_treatments() const { return image_.size(); }
  std::vector<int> preimage(int d) const;

 private:
  TreatmentSet observed_;
  std::vector<int> image_;
};

// Token used for treatment index i in group names; dotted when indices exceed one digit.
std::string index_token(int i, std::size_t n_treatments);

// r(z) for every instrument value, indexed by instrument position.
struct ResponseVector {
  std::vector<int> t;

  std::size_t size() const { return t.size(); }
  int operator[](std::size_t z) const { return t[z]; }
  bool constant() const;
  // "A_i" for constant vectors, "C_..." otherwise, tokens in instrument order.
  std::string name(std::size_t n_treatments) const;
  std::uint64_t code(std::size_t n_treatments) const;
  static ResponseVector decode(std::uint64_t code, std::size_t n_instruments,
                               std::size_t n_treatments);

  auto operator<=>(const ResponseVector&) const = default;
};

// Pattern over response vectors. allowed[z] is a bitmask of admissible treatments.
struct CompositeResponseVector {
  std::vector<std::uint64_t> allowed;

  static CompositeResponseVector wildcard(std::size_t n_instruments, std::size_t n_treatments);
  CompositeResponseVector& fix(std::size_t z, int t);

  bool matches(const ResponseVector& r) const;
  std::vector<ResponseVector> expand(std::size_t n_treatments) const;
  // '*' for wildcards, '{...}' for proper subsets.
  std::string name(std::size_t n_treatments) const;

  auto operator<=>(const CompositeResponseVector&) const = default;
};

ResponseVector apply_filter(const ResponseVector& r, const FilterMap& m);

// Enumerates every vector in T^Z in lexicographic order.
std::vector<ResponseVector> all_response_vectors(std::size_t n_instruments,
                                                 std::size_t n_treatments);

// Population or sample moments: P(t|z) and E[Y 1(T=t) | Z=z].
class MomentTable {
 public:
  static constexpr double kExactTolerance = 1e-12;
  static constexpr double kEstimatedTolerance = 1e-9;

  MomentTable() = default;
  MomentTable(TreatmentSet treatments, InstrumentSet instruments, Grid<double> scores,
              Grid<double> averages, std::vector<double> unit_count,
              double tolerance = kExactTolerance);

  const TreatmentSet& treatments() const { return treatments_; }
  const InstrumentSet& instruments() const { return instruments_; }
  std::size_t n_treatments() const { return treatments_.size(); }
  std::size_t n_instruments() const { return instruments_.size(); }

  double P(int z, int t) const { return scores_(z, t); }
  double E(int z, int t) const { return averages_(z, t); }
  // E[Y | Z = z], the sum of E over treatments.
  double outcome_mean(int z) const;
  double unit_count(int z) const { return unit_count_.at(z); }
  double tolerance() const { return tolerance_; }

  const Grid<double>& scores() const { return scores_; }
  const Grid<double>& averages() const { return averages_; }
  const std::vector<double>& unit_counts() const { return unit_count_; }

 private:
  TreatmentSet treatments_;
  InstrumentSet instruments_;
  Grid<double> scores_, averages_;
  std::vector<double> unit_count_;
  double tolerance_ = kExactTolerance;
};

// Aggregates treatment-level moments to observed-treatment moments.
MomentTable filter_moments(const MomentTable& m, const FilterMap& f);

// Pools instrument values. groups[k] lists the source instruments of new value k;
// scores are averaged with unit_count weights.
MomentTable merge_instruments(const MomentTable& m, const std::vector<std::vector<int>>& groups,
                              const std::vector<std::string>& labels);

struct ModelSpec {
  MeanValueMatrix U;
  std::optional<FilterMap> filter;
};

}  // namespace targetiv
