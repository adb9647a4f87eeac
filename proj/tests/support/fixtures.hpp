#pragma once

#include <string>
#include <vector>

#include "targetiv/model.hpp"

namespace testsupport {

inline std::vector<std::string> digit_labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
  return out;
}

template <class T>
targetiv::Grid<T> grid(const std::vector<std::vector<T>>& rows) {
  targetiv::Grid<T> g(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) g(r, c) = rows[r][c];
  return g;
}

// Rows are instruments "z0", "z1", ...; columns treatments "0", "1", ...
inline targetiv::MeanValueMatrix mean_values(const std::vector<std::vector<double>>& rows) {
  std::vector<std::string> z;
  for (std::size_t i = 0; i < rows.size(); ++i) z.push_back("z" + std::to_string(i));
  return {targetiv::TreatmentSet(digit_labels(rows[0].size()), 0), targetiv::InstrumentSet(z),
          grid(rows)};
}

inline targetiv::MomentTable moments(const std::vector<std::vector<double>>& P,
                                     const std::vector<std::vector<double>>& E) {
  std::vector<std::string> z;
  for (std::size_t i = 0; i < P.size(); ++i) z.push_back("z" + std::to_string(i));
  return {targetiv::TreatmentSet(digit_labels(P[0].size()), 0), targetiv::InstrumentSet(z),
          grid(P), grid(E), {}};
}

}  // namespace testsupport
