#pragma once

#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "targetiv/model.hpp"
#include "targetiv/report.hpp"
#include "targetiv/targeting.hpp"

namespace targetiv {

class GroupTable;

using Rational = boost::multiprecision::cpp_rational;

// Linear map from class probabilities to scores, with its exact row reduction.
struct IdentifyingSystem {
  std::vector<ClassSpec> classes;           // columns
  std::vector<std::pair<int, int>> cells;   // rows, (z, t)
  Grid<int> forward;                        // cells x classes, 1(T_c(z) = t)
  std::size_t rank = 0;
  std::vector<std::vector<Rational>> row_basis;     // identified linear combinations
  std::vector<std::vector<Rational>> kernel_basis;  // unidentified directions
  std::vector<std::size_t> pivots;

  std::size_t n_classes() const { return classes.size(); }
  // Free class probabilities (adding-up removes one) and free scores per instrument.
  std::size_t unknowns() const { return classes.size() - 1; }
  std::size_t equations() const;
  std::size_t unidentified_dimension() const { return classes.size() - rank; }
  bool identifies(const std::vector<Rational>& combination) const;
  // P(t|z) implied by class probabilities, indexed like cells.
  std::vector<double> forward_map(const std::vector<double>& class_probs) const;
};

// Requires strict one-to-one targeting with a non-empty reference set.
IdentifyingSystem identifying_system(const TargetingStructure& ts);

std::string to_string(const Rational& q);

// Positional roles for two instrument values: z0 reference, z1 targets t1.
struct Roles2xT {
  int z0 = 0, z1 = 1;
  int t0 = 0, t1 = 1;
};
Roles2xT default_roles_2xT(const MomentTable& m);
Roles2xT roles_2xT_from_targeting(const TargetingStructure& ts);
Roles3x3 default_roles_3x3(const MomentTable& m);

IdentificationReport identify_2xT_probs(const MomentTable& m, const Roles2xT& r,
                                        const IdentOptions& o = {});
IdentificationReport identify_2xT_means(const MomentTable& m, const Roles2xT& r,
                                        const IdentOptions& o = {});
// Average effects under homogeneous E[Y(t1) | C_t t1] across t.
IdentificationReport ate_2xT_homog(const MomentTable& m, const Roles2xT& r,
                                   const IdentOptions& o = {});

IdentificationReport identify_3x3_probs(const MomentTable& m, const Roles3x3& r,
                                        const IdentOptions& o = {});
IdentificationReport identify_3x3_means(const MomentTable& m, const Roles3x3& r,
                                        const IdentOptions& o = {});
// beta(t1), beta(t2) of the just-identified TSLS regression.
IdentificationReport identify_3x3_tsls(const MomentTable& m, const Roles3x3& r);
// Average effects under homogeneity of the t1 and t2 outcomes across the two
// groups that switch between t1 and t2.
IdentificationReport ate_3x3_homog(const MomentTable& m, const Roles3x3& r,
                                   const IdentOptions& o = {});

struct TslsResult {
  double beta0 = 0, beta1 = 0, beta2 = 0;
  double W[2][2] = {{0, 0}, {0, 0}};
  double rhs[2] = {0, 0};
  std::string route;
};

// Just-identified IV of Y on (1, 1(T=t1), 1(T=t2)) with instrument dummies.
TslsResult tsls_3x3(const MomentTable& m, const Roles3x3& r);
// Same coefficients from the group-weighted system W beta = rhs.
TslsResult tsls_3x3(const GroupTable& g, const Roles3x3& r);

// TSLS coefficients split into complier effects and a heterogeneity term.
struct TslsDecomposition {
  double late1 = 0, late2 = 0;  // E[Y(t_k) - Y(t0) | C_k]
  double bias1 = 0, bias2 = 0;  // beta_k - late_k
};
TslsDecomposition tsls_decomposition(const GroupTable& g, const Roles3x3& r);

// Group vectors used by the 3x3 design, in instrument order.
struct Groups3x3 {
  ResponseVector A0, A1, A2, C002, C010, C012, C112, C212;
};
Groups3x3 groups_3x3(const Roles3x3& r, std::size_t n_instruments = 3);

}  // namespace targetiv
