#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "relvlingam/cumulants.hpp"

namespace relv {

// Cumulant orders (k1, k2) used for the stacked-flattening matrix when
// testing for ell pairwise confounders.
struct OrderPair {
  int k1 = 0;
  int k2 = 0;
};

// Smallest admissible orders: k1 = ell + 2 and the least k2 such that the
// stacked flattenings provide at least ell + 2 rows.
OrderPair minimal_orders(int ell);

// Stacked flattening matrix for a bivariate cumulant set, in the
// direction "index 0 causes index 1": the k1-th flattenings of the
// order-k1..k2 tensors stacked vertically, with the last column removed.
Eigen::MatrixXd build_A(const CumulantSet& pair, OrderPair orders);

// Convenience: marginalizes (v, w) out of a larger set first.
Eigen::MatrixXd build_A(const CumulantSet& c, int v, int w, OrderPair orders);

struct RankDecision {
  std::vector<double> singular_values;  // descending
  double ratio = 0.0;                   // sigma_{ell+2} / sigma_1
  double threshold = 0.0;
  bool accepted = false;
};

// Accepts the hypothesis rank(A) <= ell + 1 when the singular value ratio
// sigma_{ell+2}/sigma_1 falls at or below the threshold. Matrices too
// small to constrain the rank accept vacuously with ratio 0, as does a
// zero matrix.
RankDecision rank_deficiency_test(const Eigen::MatrixXd& a, int ell, double threshold);

// Test threshold: 0.08 n^{-0.2} in the first iteration, 0.2 (i-1) n^{-0.2}
// afterwards.
double threshold_schedule(long long n, int iteration);

// Smallest ell <= ell_max whose rank test accepts for the direction
// v -> w, computed on the standardized pair marginal. Returns nullopt when
// no level is accepted. Per-level decisions are appended to *decisions
// when given.
std::optional<int> estimate_pair_confounding(const CumulantSet& c, int v, int w, int ell_max,
                                             double threshold,
                                             std::vector<RankDecision>* decisions = nullptr);

std::optional<int> estimate_pair_confounding(const CumulantSet& c, int v, int w, int ell_max,
                                             long long n, int iteration,
                                             std::vector<RankDecision>* decisions = nullptr);

}  // namespace relv
