#pragma once

#include <Eigen/Dense>
#include <vector>

#include "relvlingam/cumulants.hpp"
#include "relvlingam/rank_tests.hpp"

namespace relv {

// Polynomial whose roots are the candidate total effects of a bivariate
// model with ell confounders. coefficients[j] multiplies b^j; the degree
// is ell + 1 for generic inputs.
struct EffectPolynomial {
  Eigen::VectorXd coefficients;
  std::vector<int> minor_rows;  // rows of A entering the minor
};

// Minor-expansion polynomials from the stacked flattening matrix built at
// minimal_orders(ell). Extending A with the symbolic row
// (1, b, ..., b^{ell+1}) on top keeps the rank at ell + 1, so every
// (ell+2)-minor through that row vanishes at the true effects. By default
// the two row subsets with the lowest total cumulant order are expanded;
// all_minors requests every subset.
std::vector<EffectPolynomial> effect_polynomials(const Eigen::MatrixXd& a, int ell,
                                                 bool all_minors = false);

// Real roots of the polynomials, matched greedily across polynomials and
// averaged. Returns ell + 1 values sorted ascending. Roots with relative
// imaginary part above tau_im are unusable and raise EstimationFailure.
std::vector<double> solve_effects(const std::vector<EffectPolynomial>& polys, int ell,
                                  double tau_im = 1e-6);

// Cumulants of the ell + 1 exogenous sources of the bivariate model, for
// orders max(2, ell + 1)..k_max, solved per order from the power-matrix
// system with rows (effects^0, ..., effects^ell) against the cumulants
// with increasing multiplicity of the effect variable. Effects closer
// than tau_sep raise IllConditioned.
std::vector<SourceCumulantVector> latent_source_cumulants(const std::vector<double>& effects,
                                                          const CumulantSet& pair, int k_max,
                                                          double tau_sep = 1e-8);

// Candidate effects of a bivariate model plus the cumulant vector of the
// source attached to each candidate.
struct PairwiseEstimate {
  int ell = 0;
  std::vector<double> effects;                 // sorted ascending, size ell + 1
  std::vector<SourceCumulantVector> omegas;    // aligned with effects
};

// Full pairwise pipeline on an (unstandardized) bivariate cumulant set.
PairwiseEstimate estimate_pair(const CumulantSet& pair, int ell, int k_max);

}  // namespace relv
