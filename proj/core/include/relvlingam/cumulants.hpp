#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "relvlingam/tensor.hpp"

namespace relv {

struct PathMatrix;

// Sample container: one row per observation, one column per variable.
struct Dataset {
  Eigen::MatrixXd values;

  long long n() const { return values.rows(); }
  int p() const { return static_cast<int>(values.cols()); }
};

// Subtracts the column means.
Dataset centered(const Dataset& data);

// Scales each column to unit empirical variance (and centers it).
// Throws DegenerateData on a zero-variance column.
Dataset standardize(const Dataset& data);

// Order-k moment tensor of (already centered) data:
// entry (i_1..i_k) = (1/n) sum_r prod_j values[r, i_j].
SymmetricTensor sample_moments(const Dataset& data, int k);

// Order-k cumulant tensor from the moment tensors of orders 1..k via the
// set-partition formula. moments[r-1] must be the order-r tensor.
SymmetricTensor cumulants_from_moments(const std::vector<SymmetricTensor>& moments);

// Cumulant tensors of orders 2..max_order over a common variable set.
class CumulantSet {
public:
  CumulantSet(int dim, int max_order);

  int dim() const { return dim_; }
  int max_order() const { return max_order_; }
  const SymmetricTensor& order(int k) const;
  SymmetricTensor& order(int k);

  // Entry of the order-k tensor at the given multi-index.
  double at(int k, std::span<const int> index) const { return order(k).at(index); }

private:
  int dim_;
  int max_order_;
  std::vector<SymmetricTensor> tensors_;
};

// Plug-in cumulants: sample moments fed through the partition formula.
CumulantSet sample_cumulants(const Dataset& data, int k_max);

// Cumulants of one exogenous source over a contiguous order range.
struct SourceCumulantVector {
  std::string owner;
  int first_order = 2;
  std::vector<double> values;

  int last_order() const { return first_order + static_cast<int>(values.size()) - 1; }
  bool covers(int k) const { return k >= first_order && k <= last_order(); }
  double at_order(int k) const;
};

// Population cumulants of X = B eta for independent sources eta with the
// given per-source cumulants:
//   c^(k)_{i_1..i_k} = sum_j omega_j^(k) * b_{i_1 j} * ... * b_{i_k j}.
// Each source vector must cover orders 2..k_max.
CumulantSet exact_model_cumulants(const PathMatrix& b,
                                  std::span<const SourceCumulantVector> source_cumulants,
                                  int k_max);

// Same, from a raw coefficient matrix whose columns are total-effect
// vectors (one per source).
CumulantSet exact_cumulants_from_columns(const Eigen::MatrixXd& columns,
                                         std::span<const SourceCumulantVector> source_cumulants,
                                         int k_max);

// Removes independent components from the cumulants: subtracts, per entry,
// sum_j omega_j^(k) * b_{i_1 j} ... b_{i_k j} over the given columns, then
// drops the source row and relabels the remaining indices. For exact
// inputs this reproduces the cumulants of the model with the source and
// the given latents erased.
CumulantSet subtract_component_cumulants(const CumulantSet& c, int source,
                                         const Eigen::MatrixXd& columns,
                                         std::span<const SourceCumulantVector> omegas);

// Bivariate marginal: keeps entries whose indices lie in {a, b}, relabeled
// to {0, 1} in that order.
CumulantSet marginal_cumulants(const CumulantSet& c, int a, int b);

// Marginal of (v, w) rescaled as if both variables had unit variance.
CumulantSet standardized_pair_cumulants(const CumulantSet& c, int v, int w);

}  // namespace relv
