#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace relv {

std::int64_t binomial(int n, int k);

// Number of non-decreasing k-tuples over an m-element alphabet.
inline std::int64_t multiset_count(int m, int k) { return binomial(m + k - 1, k); }

// Enumerates all non-decreasing k-tuples over {0, ..., m-1} in
// lexicographic order.
std::vector<std::vector<int>> sorted_tuples(int m, int k);

// Lexicographic rank of a non-decreasing tuple among sorted_tuples(m, k).
std::size_t sorted_tuple_rank(int m, std::span<const int> tuple);

// Symmetric order-k tensor over m variables, stored once per sorted
// multi-index. Lookup accepts any permutation of a multi-index.
class SymmetricTensor {
public:
  SymmetricTensor(int order, int dim);

  int order() const { return order_; }
  int dim() const { return dim_; }
  std::size_t size() const { return values_.size(); }

  double at(std::span<const int> index) const;
  void set(std::span<const int> index, double value);
  double at(std::initializer_list<int> index) const {
    return at(std::span<const int>(index.begin(), index.size()));
  }
  void set(std::initializer_list<int> index, double value) {
    set(std::span<const int>(index.begin(), index.size()), value);
  }

  // Value at the i-th sorted multi-index (same order as indices()).
  double value_at_rank(std::size_t i) const { return values_[i]; }
  void set_at_rank(std::size_t i, double v) { values_[i] = v; }
  const std::vector<std::vector<int>>& indices() const;

  double max_abs() const;
  bool all_finite() const;

  // h-th flattening: rows indexed by the sorted (k-h)-tuples, columns by
  // the sorted h-tuples, both enumerated lexicographically. Entry
  // (r, c) is the tensor value at the concatenation of the two tuples.
  Eigen::MatrixXd flatten(int h) const;

private:
  std::size_t rank_of(std::span<const int> index) const;

  int order_;
  int dim_;
  std::vector<double> values_;
  mutable std::vector<std::vector<int>> index_cache_;
};

}  // namespace relv
