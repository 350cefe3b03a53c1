#include "relvlingam/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "relvlingam/errors.hpp"

namespace relv {

std::int64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
  }
  return r;
}

std::vector<std::vector<int>> sorted_tuples(int m, int k) {
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<std::size_t>(multiset_count(m, k)));
  std::vector<int> cur(k, 0);
  if (k == 0) {
    out.push_back({});
    return out;
  }
  while (true) {
    out.push_back(cur);
    int j = k - 1;
    while (j >= 0 && cur[j] == m - 1) --j;
    if (j < 0) break;
    const int v = cur[j] + 1;
    for (int t = j; t < k; ++t) cur[t] = v;
  }
  return out;
}

std::size_t sorted_tuple_rank(int m, std::span<const int> tuple) {
  const int k = static_cast<int>(tuple.size());
  std::int64_t rank = 0;
  int prev = 0;
  for (int j = 0; j < k; ++j) {
    for (int v = prev; v < tuple[j]; ++v) {
      rank += multiset_count(m - v, k - 1 - j);
    }
    prev = tuple[j];
  }
  return static_cast<std::size_t>(rank);
}

SymmetricTensor::SymmetricTensor(int order, int dim) : order_(order), dim_(dim) {
  if (order < 1) throw InvalidArgument("tensor order must be at least 1");
  if (order > 16) throw InvalidArgument("tensor order above 16 is not supported");
  if (dim < 1) throw InvalidArgument("tensor dimension must be at least 1");
  values_.assign(static_cast<std::size_t>(multiset_count(dim, order)), 0.0);
}

std::size_t SymmetricTensor::rank_of(std::span<const int> index) const {
  if (static_cast<int>(index.size()) != order_) {
    throw InvalidArgument("multi-index length does not match tensor order");
  }
  std::array<int, 16> buf;
  for (int i = 0; i < order_; ++i) {
    if (index[i] < 0 || index[i] >= dim_) {
      throw InvalidArgument("multi-index entry out of range");
    }
    buf[static_cast<std::size_t>(i)] = index[i];
  }
  std::sort(buf.begin(), buf.begin() + order_);
  return sorted_tuple_rank(dim_, std::span<const int>(buf.data(), static_cast<std::size_t>(order_)));
}

double SymmetricTensor::at(std::span<const int> index) const {
  return values_[rank_of(index)];
}

void SymmetricTensor::set(std::span<const int> index, double value) {
  values_[rank_of(index)] = value;
}

const std::vector<std::vector<int>>& SymmetricTensor::indices() const {
  if (index_cache_.empty() && !values_.empty()) {
    index_cache_ = sorted_tuples(dim_, order_);
  }
  return index_cache_;
}

double SymmetricTensor::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool SymmetricTensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

Eigen::MatrixXd SymmetricTensor::flatten(int h) const {
  if (h < 1 || h > order_) throw InvalidArgument("flattening index out of range");
  const auto rows = sorted_tuples(dim_, order_ - h);
  const auto cols = sorted_tuples(dim_, h);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  std::vector<int> idx(static_cast<std::size_t>(order_));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      std::copy(cols[c].begin(), cols[c].end(), idx.begin());
      std::copy(rows[r].begin(), rows[r].end(), idx.begin() + h);
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = at(idx);
    }
  }
  return out;
}

}  // namespace relv
