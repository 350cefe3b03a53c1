#include "relvlingam/cumulants.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "relvlingam/errors.hpp"
#include "relvlingam/graph.hpp"

namespace relv {

namespace {

// All set partitions of {0, ..., k-1} as lists of blocks, generated from
// restricted growth strings. Cached per k; k <= 8 in practice.
const std::vector<std::vector<std::vector<int>>>& set_partitions(int k) {
  static std::map<int, std::vector<std::vector<std::vector<int>>>> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(k);
  if (it != cache.end()) return it->second;

  std::vector<std::vector<std::vector<int>>> parts;
  std::vector<int> rgs(static_cast<std::size_t>(k), 0);
  while (true) {
    int blocks = *std::max_element(rgs.begin(), rgs.end()) + 1;
    std::vector<std::vector<int>> part(static_cast<std::size_t>(blocks));
    for (int i = 0; i < k; ++i) part[static_cast<std::size_t>(rgs[static_cast<std::size_t>(i)])].push_back(i);
    parts.push_back(std::move(part));

    // next restricted growth string
    int j = k - 1;
    while (j > 0) {
      int prefix_max = 0;
      for (int t = 0; t < j; ++t) prefix_max = std::max(prefix_max, rgs[static_cast<std::size_t>(t)]);
      if (rgs[static_cast<std::size_t>(j)] <= prefix_max) break;
      --j;
    }
    if (j == 0) break;
    ++rgs[static_cast<std::size_t>(j)];
    for (int t = j + 1; t < k; ++t) rgs[static_cast<std::size_t>(t)] = 0;
  }
  auto [pos, inserted] = cache.emplace(k, std::move(parts));
  (void)inserted;
  return pos->second;
}

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace

Dataset centered(const Dataset& data) {
  if (data.n() < 1) throw InvalidArgument("empty dataset");
  Dataset out = data;
  const Eigen::RowVectorXd means = out.values.colwise().mean();
  out.values.rowwise() -= means;
  return out;
}

Dataset standardize(const Dataset& data) {
  Dataset out = centered(data);
  const long long n = out.n();
  for (int j = 0; j < out.p(); ++j) {
    const double var = out.values.col(j).squaredNorm() / static_cast<double>(n);
    if (var <= 0.0) {
      throw DegenerateData("zero-variance column " + std::to_string(j + 1));
    }
    out.values.col(j) /= std::sqrt(var);
  }
  return out;
}

SymmetricTensor sample_moments(const Dataset& data, int k) {
  if (k < 1) throw InvalidArgument("moment order must be at least 1");
  if (data.n() < 1 || data.p() < 1) throw InvalidArgument("empty dataset");
  const long long n = data.n();
  SymmetricTensor t(k, data.p());
  const auto& tuples = t.indices();
  for (std::size_t r = 0; r < tuples.size(); ++r) {
    const auto& idx = tuples[r];
    double acc = 0.0;
    for (long long row = 0; row < n; ++row) {
      double prod = 1.0;
      for (int j : idx) prod *= data.values(row, j);
      acc += prod;
    }
    t.set_at_rank(r, acc / static_cast<double>(n));
  }
  return t;
}

SymmetricTensor cumulants_from_moments(const std::vector<SymmetricTensor>& moments) {
  if (moments.empty()) throw InvalidArgument("no moment tensors given");
  const int k = static_cast<int>(moments.size());
  const int dim = moments.back().dim();
  for (int r = 1; r <= k; ++r) {
    const auto& m = moments[static_cast<std::size_t>(r - 1)];
    if (m.order() != r) throw InvalidArgument("moment tensors must cover orders 1..k contiguously");
    if (m.dim() != dim) throw InvalidArgument("moment tensors must share the dimension");
  }

  SymmetricTensor out(k, dim);
  const auto& tuples = out.indices();
  const auto& partitions = set_partitions(k);
  std::vector<int> block_idx;
  block_idx.reserve(static_cast<std::size_t>(k));
  for (std::size_t r = 0; r < tuples.size(); ++r) {
    const auto& idx = tuples[r];
    double acc = 0.0;
    for (const auto& part : partitions) {
      const int h = static_cast<int>(part.size());
      double prod = (h % 2 == 1 ? 1.0 : -1.0) * factorial(h - 1);
      for (const auto& block : part) {
        block_idx.clear();
        for (int pos : block) block_idx.push_back(idx[static_cast<std::size_t>(pos)]);
        prod *= moments[block.size() - 1].at(block_idx);
        if (prod == 0.0) break;
      }
      acc += prod;
    }
    out.set_at_rank(r, acc);
  }
  return out;
}

CumulantSet::CumulantSet(int dim, int max_order) : dim_(dim), max_order_(max_order) {
  if (dim < 1) throw InvalidArgument("cumulant set dimension must be at least 1");
  if (max_order < 2) throw InvalidArgument("cumulant set needs max order >= 2");
  tensors_.reserve(static_cast<std::size_t>(max_order - 1));
  for (int k = 2; k <= max_order; ++k) tensors_.emplace_back(k, dim);
}

const SymmetricTensor& CumulantSet::order(int k) const {
  if (k < 2 || k > max_order_) throw InvalidArgument("cumulant order out of range");
  return tensors_[static_cast<std::size_t>(k - 2)];
}

SymmetricTensor& CumulantSet::order(int k) {
  if (k < 2 || k > max_order_) throw InvalidArgument("cumulant order out of range");
  return tensors_[static_cast<std::size_t>(k - 2)];
}

CumulantSet sample_cumulants(const Dataset& data, int k_max) {
  if (k_max < 2) throw InvalidArgument("k_max must be at least 2");
  if (k_max > 8) throw InvalidArgument("cumulant orders above 8 are not supported");
  std::vector<SymmetricTensor> moments;
  moments.reserve(static_cast<std::size_t>(k_max));
  for (int r = 1; r <= k_max; ++r) moments.push_back(sample_moments(data, r));
  CumulantSet out(data.p(), k_max);
  for (int k = 2; k <= k_max; ++k) {
    std::vector<SymmetricTensor> lower(moments.begin(), moments.begin() + k);
    out.order(k) = cumulants_from_moments(lower);
  }
  return out;
}

double SourceCumulantVector::at_order(int k) const {
  if (!covers(k)) throw InvalidArgument("source cumulant order " + std::to_string(k) + " not available");
  return values[static_cast<std::size_t>(k - first_order)];
}

CumulantSet exact_cumulants_from_columns(const Eigen::MatrixXd& columns,
                                         std::span<const SourceCumulantVector> source_cumulants,
                                         int k_max) {
  const int p = static_cast<int>(columns.rows());
  const int s = static_cast<int>(columns.cols());
  if (static_cast<int>(source_cumulants.size()) != s) {
    throw InvalidArgument("one source cumulant vector per column required");
  }
  for (const auto& sc : source_cumulants) {
    if (!sc.covers(2) || !sc.covers(k_max)) {
      throw InvalidArgument("source cumulants must cover orders 2..k_max");
    }
  }
  CumulantSet out(p, k_max);
  for (int k = 2; k <= k_max; ++k) {
    auto& tensor = out.order(k);
    const auto& tuples = tensor.indices();
    for (std::size_t r = 0; r < tuples.size(); ++r) {
      const auto& idx = tuples[r];
      double acc = 0.0;
      for (int j = 0; j < s; ++j) {
        double prod = source_cumulants[static_cast<std::size_t>(j)].at_order(k);
        for (int i : idx) prod *= columns(i, j);
        acc += prod;
      }
      tensor.set_at_rank(r, acc);
    }
  }
  return out;
}

CumulantSet exact_model_cumulants(const PathMatrix& b,
                                  std::span<const SourceCumulantVector> source_cumulants,
                                  int k_max) {
  return exact_cumulants_from_columns(b.values, source_cumulants, k_max);
}

CumulantSet subtract_component_cumulants(const CumulantSet& c, int source,
                                         const Eigen::MatrixXd& columns,
                                         std::span<const SourceCumulantVector> omegas) {
  const int d = c.dim();
  if (d < 2) throw InvalidArgument("cannot reduce a univariate cumulant set");
  if (source < 0 || source >= d) throw InvalidArgument("source index out of range");
  if (columns.rows() != d) throw InvalidArgument("column length must match the cumulant dimension");
  if (static_cast<int>(omegas.size()) != columns.cols()) {
    throw InvalidArgument("one cumulant vector per removed column required");
  }
  for (const auto& om : omegas) {
    if (!om.covers(2) || !om.covers(c.max_order())) {
      throw InvalidArgument("removal cumulants must cover orders 2..k_max");
    }
  }

  // Index map: remaining variables keep their relative order.
  std::vector<int> keep;
  keep.reserve(static_cast<std::size_t>(d - 1));
  for (int i = 0; i < d; ++i) {
    if (i != source) keep.push_back(i);
  }

  CumulantSet out(d - 1, c.max_order());
  std::vector<int> old_idx;
  for (int k = 2; k <= c.max_order(); ++k) {
    auto& tensor = out.order(k);
    const auto& tuples = tensor.indices();
    for (std::size_t r = 0; r < tuples.size(); ++r) {
      old_idx.clear();
      for (int i : tuples[r]) old_idx.push_back(keep[static_cast<std::size_t>(i)]);
      double value = c.at(k, old_idx);
      for (int j = 0; j < columns.cols(); ++j) {
        double prod = omegas[static_cast<std::size_t>(j)].at_order(k);
        for (int i : old_idx) prod *= columns(i, j);
        value -= prod;
      }
      tensor.set_at_rank(r, value);
    }
  }
  return out;
}

CumulantSet marginal_cumulants(const CumulantSet& c, int a, int b) {
  const int d = c.dim();
  if (a < 0 || a >= d || b < 0 || b >= d) throw InvalidArgument("marginal index out of range");
  if (a == b) throw InvalidArgument("marginal indices must be distinct");
  const int map[2] = {a, b};
  CumulantSet out(2, c.max_order());
  std::vector<int> old_idx;
  for (int k = 2; k <= c.max_order(); ++k) {
    auto& tensor = out.order(k);
    const auto& tuples = tensor.indices();
    for (std::size_t r = 0; r < tuples.size(); ++r) {
      old_idx.clear();
      for (int i : tuples[r]) old_idx.push_back(map[i]);
      tensor.set_at_rank(r, c.at(k, old_idx));
    }
  }
  return out;
}

CumulantSet standardized_pair_cumulants(const CumulantSet& c, int v, int w) {
  CumulantSet pair = marginal_cumulants(c, v, w);
  const double var0 = pair.at(2, std::vector<int>{0, 0});
  const double var1 = pair.at(2, std::vector<int>{1, 1});
  if (!(var0 > 0.0) || !(var1 > 0.0)) {
    throw DegenerateData("non-positive variance while standardizing a pair");
  }
  const double sd[2] = {std::sqrt(var0), std::sqrt(var1)};
  for (int k = 2; k <= pair.max_order(); ++k) {
    auto& tensor = pair.order(k);
    const auto& tuples = tensor.indices();
    for (std::size_t r = 0; r < tuples.size(); ++r) {
      double scale = 1.0;
      for (int i : tuples[r]) scale *= sd[i];
      tensor.set_at_rank(r, tensor.value_at_rank(r) / scale);
    }
  }
  return pair;
}

}  // namespace relv
