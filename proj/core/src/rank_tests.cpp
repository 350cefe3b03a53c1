#include "relvlingam/rank_tests.hpp"

#include <cmath>

#include "relvlingam/errors.hpp"

namespace relv {

OrderPair minimal_orders(int ell) {
  if (ell < 0) throw InvalidArgument("latent count must be non-negative");
  const int k1 = ell + 2;
  int x = 0;
  while ((x + 1) * (x + 2) / 2 < ell + 2) ++x;
  return {k1, k1 + x};
}

Eigen::MatrixXd build_A(const CumulantSet& pair, OrderPair orders) {
  if (pair.dim() != 2) throw InvalidArgument("build_A expects a bivariate cumulant set");
  if (orders.k1 < 2 || orders.k2 < orders.k1) throw InvalidArgument("invalid order pair");
  if (pair.max_order() < orders.k2) {
    throw InvalidArgument("cumulant set does not cover order " + std::to_string(orders.k2));
  }
  const int k1 = orders.k1;
  int rows = 0;
  for (int k = k1; k <= orders.k2; ++k) rows += k - k1 + 1;

  Eigen::MatrixXd a(rows, k1);
  int row = 0;
  std::vector<int> idx;
  for (int k = k1; k <= orders.k2; ++k) {
    for (int r = 0; r <= k - k1; ++r) {
      for (int c = 0; c < k1; ++c) {
        // Entry with c + r indices equal to the effect variable.
        idx.assign(static_cast<std::size_t>(k), 0);
        for (int t = 0; t < c + r; ++t) idx[static_cast<std::size_t>(t)] = 1;
        a(row, c) = pair.at(k, idx);
      }
      ++row;
    }
  }
  return a;
}

Eigen::MatrixXd build_A(const CumulantSet& c, int v, int w, OrderPair orders) {
  return build_A(marginal_cumulants(c, v, w), orders);
}

RankDecision rank_deficiency_test(const Eigen::MatrixXd& a, int ell, double threshold) {
  if (ell < 0) throw InvalidArgument("latent count must be non-negative");
  if (!a.allFinite()) throw NumericError("non-finite entries in rank test input");

  RankDecision decision;
  decision.threshold = threshold;

  const int m = static_cast<int>(std::min(a.rows(), a.cols()));
  if (m >= 1) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& sv = svd.singularValues();
    decision.singular_values.assign(sv.data(), sv.data() + sv.size());
  }
  if (m <= ell + 1) {
    // Too small to constrain rank ell + 1: vacuously satisfiable.
    decision.ratio = 0.0;
    decision.accepted = true;
    return decision;
  }
  const double sigma1 = decision.singular_values.front();
  const double sigma = decision.singular_values[static_cast<std::size_t>(ell + 1)];
  decision.ratio = sigma1 > 0.0 ? sigma / sigma1 : 0.0;
  decision.accepted = decision.ratio <= threshold;
  return decision;
}

double threshold_schedule(long long n, int iteration) {
  if (n < 1) throw InvalidArgument("sample size must be positive");
  if (iteration < 1) throw InvalidArgument("iteration must be at least 1");
  const double scale = std::pow(static_cast<double>(n), -0.2);
  if (iteration == 1) return 0.08 * scale;
  return 0.2 * static_cast<double>(iteration - 1) * scale;
}

std::optional<int> estimate_pair_confounding(const CumulantSet& c, int v, int w, int ell_max,
                                             double threshold,
                                             std::vector<RankDecision>* decisions) {
  if (ell_max < 0) throw InvalidArgument("ell_max must be non-negative");
  const CumulantSet pair = standardized_pair_cumulants(c, v, w);
  for (int ell = 0; ell <= ell_max; ++ell) {
    const OrderPair orders = minimal_orders(ell);
    if (pair.max_order() < orders.k2) {
      throw InvalidArgument("cumulant orders insufficient for ell = " + std::to_string(ell));
    }
    const RankDecision d = rank_deficiency_test(build_A(pair, orders), ell, threshold);
    if (decisions) decisions->push_back(d);
    if (d.accepted) return ell;
  }
  return std::nullopt;
}

std::optional<int> estimate_pair_confounding(const CumulantSet& c, int v, int w, int ell_max,
                                             long long n, int iteration,
                                             std::vector<RankDecision>* decisions) {
  return estimate_pair_confounding(c, v, w, ell_max, threshold_schedule(n, iteration), decisions);
}

}  // namespace relv
