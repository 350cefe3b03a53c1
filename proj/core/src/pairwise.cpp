#include "relvlingam/pairwise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "relvlingam/errors.hpp"

namespace relv {

namespace {

// Cumulant order of each row of the stacked flattening matrix at minimal
// orders for ell.
std::vector<int> row_orders(int ell, int rows) {
  const OrderPair orders = minimal_orders(ell);
  std::vector<int> out;
  for (int k = orders.k1; k <= orders.k2; ++k) {
    for (int r = 0; r <= k - orders.k1; ++r) out.push_back(k);
  }
  if (static_cast<int>(out.size()) != rows) {
    throw InvalidArgument("matrix row count does not match the minimal orders for ell");
  }
  return out;
}

void subsets_of_size(int n, int k, std::vector<std::vector<int>>& out) {
  std::vector<int> cur(static_cast<std::size_t>(k));
  std::iota(cur.begin(), cur.end(), 0);
  while (true) {
    out.push_back(cur);
    int j = k - 1;
    while (j >= 0 && cur[static_cast<std::size_t>(j)] == n - k + j) --j;
    if (j < 0) break;
    ++cur[static_cast<std::size_t>(j)];
    for (int t = j + 1; t < k; ++t) {
      cur[static_cast<std::size_t>(t)] = cur[static_cast<std::size_t>(t - 1)] + 1;
    }
  }
}

std::vector<std::complex<double>> polynomial_roots(const Eigen::VectorXd& coeffs) {
  const int degree = static_cast<int>(coeffs.size()) - 1;
  // Companion matrix of the monic normalization.
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < degree; ++i) companion(i, degree - 1) = -coeffs(i) / coeffs(degree);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
  const auto& ev = solver.eigenvalues();
  std::vector<std::complex<double>> roots(ev.data(), ev.data() + ev.size());
  return roots;
}

}  // namespace

std::vector<EffectPolynomial> effect_polynomials(const Eigen::MatrixXd& a, int ell,
                                                 bool all_minors) {
  if (a.cols() != ell + 2) {
    throw InvalidArgument("matrix must have ell + 2 columns");
  }
  const int rows = static_cast<int>(a.rows());
  if (rows < ell + 1) throw InvalidArgument("too few rows to form a minor");
  const auto orders = row_orders(ell, rows);

  std::vector<std::vector<int>> subsets;
  subsets_of_size(rows, ell + 1, subsets);
  std::stable_sort(subsets.begin(), subsets.end(),
                   [&](const std::vector<int>& x, const std::vector<int>& y) {
                     int ox = 0, oy = 0;
                     for (int r : x) ox += orders[static_cast<std::size_t>(r)];
                     for (int r : y) oy += orders[static_cast<std::size_t>(r)];
                     if (ox != oy) return ox < oy;
                     return x < y;
                   });
  if (!all_minors && subsets.size() > 2) subsets.resize(2);

  std::vector<EffectPolynomial> polys;
  polys.reserve(subsets.size());
  for (const auto& subset : subsets) {
    Eigen::MatrixXd sub(ell + 1, ell + 2);
    for (int r = 0; r < ell + 1; ++r) sub.row(r) = a.row(subset[static_cast<std::size_t>(r)]);
    EffectPolynomial poly;
    poly.minor_rows = subset;
    poly.coefficients.resize(ell + 2);
    Eigen::MatrixXd minor(ell + 1, ell + 1);
    for (int j = 0; j <= ell + 1; ++j) {
      // Expansion of the determinant along the symbolic top row
      // (1, b, ..., b^{ell+1}): the coefficient of b^j is the signed
      // minor of the remaining rows with column j struck.
      int c = 0;
      for (int t = 0; t <= ell + 1; ++t) {
        if (t == j) continue;
        minor.col(c++) = sub.col(t);
      }
      const double det = minor.determinant();
      poly.coefficients(j) = (j % 2 == 0 ? det : -det);
    }
    polys.push_back(std::move(poly));
  }
  return polys;
}

std::vector<double> solve_effects(const std::vector<EffectPolynomial>& polys, int ell,
                                  double tau_im) {
  if (polys.empty()) throw InvalidArgument("no polynomials given");
  const int degree = ell + 1;

  std::vector<std::vector<double>> root_sets;
  for (const auto& poly : polys) {
    if (static_cast<int>(poly.coefficients.size()) != degree + 1) {
      throw InvalidArgument("polynomial degree does not match ell");
    }
    const double max_coef = poly.coefficients.cwiseAbs().maxCoeff();
    if (!(max_coef > 0.0) ||
        std::abs(poly.coefficients(degree)) < 1e-12 * max_coef) {
      throw EstimationFailure("effect polynomial has a degenerate leading coefficient");
    }
    std::vector<double> roots;
    for (const auto& z : polynomial_roots(poly.coefficients)) {
      if (std::abs(z.imag()) <= tau_im * (1.0 + std::abs(z.real()))) {
        roots.push_back(z.real());
      }
    }
    if (static_cast<int>(roots.size()) < degree) {
      throw EstimationFailure("effect polynomial has complex roots beyond tolerance");
    }
    std::sort(roots.begin(), roots.end());
    root_sets.push_back(std::move(roots));
  }

  // Greedy nearest matching of each root set against the first, then
  // averaging per slot.
  std::vector<double> sums = root_sets.front();
  for (std::size_t s = 1; s < root_sets.size(); ++s) {
    const auto& ref = root_sets.front();
    const auto& cur = root_sets[s];
    std::vector<char> ref_used(ref.size(), 0), cur_used(cur.size(), 0);
    for (int step = 0; step < degree; ++step) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t bi = 0, bj = 0;
      for (std::size_t i = 0; i < ref.size(); ++i) {
        if (ref_used[i]) continue;
        for (std::size_t j = 0; j < cur.size(); ++j) {
          if (cur_used[j]) continue;
          const double d = std::abs(ref[i] - cur[j]);
          if (d < best) {
            best = d;
            bi = i;
            bj = j;
          }
        }
      }
      ref_used[bi] = 1;
      cur_used[bj] = 1;
      sums[bi] += cur[bj];
    }
  }
  std::vector<double> out(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) {
    out[i] = sums[i] / static_cast<double>(root_sets.size());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SourceCumulantVector> latent_source_cumulants(const std::vector<double>& effects,
                                                          const CumulantSet& pair, int k_max,
                                                          double tau_sep) {
  if (pair.dim() != 2) throw InvalidArgument("latent_source_cumulants expects a bivariate set");
  const int m = static_cast<int>(effects.size());  // ell + 1 sources
  if (m < 1) throw InvalidArgument("at least one effect required");
  const int ell = m - 1;
  const int first_order = std::max(2, ell + 1);
  if (k_max < first_order || pair.max_order() < k_max) {
    throw InvalidArgument("cumulant orders insufficient for the power-matrix solve");
  }
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      if (std::abs(effects[static_cast<std::size_t>(i)] - effects[static_cast<std::size_t>(j)]) < tau_sep) {
        throw IllConditioned("effect candidates too close for the power-matrix solve");
      }
    }
  }

  Eigen::MatrixXd power(m, m);
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < m; ++j) {
      power(r, j) = std::pow(effects[static_cast<std::size_t>(j)], r);
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(power);

  std::vector<SourceCumulantVector> out(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(j)].first_order = first_order;

  std::vector<int> idx;
  for (int k = first_order; k <= k_max; ++k) {
    Eigen::VectorXd rhs(m);
    for (int r = 0; r < m; ++r) {
      idx.assign(static_cast<std::size_t>(k), 0);
      for (int t = 0; t < r; ++t) idx[static_cast<std::size_t>(t)] = 1;
      rhs(r) = pair.at(k, idx);
    }
    const Eigen::VectorXd omega = lu.solve(rhs);
    for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(j)].values.push_back(omega(j));
  }
  return out;
}

PairwiseEstimate estimate_pair(const CumulantSet& pair, int ell, int k_max) {
  const OrderPair orders = minimal_orders(ell);
  const Eigen::MatrixXd a = build_A(pair, orders);
  const auto polys = effect_polynomials(a, ell);
  PairwiseEstimate est;
  est.ell = ell;
  est.effects = solve_effects(polys, ell);
  est.omegas = latent_source_cumulants(est.effects, pair, k_max);
  return est;
}

}  // namespace relv
