#include "relvlingam/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#include "relvlingam/errors.hpp"

namespace relv {

namespace {

double squared_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    num += d * d;
    den += b[i] * b[i];
  }
  return num / den;
}

struct OverallSolve {
  std::vector<SourceCumulantVector> omegas;
  double rank_ratio = 0.0;
  double residual = 0.0;  // summed relative squared residuals over orders
  bool singular = false;
};

OverallSolve solve_overall(const CumulantSet& c, int source, const Eigen::MatrixXd& columns,
                           double rank_tol) {
  const int d = c.dim();
  const int n_sources = static_cast<int>(columns.cols());

  // Equation rows: the source first, then the remaining nodes ascending.
  std::vector<int> row_nodes{source};
  for (int w = 0; w < d; ++w) {
    if (w != source) row_nodes.push_back(w);
  }
  Eigen::MatrixXd m(d, n_sources);
  for (int r = 0; r < d; ++r) m.row(r) = columns.row(row_nodes[static_cast<std::size_t>(r)]);

  OverallSolve out;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double sigma1 = sv(0);
  const double sigma_last = sv(sv.size() - 1);
  out.rank_ratio = sigma1 > 0.0 ? sigma_last / sigma1 : 0.0;
  if (!(sigma1 > 0.0) || out.rank_ratio <= rank_tol) {
    out.singular = true;
    return out;
  }

  out.omegas.assign(static_cast<std::size_t>(n_sources), SourceCumulantVector{});
  for (auto& om : out.omegas) om.first_order = 2;

  std::vector<int> idx;
  for (int k = 2; k <= c.max_order(); ++k) {
    Eigen::VectorXd rhs(d);
    for (int r = 0; r < d; ++r) {
      idx.assign(static_cast<std::size_t>(k), source);
      if (row_nodes[static_cast<std::size_t>(r)] != source) {
        idx.back() = row_nodes[static_cast<std::size_t>(r)];
      }
      rhs(r) = c.at(k, idx);
    }
    const Eigen::VectorXd omega = svd.solve(rhs);
    out.residual += (m * omega - rhs).squaredNorm() / (1.0 + rhs.squaredNorm());
    for (int j = 0; j < n_sources; ++j) out.omegas[static_cast<std::size_t>(j)].values.push_back(omega(j));
  }
  return out;
}

}  // namespace

FindSourceOutcome find_source(const CumulantSet& c,
                              const std::vector<std::vector<int>>& bounds, double threshold) {
  const int d = c.dim();
  if (d < 2) throw InvalidArgument("find_source needs at least two variables");
  if (static_cast<int>(bounds.size()) != d) throw InvalidArgument("bounds size mismatch");

  FindSourceOutcome outcome;
  std::vector<std::vector<std::optional<int>>> ells(
      static_cast<std::size_t>(d), std::vector<std::optional<int>>(static_cast<std::size_t>(d)));
  std::vector<std::vector<double>> ratios(static_cast<std::size_t>(d),
                                          std::vector<double>(static_cast<std::size_t>(d), 0.0));
  bool any_accepted = false;

  for (int v = 0; v < d; ++v) {
    for (int w = 0; w < d; ++w) {
      if (v == w) continue;
      const int bound = bounds[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)];
      std::vector<RankDecision> decisions;
      const auto ell = estimate_pair_confounding(c, v, w, bound, threshold, &decisions);
      const RankDecision& final = decisions.back();
      PairTest test;
      test.v = v;
      test.w = w;
      test.ell = ell;
      test.bound = bound;
      const OrderPair orders = minimal_orders(ell ? *ell : bound);
      test.k1 = orders.k1;
      test.k2 = orders.k2;
      test.singular_values = final.singular_values;
      test.ratio = final.ratio;
      test.threshold = final.threshold;
      test.accepted = final.accepted;
      outcome.tests.push_back(std::move(test));
      ells[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)] = ell;
      ratios[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)] = final.ratio;
      if (ell) any_accepted = true;
    }
  }
  if (!any_accepted) {
    throw DiscoveryFailure("no directed rank test accepted at any level");
  }

  int best = -1;
  long long best_sum = 0;
  double best_ratio = 0.0;
  bool best_flagged = false;
  for (int v = 0; v < d; ++v) {
    long long sum = 0;
    double ratio_sum = 0.0;
    bool flagged = false;
    for (int w = 0; w < d; ++w) {
      if (v == w) continue;
      const auto& ell = ells[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)];
      if (ell) {
        sum += *ell;
      } else {
        sum += bounds[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)] + 1;
        flagged = true;
      }
      ratio_sum += ratios[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)];
    }
    const double avg_ratio = ratio_sum / static_cast<double>(d - 1);
    if (best < 0 || sum < best_sum || (sum == best_sum && avg_ratio < best_ratio)) {
      best = v;
      best_sum = sum;
      best_ratio = avg_ratio;
      best_flagged = flagged;
    }
  }
  if (best_flagged) {
    outcome.flags.push_back("source " + std::to_string(best) +
                            " selected with unresolved pairwise tests");
  }
  outcome.source = best;
  return outcome;
}

namespace {

struct AlignItem {
  int w = 0;
  int cand = 0;
  double effect = 0.0;
  std::vector<double> vec;  // common order slice
};

struct Labeling {
  std::vector<int> latent_clusters;  // indices into the cluster list
  double score = std::numeric_limits<double>::infinity();
  OverallSolve solve;
  std::map<int, int> noise_candidate;
  Eigen::MatrixXd columns;
  std::vector<LatentGroup> groups;
};

}  // namespace

Eigen::MatrixXd fill_b_columns(const SourceModel& model, int dim) {
  const int m = static_cast<int>(model.groups.size());
  Eigen::MatrixXd columns = Eigen::MatrixXd::Zero(dim, 1 + m);
  columns(model.source, 0) = 1.0;
  for (const auto& [w, effect] : model.source_effects) columns(w, 0) = effect;
  for (int g = 0; g < m; ++g) {
    columns(model.source, 1 + g) = 1.0;
    for (const auto& [w, effect] : model.source_effects) {
      const auto& group = model.groups[static_cast<std::size_t>(g)];
      auto it = group.effects.find(w);
      columns(w, 1 + g) = it != group.effects.end() ? it->second : effect;
    }
  }
  return columns;
}

OverallCumulants overall_source_cumulants(const CumulantSet& c, int source,
                                          const Eigen::MatrixXd& columns, double rank_tol,
                                          int iteration) {
  if (columns.rows() != c.dim()) throw InvalidArgument("column rows must match the dimension");
  if (source < 0 || source >= c.dim()) throw InvalidArgument("source index out of range");
  const OverallSolve solve = solve_overall(c, source, columns, rank_tol);
  if (solve.singular) {
    throw Underdetermined("source cumulant system is rank-deficient in iteration " +
                              std::to_string(iteration),
                          iteration);
  }
  OverallCumulants out;
  out.omegas = solve.omegas;
  out.rank_ratio = solve.rank_ratio;
  out.max_residual = solve.residual;
  return out;
}

SourceModel align_latents(const CumulantSet& c, int source,
                          const std::map<int, PairwiseEstimate>& per_pair,
                          const AlignOptions& options) {
  const int k_max = c.max_order();

  // Common order range over the pairs that can carry latent vectors.
  int common_lo = 2;
  for (const auto& [w, est] : per_pair) {
    (void)w;
    if (est.ell >= 1) {
      common_lo = std::max(common_lo, est.omegas.front().first_order);
    }
  }

  std::vector<AlignItem> items;
  for (const auto& [w, est] : per_pair) {
    if (est.ell < 1) continue;
    for (std::size_t cand = 0; cand < est.effects.size(); ++cand) {
      AlignItem item;
      item.w = w;
      item.cand = static_cast<int>(cand);
      item.effect = est.effects[cand];
      const auto& om = est.omegas[cand];
      for (int k = common_lo; k <= k_max; ++k) item.vec.push_back(om.at_order(k));
      items.push_back(std::move(item));
    }
  }

  SourceModel model;
  model.source = source;

  // Cluster candidate vectors across pairs, never merging two candidates
  // of the same pair.
  std::vector<int> cluster_of(items.size());
  std::iota(cluster_of.begin(), cluster_of.end(), 0);
  std::function<int(int)> find_root = [&](int x) {
    while (cluster_of[static_cast<std::size_t>(x)] != x) x = cluster_of[static_cast<std::size_t>(x)];
    return x;
  };
  {
    struct Link {
      double dist;
      int a, b;
    };
    std::vector<Link> links;
    for (std::size_t i = 0; i < items.size(); ++i) {
      for (std::size_t j = i + 1; j < items.size(); ++j) {
        if (items[i].w == items[j].w) continue;
        double d2 = 0.0;
        for (std::size_t t = 0; t < items[i].vec.size(); ++t) {
          const double diff = items[i].vec[t] - items[j].vec[t];
          d2 += diff * diff;
        }
        const double dist = std::sqrt(d2);
        if (dist <= options.match_tol) {
          links.push_back({dist, static_cast<int>(i), static_cast<int>(j)});
        }
      }
    }
    std::stable_sort(links.begin(), links.end(), [](const Link& x, const Link& y) {
      if (x.dist != y.dist) return x.dist < y.dist;
      return std::pair(x.a, x.b) < std::pair(y.a, y.b);
    });
    for (const auto& link : links) {
      const int ra = find_root(link.a);
      const int rb = find_root(link.b);
      if (ra == rb) continue;
      // Merge only when the pair sets stay disjoint.
      std::set<int> pairs_a, pairs_b;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (find_root(static_cast<int>(i)) == ra) pairs_a.insert(items[i].w);
        if (find_root(static_cast<int>(i)) == rb) pairs_b.insert(items[i].w);
      }
      bool disjoint = true;
      for (int w : pairs_a) {
        if (pairs_b.count(w)) {
          disjoint = false;
          break;
        }
      }
      if (disjoint) {
        cluster_of[static_cast<std::size_t>(rb)] = ra;
      } else {
        model.flags.push_back("ambiguous alignment: near-duplicate vectors within pair " +
                              std::to_string(items[static_cast<std::size_t>(link.b)].w) +
                              " resolved by best distance");
      }
    }
  }

  // Deterministic cluster list, ordered by smallest (w, cand) member.
  std::vector<std::vector<int>> clusters;
  {
    std::map<int, std::vector<int>> by_root;
    for (std::size_t i = 0; i < items.size(); ++i) {
      by_root[find_root(static_cast<int>(i))].push_back(static_cast<int>(i));
    }
    for (auto& [root, member] : by_root) {
      (void)root;
      clusters.push_back(std::move(member));
    }
    std::sort(clusters.begin(), clusters.end(), [&](const auto& x, const auto& y) {
      return std::pair(items[static_cast<std::size_t>(x.front())].w,
                       items[static_cast<std::size_t>(x.front())].cand) <
             std::pair(items[static_cast<std::size_t>(y.front())].w,
                       items[static_cast<std::size_t>(y.front())].cand);
    });
  }

  // Candidate clusters per pair, to drive the role assignment: every pair
  // must end up with exactly one noise-role candidate.
  std::map<int, std::vector<int>> clusters_of_pair;
  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    for (int item : clusters[ci]) {
      clusters_of_pair[items[static_cast<std::size_t>(item)].w].push_back(static_cast<int>(ci));
    }
  }

  auto build_groups = [&](const std::vector<int>& latent_clusters) {
    std::vector<LatentGroup> groups;
    for (int ci : latent_clusters) {
      LatentGroup group;
      group.first_order = common_lo;
      group.cumulant_vector.assign(static_cast<std::size_t>(k_max - common_lo + 1), 0.0);
      for (int item_idx : clusters[static_cast<std::size_t>(ci)]) {
        const auto& item = items[static_cast<std::size_t>(item_idx)];
        group.members.emplace_back(item.w, item.cand);
        group.effects[item.w] = item.effect;
        for (std::size_t t = 0; t < item.vec.size(); ++t) group.cumulant_vector[t] += item.vec[t];
      }
      for (auto& v : group.cumulant_vector) {
        v /= static_cast<double>(clusters[static_cast<std::size_t>(ci)].size());
      }
      groups.push_back(std::move(group));
    }
    return groups;
  };

  auto evaluate = [&](const std::vector<int>& roles /* 1 = latent */) -> Labeling {
    Labeling lab;
    lab.score = std::numeric_limits<double>::infinity();

    // Noise candidate per pair: the unique candidate in a noise cluster.
    std::map<int, int> noise_candidate;
    std::map<int, double> source_effects;
    for (const auto& [w, est] : per_pair) {
      if (est.ell < 1) {
        noise_candidate[w] = 0;
        source_effects[w] = est.effects.front();
      }
    }
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
      if (roles[ci] == 1) continue;
      for (int item_idx : clusters[ci]) {
        const auto& item = items[static_cast<std::size_t>(item_idx)];
        noise_candidate[item.w] = item.cand;
        source_effects[item.w] = item.effect;
      }
    }

    std::vector<int> latent_clusters;
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
      if (roles[ci] == 1) latent_clusters.push_back(static_cast<int>(ci));
    }
    std::vector<LatentGroup> groups = build_groups(latent_clusters);

    SourceModel trial;
    trial.source = source;
    trial.groups = groups;
    trial.source_effects = source_effects;
    const Eigen::MatrixXd columns = fill_b_columns(trial, c.dim());
    OverallSolve solve = solve_overall(c, source, columns, options.rank_check_tol);
    lab.latent_clusters = latent_clusters;
    lab.noise_candidate = noise_candidate;
    lab.columns = columns;
    lab.groups = std::move(groups);
    lab.solve = std::move(solve);
    if (lab.solve.singular) return lab;

    // Consistency score: the overall solution must reproduce the group
    // vectors, and the per-pair noise vector must equal the source noise
    // plus the latents the pair does not see.
    double score = lab.solve.residual;
    for (std::size_t g = 0; g < lab.groups.size(); ++g) {
      const auto& group = lab.groups[g];
      std::vector<double> overall_slice;
      for (int k = common_lo; k <= k_max; ++k) {
        overall_slice.push_back(lab.solve.omegas[g + 1].at_order(k));
      }
      score += squared_rel_diff(overall_slice, group.cumulant_vector);
    }
    for (const auto& [w, est] : per_pair) {
      const auto& noise_vec = est.omegas[static_cast<std::size_t>(lab.noise_candidate.at(w))];
      std::vector<double> predicted, observed;
      for (int k = noise_vec.first_order; k <= k_max; ++k) {
        double value = lab.solve.omegas[0].at_order(k);
        for (std::size_t g = 0; g < lab.groups.size(); ++g) {
          if (!lab.groups[g].effects.count(w)) value += lab.solve.omegas[g + 1].at_order(k);
        }
        predicted.push_back(value);
        observed.push_back(noise_vec.at_order(k));
      }
      score += squared_rel_diff(predicted, observed);
    }
    lab.score = score;
    return lab;
  };

  // Enumerate feasible role assignments: each cluster is either one
  // latent or carries the per-pair noise candidates; a pair must contain
  // exactly one noise candidate.
  Labeling best;
  bool any_feasible = false;
  bool any_solvable = false;
  int evaluated = 0;

  std::vector<int> roles(clusters.size(), -1);
  std::function<void(std::size_t)> search = [&](std::size_t ci) {
    if (evaluated >= options.max_labelings) return;
    if (ci == clusters.size()) {
      for (const auto& [w, cl] : clusters_of_pair) {
        (void)w;
        int noise_count = 0;
        for (int cidx : cl) {
          if (roles[static_cast<std::size_t>(cidx)] == 0) ++noise_count;
        }
        if (noise_count != 1) return;
      }
      ++evaluated;
      any_feasible = true;
      Labeling lab = evaluate(roles);
      if (!lab.solve.singular) {
        any_solvable = true;
        if (lab.score < best.score) best = std::move(lab);
      }
      return;
    }
    for (int role : {1, 0}) {
      roles[ci] = role;
      // Early pruning: no pair may already exceed one noise candidate,
      // and every fully-assigned pair needs exactly one.
      bool ok = true;
      for (const auto& [w, cl] : clusters_of_pair) {
        (void)w;
        int noise_count = 0;
        int unassigned = 0;
        for (int cidx : cl) {
          const int r = roles[static_cast<std::size_t>(cidx)];
          if (r == 0) ++noise_count;
          if (r == -1) ++unassigned;
        }
        if (noise_count > 1 || (unassigned == 0 && noise_count != 1)) {
          ok = false;
          break;
        }
      }
      if (ok) search(ci + 1);
      roles[ci] = -1;
    }
  };
  search(0);

  if (!items.empty() && !any_feasible) {
    throw InconsistentAlignment("no candidate-role assignment matches the pairwise counts");
  }
  if (items.empty()) {
    // No latents at this source; only the noise column remains.
    for (const auto& [w, est] : per_pair) {
      model.noise_candidate[w] = 0;
      model.source_effects[w] = est.effects.front();
    }
    const Eigen::MatrixXd columns = fill_b_columns(model, c.dim());
    const auto overall =
        overall_source_cumulants(c, source, columns, options.rank_check_tol, options.iteration);
    model.overall = overall.omegas;
    model.rank_ratio = overall.rank_ratio;
    return model;
  }
  if (!any_solvable) {
    throw Underdetermined("source cumulant system is rank-deficient in iteration " +
                              std::to_string(options.iteration),
                          options.iteration);
  }
  if (evaluated >= options.max_labelings) {
    model.flags.push_back("candidate-role search capped; using best assignment found");
  }

  model.groups = best.groups;
  model.noise_candidate = best.noise_candidate;
  for (const auto& [w, cand] : best.noise_candidate) {
    const auto& est = per_pair.at(w);
    model.source_effects[w] = est.effects[static_cast<std::size_t>(cand)];
  }
  model.overall = best.solve.omegas;
  model.rank_ratio = best.solve.rank_ratio;
  for (const auto& group : model.groups) {
    if (group.members.size() == 1) {
      model.flags.push_back("latent seen in a single pair (node " +
                            std::to_string(group.members.front().first) + ")");
    }
  }
  return model;
}

int required_order(int ell_max) { return minimal_orders(ell_max).k2; }

namespace {

DiscoveryResult discover_impl(CumulantSet cum, long long n, const DiscoverOptions& options) {
  const int p = cum.dim();
  if (options.ell_max < 0) throw InvalidArgument("ell_max must be non-negative");
  const int needed = required_order(options.ell_max);
  if (needed > 8) throw InvalidArgument("ell_max too large: cumulant orders above 8 required");
  if (cum.max_order() < needed) {
    throw InvalidArgument("cumulants up to order " + std::to_string(needed) +
                          " required for ell_max = " + std::to_string(options.ell_max));
  }
  if (!options.exact_mode && options.threshold_override < 0.0 && n < 1) {
    throw InvalidArgument("sample size required for the threshold schedule");
  }

  const double match_tol =
      options.match_tol >= 0.0 ? options.match_tol : (options.exact_mode ? 1e-6 : 0.1);
  const double support_tol =
      options.support_tol >= 0.0 ? options.support_tol : (options.exact_mode ? 1e-7 : 1e-3);

  DiscoveryResult result;
  std::vector<int> labels(static_cast<std::size_t>(p));
  std::iota(labels.begin(), labels.end(), 0);

  Eigen::MatrixXd observed_block = Eigen::MatrixXd::Zero(p, p);
  std::vector<Eigen::VectorXd> latent_columns;

  std::map<std::pair<int, int>, int> bounds;  // original labels
  for (int v = 0; v < p; ++v) {
    for (int w = 0; w < p; ++w) {
      if (v != w) bounds[{v, w}] = options.ell_max;
    }
  }

  int iteration = 0;
  while (static_cast<int>(labels.size()) > 1) {
    ++iteration;
    const int d = static_cast<int>(labels.size());
    const double threshold = options.threshold_override >= 0.0
                                 ? options.threshold_override
                                 : (options.exact_mode
                                        ? 1e-7
                                        : threshold_schedule(n, iteration) * options.threshold_scale);

    std::vector<std::vector<int>> bound_matrix(static_cast<std::size_t>(d),
                                               std::vector<int>(static_cast<std::size_t>(d), 0));
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        if (a != b) {
          bound_matrix[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
              bounds.at({labels[static_cast<std::size_t>(a)], labels[static_cast<std::size_t>(b)]});
        }
      }
    }

    FindSourceOutcome outcome = find_source(cum, bound_matrix, threshold);
    const int s = outcome.source;
    const int s_label = labels[static_cast<std::size_t>(s)];

    IterationDiagnostic diag;
    diag.iteration = iteration;
    diag.source = s_label;
    diag.threshold = threshold;
    diag.flags = outcome.flags;
    std::map<std::pair<int, int>, std::optional<int>> pair_ells;
    for (auto test : outcome.tests) {
      pair_ells[{test.v, test.w}] = test.ell;
      test.v = labels[static_cast<std::size_t>(test.v)];
      test.w = labels[static_cast<std::size_t>(test.w)];
      diag.pair_tests.push_back(std::move(test));
    }

    // Pairwise effect and cumulant estimation on the raw marginals.
    std::map<int, PairwiseEstimate> per_pair;
    for (int w = 0; w < d; ++w) {
      if (w == s) continue;
      const auto& ell_opt = pair_ells.at({s, w});
      const int bound =
          bound_matrix[static_cast<std::size_t>(s)][static_cast<std::size_t>(w)];
      int ell_first = ell_opt ? *ell_opt : bound;
      if (!ell_opt) {
        diag.flags.push_back("pair (" + std::to_string(s_label) + ", " +
                             std::to_string(labels[static_cast<std::size_t>(w)]) +
                             ") unresolved; treated at the bound");
      }
      const CumulantSet pair = marginal_cumulants(cum, s, w);
      bool done = false;
      std::string last_error;
      for (int ell_try = ell_first; ell_try <= bound && !done; ++ell_try) {
        if (ell_try != ell_first) {
          const CumulantSet std_pair = standardized_pair_cumulants(cum, s, w);
          const RankDecision dec =
              rank_deficiency_test(build_A(std_pair, minimal_orders(ell_try)), ell_try, threshold);
          if (!dec.accepted) continue;
          diag.flags.push_back("pair (" + std::to_string(s_label) + ", " +
                               std::to_string(labels[static_cast<std::size_t>(w)]) +
                               ") degraded to ell = " + std::to_string(ell_try));
        }
        try {
          per_pair[w] = estimate_pair(pair, ell_try, cum.max_order());
          done = true;
        } catch (const EstimationFailure& e) {
          last_error = e.what();
        } catch (const IllConditioned& e) {
          last_error = e.what();
        }
      }
      if (!done) {
        throw EstimationFailure("pairwise estimation failed for (" + std::to_string(s_label) +
                                ", " + std::to_string(labels[static_cast<std::size_t>(w)]) +
                                "): " + last_error);
      }
    }

    AlignOptions align_options;
    align_options.match_tol = match_tol;
    align_options.rank_check_tol = options.rank_check_tol;
    align_options.iteration = iteration;
    SourceModel model = align_latents(cum, s, per_pair, align_options);
    for (const auto& flag : model.flags) diag.flags.push_back(flag);

    // Fill the path matrix columns in original labels.
    observed_block(s_label, s_label) = 1.0;
    for (const auto& [w, effect] : model.source_effects) {
      observed_block(labels[static_cast<std::size_t>(w)], s_label) = effect;
    }
    for (const auto& group : model.groups) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(p);
      col(s_label) = 1.0;
      for (const auto& [w, effect] : model.source_effects) {
        auto it = group.effects.find(w);
        col(labels[static_cast<std::size_t>(w)]) = it != group.effects.end() ? it->second : effect;
      }
      latent_columns.push_back(std::move(col));
    }

    for (auto group : model.groups) {
      LatentGroup relabeled = group;
      relabeled.members.clear();
      relabeled.effects.clear();
      for (const auto& [w, cand] : group.members) {
        relabeled.members.emplace_back(labels[static_cast<std::size_t>(w)], cand);
      }
      for (const auto& [w, effect] : group.effects) {
        relabeled.effects[labels[static_cast<std::size_t>(w)]] = effect;
      }
      diag.groups.push_back(std::move(relabeled));
    }
    diag.source_rank_ratio = model.rank_ratio;

    // Remove the source and its latents from the cumulants.
    const Eigen::MatrixXd columns = fill_b_columns(model, d);
    cum = subtract_component_cumulants(cum, s, columns, model.overall);

    // Confounding-bound bookkeeping for the next iteration: a resolved
    // count drops by the confounders removed with this source; an
    // unresolved pair restarts from its bound + 1.
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        if (a == b || a == s || b == s) continue;
        const int la = labels[static_cast<std::size_t>(a)];
        const int lb = labels[static_cast<std::size_t>(b)];
        const auto& ell_opt = pair_ells.at({a, b});
        int raw = ell_opt
                      ? *ell_opt
                      : bound_matrix[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] + 1;
        int shared = 0;
        for (const auto& group : model.groups) {
          if (group.effects.count(a) && group.effects.count(b)) ++shared;
        }
        const double effect_a = std::abs(columns(a, 0));
        const double effect_b = std::abs(columns(b, 0));
        if (effect_a > support_tol && effect_b > support_tol) ++shared;
        bounds[{la, lb}] = std::clamp(raw - shared, 0, options.ell_max);
      }
    }

    result.order.push_back(s_label);
    result.iterations.push_back(std::move(diag));
    labels.erase(labels.begin() + s);
  }

  // Last remaining node: its noise cumulants are the residual cumulants.
  const int last_label = labels.front();
  observed_block(last_label, last_label) = 1.0;
  result.order.push_back(last_label);

  result.ell_hat = static_cast<int>(latent_columns.size());
  result.b_hat.p = p;
  result.b_hat.ell = result.ell_hat;
  result.b_hat.values.resize(p, p + result.ell_hat);
  result.b_hat.values.leftCols(p) = observed_block;
  for (std::size_t j = 0; j < latent_columns.size(); ++j) {
    result.b_hat.values.col(p + static_cast<Eigen::Index>(j)) = latent_columns[j];
  }

  const ParamSet params = recover_params(result.b_hat);
  result.implied_graph = graph_from_params(params, support_tol);
  result.candidates = enumerate_compatible(result.b_hat, result.implied_graph, support_tol);
  return result;
}

}  // namespace

DiscoveryResult discover(const Dataset& data, const DiscoverOptions& options) {
  const int p = data.p();
  if (p < 1) throw InvalidArgument("dataset has no columns");
  if (data.n() < p + 1) throw InvalidArgument("need at least p + 1 samples");
  const int needed = required_order(options.ell_max);
  const int k_max = std::max(options.k_max, needed);
  if (k_max > 8) throw InvalidArgument("cumulant orders above 8 are not supported");
  const Dataset centered_data = centered(data);
  CumulantSet cum = sample_cumulants(centered_data, std::max(2, k_max));
  return discover_impl(std::move(cum), data.n(), options);
}

DiscoveryResult discover(const CumulantSet& cumulants, long long n,
                         const DiscoverOptions& options) {
  return discover_impl(cumulants, n, options);
}

}  // namespace relv
