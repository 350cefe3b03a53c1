#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relvlingam/cumulants.hpp"
#include "relvlingam/graph.hpp"
#include "relvlingam/pairwise.hpp"
#include "relvlingam/rank_tests.hpp"

namespace relv {

// One aligned latent: the pairs in which its cumulant vector appeared,
// the estimated effect on each of those nodes, and the shared vector.
struct LatentGroup {
  int first_order = 2;
  std::vector<double> cumulant_vector;       // orders first_order..k_max
  std::vector<std::pair<int, int>> members;  // (node, candidate index)
  std::map<int, double> effects;             // node -> effect of the latent
};

// Final decision of one directed rank test.
struct PairTest {
  int v = 0, w = 0;
  std::optional<int> ell;  // accepted confounder count
  int bound = 0;           // per-pair search bound
  int k1 = 0, k2 = 0;      // orders at the final tested level
  std::vector<double> singular_values;
  double ratio = 0.0;
  double threshold = 0.0;
  bool accepted = false;
};

struct FindSourceOutcome {
  int source = 0;
  std::vector<PairTest> tests;  // all ordered pairs, sorted by (v, w)
  std::vector<std::string> flags;
};

// Runs the directed rank tests for every ordered pair under the given
// per-pair bounds and picks the node minimizing the summed confounder
// counts (absent counts as bound + 1); ties break on the lowest average
// singular-value ratio, then the lowest index.
FindSourceOutcome find_source(const CumulantSet& c,
                              const std::vector<std::vector<int>>& bounds, double threshold);

// Result of aligning the pairwise estimates at one source: latent groups,
// the per-node source effects, and the cumulants of the source's noise
// and latents in the overall model (orders 2..k_max).
struct SourceModel {
  int source = 0;
  std::vector<LatentGroup> groups;
  std::map<int, double> source_effects;           // node w -> b_{ws}
  std::map<int, int> noise_candidate;             // node w -> candidate treated as noise
  std::vector<SourceCumulantVector> overall;      // noise first, then one per group
  double rank_ratio = 0.0;                        // singular ratio of the linear system
  std::vector<std::string> flags;
};

struct AlignOptions {
  double match_tol = 0.1;
  double rank_check_tol = 1e-7;
  int iteration = 1;
  int max_labelings = 512;
};

// Groups the candidate cumulant vectors across the pairwise models,
// decides which candidate of each pair is the source's own noise, and
// estimates the overall source cumulants. Candidate-role assignments
// that cannot be anchored by cross-pair matches are resolved by scoring
// the consistency between the overall linear system's solution and the
// pairwise vectors. Throws Underdetermined when every feasible
// assignment leaves the linear system rank-deficient.
SourceModel align_latents(const CumulantSet& c, int source,
                          const std::map<int, PairwiseEstimate>& per_pair,
                          const AlignOptions& options);

// Columns of the total-effect matrix for the source's noise and latents
// over the current variable set: column 0 is the noise column, then one
// column per group. Entries at nodes outside a group fall back to the
// source effect (a latent reaches them only through the source).
Eigen::MatrixXd fill_b_columns(const SourceModel& model, int dim);

struct OverallCumulants {
  std::vector<SourceCumulantVector> omegas;
  double rank_ratio = 0.0;
  double max_residual = 0.0;
};

// Solves, per order k, the linear system with rows (effects of each
// source on node w) against (c_{s..s}, c_{s..s w})_w by least squares.
// Throws Underdetermined when the coefficient matrix is rank-deficient at
// rank_tol.
OverallCumulants overall_source_cumulants(const CumulantSet& c, int source,
                                          const Eigen::MatrixXd& columns, double rank_tol,
                                          int iteration);

struct IterationDiagnostic {
  int iteration = 0;
  int source = 0;  // original label
  double threshold = 0.0;
  std::vector<PairTest> pair_tests;    // original labels
  std::vector<LatentGroup> groups;     // original labels
  double source_rank_ratio = 0.0;
  std::vector<std::string> flags;
};

struct DiscoveryResult {
  std::vector<int> order;  // elimination order, original labels
  int ell_hat = 0;
  PathMatrix b_hat;
  LatentDag implied_graph;
  std::vector<PathMatrix> candidates;
  std::vector<IterationDiagnostic> iterations;
};

struct DiscoverOptions {
  int ell_max = 1;
  int k_max = 0;                    // 0: smallest admissible for ell_max
  bool exact_mode = false;          // population cumulants: fixed tight thresholds
  double threshold_scale = 1.0;     // multiplies the schedule
  double threshold_override = -1.0; // fixed rank-test threshold when >= 0
  double match_tol = -1.0;          // alignment tolerance; < 0: 0.1 (1e-6 exact)
  double support_tol = -1.0;        // edge support cut; < 0: 1e-3 (1e-7 exact)
  double rank_check_tol = 1e-7;     // rank guard of the source-cumulant system
};

// Smallest cumulant order needed to run discovery with the given bound on
// pairwise confounding.
int required_order(int ell_max);

DiscoveryResult discover(const Dataset& data, const DiscoverOptions& options);
DiscoveryResult discover(const CumulantSet& cumulants, long long n, const DiscoverOptions& options);

}  // namespace relv
