#pragma once

#include <Eigen/Dense>
#include <set>
#include <utility>
#include <vector>

namespace relv {

// Mixed acyclic graph: p observed nodes (0..p-1) and ell latent source
// nodes. Latents have no parents and, in a valid model, at least two
// observed children. Edges are stored as (parent, child) pairs.
struct LatentDag {
  int p = 0;
  int ell = 0;
  std::set<std::pair<int, int>> observed_edges;  // (j -> i), both observed
  std::set<std::pair<int, int>> latent_edges;    // (latent j -> observed i)

  bool has_observed_edge(int j, int i) const {
    return observed_edges.count({j, i}) > 0;
  }
  bool has_latent_edge(int j, int i) const { return latent_edges.count({j, i}) > 0; }

  std::vector<int> observed_children(int v) const;
  std::vector<int> latent_children(int j) const;
  std::vector<int> observed_parents(int v) const;
  std::vector<int> latent_parents(int v) const;

  // Observed descendants including the node itself.
  std::set<int> observed_descendants(int v) const;
  // Observed descendants of a latent (union over its children).
  std::set<int> latent_observed_descendants(int j) const;

  // Topological order of the observed subgraph. Throws InvalidModel on a
  // cycle.
  std::vector<int> topological_order() const;

  // Enforces the class invariants: acyclic observed subgraph and every
  // latent with at least two children.
  void validate() const;
};

struct ParamSet {
  Eigen::MatrixXd lambda;  // p x p, entry (i, j) is the weight of j -> i
  Eigen::MatrixXd gamma;   // p x ell

  int p() const { return static_cast<int>(lambda.rows()); }
  int ell() const { return static_cast<int>(gamma.cols()); }
};

// Total-effect matrix: p rows, p + ell columns. Column j holds the total
// effect of exogenous source j (noise j for j < p, latent j - p otherwise)
// on each observed node.
struct PathMatrix {
  int p = 0;
  int ell = 0;
  Eigen::MatrixXd values;
};

// B = (I - Lambda)^{-1} (I | Gamma). Throws InvalidModel if I - Lambda is
// singular.
PathMatrix path_matrix(const ParamSet& params);

// Inverse of path_matrix: Lambda = I - (B_{:, :p})^{-1},
// Gamma = (I - Lambda) B_{:, p:}.
ParamSet recover_params(const PathMatrix& b);

// Latent parents of v with exactly the same observed descendants as v.
// These are the latent columns swappable with v's noise column.
std::vector<int> exog_set(const LatentDag& g, int v);

// Nodes sharing at least one common (observed or latent) parent with v.
std::vector<int> sib_set(const LatentDag& g, int v);

// Common confounders of v and w: nodes z (observed or latent, z not in
// {v, w}) with directed paths to v and to w that share no node besides z.
// Observed node j is reported as j, latent j as p + j.
std::vector<int> conf_set(const LatentDag& g, int v, int w);

// Number of path matrices compatible with the observed distribution:
// product over observed v of |exog(v)| + 1.
long long count_compatible(const LatentDag& g);

// Number of compatible (Lambda, Gamma) pairs with the minimal sparsity
// pattern.
long long count_sparsest(const LatentDag& g);

// Oldest child of latent j: a child none of whose siblings under j is a
// proper ancestor; ties broken by smallest node index.
int oldest_child(const LatentDag& g, int j);

// Rescales every latent column so the weight into its oldest child is 1.
ParamSet normalize_latent_scale(const ParamSet& params, const LatentDag& g);

// Graph implied by the support of the parameters; entries with absolute
// value <= tol count as zero.
LatentDag graph_from_params(const ParamSet& params, double tol = 1e-9);

// All column-swapped path matrices compatible with the same observed
// distribution. The result has length count_compatible(g), contains b
// itself first, and every element is renormalized to the oldest-child
// scale convention of its own implied graph.
std::vector<PathMatrix> enumerate_compatible(const PathMatrix& b, const LatentDag& g,
                                             double support_tol = 1e-9);

// Parameter update for swapping the noise of observed node v with latent
// w in exog(v). Matches recover_params(column-swapped path_matrix).
ParamSet swap_params(const ParamSet& params, int v, int w);

}  // namespace relv
