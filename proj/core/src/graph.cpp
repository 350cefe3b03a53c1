#include "relvlingam/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

#include "relvlingam/errors.hpp"

namespace relv {

namespace {

void check_node(const LatentDag& g, int v) {
  if (v < 0 || v >= g.p) throw InvalidArgument("observed node index out of range");
}

void check_latent(const LatentDag& g, int j) {
  if (j < 0 || j >= g.ell) throw InvalidArgument("latent index out of range");
}

}  // namespace

std::vector<int> LatentDag::observed_children(int v) const {
  std::vector<int> out;
  for (const auto& [j, i] : observed_edges) {
    if (j == v) out.push_back(i);
  }
  return out;
}

std::vector<int> LatentDag::latent_children(int j) const {
  std::vector<int> out;
  for (const auto& [lj, i] : latent_edges) {
    if (lj == j) out.push_back(i);
  }
  return out;
}

std::vector<int> LatentDag::observed_parents(int v) const {
  std::vector<int> out;
  for (const auto& [j, i] : observed_edges) {
    if (i == v) out.push_back(j);
  }
  return out;
}

std::vector<int> LatentDag::latent_parents(int v) const {
  std::vector<int> out;
  for (const auto& [j, i] : latent_edges) {
    if (i == v) out.push_back(j);
  }
  return out;
}

std::set<int> LatentDag::observed_descendants(int v) const {
  std::set<int> seen;
  std::queue<int> queue;
  queue.push(v);
  seen.insert(v);
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop();
    for (int c : observed_children(cur)) {
      if (seen.insert(c).second) queue.push(c);
    }
  }
  return seen;
}

std::set<int> LatentDag::latent_observed_descendants(int j) const {
  std::set<int> out;
  for (int c : latent_children(j)) {
    auto d = observed_descendants(c);
    out.insert(d.begin(), d.end());
  }
  return out;
}

std::vector<int> LatentDag::topological_order() const {
  std::vector<int> indeg(static_cast<std::size_t>(p), 0);
  for (const auto& [j, i] : observed_edges) {
    (void)j;
    ++indeg[static_cast<std::size_t>(i)];
  }
  std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
  for (int v = 0; v < p; ++v) {
    if (indeg[static_cast<std::size_t>(v)] == 0) ready.push(v);
  }
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(p));
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (int c : observed_children(v)) {
      if (--indeg[static_cast<std::size_t>(c)] == 0) ready.push(c);
    }
  }
  if (static_cast<int>(order.size()) != p) {
    throw InvalidModel("observed subgraph contains a cycle");
  }
  return order;
}

void LatentDag::validate() const {
  if (p < 1) throw InvalidModel("graph needs at least one observed node");
  if (ell < 0) throw InvalidModel("negative latent count");
  for (const auto& [j, i] : observed_edges) {
    if (j < 0 || j >= p || i < 0 || i >= p || j == i) {
      throw InvalidModel("observed edge out of range");
    }
  }
  for (const auto& [j, i] : latent_edges) {
    if (j < 0 || j >= ell || i < 0 || i >= p) throw InvalidModel("latent edge out of range");
  }
  topological_order();
  for (int j = 0; j < ell; ++j) {
    if (static_cast<int>(latent_children(j).size()) < 2) {
      throw InvalidModel("latent " + std::to_string(j + 1) + " needs at least two children");
    }
  }
}

PathMatrix path_matrix(const ParamSet& params) {
  const int p = params.p();
  const int ell = params.ell();
  if (params.lambda.cols() != p) throw InvalidArgument("lambda must be square");
  if (params.gamma.rows() != p && ell > 0) throw InvalidArgument("gamma rows must match p");

  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p, p) - params.lambda;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) throw InvalidModel("I - Lambda is singular");

  Eigen::MatrixXd rhs(p, p + ell);
  rhs.leftCols(p) = Eigen::MatrixXd::Identity(p, p);
  if (ell > 0) rhs.rightCols(ell) = params.gamma;

  PathMatrix b;
  b.p = p;
  b.ell = ell;
  b.values = lu.solve(rhs);
  return b;
}

ParamSet recover_params(const PathMatrix& b) {
  const int p = b.p;
  const int ell = b.ell;
  if (b.values.rows() != p || b.values.cols() != p + ell) {
    throw InvalidArgument("path matrix shape mismatch");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(b.values.leftCols(p));
  if (!lu.isInvertible()) throw InvalidArgument("observed block of B is singular");

  ParamSet params;
  params.lambda = Eigen::MatrixXd::Identity(p, p) - lu.inverse();
  params.gamma = (Eigen::MatrixXd::Identity(p, p) - params.lambda) * b.values.rightCols(ell);
  return params;
}

std::vector<int> exog_set(const LatentDag& g, int v) {
  check_node(g, v);
  const auto desc_v = g.observed_descendants(v);
  std::vector<int> out;
  for (int j : g.latent_parents(v)) {
    if (g.latent_observed_descendants(j) == desc_v) out.push_back(j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> sib_set(const LatentDag& g, int v) {
  check_node(g, v);
  std::set<int> sibs;
  for (int j : g.observed_parents(v)) {
    for (int c : g.observed_children(j)) {
      if (c != v) sibs.insert(c);
    }
  }
  for (int j : g.latent_parents(v)) {
    for (int c : g.latent_children(j)) {
      if (c != v) sibs.insert(c);
    }
  }
  return {sibs.begin(), sibs.end()};
}

namespace {

// Adjacency over the joint node set: observed v -> v, latent j -> p + j.
std::vector<std::vector<int>> joint_children(const LatentDag& g) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.p + g.ell));
  for (const auto& [j, i] : g.observed_edges) adj[static_cast<std::size_t>(j)].push_back(i);
  for (const auto& [j, i] : g.latent_edges) adj[static_cast<std::size_t>(g.p + j)].push_back(i);
  return adj;
}

// Do directed paths z -> v and z -> w exist that share no node besides z?
bool disjoint_paths_exist(const std::vector<std::vector<int>>& adj, int z, int v, int w) {
  // Enumerate simple paths z -> v; for each, search z -> w avoiding the
  // interior of the first path. Graphs here are small.
  std::vector<char> used(adj.size(), 0);
  std::vector<int> path{z};
  used[static_cast<std::size_t>(z)] = 1;

  std::function<bool(int)> reach_w_avoiding = [&](int cur) -> bool {
    if (cur == w) return true;
    for (int nxt : adj[static_cast<std::size_t>(cur)]) {
      if (used[static_cast<std::size_t>(nxt)]) continue;
      used[static_cast<std::size_t>(nxt)] = 1;
      const bool ok = reach_w_avoiding(nxt);
      used[static_cast<std::size_t>(nxt)] = 0;
      if (ok) return true;
    }
    return false;
  };

  std::function<bool(int)> extend_to_v = [&](int cur) -> bool {
    if (cur == v) {
      return reach_w_avoiding(z);
    }
    for (int nxt : adj[static_cast<std::size_t>(cur)]) {
      if (used[static_cast<std::size_t>(nxt)]) continue;
      used[static_cast<std::size_t>(nxt)] = 1;
      const bool ok = extend_to_v(nxt);
      used[static_cast<std::size_t>(nxt)] = 0;
      if (ok) return true;
    }
    return false;
  };

  return extend_to_v(z);
}

}  // namespace

std::vector<int> conf_set(const LatentDag& g, int v, int w) {
  check_node(g, v);
  check_node(g, w);
  if (v == w) throw InvalidArgument("conf_set needs two distinct nodes");
  const auto adj = joint_children(g);
  std::vector<int> out;
  for (int z = 0; z < g.p + g.ell; ++z) {
    if (z == v || z == w) continue;
    if (disjoint_paths_exist(adj, z, v, w)) out.push_back(z);
  }
  return out;
}

long long count_compatible(const LatentDag& g) {
  long long n = 1;
  for (int v = 0; v < g.p; ++v) {
    n *= static_cast<long long>(exog_set(g, v).size()) + 1;
  }
  return n;
}

long long count_sparsest(const LatentDag& g) {
  long long n = 1;
  for (int v = 0; v < g.p; ++v) {
    const auto sibs = sib_set(g, v);
    long long count = 0;
    for (int j : exog_set(g, v)) {
      const auto ch = g.latent_children(j);
      const std::set<int> ch_set(ch.begin(), ch.end());
      bool ok = true;
      for (int s : sibs) {
        if (ch_set.count(s) == 0) {
          ok = false;
          break;
        }
      }
      if (ok) {
        const auto ch_v = g.observed_children(v);
        std::set<int> upper(ch_v.begin(), ch_v.end());
        upper.insert(v);
        for (int c : ch_set) {
          if (upper.count(c) == 0) {
            ok = false;
            break;
          }
        }
      }
      if (ok) ++count;
    }
    n *= count + 1;
  }
  return n;
}

int oldest_child(const LatentDag& g, int j) {
  check_latent(g, j);
  const auto children = g.latent_children(j);
  if (children.empty()) throw InvalidModel("latent without children");
  std::vector<int> oldest;
  for (int c : children) {
    bool has_older = false;
    for (int other : children) {
      if (other == c) continue;
      if (g.observed_descendants(other).count(c) > 0) {
        has_older = true;
        break;
      }
    }
    if (!has_older) oldest.push_back(c);
  }
  return *std::min_element(oldest.begin(), oldest.end());
}

ParamSet normalize_latent_scale(const ParamSet& params, const LatentDag& g) {
  ParamSet out = params;
  for (int j = 0; j < g.ell; ++j) {
    const int c = oldest_child(g, j);
    const double scale = out.gamma(c, j);
    if (scale == 0.0) throw InvalidModel("zero weight into the oldest child of a latent");
    out.gamma.col(j) /= scale;
  }
  return out;
}

LatentDag graph_from_params(const ParamSet& params, double tol) {
  LatentDag g;
  g.p = params.p();
  g.ell = params.ell();
  for (int i = 0; i < g.p; ++i) {
    for (int j = 0; j < g.p; ++j) {
      if (i != j && std::abs(params.lambda(i, j)) > tol) g.observed_edges.insert({j, i});
    }
  }
  for (int j = 0; j < g.ell; ++j) {
    for (int i = 0; i < g.p; ++i) {
      if (std::abs(params.gamma(i, j)) > tol) g.latent_edges.insert({j, i});
    }
  }
  return g;
}

std::vector<PathMatrix> enumerate_compatible(const PathMatrix& b, const LatentDag& g,
                                             double support_tol) {
  if (b.p != g.p || b.ell != g.ell) throw InvalidArgument("path matrix and graph dimensions differ");

  std::vector<std::vector<int>> choices(static_cast<std::size_t>(g.p));
  for (int v = 0; v < g.p; ++v) {
    choices[static_cast<std::size_t>(v)].push_back(-1);
    for (int j : exog_set(g, v)) choices[static_cast<std::size_t>(v)].push_back(j);
  }

  std::vector<PathMatrix> out;
  std::vector<int> pick(static_cast<std::size_t>(g.p), 0);
  while (true) {
    PathMatrix cand = b;
    for (int v = 0; v < g.p; ++v) {
      const int choice = choices[static_cast<std::size_t>(v)][static_cast<std::size_t>(pick[static_cast<std::size_t>(v)])];
      if (choice >= 0) cand.values.col(v).swap(cand.values.col(g.p + choice));
    }
    // Renormalize the latent scale against the candidate's own implied
    // structure so the convention is uniform across the list.
    if (g.ell > 0) {
      ParamSet params = recover_params(cand);
      const LatentDag implied = graph_from_params(params, support_tol);
      bool can_normalize = true;
      for (int j = 0; j < implied.ell; ++j) {
        if (implied.latent_children(j).empty()) {
          can_normalize = false;
          break;
        }
      }
      if (can_normalize) {
        params = normalize_latent_scale(params, implied);
        cand = path_matrix(params);
      }
    }
    out.push_back(std::move(cand));

    int v = g.p - 1;
    while (v >= 0 && pick[static_cast<std::size_t>(v)] + 1 ==
                         static_cast<int>(choices[static_cast<std::size_t>(v)].size())) {
      pick[static_cast<std::size_t>(v)] = 0;
      --v;
    }
    if (v < 0) break;
    ++pick[static_cast<std::size_t>(v)];
  }
  return out;
}

ParamSet swap_params(const ParamSet& params, int v, int w) {
  const int p = params.p();
  const int ell = params.ell();
  if (v < 0 || v >= p) throw InvalidArgument("observed node index out of range");
  if (w < 0 || w >= ell) throw InvalidArgument("latent index out of range");

  {
    const LatentDag implied = graph_from_params(params, 1e-12);
    const auto exog = exog_set(implied, v);
    if (std::find(exog.begin(), exog.end(), w) == exog.end()) {
      throw InvalidSwap("latent is not swappable with the node");
    }
  }

  ParamSet out = params;
  auto delta = [](int a, int c) { return a == c ? 1.0 : 0.0; };
  for (int i = 0; i < p; ++i) {
    const double factor = params.gamma(i, w) - delta(i, v);
    for (int j = 0; j < p; ++j) {
      out.lambda(i, j) = params.lambda(i, j) + factor * (delta(v, j) - params.lambda(v, j));
    }
    for (int j = 0; j < ell; ++j) {
      if (j == w) {
        out.gamma(i, j) = -params.gamma(i, j) + 2.0 * delta(i, v);
      } else {
        out.gamma(i, j) = params.gamma(i, j) - params.gamma(v, j) * factor;
      }
    }
  }
  return out;
}

}  // namespace relv
