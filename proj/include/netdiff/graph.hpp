#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace netdiff {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Undirected edge between 1-based agent indices, stored with first < second.
struct Edge {
  int i = 0;
  int j = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Connected undirected graph on agents 1..N.
///
/// Edges keep their insertion order; that order fixes the column order of the
/// incidence matrix. Each edge is normalized to (min, max).
class Graph {
 public:
  Graph(int n_agents, std::vector<Edge> edges) : n_(n_agents), edges_(std::move(edges)) {
    if (n_ < 1) throw GraphError("graph needs at least one agent");
    std::set<std::pair<int, int>> seen;
    for (auto& e : edges_) {
      if (e.i == e.j) throw GraphError("self-loop on agent " + std::to_string(e.i));
      if (e.i > e.j) std::swap(e.i, e.j);
      if (e.i < 1 || e.j > n_)
        throw GraphError("edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ") out of range");
      if (!seen.emplace(e.i, e.j).second)
        throw GraphError("duplicate edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ")");
    }
    if (!connected()) throw GraphError("graph is not connected");
  }

  int n_agents() const { return n_; }
  int n_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }

  /// 0-based neighbour lists.
  std::vector<std::vector<int>> neighbours() const {
    std::vector<std::vector<int>> adj(n_);
    for (const auto& e : edges_) {
      adj[e.i - 1].push_back(e.j - 1);
      adj[e.j - 1].push_back(e.i - 1);
    }
    return adj;
  }

 private:
  bool connected() const {
    if (n_ == 1) return true;
    auto adj = neighbours();
    std::vector<bool> seen(n_, false);
    std::vector<int> stack{0};
    seen[0] = true;
    int count = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (!seen[w]) {
          seen[w] = true;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == n_;
  }

  int n_;
  std::vector<Edge> edges_;
};

inline Graph path_graph(int n) {
  std::vector<Edge> edges;
  for (int k = 1; k < n; ++k) edges.push_back({k, k + 1});
  return Graph(n, edges);
}

/// Ring: (1,2),(2,3),...,(n-1,n),(1,n). For n = 2 this is a single edge.
inline Graph ring_graph(int n) {
  if (n < 3) return path_graph(n);
  std::vector<Edge> edges;
  for (int k = 1; k < n; ++k) edges.push_back({k, k + 1});
  edges.push_back({1, n});
  return Graph(n, edges);
}

inline Graph complete_graph(int n) {
  std::vector<Edge> edges;
  for (int a = 1; a <= n; ++a)
    for (int b = a + 1; b <= n; ++b) edges.push_back({a, b});
  return Graph(n, edges);
}

/// Parses generator specs of the form "ring:5", "path:2", "complete:3".
inline Graph graph_from_generator(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos) throw GraphError("generator spec must look like kind:n, got '" + spec + "'");
  std::string kind = spec.substr(0, colon);
  int n = 0;
  try {
    n = std::stoi(spec.substr(colon + 1));
  } catch (const std::exception&) {
    throw GraphError("bad agent count in '" + spec + "'");
  }
  if (kind == "ring") return ring_graph(n);
  if (kind == "path") return path_graph(n);
  if (kind == "complete") return complete_graph(n);
  throw GraphError("unknown graph generator '" + kind + "'");
}

/// N x |E| oriented incidence: +1 at the lower-indexed endpoint, -1 at the other.
inline Mat incidence(const Graph& g) {
  Mat d = Mat::Zero(g.n_agents(), g.n_edges());
  for (int l = 0; l < g.n_edges(); ++l) {
    d(g.edges()[l].i - 1, l) = 1.0;
    d(g.edges()[l].j - 1, l) = -1.0;
  }
  return d;
}

inline Mat laplacian(const Graph& g) {
  Mat d = incidence(g);
  return d * d.transpose();
}

/// Smallest nonzero eigenvalue of a graph Laplacian. "Nonzero" means above
/// 1e-9 times the largest eigenvalue; a second zero eigenvalue means the graph
/// is disconnected.
inline double algebraic_connectivity(const Mat& lap) {
  if (lap.rows() < 2) throw GraphError("algebraic connectivity needs at least two agents");
  Eigen::SelfAdjointEigenSolver<Mat> es(lap, Eigen::EigenvaluesOnly);
  const Vec& ev = es.eigenvalues();
  double cutoff = 1e-9 * ev.maxCoeff();
  if (ev(1) <= cutoff) throw GraphError("graph is disconnected (lambda_2 = 0)");
  return ev(1);
}

inline double algebraic_connectivity(const Graph& g) { return algebraic_connectivity(laplacian(g)); }

/// Largest singular value of the incidence matrix.
inline double incidence_spectral_norm(const Graph& g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(laplacian(g), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

inline Mat consensus_projector(int n) {
  if (n < 1) throw GraphError("projector dimension must be positive");
  return Mat::Identity(n, n) - Mat::Constant(n, n, 1.0 / n);
}

inline Vec project_to_zero_mean(const Vec& v) {
  if (v.size() == 0) return v;
  return v.array() - v.mean();
}

}  // namespace netdiff
