#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace depaint {

enum class TopologyKind { ring, dense, bipartite };

inline TopologyKind parse_topology(std::string_view name)
{
  if (name == "ring") return TopologyKind::ring;
  if (name == "dense") return TopologyKind::dense;
  if (name == "bipartite") return TopologyKind::bipartite;
  throw std::invalid_argument("unknown topology kind '" + std::string(name) + "' (expected ring, dense or bipartite)");
}

inline std::string_view to_string(TopologyKind kind)
{
  switch (kind) {
    case TopologyKind::ring: return "ring";
    case TopologyKind::dense: return "dense";
    case TopologyKind::bipartite: return "bipartite";
  }
  return "?";
}

/// Undirected simple graph over agents 0..n-1. Edges are stored as (lo, hi)
/// pairs, sorted and unique.
class Graph {
public:
  using Edge = std::pair<std::size_t, std::size_t>;

  Graph(std::size_t n, std::vector<Edge> edges) : n_(n), adjacency_(n)
  {
    if (n == 0) throw std::invalid_argument("graph needs at least one node");
    for (auto& [a, b] : edges) {
      if (a >= n || b >= n) throw std::invalid_argument("edge endpoint out of range");
      if (a == b) throw std::invalid_argument("self-loops are not allowed");
      if (a > b) std::swap(a, b);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);
    for (const auto& [a, b] : edges_) {
      adjacency_[a].push_back(b);
      adjacency_[b].push_back(a);
    }
    for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
  }

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_.at(i); }
  std::size_t degree(std::size_t i) const { return adjacency_.at(i).size(); }

  bool has_edge(std::size_t a, std::size_t b) const
  {
    if (a > b) std::swap(a, b);
    return std::binary_search(edges_.begin(), edges_.end(), Edge{a, b});
  }

  bool connected() const
  {
    std::vector<bool> seen(n_, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t visited = 0;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      ++visited;
      for (std::size_t w : adjacency_[v]) {
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    return visited == n_;
  }

private:
  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

/// Bipartite graphs put agents [0, n/2) on one side and the rest (including
/// the extra agent for odd n) on the other.
inline Graph build_graph(TopologyKind kind, std::size_t n)
{
  if (n == 0) throw std::invalid_argument("agent count must be at least 1");
  std::vector<Graph::Edge> edges;
  switch (kind) {
    case TopologyKind::ring:
      for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      if (n > 2) edges.emplace_back(0, n - 1);
      break;
    case TopologyKind::dense:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      break;
    case TopologyKind::bipartite: {
      if (n < 2) throw std::invalid_argument("bipartite topology needs at least 2 agents");
      const std::size_t split = n / 2;
      for (std::size_t i = 0; i < split; ++i)
        for (std::size_t j = split; j < n; ++j) edges.emplace_back(i, j);
      break;
    }
  }
  return Graph{n, std::move(edges)};
}

/// Symmetric doubly stochastic mixing matrix. Construction validates the
/// stochasticity and sparsity invariants against the graph.
class WeightMatrix {
public:
  static constexpr double kSumTolerance = 1e-12;

  WeightMatrix(const Graph& g, Eigen::MatrixXd w) : w_(std::move(w))
  {
    const auto n = static_cast<Eigen::Index>(g.size());
    if (w_.rows() != n || w_.cols() != n) throw std::invalid_argument("weight matrix shape does not match graph");
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = w_(i, j);
        if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("weight matrix entries must be finite and nonnegative");
        if (v != w_(j, i)) throw std::invalid_argument("weight matrix must be symmetric");
        if (v > 0.0 && i != j && !g.has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j)))
          throw std::invalid_argument("weight on a non-edge");
      }
      if (std::abs(w_.row(i).sum() - 1.0) > kSumTolerance) throw std::invalid_argument("weight matrix row does not sum to 1");
      if (std::abs(w_.col(i).sum() - 1.0) > kSumTolerance) throw std::invalid_argument("weight matrix column does not sum to 1");
    }
    rows_.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (w_(i, j) > 0.0) rows_[static_cast<std::size_t>(i)].push_back({static_cast<std::size_t>(j), w_(i, j)});
  }

  struct Entry {
    std::size_t agent;
    double weight;
  };

  std::size_t size() const noexcept { return rows_.size(); }
  double operator()(std::size_t i, std::size_t j) const
  {
    return w_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& matrix() const noexcept { return w_; }

  /// Nonzero entries of row i (self plus neighbors), ordered by agent index.
  const std::vector<Entry>& row(std::size_t i) const { return rows_.at(i); }

private:
  Eigen::MatrixXd w_;
  std::vector<std::vector<Entry>> rows_;
};

inline WeightMatrix metropolis_weights(const Graph& g)
{
  if (!g.connected()) throw std::invalid_argument("metropolis weights need a connected graph");
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [a, b] : g.edges()) {
    const double v = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(a), g.degree(b))));
    w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
    w(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return WeightMatrix{g, std::move(w)};
}

/// |lambda_2| of a symmetric doubly stochastic matrix: power iteration on W^2
/// restricted to the complement of the all-ones vector.
inline double second_largest_eigenvalue_magnitude(const WeightMatrix& w, double tolerance = 1e-10,
                                                  int max_iterations = 200000)
{
  const auto n = static_cast<Eigen::Index>(w.size());
  if (n <= 1) return 0.0;
  const Eigen::MatrixXd& m = w.matrix();

  // Deterministic start with components along every non-constant direction.
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = std::sin(1.0 + 2.3 * static_cast<double>(i)) + 0.1 * static_cast<double>(i);
  v.array() -= v.mean();
  v.normalize();

  double estimate = -1.0;
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd next = m * (m * v);
    next.array() -= next.mean();
    const double norm = next.norm();
    if (norm < 1e-300) return 0.0;
    const double current = std::sqrt(v.dot(next));
    next /= norm;
    v = std::move(next);
    if (std::abs(current - estimate) <= tolerance) return std::min(current, 1.0);
    estimate = current;
  }
  throw std::runtime_error("power iteration for |lambda_2| did not converge");
}

}  // namespace depaint
