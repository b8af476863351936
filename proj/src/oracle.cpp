// Brute-force reference computations for small graphs. Deliberately shares
// no code with graph_algorithms.cpp: dense matrices, exhaustive enumeration.

#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/rational.hpp>

#include "threatnet/random.hpp"
#include "threatnet/synth.hpp"

namespace threatnet {

namespace {

using Matrix = std::vector<std::vector<double>>;

struct RawGraph {
  std::string name;
  std::size_t n = 0;
  std::vector<CompactGraph::WeightedEdge> edges;  // may repeat (multiplicity)
  double damping = 0.85;
};

Matrix weight_matrix(const RawGraph& g) {
  Matrix w(g.n, std::vector<double>(g.n, 0.0));
  for (const auto& e : g.edges)
    if (e.from != e.to) w[e.from][e.to] += e.weight;
  return w;
}

Matrix walk_matrix(const RawGraph& g) {
  const Matrix w = weight_matrix(g);
  const double n = static_cast<double>(g.n);
  Matrix p(g.n, std::vector<double>(g.n, 0.0));
  for (std::size_t x = 0; x < g.n; ++x) {
    double row = 0.0;
    for (double v : w[x]) row += v;
    for (std::size_t y = 0; y < g.n; ++y)
      p[x][y] = row == 0.0 ? 1.0 / n : g.damping * w[x][y] / row + (1.0 - g.damping) / n;
  }
  return p;
}

// Solves a x = b by Gaussian elimination with partial pivoting.
std::vector<double> solve(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

// pi P = pi with sum(pi) = 1: transpose, replace the last equation.
std::vector<double> dense_stationary(const Matrix& p) {
  const std::size_t n = p.size();
  Matrix a(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = p[j][i] - (i == j ? 1.0 : 0.0);
  std::vector<double> b(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) a[n - 1][j] = 1.0;
  b[n - 1] = 1.0;
  return solve(std::move(a), std::move(b));
}

constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max() / 4;

std::vector<std::vector<std::size_t>> floyd_warshall(const RawGraph& g) {
  std::vector<std::vector<std::size_t>> d(g.n, std::vector<std::size_t>(g.n, kInf));
  for (std::size_t i = 0; i < g.n; ++i) d[i][i] = 0;
  for (const auto& e : g.edges)
    if (e.from != e.to) d[e.from][e.to] = 1;
  for (std::size_t k = 0; k < g.n; ++k)
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t j = 0; j < g.n; ++j)
        d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

// Walks of exactly `remaining` steps from v ending at t are shortest paths.
void enumerate_paths(const std::vector<std::vector<bool>>& adj, std::size_t v, std::size_t t,
                     std::size_t remaining, std::vector<std::size_t>& path,
                     std::vector<std::int64_t>& through, std::int64_t& total) {
  if (remaining == 0) {
    if (v != t) return;
    ++total;
    for (std::size_t i = 1; i + 1 < path.size(); ++i) ++through[path[i]];
    return;
  }
  for (std::size_t u = 0; u < adj.size(); ++u) {
    if (!adj[v][u]) continue;
    path.push_back(u);
    enumerate_paths(adj, u, t, remaining - 1, path, through, total);
    path.pop_back();
  }
}

// Exact rational sums, rounded to double once at the end.
std::vector<double> enumerated_betweenness(const RawGraph& g) {
  using Q = boost::rational<std::int64_t>;
  const auto d = floyd_warshall(g);
  std::vector<std::vector<bool>> adj(g.n, std::vector<bool>(g.n, false));
  for (const auto& e : g.edges)
    if (e.from != e.to) adj[e.from][e.to] = true;
  std::vector<Q> exact(g.n, Q(0));
  for (std::size_t s = 0; s < g.n; ++s) {
    for (std::size_t t = 0; t < g.n; ++t) {
      if (s == t || d[s][t] >= kInf || d[s][t] < 2) continue;
      std::vector<std::int64_t> through(g.n, 0);
      std::int64_t total = 0;
      std::vector<std::size_t> path{s};
      enumerate_paths(adj, s, t, d[s][t], path, through, total);
      for (std::size_t v = 0; v < g.n; ++v) exact[v] += Q(through[v], total);
    }
  }
  std::vector<double> bc;
  for (const auto& q : exact) bc.push_back(static_cast<double>(q.numerator()) / static_cast<double>(q.denominator()));
  return bc;
}

double dense_modularity(const Matrix& a, const std::vector<std::size_t>& part) {
  const std::size_t n = a.size();
  std::vector<double> k(n, 0.0);
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      k[i] += a[i][j];
      m2 += a[i][j];
    }
  if (m2 == 0.0) return 0.0;
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (part[i] == part[j]) q += a[i][j] - k[i] * k[j] / m2;
  return q / m2;
}

// Visits every set partition as a restricted growth string.
void best_partition(const Matrix& a, std::vector<std::size_t>& part, std::size_t i,
                    std::size_t blocks, double& best_q, std::vector<std::size_t>& best) {
  if (i == part.size()) {
    const double q = dense_modularity(a, part);
    if (q > best_q + 1e-12) {
      best_q = q;
      best = part;
    }
    return;
  }
  for (std::size_t b = 0; b <= blocks; ++b) {
    part[i] = b;
    best_partition(a, part, i + 1, std::max(blocks, b + 1), best_q, best);
  }
}

OracleCase evaluate_case(const RawGraph& g, std::vector<VertexId> subset) {
  OracleCase c;
  c.name = g.name;
  c.graph = CompactGraph(g.n, g.edges);
  c.damping = g.damping;
  c.subset = subset;
  const Matrix p = walk_matrix(g);
  c.stationary = dense_stationary(p);

  std::vector<bool> in_subset(g.n, false);
  for (VertexId v : subset) in_subset[v] = true;
  double num = 0.0, den = 0.0;
  for (std::size_t x = 0; x < g.n; ++x) {
    if (!in_subset[x]) continue;
    den += c.stationary[x];
    for (std::size_t y = 0; y < g.n; ++y)
      if (!in_subset[y]) num += c.stationary[x] * p[x][y];
  }
  c.conductance = den > 0.0 ? num / den : 0.0;

  c.betweenness = enumerated_betweenness(g);
  const auto d = floyd_warshall(g);
  for (VertexId x : subset) {
    std::size_t best = kInf;
    for (std::size_t y = 0; y < g.n; ++y)
      if (!in_subset[y]) best = std::min(best, d[x][y]);
    if (best < kInf) c.distances[x] = best;
  }

  if (g.n <= 8) {
    const Matrix w = weight_matrix(g);
    Matrix a(g.n, std::vector<double>(g.n, 0.0));
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t j = 0; j < g.n; ++j) a[i][j] = w[i][j] + w[j][i];
    std::vector<std::size_t> part(g.n, 0), best(g.n, 0);
    double best_q = -1.0;
    best_partition(a, part, 0, 0, best_q, best);
    c.best_modularity = best_q;
    c.best_partition = best;
  }
  return c;
}

RawGraph clique_pair() {
  RawGraph g{"clique_pair", 8, {}, 0.85};
  for (VertexId base : {0u, 4u})
    for (VertexId i = 0; i < 4; ++i)
      for (VertexId j = 0; j < 4; ++j)
        if (i != j) g.edges.push_back({base + i, base + j, 1.0});
  g.edges.push_back({3, 4, 1.0});
  return g;
}

}  // namespace

std::vector<OracleCase> oracle_small_graph_suite(std::size_t random_cases, std::uint64_t seed) {
  std::vector<OracleCase> suite;
  suite.push_back(evaluate_case({"two_cycle", 2, {{0, 1, 1.0}, {1, 0, 1.0}}, 1.0}, {0}));
  suite.push_back(evaluate_case({"path3", 3, {{0, 1, 1.0}, {1, 2, 1.0}}, 0.85}, {0}));
  suite.push_back(evaluate_case({"in_star5", 5, {{1, 0, 1.0}, {2, 0, 1.0}, {3, 0, 1.0}, {4, 0, 1.0}}, 0.85},
                                {1, 2}));
  suite.push_back(evaluate_case(clique_pair(), {0, 1, 2, 3}));

  Rng rng(seed);
  constexpr double kDamping[] = {0.85, 0.5, 0.95};
  constexpr double kDensity[] = {0.2, 0.35, 0.5};
  for (std::size_t i = 0; i < random_cases; ++i) {
    RawGraph g;
    g.name = "random_" + std::to_string(i);
    g.n = 2 + rng.index(9);
    g.damping = kDamping[rng.index(3)];
    const double density = kDensity[rng.index(3)];
    for (VertexId x = 0; x < g.n; ++x)
      for (VertexId y = 0; y < g.n; ++y)
        if (x != y && rng.bernoulli(density)) {
          const auto mult = 1 + rng.index(3);
          for (std::uint64_t m = 0; m < mult; ++m) g.edges.push_back({x, y, 1.0});
        }
    std::vector<VertexId> subset;
    for (VertexId v = 0; v < g.n; ++v)
      if (rng.bernoulli(0.4)) subset.push_back(v);
    if (subset.empty()) subset.push_back(static_cast<VertexId>(rng.index(g.n)));
    if (subset.size() == g.n) subset.pop_back();
    suite.push_back(evaluate_case(g, std::move(subset)));
  }
  return suite;
}

}  // namespace threatnet
