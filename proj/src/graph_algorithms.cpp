#include "threatnet/graph_algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <numeric>
#include <unordered_map>

#include "threatnet/error.hpp"
#include "threatnet/random.hpp"

namespace threatnet {

CompactGraph::CompactGraph(std::size_t n, std::span<const WeightedEdge> edges,
                           std::vector<std::string> labels)
    : out_weight_(n, 0.0), labels_(std::move(labels)) {
  if (!labels_.empty() && labels_.size() != n)
    throw Error("invalid_argument", "label count does not match vertex count");
  if (std::adjacent_find(labels_.begin(), labels_.end(), std::greater_equal<>()) != labels_.end())
    throw Error("invalid_argument", "vertex labels must be sorted and unique");
  std::vector<WeightedEdge> sorted;
  sorted.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.from >= n || e.to >= n) throw Error("invalid_argument", "edge endpoint out of range");
    if (e.from != e.to) sorted.push_back(e);
  }
  std::sort(sorted.begin(), sorted.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    return a.from != b.from ? a.from < b.from : a.to < b.to;
  });
  offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    double w = 0.0;
    while (j < sorted.size() && sorted[j].from == sorted[i].from && sorted[j].to == sorted[i].to)
      w += sorted[j++].weight;
    arcs_.push_back({sorted[i].to, w});
    ++offsets_[sorted[i].from + 1];
    out_weight_[sorted[i].from] += w;
    i = j;
  }
  for (std::size_t v = 0; v < n; ++v) offsets_[v + 1] += offsets_[v];
}

namespace {

CompactGraph compact_from(const std::set<std::string>& vertices,
                          std::initializer_list<const std::vector<ReplyEdge>*> edge_lists) {
  std::vector<std::string> labels(vertices.begin(), vertices.end());
  std::unordered_map<std::string_view, VertexId> index;
  index.reserve(labels.size());
  for (VertexId i = 0; i < labels.size(); ++i) index.emplace(labels[i], i);
  std::vector<CompactGraph::WeightedEdge> edges;
  for (const auto* list : edge_lists) {
    for (const auto& e : *list) {
      auto s = index.find(e.src);
      auto d = index.find(e.dst);
      if (s == index.end() || d == index.end())
        throw Error("invalid_argument", "edge endpoint is not a vertex: " + e.src + "->" + e.dst);
      edges.push_back({s->second, d->second, 1.0});
    }
  }
  const std::size_t n = labels.size();
  return CompactGraph(n, edges, std::move(labels));
}

}  // namespace

CompactGraph CompactGraph::from_temporal(const TemporalGraph& g) {
  return compact_from(g.vertices, {&g.edges});
}

CompactGraph CompactGraph::from_union(const TemporalGraph& a, const TemporalGraph& b) {
  if (a.forum_id != b.forum_id)
    throw Error("invalid_argument", "cannot merge graphs of forums " + a.forum_id + " and " + b.forum_id);
  std::set<std::string> vertices = a.vertices;
  vertices.insert(b.vertices.begin(), b.vertices.end());
  return compact_from(vertices, {&a.edges, &b.edges});
}

std::optional<VertexId> CompactGraph::find(const std::string& label) const {
  auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
  if (it == labels_.end() || *it != label) return std::nullopt;
  return static_cast<VertexId>(it - labels_.begin());
}

std::vector<std::size_t> CompactGraph::in_degrees() const {
  std::vector<std::size_t> deg(size(), 0);
  for (const auto& a : arcs_) ++deg[a.to];
  return deg;
}

StationaryDistribution stationary_distribution(const CompactGraph& g,
                                               const PowerIterationOptions& opt) {
  const std::size_t n = g.size();
  if (n == 0) throw Error("invalid_argument", "stationary distribution of an empty graph");
  if (!(opt.damping > 0.0 && opt.damping <= 1.0))
    throw Error("invalid_argument", "damping must lie in (0, 1]");
  const double d = opt.damping;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> pi(n, inv_n), next(n);
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    double dangling = 0.0;
    std::fill(next.begin(), next.end(), 0.0);
    for (VertexId x = 0; x < n; ++x) {
      const double ow = g.out_weight(x);
      if (ow == 0.0) {
        dangling += pi[x];
        continue;
      }
      const double share = d * pi[x] / ow;
      for (const auto& a : g.out(x)) next[a.to] += share * a.weight;
    }
    const double jump = (d * dangling + (1.0 - d) * std::accumulate(pi.begin(), pi.end(), 0.0)) * inv_n;
    double sum = 0.0;
    for (auto& v : next) sum += (v += jump);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= sum;
      change += std::abs(next[i] - pi[i]);
    }
    pi.swap(next);
    if (change <= opt.tol) return {std::move(pi), d};
  }
  throw NonConvergence("power iteration did not converge in " + std::to_string(opt.max_iter) +
                           " iterations",
                       std::move(pi));
}

std::vector<double> pagerank(const CompactGraph& g, const PowerIterationOptions& opt) {
  if (g.size() == 0) return {};
  return stationary_distribution(g, opt).pi;
}

double transition_probability(const CompactGraph& g, double damping, VertexId x, VertexId y) {
  const double inv_n = 1.0 / static_cast<double>(g.size());
  const double ow = g.out_weight(x);
  if (ow == 0.0) return inv_n;
  double w = 0.0;
  for (const auto& a : g.out(x))
    if (a.to == y) w = a.weight;
  return damping * w / ow + (1.0 - damping) * inv_n;
}

double conductance_to(const CompactGraph& g, const StationaryDistribution& dist,
                      std::span<const VertexId> subset, std::span<const VertexId> targets) {
  const std::size_t n = g.size();
  if (n == 0 || subset.empty()) return 0.0;
  std::vector<char> in_subset(n, 0), in_target(n, 0);
  for (VertexId v : subset) in_subset.at(v) = 1;
  for (VertexId v : targets) in_target.at(v) = 1;
  std::size_t n_targets = 0;
  for (std::size_t v = 0; v < n; ++v) {
    if (in_subset[v]) in_target[v] = 0;
    n_targets += in_target[v];
  }
  if (n_targets == 0) return 0.0;
  const double d = dist.damping;
  const double uniform_share = static_cast<double>(n_targets) / static_cast<double>(n);
  double mass = 0.0, escaping = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    if (!in_subset[x]) continue;
    const double px = dist.pi[x];
    mass += px;
    const double ow = g.out_weight(static_cast<VertexId>(x));
    if (ow == 0.0) {
      escaping += px * uniform_share;
      continue;
    }
    double w = 0.0;
    for (const auto& a : g.out(static_cast<VertexId>(x)))
      if (in_target[a.to]) w += a.weight;
    escaping += px * (d * w / ow + (1.0 - d) * uniform_share);
  }
  if (mass <= 0.0) return 0.0;
  return std::clamp(escaping / mass, 0.0, 1.0);
}

double conductance(const CompactGraph& g, const StationaryDistribution& dist,
                   std::span<const VertexId> subset) {
  std::vector<VertexId> all(g.size());
  std::iota(all.begin(), all.end(), VertexId{0});
  return conductance_to(g, dist, subset, all);
}

std::map<VertexId, std::size_t> min_distances_from(const CompactGraph& g,
                                                   std::span<const VertexId> sources,
                                                   std::span<const VertexId> targets) {
  const std::size_t n = g.size();
  // BFS from the targets over reversed arcs.
  std::vector<std::vector<VertexId>> reverse(n);
  for (VertexId v = 0; v < n; ++v)
    for (const auto& a : g.out(v)) reverse[a.to].push_back(v);
  constexpr std::size_t unseen = SIZE_MAX;
  std::vector<std::size_t> dist(n, unseen);
  std::deque<VertexId> queue;
  for (VertexId t : targets) {
    if (dist.at(t) == unseen) {
      dist[t] = 0;
      queue.push_back(t);
    }
  }
  while (!queue.empty()) {
    VertexId v = queue.front();
    queue.pop_front();
    for (VertexId u : reverse[v]) {
      if (dist[u] == unseen) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  std::map<VertexId, std::size_t> out;
  for (VertexId s : sources)
    if (dist.at(s) != unseen) out[s] = dist[s];
  return out;
}

namespace {

// Symmetric weighted graph used by the community search. Self-loop weight
// is kept separately.
struct UndirectedGraph {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;
  std::vector<double> loop;

  std::size_t size() const { return adj.size(); }
  double degree(std::size_t i) const {
    double k = loop[i];
    for (const auto& [j, w] : adj[i]) k += w;
    return k;
  }
};

UndirectedGraph project(const CompactGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::map<std::size_t, double>> acc(n);
  for (VertexId x = 0; x < n; ++x) {
    for (const auto& a : g.out(x)) {
      acc[x][a.to] += a.weight;
      acc[a.to][x] += a.weight;
    }
  }
  UndirectedGraph u;
  u.adj.resize(n);
  u.loop.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) u.adj[i].assign(acc[i].begin(), acc[i].end());
  return u;
}

// One level of local moving. Returns the community of each node and whether
// any node moved.
std::pair<std::vector<std::size_t>, bool> local_moving(const UndirectedGraph& g, Rng& rng) {
  const std::size_t n = g.size();
  std::vector<std::size_t> comm(n);
  std::iota(comm.begin(), comm.end(), std::size_t{0});
  std::vector<double> k(n), tot(n);
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    k[i] = g.degree(i);
    tot[i] = k[i];
    m2 += k[i];
  }
  if (m2 <= 0.0) return {comm, false};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  std::vector<double> link(n, 0.0);
  std::vector<std::size_t> touched;
  bool any_move = false;
  for (bool moved = true; moved;) {
    moved = false;
    for (std::size_t i : order) {
      const std::size_t own = comm[i];
      tot[own] -= k[i];
      touched.clear();
      for (const auto& [j, w] : g.adj[i]) {
        const std::size_t c = comm[j];
        if (link[c] == 0.0) touched.push_back(c);
        link[c] += w;
      }
      std::size_t best = own;
      double best_gain = link[own] - tot[own] * k[i] / m2;
      for (std::size_t c : touched) {
        const double gain = link[c] - tot[c] * k[i] / m2;
        if (gain > best_gain + 1e-12 || (std::abs(gain - best_gain) <= 1e-12 && best != own && c < best)) {
          best = c;
          best_gain = gain;
        }
      }
      for (std::size_t c : touched) link[c] = 0.0;
      tot[best] += k[i];
      if (best != own) {
        comm[i] = best;
        moved = any_move = true;
      }
    }
  }
  return {comm, any_move};
}

std::vector<std::size_t> renumber(std::vector<std::size_t> comm) {
  std::unordered_map<std::size_t, std::size_t> ids;
  for (auto& c : comm) {
    auto [it, inserted] = ids.emplace(c, ids.size());
    c = it->second;
  }
  return comm;
}

UndirectedGraph aggregate(const UndirectedGraph& g, const std::vector<std::size_t>& comm,
                          std::size_t n_comm) {
  std::vector<std::map<std::size_t, double>> acc(n_comm);
  UndirectedGraph out;
  out.loop.assign(n_comm, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    out.loop[comm[i]] += g.loop[i];
    for (const auto& [j, w] : g.adj[i]) {
      if (comm[i] == comm[j])
        out.loop[comm[i]] += w;
      else
        acc[comm[i]][comm[j]] += w;
    }
  }
  out.adj.resize(n_comm);
  for (std::size_t c = 0; c < n_comm; ++c) out.adj[c].assign(acc[c].begin(), acc[c].end());
  return out;
}

}  // namespace

std::vector<std::size_t> detect_communities(const CompactGraph& g, std::uint64_t seed) {
  const std::size_t n = g.size();
  std::vector<std::size_t> membership(n);
  std::iota(membership.begin(), membership.end(), std::size_t{0});
  Rng rng(seed);
  UndirectedGraph level = project(g);
  while (true) {
    auto [comm, moved] = local_moving(level, rng);
    if (!moved) break;
    comm = renumber(std::move(comm));
    const std::size_t n_comm = *std::max_element(comm.begin(), comm.end()) + 1;
    for (auto& m : membership) m = comm[m];
    if (n_comm == level.size()) break;
    level = aggregate(level, comm, n_comm);
  }
  return renumber(std::move(membership));
}

double modularity(const CompactGraph& g, std::span<const std::size_t> community) {
  const UndirectedGraph u = project(g);
  double m2 = 0.0;
  std::unordered_map<std::size_t, double> tot;
  double inside = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double k = u.degree(i);
    m2 += k;
    tot[community[i]] += k;
    for (const auto& [j, w] : u.adj[i])
      if (community[i] == community[j]) inside += w;
  }
  if (m2 <= 0.0) return 0.0;
  double q = inside / m2;
  for (const auto& [c, t] : tot) q -= (t / m2) * (t / m2);
  return q;
}

std::vector<double> betweenness(const CompactGraph& g) {
  const std::size_t n = g.size();
  std::vector<double> bc(n, 0.0), sigma(n), delta(n);
  std::vector<std::int64_t> dist(n);
  std::vector<VertexId> stack;
  std::vector<std::vector<VertexId>> preds(n);
  std::deque<VertexId> queue;
  for (VertexId s = 0; s < n; ++s) {
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    for (auto& p : preds) p.clear();
    stack.clear();
    sigma[s] = 1.0;
    dist[s] = 0;
    queue.push_back(s);
    while (!queue.empty()) {
      VertexId v = queue.front();
      queue.pop_front();
      stack.push_back(v);
      for (const auto& a : g.out(v)) {
        const VertexId w = a.to;
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    while (!stack.empty()) {
      VertexId w = stack.back();
      stack.pop_back();
      for (VertexId v : preds[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) bc[w] += delta[w];
    }
  }
  return bc;
}

}  // namespace threatnet
