#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "threatnet/temporal_graph.hpp"

namespace threatnet {

using VertexId = std::uint32_t;

/// Dense-index directed graph in CSR form. Parallel edges are collapsed into
/// a single arc whose weight is their multiplicity; self-loops are dropped.
class CompactGraph {
 public:
  struct Arc {
    VertexId to;
    double weight;
  };
  struct WeightedEdge {
    VertexId from;
    VertexId to;
    double weight = 1.0;
  };

  CompactGraph() = default;
  /// Labels, when given, must be sorted and unique (find() bisects them).
  CompactGraph(std::size_t n, std::span<const WeightedEdge> edges,
               std::vector<std::string> labels = {});

  /// Labels are the sorted vertex set.
  static CompactGraph from_temporal(const TemporalGraph& g);
  /// Equivalent to from_temporal(merge(a, b)) without materializing the merge.
  static CompactGraph from_union(const TemporalGraph& a, const TemporalGraph& b);

  std::size_t size() const { return out_weight_.size(); }
  std::size_t arc_count() const { return arcs_.size(); }
  std::span<const Arc> out(VertexId v) const {
    return {arcs_.data() + offsets_[v], arcs_.data() + offsets_[v + 1]};
  }
  std::size_t out_degree(VertexId v) const { return offsets_[v + 1] - offsets_[v]; }
  double out_weight(VertexId v) const { return out_weight_[v]; }

  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<VertexId> find(const std::string& label) const;

  /// Distinct in-neighbour count per vertex.
  std::vector<std::size_t> in_degrees() const;

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<Arc> arcs_;
  std::vector<double> out_weight_;
  std::vector<std::string> labels_;
};

struct StationaryDistribution {
  std::vector<double> pi;
  double damping = 0.85;
};

struct PowerIterationOptions {
  double damping = 0.85;
  double tol = 1e-13;
  int max_iter = 10000;
};

/// Stationary distribution of the damped random walk: with probability
/// `damping` follow an out-arc proportionally to its weight, otherwise jump
/// uniformly; dangling vertices always jump uniformly. Throws NonConvergence.
StationaryDistribution stationary_distribution(const CompactGraph& g,
                                               const PowerIterationOptions& opt = {});

/// Same computation as stationary_distribution; an empty graph gives an
/// empty vector.
std::vector<double> pagerank(const CompactGraph& g, const PowerIterationOptions& opt = {});

/// One-step transition probability of the damped walk.
double transition_probability(const CompactGraph& g, double damping, VertexId x, VertexId y);

/// Walk mass leaving `subset` in one step, normalized by the mass on
/// `subset`. Returns 0 when the subset is empty, everything, or has no mass.
double conductance(const CompactGraph& g, const StationaryDistribution& dist,
                   std::span<const VertexId> subset);

/// As conductance(), but only steps into `targets` (minus `subset`) count.
double conductance_to(const CompactGraph& g, const StationaryDistribution& dist,
                      std::span<const VertexId> subset, std::span<const VertexId> targets);

/// For each source, BFS hop count along edge direction to the nearest
/// target. Unreachable sources are absent.
std::map<VertexId, std::size_t> min_distances_from(const CompactGraph& g,
                                                   std::span<const VertexId> sources,
                                                   std::span<const VertexId> targets);

/// Multi-level modularity agglomeration on the undirected weighted
/// projection. Community ids are renumbered 0.. in order of first vertex.
std::vector<std::size_t> detect_communities(const CompactGraph& g, std::uint64_t seed = 0);

/// Newman modularity of a partition on the undirected weighted projection.
double modularity(const CompactGraph& g, std::span<const std::size_t> community);

/// Exact directed betweenness (unweighted shortest paths, endpoints excluded).
std::vector<double> betweenness(const CompactGraph& g);

}  // namespace threatnet
