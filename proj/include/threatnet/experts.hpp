#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "threatnet/graph_algorithms.hpp"
#include "threatnet/ingestion.hpp"
#include "threatnet/temporal_graph.hpp"

namespace threatnet {

struct CpeRanking {
  DateRange window;
  std::vector<std::pair<CpeTag, std::int64_t>> ranked;  // weight desc, tag asc

  std::vector<CpeTag> top(std::size_t n_top) const;
};

/// Weight of a tag = number of (post, CVE) mentions inside `window` whose CVE
/// maps to the tag. Posts outside the window are ignored.
CpeRanking top_cpe_groups(std::span<const Post> posts, const CveCpeMap& cpe_map,
                          const DateRange& window);
CpeRanking top_cpe_groups(std::span<const Post* const> posts, const CveCpeMap& cpe_map,
                          const DateRange& window);

struct ExpertCriteria {
  std::size_t n_top = 5;
  std::size_t indegree_threshold = 10;
};

struct ExpertSet {
  std::string forum_id;
  DateRange tau;
  std::set<std::string> experts;
  std::vector<CpeTag> top_cpes;
  std::size_t indegree_threshold = 0;
};

/// Users of the historical graph that (1) mentioned a CVE in the window,
/// (2) whose CPE tag set theta(u) is non-empty and contained in the top
/// groups (or contains them when |theta(u)| > n_top), and (3) have at least
/// `indegree_threshold` distinct in-neighbours in `hist`.
ExpertSet extract_experts(const TemporalGraph& hist, std::span<const Post* const> posts,
                          const CveCpeMap& cpe_map, const CpeRanking& ranking,
                          const ExpertCriteria& criteria, const DateRange& tau = {});
ExpertSet extract_experts(const TemporalGraph& hist, std::span<const Post> posts,
                          const CveCpeMap& cpe_map, const CpeRanking& ranking,
                          const ExpertCriteria& criteria, const DateRange& tau = {});

/// CVE-mentioning users of the window that are not experts, i.e. who fail
/// the CPE constraint or the in-degree constraint.
std::set<std::string> alternative_users(const TemporalGraph& hist,
                                        std::span<const Post* const> posts,
                                        const ExpertSet& experts);

struct DegreeVectors {
  std::vector<double> experts;
  std::vector<double> alternatives;
};

/// Undirected incident-edge counts (parallel edges counted) of every expert
/// and of a seeded uniform sample of |experts| alternative users; both sorted
/// descending.
DegreeVectors interaction_degree_vectors(const TemporalGraph& graph,
                                         const std::set<std::string>& experts,
                                         const std::set<std::string>& alt_users,
                                         std::uint64_t sample_seed);

struct TTestResult {
  double t_stat = 0.0;
  double dof = 0.0;
  double p_value = 0.5;
};

/// Welch's unequal-variance t-test, one-sided for H1: mean(a) > mean(b).
TTestResult welch_ttest_onesided(std::span<const double> a, std::span<const double> b);

/// One JSON record per line: forum, tau, experts, top CPEs, threshold.
void write_expert_sets(std::ostream& out, std::span<const ExpertSet> sets);
std::vector<ExpertSet> read_expert_sets(std::istream& in);

}  // namespace threatnet
