#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "threatnet/experts.hpp"
#include "threatnet/graph_algorithms.hpp"
#include "threatnet/temporal_graph.hpp"

namespace threatnet {

enum class Feature : std::size_t {
  conductance,
  shortest_path,
  expert_replies,
  common_communities,
  n_threads,
  n_users,
  n_expert_threads,
  n_cve_mentions,
  outdegree,
  outdegree_cve,
  pagerank,
  pagerank_cve,
  betweenness,
  betweenness_cve,
};

inline constexpr std::size_t kFeatureCount = 14;

enum class FeatureGroup { expert_centric, statistics, centralities };

std::string_view feature_name(Feature f);
std::optional<Feature> parse_feature(std::string_view name);
std::vector<Feature> features_in(FeatureGroup group);
std::optional<FeatureGroup> parse_feature_group(std::string_view name);
const std::array<Feature, kFeatureCount>& all_features();

struct FeatureOptions {
  PowerIterationOptions walk{};
  std::uint64_t community_seed = 0;
  /// When set, unreachable experts count as this distance and longer paths
  /// are clipped to it.
  std::optional<std::size_t> distance_cap;
  std::size_t k_centrality = 50;
  /// Count CVE mention occurrences instead of distinct CVEs per day.
  bool count_cve_occurrences = false;
};

struct ExpertFeatures {
  double conductance = 0.0;
  double shortest_path = 0.0;
  double expert_replies = 0.0;
  double common_communities = 0.0;
  bool no_experts = false;
};

/// Expert-centric features on the merged (history + day) graph. `daily_users`
/// is the vertex set of the day graph.
ExpertFeatures expert_features(const CompactGraph& aux, const std::set<std::string>& experts,
                               const std::set<std::string>& daily_users,
                               const FeatureOptions& options = {});

struct StatisticsFeatures {
  double n_threads = 0.0;
  double n_users = 0.0;
  double n_expert_threads = 0.0;
  double n_cve_mentions = 0.0;
};

StatisticsFeatures statistics_features(std::span<const Post* const> day_posts,
                                       const std::set<std::string>& experts,
                                       bool count_cve_occurrences = false);

struct CentralityFeatures {
  double outdegree = 0.0;
  double outdegree_cve = 0.0;
  double pagerank = 0.0;
  double pagerank_cve = 0.0;
  double betweenness = 0.0;
  double betweenness_cve = 0.0;
};

/// Mean of the top-k scores over all vertices of the day graph, and over the
/// vertices in `cve_users` only.
CentralityFeatures centrality_features(const CompactGraph& daily, std::size_t k,
                                       const std::set<std::string>& cve_users,
                                       const PowerIterationOptions& walk = {});

/// Mean of the `k` largest values (all of them when fewer); 0 when empty.
double top_k_mean(std::vector<double> values, std::size_t k);

/// Daily values of every feature for one forum, aligned to `dates`.
struct ForumSeries {
  std::string forum_id;
  std::vector<Date> dates;
  std::array<std::vector<double>, kFeatureCount> values;

  const std::vector<double>& operator[](Feature f) const {
    return values[static_cast<std::size_t>(f)];
  }
};

struct ForumFeatureRun {
  ForumSeries series;
  std::vector<ExpertSet> expert_sets;  // one per window
  std::size_t days_without_experts = 0;
};

/// Computes every feature for every day of every tau window of `plan`.
/// `rankings[i]` is the CPE ranking of plan.windows[i].history.
ForumFeatureRun compute_forum_features(const ForumIndex& forum, const WindowPlan& plan,
                                       std::span<const CpeRanking> rankings,
                                       const CveCpeMap& cpe_map, const ExpertCriteria& criteria,
                                       const FeatureOptions& options = {});

struct FeatureMatrix {
  std::vector<Date> dates;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;  // columns[j][i] = feature j on dates[i]

  const std::vector<double>& column(std::string_view name) const;
  std::optional<std::size_t> row_of(Date d) const;
};

/// Per-date arithmetic mean over forums; a forum without a value on a date
/// contributes 0.
FeatureMatrix build_feature_matrix(std::span<const ForumSeries> forums);

/// CSV: header "date,<names...>", values printed with 17 significant digits.
void write_feature_matrix(std::ostream& out, const FeatureMatrix& m);
FeatureMatrix read_feature_matrix(std::istream& in);
void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace threatnet
