#include "threatnet/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

namespace threatnet {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kNames = {
    "conductance", "shortest_path", "expert_replies", "common_communities",
    "n_threads",   "n_users",       "n_expert_threads", "n_cve_mentions",
    "outdegree_k", "outdegree_k_cve", "pagerank_k",   "pagerank_k_cve",
    "betweenness_k", "betweenness_k_cve",
};

std::vector<VertexId> ids_of(const CompactGraph& g, const std::set<std::string>& users) {
  std::vector<VertexId> ids;
  for (const auto& u : users)
    if (auto v = g.find(u)) ids.push_back(*v);
  return ids;
}

}  // namespace

std::string_view feature_name(Feature f) { return kNames[static_cast<std::size_t>(f)]; }

std::optional<Feature> parse_feature(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    if (kNames[i] == name) return static_cast<Feature>(i);
  return std::nullopt;
}

const std::array<Feature, kFeatureCount>& all_features() {
  static const auto all = [] {
    std::array<Feature, kFeatureCount> a{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) a[i] = static_cast<Feature>(i);
    return a;
  }();
  return all;
}

std::vector<Feature> features_in(FeatureGroup group) {
  const auto& all = all_features();
  switch (group) {
    case FeatureGroup::expert_centric: return {all.begin(), all.begin() + 4};
    case FeatureGroup::statistics: return {all.begin() + 4, all.begin() + 8};
    case FeatureGroup::centralities: return {all.begin() + 8, all.end()};
  }
  return {};
}

std::optional<FeatureGroup> parse_feature_group(std::string_view name) {
  if (name == "expert_centric") return FeatureGroup::expert_centric;
  if (name == "statistics") return FeatureGroup::statistics;
  if (name == "centralities") return FeatureGroup::centralities;
  return std::nullopt;
}

ExpertFeatures expert_features(const CompactGraph& aux, const std::set<std::string>& experts,
                               const std::set<std::string>& daily_users,
                               const FeatureOptions& options) {
  ExpertFeatures f;
  const auto expert_ids = ids_of(aux, experts);
  if (expert_ids.empty()) {
    f.no_experts = true;
    return f;
  }
  std::vector<VertexId> targets;
  for (const auto& u : daily_users)
    if (!experts.count(u))
      if (auto v = aux.find(u)) targets.push_back(*v);

  const auto dist = stationary_distribution(aux, options.walk);
  f.conductance = conductance_to(aux, dist, expert_ids, targets);

  const auto hops = min_distances_from(aux, expert_ids, targets);
  double total = 0.0;
  std::size_t counted = 0;
  for (VertexId e : expert_ids) {
    auto it = hops.find(e);
    if (options.distance_cap) {
      const std::size_t cap = *options.distance_cap;
      total += static_cast<double>(it == hops.end() ? cap : std::min(it->second, cap));
      ++counted;
    } else if (it != hops.end()) {
      total += static_cast<double>(it->second);
      ++counted;
    }
  }
  f.shortest_path = counted ? total / static_cast<double>(counted) : 0.0;

  double replies = 0.0;
  for (VertexId e : expert_ids) replies += static_cast<double>(aux.out_degree(e));
  f.expert_replies = replies / static_cast<double>(expert_ids.size());

  const auto community = detect_communities(aux, options.community_seed);
  std::set<std::size_t> expert_communities;
  for (VertexId e : expert_ids) expert_communities.insert(community[e]);
  std::size_t shared = 0;
  for (VertexId u : targets) shared += expert_communities.count(community[u]);
  f.common_communities = static_cast<double>(shared);
  return f;
}

StatisticsFeatures statistics_features(std::span<const Post* const> day_posts,
                                       const std::set<std::string>& experts,
                                       bool count_cve_occurrences) {
  std::set<std::string_view> threads, users, expert_threads, cves;
  std::size_t occurrences = 0;
  for (const Post* p : day_posts) {
    threads.insert(p->thread_id);
    users.insert(p->user_id);
    if (experts.count(p->user_id)) expert_threads.insert(p->thread_id);
    for (const auto& c : p->cve_mentions) cves.insert(c);
    occurrences += p->cve_mentions.size();
  }
  return {static_cast<double>(threads.size()), static_cast<double>(users.size()),
          static_cast<double>(expert_threads.size()),
          static_cast<double>(count_cve_occurrences ? occurrences : cves.size())};
}

double top_k_mean(std::vector<double> values, std::size_t k) {
  if (values.empty() || k == 0) return 0.0;
  const std::size_t m = std::min(k, values.size());
  std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m), values.end(),
                    std::greater<>());
  return std::accumulate(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m), 0.0) /
         static_cast<double>(m);
}

CentralityFeatures centrality_features(const CompactGraph& daily, std::size_t k,
                                       const std::set<std::string>& cve_users,
                                       const PowerIterationOptions& walk) {
  CentralityFeatures f;
  const std::size_t n = daily.size();
  if (n == 0) return f;
  std::vector<double> outdeg(n);
  for (VertexId v = 0; v < n; ++v) outdeg[v] = static_cast<double>(daily.out_degree(v));
  const auto pr = pagerank(daily, walk);
  const auto bc = betweenness(daily);
  const auto restricted_ids = ids_of(daily, cve_users);
  auto restrict = [&](const std::vector<double>& all) {
    std::vector<double> out;
    for (VertexId v : restricted_ids) out.push_back(all[v]);
    return out;
  };
  f.outdegree = top_k_mean(outdeg, k);
  f.outdegree_cve = top_k_mean(restrict(outdeg), k);
  f.pagerank = top_k_mean(pr, k);
  f.pagerank_cve = top_k_mean(restrict(pr), k);
  f.betweenness = top_k_mean(bc, k);
  f.betweenness_cve = top_k_mean(restrict(bc), k);
  return f;
}

ForumFeatureRun compute_forum_features(const ForumIndex& forum, const WindowPlan& plan,
                                       std::span<const CpeRanking> rankings,
                                       const CveCpeMap& cpe_map, const ExpertCriteria& criteria,
                                       const FeatureOptions& options) {
  if (rankings.size() != plan.windows.size())
    throw Error("invalid_argument", "one CPE ranking per window is required");
  ForumFeatureRun run;
  run.series.forum_id = forum.forum_id();
  auto put = [&](Feature f, double v) { run.series.values[static_cast<std::size_t>(f)].push_back(v); };

  for (std::size_t w = 0; w < plan.windows.size(); ++w) {
    const auto& [tau, history] = plan.windows[w];
    const TemporalGraph hist = forum.graph(history);
    const auto hist_posts = forum.posts_in(history);
    run.expert_sets.push_back(extract_experts(hist, std::span<const Post* const>(hist_posts),
                                              cpe_map, rankings[w], criteria, tau));
    const auto& experts = run.expert_sets.back().experts;

    for (Date t = tau.begin; t < tau.end; t += std::chrono::days{1}) {
      const DateRange day{t, t + std::chrono::days{1}};
      const TemporalGraph daily = forum.graph(day);
      const auto day_posts = forum.posts_in(day);
      run.series.dates.push_back(t);

      ExpertFeatures ef;
      if (experts.empty()) {
        ef.no_experts = true;
      } else {
        ef = expert_features(CompactGraph::from_union(hist, daily), experts, daily.vertices,
                             options);
      }
      if (ef.no_experts) ++run.days_without_experts;
      put(Feature::conductance, ef.conductance);
      put(Feature::shortest_path, ef.shortest_path);
      put(Feature::expert_replies, ef.expert_replies);
      put(Feature::common_communities, ef.common_communities);

      const auto sf = statistics_features(std::span<const Post* const>(day_posts), experts,
                                          options.count_cve_occurrences);
      put(Feature::n_threads, sf.n_threads);
      put(Feature::n_users, sf.n_users);
      put(Feature::n_expert_threads, sf.n_expert_threads);
      put(Feature::n_cve_mentions, sf.n_cve_mentions);

      std::set<std::string> cve_users;
      for (const Post* p : day_posts)
        if (!p->cve_mentions.empty()) cve_users.insert(p->user_id);
      const auto cf = centrality_features(CompactGraph::from_temporal(daily), options.k_centrality,
                                          cve_users, options.walk);
      put(Feature::outdegree, cf.outdegree);
      put(Feature::outdegree_cve, cf.outdegree_cve);
      put(Feature::pagerank, cf.pagerank);
      put(Feature::pagerank_cve, cf.pagerank_cve);
      put(Feature::betweenness, cf.betweenness);
      put(Feature::betweenness_cve, cf.betweenness_cve);
    }
  }
  return run;
}

const std::vector<double>& FeatureMatrix::column(std::string_view name) const {
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == name) return columns[j];
  throw Error("invalid_argument", "feature matrix has no column " + std::string(name));
}

std::optional<std::size_t> FeatureMatrix::row_of(Date d) const {
  auto it = std::lower_bound(dates.begin(), dates.end(), d);
  if (it == dates.end() || *it != d) return std::nullopt;
  return static_cast<std::size_t>(it - dates.begin());
}

FeatureMatrix build_feature_matrix(std::span<const ForumSeries> forums) {
  if (forums.empty()) throw Error("invalid_argument", "no forums to aggregate");
  std::set<Date> all_dates;
  for (const auto& f : forums) all_dates.insert(f.dates.begin(), f.dates.end());
  FeatureMatrix m;
  m.dates.assign(all_dates.begin(), all_dates.end());
  for (Feature f : all_features()) m.names.emplace_back(feature_name(f));
  m.columns.assign(kFeatureCount, std::vector<double>(m.dates.size(), 0.0));
  // Sum in a fixed (forum id) order so the result does not depend on input order.
  std::vector<const ForumSeries*> ordered;
  for (const auto& f : forums) ordered.push_back(&f);
  std::sort(ordered.begin(), ordered.end(),
            [](const ForumSeries* a, const ForumSeries* b) { return a->forum_id < b->forum_id; });
  for (const ForumSeries* f : ordered) {
    for (std::size_t i = 0; i < f->dates.size(); ++i) {
      const std::size_t row = *m.row_of(f->dates[i]);
      for (std::size_t j = 0; j < kFeatureCount; ++j) m.columns[j][row] += f->values[j][i];
    }
  }
  const double n = static_cast<double>(forums.size());
  for (auto& col : m.columns)
    for (auto& v : col) v /= n;
  return m;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_feature_matrix(std::ostream& out, const FeatureMatrix& m) {
  out << "date";
  for (const auto& n : m.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < m.dates.size(); ++i) {
    out << format_date(m.dates[i]);
    for (const auto& col : m.columns) out << ',' << format_double(col[i]);
    out << '\n';
  }
}

FeatureMatrix read_feature_matrix(std::istream& in) {
  FeatureMatrix m;
  std::string line;
  if (!std::getline(in, line)) throw Error("malformed_input", "feature matrix is empty");
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "date")
    throw Error("malformed_input", "feature matrix header must start with 'date'");
  m.names.assign(header.begin() + 1, header.end());
  m.columns.resize(m.names.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw Error("malformed_input", "feature matrix row has wrong field count: " + line);
    try {
      m.dates.push_back(parse_date(f[0]));
    } catch (const std::invalid_argument& e) {
      throw Error("malformed_input", e.what());
    }
    for (std::size_t j = 1; j < f.size(); ++j) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f[j].data(), f[j].data() + f[j].size(), v);
      if (ec != std::errc{} || ptr != f[j].data() + f[j].size() || !std::isfinite(v))
        throw Error("malformed_input", "bad feature value: " + f[j]);
      m.columns[j - 1].push_back(v);
    }
  }
  if (!std::is_sorted(m.dates.begin(), m.dates.end()) ||
      std::adjacent_find(m.dates.begin(), m.dates.end()) != m.dates.end())
    throw Error("malformed_input", "feature matrix dates must be strictly increasing");
  return m;
}

void write_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write file: " + path.string());
  write_feature_matrix(out, m);
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot read file: " + path.string());
  return read_feature_matrix(in);
}

}  // namespace threatnet
