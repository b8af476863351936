#include "threatnet/experts.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "threatnet/random.hpp"

namespace threatnet {

std::vector<CpeTag> CpeRanking::top(std::size_t n_top) const {
  std::vector<CpeTag> out;
  for (std::size_t i = 0; i < ranked.size() && i < n_top; ++i) out.push_back(ranked[i].first);
  return out;
}

CpeRanking top_cpe_groups(std::span<const Post* const> posts, const CveCpeMap& cpe_map,
                          const DateRange& window) {
  std::map<CpeTag, std::int64_t> weight;
  for (const Post* p : posts) {
    if (!window.contains(p->posted_at)) continue;
    for (const auto& cve : p->cve_mentions)
      if (const auto* tags = cpe_map.tags_of(cve))
        for (const auto& t : *tags) ++weight[t];
  }
  CpeRanking r{window, {weight.begin(), weight.end()}};
  std::stable_sort(r.ranked.begin(), r.ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return r;
}

CpeRanking top_cpe_groups(std::span<const Post> posts, const CveCpeMap& cpe_map,
                          const DateRange& window) {
  std::vector<const Post*> ptrs;
  for (const auto& p : posts) ptrs.push_back(&p);
  return top_cpe_groups(std::span<const Post* const>(ptrs), cpe_map, window);
}

namespace {

// theta(u) for every CVE-mentioning user of the forum inside the window.
std::map<std::string, std::set<CpeTag>> cpe_profiles(std::span<const Post* const> posts,
                                                     const std::string& forum_id,
                                                     const CveCpeMap& cpe_map,
                                                     const DateRange& window) {
  std::map<std::string, std::set<CpeTag>> theta;
  for (const Post* p : posts) {
    if (p->forum_id != forum_id || !window.contains(p->posted_at) || p->cve_mentions.empty())
      continue;
    auto& tags = theta[p->user_id];
    for (const auto& cve : p->cve_mentions)
      if (const auto* t = cpe_map.tags_of(cve)) tags.insert(t->begin(), t->end());
  }
  return theta;
}

bool meets_cpe_constraint(const std::set<CpeTag>& theta, const std::set<CpeTag>& top,
                          std::size_t n_top) {
  if (theta.empty()) return false;
  if (theta.size() <= n_top) return std::includes(top.begin(), top.end(), theta.begin(), theta.end());
  return std::includes(theta.begin(), theta.end(), top.begin(), top.end());
}

std::map<std::string, std::size_t> distinct_in_degrees(const TemporalGraph& g) {
  std::map<std::string, std::set<std::string_view>> in;
  for (const auto& e : g.edges) in[e.dst].insert(e.src);
  std::map<std::string, std::size_t> deg;
  for (const auto& [u, s] : in) deg[u] = s.size();
  return deg;
}

}  // namespace

ExpertSet extract_experts(const TemporalGraph& hist, std::span<const Post* const> posts,
                          const CveCpeMap& cpe_map, const CpeRanking& ranking,
                          const ExpertCriteria& criteria, const DateRange& tau) {
  ExpertSet out;
  out.forum_id = hist.forum_id;
  out.tau = tau;
  out.top_cpes = ranking.top(criteria.n_top);
  out.indegree_threshold = criteria.indegree_threshold;
  const std::set<CpeTag> top(out.top_cpes.begin(), out.top_cpes.end());
  const auto theta = cpe_profiles(posts, hist.forum_id, cpe_map, ranking.window);
  const auto indeg = distinct_in_degrees(hist);
  for (const auto& [user, tags] : theta) {
    if (!hist.vertices.count(user)) continue;
    if (!meets_cpe_constraint(tags, top, criteria.n_top)) continue;
    auto it = indeg.find(user);
    const std::size_t d = it == indeg.end() ? 0 : it->second;
    if (d >= criteria.indegree_threshold) out.experts.insert(user);
  }
  return out;
}

ExpertSet extract_experts(const TemporalGraph& hist, std::span<const Post> posts,
                          const CveCpeMap& cpe_map, const CpeRanking& ranking,
                          const ExpertCriteria& criteria, const DateRange& tau) {
  std::vector<const Post*> ptrs;
  for (const auto& p : posts) ptrs.push_back(&p);
  return extract_experts(hist, std::span<const Post* const>(ptrs), cpe_map, ranking, criteria,
                         tau);
}

std::set<std::string> alternative_users(const TemporalGraph& hist,
                                        std::span<const Post* const> posts,
                                        const ExpertSet& experts) {
  std::set<std::string> alt;
  for (const Post* p : posts) {
    if (p->forum_id != hist.forum_id || !hist.window.contains(p->posted_at) ||
        p->cve_mentions.empty())
      continue;
    if (!experts.experts.count(p->user_id)) alt.insert(p->user_id);
  }
  return alt;
}

DegreeVectors interaction_degree_vectors(const TemporalGraph& graph,
                                         const std::set<std::string>& experts,
                                         const std::set<std::string>& alt_users,
                                         std::uint64_t sample_seed) {
  if (experts.empty()) throw Error("invalid_argument", "expert set is empty");
  if (alt_users.size() < experts.size())
    throw Error("invalid_argument", "fewer alternative users than experts");
  std::map<std::string_view, double> degree;
  for (const auto& e : graph.edges) {
    degree[e.src] += 1.0;
    degree[e.dst] += 1.0;
  }
  auto degree_of = [&](const std::string& u) {
    auto it = degree.find(u);
    return it == degree.end() ? 0.0 : it->second;
  };
  DegreeVectors out;
  for (const auto& u : experts) out.experts.push_back(degree_of(u));
  std::vector<std::string> pool(alt_users.begin(), alt_users.end());
  Rng rng(sample_seed);
  // Partial Fisher-Yates: the first |experts| slots form the sample.
  for (std::size_t i = 0; i < experts.size(); ++i) {
    std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
    out.alternatives.push_back(degree_of(pool[i]));
  }
  std::sort(out.experts.rbegin(), out.experts.rend());
  std::sort(out.alternatives.rbegin(), out.alternatives.rend());
  return out;
}

TTestResult welch_ttest_onesided(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw Error("invalid_argument", "t-test needs at least two observations per sample");
  auto moments = [](std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  if (sa + sb <= 0.0) throw Error("invalid_argument", "both samples have zero variance");
  TTestResult r;
  r.t_stat = (ma - mb) / std::sqrt(sa + sb);
  r.dof = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  boost::math::students_t dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.t_stat));
  return r;
}

void write_expert_sets(std::ostream& out, std::span<const ExpertSet> sets) {
  for (const auto& s : sets) {
    nlohmann::json tops = nlohmann::json::array();
    for (const auto& t : s.top_cpes)
      tops.push_back({{"os_platform", t.os_platform}, {"application", t.application}});
    nlohmann::json j = {{"forum_id", s.forum_id},
                        {"tau_begin", format_date(s.tau.begin)},
                        {"tau_end", format_date(s.tau.end)},
                        {"experts", std::vector<std::string>(s.experts.begin(), s.experts.end())},
                        {"top_cpes", tops},
                        {"indegree_threshold", s.indegree_threshold}};
    out << j.dump() << '\n';
  }
}

std::vector<ExpertSet> read_expert_sets(std::istream& in) {
  std::vector<ExpertSet> sets;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error("malformed_input", "bad expert-set record");
    ExpertSet s;
    try {
      s.forum_id = j.at("forum_id").get<std::string>();
      s.tau = {parse_date(j.at("tau_begin").get<std::string>()),
               parse_date(j.at("tau_end").get<std::string>())};
      for (const auto& u : j.at("experts")) s.experts.insert(u.get<std::string>());
      for (const auto& t : j.at("top_cpes"))
        s.top_cpes.push_back({t.at("os_platform").get<std::string>(),
                              t.at("application").get<std::string>()});
      s.indegree_threshold = j.at("indegree_threshold").get<std::size_t>();
    } catch (const std::exception& e) {
      throw Error("malformed_input", std::string("bad expert-set record: ") + e.what());
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

}  // namespace threatnet
