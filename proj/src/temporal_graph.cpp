#include "threatnet/temporal_graph.hpp"

#include <algorithm>
#include <ostream>
#include <tuple>
#include <unordered_set>

#include "threatnet/error.hpp"

namespace threatnet {

WindowPlan plan_windows(const DateRange& frame, Span tau_span, Span history_span) {
  WindowPlan plan;
  const Date first_tau = add(frame.begin, history_span);
  for (int i = 0;; ++i) {
    const Date b = add(first_tau, tau_span, i);
    const Date e = add(first_tau, tau_span, i + 1);
    if (e > frame.end) break;
    plan.windows.push_back({{b, e}, {add(b, history_span, -1), b}});
  }
  if (plan.windows.empty())
    throw Error("config", "study frame " + format_date(frame.begin) + ".." +
                              format_date(frame.end) + " is shorter than history " +
                              history_span.str() + " + tau " + tau_span.str());
  return plan;
}

void sort_thread(std::vector<const Post*>& thread) {
  std::sort(thread.begin(), thread.end(), [](const Post* a, const Post* b) {
    return std::tie(a->posted_at, a->post_id) < std::tie(b->posted_at, b->post_id);
  });
}

std::vector<ReplyEdge> create_reply_graph(std::span<const Post* const> thread,
                                          const ReplyConstraints& c) {
  std::vector<ReplyEdge> edges;
  std::set<std::tuple<std::string_view, std::string_view, Timestamp>> emitted;
  std::vector<std::string_view> recent;
  for (std::size_t i = 1; i < thread.size(); ++i) {
    const Post& reply = *thread[i];
    recent.clear();
    for (std::size_t j = i; j-- > 0 && recent.size() < c.spatial_k;) {
      const Post& cited = *thread[j];
      if (cited.user_id == reply.user_id) continue;
      if (std::find(recent.begin(), recent.end(), cited.user_id) != recent.end()) continue;
      // Scanning newest-first, so every remaining post is older still.
      if ((reply.posted_at - cited.posted_at).count() > c.temporal_w_seconds) break;
      recent.push_back(cited.user_id);
      if (!emitted.emplace(reply.user_id, cited.user_id, reply.posted_at).second) continue;
      edges.push_back({reply.user_id, cited.user_id, reply.posted_at, reply.thread_id});
    }
  }
  return edges;
}

std::vector<ReplyEdge> create_reply_graph(std::span<const Post> thread,
                                          const ReplyConstraints& c) {
  std::vector<const Post*> ptrs;
  ptrs.reserve(thread.size());
  for (const auto& p : thread) ptrs.push_back(&p);
  sort_thread(ptrs);
  return create_reply_graph(std::span<const Post* const>(ptrs), c);
}

ForumIndex::ForumIndex(std::string forum_id, std::span<const Post> posts,
                       const ReplyConstraints& constraints)
    : forum_id_(std::move(forum_id)) {
  std::map<std::string_view, std::vector<const Post*>> threads;
  for (const auto& p : posts) {
    if (p.forum_id != forum_id_) continue;
    posts_.push_back(&p);
    threads[p.thread_id].push_back(&p);
  }
  sort_thread(posts_);
  for (auto& [id, thread] : threads) {
    sort_thread(thread);
    auto e = create_reply_graph(std::span<const Post* const>(thread), constraints);
    edges_.insert(edges_.end(), std::make_move_iterator(e.begin()),
                  std::make_move_iterator(e.end()));
  }
  std::stable_sort(edges_.begin(), edges_.end(),
                   [](const ReplyEdge& a, const ReplyEdge& b) { return a.replied_at < b.replied_at; });
  for (const Post* p : posts_) post_times_[p->user_id].push_back(p->posted_at);
}

std::vector<const Post*> ForumIndex::posts_in(const DateRange& window) const {
  auto lo = std::lower_bound(posts_.begin(), posts_.end(), Timestamp{window.begin},
                             [](const Post* p, Timestamp t) { return p->posted_at < t; });
  auto hi = std::lower_bound(lo, posts_.end(), Timestamp{window.end},
                             [](const Post* p, Timestamp t) { return p->posted_at < t; });
  return {lo, hi};
}

bool ForumIndex::posted_in(const std::string& user, const DateRange& window) const {
  auto it = post_times_.find(user);
  if (it == post_times_.end()) return false;
  auto lo = std::lower_bound(it->second.begin(), it->second.end(), Timestamp{window.begin});
  return lo != it->second.end() && *lo < Timestamp{window.end};
}

TemporalGraph ForumIndex::graph(const DateRange& window) const {
  TemporalGraph g;
  g.forum_id = forum_id_;
  g.window = window;
  if (window.empty()) return g;
  for (const Post* p : posts_in(window)) g.vertices.insert(p->user_id);
  auto lo = std::lower_bound(edges_.begin(), edges_.end(), Timestamp{window.begin},
                             [](const ReplyEdge& e, Timestamp t) { return e.replied_at < t; });
  for (auto it = lo; it != edges_.end() && it->replied_at < Timestamp{window.end}; ++it)
    if (g.vertices.count(it->dst)) g.edges.push_back(*it);
  return g;
}

TemporalGraph build_graph(std::span<const Post> posts, const std::string& forum_id,
                          const DateRange& window, const ReplyConstraints& constraints) {
  return ForumIndex(forum_id, posts, constraints).graph(window);
}

TemporalGraph merge(const TemporalGraph& historical, const TemporalGraph& daily) {
  if (historical.forum_id != daily.forum_id)
    throw Error("invalid_argument",
                "cannot merge graphs of forums " + historical.forum_id + " and " + daily.forum_id);
  TemporalGraph g = historical;
  g.window = historical.window.hull(daily.window);
  g.vertices.insert(daily.vertices.begin(), daily.vertices.end());
  g.edges.insert(g.edges.end(), daily.edges.begin(), daily.edges.end());
  return g;
}

void write_edge_list(std::ostream& out, const TemporalGraph& g) {
  for (const auto& e : g.edges)
    out << e.src << ' ' << e.dst << ' ' << format_timestamp(e.replied_at) << ' ' << e.thread_id
        << '\n';
}

}  // namespace threatnet
