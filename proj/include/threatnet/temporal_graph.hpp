#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "threatnet/calendar.hpp"
#include "threatnet/ingestion.hpp"

namespace threatnet {

/// `src` replied (by thread position) to `dst` at `replied_at`.
struct ReplyEdge {
  std::string src;
  std::string dst;
  Timestamp replied_at{};
  std::string thread_id;

  bool operator==(const ReplyEdge&) const = default;
};

struct TemporalGraph {
  std::string forum_id;
  DateRange window;
  std::set<std::string> vertices;
  std::vector<ReplyEdge> edges;
};

/// Monthly subsequences tau with their preceding history windows.
struct WindowPlan {
  struct Entry {
    DateRange tau;
    DateRange history;
  };
  std::vector<Entry> windows;
};

/// Tiles `frame` with equal-span tau windows starting `history_span` after
/// the frame start; only complete windows are kept. Throws if not even one
/// (history, tau) pair fits.
WindowPlan plan_windows(const DateRange& frame, Span tau_span, Span history_span);

struct ReplyConstraints {
  std::size_t spatial_k = 10;          // distinct preceding posters considered
  std::int64_t temporal_w_seconds = 14 * 86400;  // max gap to the cited post

  static constexpr std::int64_t unbounded = INT64_MAX;
};

/// Orders thread posts chronologically, ties broken by post_id.
void sort_thread(std::vector<const Post*>& thread);

/// CREATE for one thread. `thread` must be sorted by sort_thread and share
/// one thread_id. Each post by u_i replies to the spatial_k most recent
/// distinct other users whose latest earlier post lies within temporal_w.
std::vector<ReplyEdge> create_reply_graph(std::span<const Post* const> thread,
                                          const ReplyConstraints& constraints);
std::vector<ReplyEdge> create_reply_graph(std::span<const Post> thread,
                                          const ReplyConstraints& constraints);

/// Precomputed reply edges and posting days for one forum; answers
/// build_graph queries for arbitrary windows without re-running CREATE.
class ForumIndex {
 public:
  ForumIndex(std::string forum_id, std::span<const Post> posts,
             const ReplyConstraints& constraints);

  const std::string& forum_id() const { return forum_id_; }

  /// Vertices: users posting in the forum within `window`. Edges: replies
  /// with replied_at in `window` whose cited user also posted in `window`.
  TemporalGraph graph(const DateRange& window) const;

  /// Posts of this forum with posted_at in `window`, chronological.
  std::vector<const Post*> posts_in(const DateRange& window) const;

  bool posted_in(const std::string& user, const DateRange& window) const;

 private:
  std::string forum_id_;
  std::vector<const Post*> posts_;  // chronological
  std::vector<ReplyEdge> edges_;    // sorted by replied_at, then creation order
  std::map<std::string, std::vector<Timestamp>> post_times_;
};

/// Builds the reply network of `forum_id` over `window` from `posts`
/// (posts of other forums are ignored).
TemporalGraph build_graph(std::span<const Post> posts, const std::string& forum_id,
                          const DateRange& window,
                          const ReplyConstraints& constraints = {});

/// Vertex union and edge concatenation; window is the convex hull.
TemporalGraph merge(const TemporalGraph& historical, const TemporalGraph& daily);

/// Debug dump: "src dst replied_at thread_id" per line.
void write_edge_list(std::ostream& out, const TemporalGraph& g);

}  // namespace threatnet
