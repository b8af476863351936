#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "test_support.hpp"
#include "threatnet/temporal_graph.hpp"

using namespace threatnet;
using testing_support::post;

namespace {

ReplyConstraints unbounded(std::size_t k = 10) { return {k, ReplyConstraints::unbounded}; }

std::vector<Post> random_forum(std::mt19937& rng, int n_posts, int n_users, int n_threads, int n_days) {
  std::vector<Post> posts;
  const Timestamp start = parse_timestamp("2017-01-01T00:00:00Z");
  for (int i = 0; i < n_posts; ++i) {
    Post p;
    p.post_id = "p" + std::to_string(i);
    p.forum_id = "f";
    p.thread_id = "t" + std::to_string(rng() % n_threads);
    p.user_id = "u" + std::to_string(rng() % n_users);
    p.posted_at = start + std::chrono::seconds{static_cast<long>(rng() % (n_days * 86400))};
    // occasional identical timestamps exercise the post_id tie-break
    if (i > 0 && rng() % 10 == 0) p.posted_at = posts.back().posted_at;
    posts.push_back(p);
  }
  return posts;
}

std::vector<std::tuple<std::string, std::string, Timestamp, std::string>> edge_keys(const TemporalGraph& g) {
  std::vector<std::tuple<std::string, std::string, Timestamp, std::string>> keys;
  for (const auto& e : g.edges) keys.emplace_back(e.src, e.dst, e.replied_at, e.thread_id);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

TEST_CASE("plan_windows examples") {
  const auto one = plan_windows(DateRange::inclusive(parse_date("2016-10-01"), parse_date("2017-01-31")),
                                Span::parse("1m"), Span::parse("3m"));
  REQUIRE(one.windows.size() == 1);
  CHECK(one.windows[0].tau == DateRange{parse_date("2017-01-01"), parse_date("2017-02-01")});
  CHECK(one.windows[0].history == DateRange{parse_date("2016-10-01"), parse_date("2017-01-01")});

  // Tiling by hand: Jan-Mar is history for April; April..December are 9 taus.
  const auto year = plan_windows(DateRange::inclusive(parse_date("2016-01-01"), parse_date("2016-12-31")),
                                 Span::parse("1m"), Span::parse("3m"));
  CHECK(year.windows.size() == 9);

  CHECK_THROWS_AS(plan_windows(DateRange::inclusive(parse_date("2016-01-01"), parse_date("2016-02-29")),
                               Span::parse("1m"), Span::parse("3m")),
                  Error);
}

TEST_CASE("plan_windows invariants") {
  const auto plan = plan_windows(DateRange{parse_date("2016-01-15"), parse_date("2017-08-03")},
                                 Span::parse("1m"), Span::parse("3m"));
  REQUIRE(plan.windows.size() > 1);
  for (std::size_t i = 0; i < plan.windows.size(); ++i) {
    const auto& w = plan.windows[i];
    CHECK(w.history.end == w.tau.begin);
    CHECK(w.history.begin == add_months(w.tau.begin, -3));
    CHECK(w.tau.end <= parse_date("2017-08-03"));
    if (i > 0) CHECK(plan.windows[i - 1].tau.end == w.tau.begin);
  }
}

TEST_CASE("create_reply_graph examples") {
  SUBCASE("single reply") {
    const std::vector<Post> t = {post("1", "A", "2017-01-01T00:00:00Z"), post("2", "B", "2017-01-01T01:00:00Z")};
    const auto e = create_reply_graph(t, unbounded());
    REQUIRE(e.size() == 1);
    CHECK(e[0].src == "B");
    CHECK(e[0].dst == "A");
    CHECK(e[0].replied_at == t[1].posted_at);
  }
  SUBCASE("no self edge") {
    const std::vector<Post> t = {post("1", "A", "2017-01-01T00:00:00Z"), post("2", "B", "2017-01-01T01:00:00Z"),
                                 post("3", "A", "2017-01-01T02:00:00Z")};
    const auto e = create_reply_graph(t, unbounded());
    REQUIRE(e.size() == 2);
    CHECK((e[0].src == "B" && e[0].dst == "A"));
    CHECK((e[1].src == "A" && e[1].dst == "B"));
  }
  SUBCASE("gap beyond temporal_w") {
    // 20 days exceeds the 14-day window, so nothing is cited.
    const std::vector<Post> t = {post("1", "A", "2017-01-01T00:00:00Z"), post("2", "B", "2017-01-21T00:00:00Z")};
    CHECK(create_reply_graph(t, ReplyConstraints{10, 14 * 86400}).empty());
    const std::vector<Post> t14 = {post("1", "A", "2017-01-01T00:00:00Z"), post("2", "B", "2017-01-15T00:00:00Z")};
    CHECK(create_reply_graph(t14, ReplyConstraints{10, 14 * 86400}).size() == 1);
  }
  SUBCASE("spatial_k limits fan-out to the most recent distinct users") {
    const std::vector<Post> t = {post("1", "A", "2017-01-01T00:00:00Z"), post("2", "B", "2017-01-01T01:00:00Z"),
                                 post("3", "C", "2017-01-01T02:00:00Z"), post("4", "B", "2017-01-01T03:00:00Z"),
                                 post("5", "D", "2017-01-01T04:00:00Z")};
    const auto e = create_reply_graph(t, unbounded(2));
    std::set<std::string> from_d;
    for (const auto& x : e)
      if (x.src == "D") from_d.insert(x.dst);
    CHECK(from_d == std::set<std::string>{"B", "C"});
  }
}

TEST_CASE("create_reply_graph properties on random threads") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    auto posts = random_forum(rng, 60, 8, 1, 40);
    std::vector<const Post*> thread;
    for (const auto& p : posts) thread.push_back(&p);
    sort_thread(thread);
    const std::size_t k = 1 + rng() % 4;
    const ReplyConstraints rc{k, static_cast<std::int64_t>(1 + rng() % 10) * 86400};
    const auto edges = create_reply_graph(std::span<const Post* const>(thread), rc);

    std::map<std::string, Timestamp> latest;  // user -> latest post time so far
    std::map<std::tuple<std::string, Timestamp>, std::size_t> per_post;
    std::set<std::tuple<std::string, std::string, Timestamp>> seen;
    for (const auto& e : edges) {
      CHECK(e.src != e.dst);
      CHECK(seen.insert({e.src, e.dst, e.replied_at}).second);
      ++per_post[{e.src, e.replied_at}];
    }
    // several posts by one user can share a timestamp; each cites at most k users
    std::map<std::tuple<std::string, Timestamp>, std::size_t> posts_at;
    for (const Post* p : thread) ++posts_at[{p->user_id, p->posted_at}];
    for (const auto& [key, n] : per_post) CHECK(n <= k * posts_at[key]);
    // every cited user posted earlier in the thread within the window
    for (const auto& e : edges) {
      bool found = false;
      for (const Post* p : thread)
        if (p->user_id == e.dst && p->posted_at <= e.replied_at &&
            (e.replied_at - p->posted_at).count() <= rc.temporal_w_seconds)
          found = true;
      CHECK(found);
    }
  }
}

TEST_CASE("build_graph examples") {
  const std::vector<Post> posts = {post("1", "A", "2017-01-01T10:00:00Z"), post("2", "B", "2017-01-02T10:00:00Z")};
  const DateRange both{parse_date("2017-01-01"), parse_date("2017-01-03")};
  const auto g = build_graph(posts, "f1", both);
  CHECK(g.vertices.size() == 2);
  CHECK(g.edges.size() == 1);

  const auto first = build_graph(posts, "f1", DateRange{parse_date("2017-01-01"), parse_date("2017-01-02")});
  CHECK(first.vertices.size() == 1);
  CHECK(first.edges.empty());

  std::vector<Post> two = posts;
  two.push_back(post("3", "A", "2017-01-01T11:00:00Z", "t2"));
  two.push_back(post("4", "B", "2017-01-01T12:00:00Z", "t2"));
  const auto g2 = build_graph(two, "f1", both);
  std::set<std::string> threads;
  for (const auto& e : g2.edges) threads.insert(e.thread_id);
  CHECK(threads == std::set<std::string>{"t1", "t2"});

  CHECK(build_graph(posts, "other", both).vertices.empty());
}

TEST_CASE("build_graph over a window equals filtering the full-frame graph") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const auto posts = random_forum(rng, 400, 25, 30, 60);
    const DateRange full{parse_date("2017-01-01"), parse_date("2017-03-10")};
    const ReplyConstraints rc{3, 7 * 86400};
    const auto whole = build_graph(posts, "f", full, rc);
    const Date b = parse_date("2017-01-01") + std::chrono::days{static_cast<int>(rng() % 50)};
    const DateRange tau{b, b + std::chrono::days{1 + static_cast<int>(rng() % 10)}};
    const auto windowed = build_graph(posts, "f", tau, rc);

    std::set<std::string> posted;
    for (const auto& p : posts)
      if (tau.contains(p.posted_at)) posted.insert(p.user_id);
    TemporalGraph expected;
    for (const auto& e : whole.edges)
      if (tau.contains(e.replied_at) && posted.count(e.src) && posted.count(e.dst)) expected.edges.push_back(e);
    CHECK(windowed.vertices == posted);
    CHECK(edge_keys(windowed) == edge_keys(expected));

    ForumIndex index("f", posts, rc);
    CHECK(edge_keys(index.graph(tau)) == edge_keys(windowed));
    for (const auto& e : windowed.edges) {
      CHECK(windowed.vertices.count(e.src));
      CHECK(windowed.vertices.count(e.dst));
    }
  }
}

TEST_CASE("build_graph is deterministic under input order") {
  std::mt19937 rng(29);
  auto posts = random_forum(rng, 200, 15, 10, 20);
  const DateRange full{parse_date("2017-01-01"), parse_date("2017-02-01")};
  const auto a = build_graph(posts, "f", full);
  std::shuffle(posts.begin(), posts.end(), rng);
  const auto b = build_graph(posts, "f", full);
  CHECK(a.edges == b.edges);
  CHECK(a.vertices == b.vertices);
}

TEST_CASE("merge examples and properties") {
  TemporalGraph g{"f", DateRange{parse_date("2017-01-01"), parse_date("2017-02-01")}, {"a", "b", "c"},
                  {{"a", "b", parse_timestamp("2017-01-05T00:00:00Z"), "t"}}};
  TemporalGraph empty{"f", {}, {}, {}};
  const auto m = merge(g, empty);
  CHECK(m.vertices == g.vertices);
  CHECK(m.edges == g.edges);
  CHECK(m.window == g.window);

  TemporalGraph d{"f", DateRange{parse_date("2017-02-01"), parse_date("2017-02-02")}, {"x", "y"},
                  {{"x", "y", parse_timestamp("2017-02-01T03:00:00Z"), "t2"}}};
  const auto u = merge(g, d);
  CHECK(u.vertices.size() == 5);
  CHECK(u.vertices.size() >= std::max(g.vertices.size(), d.vertices.size()));
  CHECK(u.edges.size() == 2);
  CHECK(u.window == DateRange{parse_date("2017-01-01"), parse_date("2017-02-02")});

  TemporalGraph e{"f", DateRange{parse_date("2017-02-02"), parse_date("2017-02-03")}, {"a", "z"},
                  {{"z", "a", parse_timestamp("2017-02-02T03:00:00Z"), "t3"}}};
  const auto left = merge(merge(g, d), e), right = merge(g, merge(d, e));
  CHECK(left.vertices == right.vertices);
  CHECK(edge_keys(left) == edge_keys(right));
  CHECK(left.window == right.window);

  TemporalGraph other{"g", {}, {}, {}};
  CHECK_THROWS_AS(merge(g, other), Error);
}

TEST_CASE("edge list dump") {
  TemporalGraph g{"f", {}, {"a", "b"}, {{"a", "b", parse_timestamp("2017-01-05T01:02:03Z"), "t9"}}};
  std::ostringstream out;
  write_edge_list(out, g);
  CHECK(out.str() == "a b 2017-01-05T01:02:03Z t9\n");
}
