#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "test_support.hpp"
#include "threatnet/experts.hpp"
#include "threatnet/features.hpp"
#include "threatnet/synth.hpp"

using namespace threatnet;

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n, mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Correlation between the aggregated conductance feature on day t - lag and
// the malicious-email label on day t.
double conductance_label_correlation(const SynthConfig& cfg, int lag) {
  const auto synth = generate_corpus(cfg);
  const auto plan = plan_windows(synth.corpus.study_frame, Span::parse("1m"), Span::parse("3m"));
  std::vector<CpeRanking> rankings;
  for (const auto& w : plan.windows)
    rankings.push_back(top_cpe_groups(synth.corpus.posts, synth.corpus.cpe_map, w.history));
  std::vector<ForumSeries> series;
  for (std::size_t f = 0; f < cfg.n_forums; ++f) {
    const ForumIndex index("f" + std::to_string(f), synth.corpus.posts, ReplyConstraints{});
    series.push_back(compute_forum_features(index, plan, rankings, synth.corpus.cpe_map, {5, 10}).series);
  }
  const auto m = build_feature_matrix(series);
  std::set<Date> attacks;
  for (const auto& inc : synth.corpus.incidents)
    if (inc.event_type == EventType::malicious_email) attacks.insert(inc.occurred_on);
  std::vector<double> x, y;
  const auto& col = m.column("conductance");
  for (std::size_t i = static_cast<std::size_t>(lag); i < m.dates.size(); ++i) {
    x.push_back(col[i - static_cast<std::size_t>(lag)]);
    y.push_back(attacks.count(m.dates[i]) ? 1.0 : 0.0);
  }
  return pearson(x, y);
}

SynthConfig small(std::uint64_t seed) {
  SynthConfig c;
  c.n_forums = 2;
  c.users_per_forum = 60;
  c.days = 500;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("same seed gives byte-identical files") {
  SynthConfig cfg = small(11);
  cfg.days = 120;
  const auto a = generate(cfg, testing_support::temp_dir("synth_a"));
  const auto b = generate(cfg, testing_support::temp_dir("synth_b"));
  CHECK(testing_support::read_file(a.posts) == testing_support::read_file(b.posts));
  CHECK(testing_support::read_file(a.incidents) == testing_support::read_file(b.incidents));
  CHECK(testing_support::read_file(a.cpe_map) == testing_support::read_file(b.cpe_map));
  cfg.seed = 12;
  const auto c = generate(cfg, testing_support::temp_dir("synth_c"));
  CHECK(testing_support::read_file(a.posts) != testing_support::read_file(c.posts));
}

TEST_CASE("generated files load with zero malformed lines") {
  SynthConfig cfg = small(2);
  cfg.days = 90;
  const auto files = generate(cfg, testing_support::temp_dir("synth_load"));
  const auto posts = load_posts(files.posts, DateRange{parse_date("2015-01-01"), parse_date("2020-01-01")});
  CHECK(posts.malformed == 0);
  CHECK(posts.out_of_frame == 0);
  CHECK_FALSE(posts.posts.empty());
  const auto inc = load_incidents(files.incidents, EventType::malicious_email);
  CHECK(inc.skipped == 0);
  CHECK_FALSE(inc.incidents.empty());
  CHECK(load_cpe_map(files.cpe_map).skipped == 0);
}

TEST_CASE("full-strength planted signal puts a burst before every attack") {
  SynthConfig cfg = small(3);
  cfg.days = 200;
  cfg.signal_strength = 1.0;
  cfg.signal_lead_days = 2;
  const auto s = generate_corpus(cfg);
  const std::set<std::size_t> bursts(s.burst_days.begin(), s.burst_days.end());
  REQUIRE(s.attack_days.size() > 20);
  for (std::size_t a : s.attack_days)
    if (a >= 2) CHECK(bursts.count(a - 2) == 1);
}

TEST_CASE("bursts lift designated users above the expert in-degree threshold") {
  SynthConfig cfg = small(4);
  cfg.days = 240;
  const auto s = generate_corpus(cfg);
  const auto plan = plan_windows(s.corpus.study_frame, Span::parse("1m"), Span::parse("3m"));
  const Date start = s.corpus.study_frame.begin;
  for (const auto& [forum, designated] : s.designated_experts) {
    const ForumIndex index(forum, s.corpus.posts, ReplyConstraints{});
    for (const auto& w : plan.windows) {
      bool has_burst = false;
      for (std::size_t d : s.burst_days)
        if (w.history.contains(start + std::chrono::days{static_cast<int>(d)})) has_burst = true;
      if (!has_burst) continue;
      const auto g = index.graph(w.history);
      std::map<std::string, std::set<std::string>> in;
      for (const auto& e : g.edges) in[e.dst].insert(e.src);
      for (const auto& u : designated)
        if (g.vertices.count(u)) CHECK(in[u].size() >= 10);
    }
  }
}

TEST_CASE("no planted signal leaves features uncorrelated with labels") {
  SynthConfig none = small(5);
  none.signal = SignalKind::none;
  const double r = conductance_label_correlation(none, 2);
  CHECK(std::abs(r) < 0.1);

  const double planted = conductance_label_correlation(small(5), 2);
  CHECK(planted > 0.5);
}

TEST_CASE("config violations are all reported") {
  SynthConfig c;
  CHECK(c.violations().empty());
  c.n_forums = 0;
  c.signal_lead_days = 0;
  c.signal_strength = 2;
  c.attack_base_rate = 1.0;
  c.start_date = "soon";
  CHECK(c.violations().size() == 5);
  CHECK_THROWS_AS(generate_corpus(c), Error);
}

TEST_CASE("oracle suite covers the structured cases") {
  const auto suite = oracle_small_graph_suite();
  CHECK(suite.size() >= 28);
  std::set<std::string> names;
  for (const auto& c : suite) {
    names.insert(c.name);
    CHECK(c.graph.size() <= 10);
    double sum = 0;
    for (double p : c.stationary) sum += p;
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  CHECK(names.count("two_cycle"));
  CHECK(names.count("path3"));
  CHECK(names.count("clique_pair"));
  for (const auto& c : suite) {
    if (c.name == "two_cycle") {
      CHECK(c.stationary[0] == doctest::Approx(0.5));
      CHECK(c.stationary[1] == doctest::Approx(0.5));
    }
    if (c.name == "path3") CHECK(c.betweenness == std::vector<double>{0, 1, 0});
  }
}
