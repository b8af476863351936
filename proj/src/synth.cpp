#include "threatnet/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "threatnet/random.hpp"

namespace threatnet {

std::vector<std::string> SynthConfig::violations() const {
  std::vector<std::string> v;
  auto positive = [&](std::size_t x, const char* name) {
    if (x == 0) v.push_back(std::string(name) + " must be positive");
  };
  positive(n_forums, "n_forums");
  positive(users_per_forum, "users_per_forum");
  positive(days, "days");
  positive(threads_per_day, "threads_per_day");
  positive(cve_pool_size, "cve_pool_size");
  positive(cpe_pool_size, "cpe_pool_size");
  positive(experts_per_forum, "experts_per_forum");
  if (posts_per_thread < 2) v.push_back("posts_per_thread must be at least 2");
  if (cpe_pool_size > 0 && cpe_pool_size < 4) v.push_back("cpe_pool_size must be at least 4");
  if (cve_pool_size > 0 && cve_pool_size < 10) v.push_back("cve_pool_size must be at least 10");
  if (experts_per_forum >= users_per_forum)
    v.push_back("experts_per_forum must be smaller than users_per_forum");
  if (users_per_forum > 0 && users_per_forum < 20) v.push_back("users_per_forum must be at least 20");
  if (signal == SignalKind::planted && signal_lead_days < 1)
    v.push_back("planted signal requires signal_lead_days >= 1");
  if (!(signal_strength >= 0.0 && signal_strength <= 1.0))
    v.push_back("signal_strength must lie in [0, 1]");
  if (!(attack_base_rate > 0.0 && attack_base_rate < 1.0))
    v.push_back("attack_base_rate must lie in (0, 1)");
  try {
    parse_date(start_date);
  } catch (const std::invalid_argument&) {
    v.push_back("start_date must be YYYY-MM-DD");
  }
  return v;
}

namespace {

constexpr std::size_t kHotTags = 3;
constexpr const char* kPlatforms[] = {"windows", "linux", "android", "macos"};
constexpr const char* kFiller[] = {
    "anyone tried this yet", "works on my box", "selling access, pm me", "thanks for sharing",
    "link is dead", "any updates on this?", "patched already", "check the second post",
};

std::string cve_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "CVE-%zu-%04zu", 2014 + i % 4, 1000 + i);
  return buf;
}

struct ThreadState {
  std::string id;
  std::size_t day;
};

class ForumWriter {
 public:
  ForumWriter(std::size_t forum, Date start, Date end, std::vector<Post>& out)
      : prefix_("f" + std::to_string(forum)), start_(start), end_(end), out_(out) {}

  std::string new_thread() { return prefix_ + "_t" + std::to_string(next_thread_++); }

  void post(const std::string& thread, const std::string& user, Timestamp at, std::string content) {
    if (at >= Timestamp{end_}) return;
    Post p;
    p.post_id = prefix_ + "_p" + std::to_string(next_post_++);
    p.forum_id = prefix_;
    p.thread_id = thread;
    p.user_id = user;
    p.posted_at = at;
    p.cve_mentions = extract_cves(content);
    p.content = std::move(content);
    out_.push_back(std::move(p));
  }

  const std::string& id() const { return prefix_; }

 private:
  std::string prefix_;
  Date start_, end_;
  std::vector<Post>& out_;
  std::size_t next_thread_ = 0, next_post_ = 0;
};

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& cfg) {
  if (auto v = cfg.violations(); !v.empty()) throw Error("config", "invalid synth config: " + v.front());
  Rng rng(cfg.seed);
  SynthCorpus out;
  const Date start = parse_date(cfg.start_date);
  const Date end = start + std::chrono::days{static_cast<int>(cfg.days)};
  out.corpus.study_frame = {start, end};

  // CPE tags; the first kHotTags are the ones designated experts talk about.
  std::vector<CpeTag> tags;
  for (std::size_t i = 0; i < cfg.cpe_pool_size; ++i)
    tags.push_back({kPlatforms[i % 4], "app" + std::to_string(i)});
  const std::size_t n_hot_cves = std::max<std::size_t>(3, cfg.cve_pool_size / 15);
  std::vector<std::string> cves;
  for (std::size_t i = 0; i < cfg.cve_pool_size; ++i) {
    cves.push_back(cve_name(i));
    if (i < n_hot_cves) {
      out.corpus.cpe_map.add(cves.back(), tags[i % kHotTags]);
      if (i % 2 == 0) out.corpus.cpe_map.add(cves.back(), tags[(i + 1) % kHotTags]);
    } else {
      const std::size_t cold = cfg.cpe_pool_size - kHotTags;
      out.corpus.cpe_map.add(cves.back(), tags[kHotTags + rng.index(cold)]);
      if (rng.bernoulli(0.3)) out.corpus.cpe_map.add(cves.back(), tags[kHotTags + rng.index(cold)]);
    }
  }

  // Ground truth and burst schedule.
  std::set<std::size_t> bursts;
  for (std::size_t d = 0; d < cfg.days; ++d) {
    if (rng.bernoulli(cfg.attack_base_rate)) {
      int count = 1;
      while (count < 6 && rng.bernoulli(0.4)) ++count;
      out.attack_days.push_back(d);
      out.corpus.incidents.push_back(
          {EventType::malicious_email, start + std::chrono::days{static_cast<int>(d)}, count});
    }
    if (rng.bernoulli(cfg.attack_base_rate / 3.0))
      out.corpus.incidents.push_back(
          {EventType::endpoint_malware, start + std::chrono::days{static_cast<int>(d)}, 1});
  }
  if (cfg.signal == SignalKind::planted) {
    const auto lead = static_cast<std::size_t>(cfg.signal_lead_days);
    for (std::size_t a : out.attack_days)
      if (a >= lead && rng.bernoulli(cfg.signal_strength)) bursts.insert(a - lead);
  } else {
    for (std::size_t d = 0; d < cfg.days; ++d)
      if (rng.bernoulli(cfg.attack_base_rate * cfg.signal_strength)) bursts.insert(d);
  }
  out.burst_days.assign(bursts.begin(), bursts.end());

  const std::size_t hot_cves = n_hot_cves;
  auto hot_mention = [&] { return "new poc for " + cves[rng.index(hot_cves)] + " works"; };
  auto filler = [&] { return std::string(kFiller[rng.index(std::size(kFiller))]); };

  for (std::size_t f = 0; f < cfg.n_forums; ++f) {
    ForumWriter w(f, start, end, out.corpus.posts);
    std::vector<std::string> users;
    for (std::size_t u = 0; u < cfg.users_per_forum; ++u) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "_u%03zu", u);
      users.push_back(w.id() + buf);
    }
    const std::vector<std::string> experts(users.begin(),
                                           users.begin() + static_cast<std::ptrdiff_t>(cfg.experts_per_forum));
    out.designated_experts[w.id()] = experts;
    auto is_expert = [&](const std::string& u) {
      return std::find(experts.begin(), experts.end(), u) != experts.end();
    };
    auto content_for = [&](const std::string& user) {
      if (is_expert(user) && rng.bernoulli(0.3)) return hot_mention();
      if (rng.bernoulli(0.03)) return "what about " + cves[rng.index(cves.size())] + "?";
      return filler();
    };
    std::vector<ThreadState> history;

    for (std::size_t d = 0; d < cfg.days; ++d) {
      const Timestamp day_start{start + std::chrono::days{static_cast<int>(d)}};
      const std::size_t n_threads = std::max<std::size_t>(1, cfg.threads_per_day + rng.index(3) - 1);
      for (std::size_t k = 0; k < n_threads; ++k) {
        const std::string thread = w.new_thread();
        history.push_back({thread, d});
        Timestamp t = day_start + std::chrono::seconds{rng.index(20 * 3600)};
        const std::size_t n_posts = 2 + rng.index(2 * cfg.posts_per_thread - 3);
        std::vector<std::string> posters;
        for (std::size_t p = 0; p < n_posts; ++p) {
          std::string user = !posters.empty() && rng.bernoulli(0.35)
                                 ? posters[rng.index(posters.size())]
                                 : users[rng.index(users.size())];
          w.post(thread, user, t, content_for(user));
          posters.push_back(std::move(user));
          t += std::chrono::seconds{60 + rng.index(5400)};
        }
      }
      // Occasionally revive a thread whose last activity is beyond the
      // default reply window.
      if (d >= 40 && rng.bernoulli(0.1)) {
        std::vector<const ThreadState*> old;
        for (const auto& th : history)
          if (th.day + 40 >= d && th.day + 15 <= d) old.push_back(&th);
        if (!old.empty()) {
          const std::string thread = old[rng.index(old.size())]->id;
          Timestamp t = day_start + std::chrono::seconds{rng.index(20 * 3600)};
          for (int p = 0; p < 2; ++p) {
            const auto& user = users[rng.index(users.size())];
            w.post(thread, user, t, content_for(user));
            t += std::chrono::seconds{60 + rng.index(3600)};
          }
        }
      }
      if (history.size() > 64 * cfg.threads_per_day) history.erase(history.begin(), history.begin() + static_cast<std::ptrdiff_t>(cfg.threads_per_day));

      if (!bursts.count(d)) continue;
      for (int b = 0; b < 3; ++b) {
        const std::string thread = w.new_thread();
        const std::string& expert = experts[rng.index(experts.size())];
        Timestamp t = day_start + std::chrono::seconds{rng.index(12 * 3600)};
        w.post(thread, expert, t, hot_mention());
        const std::size_t n_replies = 9 + rng.index(4);
        std::set<std::size_t> used;
        for (std::size_t r = 0; r < n_replies; ++r) {
          std::size_t u;
          do {
            u = cfg.experts_per_forum + rng.index(users.size() - cfg.experts_per_forum);
          } while (used.count(u) && used.size() + cfg.experts_per_forum < users.size());
          used.insert(u);
          t += std::chrono::seconds{60 + rng.index(1200)};
          w.post(thread, users[u], t, filler());
          if (r % 3 == 2) {
            t += std::chrono::seconds{60 + rng.index(600)};
            w.post(thread, expert, t, hot_mention());
          }
        }
      }
    }
  }
  return out;
}

SynthFiles generate(const SynthConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto synth = generate_corpus(config);
  SynthFiles files{dir / "posts.jsonl", dir / "incidents.csv", dir / "cpe_map.csv"};
  write_posts(files.posts, synth.corpus.posts);
  write_incidents(files.incidents, synth.corpus.incidents);
  write_cpe_map(files.cpe_map, synth.corpus.cpe_map);
  return files;
}

}  // namespace threatnet
