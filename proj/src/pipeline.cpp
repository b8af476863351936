#include "threatnet/pipeline.hpp"

#include <openssl/evp.h>
#include <openssl/opensslv.h>
#include <openssl/crypto.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>

#include <boost/version.hpp>
#include <json.hpp>

#include "threatnet/evaluation.hpp"
#include "threatnet/experts.hpp"
#include "threatnet/features.hpp"
#include "threatnet/learning.hpp"
#include "threatnet/random.hpp"
#include "threatnet/synth.hpp"
#include "threatnet/temporal_graph.hpp"

#ifndef THREATNET_VERSION
#define THREATNET_VERSION "0.0.0"
#endif

namespace threatnet {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view library_version() { return THREATNET_VERSION; }

// ---------------------------------------------------------------- config

namespace {

std::string to_text(const std::string& v) { return v; }
std::string to_text(const fs::path& v) { return v.string(); }
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}
template <class T>
  requires std::is_integral_v<T>
std::string to_text(T v) {
  return std::to_string(v);
}

[[noreturn]] void bad_value(std::string_view key, const std::string& text, std::string_view want) {
  throw Error("config", std::string(key) + ": cannot parse '" + text + "' as " + std::string(want));
}

void from_text(std::string_view key, const std::string& text, std::string& out) {
  (void)key;
  out = text;
}
void from_text(std::string_view key, const std::string& text, fs::path& out) {
  (void)key;
  out = text;
}
void from_text(std::string_view key, const std::string& text, bool& out) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") out = true;
  else if (text == "false" || text == "0" || text == "no" || text == "off") out = false;
  else bad_value(key, text, "a boolean");
}
void from_text(std::string_view key, const std::string& text, double& out) {
  const char* b = text.data();
  auto [ptr, ec] = std::from_chars(b, b + text.size(), out);
  if (ec != std::errc{} || ptr != b + text.size() || text.empty()) bad_value(key, text, "a number");
}
template <class T>
  requires std::is_integral_v<T>
void from_text(std::string_view key, const std::string& text, T& out) {
  const char* b = text.data();
  auto [ptr, ec] = std::from_chars(b, b + text.size(), out);
  if (ec != std::errc{} || ptr != b + text.size() || text.empty())
    bad_value(key, text, std::is_signed_v<T> ? "an integer" : "a non-negative integer");
}

template <class T>
ConfigKey make_key(std::string name, std::string help, T PipelineConfig::*member) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.get = [member](const PipelineConfig& c) { return to_text(c.*member); };
  k.set = [member, name](PipelineConfig& c, const std::string& text) {
    from_text(name, text, c.*member);
  };
  if constexpr (std::is_same_v<T, bool>) k.kind = ConfigKey::Kind::flag;
  else if constexpr (std::is_arithmetic_v<T>) k.kind = ConfigKey::Kind::number;
  return k;
}

#define TN_KEY(field, help) make_key(#field, help, &PipelineConfig::field)

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      TN_KEY(posts, "posts file (JSON lines)"),
      TN_KEY(incidents, "incidents CSV"),
      TN_KEY(cpe_map, "CVE to CPE map CSV"),
      TN_KEY(output_dir, "directory for artifacts"),
      TN_KEY(features_file, "feature matrix CSV (default <output_dir>/features.csv)"),
      TN_KEY(model_file, "model JSON (default <output_dir>/model.json)"),
      TN_KEY(frame_begin, "first day of the study frame (YYYY-MM-DD)"),
      TN_KEY(frame_end, "day after the study frame"),
      TN_KEY(label_begin, "first labelled day"),
      TN_KEY(label_end, "day after the last labelled day"),
      TN_KEY(forum_min_posts, "keep forums with more posts than this"),
      TN_KEY(tau_span, "subsequence span, e.g. 1m"),
      TN_KEY(history_span, "history span, e.g. 3m"),
      TN_KEY(spatial_k, "distinct earlier posters a reply points to"),
      TN_KEY(temporal_w, "max age of the post replied to, e.g. 14d"),
      TN_KEY(n_top_cpe, "number of top CPE groups"),
      TN_KEY(indegree_threshold, "minimum expert in-degree"),
      TN_KEY(k_centrality, "top-k users for centrality features"),
      TN_KEY(delta, "lead time in days"),
      TN_KEY(eta, "lag window span in days"),
      TN_KEY(features, "comma list of feature or group names"),
      TN_KEY(model, "ridge | sparse_group_lasso"),
      TN_KEY(ridge_lambda, "ridge penalty"),
      TN_KEY(m, "sparse group lasso ridge weight"),
      TN_KEY(l, "sparse group lasso L1 weight"),
      TN_KEY(g, "sparse group lasso group weight"),
      TN_KEY(tol, "solver relative tolerance"),
      TN_KEY(max_iter, "solver iteration cap"),
      TN_KEY(train_fraction, "fraction of the span used for training"),
      TN_KEY(threshold_mode, "fixed | f1_tuned | prior_matched"),
      TN_KEY(threshold, "decision threshold for fixed mode"),
      TN_KEY(permute_labels, "shuffle day labels before splitting"),
      TN_KEY(event_type, "malicious-email | endpoint-malware"),
      TN_KEY(mode, "all_days | high_activity_weeks"),
      TN_KEY(min_attacks, "weekly incident count a high-activity week must exceed"),
      TN_KEY(baseline_trials, "Monte-Carlo trials for random baselines"),
      TN_KEY(seed, "seed for sampling, communities and baselines"),
      TN_KEY(workers, "worker threads (0 = all cores)"),
      TN_KEY(dump_edges, "write edge lists in build-graphs"),
      TN_KEY(synth_forums, "synthetic forums"),
      TN_KEY(synth_users, "synthetic users per forum"),
      TN_KEY(synth_days, "synthetic days"),
      TN_KEY(synth_start, "synthetic start date"),
      TN_KEY(synth_signal, "planted | none"),
      TN_KEY(synth_lead, "planted signal lead in days"),
      TN_KEY(synth_strength, "planted signal strength"),
      TN_KEY(synth_base_rate, "daily attack probability"),
      TN_KEY(synth_seed, "generator seed"),
  };
  return keys;
}

#undef TN_KEY

PipelineConfig PipelineConfig::with_defaults() {
  PipelineConfig c;
  const char* env = std::getenv(kOutputDirEnv);
  c.output_dir = env && *env ? fs::path(env) : fs::path("threatnet-out");
  return c;
}

fs::path PipelineConfig::resolved_features_file() const {
  return features_file.empty() ? output_dir / "features.csv" : features_file;
}

fs::path PipelineConfig::resolved_model_file() const {
  return model_file.empty() ? output_dir / "model.json" : model_file;
}

void set_config_value(PipelineConfig& config, std::string_view key, const std::string& text) {
  for (const auto& k : config_keys())
    if (k.name == key) return k.set(config, text);
  throw Error("config", "unknown config key '" + std::string(key) + "'");
}

PipelineConfig parse_config(std::istream& in, PipelineConfig base) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config", std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error("config", "config must be a JSON object");
  std::vector<std::string> problems;
  for (const auto& [key, value] : doc.items()) {
    try {
      set_config_value(base, key, value.is_string() ? value.get<std::string>() : value.dump());
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid config: ";
    for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
    throw Error("config", msg);
  }
  return base;
}

PipelineConfig load_config(const fs::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open config file " + path.string());
  return parse_config(in, std::move(base));
}

namespace {

json config_json(const PipelineConfig& config) {
  json out = json::object();
  for (const auto& k : config_keys()) {
    const std::string v = k.get(config);
    switch (k.kind) {
      case ConfigKey::Kind::number: out[k.name] = json::parse(v); break;
      case ConfigKey::Kind::flag: out[k.name] = v == "true"; break;
      default: out[k.name] = v;
    }
  }
  return out;
}

std::optional<std::vector<std::string>> resolve_features(const std::string& text) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string item = text.substr(pos, comma - pos);
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    pos = comma + 1;
    if (item.empty()) continue;
    std::vector<Feature> fs;
    if (item == "all") fs.assign(all_features().begin(), all_features().end());
    else if (auto grp = parse_feature_group(item)) fs = features_in(*grp);
    else if (auto f = parse_feature(item)) fs = {*f};
    else return std::nullopt;
    for (Feature f : fs) {
      std::string n(feature_name(f));
      if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
    }
  }
  if (names.empty()) return std::nullopt;
  return names;
}

}  // namespace

void write_config(std::ostream& out, const PipelineConfig& config) {
  out << config_json(config).dump(2) << '\n';
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"ingest",   "build-graphs", "experts",
                                                 "features", "train",        "evaluate",
                                                 "synth",    "all"};
  return names;
}

std::vector<std::string> PipelineConfig::violations(std::string_view sub) const {
  std::vector<std::string> v;
  auto one_of = [&](std::initializer_list<std::string_view> subs) {
    return std::find(subs.begin(), subs.end(), sub) != subs.end();
  };
  if (std::find(subcommands().begin(), subcommands().end(), sub) == subcommands().end())
    v.push_back("unknown subcommand '" + std::string(sub) + "'");
  if (output_dir.empty()) v.push_back("output_dir must be set");

  auto need_file = [&](const fs::path& p, std::string_view what) {
    if (p.empty()) v.push_back(std::string(what) + " path must be set");
    else if (!fs::is_regular_file(p))
      v.push_back(std::string(what) + " file does not exist: " + p.string());
  };
  const bool corpus = one_of({"ingest", "build-graphs", "experts", "features", "all"});
  if (corpus) {
    need_file(posts, "posts");
    need_file(cpe_map, "cpe_map");
  }
  if (one_of({"ingest", "train", "evaluate", "all"})) need_file(incidents, "incidents");
  if (one_of({"train", "evaluate"})) need_file(resolved_features_file(), "features");
  if (sub == "evaluate") need_file(resolved_model_file(), "model");

  auto check_date = [&](const std::string& text, std::string_view key) -> std::optional<Date> {
    if (text.empty()) return std::nullopt;
    try {
      return parse_date(text);
    } catch (const std::exception&) {
      v.push_back(std::string(key) + " must be YYYY-MM-DD, got '" + text + "'");
      return std::nullopt;
    }
  };
  const auto fb = check_date(frame_begin, "frame_begin"), fe = check_date(frame_end, "frame_end");
  if (frame_begin.empty() != frame_end.empty())
    v.push_back("frame_begin and frame_end must be given together");
  if (fb && fe && *fe <= *fb) v.push_back("frame_end must be after frame_begin");
  const auto lb = check_date(label_begin, "label_begin"), le = check_date(label_end, "label_end");
  if (label_begin.empty() != label_end.empty())
    v.push_back("label_begin and label_end must be given together");
  if (lb && le && *le <= *lb) v.push_back("label_end must be after label_begin");

  auto check_span = [&](const std::string& text, std::string_view key) -> std::optional<Span> {
    try {
      const Span s = Span::parse(text);
      if (s.count <= 0) throw std::invalid_argument("non-positive");
      return s;
    } catch (const std::exception&) {
      v.push_back(std::string(key) + " must be a positive span like 1m, 2w or 14d, got '" + text + "'");
      return std::nullopt;
    }
  };
  check_span(tau_span, "tau_span");
  check_span(history_span, "history_span");
  if (auto w = check_span(temporal_w, "temporal_w"); w && w->unit == Span::Unit::months)
    v.push_back("temporal_w must be given in days or weeks");

  if (spatial_k < 1) v.push_back("spatial_k must be at least 1");
  if (n_top_cpe < 1) v.push_back("n_top_cpe must be at least 1");
  if (k_centrality < 1) v.push_back("k_centrality must be at least 1");
  if (delta < 1) v.push_back("delta must be at least 1");
  if (eta < 0) v.push_back("eta must be non-negative");
  if (!resolve_features(features)) v.push_back("features: unknown feature or group in '" + features + "'");
  if (!parse_model_kind(model)) v.push_back("model must be ridge or sparse_group_lasso, got '" + model + "'");
  if (!(ridge_lambda >= 0)) v.push_back("ridge_lambda must be non-negative");
  if (!(m >= 0) || !(l >= 0) || !(g >= 0)) v.push_back("m, l and g must be non-negative");
  if (!(tol > 0)) v.push_back("tol must be positive");
  if (max_iter < 1) v.push_back("max_iter must be at least 1");
  if (!(train_fraction > 0 && train_fraction < 1)) v.push_back("train_fraction must lie in (0, 1)");
  if (!parse_threshold_mode(threshold_mode))
    v.push_back("threshold_mode must be fixed, f1_tuned or prior_matched");
  if (!(threshold >= 0 && threshold <= 1)) v.push_back("threshold must lie in [0, 1]");
  if (!parse_event_type(event_type))
    v.push_back("event_type must be malicious-email or endpoint-malware, got '" + event_type + "'");
  if (!parse_eval_mode(mode)) v.push_back("mode must be all_days or high_activity_weeks");
  if (min_attacks < 0) v.push_back("min_attacks must be non-negative");
  if (baseline_trials < 1) v.push_back("baseline_trials must be at least 1");

  if (sub == "synth") {
    if (synth_signal != "planted" && synth_signal != "none")
      v.push_back("synth_signal must be planted or none");
    SynthConfig sc;
    sc.n_forums = synth_forums;
    sc.users_per_forum = synth_users;
    sc.days = synth_days;
    sc.start_date = synth_start;
    sc.signal_lead_days = synth_lead;
    sc.signal_strength = synth_strength;
    sc.attack_base_rate = synth_base_rate;
    for (auto& s : sc.violations()) v.push_back("synth: " + s);
  }
  return v;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw Error("internal", "sha256 unavailable");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// ---------------------------------------------------------------- stages

namespace {

std::size_t worker_count(const PipelineConfig& c) {
  if (c.workers > 0) return c.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads; results keep
/// index order and the first failure (by index) is rethrown.
template <class Fn>
auto parallel_map(std::size_t n, std::size_t workers, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<std::optional<R>> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        out[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(workers, n); ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> result;
  result.reserve(n);
  for (auto& o : out) result.push_back(std::move(*o));
  return result;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  return out;
}

struct Inputs {
  PostLoad load;
  std::vector<Post> posts;  // after forum filtering
  std::map<std::string, std::size_t> forum_counts;  // before filtering
  std::vector<std::string> forums;  // retained, sorted
  CpeMapLoad cpe;
  DateRange frame;
  Diagnostics diag;
};

DateRange explicit_frame(const PipelineConfig& c) {
  return {parse_date(c.frame_begin), parse_date(c.frame_end)};
}

Inputs load_corpus(const PipelineConfig& c, std::ostream& log) {
  Inputs in;
  const bool fixed = !c.frame_begin.empty();
  const DateRange wide{parse_date("1900-01-01"), parse_date("9999-01-01")};
  in.load = load_posts(c.posts, fixed ? explicit_frame(c) : wide);
  if (fixed) {
    in.frame = explicit_frame(c);
  } else if (!in.load.posts.empty()) {
    Date lo = day_of(in.load.posts.front().posted_at), hi = lo;
    for (const auto& p : in.load.posts) {
      lo = std::min(lo, day_of(p.posted_at));
      hi = std::max(hi, day_of(p.posted_at));
    }
    in.frame = DateRange::inclusive(lo, hi);
  }
  for (const auto& p : in.load.posts) ++in.forum_counts[p.forum_id];
  in.posts = filter_forums(in.load.posts, c.forum_min_posts, &in.diag);
  for (const auto& [f, n] : in.forum_counts)
    if (n > c.forum_min_posts) in.forums.push_back(f);
  in.cpe = load_cpe_map(c.cpe_map);
  log << "[ingest] " << in.load.posts.size() << " posts, " << in.forums.size() << " of "
      << in.forum_counts.size() << " forums retained, frame " << format_date(in.frame.begin)
      << " .. " << format_date(in.frame.end - std::chrono::days{1}) << '\n';
  return in;
}

ReplyConstraints reply_constraints(const PipelineConfig& c) {
  const Span w = Span::parse(c.temporal_w);
  const std::int64_t days = w.unit == Span::Unit::weeks ? 7 * w.count : w.count;
  return {c.spatial_k, days * 86400};
}

WindowPlan window_plan(const PipelineConfig& c, const DateRange& frame) {
  return plan_windows(frame, Span::parse(c.tau_span), Span::parse(c.history_span));
}

/// Per-forum posts and their indices; indices point into `posts`.
struct ForumSet {
  std::map<std::string, std::vector<Post>> posts;
  std::vector<std::unique_ptr<ForumIndex>> indices;  // forum-id order
};

ForumSet index_forums(const Inputs& in, const PipelineConfig& c) {
  ForumSet fs;
  for (const auto& p : in.posts) fs.posts[p.forum_id].push_back(p);
  std::vector<const std::pair<const std::string, std::vector<Post>>*> entries;
  for (const auto& e : fs.posts) entries.push_back(&e);
  const auto rc = reply_constraints(c);
  fs.indices = parallel_map(entries.size(), worker_count(c), [&](std::size_t i) {
    return std::make_unique<ForumIndex>(entries[i]->first, entries[i]->second, rc);
  });
  return fs;
}

std::vector<CpeRanking> rankings_for(const WindowPlan& plan, const Inputs& in) {
  std::vector<CpeRanking> r;
  for (const auto& w : plan.windows)
    r.push_back(top_cpe_groups(std::span<const Post>(in.posts), in.cpe.map, w.history));
  return r;
}

ExpertCriteria expert_criteria(const PipelineConfig& c) { return {c.n_top_cpe, c.indegree_threshold}; }

std::vector<fs::path> stage_ingest(const PipelineConfig& c, std::ostream& log) {
  Inputs in = load_corpus(c, log);
  const auto type = *parse_event_type(c.event_type);
  json summary;
  summary["frame"] = {{"begin", format_date(in.frame.begin)},
                      {"end", format_date(in.frame.end)}};
  summary["posts"] = {{"loaded", in.load.posts.size()},
                      {"malformed", in.load.malformed},
                      {"out_of_frame", in.load.out_of_frame},
                      {"retained", in.posts.size()}};
  json forums = json::array();
  for (const auto& [f, n] : in.forum_counts)
    forums.push_back({{"forum_id", f}, {"posts", n}, {"retained", n > c.forum_min_posts}});
  summary["forums"] = forums;
  std::size_t mentions = 0;
  for (const auto& p : in.posts) mentions += p.cve_mentions.size();
  summary["cve_mentions"] = mentions;
  summary["cpe_map"] = {{"cves", in.cpe.map.size()}, {"skipped_rows", in.cpe.skipped}};
  json incidents = json::object();
  for (EventType t : {EventType::malicious_email, EventType::endpoint_malware}) {
    const auto inc = load_incidents(c.incidents, t, in.frame);
    long total = 0;
    for (const auto& i : inc.incidents) total += i.count;
    incidents[std::string(to_string(t))] = {
        {"attack_days", inc.incidents.size()}, {"incidents", total}, {"skipped_rows", inc.skipped}};
    for (const auto& w : inc.warnings) in.diag.warn(w);
  }
  summary["incidents"] = incidents;
  summary["event_type"] = to_string(type);
  std::vector<std::string> warnings = in.load.warnings;
  for (const auto& w : in.cpe.warnings) warnings.push_back(w);
  for (const auto& w : in.diag.warnings) warnings.push_back(w);
  summary["warnings"] = warnings;
  const fs::path out = c.output_dir / "corpus_summary.json";
  open_out(out) << summary.dump(2) << '\n';
  return {out};
}

std::vector<fs::path> stage_build_graphs(const PipelineConfig& c, std::ostream& log) {
  const Inputs in = load_corpus(c, log);
  const auto plan = window_plan(c, in.frame);
  const ForumSet forums = index_forums(in, c);
  const fs::path dir = c.output_dir / "graphs";
  fs::create_directories(dir);

  struct Row {
    std::string forum, tau, kind;
    std::size_t vertices, edges;
  };
  auto rows = parallel_map(forums.indices.size(), worker_count(c), [&](std::size_t i) {
    const auto& idx = *forums.indices[i];
    std::vector<Row> out;
    for (const auto& w : plan.windows) {
      const std::string tag = format_date(w.tau.begin);
      for (auto [kind, range] : {std::pair{"history", w.history}, std::pair{"tau", w.tau}}) {
        const auto graph = idx.graph(range);
        out.push_back({idx.forum_id(), tag, kind, graph.vertices.size(), graph.edges.size()});
        if (c.dump_edges) {
          auto f = open_out(dir / idx.forum_id() / (tag + "." + kind + ".edges"));
          write_edge_list(f, graph);
        }
      }
    }
    return out;
  });
  const fs::path index = dir / "index.csv";
  auto out = open_out(index);
  out << "forum_id,tau_begin,graph,vertices,edges\n";
  for (const auto& forum_rows : rows)
    for (const auto& r : forum_rows)
      out << r.forum << ',' << r.tau << ',' << r.kind << ',' << r.vertices << ',' << r.edges << '\n';
  log << "[build-graphs] " << forums.indices.size() << " forums x " << plan.windows.size()
      << " windows\n";
  return {index};
}

std::vector<fs::path> stage_experts(const PipelineConfig& c, std::ostream& log) {
  const Inputs in = load_corpus(c, log);
  const auto plan = window_plan(c, in.frame);
  const ForumSet forums = index_forums(in, c);
  const auto rankings = rankings_for(plan, in);
  const auto criteria = expert_criteria(c);

  struct ForumWindows {
    std::vector<ExpertSet> sets;
    std::vector<std::optional<DegreeVectors>> degrees;
  };
  auto per_forum = parallel_map(forums.indices.size(), worker_count(c), [&](std::size_t i) {
    const auto& idx = *forums.indices[i];
    ForumWindows fw;
    for (std::size_t w = 0; w < plan.windows.size(); ++w) {
      const auto& history = plan.windows[w].history;
      const auto hist = idx.graph(history);
      const auto posts = idx.posts_in(history);
      const std::span<const Post* const> ps(posts);
      fw.sets.push_back(extract_experts(hist, ps, in.cpe.map, rankings[w], criteria, plan.windows[w].tau));
      const auto alt = alternative_users(hist, ps, fw.sets.back());
      const auto& ex = fw.sets.back().experts;
      if (!ex.empty() && alt.size() >= ex.size())
        fw.degrees.emplace_back(interaction_degree_vectors(hist, ex, alt, c.seed + 7919 * w + i));
      else
        fw.degrees.emplace_back(std::nullopt);
    }
    return fw;
  });

  const fs::path experts_path = c.output_dir / "experts.jsonl";
  {
    auto out = open_out(experts_path);
    for (const auto& fw : per_forum) write_expert_sets(out, fw.sets);
  }
  json report = json::array();
  for (std::size_t w = 0; w < plan.windows.size(); ++w) {
    std::vector<double> a, b;
    std::size_t n_experts = 0;
    for (const auto& fw : per_forum) {
      n_experts += fw.sets[w].experts.size();
      if (!fw.degrees[w]) continue;
      a.insert(a.end(), fw.degrees[w]->experts.begin(), fw.degrees[w]->experts.end());
      b.insert(b.end(), fw.degrees[w]->alternatives.begin(), fw.degrees[w]->alternatives.end());
    }
    std::sort(a.rbegin(), a.rend());
    std::sort(b.rbegin(), b.rend());
    json row = {{"tau_begin", format_date(plan.windows[w].tau.begin)},
                {"history_begin", format_date(plan.windows[w].history.begin)},
                {"experts", n_experts},
                {"sampled", a.size()}};
    try {
      const auto t = welch_ttest_onesided(a, b);
      row["t_stat"] = t.t_stat;
      row["dof"] = t.dof;
      row["p_value"] = t.p_value;
    } catch (const Error& e) {
      row["skipped"] = e.what();
    }
    report.push_back(row);
  }
  const fs::path report_path = c.output_dir / "ttest_report.json";
  open_out(report_path) << report.dump(2) << '\n';
  log << "[experts] " << plan.windows.size() << " windows written\n";
  return {experts_path, report_path};
}

FeatureOptions feature_options(const PipelineConfig& c) {
  FeatureOptions o;
  o.community_seed = c.seed;
  o.k_centrality = c.k_centrality;
  return o;
}

std::vector<fs::path> stage_features(const PipelineConfig& c, std::ostream& log) {
  const Inputs in = load_corpus(c, log);
  const auto plan = window_plan(c, in.frame);
  const ForumSet forums = index_forums(in, c);
  const auto rankings = rankings_for(plan, in);
  const auto criteria = expert_criteria(c);
  const auto opts = feature_options(c);

  auto runs = parallel_map(forums.indices.size(), worker_count(c), [&](std::size_t i) {
    return compute_forum_features(*forums.indices[i], plan, rankings, in.cpe.map, criteria, opts);
  });
  std::vector<ForumSeries> series;
  json summary = json::array();
  std::vector<fs::path> written;
  for (const auto& r : runs) {
    series.push_back(r.series);
    summary.push_back({{"forum_id", r.series.forum_id},
                       {"days", r.series.dates.size()},
                       {"days_without_experts", r.days_without_experts}});
    const FeatureMatrix single = build_feature_matrix(std::span<const ForumSeries>(&r.series, 1));
    const fs::path p = c.output_dir / "forums" / (r.series.forum_id + ".csv");
    auto f = open_out(p);
    write_feature_matrix(f, single);
    written.push_back(p);
  }
  const FeatureMatrix matrix = build_feature_matrix(series);
  const fs::path out = c.resolved_features_file();
  {
    auto f = open_out(out);
    write_feature_matrix(f, matrix);
  }
  const fs::path sp = c.output_dir / "features_summary.json";
  open_out(sp) << summary.dump(2) << '\n';
  log << "[features] " << matrix.dates.size() << " days x " << matrix.names.size()
      << " features from " << series.size() << " forums\n";
  written.insert(written.begin(), {out, sp});
  return written;
}

std::optional<DateRange> label_frame(const PipelineConfig& c) {
  if (c.label_begin.empty()) return std::nullopt;
  return DateRange{parse_date(c.label_begin), parse_date(c.label_end)};
}

InstanceSet instances_for(const PipelineConfig& c, const FeatureMatrix& matrix,
                          std::span<const std::string> names, const LagWindowSpec& spec,
                          std::ostream& log) {
  const auto type = *parse_event_type(c.event_type);
  const auto inc = load_incidents(c.incidents, type);
  Diagnostics diag;
  InstanceSet set = make_instances(matrix, inc.incidents, spec, names, label_frame(c), &diag);
  for (const auto& w : diag.warnings) log << "[warning] " << w << '\n';
  if (c.permute_labels) {
    Rng rng(c.seed ^ 0x5eed5eedULL);
    rng.shuffle(set.labels);
  }
  return set;
}

std::vector<fs::path> stage_train(const PipelineConfig& c, std::ostream& log) {
  const FeatureMatrix matrix = read_feature_matrix(c.resolved_features_file());
  const auto names = *resolve_features(c.features);
  const LagWindowSpec spec{c.delta, c.eta};
  const InstanceSet set = instances_for(c, matrix, names, spec, log);
  const Split split = chronological_split(set, c.train_fraction);
  const SolverOptions solver{c.tol, c.max_iter, false};
  ModelFit fit = *parse_model_kind(c.model) == ModelKind::ridge
                     ? fit_ridge_logistic(split.train, {c.ridge_lambda}, solver)
                     : fit_sparse_group_lasso(split.train, {c.m, c.l, c.g}, solver);
  fit.threshold_mode = *parse_threshold_mode(c.threshold_mode);
  fit.threshold = choose_threshold(fit.threshold_mode, c.threshold, predict(fit, split.train),
                                   split.train.labels);
  const fs::path out = c.resolved_model_file();
  write_model(out, fit);
  log << "[train] " << to_string(fit.kind) << " on " << split.train.size() << " days before "
      << format_date(split.boundary) << (fit.converged ? ", converged" : ", NOT converged")
      << " after " << fit.iterations << " iterations\n";
  return {out};
}

std::vector<fs::path> stage_evaluate(const PipelineConfig& c, std::ostream& log) {
  const ModelFit fit = read_model(c.resolved_model_file());
  const FeatureMatrix matrix = read_feature_matrix(c.resolved_features_file());
  const InstanceSet set = instances_for(c, matrix, fit.feature_names, fit.spec, log);
  const Split split = chronological_split(set, c.train_fraction);
  const auto type = *parse_event_type(c.event_type);
  const auto inc = load_incidents(c.incidents, type);
  EvalOptions opts;
  opts.mode = *parse_eval_mode(c.mode);
  opts.min_attacks = c.min_attacks;
  opts.baseline_trials = c.baseline_trials;
  opts.seed = c.seed;
  const Evaluation ev = evaluate(fit, split, inc.incidents, type, opts);

  const fs::path report = c.output_dir / "report.txt", metrics = c.output_dir / "metrics.csv",
                 plot = c.output_dir / "plot_data.csv";
  {
    auto f = open_out(report);
    write_report_text(f, ev.report);
  }
  {
    auto f = open_out(metrics);
    write_metrics_csv(f, ev.report);
  }
  {
    auto f = open_out(plot);
    write_plot_data(f, ev.plot);
  }
  log << "[evaluate] f1 " << format_double(ev.report.scores.f1) << " (random "
      << format_double(ev.report.random_no_prior_f1) << ", prior "
      << format_double(ev.report.random_prior_f1) << ")\n";
  return {report, metrics, plot};
}

std::vector<fs::path> stage_synth(const PipelineConfig& c, std::ostream& log) {
  SynthConfig sc;
  sc.n_forums = c.synth_forums;
  sc.users_per_forum = c.synth_users;
  sc.days = c.synth_days;
  sc.start_date = c.synth_start;
  sc.signal = c.synth_signal == "none" ? SignalKind::none : SignalKind::planted;
  sc.signal_lead_days = c.synth_lead;
  sc.signal_strength = c.synth_strength;
  sc.attack_base_rate = c.synth_base_rate;
  sc.seed = c.synth_seed;
  const auto files = generate(sc, c.output_dir);
  log << "[synth] wrote " << files.posts.string() << '\n';
  return {files.posts, files.incidents, files.cpe_map};
}

struct Reference {
  const char* key;
  json value;
};

// Values a default run is expected to carry.
const std::vector<Reference>& reference_defaults() {
  static const std::vector<Reference> refs = {
      {"tau_span", "1m"},         {"history_span", "3m"},       {"indegree_threshold", 10},
      {"k_centrality", 50},       {"n_top_cpe", 5},             {"delta", 7},
      {"eta", 8},                 {"m", 0.3},                   {"l", 0.3},
      {"g", 0.1},                 {"train_fraction", 0.7},      {"forum_min_posts", 5000},
      {"min_attacks", 5},
  };
  return refs;
}

void write_manifest(const PipelineConfig& c, std::string_view sub,
                    const std::vector<fs::path>& outputs, const std::string& error) {
  json m;
  m["tool"] = "threatnet";
  m["version"] = library_version();
  m["subcommand"] = sub;
  m["status"] = error.empty() ? "ok" : "failed";
  if (!error.empty()) m["error"] = error;
  const json cfg = config_json(c);
  m["config"] = cfg;
  json refs = json::object();
  bool all_match = true;
  for (const auto& r : reference_defaults()) {
    const bool match = cfg[r.key] == r.value;
    all_match = all_match && match;
    refs[r.key] = {{"value", cfg[r.key]}, {"reference", r.value}, {"matches", match}};
  }
  m["reference_defaults"] = refs;
  m["all_reference_defaults_match"] = all_match;
  json inputs = json::object();
  auto digest = [&](const char* name, const fs::path& p) {
    if (p.empty() || !fs::is_regular_file(p)) return;
    inputs[name] = {{"path", p.string()}, {"sha256", sha256_file(p)}};
  };
  if (sub != "synth") {
    digest("posts", c.posts);
    digest("incidents", c.incidents);
    digest("cpe_map", c.cpe_map);
  }
  m["inputs"] = inputs;
  json outs = json::array();
  for (const auto& p : outputs) {
    const auto rel = p.lexically_relative(c.output_dir);
    outs.push_back({{"path", rel.empty() ? p.string() : rel.string()},
                    {"sha256", fs::is_regular_file(p) ? sha256_file(p) : ""}});
  }
  m["outputs"] = outs;
  m["libraries"] = {{"boost", BOOST_LIB_VERSION},
                    {"openssl", OpenSSL_version(OPENSSL_VERSION)},
                    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  open_out(c.output_dir / "manifest.json") << m.dump(2) << '\n';
}

}  // namespace

std::vector<fs::path> run(std::string_view sub, const PipelineConfig& config, std::ostream& log) {
  if (auto v = config.violations(sub); !v.empty()) {
    std::string msg = "invalid config (" + std::to_string(v.size()) + " problem" +
                      (v.size() == 1 ? "" : "s") + "): ";
    for (std::size_t i = 0; i < v.size(); ++i) msg += (i ? "; " : "") + v[i];
    if (!config.output_dir.empty()) {
      try {
        fs::create_directories(config.output_dir);
        write_manifest(config, sub, {}, msg);
      } catch (...) {
      }
    }
    throw Error("config", msg);
  }
  fs::create_directories(config.output_dir);
  std::vector<fs::path> outputs;
  auto append = [&](std::vector<fs::path> more) {
    outputs.insert(outputs.end(), more.begin(), more.end());
  };
  try {
    if (sub == "ingest") append(stage_ingest(config, log));
    else if (sub == "build-graphs") append(stage_build_graphs(config, log));
    else if (sub == "experts") append(stage_experts(config, log));
    else if (sub == "features") append(stage_features(config, log));
    else if (sub == "train") append(stage_train(config, log));
    else if (sub == "evaluate") append(stage_evaluate(config, log));
    else if (sub == "synth") append(stage_synth(config, log));
    else if (sub == "all") {
      append(stage_ingest(config, log));
      append(stage_build_graphs(config, log));
      append(stage_experts(config, log));
      append(stage_features(config, log));
      append(stage_train(config, log));
      append(stage_evaluate(config, log));
    }
  } catch (const std::exception& e) {
    try {
      write_manifest(config, sub, outputs, e.what());
    } catch (...) {
    }
    throw;
  }
  write_manifest(config, sub, outputs, "");
  return outputs;
}

}  // namespace threatnet
