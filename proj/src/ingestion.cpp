#include "threatnet/ingestion.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace threatnet {

using json = nlohmann::json;

std::string_view to_string(EventType type) {
  switch (type) {
    case EventType::malicious_email: return "malicious-email";
    case EventType::endpoint_malware: return "endpoint-malware";
  }
  return "unknown";
}

std::optional<EventType> parse_event_type(std::string_view text) {
  if (text == "malicious-email" || text == "malicious_email") return EventType::malicious_email;
  if (text == "endpoint-malware" || text == "endpoint_malware") return EventType::endpoint_malware;
  return std::nullopt;
}

void CveCpeMap::add(const std::string& cve_id, CpeTag tag) {
  if (!is_cve_id(cve_id)) throw Error("malformed_input", "not a CVE id: " + cve_id);
  if (tag.os_platform.empty() || tag.application.empty())
    throw Error("malformed_input", "empty CPE tag component for " + cve_id);
  entries_[cve_id].insert(std::move(tag));
}

const std::set<CpeTag>* CveCpeMap::tags_of(const std::string& cve_id) const {
  auto it = entries_.find(cve_id);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Length of a CVE id starting at `pos` (case-insensitive), or 0.
std::size_t match_cve(std::string_view s, std::size_t pos) {
  if (pos + 13 > s.size()) return 0;
  if (std::toupper(static_cast<unsigned char>(s[pos])) != 'C' ||
      std::toupper(static_cast<unsigned char>(s[pos + 1])) != 'V' ||
      std::toupper(static_cast<unsigned char>(s[pos + 2])) != 'E' || s[pos + 3] != '-')
    return 0;
  std::size_t i = pos + 4;
  for (std::size_t k = 0; k < 4; ++k, ++i)
    if (!is_digit(s[i])) return 0;
  if (s[i] != '-') return 0;
  ++i;
  std::size_t n = 0;
  while (i < s.size() && is_digit(s[i]) && n < 8) ++i, ++n;
  if (n < 4 || n > 7) return 0;
  return i - pos;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot read file: " + path.string());
  return in;
}

std::ofstream create_or_throw(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write file: " + path.string());
  return out;
}

std::optional<std::string> string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

bool is_cve_id(std::string_view id) {
  if (match_cve(id, 0) != id.size()) return false;
  return id.substr(0, 3) == "CVE";
}

std::vector<std::string> extract_cves(std::string_view content) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < content.size(); ++i) {
    if (i > 0 && is_alnum(content[i - 1])) continue;
    const std::size_t len = match_cve(content, i);
    if (len == 0) continue;
    std::string id(content.substr(i, len));
    id[0] = 'C', id[1] = 'V', id[2] = 'E';
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(std::move(id));
    i += len - 1;
  }
  return out;
}

PostLoad parse_posts(std::istream& in, const DateRange& frame, const LoadOptions& options) {
  PostLoad result;
  std::unordered_set<std::string> seen_ids;
  std::size_t records = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    ++records;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      ++result.malformed;
      continue;
    }
    auto post_id = string_field(j, "post_id");
    auto forum_id = string_field(j, "forum_id");
    auto thread_id = string_field(j, "thread_id");
    auto user_id = string_field(j, "user_id");
    auto posted_at = string_field(j, "posted_at");
    auto content = string_field(j, "content");
    if (!post_id || !forum_id || !thread_id || !user_id || !posted_at || !content ||
        post_id->empty() || forum_id->empty() || thread_id->empty() || user_id->empty()) {
      ++result.malformed;
      continue;
    }
    Post p;
    try {
      p.posted_at = parse_timestamp(*posted_at);
    } catch (const std::invalid_argument&) {
      ++result.malformed;
      continue;
    }
    if (!seen_ids.insert(*post_id).second) {
      ++result.malformed;
      result.warnings.push_back("duplicate post_id on line " + std::to_string(lineno));
      continue;
    }
    if (!frame.contains(p.posted_at)) {
      ++result.out_of_frame;
      continue;
    }
    p.post_id = std::move(*post_id);
    p.forum_id = std::move(*forum_id);
    p.thread_id = std::move(*thread_id);
    p.user_id = std::move(*user_id);
    p.cve_mentions = extract_cves(*content);
    if (options.keep_content) p.content = std::move(*content);
    result.posts.push_back(std::move(p));
  }
  if (records == 0) {
    result.warnings.push_back("posts input is empty");
    return result;
  }
  // The fraction rule needs a minimum sample; a file where every record is
  // malformed is rejected regardless of size.
  const bool too_many =
      records >= options.min_records_for_fraction_rule &&
      static_cast<double>(result.malformed) >
          options.max_malformed_fraction * static_cast<double>(records);
  if (too_many || result.malformed == records) {
    throw Error("malformed_input", std::to_string(result.malformed) + " of " +
                                       std::to_string(records) +
                                       " post records are malformed; wrong file?");
  }
  if (result.malformed > 0)
    result.warnings.push_back("skipped " + std::to_string(result.malformed) +
                              " malformed post records");
  return result;
}

PostLoad load_posts(const std::filesystem::path& path, const DateRange& frame,
                    const LoadOptions& options) {
  auto in = open_or_throw(path);
  try {
    return parse_posts(in, frame, options);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<Post> filter_forums(std::span<const Post> posts, std::size_t forum_min_posts,
                                Diagnostics* diag) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& p : posts) ++counts[p.forum_id];
  std::vector<Post> kept;
  for (const auto& p : posts)
    if (counts[p.forum_id] > forum_min_posts) kept.push_back(p);
  if (kept.empty() && !posts.empty())
    warn(diag, "no forum has more than " + std::to_string(forum_min_posts) + " posts");
  return kept;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

namespace {

// Maps header names to column positions; throws if a required one is absent.
std::unordered_map<std::string, std::size_t> read_header(std::istream& in,
                                                         std::initializer_list<const char*> required,
                                                         const char* what) {
  std::string line;
  while (std::getline(in, line) && trim(line).empty()) {
  }
  std::unordered_map<std::string, std::size_t> cols;
  auto fields = split_csv_line(line);
  for (std::size_t i = 0; i < fields.size(); ++i) cols[fields[i]] = i;
  for (const char* name : required)
    if (!cols.count(name))
      throw Error("malformed_input", std::string(what) + " header lacks column '" + name + "'");
  return cols;
}

}  // namespace

IncidentLoad parse_incidents(std::istream& in, EventType event_type,
                             const std::optional<DateRange>& frame) {
  IncidentLoad result;
  auto cols = read_header(in, {"event_type", "occurred_on"}, "incidents");
  const auto count_col = cols.count("count") ? std::optional(cols["count"]) : std::nullopt;
  std::map<Date, int> per_day;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    auto field = [&](std::size_t i) -> std::string { return i < f.size() ? f[i] : std::string{}; };
    auto type = parse_event_type(field(cols["event_type"]));
    if (!type) {
      ++result.skipped;
      continue;
    }
    if (*type != event_type) continue;
    Date d;
    try {
      d = parse_date(field(cols["occurred_on"]));
    } catch (const std::invalid_argument&) {
      ++result.skipped;
      continue;
    }
    int count = 1;
    if (count_col && !field(*count_col).empty()) {
      const std::string c = field(*count_col);
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), count);
      if (ec != std::errc{} || ptr != c.data() + c.size() || count < 1) {
        ++result.skipped;
        continue;
      }
    }
    if (frame && !frame->contains(d)) continue;
    per_day[d] += count;
  }
  for (auto& [d, c] : per_day) result.incidents.push_back({event_type, d, c});
  if (result.skipped > 0)
    result.warnings.push_back("skipped " + std::to_string(result.skipped) + " incident rows");
  return result;
}

IncidentLoad load_incidents(const std::filesystem::path& path, EventType event_type,
                            const std::optional<DateRange>& frame) {
  auto in = open_or_throw(path);
  return parse_incidents(in, event_type, frame);
}

CpeMapLoad parse_cpe_map(std::istream& in) {
  CpeMapLoad result;
  auto cols = read_header(in, {"cve_id", "os_platform", "application"}, "CVE-CPE map");
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    auto field = [&](const char* name) -> std::string {
      auto i = cols[name];
      return i < f.size() ? f[i] : std::string{};
    };
    std::string cve = field("cve_id");
    for (auto& c : cve) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    CpeTag tag{field("os_platform"), field("application")};
    if (!is_cve_id(cve) || tag.os_platform.empty() || tag.application.empty()) {
      ++result.skipped;
      continue;
    }
    result.map.add(cve, std::move(tag));
  }
  if (result.skipped > 0)
    result.warnings.push_back("skipped " + std::to_string(result.skipped) + " CVE-CPE rows");
  return result;
}

CpeMapLoad load_cpe_map(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_cpe_map(in);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

void write_posts(std::ostream& out, std::span<const Post> posts) {
  for (const auto& p : posts) {
    std::string content = p.content;
    if (content.empty()) {
      for (const auto& cve : p.cve_mentions) {
        if (!content.empty()) content += ' ';
        content += cve;
      }
    }
    json j = {{"post_id", p.post_id},
              {"forum_id", p.forum_id},
              {"thread_id", p.thread_id},
              {"user_id", p.user_id},
              {"posted_at", format_timestamp(p.posted_at)},
              {"content", content}};
    out << j.dump() << '\n';
  }
}

void write_incidents(std::ostream& out, std::span<const Incident> incidents) {
  out << "event_type,occurred_on,count\n";
  for (const auto& i : incidents)
    out << to_string(i.event_type) << ',' << format_date(i.occurred_on) << ',' << i.count << '\n';
}

void write_cpe_map(std::ostream& out, const CveCpeMap& map) {
  out << "cve_id,os_platform,application\n";
  for (const auto& [cve, tags] : map.entries())
    for (const auto& t : tags)
      out << cve << ',' << csv_field(t.os_platform) << ',' << csv_field(t.application) << '\n';
}

void write_posts(const std::filesystem::path& path, std::span<const Post> posts) {
  auto out = create_or_throw(path);
  write_posts(out, posts);
}

void write_incidents(const std::filesystem::path& path, std::span<const Incident> incidents) {
  auto out = create_or_throw(path);
  write_incidents(out, incidents);
}

void write_cpe_map(const std::filesystem::path& path, const CveCpeMap& map) {
  auto out = create_or_throw(path);
  write_cpe_map(out, map);
}

}  // namespace threatnet
