#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "threatnet/calendar.hpp"
#include "threatnet/error.hpp"

namespace threatnet {

enum class EventType { malicious_email, endpoint_malware };

std::string_view to_string(EventType type);
std::optional<EventType> parse_event_type(std::string_view text);

struct Post {
  std::string post_id;
  std::string forum_id;
  std::string thread_id;
  std::string user_id;
  Timestamp posted_at{};
  std::string content;  // empty unless loaded with keep_content
  std::vector<std::string> cve_mentions;

  bool operator==(const Post&) const = default;
};

struct Incident {
  EventType event_type = EventType::malicious_email;
  Date occurred_on{};
  int count = 1;

  bool operator==(const Incident&) const = default;
};

struct CpeTag {
  std::string os_platform;
  std::string application;

  std::string str() const { return os_platform + "/" + application; }
  auto operator<=>(const CpeTag&) const = default;
};

/// CVE id -> set of CPE tags.
class CveCpeMap {
 public:
  void add(const std::string& cve_id, CpeTag tag);
  const std::set<CpeTag>* tags_of(const std::string& cve_id) const;
  const std::map<std::string, std::set<CpeTag>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  bool operator==(const CveCpeMap&) const = default;

 private:
  std::map<std::string, std::set<CpeTag>> entries_;
};

struct Corpus {
  std::vector<Post> posts;
  std::vector<Incident> incidents;
  CveCpeMap cpe_map;
  DateRange study_frame;
};

/// True if `id` is a canonical uppercase CVE identifier, CVE-YYYY-NNNN[NNN].
bool is_cve_id(std::string_view id);

/// Deduplicated, uppercased CVE ids in order of first occurrence.
std::vector<std::string> extract_cves(std::string_view content);

struct LoadOptions {
  bool keep_content = false;
  double max_malformed_fraction = 0.10;
  std::size_t min_records_for_fraction_rule = 20;
};

struct PostLoad {
  std::vector<Post> posts;
  std::size_t malformed = 0;
  std::size_t out_of_frame = 0;
  std::vector<std::string> warnings;
};

/// Reads newline-delimited JSON post records. Malformed lines are skipped and
/// counted; more than `max_malformed_fraction` of them is fatal.
PostLoad load_posts(const std::filesystem::path& path, const DateRange& frame,
                    const LoadOptions& options = {});
PostLoad parse_posts(std::istream& in, const DateRange& frame, const LoadOptions& options = {});

/// Keeps posts of forums whose post count is strictly greater than
/// `forum_min_posts`.
std::vector<Post> filter_forums(std::span<const Post> posts, std::size_t forum_min_posts,
                                Diagnostics* diag = nullptr);

struct IncidentLoad {
  std::vector<Incident> incidents;  // sorted by date, one per date
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Reads `event_type,occurred_on,count` rows for one event type, collapsing
/// rows on the same date by summing counts. An optional frame drops rows
/// outside it.
IncidentLoad load_incidents(const std::filesystem::path& path, EventType event_type,
                            const std::optional<DateRange>& frame = std::nullopt);
IncidentLoad parse_incidents(std::istream& in, EventType event_type,
                             const std::optional<DateRange>& frame = std::nullopt);

struct CpeMapLoad {
  CveCpeMap map;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

CpeMapLoad load_cpe_map(const std::filesystem::path& path);
CpeMapLoad parse_cpe_map(std::istream& in);

/// Writers produce exactly the formats the loaders accept. Posts without
/// retained content are written with their CVE mentions as content so that a
/// reload recovers the same mentions.
void write_posts(std::ostream& out, std::span<const Post> posts);
void write_incidents(std::ostream& out, std::span<const Incident> incidents);
void write_cpe_map(std::ostream& out, const CveCpeMap& map);

void write_posts(const std::filesystem::path& path, std::span<const Post> posts);
void write_incidents(const std::filesystem::path& path, std::span<const Incident> incidents);
void write_cpe_map(const std::filesystem::path& path, const CveCpeMap& map);

/// Splits one CSV line into fields; double-quoted fields may contain commas.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace threatnet
