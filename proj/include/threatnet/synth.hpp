#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "threatnet/graph_algorithms.hpp"
#include "threatnet/ingestion.hpp"

namespace threatnet {

enum class SignalKind { none, planted };

struct SynthConfig {
  std::size_t n_forums = 10;
  std::size_t users_per_forum = 200;
  std::size_t days = 500;
  std::string start_date = "2016-01-01";
  std::size_t threads_per_day = 6;
  std::size_t posts_per_thread = 5;
  std::size_t cve_pool_size = 300;
  std::size_t cpe_pool_size = 40;
  std::size_t experts_per_forum = 5;
  SignalKind signal = SignalKind::planted;
  int signal_lead_days = 2;
  double signal_strength = 0.9;
  double attack_base_rate = 0.29;
  std::uint64_t seed = 1;

  /// Every violated constraint, empty when valid.
  std::vector<std::string> violations() const;
};

struct SynthCorpus {
  Corpus corpus;
  /// Days (as offsets from the start) that received an activity burst.
  std::vector<std::size_t> burst_days;
  std::vector<std::size_t> attack_days;
  /// Designated expert-like users per forum.
  std::map<std::string, std::vector<std::string>> designated_experts;
};

/// Seeded and fully deterministic. Under a planted signal every attack day
/// t is preceded, with probability signal_strength, by a burst on
/// t - signal_lead_days: designated users open threads on hot-CPE CVEs and
/// collect replies from many users. Under no signal, bursts fall on days
/// drawn independently of attacks.
SynthCorpus generate_corpus(const SynthConfig& config);

struct SynthFiles {
  std::filesystem::path posts;
  std::filesystem::path incidents;
  std::filesystem::path cpe_map;
};

/// Writes posts.jsonl, incidents.csv and cpe_map.csv into `dir`.
SynthFiles generate(const SynthConfig& config, const std::filesystem::path& dir);

/// Small graph with brute-force reference values.
struct OracleCase {
  std::string name;
  CompactGraph graph;
  double damping = 0.85;
  std::vector<VertexId> subset;
  std::vector<double> stationary;   // dense linear solve
  double conductance = 0.0;         // exhaustive pair summation, subset vs rest
  std::vector<double> betweenness;  // shortest-path enumeration
  std::map<VertexId, std::size_t> distances;  // subset -> nearest non-subset vertex
  /// Exhaustive partition search (only for graphs with <= 8 vertices).
  std::optional<double> best_modularity;
  std::optional<std::vector<std::size_t>> best_partition;
};

/// At least `random_cases` random graphs with 2..10 vertices plus fixed
/// structured cases (2-cycle, path, clique pair).
std::vector<OracleCase> oracle_small_graph_suite(std::size_t random_cases = 24,
                                                 std::uint64_t seed = 7);

}  // namespace threatnet
