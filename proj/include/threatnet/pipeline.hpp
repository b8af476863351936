#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace threatnet {

/// Name of the environment variable that supplies the default output dir.
inline constexpr const char* kOutputDirEnv = "THREATNET_OUT";

struct PipelineConfig {
  // inputs and outputs
  std::filesystem::path posts;
  std::filesystem::path incidents;
  std::filesystem::path cpe_map;
  std::filesystem::path output_dir;
  std::filesystem::path features_file;  // defaults to <output_dir>/features.csv
  std::filesystem::path model_file;     // defaults to <output_dir>/model.json

  // frames; empty means inferred from the posts
  std::string frame_begin;
  std::string frame_end;  // exclusive
  std::string label_begin;
  std::string label_end;  // exclusive

  std::size_t forum_min_posts = 5000;
  std::string tau_span = "1m";
  std::string history_span = "3m";
  std::size_t spatial_k = 10;
  std::string temporal_w = "14d";
  std::size_t n_top_cpe = 5;
  std::size_t indegree_threshold = 10;
  std::size_t k_centrality = 50;

  int delta = 7;
  int eta = 8;
  std::string features = "expert_centric";
  std::string model = "sparse_group_lasso";
  double ridge_lambda = 1.0;
  double m = 0.3;
  double l = 0.3;
  double g = 0.1;
  double tol = 1e-6;
  int max_iter = 10000;
  double train_fraction = 0.7;
  std::string threshold_mode = "fixed";
  double threshold = 0.5;
  bool permute_labels = false;

  std::string event_type = "malicious-email";
  std::string mode = "all_days";
  int min_attacks = 5;
  std::size_t baseline_trials = 10000;
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0 = hardware concurrency
  bool dump_edges = true;

  // synth subcommand
  std::size_t synth_forums = 10;
  std::size_t synth_users = 200;
  std::size_t synth_days = 500;
  std::string synth_start = "2016-01-01";
  std::string synth_signal = "planted";
  int synth_lead = 2;
  double synth_strength = 0.9;
  double synth_base_rate = 0.29;
  std::uint64_t synth_seed = 1;

  /// Output dir from the environment when unset, else "threatnet-out".
  static PipelineConfig with_defaults();

  std::filesystem::path resolved_features_file() const;
  std::filesystem::path resolved_model_file() const;

  /// Every violated constraint for running `subcommand`; empty when valid.
  std::vector<std::string> violations(std::string_view subcommand) const;
};

/// A config entry addressable by name from files and the command line.
struct ConfigKey {
  std::string name;  // snake_case in files, --kebab-case on the command line
  std::string help;
  std::function<std::string(const PipelineConfig&)> get;
  /// Throws Error("config") when `text` does not parse.
  std::function<void(PipelineConfig&, const std::string& text)> set;
  enum class Kind { text, number, flag } kind = Kind::text;
};

const std::vector<ConfigKey>& config_keys();

/// Reads a JSON object of config keys. Unknown keys and unparsable values
/// are collected and reported together.
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base);
PipelineConfig parse_config(std::istream& in, PipelineConfig base);
void set_config_value(PipelineConfig& config, std::string_view key, const std::string& text);

void write_config(std::ostream& out, const PipelineConfig& config);

const std::vector<std::string>& subcommands();

/// Runs one subcommand; progress lines go to `log`. Throws threatnet::Error
/// on failure. Returns the files written.
std::vector<std::filesystem::path> run(std::string_view subcommand, const PipelineConfig& config,
                                       std::ostream& log);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

std::string_view library_version();

}  // namespace threatnet
