#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "threatnet/ingestion.hpp"
#include "threatnet/learning.hpp"

namespace threatnet {

struct Split {
  InstanceSet train;
  InstanceSet test;
  Date boundary{};  // first test day
};

/// Train = instances before the month boundary nearest to
/// first + train_fraction * span; test = the rest. No shuffling.
Split chronological_split(const InstanceSet& instances, double train_fraction);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion confusion;
  bool precision_undefined = false;  // no positive predictions
  bool recall_undefined = false;     // no positive labels
};

Scores score(std::span<const int> predictions, std::span<const int> labels);
double f1_from(const Confusion& c);

/// Monte-Carlo mean F1 of coin-flip predictions with P(1) = positive_prob.
double random_baseline_f1(std::span<const int> labels, double positive_prob,
                          std::size_t trials, std::uint64_t seed);

/// ISO weeks (Monday start) intersecting `span` whose total incident count
/// inside `span` is strictly greater than `min_attacks`.
std::vector<DateRange> high_activity_weeks(std::span<const Incident> incidents,
                                           const DateRange& span, int min_attacks = 5);

enum class EvalMode { all_days, high_activity_weeks };
std::string_view to_string(EvalMode mode);
std::optional<EvalMode> parse_eval_mode(std::string_view text);

struct EvalReport {
  EventType event_type = EventType::malicious_email;
  EvalMode mode = EvalMode::all_days;
  DateRange train_span;
  DateRange test_span;
  std::vector<std::string> features;
  std::string model;
  double threshold = 0.5;
  Scores scores;
  double random_no_prior_f1 = 0.0;
  double random_prior_f1 = 0.0;
  double train_positive_rate = 0.0;
  std::size_t evaluated_days = 0;
  bool empty = false;  // high-activity mode found no qualifying week
};

struct EvalOptions {
  EvalMode mode = EvalMode::all_days;
  int min_attacks = 5;
  std::size_t baseline_trials = 10000;
  std::uint64_t seed = 0;
};

/// Per-day predicted probability and label on the evaluated test days.
struct PlotRow {
  Date date;
  double probability;
  int label;
};

struct Evaluation {
  EvalReport report;
  std::vector<PlotRow> plot;
};

/// Scores `fit` on `split.test` (restricted to high-activity weeks in that
/// mode) and computes both random baselines.
Evaluation evaluate(const ModelFit& fit, const Split& split, std::span<const Incident> incidents,
                    EventType event_type, const EvalOptions& options);

void write_report_text(std::ostream& out, const EvalReport& r);
/// Header and one comma-separated metrics row.
void write_metrics_csv(std::ostream& out, const EvalReport& r);
void write_plot_data(std::ostream& out, std::span<const PlotRow> rows);

}  // namespace threatnet
