#include "threatnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "threatnet/features.hpp"
#include "threatnet/random.hpp"

namespace threatnet {

Split chronological_split(const InstanceSet& instances, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error("invalid_argument", "train fraction must lie in (0, 1)");
  if (instances.size() == 0) throw Error("invalid_argument", "no instances to split");
  const Date first = instances.dates.front();
  const Date last = instances.dates.back();
  const auto span_days = static_cast<double>((last - first).count() + 1);
  const Date target = first + std::chrono::days{static_cast<int>(std::lround(train_fraction * span_days))};
  const Date lower = first_of_month(target);
  const Date upper = add_months(lower, 1);
  const Date boundary = (target - lower) <= (upper - target) ? lower : upper;

  const auto cut = static_cast<std::size_t>(
      std::lower_bound(instances.dates.begin(), instances.dates.end(), boundary) -
      instances.dates.begin());
  if (cut == 0 || cut == instances.size())
    throw Error("invalid_argument", "chronological split at " + format_date(boundary) +
                                        " leaves the " + (cut == 0 ? "train" : "test") +
                                        " side empty");
  return {instances.slice(0, cut), instances.slice(cut, instances.size()), boundary};
}

double f1_from(const Confusion& c) {
  const double denom = 2.0 * c.tp + c.fp + c.fn;
  return denom > 0 ? 2.0 * c.tp / denom : 0.0;
}

Scores score(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw Error("invalid_argument", "predictions and labels differ in length");
  Scores s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = predictions[i] == 1, y = labels[i] == 1;
    if (p && y) ++s.confusion.tp;
    else if (p) ++s.confusion.fp;
    else if (y) ++s.confusion.fn;
    else ++s.confusion.tn;
  }
  const auto& c = s.confusion;
  s.precision_undefined = c.tp + c.fp == 0;
  s.recall_undefined = c.tp + c.fn == 0;
  s.precision = s.precision_undefined ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fp);
  s.recall = s.recall_undefined ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

double random_baseline_f1(std::span<const int> labels, double positive_prob,
                          std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw Error("invalid_argument", "baseline needs at least one trial");
  Rng rng(seed);
  double total = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    Confusion c;
    for (int y : labels) {
      const bool p = rng.bernoulli(positive_prob);
      if (p && y == 1) ++c.tp;
      else if (p) ++c.fp;
      else if (y == 1) ++c.fn;
    }
    total += f1_from(c);
  }
  return total / static_cast<double>(trials);
}

std::vector<DateRange> high_activity_weeks(std::span<const Incident> incidents,
                                           const DateRange& span, int min_attacks) {
  std::map<Date, long> per_week;
  for (const auto& inc : incidents)
    if (span.contains(inc.occurred_on)) per_week[iso_week_start(inc.occurred_on)] += inc.count;
  std::vector<DateRange> weeks;
  for (const auto& [start, total] : per_week)
    if (total > min_attacks) weeks.push_back({start, start + std::chrono::days{7}});
  return weeks;
}

std::string_view to_string(EvalMode mode) {
  return mode == EvalMode::all_days ? "all_days" : "high_activity_weeks";
}

std::optional<EvalMode> parse_eval_mode(std::string_view text) {
  if (text == "all_days") return EvalMode::all_days;
  if (text == "high_activity_weeks" || text == "high_activity") return EvalMode::high_activity_weeks;
  return std::nullopt;
}

Evaluation evaluate(const ModelFit& fit, const Split& split, std::span<const Incident> incidents,
                    EventType event_type, const EvalOptions& options) {
  Evaluation ev;
  auto& r = ev.report;
  r.event_type = event_type;
  r.mode = options.mode;
  r.features = fit.feature_names;
  r.model = std::string(to_string(fit.kind));
  r.threshold = fit.threshold;
  r.train_span = DateRange::inclusive(split.train.dates.front(), split.train.dates.back());
  r.test_span = DateRange::inclusive(split.test.dates.front(), split.test.dates.back());
  r.train_positive_rate = split.train.positive_rate();

  const auto probs = predict(fit, split.test);
  std::vector<std::size_t> keep;
  if (options.mode == EvalMode::all_days) {
    for (std::size_t i = 0; i < split.test.size(); ++i) keep.push_back(i);
  } else {
    const auto weeks = high_activity_weeks(incidents, r.test_span, options.min_attacks);
    for (std::size_t i = 0; i < split.test.size(); ++i)
      for (const auto& w : weeks)
        if (w.contains(split.test.dates[i])) {
          keep.push_back(i);
          break;
        }
    r.empty = weeks.empty();
  }
  std::vector<int> preds, labels;
  for (std::size_t i : keep) {
    preds.push_back(classify(probs[i], fit.threshold));
    labels.push_back(split.test.labels[i]);
    ev.plot.push_back({split.test.dates[i], probs[i], split.test.labels[i]});
  }
  r.evaluated_days = keep.size();
  r.scores = score(preds, labels);
  if (!labels.empty()) {
    r.random_no_prior_f1 = random_baseline_f1(labels, 0.5, options.baseline_trials, options.seed);
    r.random_prior_f1 =
        random_baseline_f1(labels, r.train_positive_rate, options.baseline_trials, options.seed + 1);
  }
  return ev;
}

void write_report_text(std::ostream& out, const EvalReport& r) {
  const auto& s = r.scores;
  out << "event type:        " << to_string(r.event_type) << '\n'
      << "mode:              " << to_string(r.mode) << (r.empty ? " (no qualifying weeks)" : "")
      << '\n'
      << "model:             " << r.model << '\n'
      << "features:          ";
  for (std::size_t i = 0; i < r.features.size(); ++i) out << (i ? " " : "") << r.features[i];
  out << '\n'
      << "train span:        " << format_date(r.train_span.begin) << " .. "
      << format_date(r.train_span.end - std::chrono::days{1}) << '\n'
      << "test span:         " << format_date(r.test_span.begin) << " .. "
      << format_date(r.test_span.end - std::chrono::days{1}) << '\n'
      << "evaluated days:    " << r.evaluated_days << '\n'
      << "threshold:         " << format_double(r.threshold) << '\n'
      << "precision:         " << format_double(s.precision)
      << (s.precision_undefined ? " (no positive predictions)" : "") << '\n'
      << "recall:            " << format_double(s.recall)
      << (s.recall_undefined ? " (no positive labels)" : "") << '\n'
      << "f1:                " << format_double(s.f1) << '\n'
      << "confusion:         tp=" << s.confusion.tp << " fp=" << s.confusion.fp
      << " tn=" << s.confusion.tn << " fn=" << s.confusion.fn << '\n'
      << "random f1 (p=0.5): " << format_double(r.random_no_prior_f1) << '\n'
      << "random f1 (prior): " << format_double(r.random_prior_f1) << '\n';
}

void write_metrics_csv(std::ostream& out, const EvalReport& r) {
  const auto& s = r.scores;
  out << "event_type,mode,model,features,train_begin,train_end,test_begin,test_end,days,"
         "threshold,precision,recall,f1,tp,fp,tn,fn,random_no_prior_f1,random_prior_f1,"
         "empty\n";
  std::string feats;
  for (std::size_t i = 0; i < r.features.size(); ++i) feats += (i ? "+" : "") + r.features[i];
  out << to_string(r.event_type) << ',' << to_string(r.mode) << ',' << r.model << ',' << feats
      << ',' << format_date(r.train_span.begin) << ','
      << format_date(r.train_span.end - std::chrono::days{1}) << ','
      << format_date(r.test_span.begin) << ','
      << format_date(r.test_span.end - std::chrono::days{1}) << ',' << r.evaluated_days << ','
      << format_double(r.threshold) << ',' << format_double(s.precision) << ','
      << format_double(s.recall) << ',' << format_double(s.f1) << ',' << s.confusion.tp << ','
      << s.confusion.fp << ',' << s.confusion.tn << ',' << s.confusion.fn << ','
      << format_double(r.random_no_prior_f1) << ',' << format_double(r.random_prior_f1) << ','
      << (r.empty ? 1 : 0) << '\n';
}

void write_plot_data(std::ostream& out, std::span<const PlotRow> rows) {
  out << "date,probability,label\n";
  for (const auto& row : rows)
    out << format_date(row.date) << ',' << format_double(row.probability) << ',' << row.label
        << '\n';
}

}  // namespace threatnet
