#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "threatnet/evaluation.hpp"

using namespace threatnet;

namespace {

InstanceSet daily(const std::string& first, const std::string& last) {
  InstanceSet s;
  s.groups = {0};
  s.feature_names = {"a"};
  for (Date d = parse_date(first); d <= parse_date(last); d += std::chrono::days{1}) {
    s.dates.push_back(d);
    s.labels.push_back(0);
    s.x.push_back({0.0});
  }
  return s;
}

double binomial_pmf(int n, int k, double p) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                  (n - k) * std::log1p(-p));
}

}  // namespace

TEST_CASE("chronological split examples") {
  const auto ten = daily("2017-01-01", "2017-10-31");
  const auto s = chronological_split(ten, 0.7);
  CHECK(s.boundary == parse_date("2017-08-01"));
  CHECK(s.train.dates.back() == parse_date("2017-07-31"));
  CHECK(s.test.dates.front() == parse_date("2017-08-01"));
  CHECK(s.train.size() + s.test.size() == ten.size());

  CHECK_THROWS_AS(chronological_split(daily("2017-01-01", "2017-03-31"), 0.999), Error);
  CHECK_THROWS_AS(chronological_split(ten, 1.0), Error);
  CHECK_THROWS_AS(chronological_split(ten, 0.0), Error);
  CHECK_THROWS_AS(chronological_split(InstanceSet{}, 0.5), Error);

  // boundaries are month starts and every train date precedes every test date
  for (double f : {0.2, 0.35, 0.5, 0.62, 0.8}) {
    const auto sp = chronological_split(daily("2016-03-17", "2017-09-02"), f);
    CHECK(sp.boundary == first_of_month(sp.boundary));
    CHECK(sp.train.dates.back() < sp.test.dates.front());
  }
}

TEST_CASE("score examples") {
  const std::vector<int> pred = {1, 1, 1, 1, 0, 0}, lab = {1, 1, 0, 0, 1, 0};
  const auto s = score(pred, lab);
  CHECK(s.confusion == Confusion{2, 2, 1, 1});
  CHECK(s.precision == 0.5);
  CHECK(s.recall == doctest::Approx(2.0 / 3));
  CHECK(s.f1 == doctest::Approx(4.0 / 7));
  CHECK(f1_from(s.confusion) == doctest::Approx(4.0 / 7));

  const auto none = score(std::vector<int>{0, 0}, std::vector<int>{0, 1});
  CHECK(none.precision_undefined);
  CHECK(none.f1 == 0.0);
  CHECK(score(std::vector<int>{1}, std::vector<int>{0}).recall_undefined);
  CHECK_THROWS_AS(score(std::vector<int>{1}, std::vector<int>{}), Error);
}

TEST_CASE("random baseline agrees with the analytic expectation") {
  // All labels positive: precision is 1 whenever anything is flagged, so
  // F1 = 2K / (K + n) with K ~ Binomial(n, p).
  const int n = 20;
  const std::vector<int> labels(n, 1);
  for (double p : {0.5, 0.3}) {
    double exact = 0;
    for (int k = 1; k <= n; ++k) exact += binomial_pmf(n, k, p) * 2.0 * k / (k + n);
    CHECK(std::abs(random_baseline_f1(labels, p, 20000, 4) - exact) < 0.01);
  }
  CHECK(random_baseline_f1(std::vector<int>(4000, 1), 0.5, 200, 1) == doctest::Approx(2.0 / 3).epsilon(0.01));
  CHECK(random_baseline_f1(labels, 0.5, 100, 9) == random_baseline_f1(labels, 0.5, 100, 9));
  CHECK_THROWS_AS(random_baseline_f1(labels, 0.5, 0, 1), Error);
}

TEST_CASE("high-activity weeks") {
  const DateRange span{parse_date("2017-07-01"), parse_date("2017-08-01")};
  const std::vector<Incident> inc = {
      {EventType::malicious_email, parse_date("2017-07-03"), 4},  // Monday
      {EventType::malicious_email, parse_date("2017-07-09"), 2},  // same week: 6
      {EventType::malicious_email, parse_date("2017-07-11"), 5},  // next week: 5
      {EventType::malicious_email, parse_date("2017-09-01"), 50},  // outside span
  };
  const auto weeks = high_activity_weeks(inc, span, 5);
  REQUIRE(weeks.size() == 1);
  CHECK(weeks[0] == DateRange{parse_date("2017-07-03"), parse_date("2017-07-10")});
  CHECK(high_activity_weeks(inc, span, 6).empty());
  CHECK(high_activity_weeks(inc, span, 4).size() == 2);
}

TEST_CASE("evaluate on a tiny fit") {
  auto all = daily("2017-01-01", "2017-10-31");
  std::mt19937 rng(3);
  for (std::size_t i = 0; i < all.size(); ++i) {
    all.labels[i] = rng() % 3 == 0;
    all.x[i][0] = all.labels[i] + 0.1 * (rng() % 10);
  }
  const auto split = chronological_split(all, 0.7);
  ModelFit fit = fit_ridge_logistic(split.train);
  const EvalOptions opt{EvalMode::all_days, 5, 1000, 0};
  const auto ev = evaluate(fit, split, {}, EventType::malicious_email, opt);
  CHECK(ev.report.evaluated_days == split.test.size());
  CHECK(ev.report.scores.f1 >= 0.9);
  CHECK(ev.plot.size() == split.test.size());
  CHECK(ev.report.random_prior_f1 > 0.0);

  EvalOptions high = opt;
  high.mode = EvalMode::high_activity_weeks;
  const auto none = evaluate(fit, split, {}, EventType::malicious_email, high);
  CHECK(none.report.empty);
  CHECK(none.report.evaluated_days == 0);

  std::ostringstream txt, csv, plot;
  write_report_text(txt, ev.report);
  write_metrics_csv(csv, ev.report);
  write_plot_data(plot, ev.plot);
  CHECK(txt.str().find("f1:                ") != std::string::npos);
  CHECK(csv.str().rfind("event_type,mode,", 0) == 0);
  CHECK(plot.str().rfind("date,probability,label\n2017-08-01,", 0) == 0);
}

TEST_CASE("scores are invariant under a common permutation of days") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> p(30), y(30);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = rng() % 2, y[i] = rng() % 2;
    const auto a = score(p, y);
    std::vector<std::size_t> order(30);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> pp, yy;
    for (auto i : order) pp.push_back(p[i]), yy.push_back(y[i]);
    const auto b = score(pp, yy);
    CHECK(a.confusion == b.confusion);
    CHECK(a.f1 == b.f1);
  }
}
