#include "threatnet/learning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

namespace threatnet {

double InstanceSet::positive_rate() const {
  if (labels.empty()) return 0.0;
  return static_cast<double>(std::count(labels.begin(), labels.end(), 1)) /
         static_cast<double>(labels.size());
}

InstanceSet InstanceSet::slice(std::size_t begin, std::size_t end) const {
  InstanceSet s;
  s.spec = spec;
  s.feature_names = feature_names;
  s.groups = groups;
  s.dates.assign(dates.begin() + begin, dates.begin() + end);
  s.labels.assign(labels.begin() + begin, labels.begin() + end);
  s.x.assign(x.begin() + begin, x.begin() + end);
  return s;
}

InstanceSet make_instances(const FeatureMatrix& matrix, std::span<const Incident> incidents,
                           const LagWindowSpec& spec, std::span<const std::string> feature_subset,
                           const std::optional<DateRange>& label_frame, Diagnostics* diag) {
  if (spec.delta < 1 || spec.eta < 0)
    throw Error("invalid_argument", "lag window needs delta >= 1 and eta >= 0");
  if (feature_subset.empty()) throw Error("invalid_argument", "no features selected");
  InstanceSet out;
  out.spec = spec;
  std::vector<const std::vector<double>*> cols;
  for (const auto& name : feature_subset) {
    cols.push_back(&matrix.column(name));
    out.feature_names.push_back(name);
  }
  for (std::size_t lag = 0; lag < spec.lag_count(); ++lag)
    for (std::size_t j = 0; j < cols.size(); ++j) out.groups.push_back(lag);

  std::map<Date, int> attacks;
  for (const auto& inc : incidents)
    if (inc.count > 0) attacks[inc.occurred_on] += inc.count;

  std::size_t dropped = 0;
  for (Date t : matrix.dates) {
    if (label_frame && !label_frame->contains(t)) continue;
    std::vector<double> x;
    x.reserve(out.groups.size());
    bool complete = true;
    for (int k = spec.delta; k <= spec.delta + spec.eta && complete; ++k) {
      auto row = matrix.row_of(t - std::chrono::days{k});
      if (!row) {
        complete = false;
        break;
      }
      for (const auto* col : cols) x.push_back((*col)[*row]);
    }
    if (!complete) {
      ++dropped;
      continue;
    }
    out.dates.push_back(t);
    out.labels.push_back(attacks.count(t) ? 1 : 0);
    out.x.push_back(std::move(x));
  }
  if (dropped > 0)
    warn(diag, "dropped " + std::to_string(dropped) + " days lacking " +
                   std::to_string(spec.delta + spec.eta) + " days of feature history");
  return out;
}

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::ridge ? "ridge" : "sparse_group_lasso";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) {
  if (text == "ridge") return ModelKind::ridge;
  if (text == "sparse_group_lasso") return ModelKind::sparse_group_lasso;
  return std::nullopt;
}

std::string_view to_string(ThresholdMode mode) {
  switch (mode) {
    case ThresholdMode::fixed: return "fixed";
    case ThresholdMode::f1_tuned: return "f1_tuned";
    case ThresholdMode::prior_matched: return "prior_matched";
  }
  return "fixed";
}

std::optional<ThresholdMode> parse_threshold_mode(std::string_view text) {
  if (text == "fixed") return ThresholdMode::fixed;
  if (text == "f1_tuned") return ThresholdMode::f1_tuned;
  if (text == "prior_matched") return ThresholdMode::prior_matched;
  return std::nullopt;
}

LogisticProblem::LogisticProblem(const InstanceSet& train)
    : y_(train.labels), groups_(train.groups) {
  const std::size_t n = train.size(), d = train.dim();
  if (n == 0) throw Error("invalid_argument", "no training instances");
  mean_.assign(d, 0.0);
  scale_.assign(d, 1.0);
  constant_.assign(d, false);
  for (const auto& row : train.x) {
    if (row.size() != d) throw Error("invalid_argument", "ragged design matrix");
    for (std::size_t j = 0; j < d; ++j) mean_[j] += row[j];
  }
  for (auto& m : mean_) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (const auto& row : train.x)
    for (std::size_t j = 0; j < d; ++j) var[j] += (row[j] - mean_[j]) * (row[j] - mean_[j]);
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    if (sd > 1e-12 * std::max(1.0, std::abs(mean_[j]))) {
      scale_[j] = sd;
    } else {
      constant_[j] = true;
    }
  }
  z_.reserve(n);
  for (const auto& row : train.x) {
    std::vector<double> z(d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
      if (!constant_[j]) z[j] = (row[j] - mean_[j]) / scale_[j];
    z_.push_back(std::move(z));
  }
}

namespace {

// log(1 + e^s) without overflow.
double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

double linear_score(std::span<const double> w, const std::vector<double>& z) {
  double s = w[0];
  for (std::size_t j = 0; j < z.size(); ++j) s += w[j + 1] * z[j];
  return s;
}

}  // namespace

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

double LogisticProblem::smooth_value(std::span<const double> w, double ridge) const {
  double f = 0.0;
  for (std::size_t i = 0; i < z_.size(); ++i) {
    const double s = linear_score(w, z_[i]);
    f += softplus(s) - (y_[i] ? s : 0.0);
  }
  double sq = 0.0;
  for (std::size_t j = 1; j < w.size(); ++j) sq += w[j] * w[j];
  return f + ridge * sq;
}

std::vector<double> LogisticProblem::smooth_gradient(std::span<const double> w,
                                                     double ridge) const {
  std::vector<double> grad(w.size(), 0.0);
  for (std::size_t i = 0; i < z_.size(); ++i) {
    const double r = sigmoid(linear_score(w, z_[i])) - y_[i];
    grad[0] += r;
    for (std::size_t j = 0; j < z_[i].size(); ++j) grad[j + 1] += r * z_[i][j];
  }
  for (std::size_t j = 1; j < w.size(); ++j) grad[j] += 2.0 * ridge * w[j];
  return grad;
}

double LogisticProblem::penalty(std::span<const double> w, double l, double g) const {
  double l1 = 0.0;
  std::map<std::size_t, double> group_sq;
  for (std::size_t j = 1; j < w.size(); ++j) {
    l1 += std::abs(w[j]);
    group_sq[groups_[j - 1]] += w[j] * w[j];
  }
  double gl = 0.0;
  for (const auto& [grp, sq] : group_sq) gl += std::sqrt(sq);
  return l * l1 + g * gl;
}

std::vector<double> LogisticProblem::prox(std::span<const double> v, double step, double l,
                                          double g) const {
  std::vector<double> out(v.begin(), v.end());
  const double t1 = step * l;
  for (std::size_t j = 1; j < out.size(); ++j) {
    if (constant_[j - 1]) {
      out[j] = 0.0;
      continue;
    }
    const double a = std::abs(out[j]) - t1;
    out[j] = a > 0 ? std::copysign(a, out[j]) : 0.0;
  }
  if (g > 0.0) {
    std::map<std::size_t, double> group_sq;
    for (std::size_t j = 1; j < out.size(); ++j) group_sq[groups_[j - 1]] += out[j] * out[j];
    const double t2 = step * g;
    for (std::size_t j = 1; j < out.size(); ++j) {
      const double norm = std::sqrt(group_sq[groups_[j - 1]]);
      out[j] = norm > t2 ? out[j] * (1.0 - t2 / norm) : 0.0;
    }
  }
  return out;
}

namespace {

struct SolveResult {
  std::vector<double> w;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

SolveResult proximal_gradient(const LogisticProblem& prob, double ridge, double l, double g,
                              const SolverOptions& opt) {
  const auto& y = prob.y();
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  if (pos == 0.0 || pos == static_cast<double>(y.size()))
    throw Error("invalid_argument", "training data must contain both classes");
  const double rate = pos / static_cast<double>(y.size());

  SolveResult r;
  r.w.assign(prob.dim() + 1, 0.0);
  r.w[0] = std::log(rate / (1.0 - rate));
  double f = prob.smooth_value(r.w, ridge);
  r.objective = f + prob.penalty(r.w, l, g);
  if (opt.record_trace) r.trace.push_back(r.objective);

  double step = 1.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    r.iterations = it;
    const auto grad = prob.smooth_gradient(r.w, ridge);
    // Backtracking by halving; each search starts from twice the last
    // accepted step, capped at 1.
    double s = std::min(1.0, 2.0 * step);
    std::vector<double> cand;
    double f_cand = 0.0;
    while (true) {
      std::vector<double> v(r.w.size());
      for (std::size_t j = 0; j < v.size(); ++j) v[j] = r.w[j] - s * grad[j];
      cand = prob.prox(v, s, l, g);
      f_cand = prob.smooth_value(cand, ridge);
      double lin = 0.0, sq = 0.0;
      for (std::size_t j = 0; j < cand.size(); ++j) {
        const double dlt = cand[j] - r.w[j];
        lin += grad[j] * dlt;
        sq += dlt * dlt;
      }
      if (f_cand <= f + lin + sq / (2.0 * s) + 1e-12 * std::abs(f)) break;
      s *= 0.5;
      if (s < 1e-30) break;
    }
    const double obj = f_cand + prob.penalty(cand, l, g);
    if (!std::isfinite(obj)) throw Error("divergence", "objective became non-finite");
    const double change = std::abs(r.objective - obj);
    const bool stalled = obj > r.objective;  // rounding-level increase: stop at current point
    if (!stalled) {
      r.w = std::move(cand);
      f = f_cand;
      r.objective = obj;
      step = s;
    }
    if (opt.record_trace) r.trace.push_back(r.objective);
    if (stalled || change <= opt.tol * std::max(1.0, std::abs(r.objective))) {
      r.converged = true;
      break;
    }
  }
  return r;
}

ModelFit make_fit(const InstanceSet& train, const LogisticProblem& prob, SolveResult r) {
  ModelFit fit;
  fit.spec = train.spec;
  fit.feature_names = train.feature_names;
  fit.groups = train.groups;
  fit.beta0 = r.w[0];
  fit.beta.assign(r.w.begin() + 1, r.w.end());
  fit.mean = prob.mean();
  fit.scale = prob.scale();
  fit.constant = prob.constant();
  fit.converged = r.converged;
  fit.final_objective = r.objective;
  fit.iterations = r.iterations;
  fit.objective_trace = std::move(r.trace);
  return fit;
}

}  // namespace

ModelFit fit_ridge_logistic(const InstanceSet& train, const RidgeParams& params,
                            const SolverOptions& options) {
  if (params.lambda < 0) throw Error("invalid_argument", "lambda must be >= 0");
  LogisticProblem prob(train);
  auto fit = make_fit(train, prob, proximal_gradient(prob, params.lambda, 0.0, 0.0, options));
  fit.kind = ModelKind::ridge;
  fit.ridge = params;
  return fit;
}

ModelFit fit_sparse_group_lasso(const InstanceSet& train, const SparseGroupParams& params,
                                const SolverOptions& options) {
  if (params.m < 0 || params.l < 0 || params.g < 0)
    throw Error("invalid_argument", "m, l and g must be >= 0");
  LogisticProblem prob(train);
  auto fit = make_fit(train, prob,
                      proximal_gradient(prob, params.m / 2.0, params.l, params.g, options));
  fit.kind = ModelKind::sparse_group_lasso;
  fit.sparse_group = params;
  return fit;
}

double predict(const ModelFit& fit, std::span<const double> x) {
  if (x.size() != fit.beta.size())
    throw Error("invalid_argument", "instance has " + std::to_string(x.size()) +
                                        " coordinates, model expects " +
                                        std::to_string(fit.beta.size()));
  double s = fit.beta0;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (!fit.constant[j]) s += fit.beta[j] * (x[j] - fit.mean[j]) / fit.scale[j];
  return sigmoid(s);
}

std::vector<double> predict(const ModelFit& fit, const InstanceSet& instances) {
  std::vector<double> p;
  p.reserve(instances.size());
  for (const auto& row : instances.x) p.push_back(predict(fit, row));
  return p;
}

int classify(double probability, double threshold) { return probability >= threshold ? 1 : 0; }

double choose_threshold(ThresholdMode mode, double fixed_value,
                        std::span<const double> probs, std::span<const int> labels) {
  if (mode == ThresholdMode::fixed || probs.empty()) return fixed_value;
  std::vector<double> sorted(probs.begin(), probs.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (mode == ThresholdMode::prior_matched) {
    if (positives == 0) return std::nextafter(sorted.front(), 2.0);
    return sorted[positives - 1];
  }
  // f1_tuned: scan candidate thresholds from high to low.
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  double best_f1 = -1.0, best = fixed_value;
  std::size_t tp = 0, flagged = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    tp += labels[order[i]] == 1;
    ++flagged;
    if (i + 1 < order.size() && probs[order[i + 1]] == probs[order[i]]) continue;
    const double f1 = positives ? 2.0 * tp / static_cast<double>(flagged + positives) : 0.0;
    if (f1 > best_f1) {
      best_f1 = f1;
      best = probs[order[i]];
    }
  }
  return best;
}

namespace {

nlohmann::json to_json(const ModelFit& f) {
  nlohmann::json hp;
  if (f.kind == ModelKind::ridge)
    hp = {{"lambda", f.ridge.lambda}};
  else
    hp = {{"m", f.sparse_group.m}, {"l", f.sparse_group.l}, {"g", f.sparse_group.g}};
  return {{"model", to_string(f.kind)},
          {"hyperparameters", hp},
          {"delta", f.spec.delta},
          {"eta", f.spec.eta},
          {"features", f.feature_names},
          {"groups", f.groups},
          {"intercept", f.beta0},
          {"coefficients", f.beta},
          {"standardization", {{"mean", f.mean}, {"scale", f.scale}, {"constant", f.constant}}},
          {"converged", f.converged},
          {"final_objective", f.final_objective},
          {"iterations", f.iterations},
          {"threshold_mode", to_string(f.threshold_mode)},
          {"threshold", f.threshold}};
}

}  // namespace

void write_model(std::ostream& out, const ModelFit& fit) { out << to_json(fit).dump(2) << '\n'; }

ModelFit read_model(std::istream& in) {
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error("malformed_input", "model file is not valid JSON");
  ModelFit f;
  try {
    auto kind = parse_model_kind(j.at("model").get<std::string>());
    if (!kind) throw std::runtime_error("unknown model kind");
    f.kind = *kind;
    const auto& hp = j.at("hyperparameters");
    if (f.kind == ModelKind::ridge) {
      f.ridge.lambda = hp.at("lambda").get<double>();
    } else {
      f.sparse_group = {hp.at("m").get<double>(), hp.at("l").get<double>(), hp.at("g").get<double>()};
    }
    f.spec = {j.at("delta").get<int>(), j.at("eta").get<int>()};
    f.feature_names = j.at("features").get<std::vector<std::string>>();
    f.groups = j.at("groups").get<std::vector<std::size_t>>();
    f.beta0 = j.at("intercept").get<double>();
    f.beta = j.at("coefficients").get<std::vector<double>>();
    const auto& st = j.at("standardization");
    f.mean = st.at("mean").get<std::vector<double>>();
    f.scale = st.at("scale").get<std::vector<double>>();
    f.constant = st.at("constant").get<std::vector<bool>>();
    f.converged = j.at("converged").get<bool>();
    f.final_objective = j.at("final_objective").get<double>();
    f.iterations = j.at("iterations").get<int>();
    auto mode = parse_threshold_mode(j.at("threshold_mode").get<std::string>());
    if (!mode) throw std::runtime_error("unknown threshold mode");
    f.threshold_mode = *mode;
    f.threshold = j.at("threshold").get<double>();
  } catch (const std::exception& e) {
    throw Error("malformed_input", std::string("bad model file: ") + e.what());
  }
  const std::size_t d = f.beta.size();
  if (f.mean.size() != d || f.scale.size() != d || f.constant.size() != d || f.groups.size() != d)
    throw Error("malformed_input", "model vectors have inconsistent lengths");
  return f;
}

void write_model(const std::filesystem::path& path, const ModelFit& fit) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write file: " + path.string());
  write_model(out, fit);
}

ModelFit read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot read file: " + path.string());
  return read_model(in);
}

}  // namespace threatnet
