#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "threatnet/features.hpp"
#include "threatnet/ingestion.hpp"

namespace threatnet {

/// Features for day t come from days t-(eta+delta) ... t-delta.
struct LagWindowSpec {
  int delta = 7;
  int eta = 8;

  std::size_t lag_count() const { return static_cast<std::size_t>(eta) + 1; }
};

/// Lagged design matrix. Coordinates are ordered lag-major: for lag
/// delta, delta+1, ..., delta+eta, every selected feature in order.
struct InstanceSet {
  LagWindowSpec spec;
  std::vector<std::string> feature_names;
  std::vector<std::size_t> groups;  // lag offset (0..eta) per coordinate
  std::vector<Date> dates;
  std::vector<int> labels;
  std::vector<std::vector<double>> x;

  std::size_t size() const { return dates.size(); }
  std::size_t dim() const { return groups.size(); }
  double positive_rate() const;
  InstanceSet slice(std::size_t begin, std::size_t end) const;
};

/// One instance per matrix date t (inside `label_frame` when given) whose
/// full lag window lies in the matrix. Label is 1 iff an incident occurred
/// on t. Days lacking history are dropped with a warning.
InstanceSet make_instances(const FeatureMatrix& matrix, std::span<const Incident> incidents,
                           const LagWindowSpec& spec, std::span<const std::string> feature_subset,
                           const std::optional<DateRange>& label_frame = std::nullopt,
                           Diagnostics* diag = nullptr);

enum class ModelKind { ridge, sparse_group_lasso };
std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view text);

enum class ThresholdMode { fixed, f1_tuned, prior_matched };
std::string_view to_string(ThresholdMode mode);
std::optional<ThresholdMode> parse_threshold_mode(std::string_view text);

struct RidgeParams {
  double lambda = 1.0;
};

struct SparseGroupParams {
  double m = 0.3;  // ridge weight, penalty (m/2)|b|^2
  double l = 0.3;  // lasso weight
  double g = 0.1;  // group-lasso weight (groups = lags)
};

struct SolverOptions {
  double tol = 1e-6;
  int max_iter = 10000;
  bool record_trace = false;
};

struct ModelFit {
  ModelKind kind = ModelKind::ridge;
  RidgeParams ridge;
  SparseGroupParams sparse_group;
  LagWindowSpec spec;
  std::vector<std::string> feature_names;
  std::vector<std::size_t> groups;

  double beta0 = 0.0;
  std::vector<double> beta;  // in standardized units
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<bool> constant;  // zero-variance coordinates, coefficient fixed at 0

  bool converged = false;
  double final_objective = 0.0;
  int iterations = 0;
  std::vector<double> objective_trace;  // only with record_trace; not serialized

  ThresholdMode threshold_mode = ThresholdMode::fixed;
  double threshold = 0.5;
};

/// Standardized logistic problem. Parameters are packed as
/// w = [intercept, beta_1, ..., beta_d].
class LogisticProblem {
 public:
  explicit LogisticProblem(const InstanceSet& train);

  std::size_t dim() const { return mean_.size(); }
  std::size_t rows() const { return y_.size(); }

  /// Negative log-likelihood plus ridge * |beta|^2 (intercept excluded).
  double smooth_value(std::span<const double> w, double ridge) const;
  std::vector<double> smooth_gradient(std::span<const double> w, double ridge) const;
  /// l * |beta|_1 + g * sum over groups of |beta_group|_2.
  double penalty(std::span<const double> w, double l, double g) const;
  /// prox of step * penalty, applied to v; intercept untouched and
  /// constant coordinates forced to 0.
  std::vector<double> prox(std::span<const double> v, double step, double l, double g) const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }
  const std::vector<bool>& constant() const { return constant_; }
  const std::vector<std::size_t>& groups() const { return groups_; }
  const std::vector<std::vector<double>>& z() const { return z_; }
  const std::vector<int>& y() const { return y_; }

 private:
  std::vector<std::vector<double>> z_;
  std::vector<int> y_;
  std::vector<std::size_t> groups_;
  std::vector<double> mean_, scale_;
  std::vector<bool> constant_;
};

/// Minimizes NLL + lambda |beta|^2 by gradient descent with backtracking.
ModelFit fit_ridge_logistic(const InstanceSet& train, const RidgeParams& params = {},
                            const SolverOptions& options = {});

/// Minimizes NLL + (m/2)|beta|^2 + l|beta|_1 + g sum_lag |beta_lag|_2 by
/// proximal gradient with backtracking.
ModelFit fit_sparse_group_lasso(const InstanceSet& train, const SparseGroupParams& params = {},
                                const SolverOptions& options = {});

double sigmoid(double s);

/// P(attack) for one raw (unstandardized) feature vector.
double predict(const ModelFit& fit, std::span<const double> x);
std::vector<double> predict(const ModelFit& fit, const InstanceSet& instances);

int classify(double probability, double threshold = 0.5);

/// Decision threshold from training predictions: `fixed` returns
/// `fixed_value`; `f1_tuned` maximizes training F1; `prior_matched` flags the
/// same fraction of training days as the training positive rate.
double choose_threshold(ThresholdMode mode, double fixed_value,
                        std::span<const double> train_probabilities,
                        std::span<const int> train_labels);

void write_model(std::ostream& out, const ModelFit& fit);
ModelFit read_model(std::istream& in);
void write_model(const std::filesystem::path& path, const ModelFit& fit);
ModelFit read_model(const std::filesystem::path& path);

}  // namespace threatnet
