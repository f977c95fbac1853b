#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "hintsteer/error.hpp"
#include "hintsteer/features.hpp"
#include "hintsteer/workload.hpp"

namespace hintsteer {

struct ClassWeights {
  double default_weight = 1.0;
  double alternative_weight = 1.0;

  double For(Label l) const { return l == Label::kAlternative ? alternative_weight : default_weight; }
  friend bool operator==(const ClassWeights&, const ClassWeights&) = default;
};

struct SvmConfig {
  double c = 1.0;
  // nullopt resolves to ComputeGamma on the training features.
  std::optional<double> gamma;
  // nullopt resolves to ComputeClassWeights on the training labels.
  std::optional<ClassWeights> class_weights;
  // Stop once the maximal KKT violation m(a) - M(a) drops below this.
  double tolerance = 1e-3;
  // Iteration budget is max_passes * n SMO steps; 0 means 10 * n passes.
  std::int64_t max_passes = 0;
  std::uint64_t seed = 0;
};

// Trained RBF-kernel SVM. The positive class (+1) is ALTERNATIVE.
struct SvmModel {
  Matrix support_vectors;  // m x k
  Vector dual_coefs;       // alpha_i * y_i
  double bias = 0.0;
  double gamma = 0.0;
  double c = 1.0;
  ClassWeights weights;
  double tolerance = 1e-3;
  std::int64_t max_passes = 0;
  std::uint64_t seed = 0;
  int fold = -1;
  std::string pca_digest;
  std::int64_t iterations = 0;
  double final_violation = 0.0;
  double dual_objective = 0.0;

  Eigen::Index FeatureCount() const { return support_vectors.cols(); }
};

class SvmConvergenceError : public Error {
 public:
  SvmConvergenceError(const std::string& msg, double violation)
      : Error(ErrorKind::kData, msg), violation_(violation) {}
  double violation() const noexcept { return violation_; }

 private:
  double violation_;
};

// 1 / (k * var) with var the population variance pooled over all n*k entries.
double ComputeGamma(const Matrix& x);

// Majority class gets 1.0, minority gets majority_count / minority_count.
ClassWeights ComputeClassWeights(std::span<const Label> labels);

// Weighted soft-margin dual (0 <= a_i <= C * w_{y_i}, sum a_i y_i = 0) solved by
// SMO with maximal-violating-pair working-set selection.
SvmModel FitSvm(const Matrix& x, std::span<const Label> labels, const SvmConfig& config);

double DecisionValue(const SvmModel& model, const Vector& x);
Vector DecisionValues(const SvmModel& model, const Matrix& x);

// ALTERNATIVE iff the decision value is strictly positive.
inline Label LabelFromDecision(double f) { return f > 0.0 ? Label::kAlternative : Label::kDefault; }
Label Predict(const SvmModel& model, const Vector& x);

nlohmann::json SvmToJson(const SvmModel& model);
SvmModel SvmFromJson(const nlohmann::json& doc);

// Embedding -> PCA -> SVM, the unit that is trained per fold and deployed.
struct ModelBundle {
  PcaModel pca;
  SvmModel svm;
};

// Fits PCA on the raw embeddings, then the SVM on the projected rows with
// AUTO gamma / weights resolved on that training set.
ModelBundle TrainBundle(const Matrix& embeddings, std::span<const Label> labels,
                        Eigen::Index n_components, const SvmConfig& config);

double BundleDecision(const ModelBundle& bundle, const Vector& embedding);

}  // namespace hintsteer
