#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace hintsteer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Principal axes of a centered data matrix.
//
// `components` is k x d with orthonormal rows, ordered by decreasing
// variance. Each row is sign-normalized so its largest-magnitude entry is
// positive. `explained_variance_ratio[i]` is the share of total variance
// (squared Frobenius norm of the centered data) captured by row i.
struct PcaModel {
  Vector mean;
  Matrix components;
  Vector explained_variance_ratio;
  // Embedding model the PCA was fit against; informational.
  std::string source_model_id;

  Eigen::Index InputDim() const { return mean.size(); }
  Eigen::Index OutputDim() const { return components.rows(); }
};

struct PcaFit {
  PcaModel model;
  // n x k projections of the training rows, computed as U * S.
  Matrix scores;
};

// Thin SVD of the mean-centered data. Requires n >= 2 and
// 1 <= k <= min(n - 1, d); throws when the data rank is below k.
PcaModel FitPca(const Matrix& x, Eigen::Index k);
PcaFit FitPcaWithScores(const Matrix& x, Eigen::Index k);

// (x - mean) * components^T.
Matrix Transform(const PcaModel& model, const Matrix& x);
Vector TransformRow(const PcaModel& model, const Vector& row);

nlohmann::json PcaToJson(const PcaModel& model);
PcaModel PcaFromJson(const nlohmann::json& doc);

}  // namespace hintsteer
