#include "hintsteer/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "hintsteer/error.hpp"

namespace hintsteer {

PcaFit FitPcaWithScores(const Matrix& x, Eigen::Index k) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) throw DataError("PCA needs at least 2 samples, got " + std::to_string(n));
  if (k < 1 || k > std::min(n - 1, d)) {
    throw DataError("PCA component count " + std::to_string(k) + " outside [1, " +
                    std::to_string(std::min(n - 1, d)) + "] for " + std::to_string(n) + "x" +
                    std::to_string(d) + " data");
  }
  if (!x.allFinite()) throw DataError("PCA input contains non-finite values");

  PcaFit fit;
  fit.model.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - fit.model.mean.transpose();

  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double s_max = s.size() > 0 ? s(0) : 0.0;
  const double threshold =
      s_max * static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) rank += (s(i) > threshold) ? 1 : 0;
  if (rank < k) {
    throw DataError("PCA requested " + std::to_string(k) + " components but the centered data has rank " +
                    std::to_string(rank));
  }

  const double total = s.squaredNorm();
  fit.model.components = svd.matrixV().leftCols(k).transpose();
  fit.scores = svd.matrixU().leftCols(k) * s.head(k).asDiagonal();
  fit.model.explained_variance_ratio = s.head(k).array().square() / total;

  for (Eigen::Index r = 0; r < k; ++r) {
    Eigen::Index arg = 0;
    fit.model.components.row(r).cwiseAbs().maxCoeff(&arg);
    if (fit.model.components(r, arg) < 0.0) {
      fit.model.components.row(r) *= -1.0;
      fit.scores.col(r) *= -1.0;
    }
  }
  return fit;
}

PcaModel FitPca(const Matrix& x, Eigen::Index k) { return FitPcaWithScores(x, k).model; }

Matrix Transform(const PcaModel& model, const Matrix& x) {
  if (x.cols() != model.InputDim()) {
    throw DataError("PCA transform expects " + std::to_string(model.InputDim()) +
                    " columns, got " + std::to_string(x.cols()));
  }
  return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Vector TransformRow(const PcaModel& model, const Vector& row) {
  if (row.size() != model.InputDim()) {
    throw DataError("PCA transform expects dimension " + std::to_string(model.InputDim()) +
                    ", got " + std::to_string(row.size()));
  }
  return model.components * (row - model.mean);
}

nlohmann::json PcaToJson(const PcaModel& model) {
  std::vector<double> components(static_cast<std::size_t>(model.components.size()));
  for (Eigen::Index r = 0; r < model.components.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.components.cols(); ++c) {
      components[static_cast<std::size_t>(r * model.components.cols() + c)] = model.components(r, c);
    }
  }
  return {
      {"format", "hintsteer.pca"},
      {"version", 1},
      {"source_model_id", model.source_model_id},
      {"input_dim", model.InputDim()},
      {"n_components", model.OutputDim()},
      {"mean", std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size())},
      {"components", components},
      {"explained_variance_ratio",
       std::vector<double>(model.explained_variance_ratio.data(),
                           model.explained_variance_ratio.data() +
                               model.explained_variance_ratio.size())},
  };
}

PcaModel PcaFromJson(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "hintsteer.pca" || doc.at("version") != 1) {
      throw DataError("not a version-1 PCA model file");
    }
    PcaModel m;
    m.source_model_id = doc.at("source_model_id").get<std::string>();
    const auto d = doc.at("input_dim").get<Eigen::Index>();
    const auto k = doc.at("n_components").get<Eigen::Index>();
    const auto mean = doc.at("mean").get<std::vector<double>>();
    const auto comps = doc.at("components").get<std::vector<double>>();
    const auto ratio = doc.at("explained_variance_ratio").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(mean.size()) != d ||
        static_cast<Eigen::Index>(comps.size()) != k * d ||
        static_cast<Eigen::Index>(ratio.size()) != k) {
      throw DataError("PCA model file has inconsistent array lengths");
    }
    m.mean = Eigen::Map<const Vector>(mean.data(), d);
    m.components = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>(comps.data(), k, d);
    m.explained_variance_ratio = Eigen::Map<const Vector>(ratio.data(), k);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed PCA model file: ") + e.what());
  }
}

}  // namespace hintsteer
