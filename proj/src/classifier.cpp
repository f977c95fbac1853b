#include "hintsteer/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <list>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace hintsteer {

namespace {

std::string FormatViolation(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

constexpr double kTau = 1e-12;
// Kernel rows kept resident during SMO.
constexpr std::size_t kKernelCacheBytes = std::size_t{512} << 20;

// Lazily computed rows of the RBF Gram matrix with LRU eviction.
class KernelRows {
 public:
  KernelRows(const Matrix& x, double gamma) : x_(x), gamma_(gamma) {
    const auto n = static_cast<std::size_t>(x.rows());
    capacity_ = std::max<std::size_t>(2, kKernelCacheBytes / (sizeof(double) * std::max<std::size_t>(n, 1)));
  }

  const std::vector<double>& Row(Eigen::Index i) {
    auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    std::vector<double> row(static_cast<std::size_t>(x_.rows()));
    for (Eigen::Index j = 0; j < x_.rows(); ++j) {
      row[static_cast<std::size_t>(j)] = std::exp(-gamma_ * (x_.row(i) - x_.row(j)).squaredNorm());
    }
    lru_.emplace_front(i, std::move(row));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  const Matrix& x_;
  double gamma_;
  std::size_t capacity_;
  std::list<std::pair<Eigen::Index, std::vector<double>>> lru_;
  std::unordered_map<Eigen::Index, decltype(lru_)::iterator> index_;
};

}  // namespace

double ComputeGamma(const Matrix& x) {
  if (x.rows() < 2 || x.cols() < 1) {
    throw DataError("gamma needs at least 2 samples and 1 feature");
  }
  const double n = static_cast<double>(x.size());
  const double mean = x.sum() / n;
  const double var = (x.array() - mean).square().sum() / n;
  if (!(var > 0.0) || !std::isfinite(var)) {
    throw DataError("features have zero variance; cannot derive the RBF kernel coefficient");
  }
  return 1.0 / (static_cast<double>(x.cols()) * var);
}

ClassWeights ComputeClassWeights(std::span<const Label> labels) {
  const auto alt = static_cast<double>(std::count(labels.begin(), labels.end(), Label::kAlternative));
  const auto def = static_cast<double>(labels.size()) - alt;
  if (alt == 0.0 || def == 0.0) throw DataError("class weights need both classes present");
  ClassWeights w;
  if (def >= alt) {
    w.alternative_weight = def / alt;
  } else {
    w.default_weight = alt / def;
  }
  return w;
}

SvmModel FitSvm(const Matrix& x, std::span<const Label> labels, const SvmConfig& config) {
  const Eigen::Index n = x.rows();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw DataError("SVM got " + std::to_string(n) + " rows but " + std::to_string(labels.size()) +
                    " labels");
  }
  if (n < 2) throw DataError("SVM needs at least 2 samples");
  if (!(config.c > 0.0)) throw ConfigError("SVM C must be positive");
  if (!(config.tolerance > 0.0)) throw ConfigError("SVM tolerance must be positive");
  if (!x.allFinite()) throw DataError("SVM features contain non-finite values");

  SvmModel model;
  model.c = config.c;
  model.gamma = config.gamma ? *config.gamma : ComputeGamma(x);
  if (!(model.gamma > 0.0)) throw ConfigError("SVM gamma must be positive");
  if (std::count(labels.begin(), labels.end(), Label::kAlternative) == 0 ||
      std::count(labels.begin(), labels.end(), Label::kDefault) == 0) {
    throw DataError("SVM training needs both classes present");
  }
  model.weights = config.class_weights ? *config.class_weights : ComputeClassWeights(labels);
  if (!(model.weights.default_weight > 0.0) || !(model.weights.alternative_weight > 0.0)) {
    throw ConfigError("class weights must be positive");
  }
  model.tolerance = config.tolerance;
  model.seed = config.seed;
  // Tiny problems solved to tight tolerances need more than 10n passes.
  model.max_passes = config.max_passes > 0 ? config.max_passes
                                           : std::max<std::int64_t>(10 * static_cast<std::int64_t>(n), 1000);

  std::vector<double> y(static_cast<std::size_t>(n));
  std::vector<double> upper(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto l = labels[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(i)] = l == Label::kAlternative ? 1.0 : -1.0;
    upper[static_cast<std::size_t>(i)] = config.c * model.weights.For(l);
  }

  KernelRows kernel(x, model.gamma);
  const auto N = static_cast<std::size_t>(n);
  std::vector<double> alpha(N, 0.0);
  std::vector<double> grad(N, -1.0);  // gradient of 1/2 a'Qa - e'a

  auto in_up = [&](std::size_t t) {
    return (y[t] > 0 && alpha[t] < upper[t]) || (y[t] < 0 && alpha[t] > 0);
  };
  auto in_low = [&](std::size_t t) {
    return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < upper[t]);
  };

  const std::int64_t max_iter = model.max_passes * static_cast<std::int64_t>(n);
  std::int64_t iter = 0;
  double violation = std::numeric_limits<double>::infinity();
  for (;; ++iter) {
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    std::size_t i = N;
    std::size_t j = N;
    for (std::size_t t = 0; t < N; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    violation = (i == N || j == N) ? 0.0 : g_max - g_min;
    if (violation < config.tolerance) break;
    if (iter >= max_iter) {
      throw SvmConvergenceError("SMO did not converge within " + std::to_string(max_iter) +
                                    " iterations; final KKT violation " + FormatViolation(violation),
                                violation);
    }

    const auto& ki = kernel.Row(static_cast<Eigen::Index>(i));
    const double kii = ki[i];
    const double kij = ki[j];
    const auto& kj = kernel.Row(static_cast<Eigen::Index>(j));
    const double kjj = kj[j];
    const double ci = upper[i];
    const double cj = upper[j];
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];

    double quad = kii + kjj - 2.0 * kij;
    if (quad <= 0.0) quad = kTau;

    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > ci - cj) {
        if (alpha[i] > ci) {
          alpha[i] = ci;
          alpha[j] = ci - diff;
        }
      } else if (alpha[j] > cj) {
        alpha[j] = cj;
        alpha[i] = cj + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > ci) {
        if (alpha[i] > ci) {
          alpha[i] = ci;
          alpha[j] = sum - ci;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > cj) {
        if (alpha[j] > cj) {
          alpha[j] = cj;
          alpha[i] = sum - cj;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    // Rows may have been evicted by the second lookup; fetch again.
    const auto& ri = kernel.Row(static_cast<Eigen::Index>(i));
    for (std::size_t t = 0; t < N; ++t) grad[t] += y[t] * y[i] * ri[t] * dai;
    const auto& rj = kernel.Row(static_cast<Eigen::Index>(j));
    for (std::size_t t = 0; t < N; ++t) grad[t] += y[t] * y[j] * rj[t] * daj;
  }

  // Offset from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (std::size_t t = 0; t < N; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= upper[t]) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      sum_free += yg;
      ++n_free;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  model.bias = -rho;
  model.iterations = iter;
  model.final_violation = violation;

  // Dual objective: sum a - 1/2 a'Qa = -1/2 sum a_t (grad_t - 1).
  double objective = 0.0;
  for (std::size_t t = 0; t < N; ++t) objective += alpha[t] * (grad[t] - 1.0);
  model.dual_objective = -0.5 * objective;

  std::vector<Eigen::Index> sv;
  for (std::size_t t = 0; t < N; ++t) {
    if (alpha[t] > 0.0) sv.push_back(static_cast<Eigen::Index>(t));
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  model.dual_coefs.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = x.row(sv[s]);
    model.dual_coefs(static_cast<Eigen::Index>(s)) =
        alpha[static_cast<std::size_t>(sv[s])] * y[static_cast<std::size_t>(sv[s])];
  }
  return model;
}

double DecisionValue(const SvmModel& model, const Vector& x) {
  if (x.size() != model.FeatureCount()) {
    throw DataError("SVM expects " + std::to_string(model.FeatureCount()) + " features, got " +
                    std::to_string(x.size()));
  }
  double f = model.bias;
  for (Eigen::Index s = 0; s < model.support_vectors.rows(); ++s) {
    const double d2 = (model.support_vectors.row(s).transpose() - x).squaredNorm();
    f += model.dual_coefs(s) * std::exp(-model.gamma * d2);
  }
  return f;
}

Vector DecisionValues(const SvmModel& model, const Matrix& x) {
  if (x.cols() != model.FeatureCount()) {
    throw DataError("SVM expects " + std::to_string(model.FeatureCount()) + " features, got " +
                    std::to_string(x.cols()));
  }
  Vector out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out(r) = DecisionValue(model, x.row(r).transpose());
  return out;
}

Label Predict(const SvmModel& model, const Vector& x) {
  return LabelFromDecision(DecisionValue(model, x));
}

nlohmann::json SvmToJson(const SvmModel& model) {
  const auto m = model.support_vectors.rows();
  const auto k = model.support_vectors.cols();
  std::vector<double> sv(static_cast<std::size_t>(m * k));
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) sv[static_cast<std::size_t>(r * k + c)] = model.support_vectors(r, c);
  }
  return {
      {"format", "hintsteer.svm"},
      {"version", 1},
      {"kernel", "rbf"},
      {"positive_class", "ALTERNATIVE"},
      {"feature_count", k},
      {"support_vector_count", m},
      {"support_vectors", sv},
      {"dual_coefs", std::vector<double>(model.dual_coefs.data(), model.dual_coefs.data() + m)},
      {"bias", model.bias},
      {"gamma", model.gamma},
      {"config",
       {{"c", model.c},
        {"class_weights",
         {{"DEFAULT", model.weights.default_weight},
          {"ALTERNATIVE", model.weights.alternative_weight}}},
        {"tolerance", model.tolerance},
        {"max_passes", model.max_passes},
        {"seed", model.seed}}},
      {"fold", model.fold},
      {"pca_digest", model.pca_digest},
      {"iterations", model.iterations},
      {"final_violation", model.final_violation},
      {"dual_objective", model.dual_objective},
  };
}

SvmModel SvmFromJson(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "hintsteer.svm" || doc.at("version") != 1) {
      throw DataError("not a version-1 SVM model file");
    }
    SvmModel m;
    const auto k = doc.at("feature_count").get<Eigen::Index>();
    const auto count = doc.at("support_vector_count").get<Eigen::Index>();
    const auto sv = doc.at("support_vectors").get<std::vector<double>>();
    const auto coefs = doc.at("dual_coefs").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(sv.size()) != count * k ||
        static_cast<Eigen::Index>(coefs.size()) != count) {
      throw DataError("SVM model file has inconsistent array lengths");
    }
    m.support_vectors =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            sv.data(), count, k);
    m.dual_coefs = Eigen::Map<const Vector>(coefs.data(), count);
    m.bias = doc.at("bias").get<double>();
    m.gamma = doc.at("gamma").get<double>();
    const auto& cfg = doc.at("config");
    m.c = cfg.at("c").get<double>();
    m.weights.default_weight = cfg.at("class_weights").at("DEFAULT").get<double>();
    m.weights.alternative_weight = cfg.at("class_weights").at("ALTERNATIVE").get<double>();
    m.tolerance = cfg.at("tolerance").get<double>();
    m.max_passes = cfg.at("max_passes").get<std::int64_t>();
    m.seed = cfg.at("seed").get<std::uint64_t>();
    m.fold = doc.at("fold").get<int>();
    m.pca_digest = doc.at("pca_digest").get<std::string>();
    m.iterations = doc.at("iterations").get<std::int64_t>();
    m.final_violation = doc.at("final_violation").get<double>();
    m.dual_objective = doc.at("dual_objective").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed SVM model file: ") + e.what());
  }
}

ModelBundle TrainBundle(const Matrix& embeddings, std::span<const Label> labels,
                        Eigen::Index n_components, const SvmConfig& config) {
  ModelBundle bundle;
  bundle.pca = FitPca(embeddings, n_components);
  bundle.svm = FitSvm(Transform(bundle.pca, embeddings), labels, config);
  return bundle;
}

double BundleDecision(const ModelBundle& bundle, const Vector& embedding) {
  return DecisionValue(bundle.svm, TransformRow(bundle.pca, embedding));
}

}  // namespace hintsteer
