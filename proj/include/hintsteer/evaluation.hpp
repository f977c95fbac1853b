#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hintsteer/classifier.hpp"
#include "hintsteer/features.hpp"
#include "hintsteer/workload.hpp"

namespace hintsteer {

enum class Strategy { kOptimal, kDefaultOnly, kAlternativeOnly, kLearned };

inline constexpr std::array<Strategy, 4> kAllStrategies = {
    Strategy::kOptimal, Strategy::kDefaultOnly, Strategy::kAlternativeOnly, Strategy::kLearned};

std::string_view ToString(Strategy s);

// One query's two-arm latencies and its ground-truth label.
struct EvalQuery {
  std::string id;
  double default_ms = 0.0;
  double alternative_ms = 0.0;
  Label label = Label::kDefault;
};

// Queries ordered by id, with labels taken from `labels`.
std::vector<EvalQuery> BuildEvalQueries(const LatencyMatrix& matrix, const LabelSet& labels,
                                        HintId default_id);

struct FoldPlan {
  int n_folds = 10;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignments;

  std::vector<std::string> TestIds(int fold) const;
};

// Shuffles each class with the seed, then deals it round-robin across folds,
// continuing where the previous class stopped. Per-class fold counts are the
// floor or ceiling of count / n_folds.
FoldPlan StratifiedFolds(const LabelSet& labels, int n_folds, std::uint64_t seed);

// Latency realized per query when following `strategy`. `decisions` is only
// read for LEARNED and must then align with `queries`.
std::vector<double> StrategyLatencies(Strategy strategy, std::span<const EvalQuery> queries,
                                      std::span<const Label> decisions = {});
double TotalLatency(Strategy strategy, std::span<const EvalQuery> queries,
                    std::span<const Label> decisions = {});

// Nearest-rank: ascending order, 1-based index ceil(0.9 n).
double P90Latency(std::span<const double> latencies);

struct EcdfPoint {
  double latency_ms = 0.0;
  double fraction = 0.0;
  friend bool operator==(const EcdfPoint&, const EcdfPoint&) = default;
};
std::vector<EcdfPoint> Ecdf(std::span<const double> latencies);

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t Total() const { return tp + fp + fn + tn; }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

// Positive class is ALTERNATIVE. Precision/recall are 0 when undefined.
struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::optional<double> auroc;  // absent when truth holds a single class
  Confusion confusion;
};

ClassificationMetrics ComputeClassificationMetrics(std::span<const Label> truth,
                                                   std::span<const Label> predicted,
                                                   std::span<const double> decision_values);

// Midrank Mann-Whitney estimate of the area under the ROC curve.
std::optional<double> Auroc(std::span<const Label> truth, std::span<const double> scores);

enum class PcaScope { kFold, kGlobal };

struct CvConfig {
  Eigen::Index n_components = 120;
  SvmConfig svm;
  int n_folds = 10;
  std::uint64_t seed = 0;
  PcaScope pca_scope = PcaScope::kFold;
  bool parallel_folds = false;
};

struct StrategyStats {
  double total_ms = 0.0;
  double p90_ms = 0.0;
};

struct FoldResult {
  int fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::map<Strategy, StrategyStats> strategies;
  ClassificationMetrics classification;
  double total_reduction_pct = 0.0;  // LEARNED vs DEFAULT_ONLY
  double p90_reduction_pct = 0.0;
  double total_gap_pct = 0.0;        // LEARNED vs OPTIMAL
  double p90_gap_pct = 0.0;
  // Σ |L(q, default) − L(q, alternative)| over misclassified test queries.
  double misclassification_cost_ms = 0.0;
  double retained_variance = 0.0;
  double gamma = 0.0;
  std::size_t support_vectors = 0;
  std::int64_t svm_iterations = 0;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct EvalReport {
  int n_folds = 0;
  std::uint64_t seed = 0;
  Eigen::Index n_components = 0;
  Syntax train_syntax = Syntax::kA;
  Syntax test_syntax = Syntax::kA;
  std::vector<FoldResult> folds;
  // Keyed by metric name, e.g. "accuracy", "LEARNED.total_ms".
  std::map<std::string, MeanStd> aggregate;
  Confusion pooled_confusion;
  std::map<Strategy, double> pooled_total_ms;
  std::map<Strategy, std::vector<EcdfPoint>> ecdf;
  // Test-time decision per query id, pooled over folds.
  std::map<std::string, Label> decisions;
};

// Cross-validated evaluation. Models train on `train_embeddings` rows and
// are tested on the matching `test_embeddings` rows, so a single matrix
// passed twice is the plain run. Row i of each matrix belongs to queries[i].
EvalReport RunCrossValidation(std::span<const EvalQuery> queries, const Matrix& train_embeddings,
                              const Matrix& test_embeddings, const FoldPlan& plan,
                              const CvConfig& config);

EvalReport RunCv(std::span<const EvalQuery> queries, const Matrix& embeddings,
                 const CvConfig& config);

struct RobustnessGrid {
  // cells[train][test], indexed by Syntax A/B/C.
  std::array<std::array<EvalReport, 3>, 3> cells;
};

RobustnessGrid RunRobustnessGrid(std::span<const EvalQuery> queries,
                                 const std::array<Matrix, 3>& embeddings_by_syntax,
                                 const CvConfig& config);

nlohmann::json ReportToJson(const EvalReport& report);
nlohmann::json GridToJson(const RobustnessGrid& grid);
// `strategy,latency_ms,fraction`
std::string EcdfCsv(const EvalReport& report);
std::string SummaryTable(const EvalReport& report);
std::string GridSummaryTable(const RobustnessGrid& grid);

}  // namespace hintsteer
