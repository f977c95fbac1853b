#include "hintsteer/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hintsteer/error.hpp"

namespace hintsteer {

std::string_view ToString(Strategy s) {
  switch (s) {
    case Strategy::kOptimal: return "OPTIMAL";
    case Strategy::kDefaultOnly: return "DEFAULT_ONLY";
    case Strategy::kAlternativeOnly: return "ALTERNATIVE_ONLY";
    case Strategy::kLearned: return "LEARNED";
  }
  return "LEARNED";
}

std::vector<EvalQuery> BuildEvalQueries(const LatencyMatrix& matrix, const LabelSet& labels,
                                        HintId default_id) {
  std::vector<EvalQuery> out;
  out.reserve(labels.labels.size());
  for (const auto& [id, label] : labels.labels) {
    EvalQuery q;
    q.id = id;
    q.default_ms = matrix.Mean(id, default_id);
    q.alternative_ms = matrix.Mean(id, labels.alternative_hint_id);
    q.label = label;
    out.push_back(std::move(q));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Folds

namespace {

// Unbiased draw from [0, n) that does not depend on the standard library's
// distribution implementations.
std::uint64_t Bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  while (true) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

template <typename T>
void Shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[Bounded(rng, i)]);
  }
}

}  // namespace

std::vector<std::string> FoldPlan::TestIds(int fold) const {
  std::vector<std::string> ids;
  for (const auto& [id, f] : assignments) {
    if (f == fold) ids.push_back(id);
  }
  return ids;
}

FoldPlan StratifiedFolds(const LabelSet& labels, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw ConfigError("need at least 2 folds");
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;

  std::mt19937_64 rng(seed);
  std::size_t offset = 0;
  for (Label cls : {Label::kDefault, Label::kAlternative}) {
    std::vector<std::string> ids;
    for (const auto& [id, l] : labels.labels) {
      if (l == cls) ids.push_back(id);
    }
    if (ids.size() < static_cast<std::size_t>(n_folds)) {
      throw DataError("class " + std::string(ToString(cls)) + " has " + std::to_string(ids.size()) +
                      " queries, fewer than " + std::to_string(n_folds) + " folds");
    }
    Shuffle(ids, rng);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      plan.assignments[ids[i]] = static_cast<int>((offset + i) % static_cast<std::size_t>(n_folds));
    }
    offset = (offset + ids.size()) % static_cast<std::size_t>(n_folds);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Latency metrics

std::vector<double> StrategyLatencies(Strategy strategy, std::span<const EvalQuery> queries,
                                      std::span<const Label> decisions) {
  if (strategy == Strategy::kLearned && decisions.size() != queries.size()) {
    throw DataError("learned strategy needs one decision per query (" +
                    std::to_string(decisions.size()) + " for " + std::to_string(queries.size()) + ")");
  }
  std::vector<double> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    switch (strategy) {
      case Strategy::kOptimal: out.push_back(std::min(q.default_ms, q.alternative_ms)); break;
      case Strategy::kDefaultOnly: out.push_back(q.default_ms); break;
      case Strategy::kAlternativeOnly: out.push_back(q.alternative_ms); break;
      case Strategy::kLearned:
        out.push_back(decisions[i] == Label::kAlternative ? q.alternative_ms : q.default_ms);
        break;
    }
  }
  return out;
}

double TotalLatency(Strategy strategy, std::span<const EvalQuery> queries,
                    std::span<const Label> decisions) {
  double total = 0.0;
  for (double v : StrategyLatencies(strategy, queries, decisions)) total += v;
  return total;
}

double P90Latency(std::span<const double> latencies) {
  if (latencies.empty()) throw DataError("P90 of an empty latency list");
  std::vector<double> sorted(latencies.begin(), latencies.end());
  std::sort(sorted.begin(), sorted.end());
  // ceil(0.9 n) in integer arithmetic avoids 0.9 * 10 = 9.000000000000002.
  const std::size_t rank = (9 * sorted.size() + 9) / 10;
  return sorted[std::max<std::size_t>(rank, 1) - 1];
}

std::vector<EcdfPoint> Ecdf(std::span<const double> latencies) {
  if (latencies.empty()) throw DataError("ECDF of an empty latency list");
  std::vector<double> sorted(latencies.begin(), latencies.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<EcdfPoint> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.push_back({sorted[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification metrics

std::optional<double> Auroc(std::span<const Label> truth, std::span<const double> scores) {
  if (truth.size() != scores.size()) throw DataError("AUROC inputs differ in length");
  const std::size_t n = truth.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }
  double pos = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (truth[i] == Label::kAlternative) {
      pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) return std::nullopt;
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

ClassificationMetrics ComputeClassificationMetrics(std::span<const Label> truth,
                                                   std::span<const Label> predicted,
                                                   std::span<const double> decision_values) {
  if (truth.empty()) throw DataError("classification metrics need at least one sample");
  if (truth.size() != predicted.size() || truth.size() != decision_values.size()) {
    throw DataError("classification metric inputs differ in length");
  }
  ClassificationMetrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == Label::kAlternative;
    const bool p = predicted[i] == Label::kAlternative;
    if (t && p) ++m.confusion.tp;
    else if (!t && p) ++m.confusion.fp;
    else if (t && !p) ++m.confusion.fn;
    else ++m.confusion.tn;
  }
  const auto& c = m.confusion;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.Total());
  m.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  m.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.auroc = Auroc(truth, decision_values);
  return m;
}

// ---------------------------------------------------------------------------
// Cross-validation

namespace {

Matrix SelectRows(const Matrix& x, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

MeanStd Summarize(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return out;
}

struct FoldOutput {
  FoldResult result;
  std::vector<std::size_t> test_rows;
  std::vector<Label> decisions;
};

FoldOutput EvaluateFold(int fold, std::span<const EvalQuery> queries, const Matrix& train_embeddings,
                        const Matrix& test_embeddings, const FoldPlan& plan,
                        const CvConfig& config, const PcaModel* global_pca) {
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
  std::vector<Label> train_labels;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto it = plan.assignments.find(queries[i].id);
    if (it == plan.assignments.end()) {
      throw DataError("query '" + queries[i].id + "' has no fold assignment");
    }
    if (it->second == fold) {
      test_rows.push_back(static_cast<Eigen::Index>(i));
    } else {
      train_rows.push_back(static_cast<Eigen::Index>(i));
      train_labels.push_back(queries[i].label);
    }
  }
  if (test_rows.empty()) throw DataError("fold " + std::to_string(fold) + " has no test queries");

  try {
    const Matrix x_train = SelectRows(train_embeddings, train_rows);
    PcaModel pca = global_pca != nullptr ? *global_pca : FitPca(x_train, config.n_components);
    SvmModel svm = FitSvm(Transform(pca, x_train), train_labels, config.svm);
    svm.fold = fold;

    const Matrix f_test = Transform(pca, SelectRows(test_embeddings, test_rows));
    const Vector dv = DecisionValues(svm, f_test);

    FoldOutput out;
    std::vector<EvalQuery> test_queries;
    std::vector<Label> truth;
    std::vector<double> scores;
    for (std::size_t t = 0; t < test_rows.size(); ++t) {
      const auto& q = queries[static_cast<std::size_t>(test_rows[t])];
      test_queries.push_back(q);
      truth.push_back(q.label);
      scores.push_back(dv(static_cast<Eigen::Index>(t)));
      out.decisions.push_back(LabelFromDecision(scores.back()));
      out.test_rows.push_back(static_cast<std::size_t>(test_rows[t]));
    }

    FoldResult& r = out.result;
    r.fold = fold;
    r.train_size = train_rows.size();
    r.test_size = test_rows.size();
    for (Strategy s : kAllStrategies) {
      const auto lat = StrategyLatencies(s, test_queries, out.decisions);
      double total = 0.0;
      for (double v : lat) total += v;
      r.strategies[s] = {total, P90Latency(lat)};
    }
    r.classification = ComputeClassificationMetrics(truth, out.decisions, scores);

    const auto& learned = r.strategies[Strategy::kLearned];
    const auto& base = r.strategies[Strategy::kDefaultOnly];
    const auto& best = r.strategies[Strategy::kOptimal];
    r.total_reduction_pct = 100.0 * (1.0 - learned.total_ms / base.total_ms);
    r.p90_reduction_pct = 100.0 * (1.0 - learned.p90_ms / base.p90_ms);
    r.total_gap_pct = 100.0 * (learned.total_ms / best.total_ms - 1.0);
    r.p90_gap_pct = 100.0 * (learned.p90_ms / best.p90_ms - 1.0);

    for (std::size_t t = 0; t < test_queries.size(); ++t) {
      if (out.decisions[t] != truth[t]) {
        r.misclassification_cost_ms +=
            std::abs(test_queries[t].default_ms - test_queries[t].alternative_ms);
      }
    }
    r.retained_variance = pca.explained_variance_ratio.sum();
    r.gamma = svm.gamma;
    r.support_vectors = static_cast<std::size_t>(svm.support_vectors.rows());
    r.svm_iterations = svm.iterations;
    return out;
  } catch (const Error& e) {
    throw Error(e.kind(), "fold " + std::to_string(fold) + ": " + e.what());
  }
}

}  // namespace

EvalReport RunCrossValidation(std::span<const EvalQuery> queries, const Matrix& train_embeddings,
                              const Matrix& test_embeddings, const FoldPlan& plan,
                              const CvConfig& config) {
  const auto n = static_cast<Eigen::Index>(queries.size());
  if (train_embeddings.rows() != n || test_embeddings.rows() != n) {
    throw DataError("embedding rows do not match the query count " + std::to_string(n));
  }
  if (train_embeddings.cols() != test_embeddings.cols()) {
    throw DataError("train and test embeddings differ in dimension");
  }

  std::optional<PcaModel> global_pca;
  if (config.pca_scope == PcaScope::kGlobal) global_pca = FitPca(train_embeddings, config.n_components);
  const PcaModel* shared = global_pca ? &*global_pca : nullptr;

  std::vector<FoldOutput> outputs;
  if (config.parallel_folds) {
    std::vector<std::future<FoldOutput>> futures;
    for (int f = 0; f < plan.n_folds; ++f) {
      futures.push_back(std::async(std::launch::async, EvaluateFold, f, queries,
                                   std::cref(train_embeddings), std::cref(test_embeddings),
                                   std::cref(plan), std::cref(config), shared));
    }
    for (auto& fut : futures) outputs.push_back(fut.get());
  } else {
    for (int f = 0; f < plan.n_folds; ++f) {
      outputs.push_back(
          EvaluateFold(f, queries, train_embeddings, test_embeddings, plan, config, shared));
    }
  }

  EvalReport report;
  report.n_folds = plan.n_folds;
  report.seed = plan.seed;
  report.n_components = config.n_components;

  std::vector<Label> pooled(queries.size(), Label::kDefault);
  std::vector<bool> seen(queries.size(), false);
  std::map<std::string, std::vector<double>> series;
  for (auto& out : outputs) {
    const FoldResult& r = out.result;
    for (std::size_t t = 0; t < out.test_rows.size(); ++t) {
      pooled[out.test_rows[t]] = out.decisions[t];
      seen[out.test_rows[t]] = true;
    }
    report.pooled_confusion += r.classification.confusion;
    series["accuracy"].push_back(r.classification.accuracy);
    series["precision"].push_back(r.classification.precision);
    series["recall"].push_back(r.classification.recall);
    if (r.classification.auroc) series["auroc"].push_back(*r.classification.auroc);
    for (const auto& [s, stats] : r.strategies) {
      series[std::string(ToString(s)) + ".total_ms"].push_back(stats.total_ms);
      series[std::string(ToString(s)) + ".p90_ms"].push_back(stats.p90_ms);
    }
    series["total_reduction_pct"].push_back(r.total_reduction_pct);
    series["p90_reduction_pct"].push_back(r.p90_reduction_pct);
    series["total_gap_pct"].push_back(r.total_gap_pct);
    series["p90_gap_pct"].push_back(r.p90_gap_pct);
    series["retained_variance"].push_back(r.retained_variance);
    report.folds.push_back(std::move(out.result));
  }
  for (const auto& [name, values] : series) report.aggregate[name] = Summarize(values);

  std::vector<EvalQuery> covered;
  std::vector<Label> covered_decisions;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (!seen[i]) continue;
    covered.push_back(queries[i]);
    covered_decisions.push_back(pooled[i]);
    report.decisions[queries[i].id] = pooled[i];
  }
  for (Strategy s : kAllStrategies) {
    const auto lat = StrategyLatencies(s, covered, covered_decisions);
    double total = 0.0;
    for (double v : lat) total += v;
    report.pooled_total_ms[s] = total;
    report.ecdf[s] = Ecdf(lat);
  }
  return report;
}

EvalReport RunCv(std::span<const EvalQuery> queries, const Matrix& embeddings,
                 const CvConfig& config) {
  LabelSet labels;
  for (const auto& q : queries) labels.labels[q.id] = q.label;
  const FoldPlan plan = StratifiedFolds(labels, config.n_folds, config.seed);
  return RunCrossValidation(queries, embeddings, embeddings, plan, config);
}

RobustnessGrid RunRobustnessGrid(std::span<const EvalQuery> queries,
                                 const std::array<Matrix, 3>& embeddings_by_syntax,
                                 const CvConfig& config) {
  LabelSet labels;
  for (const auto& q : queries) labels.labels[q.id] = q.label;
  const FoldPlan plan = StratifiedFolds(labels, config.n_folds, config.seed);
  RobustnessGrid grid;
  for (int train = 0; train < 3; ++train) {
    for (int test = 0; test < 3; ++test) {
      auto& cell = grid.cells[static_cast<std::size_t>(train)][static_cast<std::size_t>(test)];
      try {
        cell = RunCrossValidation(queries, embeddings_by_syntax[static_cast<std::size_t>(train)],
                                  embeddings_by_syntax[static_cast<std::size_t>(test)], plan, config);
      } catch (const Error& e) {
        throw Error(e.kind(), "train syntax " + std::string(ToString(static_cast<Syntax>(train))) +
                                  " / test syntax " +
                                  std::string(ToString(static_cast<Syntax>(test))) + ": " + e.what());
      }
      cell.train_syntax = static_cast<Syntax>(train);
      cell.test_syntax = static_cast<Syntax>(test);
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json ConfusionJson(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

nlohmann::json AggregateJson(const EvalReport& r) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, ms] : r.aggregate) out[name] = {{"mean", ms.mean}, {"std", ms.stddev}};
  return out;
}

}  // namespace

nlohmann::json ReportToJson(const EvalReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds) {
    nlohmann::json strategies = nlohmann::json::object();
    for (const auto& [s, stats] : f.strategies) {
      strategies[std::string(ToString(s))] = {{"total_ms", stats.total_ms}, {"p90_ms", stats.p90_ms}};
    }
    const auto& c = f.classification;
    folds.push_back({
        {"fold", f.fold},
        {"train_size", f.train_size},
        {"test_size", f.test_size},
        {"strategies", strategies},
        {"total_latency_ms", f.strategies.at(Strategy::kLearned).total_ms},
        {"p90_ms", f.strategies.at(Strategy::kLearned).p90_ms},
        {"accuracy", c.accuracy},
        {"precision", c.precision},
        {"recall", c.recall},
        {"auroc", c.auroc ? nlohmann::json(*c.auroc) : nlohmann::json(nullptr)},
        {"confusion", ConfusionJson(c.confusion)},
        {"total_reduction_vs_default_pct", f.total_reduction_pct},
        {"p90_reduction_vs_default_pct", f.p90_reduction_pct},
        {"total_gap_vs_optimal_pct", f.total_gap_pct},
        {"p90_gap_vs_optimal_pct", f.p90_gap_pct},
        {"misclassification_cost_ms", f.misclassification_cost_ms},
        {"retained_variance", f.retained_variance},
        {"gamma", f.gamma},
        {"support_vectors", f.support_vectors},
        {"svm_iterations", f.svm_iterations},
    });
  }
  nlohmann::json ecdf = nlohmann::json::object();
  for (const auto& [s, points] : report.ecdf) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : points) arr.push_back({p.latency_ms, p.fraction});
    ecdf[std::string(ToString(s))] = arr;
  }
  nlohmann::json pooled = nlohmann::json::object();
  for (const auto& [s, total] : report.pooled_total_ms) pooled[std::string(ToString(s))] = total;
  return {
      {"format", "hintsteer.eval_report"},
      {"version", 1},
      {"n_folds", report.n_folds},
      {"seed", report.seed},
      {"n_components", report.n_components},
      {"train_syntax", ToString(report.train_syntax)},
      {"test_syntax", ToString(report.test_syntax)},
      {"positive_class", "ALTERNATIVE"},
      {"folds", folds},
      {"aggregate", AggregateJson(report)},
      {"pooled_confusion", ConfusionJson(report.pooled_confusion)},
      {"pooled_total_ms", pooled},
      {"ecdf", ecdf},
  };
}

nlohmann::json GridToJson(const RobustnessGrid& grid) {
  nlohmann::json cells = nlohmann::json::array();
  for (int train = 0; train < 3; ++train) {
    const auto& diag = grid.cells[static_cast<std::size_t>(train)][static_cast<std::size_t>(train)];
    const double diag_total = diag.aggregate.at("LEARNED.total_ms").mean;
    for (int test = 0; test < 3; ++test) {
      const auto& r = grid.cells[static_cast<std::size_t>(train)][static_cast<std::size_t>(test)];
      const double total = r.aggregate.at("LEARNED.total_ms").mean;
      cells.push_back({
          {"train_syntax", ToString(static_cast<Syntax>(train))},
          {"test_syntax", ToString(static_cast<Syntax>(test))},
          {"mean_total_ms", total},
          {"vs_same_syntax_pct", 100.0 * (total / diag_total - 1.0)},
          {"aggregate", AggregateJson(r)},
          {"pooled_confusion", ConfusionJson(r.pooled_confusion)},
      });
    }
  }
  const auto& any = grid.cells[0][0];
  return {{"format", "hintsteer.robustness_grid"},
          {"version", 1},
          {"n_folds", any.n_folds},
          {"seed", any.seed},
          {"n_components", any.n_components},
          {"cells", cells}};
}

std::string EcdfCsv(const EvalReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "strategy,latency_ms,fraction\n";
  for (const auto& [s, points] : report.ecdf) {
    for (const auto& p : points) out << ToString(s) << ',' << p.latency_ms << ',' << p.fraction << '\n';
  }
  return out.str();
}

std::string SummaryTable(const EvalReport& report) {
  std::ostringstream out;
  out << std::fixed;
  out << "folds=" << report.n_folds << " seed=" << report.seed << " components=" << report.n_components
      << " train=" << ToString(report.train_syntax) << " test=" << ToString(report.test_syntax) << "\n";
  out << std::left << std::setw(18) << "strategy" << std::right << std::setw(16) << "total_ms"
      << std::setw(12) << "(std)" << std::setw(14) << "p90_ms" << std::setw(12) << "(std)" << "\n";
  for (Strategy s : kAllStrategies) {
    const auto& t = report.aggregate.at(std::string(ToString(s)) + ".total_ms");
    const auto& p = report.aggregate.at(std::string(ToString(s)) + ".p90_ms");
    out << std::left << std::setw(18) << ToString(s) << std::right << std::setprecision(1)
        << std::setw(16) << t.mean << std::setw(12) << t.stddev << std::setw(14) << p.mean
        << std::setw(12) << p.stddev << "\n";
  }
  auto line = [&](const std::string& name) {
    auto it = report.aggregate.find(name);
    if (it == report.aggregate.end()) {
      out << std::left << std::setw(26) << name << std::right << std::setw(12) << "n/a" << "\n";
      return;
    }
    out << std::left << std::setw(26) << name << std::right << std::setprecision(4) << std::setw(12)
        << it->second.mean << "  (std " << it->second.stddev << ")\n";
  };
  for (const char* name : {"accuracy", "precision", "recall", "auroc", "total_reduction_pct",
                           "p90_reduction_pct", "total_gap_pct", "p90_gap_pct", "retained_variance"}) {
    line(name);
  }
  const auto& c = report.pooled_confusion;
  out << "confusion (positive=ALTERNATIVE): tp=" << c.tp << " fp=" << c.fp << " fn=" << c.fn
      << " tn=" << c.tn << "\n";
  return out.str();
}

std::string GridSummaryTable(const RobustnessGrid& grid) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  out << "mean LEARNED total latency (ms), rows = train syntax, columns = test syntax\n";
  out << std::setw(8) << "";
  for (int t = 0; t < 3; ++t) out << std::setw(16) << ToString(static_cast<Syntax>(t));
  out << "\n";
  for (int r = 0; r < 3; ++r) {
    out << std::setw(8) << ToString(static_cast<Syntax>(r));
    for (int t = 0; t < 3; ++t) {
      out << std::setw(16)
          << grid.cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)]
                 .aggregate.at("LEARNED.total_ms")
                 .mean;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace hintsteer
