#include "hintsteer/runtime.hpp"

#include <chrono>

#include <nlohmann/json.hpp>

namespace hintsteer {

namespace {

using Clock = std::chrono::steady_clock;

double MillisSince(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

void DbTarget::Validate() const {
  if (connection.empty()) throw ConfigError("database connection string is empty");
  if (statement_timeout_ms <= 0) throw ConfigError("statement timeout must be positive");
  if (warm_runs < 0) throw ConfigError("warm_runs must be non-negative");
}

nlohmann::json DecisionToJson(const SteeringDecision& d) {
  nlohmann::json j = {
      {"query_id", d.query_id},
      {"chosen", ToString(d.chosen)},
      {"hint_prefix", d.hint_prefix},
      {"decision_value", d.decision_value},
      {"embed_cache_hit", d.embed_cache_hit},
      {"degraded", d.degraded},
      {"overhead_ms", d.overhead_ms},
  };
  if (!d.warning.empty()) j["warning"] = d.warning;
  return j;
}

SteeringDecision DecideFromValue(std::string query_id, double decision_value,
                                 const HintSet& alternative) {
  SteeringDecision d;
  d.query_id = std::move(query_id);
  d.decision_value = decision_value;
  d.chosen = LabelFromDecision(decision_value);
  if (d.chosen == Label::kAlternative) d.hint_prefix = RenderHintPrefix(alternative);
  return d;
}

Steerer::Steerer(const ModelBundle& bundle, HintSet alternative, Embedder& embedder,
                 FallbackPolicy policy)
    : bundle_(bundle), alternative_(alternative), embedder_(embedder), policy_(policy) {
  if (alternative_.IsDefault()) throw ConfigError("alternative hint set must not be the default");
  const auto& trained_on = bundle_.pca.source_model_id;
  if (!trained_on.empty() && trained_on != embedder_.ModelId()) {
    throw ConfigError("model bundle was trained on embeddings from '" + trained_on +
                      "' but the provider is '" + embedder_.ModelId() + "'");
  }
  if (bundle_.svm.FeatureCount() != bundle_.pca.OutputDim()) {
    throw ConfigError("model bundle is inconsistent: PCA emits " +
                      std::to_string(bundle_.pca.OutputDim()) + " components, SVM expects " +
                      std::to_string(bundle_.svm.FeatureCount()));
  }
}

SteeringDecision Steerer::Steer(std::string_view query_id, std::string_view sql) const {
  const auto start = Clock::now();
  EmbedResult embedded;
  try {
    embedded = embedder_.Embed(sql);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kProvider || policy_ == FallbackPolicy::kFail) throw;
    SteeringDecision d;
    d.query_id = std::string(query_id);
    d.degraded = true;
    d.warning = std::string("embedding failed, using default plan: ") + e.what();
    d.overhead_ms = MillisSince(start);
    return d;
  }
  const auto& values = embedded.vector.values;
  if (static_cast<Eigen::Index>(values.size()) != bundle_.pca.InputDim()) {
    throw ConfigError("provider returned " + std::to_string(values.size()) +
                      "-dimensional embeddings but the model expects " +
                      std::to_string(bundle_.pca.InputDim()));
  }
  const Vector x = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  SteeringDecision d = DecideFromValue(std::string(query_id), BundleDecision(bundle_, x), alternative_);
  d.embed_cache_hit = embedded.cache_hit;
  d.overhead_ms = MillisSince(start);
  return d;
}

ExecutionResult ExecuteSteered(DbSession& session, std::string_view hint_prefix,
                               std::string_view sql, const DbTarget& target) {
  if (target.statement_timeout_ms <= 0) throw ConfigError("statement timeout must be positive");
  ExecutionResult result;
  try {
    session.Execute("SET statement_timeout = " + std::to_string(target.statement_timeout_ms) + ";");
    if (!hint_prefix.empty()) session.Execute(hint_prefix);
    const auto start = Clock::now();
    try {
      result.rows = session.Execute(sql).rows.size();
      result.latency_ms = MillisSince(start);
    } catch (const PgServerError& e) {
      if (!e.IsQueryCanceled()) throw;
      result.timed_out = true;
      result.latency_ms = static_cast<double>(target.statement_timeout_ms);
    }
  } catch (...) {
    try {
      session.Execute("RESET ALL;");
    } catch (const Error&) {
      // The original failure is the one worth reporting.
    }
    throw;
  }
  session.Execute("RESET ALL;");
  return result;
}

CollectionResult CollectLatencies(DbSession& session, std::span<const QueryRecord> queries,
                                  std::span<const HintSet> hints, const DbTarget& target, int runs,
                                  const std::function<void(const std::string&, HintId)>& progress) {
  target.Validate();
  if (runs < 1) throw ConfigError("runs must be at least 1");
  CollectionResult out;
  for (const auto& q : queries) {
    for (const auto& h : hints) {
      const std::string prefix = RenderHintPrefix(h);
      std::vector<LatencyObservation> cell;
      try {
        for (int w = 0; w < target.warm_runs; ++w) ExecuteSteered(session, prefix, q.sql, target);
        for (int r = 0; r < runs; ++r) {
          const auto res = ExecuteSteered(session, prefix, q.sql, target);
          cell.push_back({q.id, h.id, r, res.latency_ms, res.timed_out});
        }
        out.observations.insert(out.observations.end(), cell.begin(), cell.end());
      } catch (const Error& e) {
        out.failures.push_back({q.id, h.id, e.what()});
      }
      if (progress) progress(q.id, h.id);
    }
  }
  return out;
}

}  // namespace hintsteer
