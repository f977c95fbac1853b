#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hintsteer/classifier.hpp"
#include "hintsteer/embedding.hpp"
#include "hintsteer/hints.hpp"
#include "hintsteer/pg_client.hpp"
#include "hintsteer/workload.hpp"

namespace hintsteer {

struct DbTarget {
  std::string connection;
  std::int64_t statement_timeout_ms = 300000;
  // Executions per cell run before measuring and thrown away.
  int warm_runs = 0;

  void Validate() const;
};

struct SteeringDecision {
  std::string query_id;
  Label chosen = Label::kDefault;
  std::string hint_prefix;  // empty when chosen is DEFAULT
  double decision_value = 0.0;
  bool embed_cache_hit = false;
  // Set when the embedding could not be obtained and the policy fell back.
  bool degraded = false;
  std::string warning;
  // Embedding + classification time. Never part of query latency.
  double overhead_ms = 0.0;
};

nlohmann::json DecisionToJson(const SteeringDecision& d);

enum class FallbackPolicy {
  kDefault,  // steer to DEFAULT and flag the decision as degraded
  kFail,     // rethrow the provider error
};

// Pure mapping from a decision value to a decision, without the embedding step.
SteeringDecision DecideFromValue(std::string query_id, double decision_value,
                                 const HintSet& alternative);

class Steerer {
 public:
  // Throws ConfigError when the bundle was trained on a different model id
  // or when the alternative hint is the default.
  Steerer(const ModelBundle& bundle, HintSet alternative, Embedder& embedder,
          FallbackPolicy policy = FallbackPolicy::kDefault);

  SteeringDecision Steer(std::string_view query_id, std::string_view sql) const;

 private:
  const ModelBundle& bundle_;
  HintSet alternative_;
  Embedder& embedder_;
  FallbackPolicy policy_;
};

struct ExecutionResult {
  double latency_ms = 0.0;
  bool timed_out = false;
  std::size_t rows = 0;
};

// SET statement_timeout, apply the prefix, time the query, then RESET ALL.
// The reset is issued on every path, including when the query fails.
ExecutionResult ExecuteSteered(DbSession& session, std::string_view hint_prefix,
                               std::string_view sql, const DbTarget& target);

struct CellFailure {
  std::string query_id;
  HintId hint_set_id = kDefaultHintId;
  std::string message;
};

struct CollectionResult {
  std::vector<LatencyObservation> observations;
  std::vector<CellFailure> failures;
};

// Runs every (query, hint) cell `runs` times, query-major, then hint, then
// run. Executions never overlap. A failing cell is recorded and skipped.
// `progress`, when set, is called after each cell.
CollectionResult CollectLatencies(DbSession& session, std::span<const QueryRecord> queries,
                                  std::span<const HintSet> hints, const DbTarget& target, int runs,
                                  const std::function<void(const std::string&, HintId)>& progress = {});

}  // namespace hintsteer
