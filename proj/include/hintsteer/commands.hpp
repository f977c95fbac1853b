#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hintsteer/config.hpp"
#include "hintsteer/embedding.hpp"
#include "hintsteer/error.hpp"
#include "hintsteer/hints.hpp"
#include "hintsteer/runtime.hpp"

namespace hintsteer {

// Stable artifact names under RunConfig::paths.out.
namespace artifacts {
inline constexpr const char* kWorkload = "workload.json";
inline constexpr const char* kLabels = "labels.csv";
inline constexpr const char* kIngestReport = "ingest.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kEcdf = "ecdf.csv";
inline constexpr const char* kPredictions = "predictions.csv";
inline constexpr const char* kSummary = "summary.txt";
inline constexpr const char* kRobustness = "robustness.json";
inline constexpr const char* kRobustnessSummary = "robustness.txt";
}  // namespace artifacts

std::unique_ptr<EmbeddingProvider> MakeProvider(const ProviderConfig& config);
// Model id the configured provider would report, without building it.
std::string ProviderModelId(const ProviderConfig& config);

std::vector<HintSet> ConfiguredCatalog(const RunConfig& config);

// Reads queries and latencies, labels every query against the selected
// alternative hint, materializes the syntax variants and writes the
// workload store. Prints the label prior and the optimal-hint skew.
void CmdIngest(const RunConfig& config, std::ostream& out);

// Embeds every stored query in every configured syntax variant into the cache.
void CmdEmbed(const RunConfig& config, std::ostream& out);

// Writes one PCA+SVM bundle per fold, a final bundle fit on all queries and a
// manifest binding their digests to the config hash and seed.
void CmdTrain(const RunConfig& config, std::ostream& out);

void CmdEvaluate(const RunConfig& config, std::ostream& out);
void CmdRobustness(const RunConfig& config, std::ostream& out);

struct SteerOptions {
  std::string sql;
  std::string query_id = "adhoc";
  FallbackPolicy policy = FallbackPolicy::kDefault;
  // Also run the query on the configured database and report its latency.
  bool execute = false;
};

// Prints the decision as a single JSON line.
void CmdSteer(const RunConfig& config, const SteerOptions& options, std::ostream& out);

struct CollectOptions {
  // Empty means the whole catalog.
  std::vector<HintId> hint_ids;
};

// Appends observations to paths.latencies and prints a JSON summary. Fails
// with a database error only when no cell could be measured.
void CmdCollect(const RunConfig& config, const CollectOptions& options, std::ostream& out,
                std::ostream& progress);

// Re-renders the text summaries of whatever reports exist under paths.out.
void CmdReport(const RunConfig& config, std::ostream& out);

// {"error": {"kind", "message", "exit_code"}}
nlohmann::json ErrorJson(const Error& error);

}  // namespace hintsteer
