#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hintsteer/hints.hpp"

namespace hintsteer {

enum class Benchmark { kJob, kCeb, kOther };
enum class Syntax { kA, kB, kC };
enum class Label { kDefault, kAlternative };

std::string_view ToString(Benchmark b);
std::string_view ToString(Syntax s);
std::string_view ToString(Label l);
Benchmark ParseBenchmark(std::string_view s);
Syntax ParseSyntax(std::string_view s);
Label ParseLabel(std::string_view s);

struct QueryRecord {
  std::string id;
  Benchmark source = Benchmark::kOther;
  std::string sql;
  Syntax syntax = Syntax::kA;
};

struct LatencyObservation {
  std::string query_id;
  HintId hint_set_id = kDefaultHintId;
  int run_index = 0;
  double latency_ms = 0.0;
  bool timed_out = false;

  friend bool operator==(const LatencyObservation&, const LatencyObservation&) = default;
};

struct LatencyCell {
  double mean_ms = 0.0;
  int run_count = 0;
  bool timed_out = false;
};

// Mean latency per (query, hint set). Queries iterate in lexicographic id
// order, hint sets in ascending id order.
class LatencyMatrix {
 public:
  void Set(const std::string& query_id, HintId hint, LatencyCell cell);
  const LatencyCell* Find(const std::string& query_id, HintId hint) const;
  // Throws a data error naming the query when the cell is absent.
  double Mean(const std::string& query_id, HintId hint) const;

  std::vector<std::string> QueryIds() const;
  std::vector<HintId> HintIds() const;
  std::size_t QueryCount() const { return cells_.size(); }
  bool Empty() const { return cells_.empty(); }

  const std::map<HintId, LatencyCell>& Row(const std::string& query_id) const;

 private:
  std::map<std::string, std::map<HintId, LatencyCell>> cells_;
};

struct LabelSet {
  std::map<std::string, Label> labels;
  HintId alternative_hint_id = kDefaultHintId;

  std::size_t CountOf(Label l) const;
};

struct SkewReport {
  std::map<HintId, std::size_t> optimal_counts;
  // max/min over hint sets that are optimal for at least one query;
  // +infinity when fewer than two hint sets ever win.
  double max_min_ratio = 0.0;
  HintId most_frequent = kDefaultHintId;
  HintId least_frequent = kDefaultHintId;
};

// Reads a directory of `.sql` files (id = filename stem) or a JSON-lines
// manifest with {id, source, sql[, syntax]} rows. For directories, syntax B and
// C load the `<stem>_b.sql` / `<stem>_c.sql` siblings under the plain stem id;
// syntax A skips those siblings. Result is sorted by id.
std::vector<QueryRecord> LoadQueries(const std::filesystem::path& path, Syntax syntax);

// Timed-out runs contribute latency_ms * timeout_penalty to the mean.
LatencyMatrix AggregateRuns(std::span<const LatencyObservation> observations,
                            double timeout_penalty = 1.0);

// Σ_q max(0, L(q, default) − L(q, hint)) for every non-default hint.
std::map<HintId, double> HintImprovements(const LatencyMatrix& matrix, HintId default_id);

// Argmax of HintImprovements; ties go to the lowest id.
HintId SelectAlternativeHint(const LatencyMatrix& matrix, HintId default_id);

// ALTERNATIVE iff L(q, alternative) < L(q, default); exact ties stay DEFAULT.
LabelSet LabelQueries(const LatencyMatrix& matrix, HintId default_id, HintId alternative_id);

// Per-hint count of queries for which that hint is fastest (ties to the
// lowest id). Every hint present in the matrix gets an entry.
SkewReport ComputeSkew(const LatencyMatrix& matrix);

// CSV `query_id,hint_set_id,run_index,latency_ms,timed_out`.
std::vector<LatencyObservation> ParseObservations(std::string_view csv_text);
std::vector<LatencyObservation> ReadObservations(const std::filesystem::path& path);
std::string FormatObservations(std::span<const LatencyObservation> observations,
                               bool with_header = true);
void AppendObservations(const std::filesystem::path& path,
                        std::span<const LatencyObservation> observations);

// CSV `query_id,label,alternative_hint_id`.
std::string FormatLabels(const LabelSet& labels);

}  // namespace hintsteer
