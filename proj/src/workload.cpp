#include "hintsteer/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "hintsteer/error.hpp"
#include "text_util.hpp"

namespace hintsteer {

namespace fs = std::filesystem;

std::string_view ToString(Benchmark b) {
  switch (b) {
    case Benchmark::kJob: return "JOB";
    case Benchmark::kCeb: return "CEB";
    case Benchmark::kOther: return "OTHER";
  }
  return "OTHER";
}

std::string_view ToString(Syntax s) {
  switch (s) {
    case Syntax::kA: return "A";
    case Syntax::kB: return "B";
    case Syntax::kC: return "C";
  }
  return "A";
}

std::string_view ToString(Label l) {
  return l == Label::kAlternative ? "ALTERNATIVE" : "DEFAULT";
}

Benchmark ParseBenchmark(std::string_view s) {
  if (s == "JOB" || s == "job") return Benchmark::kJob;
  if (s == "CEB" || s == "ceb") return Benchmark::kCeb;
  if (s == "OTHER" || s == "other") return Benchmark::kOther;
  throw DataError("unknown benchmark source '" + std::string(s) + "'");
}

Syntax ParseSyntax(std::string_view s) {
  if (s == "A" || s == "a") return Syntax::kA;
  if (s == "B" || s == "b") return Syntax::kB;
  if (s == "C" || s == "c") return Syntax::kC;
  throw DataError("unknown syntax variant '" + std::string(s) + "'");
}

Label ParseLabel(std::string_view s) {
  if (s == "DEFAULT") return Label::kDefault;
  if (s == "ALTERNATIVE") return Label::kAlternative;
  throw DataError("unknown label '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// LatencyMatrix

void LatencyMatrix::Set(const std::string& query_id, HintId hint, LatencyCell cell) {
  cells_[query_id][hint] = cell;
}

const LatencyCell* LatencyMatrix::Find(const std::string& query_id, HintId hint) const {
  auto q = cells_.find(query_id);
  if (q == cells_.end()) return nullptr;
  auto h = q->second.find(hint);
  return h == q->second.end() ? nullptr : &h->second;
}

double LatencyMatrix::Mean(const std::string& query_id, HintId hint) const {
  const auto* cell = Find(query_id, hint);
  if (cell == nullptr) {
    throw DataError("query '" + query_id + "' has no latency for hint set " +
                    std::to_string(hint));
  }
  return cell->mean_ms;
}

std::vector<std::string> LatencyMatrix::QueryIds() const {
  std::vector<std::string> ids;
  ids.reserve(cells_.size());
  for (const auto& [id, _] : cells_) ids.push_back(id);
  return ids;
}

std::vector<HintId> LatencyMatrix::HintIds() const {
  std::set<HintId> ids;
  for (const auto& [_, row] : cells_) {
    for (const auto& [h, __] : row) ids.insert(h);
  }
  return {ids.begin(), ids.end()};
}

const std::map<HintId, LatencyCell>& LatencyMatrix::Row(const std::string& query_id) const {
  auto q = cells_.find(query_id);
  if (q == cells_.end()) throw DataError("query '" + query_id + "' is not in the latency matrix");
  return q->second;
}

std::size_t LabelSet::CountOf(Label l) const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [l](const auto& kv) { return kv.second == l; }));
}

// ---------------------------------------------------------------------------
// Query ingestion

namespace {

std::string_view VariantSuffix(Syntax s) {
  switch (s) {
    case Syntax::kB: return "_b";
    case Syntax::kC: return "_c";
    case Syntax::kA: break;
  }
  return "";
}

bool EndsWith(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::vector<QueryRecord> LoadDirectory(const fs::path& dir, Syntax syntax) {
  std::vector<QueryRecord> records;
  std::set<std::string> seen;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".sql") continue;
    std::string stem = entry.path().stem().string();
    const bool is_b = EndsWith(stem, "_b");
    const bool is_c = EndsWith(stem, "_c");
    if (syntax == Syntax::kA) {
      if (is_b || is_c) continue;
    } else {
      if (!EndsWith(stem, VariantSuffix(syntax))) continue;
      stem.resize(stem.size() - 2);
    }
    QueryRecord rec;
    rec.id = stem;
    rec.sql = detail::ReadFile(entry.path());
    rec.syntax = syntax;
    if (rec.sql.empty()) throw DataError("query file " + entry.path().string() + " is empty");
    if (!seen.insert(rec.id).second) throw DataError("duplicate query id '" + rec.id + "'");
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<QueryRecord> LoadManifest(const fs::path& path, Syntax syntax) {
  const std::string text = detail::ReadFile(path);
  std::vector<QueryRecord> records;
  std::set<std::string> seen;
  const auto lines = detail::SplitLines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::Trim(lines[i]).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": malformed JSON: " + e.what());
    }
    if (!row.is_object() || !row.contains("id") || !row.contains("sql") ||
        !row["id"].is_string() || !row["sql"].is_string()) {
      throw DataError(where + ": manifest rows need string fields id and sql");
    }
    const Syntax row_syntax =
        row.contains("syntax") ? ParseSyntax(row["syntax"].get<std::string>()) : Syntax::kA;
    if (row_syntax != syntax) continue;
    QueryRecord rec;
    rec.id = row["id"].get<std::string>();
    rec.sql = row["sql"].get<std::string>();
    rec.source =
        row.contains("source") ? ParseBenchmark(row["source"].get<std::string>()) : Benchmark::kOther;
    rec.syntax = syntax;
    if (rec.sql.empty()) throw DataError(where + ": query '" + rec.id + "' has empty sql");
    if (!seen.insert(rec.id).second) {
      throw DataError(where + ": duplicate query id '" + rec.id + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::vector<QueryRecord> LoadQueries(const fs::path& path, Syntax syntax) {
  if (!fs::exists(path)) throw DataError("query path does not exist: " + path.string());
  auto records = fs::is_directory(path) ? LoadDirectory(path, syntax) : LoadManifest(path, syntax);
  std::sort(records.begin(), records.end(),
            [](const QueryRecord& a, const QueryRecord& b) { return a.id < b.id; });
  return records;
}

// ---------------------------------------------------------------------------
// Latency aggregation and labeling

LatencyMatrix AggregateRuns(std::span<const LatencyObservation> observations,
                            double timeout_penalty) {
  struct Acc {
    double sum = 0.0;
    int count = 0;
    bool timed_out = false;
  };
  std::map<std::pair<std::string, HintId>, Acc> groups;
  std::set<std::tuple<std::string, HintId, int>> keys;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    if (!(o.latency_ms > 0.0) || !std::isfinite(o.latency_ms)) {
      throw DataError("observation row " + std::to_string(i) + " (query '" + o.query_id +
                      "'): latency must be positive and finite");
    }
    if (!keys.emplace(o.query_id, o.hint_set_id, o.run_index).second) {
      throw DataError("observation row " + std::to_string(i) + ": duplicate (query '" +
                      o.query_id + "', hint " + std::to_string(o.hint_set_id) + ", run " +
                      std::to_string(o.run_index) + ")");
    }
    auto& acc = groups[{o.query_id, o.hint_set_id}];
    acc.sum += o.timed_out ? o.latency_ms * timeout_penalty : o.latency_ms;
    acc.count += 1;
    acc.timed_out = acc.timed_out || o.timed_out;
  }
  LatencyMatrix matrix;
  for (const auto& [key, acc] : groups) {
    matrix.Set(key.first, key.second, {acc.sum / acc.count, acc.count, acc.timed_out});
  }
  return matrix;
}

std::map<HintId, double> HintImprovements(const LatencyMatrix& matrix, HintId default_id) {
  std::map<HintId, double> improvement;
  for (HintId h : matrix.HintIds()) {
    if (h != default_id) improvement[h] = 0.0;
  }
  for (const auto& q : matrix.QueryIds()) {
    const double base = matrix.Mean(q, default_id);
    for (auto& [h, total] : improvement) {
      total += std::max(0.0, base - matrix.Mean(q, h));
    }
  }
  return improvement;
}

HintId SelectAlternativeHint(const LatencyMatrix& matrix, HintId default_id) {
  const auto improvement = HintImprovements(matrix, default_id);
  if (improvement.empty()) throw DataError("no candidate hints: matrix holds only the default");
  HintId best = improvement.begin()->first;
  double best_gain = improvement.begin()->second;
  for (const auto& [h, gain] : improvement) {
    if (gain > best_gain) {
      best = h;
      best_gain = gain;
    }
  }
  return best;
}

LabelSet LabelQueries(const LatencyMatrix& matrix, HintId default_id, HintId alternative_id) {
  LabelSet out;
  out.alternative_hint_id = alternative_id;
  for (const auto& q : matrix.QueryIds()) {
    const double base = matrix.Mean(q, default_id);
    const double alt = matrix.Mean(q, alternative_id);
    out.labels[q] = alt < base ? Label::kAlternative : Label::kDefault;
  }
  return out;
}

SkewReport ComputeSkew(const LatencyMatrix& matrix) {
  SkewReport report;
  for (HintId h : matrix.HintIds()) report.optimal_counts[h] = 0;
  for (const auto& q : matrix.QueryIds()) {
    const auto& row = matrix.Row(q);
    auto best = row.begin();
    for (auto it = row.begin(); it != row.end(); ++it) {
      if (it->second.mean_ms < best->second.mean_ms) best = it;
    }
    if (best != row.end()) report.optimal_counts[best->first] += 1;
  }
  std::size_t max_count = 0;
  std::size_t min_count = std::numeric_limits<std::size_t>::max();
  int winners = 0;
  for (const auto& [h, c] : report.optimal_counts) {
    if (c == 0) continue;
    ++winners;
    if (c > max_count) {
      max_count = c;
      report.most_frequent = h;
    }
    if (c < min_count) {
      min_count = c;
      report.least_frequent = h;
    }
  }
  report.max_min_ratio = winners < 2 ? std::numeric_limits<double>::infinity()
                                     : static_cast<double>(max_count) / min_count;
  return report;
}

// ---------------------------------------------------------------------------
// CSV formats

std::vector<LatencyObservation> ParseObservations(std::string_view csv_text) {
  const auto lines = detail::SplitLines(csv_text);
  if (lines.empty() || detail::Trim(lines.front()).empty()) {
    throw DataError("latency file is empty; expected header "
                    "query_id,hint_set_id,run_index,latency_ms,timed_out");
  }
  if (detail::Trim(lines.front()) != "query_id,hint_set_id,run_index,latency_ms,timed_out") {
    throw DataError("latency file header must be query_id,hint_set_id,run_index,latency_ms,timed_out");
  }
  std::vector<LatencyObservation> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::Trim(lines[i]).empty()) continue;
    const auto cells = detail::SplitCsvRow(lines[i]);
    const std::string where = "latency line " + std::to_string(i + 1);
    if (cells.size() != 5) throw DataError(where + ": expected 5 columns");
    LatencyObservation o;
    o.query_id = std::string(detail::Trim(cells[0]));
    o.hint_set_id = static_cast<HintId>(detail::ParseInt(cells[1], where + " hint_set_id"));
    o.run_index = static_cast<int>(detail::ParseInt(cells[2], where + " run_index"));
    o.latency_ms = detail::ParseDouble(cells[3], where + " latency_ms");
    const auto flag = detail::Trim(cells[4]);
    if (flag == "1" || flag == "true") {
      o.timed_out = true;
    } else if (flag == "0" || flag == "false") {
      o.timed_out = false;
    } else {
      throw DataError(where + ": timed_out must be 0/1");
    }
    if (o.query_id.empty()) throw DataError(where + ": empty query_id");
    if (o.run_index < 0) throw DataError(where + ": negative run_index");
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<LatencyObservation> ReadObservations(const fs::path& path) {
  try {
    return ParseObservations(detail::ReadFile(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string FormatObservations(std::span<const LatencyObservation> observations,
                               bool with_header) {
  std::ostringstream out;
  out.precision(17);
  if (with_header) out << "query_id,hint_set_id,run_index,latency_ms,timed_out\n";
  for (const auto& o : observations) {
    out << o.query_id << ',' << o.hint_set_id << ',' << o.run_index << ',' << o.latency_ms << ','
        << (o.timed_out ? 1 : 0) << '\n';
  }
  return out.str();
}

void AppendObservations(const fs::path& path, std::span<const LatencyObservation> observations) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot append to " + path.string());
  out << FormatObservations(observations, fresh);
}

std::string FormatLabels(const LabelSet& labels) {
  std::ostringstream out;
  out << "query_id,label,alternative_hint_id\n";
  for (const auto& [id, label] : labels.labels) {
    out << id << ',' << ToString(label) << ',' << labels.alternative_hint_id << '\n';
  }
  return out.str();
}

}  // namespace hintsteer
