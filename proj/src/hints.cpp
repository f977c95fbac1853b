#include "hintsteer/hints.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "hintsteer/error.hpp"
#include "text_util.hpp"

namespace hintsteer {

namespace {

constexpr std::array<std::string_view, kPlannerFlagCount> kColumnNames = {
    "hash_join", "merge_join", "nested_loop", "index_scan", "seq_scan", "index_only_scan"};

constexpr std::array<std::string_view, kPlannerFlagCount> kVariableNames = {
    "enable_hashjoin",  "enable_mergejoin", "enable_nestloop",
    "enable_indexscan", "enable_seqscan",   "enable_indexonlyscan"};

}  // namespace

std::string_view FlagColumnName(PlannerFlag flag) {
  return kColumnNames[static_cast<int>(flag)];
}

std::string_view FlagVariableName(PlannerFlag flag) {
  return kVariableNames[static_cast<int>(flag)];
}

int HintSet::EnabledCount() const {
  int n = 0;
  for (bool b : enabled) n += b ? 1 : 0;
  return n;
}

bool HintSet::IsPlannable() const {
  const bool any_join = IsEnabled(PlannerFlag::kHashJoin) || IsEnabled(PlannerFlag::kMergeJoin) ||
                        IsEnabled(PlannerFlag::kNestedLoop);
  const bool any_scan = IsEnabled(PlannerFlag::kIndexScan) || IsEnabled(PlannerFlag::kSeqScan) ||
                        IsEnabled(PlannerFlag::kIndexOnlyScan);
  return any_join && any_scan;
}

std::vector<HintSet> DefaultCatalog() {
  std::vector<HintSet> catalog;
  catalog.push_back(HintSet{});
  // Bit i of the mask set means flag i is disabled; mask 0 is the default.
  HintId next_id = 1;
  for (int mask = 1; mask < (1 << kPlannerFlagCount); ++mask) {
    HintSet h;
    for (int bit = 0; bit < kPlannerFlagCount; ++bit) h.enabled[bit] = ((mask >> bit) & 1) == 0;
    if (!h.IsPlannable()) continue;
    h.id = next_id++;
    catalog.push_back(h);
  }
  return catalog;
}

std::string RenderHintPrefix(const HintSet& hint) {
  std::string out;
  for (int i = 0; i < kPlannerFlagCount; ++i) {
    if (hint.enabled[i]) continue;
    out += "SET ";
    out += kVariableNames[i];
    out += " = off;\n";
  }
  return out;
}

std::vector<HintSet> ParseCatalog(std::string_view csv_text) {
  std::vector<HintSet> catalog;
  std::set<HintId> seen;
  const auto lines = detail::SplitLines(csv_text);
  if (lines.empty()) throw DataError("hint catalog is empty");

  const auto header = detail::SplitCsvRow(lines.front());
  if (header.size() != kPlannerFlagCount + 1 || detail::Trim(header[0]) != "id") {
    throw DataError("hint catalog header must be id," + std::string(kColumnNames[0]) + ",...");
  }
  for (int i = 0; i < kPlannerFlagCount; ++i) {
    if (detail::Trim(header[i + 1]) != kColumnNames[i]) {
      throw DataError("hint catalog column " + std::to_string(i + 1) + " must be " +
                      std::string(kColumnNames[i]));
    }
  }

  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (detail::Trim(lines[row]).empty()) continue;
    const auto cells = detail::SplitCsvRow(lines[row]);
    const std::string where = "hint catalog line " + std::to_string(row + 1);
    if (cells.size() != kPlannerFlagCount + 1) throw DataError(where + ": expected 7 columns");
    HintSet h;
    h.id = detail::ParseInt(cells[0], where + " id");
    for (int i = 0; i < kPlannerFlagCount; ++i) {
      const auto cell = detail::Trim(cells[i + 1]);
      if (cell != "0" && cell != "1") throw DataError(where + ": flag cells must be 0 or 1");
      h.enabled[i] = cell == "1";
    }
    if (!h.IsPlannable()) {
      throw DataError(where + ": hint set " + std::to_string(h.id) +
                      " disables every join or every scan operator");
    }
    if (!seen.insert(h.id).second) {
      throw DataError(where + ": duplicate hint set id " + std::to_string(h.id));
    }
    catalog.push_back(h);
  }
  return catalog;
}

std::vector<HintSet> LoadCatalog(const std::filesystem::path& path) {
  return ParseCatalog(detail::ReadFile(path));
}

std::string FormatCatalog(const std::vector<HintSet>& catalog) {
  std::ostringstream out;
  out << "id";
  for (auto name : kColumnNames) out << ',' << name;
  out << '\n';
  for (const auto& h : catalog) {
    out << h.id;
    for (bool b : h.enabled) out << ',' << (b ? 1 : 0);
    out << '\n';
  }
  return out.str();
}

const HintSet& FindHint(const std::vector<HintSet>& catalog, HintId id) {
  for (const auto& h : catalog) {
    if (h.id == id) return h;
  }
  throw DataError("hint set " + std::to_string(id) + " is not in the catalog");
}

}  // namespace hintsteer
