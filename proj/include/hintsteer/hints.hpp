#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hintsteer {

using HintId = int;

// Six planner switches, in the fixed order used for rendering and for the
// catalog CSV columns.
enum class PlannerFlag : int {
  kHashJoin = 0,
  kMergeJoin,
  kNestedLoop,
  kIndexScan,
  kSeqScan,
  kIndexOnlyScan,
};

inline constexpr int kPlannerFlagCount = 6;
inline constexpr HintId kDefaultHintId = 0;

// Catalog column name, e.g. "hash_join".
std::string_view FlagColumnName(PlannerFlag flag);
// DBMS session variable, e.g. "enable_hashjoin".
std::string_view FlagVariableName(PlannerFlag flag);

struct HintSet {
  HintId id = kDefaultHintId;
  std::array<bool, kPlannerFlagCount> enabled{true, true, true, true, true, true};

  bool IsEnabled(PlannerFlag flag) const { return enabled[static_cast<int>(flag)]; }
  void Set(PlannerFlag flag, bool on) { enabled[static_cast<int>(flag)] = on; }
  int EnabledCount() const;
  // At least one join operator and one scan operator enabled.
  bool IsPlannable() const;
  bool IsDefault() const { return EnabledCount() == kPlannerFlagCount; }

  friend bool operator==(const HintSet&, const HintSet&) = default;
};

// All plannable flag combinations: the all-enabled default at id 0 followed by
// the 48 restricted sets in ascending bitmask order.
std::vector<HintSet> DefaultCatalog();

// One "SET <variable> = off;\n" line per disabled flag in flag order. The
// default renders as "".
std::string RenderHintPrefix(const HintSet& hint);

// CSV `id,hash_join,merge_join,nested_loop,index_scan,seq_scan,index_only_scan`.
std::vector<HintSet> LoadCatalog(const std::filesystem::path& path);
std::vector<HintSet> ParseCatalog(std::string_view csv_text);
std::string FormatCatalog(const std::vector<HintSet>& catalog);

const HintSet& FindHint(const std::vector<HintSet>& catalog, HintId id);

}  // namespace hintsteer
