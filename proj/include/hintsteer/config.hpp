#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hintsteer/classifier.hpp"
#include "hintsteer/evaluation.hpp"
#include "hintsteer/runtime.hpp"
#include "hintsteer/workload.hpp"

namespace hintsteer {

struct PathsConfig {
  std::filesystem::path queries;    // directory of .sql files or JSONL manifest
  std::filesystem::path latencies;  // observation CSV
  std::filesystem::path catalog;    // optional; empty means the built-in catalog
  std::filesystem::path cache;      // empty means <out>/embeddings.jsonl
  std::filesystem::path models;     // empty means <out>/models
  std::filesystem::path out = "hintsteer-out";

  std::filesystem::path CachePath() const { return cache.empty() ? out / "embeddings.jsonl" : cache; }
  std::filesystem::path ModelsDir() const { return models.empty() ? out / "models" : models; }
};

struct ProviderConfig {
  std::string kind = "hash";  // "hash" or "remote"
  std::size_t hash_dim = 512;
  std::uint64_t hash_seed = 0;
  std::string endpoint;
  std::string model_id;
  std::string api_key;
  int parallelism = 4;
  std::size_t batch_size = 16;
  int timeout_s = 60;
  int max_attempts = 3;
};

struct PipelineConfig {
  Eigen::Index n_components = 120;
  int n_folds = 10;
  std::uint64_t seed = 0;
  PcaScope pca_scope = PcaScope::kFold;
  double timeout_penalty = 1.0;
  // Pins the alternative hint instead of selecting it from the latencies.
  std::optional<HintId> alternative_hint_id;
  SvmConfig svm;
};

struct SyntaxConfig {
  Syntax train = Syntax::kA;
  Syntax test = Syntax::kA;
  std::vector<Syntax> variants = {Syntax::kA, Syntax::kB, Syntax::kC};
};

struct DbConfig {
  std::string connection;
  std::int64_t statement_timeout_ms = 300000;
  int warm_runs = 0;
  int runs = 5;

  DbTarget Target() const { return {connection, statement_timeout_ms, warm_runs}; }
};

struct RunConfig {
  PathsConfig paths;
  ProviderConfig provider;
  PipelineConfig pipeline;
  SyntaxConfig syntax;
  DbConfig db;
};

// Replaces every ${NAME} with the environment value. Unset names are a
// ConfigError; `$${` escapes a literal `${`.
std::string InterpolateEnv(std::string_view text);

// Reads the declarative config file. Unknown keys are rejected so typos
// surface instead of silently falling back to defaults. Relative paths are
// resolved against the file's directory.
RunConfig LoadConfig(const std::filesystem::path& path);
RunConfig ConfigFromJson(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
nlohmann::json ConfigToJson(const RunConfig& config);

// SHA-256 of the canonical JSON of the effective config with the API key
// and the database connection string blanked.
std::string ConfigHash(const RunConfig& config);

}  // namespace hintsteer
