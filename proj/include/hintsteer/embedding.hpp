#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hintsteer {

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_id;
  // SHA-256 of the exact input bytes.
  std::string text_digest;

  std::size_t Dimension() const { return values.size(); }
};

std::string TextDigest(std::string_view text);

// Something that turns texts into vectors. Implementations must be
// deterministic per (model id, text) and safe to call from several threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string ModelId() const = 0;
  // Known output width, if the provider can state it without a request.
  virtual std::optional<std::size_t> Dimension() const = 0;
  // One vector per input text, in input order. Throws ProviderError.
  virtual std::vector<std::vector<double>> EmbedTexts(std::span<const std::string> texts) = 0;
};

// Signed feature hashing of lowercased word and punctuation tokens (unigrams
// and adjacent bigrams) into `dim` buckets, scaled to unit Euclidean norm.
EmbeddingVector HashEmbed(std::string_view text, std::size_t dim, std::uint64_t seed);

class HashProvider final : public EmbeddingProvider {
 public:
  HashProvider(std::size_t dim, std::uint64_t seed);

  std::string ModelId() const override;
  std::optional<std::size_t> Dimension() const override { return dim_; }
  std::vector<std::vector<double>> EmbedTexts(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  // Replaced in tests to avoid real sleeps.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct RemoteProviderConfig {
  // Full URL of the embeddings endpoint, e.g. https://api.openai.com/v1/embeddings.
  std::string endpoint;
  std::string model_id;
  std::string api_key;
  std::chrono::seconds timeout{60};
  RetryPolicy retry;
};

// Client for the common `{"model", "input": [...]}` ->
// `{"data": [{"index", "embedding"}]}` embeddings wire schema.
class RemoteProvider final : public EmbeddingProvider {
 public:
  explicit RemoteProvider(RemoteProviderConfig config);

  std::string ModelId() const override { return config_.model_id; }
  std::optional<std::size_t> Dimension() const override;
  std::vector<std::vector<double>> EmbedTexts(std::span<const std::string> texts) override;

 private:
  RemoteProviderConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  mutable std::mutex dim_mu_;
  std::optional<std::size_t> observed_dim_;
};

// Append-only JSON-lines store of {digest, model_id, dim, values}. An empty
// path keeps everything in memory. Reads may run concurrently; appends are
// serialized.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(std::filesystem::path path);

  std::optional<std::vector<double>> Lookup(const std::string& model_id,
                                            const std::string& digest) const;
  // Rejects vectors whose width disagrees with earlier entries for the model.
  void Insert(const std::string& model_id, const std::string& digest,
              const std::vector<double>& values);
  std::optional<std::size_t> DimensionOf(const std::string& model_id) const;
  std::size_t Size() const;
  const std::filesystem::path& Path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mu_;
  std::map<std::pair<std::string, std::string>, std::vector<double>> entries_;
  std::map<std::string, std::size_t> dims_;
};

struct EmbedResult {
  EmbeddingVector vector;
  bool cache_hit = false;
};

// Cache-fronted embedding with bounded request concurrency.
class Embedder {
 public:
  Embedder(EmbeddingProvider& provider, EmbeddingCache& cache, std::size_t request_batch_size = 16);

  EmbedResult Embed(std::string_view text);
  // Output order follows input order. At most `parallelism` provider requests
  // are in flight. Any failed item fails the whole batch.
  std::vector<EmbeddingVector> EmbedBatch(std::span<const std::string> texts, int parallelism);

  const std::string& ModelId() const { return model_id_; }
  std::size_t CacheHits() const { return hits_.load(); }
  std::size_t CacheMisses() const { return misses_.load(); }

 private:
  std::vector<double> Validate(std::vector<double> values, std::size_t index_hint) const;

  EmbeddingProvider& provider_;
  EmbeddingCache& cache_;
  std::string model_id_;
  std::size_t request_batch_size_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

}  // namespace hintsteer
