#include "hintsteer/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "hintsteer/digest.hpp"
#include "hintsteer/error.hpp"
#include "text_util.hpp"

namespace hintsteer {

namespace fs = std::filesystem;

std::string TextDigest(std::string_view text) { return Sha256Hex(text); }

// ---------------------------------------------------------------------------
// Feature hashing

namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t Fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

bool IsWordChar(unsigned char c) { return std::isalnum(c) != 0 || c == '_'; }

std::vector<std::string> HashTokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c) != 0) {
      ++i;
    } else if (IsWordChar(c)) {
      std::string word;
      while (i < text.size() && IsWordChar(static_cast<unsigned char>(text[i]))) {
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
        ++i;
      }
      tokens.push_back(std::move(word));
    } else {
      tokens.emplace_back(1, text[i]);
      ++i;
    }
  }
  return tokens;
}

}  // namespace

EmbeddingVector HashEmbed(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw DataError("hash embedding dimension must be at least 1");
  EmbeddingVector out;
  out.values.assign(dim, 0.0);
  out.model_id = "hash-" + std::to_string(dim) + "-" + std::to_string(seed);
  out.text_digest = TextDigest(text);

  const std::uint64_t salt = SplitMix64(seed);
  auto add = [&](std::string_view feature) {
    const std::uint64_t h = SplitMix64(Fnv1a(feature) ^ salt);
    const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
    out.values[h % dim] += sign;
  };

  const auto tokens = HashTokens(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add(tokens[i]);
    if (i + 1 < tokens.size()) add(tokens[i] + '\x1f' + tokens[i + 1]);
  }

  double norm2 = 0.0;
  for (double v : out.values) norm2 += v * v;
  if (norm2 == 0.0) {
    // Empty token stream or full cancellation: fall back to the raw bytes.
    out.values[SplitMix64(Fnv1a(text) ^ salt) % dim] = 1.0;
    return out;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : out.values) v *= inv;
  return out;
}

HashProvider::HashProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw ConfigError("hash provider dimension must be at least 1");
}

std::string HashProvider::ModelId() const {
  return "hash-" + std::to_string(dim_) + "-" + std::to_string(seed_);
}

std::vector<std::vector<double>> HashProvider::EmbedTexts(std::span<const std::string> texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(HashEmbed(t, dim_, seed_).values);
  return out;
}

// ---------------------------------------------------------------------------
// Cache

EmbeddingCache::EmbeddingCache(fs::path path) : path_(std::move(path)) {
  if (path_.empty() || !fs::exists(path_)) return;
  const std::string text = detail::ReadFile(path_);
  const auto lines = detail::SplitLines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::Trim(lines[i]).empty()) continue;
    const std::string where = path_.string() + ":" + std::to_string(i + 1);
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(lines[i]);
      auto digest = row.at("digest").get<std::string>();
      auto model = row.at("model_id").get<std::string>();
      const auto dim = row.at("dim").get<std::size_t>();
      auto values = row.at("values").get<std::vector<double>>();
      if (values.size() != dim) throw DataError(where + ": dim does not match values length");
      auto [it, fresh] = dims_.emplace(model, dim);
      if (!fresh && it->second != dim) {
        throw DataError(where + ": model '" + model + "' has mixed dimensions in cache");
      }
      entries_[{std::move(model), std::move(digest)}] = std::move(values);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": malformed cache entry: " + e.what());
    }
  }
}

std::optional<std::vector<double>> EmbeddingCache::Lookup(const std::string& model_id,
                                                          const std::string& digest) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find({model_id, digest});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::Insert(const std::string& model_id, const std::string& digest,
                            const std::vector<double>& values) {
  std::unique_lock lock(mu_);
  auto dim_it = dims_.find(model_id);
  if (dim_it != dims_.end() && dim_it->second != values.size()) {
    throw ProviderError("model '" + model_id + "' returned dimension " +
                        std::to_string(values.size()) + " but the cache holds dimension " +
                        std::to_string(dim_it->second));
  }
  auto key = std::make_pair(model_id, digest);
  if (entries_.count(key) != 0) return;
  if (!path_.empty()) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw DataError("cannot append to embedding cache " + path_.string());
    nlohmann::json row = {
        {"digest", digest}, {"model_id", model_id}, {"dim", values.size()}, {"values", values}};
    out << row.dump() << '\n';
    out.flush();
    if (!out) throw DataError("write to embedding cache " + path_.string() + " failed");
  }
  dims_.emplace(model_id, values.size());
  entries_.emplace(std::move(key), values);
}

std::optional<std::size_t> EmbeddingCache::DimensionOf(const std::string& model_id) const {
  std::shared_lock lock(mu_);
  auto it = dims_.find(model_id);
  if (it == dims_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingCache::Size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Embedder

Embedder::Embedder(EmbeddingProvider& provider, EmbeddingCache& cache,
                   std::size_t request_batch_size)
    : provider_(provider),
      cache_(cache),
      model_id_(provider.ModelId()),
      request_batch_size_(std::max<std::size_t>(1, request_batch_size)) {}

std::vector<double> Embedder::Validate(std::vector<double> values, std::size_t index_hint) const {
  if (values.empty()) {
    throw ProviderError("item " + std::to_string(index_hint) + ": provider returned an empty vector");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw ProviderError("item " + std::to_string(index_hint) +
                          ": provider returned a non-finite component");
    }
  }
  if (auto d = provider_.Dimension(); d && *d != values.size()) {
    throw ProviderError("item " + std::to_string(index_hint) + ": expected dimension " +
                        std::to_string(*d) + ", got " + std::to_string(values.size()));
  }
  return values;
}

EmbedResult Embedder::Embed(std::string_view text) {
  if (text.empty()) throw DataError("cannot embed empty text");
  EmbedResult result;
  result.vector.model_id = model_id_;
  result.vector.text_digest = TextDigest(text);
  if (auto hit = cache_.Lookup(model_id_, result.vector.text_digest)) {
    hits_ += 1;
    result.vector.values = std::move(*hit);
    result.cache_hit = true;
    return result;
  }
  misses_ += 1;
  const std::string owned(text);
  auto vectors = provider_.EmbedTexts(std::span<const std::string>(&owned, 1));
  if (vectors.size() != 1) throw ProviderError("provider returned wrong number of vectors");
  result.vector.values = Validate(std::move(vectors.front()), 0);
  cache_.Insert(model_id_, result.vector.text_digest, result.vector.values);
  return result;
}

std::vector<EmbeddingVector> Embedder::EmbedBatch(std::span<const std::string> texts,
                                                  int parallelism) {
  if (parallelism < 1) throw ConfigError("embedding parallelism must be at least 1");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw DataError("batch item " + std::to_string(i) + ": empty text");
  }

  std::vector<EmbeddingVector> out(texts.size());
  // digest -> indices still waiting on the provider
  std::map<std::string, std::vector<std::size_t>> pending;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out[i].model_id = model_id_;
    out[i].text_digest = TextDigest(texts[i]);
    if (auto hit = cache_.Lookup(model_id_, out[i].text_digest)) {
      hits_ += 1;
      out[i].values = std::move(*hit);
    } else {
      pending[out[i].text_digest].push_back(i);
    }
  }
  if (pending.empty()) return out;

  std::vector<std::vector<std::size_t>> chunks;  // each element: representative indices
  std::vector<std::size_t> current;
  for (const auto& [_, idx] : pending) {
    current.push_back(idx.front());
    if (current.size() == request_batch_size_) {
      chunks.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) chunks.push_back(std::move(current));

  std::atomic<std::size_t> next{0};
  std::mutex fail_mu;
  std::vector<std::pair<std::size_t, std::string>> failures;

  auto worker = [&] {
    for (std::size_t c = next++; c < chunks.size(); c = next++) {
      const auto& chunk = chunks[c];
      std::vector<std::string> batch;
      batch.reserve(chunk.size());
      for (auto i : chunk) batch.push_back(texts[i]);
      try {
        auto vectors = provider_.EmbedTexts(batch);
        if (vectors.size() != chunk.size()) {
          throw ProviderError("provider returned " + std::to_string(vectors.size()) +
                              " vectors for " + std::to_string(chunk.size()) + " inputs");
        }
        for (std::size_t j = 0; j < chunk.size(); ++j) {
          auto values = Validate(std::move(vectors[j]), chunk[j]);
          const auto& digest = out[chunk[j]].text_digest;
          cache_.Insert(model_id_, digest, values);
          for (auto i : pending.at(digest)) out[i].values = values;
          misses_ += 1;
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(fail_mu);
        for (auto i : chunk) {
          for (auto k : pending.at(out[i].text_digest)) failures.emplace_back(k, e.what());
        }
      }
    }
  };

  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism), chunks.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  }

  if (!failures.empty()) {
    std::sort(failures.begin(), failures.end());
    std::ostringstream msg;
    msg << failures.size() << " of " << texts.size() << " batch items failed";
    const std::size_t shown = std::min<std::size_t>(failures.size(), 5);
    for (std::size_t f = 0; f < shown; ++f) {
      msg << "; item " << failures[f].first << ": " << failures[f].second;
    }
    throw ProviderError(msg.str());
  }
  return out;
}

}  // namespace hintsteer
