#include <algorithm>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hintsteer/embedding.hpp"
#include "hintsteer/error.hpp"

namespace hintsteer {

namespace {

bool RetryableStatus(int status) {
  return status == 408 || status == 429 || status == 500 || status == 502 || status == 503 ||
         status == 504;
}

}  // namespace

RemoteProvider::RemoteProvider(RemoteProviderConfig config) : config_(std::move(config)) {
  if (config_.model_id.empty()) throw ConfigError("remote provider needs a model id");
  const auto& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("embedding endpoint must be an http(s) URL: '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (config_.retry.max_attempts < 1) config_.retry.max_attempts = 1;
  if (!config_.retry.sleep) {
    config_.retry.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::optional<std::size_t> RemoteProvider::Dimension() const {
  std::lock_guard lock(dim_mu_);
  return observed_dim_;
}

std::vector<std::vector<double>> RemoteProvider::EmbedTexts(std::span<const std::string> texts) {
  if (texts.empty()) return {};
  const nlohmann::json body = {{"model", config_.model_id},
                               {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  auto backoff = config_.retry.initial_backoff;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);

    auto res = client.Post(path_, headers, payload, "application/json");
    bool retry = false;
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      retry = true;
    } else if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
      retry = RetryableStatus(res->status);
    } else {
      std::vector<std::vector<double>> out(texts.size());
      std::vector<bool> filled(texts.size(), false);
      try {
        const auto doc = nlohmann::json::parse(res->body);
        for (const auto& item : doc.at("data")) {
          const auto index = item.at("index").get<std::size_t>();
          if (index >= texts.size() || filled[index]) {
            throw ProviderError("response carries bad or repeated index " + std::to_string(index));
          }
          out[index] = item.at("embedding").get<std::vector<double>>();
          filled[index] = true;
        }
      } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("malformed embeddings response: ") + e.what());
      }
      if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
        throw ProviderError("embeddings response is missing items");
      }
      std::lock_guard lock(dim_mu_);
      for (const auto& v : out) {
        if (observed_dim_ && *observed_dim_ != v.size()) {
          throw ProviderError("model '" + config_.model_id + "' changed dimension from " +
                              std::to_string(*observed_dim_) + " to " + std::to_string(v.size()));
        }
        observed_dim_ = v.size();
      }
      return out;
    }
    if (!retry) break;
    if (attempt < config_.retry.max_attempts) {
      config_.retry.sleep(backoff);
      backoff *= 2;
    }
  }
  throw ProviderError("embedding request to " + config_.endpoint + " failed: " + last_error);
}

}  // namespace hintsteer
