#include <cmath>
#include <fstream>
#include <mutex>

#include "httplib.h"
#include "json.hpp"
#include "modelmux/vocab.hpp"

namespace modelmux {

namespace {

using nlohmann::json;

class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(HttpEmbeddingConfig config)
      : config_(std::move(config)) {
    if (config_.base_url.empty()) {
      throw Error(Error::Kind::EmbeddingUnavailable,
                  "embedding endpoint not configured");
    }
    if (!config_.cache_path.empty()) load_cache();
  }

  std::vector<double> embed(const std::string& label) override {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = cache_.find(label);
      if (it != cache_.end()) return it->second;
    }
    std::vector<double> vec = fetch(label);
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, inserted] = cache_.emplace(label, std::move(vec));
    if (inserted && !config_.cache_path.empty()) {
      append_cache_line(label, it->second);
    }
    return it->second;
  }

 private:
  void load_cache() {
    std::ifstream in(config_.cache_path);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json entry = json::parse(line, nullptr, false);
      if (entry.is_discarded() || !entry.contains("label") ||
          !entry.contains("vector")) {
        continue;  // tolerate a torn trailing line
      }
      cache_[entry["label"].get<std::string>()] =
          entry["vector"].get<std::vector<double>>();
    }
  }

  void append_cache_line(const std::string& label,
                         const std::vector<double>& vec) {
    std::ofstream out(config_.cache_path, std::ios::app);
    out << json{{"label", label}, {"vector", vec}}.dump() << "\n";
  }

  std::vector<double> fetch(const std::string& label) {
    httplib::Client client(config_.base_url);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    json body = {{"model", config_.model}, {"input", label}};
    auto res =
        client.Post("/v1/embeddings", headers, body.dump(), "application/json");
    if (!res || res->status != 200) {
      throw Error(Error::Kind::EmbeddingUnavailable,
                  "embedding request failed for '" + label + "'" +
                      (res ? " (status " + std::to_string(res->status) + ")"
                           : " (no response)"));
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("data") ||
        parsed["data"].empty() || !parsed["data"][0].contains("embedding")) {
      throw Error(Error::Kind::EmbeddingUnavailable,
                  "malformed embedding response for '" + label + "'");
    }
    auto vec = parsed["data"][0]["embedding"].get<std::vector<double>>();
    double norm_sq = 0.0;
    for (double v : vec) norm_sq += v * v;
    if (norm_sq <= 0.0) {
      throw Error(Error::Kind::EmbeddingUnavailable,
                  "zero embedding for '" + label + "'");
    }
    const double norm = std::sqrt(norm_sq);
    for (auto& v : vec) v /= norm;
    return vec;
  }

  HttpEmbeddingConfig config_;
  std::mutex mutex_;
  std::map<std::string, std::vector<double>> cache_;
};

}  // namespace

std::unique_ptr<EmbeddingProvider> make_http_provider(
    const HttpEmbeddingConfig& config) {
  return std::make_unique<HttpEmbeddingProvider>(config);
}

}  // namespace modelmux
