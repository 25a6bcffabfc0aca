#include <fstream>
#include <mutex>

#include "httplib.h"
#include "json.hpp"
#include "modelmux/tagger.hpp"

namespace modelmux {

namespace {

using nlohmann::json;

const char* kFormatReminder =
    "\n\nYour previous answer could not be parsed. Reply with exactly one "
    "line starting with \"Capabilities:\" followed by a comma-separated "
    "list, then a line \"Knowledge:\" followed by a numbered list, one "
    "domain per line.";

class HttpTagger : public TaggerClient {
 public:
  HttpTagger(HttpTaggerConfig config, CapabilityTaxonomy taxonomy)
      : config_(std::move(config)), taxonomy_(std::move(taxonomy)) {}

  TagResult tag(const std::string& query) override {
    std::string prompt = render_prompt(query);
    std::string response = complete(prompt, query, 1);
    try {
      return TagResult{parse_tagger_response(response, taxonomy_),
                       config_.cost_per_call};
    } catch (const Error& e) {
      if (e.kind() != Error::Kind::TaggerParseError) throw;
    }
    response = complete(prompt + kFormatReminder, query, 2);
    return TagResult{parse_tagger_response(response, taxonomy_),
                     config_.cost_per_call};
  }

 private:
  std::string complete(const std::string& prompt, const std::string& query,
                       int attempt) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    json body = {
        {"model", config_.model},
        {"temperature", 0},
        {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
    };
    auto res = client.Post("/v1/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res || res->status != 200) {
      throw Error(Error::Kind::TaggerUnavailable,
                  "tagger request failed" +
                      (res ? " with status " + std::to_string(res->status)
                           : std::string(" (no response)")));
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("choices") ||
        parsed["choices"].empty() ||
        !parsed["choices"][0].contains("message")) {
      throw Error(Error::Kind::TaggerUnavailable,
                  "tagger returned an unexpected payload");
    }
    std::string content =
        parsed["choices"][0]["message"].value("content", std::string());
    record(query, prompt, content, attempt);
    return content;
  }

  void record(const std::string& query, const std::string& prompt,
              const std::string& response, int attempt) {
    if (config_.transcript_path.empty()) return;
    json line = {{"query", query},
                 {"prompt", prompt},
                 {"response", response},
                 {"attempt", attempt},
                 {"cost", config_.cost_per_call}};
    std::lock_guard<std::mutex> lock(transcript_mutex_);
    std::ofstream out(config_.transcript_path, std::ios::app);
    if (out) out << line.dump() << "\n";
  }

  HttpTaggerConfig config_;
  CapabilityTaxonomy taxonomy_;
  std::mutex transcript_mutex_;
};

}  // namespace

std::unique_ptr<TaggerClient> make_http_tagger(HttpTaggerConfig config,
                                               CapabilityTaxonomy taxonomy) {
  if (config.base_url.empty()) {
    throw Error(Error::Kind::InvalidConfig, "tagger base url is empty");
  }
  return std::make_unique<HttpTagger>(std::move(config), std::move(taxonomy));
}

}  // namespace modelmux
