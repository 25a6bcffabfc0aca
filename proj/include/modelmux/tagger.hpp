#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "modelmux/core.hpp"

namespace modelmux {

struct TagResult {
  TagSet tags;
  double tagging_cost = 0.0;
};

// Produces ranked tags for a query. `query` is the query text for live
// taggers; the file-backed tagger matches it against query ids instead.
class TaggerClient {
 public:
  virtual ~TaggerClient() = default;
  virtual TagResult tag(const std::string& query) = 0;
};

std::string render_prompt(const std::string& query_text);

TagSet parse_tagger_response(const std::string& raw,
                             const CapabilityTaxonomy& taxonomy);

struct KeywordRule {
  std::string pattern;  // case-insensitive substring
  TagSet tags;
};

// First matching rule wins; no match falls back to knowledge [other] and
// the taxonomy's first capability. Cost is always zero.
std::unique_ptr<TaggerClient> keyword_stub_tagger(std::vector<KeywordRule> rules,
                                                  CapabilityTaxonomy taxonomy);

// Replays precomputed tags keyed by query id. Unknown id is an error, never
// a silent default.
std::unique_ptr<TaggerClient> file_tagger(std::map<std::string, TagSet> tags,
                                          double cost_per_call = 0.0);
std::unique_ptr<TaggerClient> file_tagger_from_path(
    const std::string& path, const CapabilityTaxonomy& taxonomy,
    double cost_per_call = 0.0);

struct HttpTaggerConfig {
  std::string base_url;
  std::string model;
  std::string api_key;         // optional bearer token
  std::string transcript_path; // optional JSONL request/response log
  double cost_per_call = 0.0;
  int timeout_seconds = 60;
};

// Chat-completion adapter. Retries once on a malformed response with a
// format reminder appended, then fails.
std::unique_ptr<TaggerClient> make_http_tagger(HttpTaggerConfig config,
                                               CapabilityTaxonomy taxonomy);

}  // namespace modelmux
