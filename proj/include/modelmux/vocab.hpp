#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "modelmux/core.hpp"

namespace modelmux {

// Maps labels to unit-normalized embedding vectors of a fixed dimension.
// Implementations must be deterministic: same label, same vector.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> embed(const std::string& label) = 0;
};

struct TagOccurrence {
  std::string label;  // pre-normalized
  int rank = 1;       // 1-based rank within its source tag list
};

// Consolidated knowledge vocabulary. Built once, then read-only. Every
// observed raw label resolves to exactly one destination: a cluster (keyed
// by its canonical label) or the OTHER bucket.
struct Vocabulary {
  std::map<std::string, std::vector<std::string>> clusters;
  std::map<std::string, std::int64_t> frequencies;
  std::set<std::string> other_members;
  double similarity_threshold = 0.6;
  std::int64_t frequency_floor = 10;

  // Member labels map to their cluster's canonical label; everything else
  // (OTHER bucket members and never-seen labels) maps to kOtherLabel.
  std::string canonicalize(const std::string& normalized_label) const;

  // Identity vocabulary: every distinct label is its own cluster. Useful
  // when tags are already canonical (synthetic corpora, tests).
  static Vocabulary identity(const std::vector<TagOccurrence>& occurrences);

  bool operator==(const Vocabulary&) const = default;

  // Rebuilds the member -> canonical lookup. Called by builders and after
  // deserialization.
  void reindex();

 private:
  std::map<std::string, std::string> member_to_canonical_;
};

// Greedy frequency-ordered clustering. Distinct labels are processed in
// descending frequency (ties lexicographic); each label joins the cluster
// whose canonical representative is most cosine-similar, provided that
// similarity is strictly above the threshold, else it opens a new cluster.
// Clusters whose total member frequency ends up below the floor dissolve
// into the OTHER bucket. Provider failures abort the build.
Vocabulary build_vocabulary(const std::vector<TagOccurrence>& occurrences,
                            EmbeddingProvider& provider, double threshold,
                            std::int64_t floor);

double cosine_similarity(const std::vector<double>& a,
                         const std::vector<double>& b);

// Deterministic hash-derived unit vectors, plus injectable vector and
// pairwise-similarity overrides for tests.
class StubEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit StubEmbeddingProvider(std::uint64_t seed = 0, std::size_t dim = 64);

  std::vector<double> embed(const std::string& label) override;

  void set_vector(const std::string& label, std::vector<double> vec);

  // Pins embed(a).embed(b) == similarity. If `a` has no assigned vector yet
  // it gets its hash-derived one; `b` is then derived from it.
  void set_pair_similarity(const std::string& a, const std::string& b,
                           double similarity);

 private:
  std::vector<double> hash_vector(const std::string& label) const;

  std::uint64_t seed_;
  std::size_t dim_;
  std::map<std::string, std::vector<double>> overrides_;
};

std::unique_ptr<EmbeddingProvider> make_stub_provider(std::uint64_t seed = 0);

// HTTP embedding adapter (OpenAI-style /v1/embeddings body) with an
// append-only on-disk response cache keyed by label. Reads endpoint, model
// and auth from arguments; the CLI wires those from EMBED_API_URL,
// EMBED_MODEL and EMBED_API_KEY.
struct HttpEmbeddingConfig {
  std::string base_url;    // e.g. http://host:port
  std::string model;
  std::string api_key;     // optional bearer token
  std::string cache_path;  // optional JSONL cache file
  int timeout_seconds = 30;
};

std::unique_ptr<EmbeddingProvider> make_http_provider(
    const HttpEmbeddingConfig& config);

}  // namespace modelmux
