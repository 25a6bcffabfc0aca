#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace modelmux {

// Reserved bucket absorbing low-frequency and never-seen knowledge labels.
inline constexpr const char* kOtherLabel = "other";

// Default cap on tag list lengths produced by taggers.
inline constexpr int kDefaultMaxTags = 10;

class Error : public std::runtime_error {
 public:
  enum class Kind {
    InvalidLabel,
    InvalidConfig,
    InvalidQuery,
    AlphaMismatch,
    ElementUnsupported,
    EmptyPool,
    UnknownModel,
    Conflict,
    ParseError,
    RangeError,
    FormatError,
    VersionError,
    EmbeddingUnavailable,
    TaggerParseError,
    TaggerUnavailable,
    MissingTags,
    TraceError,
    EmptyInput,
  };

  Error(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

const char* error_kind_name(Error::Kind kind);

// Ordered list of canonical capability labels. Capability tags are
// constrained to this set; knowledge tags are free-form.
struct CapabilityTaxonomy {
  std::vector<std::string> names;

  // The eight capabilities the default tagging prompt defines.
  static CapabilityTaxonomy defaults();

  // Builds a taxonomy from raw labels: normalizes, requires non-empty and
  // unique entries.
  static CapabilityTaxonomy from_labels(const std::vector<std::string>& raw);

  bool contains(const std::string& normalized_label) const;
};

// Ranked tags extracted for one query. Rank 1 (index 0) is most important.
struct TagSet {
  std::vector<std::string> knowledge;
  std::vector<std::string> capabilities;

  bool operator==(const TagSet&) const = default;
};

// Raw per-trial outcomes of one model on one query.
struct EvalRecord {
  std::string model_id;
  std::string query_id;
  std::vector<double> trial_scores;  // each in [0,1]
  std::vector<double> trial_costs;   // each >= 0, currency units per call
};

// Per-(model, query) trial means.
struct EvalAggregate {
  double score = 0.0;
  double cost = 0.0;

  bool operator==(const EvalAggregate&) const = default;
};

// Arithmetic means over the record's trials.
EvalAggregate aggregate_trials(const EvalRecord& record);

struct RoutingConfig {
  double alpha = 0.5;  // rank decay, > 0
  double beta = 0.0;   // cost penalty, >= 0
  double gamma = 1.0;  // knowledge weight, >= 0
  double delta = 1.0;  // capability weight, >= 0

  // Throws InvalidConfig unless alpha > 0, beta/gamma/delta >= 0 and
  // gamma + delta > 0.
  void validate() const;
};

enum class FallbackKind {
  OtherBucket,  // element stat missing, used the model's OTHER bucket
  OverallMean,  // OTHER missing too, used the model's overall mean
  Zero,         // nothing available, contributed zero
};

const char* fallback_kind_name(FallbackKind kind);

struct FallbackUse {
  std::string element;
  FallbackKind kind;

  bool operator==(const FallbackUse&) const = default;
};

// Lowercases, trims, and collapses internal whitespace runs to single
// spaces. Throws InvalidLabel if nothing remains.
std::string normalize_label(const std::string& raw);

// Lenient tag cleanup: normalizes labels, drops duplicates (keeping the
// first occurrence), drops capability labels outside the taxonomy, and
// truncates both lists to max_tags. Problems are reported through
// `warnings` when provided, never thrown.
TagSet validate_tagset(const TagSet& tags, const CapabilityTaxonomy& taxonomy,
                       int max_tags = kDefaultMaxTags,
                       std::vector<std::string>* warnings = nullptr);

}  // namespace modelmux
