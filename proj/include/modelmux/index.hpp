#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "modelmux/core.hpp"
#include "modelmux/scoring.hpp"
#include "modelmux/vocab.hpp"

namespace modelmux {

using RecordKey = std::pair<std::string, std::string>;  // (model_id, query_id)
using RecordMap = std::map<RecordKey, EvalAggregate>;
using TagMap = std::map<std::string, TagSet>;  // query_id -> tags

// The evaluation dataset the router is profiled on: tagged queries plus
// per-(model, query) trial aggregates. Tags are canonical by the time a
// corpus exists.
struct IndexCorpus {
  TagMap queries;
  RecordMap records;
};

// Per-model element statistics over the consolidated vocabulary and the
// capability taxonomy. Immutable once built; mutations produce a new value
// with a bumped generation.
struct ScoreIndex {
  Vocabulary vocabulary;
  CapabilityTaxonomy taxonomy;
  double alpha_used = 0.5;
  std::map<std::string, ModelProfile> models;
  std::int64_t version = 1;  // generation counter, bumped by add_model/rebuild
};

// Parses evaluation-record lines (JSONL, fields model_id / query_id /
// trial_scores / trial_costs) and averages trials per (model, query).
// Duplicate keys pool their trials before averaging. Malformed lines throw
// ParseError with the line number; out-of-range values throw RangeError.
RecordMap ingest_records(std::istream& in);

// Parses tag lines (JSONL, fields query_id / knowledge / capabilities),
// normalizing and validating each tag set. Duplicate query ids are an
// error.
TagMap load_tags(std::istream& in, const CapabilityTaxonomy& taxonomy,
                 int max_tags = kDefaultMaxTags);

// Flattens tag knowledge lists into (label, rank) occurrences for
// vocabulary building.
std::vector<TagOccurrence> knowledge_occurrences(const TagMap& tags);

// Canonicalizes raw tags through the vocabulary and pairs them with the
// records. Records referencing an untagged query are an error.
IndexCorpus make_corpus(const TagMap& raw_tags, const RecordMap& records,
                        const Vocabulary& vocab);

ScoreIndex build_index(const IndexCorpus& corpus, Vocabulary vocabulary,
                       CapabilityTaxonomy taxonomy, double alpha,
                       std::vector<std::string>* warnings = nullptr);

// Integrates one new model from its record slice without recomputing any
// existing profile. Queries must already carry canonical tags; a subset of
// the corpus is fine. Throws Conflict when the id is already present.
ScoreIndex add_model(const ScoreIndex& index, const std::string& model_id,
                     const std::map<std::string, EvalAggregate>& model_records,
                     const TagMap& queries);

// Routing against an index: canonicalizes the query's knowledge tags,
// validates capabilities, and runs the scoring argmax over the pool (empty
// pool means every indexed model). Refuses a config alpha differing from
// alpha_used unless explicitly allowed.
RoutingDecision route_query(const ScoreIndex& index, const TagSet& tags,
                            const RoutingConfig& config,
                            const std::vector<std::string>& pool = {},
                            bool allow_alpha_mismatch = false);

// Canonical tag view used by route_query, exposed for callers that need
// the tags a decision was made with.
TagSet canonical_tags(const ScoreIndex& index, const TagSet& tags);

// Text persistence: single JSON document, sorted keys, doubles with 17
// significant digits. Stable bytes for identical indexes.
std::string serialize_index(const ScoreIndex& index);
std::string serialize_model_profile(const ModelProfile& profile);
ScoreIndex deserialize_index(const std::string& text);

void save_index(const ScoreIndex& index, const std::string& path);
ScoreIndex load_index(const std::string& path);

}  // namespace modelmux
