#include "modelmux/core.hpp"

#include <cctype>
#include <cstdio>
#include <set>

#include "modelmux/util.hpp"

namespace modelmux {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* error_kind_name(Error::Kind kind) {
  switch (kind) {
    case Error::Kind::InvalidLabel: return "InvalidLabel";
    case Error::Kind::InvalidConfig: return "InvalidConfig";
    case Error::Kind::InvalidQuery: return "InvalidQuery";
    case Error::Kind::AlphaMismatch: return "AlphaMismatch";
    case Error::Kind::ElementUnsupported: return "ElementUnsupported";
    case Error::Kind::EmptyPool: return "EmptyPool";
    case Error::Kind::UnknownModel: return "UnknownModel";
    case Error::Kind::Conflict: return "Conflict";
    case Error::Kind::ParseError: return "ParseError";
    case Error::Kind::RangeError: return "RangeError";
    case Error::Kind::FormatError: return "FormatError";
    case Error::Kind::VersionError: return "VersionError";
    case Error::Kind::EmbeddingUnavailable: return "EmbeddingUnavailable";
    case Error::Kind::TaggerParseError: return "TaggerParseError";
    case Error::Kind::TaggerUnavailable: return "TaggerUnavailable";
    case Error::Kind::MissingTags: return "MissingTags";
    case Error::Kind::TraceError: return "TraceError";
    case Error::Kind::EmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

const char* fallback_kind_name(FallbackKind kind) {
  switch (kind) {
    case FallbackKind::OtherBucket: return "other_bucket";
    case FallbackKind::OverallMean: return "overall_mean";
    case FallbackKind::Zero: return "zero";
  }
  return "unknown";
}

std::string normalize_label(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  if (out.empty()) {
    throw Error(Error::Kind::InvalidLabel, "label is empty after trimming");
  }
  return out;
}

CapabilityTaxonomy CapabilityTaxonomy::defaults() {
  return CapabilityTaxonomy{{
      "reasoning",
      "comprehension",
      "instruction following",
      "agentic",
      "knowledge retrieval",
      "coding",
      "in-context learning",
      "multilingual",
  }};
}

CapabilityTaxonomy CapabilityTaxonomy::from_labels(
    const std::vector<std::string>& raw) {
  CapabilityTaxonomy taxonomy;
  std::set<std::string> seen;
  for (const auto& label : raw) {
    std::string norm = normalize_label(label);
    if (!seen.insert(norm).second) {
      throw Error(Error::Kind::InvalidConfig,
                  "duplicate capability label: " + norm);
    }
    taxonomy.names.push_back(std::move(norm));
  }
  if (taxonomy.names.empty()) {
    throw Error(Error::Kind::InvalidConfig, "capability taxonomy is empty");
  }
  return taxonomy;
}

bool CapabilityTaxonomy::contains(const std::string& normalized_label) const {
  for (const auto& name : names) {
    if (name == normalized_label) return true;
  }
  return false;
}

EvalAggregate aggregate_trials(const EvalRecord& record) {
  if (record.trial_scores.empty()) {
    throw Error(Error::Kind::InvalidConfig,
                "record has no trials: " + record.model_id + "/" +
                    record.query_id);
  }
  if (record.trial_costs.size() != record.trial_scores.size()) {
    throw Error(Error::Kind::InvalidConfig,
                "trial_costs length differs from trial_scores: " +
                    record.model_id + "/" + record.query_id);
  }
  double score_sum = 0.0;
  double cost_sum = 0.0;
  for (double s : record.trial_scores) {
    if (s < 0.0 || s > 1.0) {
      throw Error(Error::Kind::RangeError,
                  "trial score outside [0,1]: " + record.model_id + "/" +
                      record.query_id);
    }
    score_sum += s;
  }
  for (double c : record.trial_costs) {
    if (c < 0.0) {
      throw Error(Error::Kind::RangeError,
                  "negative trial cost: " + record.model_id + "/" +
                      record.query_id);
    }
    cost_sum += c;
  }
  const double k = static_cast<double>(record.trial_scores.size());
  return EvalAggregate{score_sum / k, cost_sum / k};
}

void RoutingConfig::validate() const {
  if (!(alpha > 0.0)) {
    throw Error(Error::Kind::InvalidConfig, "alpha must be > 0");
  }
  if (beta < 0.0) {
    throw Error(Error::Kind::InvalidConfig, "beta must be >= 0");
  }
  if (gamma < 0.0 || delta < 0.0) {
    throw Error(Error::Kind::InvalidConfig, "gamma and delta must be >= 0");
  }
  if (!(gamma + delta > 0.0)) {
    throw Error(Error::Kind::InvalidConfig, "gamma + delta must be > 0");
  }
}

namespace {

void append_clean(std::vector<std::string>& out, std::set<std::string>& seen,
                  const std::string& raw, std::vector<std::string>* warnings,
                  const char* list_name) {
  std::string norm;
  try {
    norm = normalize_label(raw);
  } catch (const Error&) {
    if (warnings) {
      warnings->push_back(std::string("dropped empty ") + list_name +
                          " label");
    }
    return;
  }
  if (!seen.insert(norm).second) {
    if (warnings) {
      warnings->push_back(std::string("dropped duplicate ") + list_name +
                          " label: " + norm);
    }
    return;
  }
  out.push_back(std::move(norm));
}

}  // namespace

TagSet validate_tagset(const TagSet& tags, const CapabilityTaxonomy& taxonomy,
                       int max_tags, std::vector<std::string>* warnings) {
  TagSet out;
  std::set<std::string> seen_knowledge;
  for (const auto& raw : tags.knowledge) {
    append_clean(out.knowledge, seen_knowledge, raw, warnings, "knowledge");
  }
  std::set<std::string> seen_caps;
  std::vector<std::string> caps;
  for (const auto& raw : tags.capabilities) {
    append_clean(caps, seen_caps, raw, warnings, "capability");
  }
  for (auto& cap : caps) {
    if (!taxonomy.contains(cap)) {
      if (warnings) {
        warnings->push_back("dropped unknown capability: " + cap);
      }
      continue;
    }
    out.capabilities.push_back(std::move(cap));
  }
  if (max_tags >= 0) {
    const auto cap_len = static_cast<std::size_t>(max_tags);
    if (out.knowledge.size() > cap_len) {
      if (warnings) warnings->push_back("knowledge list truncated");
      out.knowledge.resize(cap_len);
    }
    if (out.capabilities.size() > cap_len) {
      if (warnings) warnings->push_back("capability list truncated");
      out.capabilities.resize(cap_len);
    }
  }
  return out;
}

}  // namespace modelmux
