#include "modelmux/index.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "modelmux/util.hpp"

namespace modelmux {

namespace {

using nlohmann::json;

constexpr std::int64_t kIndexFormatVersion = 1;

json parse_line(const std::string& line, std::size_t line_no) {
  json parsed = json::parse(line, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw Error(Error::Kind::ParseError,
                "line " + std::to_string(line_no) + ": not a JSON object");
  }
  return parsed;
}

std::string require_string(const json& obj, const char* field,
                           std::size_t line_no) {
  if (!obj.contains(field) || !obj[field].is_string()) {
    throw Error(Error::Kind::ParseError,
                "line " + std::to_string(line_no) + ": missing string field '" +
                    field + "'");
  }
  return obj[field].get<std::string>();
}

std::vector<double> require_number_list(const json& obj, const char* field,
                                        std::size_t line_no) {
  if (!obj.contains(field) || !obj[field].is_array()) {
    throw Error(Error::Kind::ParseError,
                "line " + std::to_string(line_no) + ": missing array field '" +
                    field + "'");
  }
  std::vector<double> out;
  for (const auto& v : obj[field]) {
    if (!v.is_number()) {
      throw Error(Error::Kind::ParseError,
                  "line " + std::to_string(line_no) + ": non-numeric entry in '" +
                      field + "'");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<std::string> require_string_list(const json& obj,
                                             const char* field,
                                             std::size_t line_no) {
  if (!obj.contains(field) || !obj[field].is_array()) {
    throw Error(Error::Kind::ParseError,
                "line " + std::to_string(line_no) + ": missing array field '" +
                    field + "'");
  }
  std::vector<std::string> out;
  for (const auto& v : obj[field]) {
    if (!v.is_string()) {
      throw Error(Error::Kind::ParseError,
                  "line " + std::to_string(line_no) + ": non-string entry in '" +
                      field + "'");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

RecordMap ingest_records(std::istream& in) {
  // Trials are pooled per (model, query) across duplicate lines, then
  // averaged once at the end.
  std::map<RecordKey, EvalRecord> pooled;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj = parse_line(line, line_no);
    EvalRecord record;
    record.model_id = require_string(obj, "model_id", line_no);
    record.query_id = require_string(obj, "query_id", line_no);
    record.trial_scores = require_number_list(obj, "trial_scores", line_no);
    record.trial_costs = require_number_list(obj, "trial_costs", line_no);
    if (record.trial_scores.empty()) {
      throw Error(Error::Kind::ParseError,
                  "line " + std::to_string(line_no) + ": trial_scores is empty");
    }
    if (record.trial_costs.size() != record.trial_scores.size()) {
      throw Error(Error::Kind::ParseError,
                  "line " + std::to_string(line_no) +
                      ": trial_costs length differs from trial_scores");
    }
    for (double s : record.trial_scores) {
      if (s < 0.0 || s > 1.0) {
        throw Error(Error::Kind::RangeError,
                    "line " + std::to_string(line_no) + ": trial score " +
                        format_double(s) + " outside [0,1]");
      }
    }
    for (double c : record.trial_costs) {
      if (c < 0.0) {
        throw Error(Error::Kind::RangeError,
                    "line " + std::to_string(line_no) + ": negative trial cost");
      }
    }
    RecordKey key{record.model_id, record.query_id};
    auto it = pooled.find(key);
    if (it == pooled.end()) {
      pooled.emplace(std::move(key), std::move(record));
    } else {
      auto& existing = it->second;
      existing.trial_scores.insert(existing.trial_scores.end(),
                                   record.trial_scores.begin(),
                                   record.trial_scores.end());
      existing.trial_costs.insert(existing.trial_costs.end(),
                                  record.trial_costs.begin(),
                                  record.trial_costs.end());
    }
  }
  RecordMap out;
  for (const auto& [key, record] : pooled) {
    out.emplace(key, aggregate_trials(record));
  }
  return out;
}

TagMap load_tags(std::istream& in, const CapabilityTaxonomy& taxonomy,
                 int max_tags) {
  TagMap out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj = parse_line(line, line_no);
    std::string query_id = require_string(obj, "query_id", line_no);
    TagSet raw;
    raw.knowledge = require_string_list(obj, "knowledge", line_no);
    raw.capabilities = require_string_list(obj, "capabilities", line_no);
    if (out.count(query_id) > 0) {
      throw Error(Error::Kind::ParseError,
                  "line " + std::to_string(line_no) + ": duplicate query_id '" +
                      query_id + "'");
    }
    out.emplace(std::move(query_id),
                validate_tagset(raw, taxonomy, max_tags));
  }
  return out;
}

std::vector<TagOccurrence> knowledge_occurrences(const TagMap& tags) {
  std::vector<TagOccurrence> out;
  for (const auto& [query_id, tag_set] : tags) {
    (void)query_id;
    for (std::size_t j = 0; j < tag_set.knowledge.size(); ++j) {
      out.push_back(TagOccurrence{tag_set.knowledge[j],
                                  static_cast<int>(j + 1)});
    }
  }
  return out;
}

IndexCorpus make_corpus(const TagMap& raw_tags, const RecordMap& records,
                        const Vocabulary& vocab) {
  IndexCorpus corpus;
  for (const auto& [query_id, tags] : raw_tags) {
    TagSet canonical;
    canonical.capabilities = tags.capabilities;
    canonical.knowledge.reserve(tags.knowledge.size());
    for (const auto& label : tags.knowledge) {
      canonical.knowledge.push_back(vocab.canonicalize(label));
    }
    corpus.queries.emplace(query_id, std::move(canonical));
  }
  for (const auto& [key, agg] : records) {
    if (corpus.queries.find(key.second) == corpus.queries.end()) {
      throw Error(Error::Kind::MissingTags,
                  "record for model '" + key.first +
                      "' references untagged query '" + key.second + "'");
    }
    corpus.records.emplace(key, agg);
  }
  return corpus;
}

namespace {

// Accumulates one model's element statistics from its record slice. Both
// full builds and incremental additions run through here, so an
// incrementally added model is bit-identical to a from-scratch build.
ModelProfile build_model_profile(
    const std::map<std::string, EvalAggregate>& model_records,
    const TagMap& queries, double alpha) {
  // element -> list of per-query (score_part, cost_part)
  std::map<std::string, std::vector<std::pair<double, double>>> knowledge_parts;
  std::map<std::string, std::vector<std::pair<double, double>>> capability_parts;

  ModelProfile profile;
  double score_sum = 0.0;
  double cost_sum = 0.0;
  for (const auto& [query_id, agg] : model_records) {
    auto tag_it = queries.find(query_id);
    if (tag_it == queries.end()) {
      throw Error(Error::Kind::MissingTags,
                  "no tags for query '" + query_id + "'");
    }
    const TagSet& tags = tag_it->second;
    score_sum += agg.score;
    cost_sum += agg.cost;
    ++profile.record_count;

    auto accumulate = [&agg](const std::vector<std::string>& list, double a,
                             auto& parts) {
      if (list.empty()) return;
      const auto weights = rank_weights(a, list.size());
      std::map<std::string, double> weight_sums;
      for (std::size_t j = 0; j < list.size(); ++j) {
        weight_sums[list[j]] += weights[j];
      }
      for (const auto& [element, wsum] : weight_sums) {
        parts[element].emplace_back(agg.score * wsum, agg.cost * wsum);
      }
    };
    accumulate(tags.knowledge, alpha, knowledge_parts);
    accumulate(tags.capabilities, alpha, capability_parts);
  }

  if (profile.record_count > 0) {
    profile.overall_mean_score = score_sum / profile.record_count;
    profile.overall_mean_cost = cost_sum / profile.record_count;
  }
  for (const auto& [element, parts] : knowledge_parts) {
    profile.knowledge_stats.emplace(element, aggregate_element(parts));
  }
  for (const auto& [element, parts] : capability_parts) {
    profile.capability_stats.emplace(element, aggregate_element(parts));
  }
  return profile;
}

}  // namespace

ScoreIndex build_index(const IndexCorpus& corpus, Vocabulary vocabulary,
                       CapabilityTaxonomy taxonomy, double alpha,
                       std::vector<std::string>* warnings) {
  if (!(alpha > 0.0)) {
    throw Error(Error::Kind::InvalidConfig, "alpha must be > 0");
  }
  if (corpus.records.empty()) {
    throw Error(Error::Kind::EmptyInput, "corpus has no evaluation records");
  }

  // Slice records per model; map iteration keeps everything sorted.
  std::map<std::string, std::map<std::string, EvalAggregate>> slices;
  for (const auto& [key, agg] : corpus.records) {
    slices[key.first].emplace(key.second, agg);
  }

  ScoreIndex index;
  index.vocabulary = std::move(vocabulary);
  index.vocabulary.reindex();
  index.taxonomy = std::move(taxonomy);
  index.alpha_used = alpha;
  index.version = 1;
  for (const auto& [model_id, model_records] : slices) {
    if (model_records.empty()) {
      if (warnings) warnings->push_back("model '" + model_id + "' has no records; skipped");
      continue;
    }
    ModelProfile profile =
        build_model_profile(model_records, corpus.queries, alpha);
    if (profile.knowledge_stats.empty() && profile.capability_stats.empty() &&
        warnings) {
      warnings->push_back("model '" + model_id +
                          "' has records but no tagged elements");
    }
    index.models.emplace(model_id, std::move(profile));
  }
  return index;
}

ScoreIndex add_model(const ScoreIndex& index, const std::string& model_id,
                     const std::map<std::string, EvalAggregate>& model_records,
                     const TagMap& queries) {
  if (index.models.count(model_id) > 0) {
    throw Error(Error::Kind::Conflict,
                "model '" + model_id + "' already present in index");
  }
  if (model_records.empty()) {
    throw Error(Error::Kind::EmptyInput,
                "no records supplied for model '" + model_id + "'");
  }
  ScoreIndex next = index;
  next.models.emplace(
      model_id, build_model_profile(model_records, queries, index.alpha_used));
  next.version = index.version + 1;
  return next;
}

TagSet canonical_tags(const ScoreIndex& index, const TagSet& tags) {
  TagSet cleaned = validate_tagset(tags, index.taxonomy);
  TagSet canonical;
  canonical.capabilities = std::move(cleaned.capabilities);
  canonical.knowledge.reserve(cleaned.knowledge.size());
  for (const auto& label : cleaned.knowledge) {
    canonical.knowledge.push_back(index.vocabulary.canonicalize(label));
  }
  return canonical;
}

RoutingDecision route_query(const ScoreIndex& index, const TagSet& tags,
                            const RoutingConfig& config,
                            const std::vector<std::string>& pool,
                            bool allow_alpha_mismatch) {
  config.validate();
  if (config.alpha != index.alpha_used && !allow_alpha_mismatch) {
    throw Error(Error::Kind::AlphaMismatch,
                "config alpha " + format_double(config.alpha) +
                    " differs from index alpha " +
                    format_double(index.alpha_used));
  }
  std::vector<std::string> effective_pool = pool;
  if (effective_pool.empty()) {
    for (const auto& [model_id, profile] : index.models) {
      (void)profile;
      effective_pool.push_back(model_id);
    }
  }
  return route(index.models, canonical_tags(index, tags), config,
               effective_pool);
}

// ---------------------------------------------------------------------------
// Persistence. Hand-rolled writer so bytes are stable: sorted keys, two-space
// indent, doubles via format_double.
// ---------------------------------------------------------------------------

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  return out;
}

class Writer {
 public:
  void open_object() { emit("{"); ++depth_; first_.push_back(true); }
  void close_object() {
    --depth_;
    first_.pop_back();
    out_ += "\n";
    indent();
    out_ += "}";
  }

  void key(const std::string& name) {
    comma_newline();
    out_ += "\"" + json_escape(name) + "\": ";
  }

  void value_string(const std::string& v) { out_ += "\"" + json_escape(v) + "\""; }
  void value_double(double v) { out_ += format_double(v); }
  void value_int(std::int64_t v) { out_ += std::to_string(v); }

  void string_array(const std::vector<std::string>& items) {
    out_ += "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i > 0) out_ += ", ";
      out_ += "\"" + json_escape(items[i]) + "\"";
    }
    out_ += "]";
  }

  std::string take() { return std::move(out_); }

 private:
  void comma_newline() {
    if (!first_.back()) out_ += ",";
    first_.back() = false;
    out_ += "\n";
    indent();
  }
  void indent() { out_.append(2 * static_cast<std::size_t>(depth_), ' '); }
  void emit(const char* s) { out_ += s; }

  std::string out_;
  int depth_ = 0;
  std::vector<bool> first_;
};

void write_stats(Writer& w, const ElementStatMap& stats) {
  w.open_object();
  for (const auto& [element, stat] : stats) {
    w.key(element);
    w.open_object();
    w.key("cost_agg");
    w.value_double(stat.cost_agg);
    w.key("score_agg");
    w.value_double(stat.score_agg);
    w.key("support");
    w.value_int(stat.support);
    w.close_object();
  }
  w.close_object();
}

void write_profile(Writer& w, const ModelProfile& profile) {
  w.open_object();
  w.key("capability_stats");
  write_stats(w, profile.capability_stats);
  w.key("knowledge_stats");
  write_stats(w, profile.knowledge_stats);
  w.key("overall_mean_cost");
  w.value_double(profile.overall_mean_cost);
  w.key("overall_mean_score");
  w.value_double(profile.overall_mean_score);
  w.key("record_count");
  w.value_int(profile.record_count);
  w.close_object();
}

ElementStat read_stat(const json& obj) {
  if (!obj.is_object() || !obj.contains("score_agg") ||
      !obj.contains("cost_agg") || !obj.contains("support")) {
    throw Error(Error::Kind::FormatError, "malformed element stat");
  }
  ElementStat stat;
  stat.score_agg = obj["score_agg"].get<double>();
  stat.cost_agg = obj["cost_agg"].get<double>();
  stat.support = obj["support"].get<std::int64_t>();
  return stat;
}

}  // namespace

std::string serialize_model_profile(const ModelProfile& profile) {
  Writer w;
  write_profile(w, profile);
  return w.take();
}

std::string serialize_index(const ScoreIndex& index) {
  Writer w;
  w.open_object();
  w.key("alpha_used");
  w.value_double(index.alpha_used);
  w.key("generation");
  w.value_int(index.version);
  w.key("models");
  w.open_object();
  for (const auto& [model_id, profile] : index.models) {
    w.key(model_id);
    write_profile(w, profile);
  }
  w.close_object();
  w.key("taxonomy");
  w.string_array(index.taxonomy.names);
  w.key("version");
  w.value_int(kIndexFormatVersion);
  w.key("vocabulary");
  w.open_object();
  w.key("clusters");
  w.open_object();
  for (const auto& [canonical, members] : index.vocabulary.clusters) {
    w.key(canonical);
    w.string_array(members);
  }
  w.close_object();
  w.key("frequencies");
  w.open_object();
  for (const auto& [label, freq] : index.vocabulary.frequencies) {
    w.key(label);
    w.value_int(freq);
  }
  w.close_object();
  w.key("frequency_floor");
  w.value_int(index.vocabulary.frequency_floor);
  w.key("other_members");
  w.string_array(std::vector<std::string>(index.vocabulary.other_members.begin(),
                                          index.vocabulary.other_members.end()));
  w.key("similarity_threshold");
  w.value_double(index.vocabulary.similarity_threshold);
  w.close_object();
  w.close_object();
  std::string out = w.take();
  out += "\n";
  return out;
}

ScoreIndex deserialize_index(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(Error::Kind::FormatError, "index file is not valid JSON");
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    throw Error(Error::Kind::FormatError, "index file lacks a version field");
  }
  const auto version = doc["version"].get<std::int64_t>();
  if (version != kIndexFormatVersion) {
    throw Error(Error::Kind::VersionError,
                "unsupported index format version " + std::to_string(version));
  }
  try {
    ScoreIndex index;
    index.alpha_used = doc.at("alpha_used").get<double>();
    index.version = doc.at("generation").get<std::int64_t>();
    index.taxonomy.names =
        doc.at("taxonomy").get<std::vector<std::string>>();
    const auto& vocab = doc.at("vocabulary");
    for (const auto& [canonical, members] : vocab.at("clusters").items()) {
      index.vocabulary.clusters[canonical] =
          members.get<std::vector<std::string>>();
    }
    for (const auto& [label, freq] : vocab.at("frequencies").items()) {
      index.vocabulary.frequencies[label] = freq.get<std::int64_t>();
    }
    for (const auto& member :
         vocab.at("other_members").get<std::vector<std::string>>()) {
      index.vocabulary.other_members.insert(member);
    }
    index.vocabulary.frequency_floor =
        vocab.at("frequency_floor").get<std::int64_t>();
    index.vocabulary.similarity_threshold =
        vocab.at("similarity_threshold").get<double>();
    index.vocabulary.reindex();
    for (const auto& [model_id, profile_json] : doc.at("models").items()) {
      ModelProfile profile;
      for (const auto& [element, stat] :
           profile_json.at("knowledge_stats").items()) {
        profile.knowledge_stats.emplace(element, read_stat(stat));
      }
      for (const auto& [element, stat] :
           profile_json.at("capability_stats").items()) {
        profile.capability_stats.emplace(element, read_stat(stat));
      }
      profile.overall_mean_score =
          profile_json.at("overall_mean_score").get<double>();
      profile.overall_mean_cost =
          profile_json.at("overall_mean_cost").get<double>();
      profile.record_count = profile_json.at("record_count").get<std::int64_t>();
      index.models.emplace(model_id, std::move(profile));
    }
    return index;
  } catch (const json::exception& e) {
    throw Error(Error::Kind::FormatError,
                std::string("malformed index file: ") + e.what());
  }
}

void save_index(const ScoreIndex& index, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(Error::Kind::FormatError, "cannot open for writing: " + path);
  }
  out << serialize_index(index);
}

ScoreIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(Error::Kind::FormatError, "cannot open index file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_index(buf.str());
}

}  // namespace modelmux
