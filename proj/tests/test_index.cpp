#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "modelmux/index.hpp"
#include "modelmux/util.hpp"
#include "oracle.hpp"

using namespace modelmux;

namespace {

RecordMap ingest(const std::string& text) {
  std::istringstream in(text);
  return ingest_records(in);
}

TagMap tags_of(const std::string& text) {
  std::istringstream in(text);
  return load_tags(in, CapabilityTaxonomy::defaults());
}

TagMap simple_tags(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& rows) {
  TagMap tags;
  for (const auto& [query_id, knowledge] : rows) {
    TagSet t;
    t.knowledge = knowledge;
    tags[query_id] = t;
  }
  return tags;
}

ScoreIndex build_simple(const TagMap& tags, const RecordMap& records,
                        double alpha) {
  auto vocab = Vocabulary::identity(knowledge_occurrences(tags));
  auto corpus = make_corpus(tags, records, vocab);
  return build_index(corpus, vocab, CapabilityTaxonomy::defaults(), alpha);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("ingest_records averages trials per record") {
  auto records = ingest(
      R"({"model_id": "m1", "query_id": "q1", "trial_scores": [1, 0, 1, 1], "trial_costs": [0.02, 0.02, 0.02, 0.02]})"
      "\n");
  REQUIRE(records.size() == 1);
  auto agg = records.at({"m1", "q1"});
  CHECK(agg.score == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(agg.cost == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("ingest_records single-trial identity") {
  auto records = ingest(
      R"({"model_id": "m1", "query_id": "q1", "trial_scores": [0.5], "trial_costs": [0.1]})"
      "\n");
  auto agg = records.at({"m1", "q1"});
  CHECK(agg.score == 0.5);
  CHECK(agg.cost == 0.1);
}

TEST_CASE("ingest_records pools duplicate keys before averaging") {
  auto records = ingest(
      R"({"model_id": "m1", "query_id": "q1", "trial_scores": [1], "trial_costs": [0.1]})"
      "\n"
      R"({"model_id": "m1", "query_id": "q1", "trial_scores": [0], "trial_costs": [0.3]})"
      "\n");
  REQUIRE(records.size() == 1);
  auto agg = records.at({"m1", "q1"});
  CHECK(agg.score == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(agg.cost == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("ingest_records rejects bad input with line numbers") {
  try {
    ingest(
        R"({"model_id": "m1", "query_id": "q1", "trial_scores": [0.5], "trial_costs": [0.1]})"
        "\nnot json\n");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::ParseError);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }

  try {
    ingest(
        R"({"model_id": "m1", "query_id": "q1", "trial_scores": [1.2], "trial_costs": [0.1]})"
        "\n");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::RangeError);
  }

  CHECK_THROWS_AS(
      ingest(
          R"({"model_id": "m1", "query_id": "q1", "trial_scores": [0.5, 0.5], "trial_costs": [0.1]})"
          "\n"),
      Error);
  CHECK_THROWS_AS(
      ingest(R"({"model_id": "m1", "query_id": "q1", "trial_scores": []})"
             "\n"),
      Error);
  CHECK_THROWS_AS(
      ingest(
          R"({"model_id": "m1", "query_id": "q1", "trial_scores": [0.5], "trial_costs": [-0.1]})"
          "\n"),
      Error);
}

TEST_CASE("load_tags normalizes and validates") {
  auto tags = tags_of(
      R"({"query_id": "q1", "knowledge": [" Linear  Algebra ", "math"], "capabilities": ["Reasoning", "telepathy"]})"
      "\n");
  REQUIRE(tags.size() == 1);
  CHECK(tags.at("q1").knowledge ==
        std::vector<std::string>{"linear algebra", "math"});
  CHECK(tags.at("q1").capabilities == std::vector<std::string>{"reasoning"});
}

TEST_CASE("load_tags rejects duplicate query ids") {
  try {
    tags_of(R"({"query_id": "q1", "knowledge": ["math"]})"
            "\n"
            R"({"query_id": "q1", "knowledge": ["physics"]})"
            "\n");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::ParseError);
  }
}

TEST_CASE("build_index single record worked example") {
  auto tags = simple_tags({{"q1", {"k1"}}});
  RecordMap records;
  records[{"m1", "q1"}] = {0.8, 0.05};
  auto index = build_simple(tags, records, 0.5);

  REQUIRE(index.models.count("m1") == 1);
  const auto& profile = index.models.at("m1");
  REQUIRE(profile.knowledge_stats.count("k1") == 1);
  const auto& stat = profile.knowledge_stats.at("k1");
  CHECK(stat.score_agg == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(stat.cost_agg == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(stat.support == 1);
  CHECK(profile.overall_mean_score == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(profile.overall_mean_cost == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(profile.record_count == 1);
  CHECK(index.alpha_used == 0.5);
  CHECK(index.version == 1);
}

TEST_CASE("build_index averages across covered queries") {
  auto tags = simple_tags({{"q1", {"k1"}}, {"q2", {"k1"}}});
  RecordMap records;
  records[{"m1", "q1"}] = {0.8, 0.0};
  records[{"m1", "q2"}] = {0.4, 0.0};
  auto index = build_simple(tags, records, 0.5);
  const auto& stat = index.models.at("m1").knowledge_stats.at("k1");
  CHECK(stat.score_agg == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(stat.support == 2);
}

TEST_CASE("build_index splits one query across ranks by weight") {
  auto tags = simple_tags({{"q1", {"k1", "k2"}}});
  RecordMap records;
  records[{"m1", "q1"}] = {0.9, 0.0};
  auto index = build_simple(tags, records, 0.5);
  const auto& stats = index.models.at("m1").knowledge_stats;
  CHECK(stats.at("k1").score_agg ==
        doctest::Approx(0.9 * 2.0 / 3.0).epsilon(1e-12));
  CHECK(stats.at("k2").score_agg ==
        doctest::Approx(0.9 * 1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("build_index validates its inputs") {
  auto tags = simple_tags({{"q1", {"k1"}}});
  RecordMap records;
  records[{"m1", "q1"}] = {0.8, 0.05};
  auto vocab = Vocabulary::identity(knowledge_occurrences(tags));
  auto corpus = make_corpus(tags, records, vocab);
  CHECK_THROWS_AS(
      build_index(corpus, vocab, CapabilityTaxonomy::defaults(), 0.0), Error);
  IndexCorpus empty;
  empty.queries = corpus.queries;
  try {
    build_index(empty, vocab, CapabilityTaxonomy::defaults(), 0.5);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::EmptyInput);
  }
}

TEST_CASE("make_corpus rejects records for untagged queries") {
  auto tags = simple_tags({{"q1", {"k1"}}});
  RecordMap records;
  records[{"m1", "q1"}] = {0.8, 0.0};
  records[{"m1", "q9"}] = {0.5, 0.0};
  auto vocab = Vocabulary::identity(knowledge_occurrences(tags));
  try {
    make_corpus(tags, records, vocab);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::MissingTags);
  }
}

TEST_CASE("support counts exactly the covered queries containing the element") {
  SplitMix64 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    oracle::Instance inst = oracle::random_instance(rng);
    ScoreIndex index = oracle::build_engine_index(inst);
    for (const auto& [model, profile] : index.models) {
      for (const auto& [element, stat] : profile.knowledge_stats) {
        std::int64_t expected = 0;
        for (const auto& [query_id, query] : inst.corpus.queries) {
          if (!inst.corpus.records.at(model).count(query_id)) continue;
          for (const auto& k : query.knowledge) {
            if (k == element) {
              ++expected;
              break;
            }
          }
        }
        CHECK(stat.support == expected);
      }
      CHECK(profile.record_count ==
            static_cast<std::int64_t>(inst.corpus.records.at(model).size()));
    }
  }
}

TEST_CASE("add_model matches a from-scratch build exactly") {
  SplitMix64 rng(59);
  for (int trial = 0; trial < 10; ++trial) {
    oracle::Instance inst = oracle::random_instance(rng);
    if (inst.pool.size() < 2) continue;
    ScoreIndex full = oracle::build_engine_index(inst);

    // Build from all models except the last, then add it incrementally.
    const std::string& last = inst.pool.back();
    RecordMap without;
    std::map<std::string, EvalAggregate> slice;
    for (const auto& [key, agg] : inst.records) {
      if (key.first == last) {
        slice[key.second] = agg;
      } else {
        without[key] = agg;
      }
    }
    auto vocab = Vocabulary::identity(knowledge_occurrences(inst.tags));
    auto corpus = make_corpus(inst.tags, without, vocab);
    ScoreIndex partial = build_index(corpus, vocab,
                                     CapabilityTaxonomy::defaults(),
                                     inst.config.alpha);
    auto before = partial.models;
    ScoreIndex grown = add_model(partial, last, slice, corpus.queries);

    CHECK(grown.version == partial.version + 1);
    for (const auto& [id, profile] : before) {
      CHECK(grown.models.at(id) == profile);
      CHECK(serialize_model_profile(grown.models.at(id)) ==
            serialize_model_profile(profile));
    }
    CHECK(grown.models.at(last) == full.models.at(last));
  }
}

TEST_CASE("add_model rejects duplicates and empty slices") {
  auto tags = simple_tags({{"q1", {"k1"}}});
  RecordMap records;
  records[{"m1", "q1"}] = {0.8, 0.0};
  auto index = build_simple(tags, records, 0.5);
  std::map<std::string, EvalAggregate> slice = {{"q1", {0.5, 0.0}}};
  try {
    add_model(index, "m1", slice, tags);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::Conflict);
  }
  CHECK_THROWS_AS(add_model(index, "m2", {}, tags), Error);
}

TEST_CASE("route_query refuses a mismatched alpha unless allowed") {
  auto tags = simple_tags({{"q1", {"k1"}}});
  RecordMap records;
  records[{"m1", "q1"}] = {0.8, 0.0};
  auto index = build_simple(tags, records, 0.5);
  TagSet query;
  query.knowledge = {"k1"};
  RoutingConfig cfg;
  cfg.alpha = 0.9;
  try {
    route_query(index, query, cfg);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::AlphaMismatch);
  }
  auto decision = route_query(index, query, cfg, {}, true);
  CHECK(decision.model_id == "m1");
}

TEST_CASE("route_query canonicalizes unseen knowledge into other") {
  auto tags = simple_tags({{"q1", {"k1"}}});
  RecordMap records;
  records[{"m1", "q1"}] = {0.8, 0.1};
  auto index = build_simple(tags, records, 0.5);
  TagSet query;
  query.knowledge = {"never seen before"};
  RoutingConfig cfg;
  cfg.alpha = 0.5;
  auto decision = route_query(index, query, cfg);
  // No stats for OTHER, so the overall mean carries the score.
  const auto& b = decision.breakdown.at("m1");
  CHECK(b.knowledge_score == doctest::Approx(0.8).epsilon(1e-12));
  REQUIRE(b.fallbacks_used.size() == 1);
  CHECK(b.fallbacks_used[0].element == kOtherLabel);
  CHECK(b.fallbacks_used[0].kind == FallbackKind::OverallMean);
}

TEST_CASE("serialization round-trips exactly") {
  SplitMix64 rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    oracle::Instance inst = oracle::random_instance(rng);
    ScoreIndex index = oracle::build_engine_index(inst);
    std::string bytes = serialize_index(index);
    ScoreIndex loaded = deserialize_index(bytes);
    CHECK(serialize_index(loaded) == bytes);
    CHECK(loaded.alpha_used == index.alpha_used);
    CHECK(loaded.version == index.version);
    CHECK(loaded.models == index.models);
    CHECK(loaded.vocabulary == index.vocabulary);

    // Routing through the reloaded index gives identical decisions.
    TagSet tags;
    tags.knowledge = inst.route_tags.knowledge;
    tags.capabilities = inst.route_tags.capabilities;
    auto a = route_query(index, tags, inst.config);
    auto b = route_query(loaded, tags, inst.config);
    CHECK(a.model_id == b.model_id);
    for (const auto& [id, breakdown] : a.breakdown) {
      CHECK(breakdown.mixed_score == b.breakdown.at(id).mixed_score);
    }
  }
}

TEST_CASE("rebuilding from the same corpus is byte-stable") {
  SplitMix64 rng(67);
  oracle::Instance inst = oracle::random_instance(rng);
  ScoreIndex a = oracle::build_engine_index(inst);
  ScoreIndex b = oracle::build_engine_index(inst);
  CHECK(serialize_index(a) == serialize_index(b));
}

TEST_CASE("deserialize_index rejects malformed documents") {
  auto tags = simple_tags({{"q1", {"k1"}}});
  RecordMap records;
  records[{"m1", "q1"}] = {0.8, 0.0};
  auto index = build_simple(tags, records, 0.5);
  std::string bytes = serialize_index(index);

  try {
    deserialize_index("this is not json");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::FormatError);
  }

  try {
    deserialize_index(bytes.substr(0, bytes.size() / 2));
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::FormatError);
  }

  std::string wrong_version = bytes;
  auto pos = wrong_version.find("\"version\": 1");
  REQUIRE(pos != std::string::npos);
  wrong_version.replace(pos, std::string("\"version\": 1").size(),
                        "\"version\": 999");
  try {
    deserialize_index(wrong_version);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::VersionError);
  }

  try {
    deserialize_index("{}");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::FormatError);
  }
}

TEST_CASE("fixture corpus builds to the committed golden index") {
  std::ifstream tags_in(std::string(GOLDEN_DIR) + "/fixture_tags.jsonl");
  REQUIRE(tags_in.good());
  auto tags = load_tags(tags_in, CapabilityTaxonomy::defaults());
  std::ifstream records_in(std::string(GOLDEN_DIR) + "/fixture_records.jsonl");
  REQUIRE(records_in.good());
  auto records = ingest_records(records_in);

  StubEmbeddingProvider provider(0);
  auto vocab = build_vocabulary(knowledge_occurrences(tags), provider, 0.6, 2);
  auto corpus = make_corpus(tags, records, vocab);
  auto index =
      build_index(corpus, vocab, CapabilityTaxonomy::defaults(), 0.5);

  std::string bytes = serialize_index(index);
  std::string golden = read_file(std::string(GOLDEN_DIR) + "/fixture_index.json");
  CHECK(bytes == golden);
  CHECK(serialize_index(deserialize_index(golden)) == golden);
}
