#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "modelmux/scoring.hpp"
#include "modelmux/util.hpp"
#include "oracle.hpp"

using namespace modelmux;

namespace {

ModelProfile profile_with(std::map<std::string, ElementStat> knowledge,
                          std::map<std::string, ElementStat> capability = {},
                          double mean_score = 0.0, double mean_cost = 0.0,
                          std::int64_t records = 1) {
  ModelProfile p;
  p.knowledge_stats = std::move(knowledge);
  p.capability_stats = std::move(capability);
  p.overall_mean_score = mean_score;
  p.overall_mean_cost = mean_cost;
  p.record_count = records;
  return p;
}

}  // namespace

TEST_CASE("rank_weights worked examples") {
  auto w = rank_weights(0.5, 2);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  w = rank_weights(1.0, 4);
  REQUIRE(w.size() == 4);
  for (double x : w) CHECK(x == doctest::Approx(0.25).epsilon(1e-12));

  w = rank_weights(0.7, 1);
  REQUIRE(w.size() == 1);
  CHECK(w[0] == 1.0);
}

TEST_CASE("rank_weights rejects bad arguments") {
  CHECK_THROWS_AS(rank_weights(0.0, 3), Error);
  CHECK_THROWS_AS(rank_weights(-0.5, 3), Error);
  CHECK_THROWS_AS(rank_weights(0.5, 0), Error);
}

TEST_CASE("rank_weights normalize and order correctly on random inputs") {
  SplitMix64 rng(101);
  for (int i = 0; i < 1000; ++i) {
    double alpha = rng.next_in(0.01, 2.0);
    std::size_t length = 1 + rng.next_below(10);
    auto w = rank_weights(alpha, length);
    REQUIRE(w.size() == length);
    double sum = 0.0;
    for (double x : w) sum += x;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    for (std::size_t j = 1; j < length; ++j) {
      if (alpha < 1.0) {
        CHECK(w[j] < w[j - 1]);
      } else if (alpha > 1.0) {
        CHECK(w[j] > w[j - 1]);
      } else {
        CHECK(w[j] == doctest::Approx(w[j - 1]).epsilon(1e-15));
      }
    }
    // Matches the closed form computed independently.
    for (std::size_t j = 0; j < length; ++j) {
      CHECK(w[j] ==
            doctest::Approx(oracle::weight(alpha, j + 1, length)).epsilon(1e-12));
    }
  }
}

TEST_CASE("per_query_element_score weights the matching rank") {
  EvalAggregate agg{0.8, 0.1};
  std::vector<std::string> tags = {"a", "b", "c"};
  // alpha 0.5, length 3: weights 4/7, 2/7, 1/7.
  CHECK(per_query_element_score(agg, tags, "b", 0.5, 0.0) ==
        doctest::Approx(0.8 * 2.0 / 7.0).epsilon(1e-12));
  CHECK(per_query_element_score(agg, tags, "b", 0.5, 1.0) ==
        doctest::Approx(0.7 * 2.0 / 7.0).epsilon(1e-12));
  CHECK(per_query_element_score(agg, tags, "zzz", 0.5, 0.0) == 0.0);
  CHECK(per_query_element_score(agg, {}, "a", 0.5, 0.0) == 0.0);
}

TEST_CASE("per_query_element_score sums repeated occurrences") {
  EvalAggregate agg{1.0, 0.0};
  std::vector<std::string> tags = {"a", "b", "a"};
  // weights 4/7 and 1/7 both belong to "a".
  CHECK(per_query_element_score(agg, tags, "a", 0.5, 0.0) ==
        doctest::Approx(5.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("aggregate_element averages contributions and counts support") {
  std::vector<std::pair<double, double>> contribs = {{0.6667, 0.0667},
                                                     {0.2, 0.05}};
  auto stat = aggregate_element(contribs);
  CHECK(stat.score_agg == doctest::Approx(0.43335).epsilon(1e-12));
  CHECK(stat.cost_agg == doctest::Approx(0.05835).epsilon(1e-12));
  CHECK(stat.support == 2);

  auto single = aggregate_element({{0.31, 0.07}});
  CHECK(single.score_agg == 0.31);
  CHECK(single.cost_agg == 0.07);
  CHECK(single.support == 1);

  try {
    aggregate_element({});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::ElementUnsupported);
  }
}

TEST_CASE("knowledge_score weights element aggregates by query rank") {
  auto model = profile_with({{"k1", {0.7, 0.0, 1}}, {"k2", {0.4, 0.0, 1}}});
  auto got = knowledge_score(model, {"k1", "k2"}, 0.5, 0.0);
  CHECK(got.value == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(got.fallbacks.empty());

  // Empty tag list scores zero without touching fallbacks.
  auto empty = knowledge_score(model, {}, 0.5, 0.0);
  CHECK(empty.value == 0.0);
  CHECK(empty.cost_term == 0.0);
  CHECK(empty.fallbacks.empty());
}

TEST_CASE("knowledge_score falls back to the other bucket") {
  auto model = profile_with(
      {{"k1", {0.7, 0.0, 1}}, {std::string(kOtherLabel), {0.3, 0.0, 1}}});
  auto got = knowledge_score(model, {"k1", "k2"}, 0.5, 0.0);
  CHECK(got.value ==
        doctest::Approx(0.7 * 2.0 / 3.0 + 0.3 * 1.0 / 3.0).epsilon(1e-12));
  REQUIRE(got.fallbacks.size() == 1);
  CHECK(got.fallbacks[0].element == "k2");
  CHECK(got.fallbacks[0].kind == FallbackKind::OtherBucket);
}

TEST_CASE("knowledge_score falls back to the overall mean then zero") {
  auto with_mean = profile_with({{"k1", {0.7, 0.0, 1}}}, {}, 0.5, 0.2, 3);
  auto got = knowledge_score(with_mean, {"k2"}, 0.5, 0.0);
  CHECK(got.value == doctest::Approx(0.5).epsilon(1e-12));
  REQUIRE(got.fallbacks.size() == 1);
  CHECK(got.fallbacks[0].kind == FallbackKind::OverallMean);

  // beta applies to the fallback's cost too.
  auto with_beta = knowledge_score(with_mean, {"k2"}, 0.5, 1.0);
  CHECK(with_beta.value == doctest::Approx(0.5 - 0.2).epsilon(1e-12));
  CHECK(with_beta.cost_term == doctest::Approx(0.2).epsilon(1e-12));

  ModelProfile empty;
  auto zero = knowledge_score(empty, {"k2"}, 0.5, 0.0);
  CHECK(zero.value == 0.0);
  REQUIRE(zero.fallbacks.size() == 1);
  CHECK(zero.fallbacks[0].kind == FallbackKind::Zero);
}

TEST_CASE("fallbacks are recorded once per distinct element") {
  ModelProfile empty;
  auto got = knowledge_score(empty, {"k2", "k3", "k2"}, 0.5, 0.0);
  REQUIRE(got.fallbacks.size() == 2);
  CHECK(got.fallbacks[0].element == "k2");
  CHECK(got.fallbacks[1].element == "k3");
}

TEST_CASE("capability_score examples") {
  auto model =
      profile_with({}, {{"reasoning", {0.9, 0.0, 4}}}, 0.0, 0.0, 4);
  auto got = capability_score(model, {"reasoning"}, 0.5, 0.0);
  CHECK(got.value == doctest::Approx(0.9).epsilon(1e-12));

  auto two = profile_with(
      {}, {{"reasoning", {0.8, 0.0, 2}}, {"coding", {0.4, 0.0, 2}}}, 0.0, 0.0,
      2);
  auto flat = capability_score(two, {"reasoning", "coding"}, 1.0, 0.0);
  CHECK(flat.value == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("capability_score skips the other bucket in its fallback chain") {
  // A knowledge-side OTHER stat must not leak into capability scoring: a
  // missing capability goes straight to the overall mean.
  auto model = profile_with({{std::string(kOtherLabel), {0.9, 0.0, 1}}}, {},
                            0.25, 0.0, 2);
  auto got = capability_score(model, {"coding"}, 0.5, 0.0);
  CHECK(got.value == doctest::Approx(0.25).epsilon(1e-12));
  REQUIRE(got.fallbacks.size() == 1);
  CHECK(got.fallbacks[0].kind == FallbackKind::OverallMean);

  ModelProfile empty;
  auto zero = capability_score(empty, {"coding"}, 0.5, 0.0);
  CHECK(zero.value == 0.0);
  REQUIRE(zero.fallbacks.size() == 1);
  CHECK(zero.fallbacks[0].kind == FallbackKind::Zero);
}

TEST_CASE("score_model mixes the two sides with gamma and delta") {
  auto model = profile_with({{"math", {0.6, 0.1, 2}}},
                            {{"reasoning", {0.8, 0.2, 2}}}, 0.0, 0.0, 2);
  TagSet tags;
  tags.knowledge = {"math"};
  tags.capabilities = {"reasoning"};
  RoutingConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 0.0;
  cfg.gamma = 2.0;
  cfg.delta = 0.5;
  auto b = score_model(model, tags, cfg);
  CHECK(b.knowledge_score == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(b.capability_score == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(b.mixed_score == doctest::Approx(2.0 * 0.6 + 0.5 * 0.8).epsilon(1e-12));
  CHECK(b.knowledge_cost_term == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(b.capability_cost_term == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(b.mixed_cost_slope ==
        doctest::Approx(2.0 * 0.1 + 0.5 * 0.2).epsilon(1e-12));
}

TEST_CASE("route picks the single pool member") {
  std::map<std::string, ModelProfile> models;
  models["only"] = profile_with({{"math", {0.2, 0.0, 1}}});
  TagSet tags;
  tags.knowledge = {"math"};
  RoutingConfig cfg;
  auto d = route(models, tags, cfg, {"only"});
  CHECK(d.model_id == "only");
  REQUIRE(d.breakdown.count("only") == 1);
}

TEST_CASE("route breaks exact ties toward the smaller id") {
  std::map<std::string, ModelProfile> models;
  models["alpha"] = profile_with({{"math", {0.5, 0.0, 1}}});
  models["beta"] = profile_with({{"math", {0.5, 0.0, 1}}});
  TagSet tags;
  tags.knowledge = {"math"};
  RoutingConfig cfg;
  auto d = route(models, tags, cfg, {"alpha", "beta"});
  CHECK(d.model_id == "alpha");
  d = route(models, tags, cfg, {"beta", "alpha"});
  CHECK(d.model_id == "alpha");
}

TEST_CASE("route prefers the planted specialist") {
  std::map<std::string, ModelProfile> models;
  models["a"] = profile_with({}, {{"coding", {0.5, 0.0, 10}}}, 0.5, 0.0, 10);
  models["b"] = profile_with({}, {{"coding", {0.9, 0.0, 10}}}, 0.9, 0.0, 10);
  TagSet tags;
  tags.capabilities = {"coding"};
  RoutingConfig cfg;
  auto d = route(models, tags, cfg, {"a", "b"});
  CHECK(d.model_id == "b");
  CHECK(d.breakdown.at("b").capability_score ==
        doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("route rejects empty or unknown pools") {
  std::map<std::string, ModelProfile> models;
  models["a"] = profile_with({{"math", {0.5, 0.0, 1}}});
  TagSet tags;
  RoutingConfig cfg;
  try {
    route(models, tags, cfg, {});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::EmptyPool);
  }
  try {
    route(models, tags, cfg, {"a", "ghost"});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::UnknownModel);
  }
}

TEST_CASE("adding a constant to every aggregate preserves the decision") {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::string, ModelProfile> base;
    int n_models = 2 + static_cast<int>(rng.next_below(4));
    std::vector<std::string> pool;
    for (int m = 0; m < n_models; ++m) {
      std::string id = "m" + std::to_string(m);
      ModelProfile p;
      for (int k = 0; k < 3; ++k) {
        p.knowledge_stats["k" + std::to_string(k)] = {rng.next_unit(), 0.0, 1};
        p.capability_stats["reasoning"] = {rng.next_unit(), 0.0, 1};
      }
      p.record_count = 3;
      base[id] = p;
      pool.push_back(id);
    }
    TagSet tags;
    tags.knowledge = {"k0", "k2"};
    tags.capabilities = {"reasoning"};
    RoutingConfig cfg;
    cfg.alpha = rng.next_in(0.1, 2.0);
    cfg.gamma = 1.0;
    cfg.delta = 1.0;
    auto before = route(base, tags, cfg, pool);

    // Shift invariance needs the same constant added to every element the
    // scores read, because rank weights sum to one per list and gamma/delta
    // rescale the shift identically across models.
    double c = rng.next_in(-2.0, 2.0);
    auto shifted = base;
    for (auto& [id, p] : shifted) {
      (void)id;
      for (auto& [k, s] : p.knowledge_stats) {
        (void)k;
        s.score_agg += c;
      }
      for (auto& [k, s] : p.capability_stats) {
        (void)k;
        s.score_agg += c;
      }
    }
    auto after = route(shifted, tags, cfg, pool);
    CHECK(after.model_id == before.model_id);
  }
}

TEST_CASE("scaling all aggregates by a positive factor preserves the decision") {
  SplitMix64 rng(78);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::string, ModelProfile> base;
    std::vector<std::string> pool;
    for (int m = 0; m < 3; ++m) {
      std::string id = "m" + std::to_string(m);
      ModelProfile p;
      for (int k = 0; k < 3; ++k) {
        p.knowledge_stats["k" + std::to_string(k)] = {
            rng.next_in(-1.0, 1.0), 0.0, 1};
      }
      p.record_count = 3;
      base[id] = p;
      pool.push_back(id);
    }
    TagSet tags;
    tags.knowledge = {"k0", "k1", "k2"};
    RoutingConfig cfg;
    cfg.alpha = rng.next_in(0.1, 2.0);
    cfg.beta = 0.0;
    auto before = route(base, tags, cfg, pool);

    double f = rng.next_in(0.1, 5.0);
    auto scaled = base;
    for (auto& [id, p] : scaled) {
      (void)id;
      for (auto& [k, s] : p.knowledge_stats) {
        (void)k;
        s.score_agg *= f;
      }
    }
    auto after = route(scaled, tags, cfg, pool);
    CHECK(after.model_id == before.model_id);
  }
}

TEST_CASE("scores are linear in beta through the stored cost term") {
  SplitMix64 rng(79);
  for (int trial = 0; trial < 50; ++trial) {
    ModelProfile p;
    for (int k = 0; k < 4; ++k) {
      p.knowledge_stats["k" + std::to_string(k)] = {
          rng.next_unit(), rng.next_in(0.0, 5.0), 1};
    }
    p.knowledge_stats[kOtherLabel] = {rng.next_unit(), rng.next_in(0.0, 5.0),
                                      1};
    p.overall_mean_score = rng.next_unit();
    p.overall_mean_cost = rng.next_in(0.0, 5.0);
    p.record_count = 5;
    std::vector<std::string> tags = {"k0", "k9", "k2"};  // k9 falls back
    double alpha = rng.next_in(0.1, 2.0);
    double beta = rng.next_in(0.0, 20.0);
    auto at_zero = knowledge_score(p, tags, alpha, 0.0);
    auto at_beta = knowledge_score(p, tags, alpha, beta);
    CHECK(std::abs(at_beta.value -
                   (at_zero.value - beta * at_zero.cost_term)) <= 1e-9);
    CHECK(at_beta.cost_term == doctest::Approx(at_zero.cost_term).epsilon(1e-12));
  }
}

TEST_CASE("engine scores match the reference implementation") {
  SplitMix64 rng(20260819);
  for (int trial = 0; trial < 50; ++trial) {
    oracle::Instance inst = oracle::random_instance(rng);
    ScoreIndex index = oracle::build_engine_index(inst);
    TagSet tags;
    tags.knowledge = inst.route_tags.knowledge;
    tags.capabilities = inst.route_tags.capabilities;
    auto decision = route_query(index, tags, inst.config);
    for (const auto& model : inst.pool) {
      auto expect = oracle::score_model(inst.corpus, model, inst.route_tags,
                                        inst.config.alpha, inst.config.beta,
                                        inst.config.gamma, inst.config.delta);
      const auto& got = decision.breakdown.at(model);
      CHECK(std::abs(got.knowledge_score - expect.ks) <= 1e-9);
      CHECK(std::abs(got.capability_score - expect.cs) <= 1e-9);
      CHECK(std::abs(got.mixed_score - expect.mixed) <= 1e-9);
      CHECK(got.fallbacks_used.empty());
    }
    std::string expect_model =
        oracle::route(inst.corpus, inst.pool, inst.route_tags,
                      inst.config.alpha, inst.config.beta, inst.config.gamma,
                      inst.config.delta);
    CHECK(decision.model_id == expect_model);
  }
}
