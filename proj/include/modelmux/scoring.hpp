#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "modelmux/core.hpp"

namespace modelmux {

// Aggregated statistics of one model for one element (a knowledge label or
// a capability). score_agg and cost_agg are kept separate so the cost
// penalty beta can be applied at query time: for any beta the effective
// aggregate equals score_agg - beta * cost_agg.
struct ElementStat {
  double score_agg = 0.0;  // mean rank-weighted score contribution
  double cost_agg = 0.0;   // mean rank-weighted cost contribution
  std::int64_t support = 0;  // distinct covered queries containing the element

  bool operator==(const ElementStat&) const = default;
};

using ElementStatMap = std::map<std::string, ElementStat>;

// Everything the router knows about one model.
struct ModelProfile {
  ElementStatMap knowledge_stats;   // keys: canonical labels or the OTHER bucket
  ElementStatMap capability_stats;  // keys: taxonomy members
  double overall_mean_score = 0.0;
  double overall_mean_cost = 0.0;
  std::int64_t record_count = 0;  // queries this model has records for

  bool operator==(const ModelProfile&) const = default;
};

struct ModelScoreBreakdown {
  double knowledge_score = 0.0;
  double capability_score = 0.0;
  double mixed_score = 0.0;
  // d(mixed)/d(-beta): gamma * knowledge cost term + delta * capability
  // cost term, with the same rank weights and fallbacks as the scores.
  double knowledge_cost_term = 0.0;
  double capability_cost_term = 0.0;
  double mixed_cost_slope = 0.0;
  std::vector<FallbackUse> fallbacks_used;
};

struct RoutingDecision {
  std::string model_id;
  std::map<std::string, ModelScoreBreakdown> breakdown;  // every pool model
};

// Normalized geometric rank weights: weight j (1-based) is
// alpha^(j-1) / sum_{m=1..length} alpha^(m-1). Sums to 1.
std::vector<double> rank_weights(double alpha, std::size_t length);

// Per-query contribution of `element` inside a ranked tag list:
// (score - beta*cost) * w_j summed over every rank j where the element
// appears; 0 if absent.
double per_query_element_score(const EvalAggregate& agg,
                               const std::vector<std::string>& tags,
                               const std::string& element, double alpha,
                               double beta);

// Mean of per-query (score_part, cost_part) contributions across the
// queries containing the element. Throws ElementUnsupported on empty input.
ElementStat aggregate_element(
    const std::vector<std::pair<double, double>>& per_query_contributions);

struct RankedScore {
  double value = 0.0;      // sum of (score_agg - beta*cost_agg) * w_i
  double cost_term = 0.0;  // sum of cost_agg * w_i, so value(beta) = value(0) - beta*cost_term
  std::vector<FallbackUse> fallbacks;
};

// Rank-weighted score over a ranked element list against one stats map.
// Lookup misses walk a fallback chain: the map's `other_key` entry, then
// the overall mean when available, then zero. Each distinct fallback is
// recorded. Empty tag list yields 0 with no fallbacks.
RankedScore ranked_element_sum(
    const ElementStatMap& stats, const std::string& other_key,
    std::optional<std::pair<double, double>> overall_mean,
    const std::vector<std::string>& ranked_tags, double alpha, double beta);

RankedScore knowledge_score(const ModelProfile& model,
                            const std::vector<std::string>& ranked_knowledge,
                            double alpha, double beta);

RankedScore capability_score(
    const ModelProfile& model,
    const std::vector<std::string>& ranked_capabilities, double alpha,
    double beta);

ModelScoreBreakdown score_model(const ModelProfile& model, const TagSet& tags,
                                const RoutingConfig& config);

// Argmax of gamma*KS + delta*CS over the pool; ties go to the
// lexicographically smallest model id. Tags must already be canonical.
RoutingDecision route(const std::map<std::string, ModelProfile>& models,
                      const TagSet& tags, const RoutingConfig& config,
                      const std::vector<std::string>& pool);

}  // namespace modelmux
