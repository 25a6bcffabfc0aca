#include "modelmux/scoring.hpp"

#include <algorithm>
#include <cmath>

namespace modelmux {

std::vector<double> rank_weights(double alpha, std::size_t length) {
  if (!(alpha > 0.0)) {
    throw Error(Error::Kind::InvalidConfig, "alpha must be > 0");
  }
  if (length < 1) {
    throw Error(Error::Kind::InvalidConfig, "rank list must be non-empty");
  }
  std::vector<double> weights(length);
  double term = 1.0;
  double denom = 0.0;
  for (std::size_t j = 0; j < length; ++j) {
    weights[j] = term;
    denom += term;
    term *= alpha;
  }
  for (double& w : weights) w /= denom;
  return weights;
}

double per_query_element_score(const EvalAggregate& agg,
                               const std::vector<std::string>& tags,
                               const std::string& element, double alpha,
                               double beta) {
  if (tags.empty()) return 0.0;
  const auto weights = rank_weights(alpha, tags.size());
  double weight_sum = 0.0;
  for (std::size_t j = 0; j < tags.size(); ++j) {
    if (tags[j] == element) weight_sum += weights[j];
  }
  return (agg.score - beta * agg.cost) * weight_sum;
}

ElementStat aggregate_element(
    const std::vector<std::pair<double, double>>& per_query_contributions) {
  if (per_query_contributions.empty()) {
    throw Error(Error::Kind::ElementUnsupported,
                "element occurs in no corpus query");
  }
  double score_sum = 0.0;
  double cost_sum = 0.0;
  for (const auto& [score_part, cost_part] : per_query_contributions) {
    score_sum += score_part;
    cost_sum += cost_part;
  }
  const double n = static_cast<double>(per_query_contributions.size());
  return ElementStat{score_sum / n, cost_sum / n,
                     static_cast<std::int64_t>(per_query_contributions.size())};
}

RankedScore ranked_element_sum(
    const ElementStatMap& stats, const std::string& other_key,
    std::optional<std::pair<double, double>> overall_mean,
    const std::vector<std::string>& ranked_tags, double alpha, double beta) {
  RankedScore result;
  if (ranked_tags.empty()) return result;

  const auto weights = rank_weights(alpha, ranked_tags.size());
  const ElementStat* other_stat = nullptr;
  if (!other_key.empty()) {
    auto it = stats.find(other_key);
    if (it != stats.end()) other_stat = &it->second;
  }

  auto record_fallback = [&result](const std::string& element,
                                   FallbackKind kind) {
    FallbackUse use{element, kind};
    if (std::find(result.fallbacks.begin(), result.fallbacks.end(), use) ==
        result.fallbacks.end()) {
      result.fallbacks.push_back(std::move(use));
    }
  };

  for (std::size_t i = 0; i < ranked_tags.size(); ++i) {
    const std::string& element = ranked_tags[i];
    double score = 0.0;
    double cost = 0.0;
    auto it = stats.find(element);
    if (it != stats.end()) {
      score = it->second.score_agg;
      cost = it->second.cost_agg;
    } else if (other_stat != nullptr && element != other_key) {
      score = other_stat->score_agg;
      cost = other_stat->cost_agg;
      record_fallback(element, FallbackKind::OtherBucket);
    } else if (overall_mean.has_value()) {
      score = overall_mean->first;
      cost = overall_mean->second;
      record_fallback(element, FallbackKind::OverallMean);
    } else {
      record_fallback(element, FallbackKind::Zero);
      continue;
    }
    result.value += (score - beta * cost) * weights[i];
    result.cost_term += cost * weights[i];
  }
  return result;
}

namespace {

std::optional<std::pair<double, double>> overall_mean_of(
    const ModelProfile& model) {
  if (model.record_count < 1) return std::nullopt;
  return std::make_pair(model.overall_mean_score, model.overall_mean_cost);
}

}  // namespace

RankedScore knowledge_score(const ModelProfile& model,
                            const std::vector<std::string>& ranked_knowledge,
                            double alpha, double beta) {
  return ranked_element_sum(model.knowledge_stats, kOtherLabel,
                            overall_mean_of(model), ranked_knowledge, alpha,
                            beta);
}

RankedScore capability_score(
    const ModelProfile& model,
    const std::vector<std::string>& ranked_capabilities, double alpha,
    double beta) {
  // Capabilities carry no OTHER bucket; misses go straight to the mean.
  return ranked_element_sum(model.capability_stats, std::string(),
                            overall_mean_of(model), ranked_capabilities, alpha,
                            beta);
}

ModelScoreBreakdown score_model(const ModelProfile& model, const TagSet& tags,
                                const RoutingConfig& config) {
  ModelScoreBreakdown breakdown;
  RankedScore ks =
      knowledge_score(model, tags.knowledge, config.alpha, config.beta);
  RankedScore cs =
      capability_score(model, tags.capabilities, config.alpha, config.beta);
  breakdown.knowledge_score = ks.value;
  breakdown.capability_score = cs.value;
  breakdown.mixed_score =
      config.gamma * ks.value + config.delta * cs.value;
  breakdown.knowledge_cost_term = ks.cost_term;
  breakdown.capability_cost_term = cs.cost_term;
  breakdown.mixed_cost_slope =
      config.gamma * ks.cost_term + config.delta * cs.cost_term;
  breakdown.fallbacks_used = std::move(ks.fallbacks);
  breakdown.fallbacks_used.insert(breakdown.fallbacks_used.end(),
                                  cs.fallbacks.begin(), cs.fallbacks.end());
  return breakdown;
}

RoutingDecision route(const std::map<std::string, ModelProfile>& models,
                      const TagSet& tags, const RoutingConfig& config,
                      const std::vector<std::string>& pool) {
  config.validate();
  if (pool.empty()) {
    throw Error(Error::Kind::EmptyPool, "routing pool is empty");
  }

  std::vector<std::string> ordered(pool.begin(), pool.end());
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

  RoutingDecision decision;
  bool have_best = false;
  double best_score = 0.0;
  for (const auto& model_id : ordered) {
    auto it = models.find(model_id);
    if (it == models.end()) {
      throw Error(Error::Kind::UnknownModel, "unknown model: " + model_id);
    }
    ModelScoreBreakdown breakdown = score_model(it->second, tags, config);
    // Sorted iteration plus strict comparison yields the lexicographically
    // smallest id on ties.
    if (!have_best || breakdown.mixed_score > best_score) {
      best_score = breakdown.mixed_score;
      decision.model_id = model_id;
      have_best = true;
    }
    decision.breakdown.emplace(model_id, std::move(breakdown));
  }
  return decision;
}

}  // namespace modelmux
