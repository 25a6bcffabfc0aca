#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "modelmux/index.hpp"

namespace modelmux {

struct Outcome {
  double score = 0.0;  // in [0, 1]
  double cost = 0.0;   // >= 0

  bool operator==(const Outcome&) const = default;
};

// One held-out query with precomputed outcomes for every candidate model.
// The harness never calls model APIs; traces carry everything.
struct TraceEntry {
  std::string query_id;
  std::string benchmark;
  TagSet tags;
  double tagging_cost = 0.0;
  std::map<std::string, Outcome> outcomes;
};

struct TraceSet {
  std::vector<TraceEntry> entries;
};

struct BenchmarkReport {
  double routed_score = 0.0;      // mean outcome score of chosen models
  double routed_cost = 0.0;       // summed, incl. tagging for tag strategies
  std::string best_single_model_id;
  double best_single_score = 0.0;
  double best_single_cost = 0.0;
  double performance_ratio = 0.0;  // 100 * routed / best single
  double cost_ratio = 0.0;         // 100 * routed cost / best single cost
  std::map<std::string, std::int64_t> selection_counts;
  std::int64_t entry_count = 0;
};

// "all" aggregates every entry; benchmarks holds one row per distinct
// benchmark name.
struct HarnessReport {
  std::string strategy;
  double beta = 0.0;
  BenchmarkReport overall;
  std::map<std::string, BenchmarkReport> benchmarks;
};

struct Strategy {
  enum class Kind { Mixed, KnowledgeOnly, CapabilityOnly, Random, Fixed };

  Kind kind = Kind::Mixed;
  std::uint64_t seed = 0;  // Random only
  std::string model_id;    // Fixed only

  static Strategy mixed() { return {}; }
  static Strategy knowledge_only() { return {Kind::KnowledgeOnly, 0, {}}; }
  static Strategy capability_only() { return {Kind::CapabilityOnly, 0, {}}; }
  static Strategy random(std::uint64_t seed) { return {Kind::Random, seed, {}}; }
  static Strategy fixed(std::string model_id) {
    return {Kind::Fixed, 0, std::move(model_id)};
  }

  // "mixed", "knowledge_only", "random(7)", "fixed(gpt)"; used in reports.
  std::string name() const;

  // Tag-driven strategies pay the tagging cost; baselines do not.
  bool uses_tags() const {
    return kind == Kind::Mixed || kind == Kind::KnowledgeOnly ||
           kind == Kind::CapabilityOnly;
  }
};

// Parses "mixed" / "knowledge_only" / "capability_only" / "random:<seed>" /
// "fixed:<model>"; anything else throws InvalidConfig.
Strategy parse_strategy(const std::string& text);

// Replays every trace entry against the index under one strategy.
// knowledge_only forces delta = 0 and capability_only forces gamma = 0 on a
// copy of the config. An empty pool means every indexed model. Entries
// missing an outcome for a pool model throw TraceError.
HarnessReport replay(const TraceSet& trace, const ScoreIndex& index,
                     const RoutingConfig& config, const Strategy& strategy,
                     const std::vector<std::string>& pool = {});

struct BetaStep {
  double beta = 0.0;
  HarnessReport report;
  // query_id -> chosen model's cost slope gamma*K_cost + delta*C_cost, the
  // derivative of its mixed score in -beta. Non-increasing along an
  // ascending beta grid.
  std::map<std::string, double> cost_slopes;
};

std::vector<BetaStep> beta_sweep(const TraceSet& trace, const ScoreIndex& index,
                                 const RoutingConfig& config,
                                 const std::vector<double>& betas,
                                 const std::vector<std::string>& pool = {});

struct PoolStep {
  std::vector<std::string> pool;
  HarnessReport report;                         // mixed routing on the prefix
  std::map<std::string, double> single_scores;  // per pool model mean score
};

// Grows the candidate pool one model at a time and replays the whole trace
// at each prefix. The index is read-only throughout.
std::vector<PoolStep> dynamic_pool_experiment(
    const TraceSet& trace, const ScoreIndex& index, const RoutingConfig& config,
    const std::vector<std::string>& additions);

struct DomainDistribution {
  std::map<std::string, double> percentages;  // sums to 100
  std::map<std::string, double> scores;       // raw S_D before normalization
};

// Weighted-rank presence: S_D = sum_r F_{D,r} * W_r with F the number of
// lists where D sits at rank r; percentages are S_D / sum * 100. Default
// weight is 1/r.
DomainDistribution domain_distribution(
    const std::vector<std::vector<std::string>>& ranked_lists,
    const std::function<double(int)>& rank_weight = {});

struct SyntheticSpec {
  std::vector<std::string> models;
  std::vector<std::string> domains;
  // models x domains success probabilities, each in [0, 1].
  std::vector<std::vector<double>> expertise;
  std::vector<double> model_costs;  // per call; empty means all 1.0
  int index_queries = 0;
  int trace_queries = 0;
  int trials = 1;    // trials per (model, indexed query)
  int min_tags = 1;  // knowledge tags per query
  int max_tags = 1;
  double alpha = 0.5;        // rank decay used for multi-tag success blending
  double tagging_cost = 0.0;
  std::string capability = "reasoning";  // attached to every query; may be ""
  std::string benchmark = "synthetic";
  std::uint64_t seed = 0;
};

struct SyntheticData {
  TagMap tags;        // indexed queries
  RecordMap records;  // per (model, indexed query) aggregates
  TraceSet trace;     // held-out queries with per-model outcomes
};

// Fully reproducible from the seed: outcome scores are Bernoulli draws with
// success probability equal to the rank-weighted expertise over the query's
// sampled domains.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Exhaustive per-query best-of-pool bound; upper-bounds every strategy's
// routed score on the same trace. Empty pool means the first entry's
// outcome keys.
HarnessReport per_query_best(const TraceSet& trace,
                             const std::vector<std::string>& pool = {});

// Trace files are JSONL: {"query_id", "benchmark", "tagging_cost",
// "tags": {"knowledge", "capabilities"}, "outcomes": {model: {score, cost}}}.
TraceSet load_trace(std::istream& in, const CapabilityTaxonomy& taxonomy);
void save_trace(const TraceSet& trace, std::ostream& out);

// CSV rows: benchmark, strategy, beta, routed_score, best_single,
// performance_ratio, routed_cost, cost_ratio, then one sel_<model> column
// per model (union over reports, sorted). Rows sorted by (benchmark,
// strategy, beta); the "all" aggregate row is included per report.
void write_report_csv(const std::vector<HarnessReport>& reports,
                      std::ostream& out);

std::string report_to_json(const HarnessReport& report);

}  // namespace modelmux
