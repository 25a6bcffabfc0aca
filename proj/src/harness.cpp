#include "modelmux/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "modelmux/util.hpp"

namespace modelmux {

namespace {

using nlohmann::json;

double ratio_percent(double value, double base) {
  if (base > 0.0) return 100.0 * value / base;
  if (value <= 0.0) return 100.0;
  return std::numeric_limits<double>::infinity();
}

struct Group {
  double routed_score_sum = 0.0;
  double routed_cost_sum = 0.0;
  std::map<std::string, std::int64_t> selections;
  std::map<std::string, std::pair<double, double>> single;  // score, cost sums
  std::int64_t n = 0;
};

BenchmarkReport finalize_group(const Group& g,
                               const std::vector<std::string>& pool) {
  BenchmarkReport r;
  r.entry_count = g.n;
  r.routed_score = g.routed_score_sum / static_cast<double>(g.n);
  r.routed_cost = g.routed_cost_sum;
  double best = -1.0;
  for (const auto& model : pool) {
    auto it = g.single.find(model);
    double mean = it->second.first / static_cast<double>(g.n);
    if (mean > best) {
      best = mean;
      r.best_single_model_id = model;
      r.best_single_score = mean;
      r.best_single_cost = it->second.second;
    }
    auto sel = g.selections.find(model);
    r.selection_counts[model] = sel == g.selections.end() ? 0 : sel->second;
  }
  r.performance_ratio = ratio_percent(r.routed_score, r.best_single_score);
  r.cost_ratio = ratio_percent(r.routed_cost, r.best_single_cost);
  return r;
}

// Shared replay core: the chooser decides, the harness keeps score.
HarnessReport run_trace(const TraceSet& trace,
                        const std::vector<std::string>& pool,
                        bool include_tagging, const std::string& name,
                        double beta,
                        const std::function<std::string(const TraceEntry&)>& choose) {
  if (pool.empty()) {
    throw Error(Error::Kind::EmptyPool, "candidate pool is empty");
  }
  if (trace.entries.empty()) {
    throw Error(Error::Kind::EmptyInput, "trace has no entries");
  }
  Group overall;
  std::map<std::string, Group> groups;
  for (const auto& entry : trace.entries) {
    for (const auto& model : pool) {
      if (entry.outcomes.find(model) == entry.outcomes.end()) {
        throw Error(Error::Kind::TraceError,
                    "entry '" + entry.query_id + "' lacks an outcome for '" +
                        model + "'");
      }
    }
    const std::string chosen = choose(entry);
    const Outcome& outcome = entry.outcomes.at(chosen);
    auto update = [&](Group& g) {
      g.routed_score_sum += outcome.score;
      g.routed_cost_sum +=
          outcome.cost + (include_tagging ? entry.tagging_cost : 0.0);
      ++g.selections[chosen];
      ++g.n;
      for (const auto& model : pool) {
        const Outcome& oc = entry.outcomes.at(model);
        auto& sums = g.single[model];
        sums.first += oc.score;
        sums.second += oc.cost;
      }
    };
    update(overall);
    update(groups[entry.benchmark]);
  }
  HarnessReport report;
  report.strategy = name;
  report.beta = beta;
  report.overall = finalize_group(overall, pool);
  for (const auto& [benchmark, group] : groups) {
    report.benchmarks.emplace(benchmark, finalize_group(group, pool));
  }
  return report;
}

std::vector<std::string> effective_pool(const ScoreIndex& index,
                                        const std::vector<std::string>& pool) {
  std::vector<std::string> out = pool;
  if (out.empty()) {
    for (const auto& [model_id, profile] : index.models) {
      (void)profile;
      out.push_back(model_id);
    }
  } else {
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

}  // namespace

std::string Strategy::name() const {
  switch (kind) {
    case Kind::Mixed: return "mixed";
    case Kind::KnowledgeOnly: return "knowledge_only";
    case Kind::CapabilityOnly: return "capability_only";
    case Kind::Random: return "random(" + std::to_string(seed) + ")";
    case Kind::Fixed: return "fixed(" + model_id + ")";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& text) {
  if (text == "mixed") return Strategy::mixed();
  if (text == "knowledge_only") return Strategy::knowledge_only();
  if (text == "capability_only") return Strategy::capability_only();
  if (text == "random") return Strategy::random(0);
  if (text.rfind("random:", 0) == 0) {
    try {
      return Strategy::random(std::stoull(text.substr(7)));
    } catch (const std::exception&) {
      throw Error(Error::Kind::InvalidConfig,
                  "bad random seed in strategy '" + text + "'");
    }
  }
  if (text.rfind("fixed:", 0) == 0 && text.size() > 6) {
    return Strategy::fixed(text.substr(6));
  }
  throw Error(Error::Kind::InvalidConfig, "unknown strategy '" + text + "'");
}

HarnessReport replay(const TraceSet& trace, const ScoreIndex& index,
                     const RoutingConfig& config, const Strategy& strategy,
                     const std::vector<std::string>& pool) {
  const std::vector<std::string> models = effective_pool(index, pool);
  RoutingConfig cfg = config;
  switch (strategy.kind) {
    case Strategy::Kind::KnowledgeOnly: cfg.delta = 0.0; break;
    case Strategy::Kind::CapabilityOnly: cfg.gamma = 0.0; break;
    default: break;
  }

  std::function<std::string(const TraceEntry&)> choose;
  SplitMix64 rng(strategy.seed);
  switch (strategy.kind) {
    case Strategy::Kind::Mixed:
    case Strategy::Kind::KnowledgeOnly:
    case Strategy::Kind::CapabilityOnly:
      choose = [&index, cfg, &models](const TraceEntry& entry) {
        return route_query(index, entry.tags, cfg, models).model_id;
      };
      break;
    case Strategy::Kind::Random:
      choose = [&rng, &models](const TraceEntry&) {
        return models[rng.next_below(models.size())];
      };
      break;
    case Strategy::Kind::Fixed:
      if (std::find(models.begin(), models.end(), strategy.model_id) ==
          models.end()) {
        throw Error(Error::Kind::UnknownModel,
                    "fixed model '" + strategy.model_id + "' not in pool");
      }
      choose = [&strategy](const TraceEntry&) { return strategy.model_id; };
      break;
  }
  return run_trace(trace, models, strategy.uses_tags(), strategy.name(),
                   cfg.beta, choose);
}

std::vector<BetaStep> beta_sweep(const TraceSet& trace, const ScoreIndex& index,
                                 const RoutingConfig& config,
                                 const std::vector<double>& betas,
                                 const std::vector<std::string>& pool) {
  if (betas.empty()) {
    throw Error(Error::Kind::InvalidConfig, "beta grid is empty");
  }
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (betas[i] < 0.0) {
      throw Error(Error::Kind::InvalidConfig, "beta grid has negative values");
    }
    if (i > 0 && betas[i] <= betas[i - 1]) {
      throw Error(Error::Kind::InvalidConfig, "beta grid must be ascending");
    }
  }
  const std::vector<std::string> models = effective_pool(index, pool);
  std::vector<BetaStep> steps;
  steps.reserve(betas.size());
  for (double beta : betas) {
    RoutingConfig cfg = config;
    cfg.beta = beta;
    BetaStep step;
    step.beta = beta;
    auto choose = [&index, cfg, &models, &step](const TraceEntry& entry) {
      RoutingDecision decision = route_query(index, entry.tags, cfg, models);
      step.cost_slopes[entry.query_id] =
          decision.breakdown.at(decision.model_id).mixed_cost_slope;
      return decision.model_id;
    };
    step.report = run_trace(trace, models, true, "mixed", beta, choose);
    steps.push_back(std::move(step));
  }
  return steps;
}

std::vector<PoolStep> dynamic_pool_experiment(
    const TraceSet& trace, const ScoreIndex& index, const RoutingConfig& config,
    const std::vector<std::string>& additions) {
  if (additions.empty()) {
    throw Error(Error::Kind::InvalidConfig, "no pool additions given");
  }
  std::vector<std::string> seen;
  for (const auto& model : additions) {
    if (index.models.find(model) == index.models.end()) {
      throw Error(Error::Kind::UnknownModel,
                  "pool addition '" + model + "' not in index");
    }
    if (std::find(seen.begin(), seen.end(), model) != seen.end()) {
      throw Error(Error::Kind::InvalidConfig,
                  "duplicate pool addition '" + model + "'");
    }
    seen.push_back(model);
  }

  std::vector<PoolStep> steps;
  std::vector<std::string> pool;
  for (const auto& model : additions) {
    pool.push_back(model);
    PoolStep step;
    step.pool = pool;
    step.report = replay(trace, index, config, Strategy::mixed(), pool);
    for (const auto& member : pool) {
      double sum = 0.0;
      for (const auto& entry : trace.entries) {
        sum += entry.outcomes.at(member).score;
      }
      step.single_scores[member] =
          sum / static_cast<double>(trace.entries.size());
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

DomainDistribution domain_distribution(
    const std::vector<std::vector<std::string>>& ranked_lists,
    const std::function<double(int)>& rank_weight) {
  auto weight = rank_weight
                    ? rank_weight
                    : std::function<double(int)>(
                          [](int r) { return 1.0 / static_cast<double>(r); });
  // F_{D,r} first, then S_D = sum_r F_{D,r} * W_r in rank order, so the
  // result does not depend on the order the lists arrive in.
  std::map<std::string, std::map<int, std::int64_t>> rank_counts;
  bool any = false;
  for (const auto& list : ranked_lists) {
    for (std::size_t j = 0; j < list.size(); ++j) {
      any = true;
      rank_counts[normalize_label(list[j])][static_cast<int>(j + 1)] += 1;
    }
  }
  if (!any) {
    throw Error(Error::Kind::EmptyInput, "no ranked domains supplied");
  }
  std::map<std::string, double> scores;
  for (const auto& [domain, counts] : rank_counts) {
    double s = 0.0;
    for (const auto& [rank, count] : counts) {
      s += static_cast<double>(count) * weight(rank);
    }
    scores[domain] = s;
  }
  double total = 0.0;
  for (const auto& [domain, s] : scores) {
    (void)domain;
    total += s;
  }
  if (!(total > 0.0)) {
    throw Error(Error::Kind::RangeError,
                "rank weights sum to a non-positive total");
  }
  DomainDistribution dist;
  dist.scores = scores;
  for (const auto& [domain, s] : scores) {
    dist.percentages[domain] = 100.0 * s / total;
  }
  return dist;
}

namespace {

std::string padded_id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%06d", prefix, i);
  return buf;
}

void check_synthetic_spec(const SyntheticSpec& spec) {
  if (spec.models.empty() || spec.domains.empty()) {
    throw Error(Error::Kind::InvalidConfig, "models and domains required");
  }
  if (spec.expertise.size() != spec.models.size()) {
    throw Error(Error::Kind::InvalidConfig,
                "expertise rows must match model count");
  }
  for (const auto& row : spec.expertise) {
    if (row.size() != spec.domains.size()) {
      throw Error(Error::Kind::InvalidConfig,
                  "expertise columns must match domain count");
    }
    for (double p : row) {
      if (p < 0.0 || p > 1.0) {
        throw Error(Error::Kind::RangeError, "expertise outside [0,1]");
      }
    }
  }
  if (!spec.model_costs.empty() &&
      spec.model_costs.size() != spec.models.size()) {
    throw Error(Error::Kind::InvalidConfig,
                "model_costs must match model count");
  }
  if (spec.index_queries < 0 || spec.trace_queries < 0 || spec.trials < 1) {
    throw Error(Error::Kind::InvalidConfig, "bad query or trial counts");
  }
  if (spec.min_tags < 1 || spec.max_tags < spec.min_tags ||
      static_cast<std::size_t>(spec.max_tags) > spec.domains.size()) {
    throw Error(Error::Kind::InvalidConfig, "bad tags-per-query bounds");
  }
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  check_synthetic_spec(spec);
  SplitMix64 rng(spec.seed);
  const std::vector<double> costs =
      spec.model_costs.empty() ? std::vector<double>(spec.models.size(), 1.0)
                               : spec.model_costs;

  auto sample_tags = [&]() {
    int k = spec.min_tags +
            static_cast<int>(rng.next_below(
                static_cast<std::uint64_t>(spec.max_tags - spec.min_tags + 1)));
    std::vector<std::size_t> picked;
    while (static_cast<int>(picked.size()) < k) {
      std::size_t d = rng.next_below(spec.domains.size());
      if (std::find(picked.begin(), picked.end(), d) == picked.end()) {
        picked.push_back(d);
      }
    }
    return picked;
  };

  auto success_prob = [&](std::size_t model, const std::vector<std::size_t>& domains) {
    const auto weights = rank_weights(spec.alpha, domains.size());
    double p = 0.0;
    for (std::size_t j = 0; j < domains.size(); ++j) {
      p += weights[j] * spec.expertise[model][domains[j]];
    }
    return p;
  };

  auto to_tagset = [&](const std::vector<std::size_t>& domains) {
    TagSet tags;
    for (std::size_t d : domains) tags.knowledge.push_back(spec.domains[d]);
    if (!spec.capability.empty()) tags.capabilities.push_back(spec.capability);
    return tags;
  };

  SyntheticData data;
  for (int q = 0; q < spec.index_queries; ++q) {
    const std::string query_id = padded_id("iq", q);
    const auto domains = sample_tags();
    data.tags.emplace(query_id, to_tagset(domains));
    for (std::size_t m = 0; m < spec.models.size(); ++m) {
      const double p = success_prob(m, domains);
      double score_sum = 0.0;
      for (int t = 0; t < spec.trials; ++t) {
        score_sum += rng.next_bernoulli(p) ? 1.0 : 0.0;
      }
      data.records.emplace(
          RecordKey{spec.models[m], query_id},
          EvalAggregate{score_sum / spec.trials, costs[m]});
    }
  }
  for (int q = 0; q < spec.trace_queries; ++q) {
    TraceEntry entry;
    entry.query_id = padded_id("tq", q);
    entry.benchmark = spec.benchmark;
    entry.tagging_cost = spec.tagging_cost;
    const auto domains = sample_tags();
    entry.tags = to_tagset(domains);
    for (std::size_t m = 0; m < spec.models.size(); ++m) {
      const double p = success_prob(m, domains);
      double score_sum = 0.0;
      for (int t = 0; t < spec.trials; ++t) {
        score_sum += rng.next_bernoulli(p) ? 1.0 : 0.0;
      }
      entry.outcomes.emplace(spec.models[m],
                             Outcome{score_sum / spec.trials, costs[m]});
    }
    data.trace.entries.push_back(std::move(entry));
  }
  return data;
}

HarnessReport per_query_best(const TraceSet& trace,
                             const std::vector<std::string>& pool) {
  if (trace.entries.empty()) {
    throw Error(Error::Kind::EmptyInput, "trace has no entries");
  }
  std::vector<std::string> models = pool;
  if (models.empty()) {
    for (const auto& [model, outcome] : trace.entries.front().outcomes) {
      (void)outcome;
      models.push_back(model);
    }
  } else {
    std::sort(models.begin(), models.end());
    models.erase(std::unique(models.begin(), models.end()), models.end());
  }
  auto choose = [&models](const TraceEntry& entry) {
    std::string best;
    double best_score = -1.0;
    for (const auto& model : models) {
      double s = entry.outcomes.at(model).score;
      if (s > best_score) {
        best_score = s;
        best = model;
      }
    }
    return best;
  };
  return run_trace(trace, models, false, "oracle_best", 0.0, choose);
}

TraceSet load_trace(std::istream& in, const CapabilityTaxonomy& taxonomy) {
  TraceSet trace;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw Error(Error::Kind::ParseError,
                  "line " + std::to_string(line_no) + ": not a JSON object");
    }
    try {
      TraceEntry entry;
      entry.query_id = obj.at("query_id").get<std::string>();
      entry.benchmark = obj.value("benchmark", std::string("default"));
      entry.tagging_cost = obj.value("tagging_cost", 0.0);
      const auto& tags = obj.at("tags");
      TagSet raw;
      raw.knowledge = tags.value("knowledge", std::vector<std::string>{});
      raw.capabilities = tags.value("capabilities", std::vector<std::string>{});
      entry.tags = validate_tagset(raw, taxonomy);
      for (const auto& [model, oc] : obj.at("outcomes").items()) {
        Outcome outcome;
        outcome.score = oc.at("score").get<double>();
        outcome.cost = oc.at("cost").get<double>();
        if (outcome.score < 0.0 || outcome.score > 1.0 || outcome.cost < 0.0) {
          throw Error(Error::Kind::RangeError,
                      "line " + std::to_string(line_no) +
                          ": outcome out of range for '" + model + "'");
        }
        entry.outcomes.emplace(model, outcome);
      }
      if (entry.tagging_cost < 0.0) {
        throw Error(Error::Kind::RangeError,
                    "line " + std::to_string(line_no) + ": negative tagging_cost");
      }
      if (!seen_ids.insert(entry.query_id).second) {
        throw Error(Error::Kind::ParseError,
                    "line " + std::to_string(line_no) + ": duplicate query_id '" +
                        entry.query_id + "'");
      }
      trace.entries.push_back(std::move(entry));
    } catch (const json::exception& e) {
      throw Error(Error::Kind::ParseError,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

void save_trace(const TraceSet& trace, std::ostream& out) {
  for (const auto& entry : trace.entries) {
    json outcomes = json::object();
    for (const auto& [model, oc] : entry.outcomes) {
      outcomes[model] = {{"cost", oc.cost}, {"score", oc.score}};
    }
    json line = {{"benchmark", entry.benchmark},
                 {"outcomes", outcomes},
                 {"query_id", entry.query_id},
                 {"tagging_cost", entry.tagging_cost},
                 {"tags",
                  {{"capabilities", entry.tags.capabilities},
                   {"knowledge", entry.tags.knowledge}}}};
    out << line.dump() << "\n";
  }
}

namespace {

struct CsvRow {
  std::string benchmark;
  std::string strategy;
  double beta;
  const BenchmarkReport* report;
};

void write_row(std::ostream& out, const CsvRow& row,
               const std::vector<std::string>& models) {
  out << row.benchmark << "," << row.strategy << "," << format_double(row.beta)
      << "," << format_double(row.report->routed_score) << ","
      << format_double(row.report->best_single_score) << ","
      << format_double(row.report->performance_ratio) << ","
      << format_double(row.report->routed_cost) << ","
      << format_double(row.report->cost_ratio);
  for (const auto& model : models) {
    auto it = row.report->selection_counts.find(model);
    out << "," << (it == row.report->selection_counts.end() ? 0 : it->second);
  }
  out << "\n";
}

}  // namespace

void write_report_csv(const std::vector<HarnessReport>& reports,
                      std::ostream& out) {
  std::set<std::string> model_set;
  std::vector<CsvRow> rows;
  for (const auto& report : reports) {
    for (const auto& [model, count] : report.overall.selection_counts) {
      (void)count;
      model_set.insert(model);
    }
    rows.push_back({"all", report.strategy, report.beta, &report.overall});
    for (const auto& [benchmark, bench_report] : report.benchmarks) {
      rows.push_back({benchmark, report.strategy, report.beta, &bench_report});
    }
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const CsvRow& a, const CsvRow& b) {
                     if (a.benchmark != b.benchmark) return a.benchmark < b.benchmark;
                     if (a.strategy != b.strategy) return a.strategy < b.strategy;
                     return a.beta < b.beta;
                   });
  const std::vector<std::string> models(model_set.begin(), model_set.end());
  out << "benchmark,strategy,beta,routed_score,best_single,performance_ratio,"
         "routed_cost,cost_ratio";
  for (const auto& model : models) out << ",sel_" << model;
  out << "\n";
  for (const auto& row : rows) write_row(out, row, models);
}

namespace {

json benchmark_report_json(const BenchmarkReport& r) {
  json counts = json::object();
  for (const auto& [model, count] : r.selection_counts) counts[model] = count;
  return json{{"routed_score", r.routed_score},
              {"routed_cost", r.routed_cost},
              {"best_single_model_id", r.best_single_model_id},
              {"best_single_score", r.best_single_score},
              {"best_single_cost", r.best_single_cost},
              {"performance_ratio", r.performance_ratio},
              {"cost_ratio", r.cost_ratio},
              {"selection_counts", counts},
              {"entry_count", r.entry_count}};
}

}  // namespace

std::string report_to_json(const HarnessReport& report) {
  json benchmarks = json::object();
  for (const auto& [name, bench] : report.benchmarks) {
    benchmarks[name] = benchmark_report_json(bench);
  }
  json doc = {{"strategy", report.strategy},
              {"beta", report.beta},
              {"all", benchmark_report_json(report.overall)},
              {"benchmarks", benchmarks}};
  return doc.dump(2);
}

}  // namespace modelmux
