#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "modelmux/gateway.hpp"
#include "modelmux/harness.hpp"
#include "modelmux/index.hpp"
#include "modelmux/tagger.hpp"
#include "modelmux/util.hpp"

namespace {

using nlohmann::json;
using namespace modelmux;

// Exit codes: 0 ok, 2 usage/validation, 3 dependency unavailable, 4 data.
constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kDependency = 3;
constexpr int kData = 4;

int exit_code(const Error& e, bool data_errors_are_usage) {
  switch (e.kind()) {
    case Error::Kind::InvalidConfig:
    case Error::Kind::InvalidLabel:
    case Error::Kind::InvalidQuery:
    case Error::Kind::AlphaMismatch:
    case Error::Kind::EmptyPool:
    case Error::Kind::UnknownModel:
    case Error::Kind::Conflict:
      return kUsage;
    case Error::Kind::EmbeddingUnavailable:
    case Error::Kind::TaggerUnavailable:
      return kDependency;
    default:
      return data_errors_are_usage ? kUsage : kData;
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Error::Kind::ParseError, "cannot open " + path);
  }
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(Error::Kind::ParseError, "cannot open " + path + " for writing");
  }
  return out;
}

struct EmbedFlags {
  std::string url;
  std::string model = "text-embedding-3-small";
  std::string api_key;
  std::string cache;
  std::uint64_t stub_seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--embed-url", url,
                    "Embedding service base URL; unset uses the built-in "
                    "deterministic hash embedder")
        ->envname("EMBED_API_URL");
    cmd->add_option("--embed-model", model, "Embedding model name")
        ->envname("EMBED_MODEL");
    cmd->add_option("--embed-api-key", api_key, "Embedding service API key")
        ->envname("EMBED_API_KEY");
    cmd->add_option("--embed-cache", cache, "Embedding response cache (JSONL)");
    cmd->add_option("--stub-seed", stub_seed,
                    "Seed for the built-in hash embedder");
  }

  std::unique_ptr<EmbeddingProvider> make() const {
    if (url.empty()) return make_stub_provider(stub_seed);
    HttpEmbeddingConfig cfg;
    cfg.base_url = url;
    cfg.model = model;
    cfg.api_key = api_key;
    cfg.cache_path = cache;
    return make_http_provider(cfg);
  }
};

struct TaggerFlags {
  std::string url;
  std::string model = "gpt-4o-mini";
  std::string api_key;
  std::string transcript;
  double cost_per_call = 0.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--tagger-url", url, "Tagger chat-completions base URL")
        ->envname("TAGGER_API_URL");
    cmd->add_option("--tagger-model", model, "Tagger model name")
        ->envname("TAGGER_MODEL");
    cmd->add_option("--tagger-api-key", api_key, "Tagger API key")
        ->envname("TAGGER_API_KEY");
    cmd->add_option("--tagger-cost", cost_per_call,
                    "Flat tagging cost charged per call")
        ->envname("TAGGER_COST_PER_CALL");
    cmd->add_option("--tagger-transcript", transcript,
                    "Record tagger request/response pairs (JSONL)");
  }

  bool configured() const { return !url.empty(); }

  std::shared_ptr<TaggerClient> make(const CapabilityTaxonomy& taxonomy) const {
    if (!configured()) return nullptr;
    HttpTaggerConfig cfg;
    cfg.base_url = url;
    cfg.model = model;
    cfg.api_key = api_key;
    cfg.transcript_path = transcript;
    cfg.cost_per_call = cost_per_call;
    return make_http_tagger(cfg, taxonomy);
  }
};

json decision_json(const ScoreIndex& index, const TagSet& tags,
                   const RoutingDecision& decision) {
  TagSet used = canonical_tags(index, tags);
  json breakdown = json::object();
  for (const auto& [model, b] : decision.breakdown) {
    breakdown[model] = {{"ks", b.knowledge_score},
                        {"cs", b.capability_score},
                        {"mixed", b.mixed_score},
                        {"cost_slope", b.mixed_cost_slope}};
  }
  json fallbacks = json::array();
  for (const auto& f : decision.breakdown.at(decision.model_id).fallbacks_used) {
    fallbacks.push_back(
        {{"element", f.element}, {"kind", fallback_kind_name(f.kind)}});
  }
  return json{{"model_id", decision.model_id},
              {"index_version", index.version},
              {"tags_used",
               {{"knowledge", used.knowledge},
                {"capabilities", used.capabilities}}},
              {"fallbacks_used", fallbacks},
              {"breakdown", breakdown}};
}

void write_tags_file(const TagMap& tags, std::ostream& out) {
  for (const auto& [query_id, t] : tags) {
    json line = {{"capabilities", t.capabilities},
                 {"knowledge", t.knowledge},
                 {"query_id", query_id}};
    out << line.dump() << "\n";
  }
}

void write_records_file(const RecordMap& records, std::ostream& out) {
  for (const auto& [key, agg] : records) {
    json line = {{"model_id", key.first},
                 {"query_id", key.second},
                 {"trial_costs", json::array({agg.cost})},
                 {"trial_scores", json::array({agg.score})}};
    out << line.dump() << "\n";
  }
}

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-aware LLM query router"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (TOML); flags and environment "
                                 "variables take precedence");

  // ---- build-index ----
  auto* build = app.add_subcommand(
      "build-index", "Build a score index from evaluation records and tags");
  struct {
    std::string records, tags, out;
    double alpha = 0.5, sim_threshold = 0.6;
    std::int64_t freq_floor = 10;
    EmbedFlags embed;
  } bi;
  build->add_option("--records", bi.records, "Evaluation records (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--tags", bi.tags, "Query tags (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--out", bi.out, "Output index file")->required();
  build->add_option("--alpha", bi.alpha, "Rank decay, > 0")
      ->envname("MODELMUX_ALPHA");
  build->add_option("--sim-threshold", bi.sim_threshold,
                    "Vocabulary cosine similarity threshold")
      ->envname("MODELMUX_SIM_THRESHOLD");
  build->add_option("--freq-floor", bi.freq_floor,
                    "Minimum cluster frequency before OTHER absorption")
      ->envname("MODELMUX_FREQ_FLOOR");
  bi.embed.attach(build);

  // ---- route ----
  auto* route_cmd =
      app.add_subcommand("route", "Route one query against an index");
  struct {
    std::string index, tags_json, text;
    std::vector<std::string> pool;
    double beta = 0.0, gamma = 1.0, delta = 1.0;
    TaggerFlags tagger;
  } rt;
  route_cmd->add_option("--index", rt.index, "Index file")
      ->required()
      ->check(CLI::ExistingFile);
  auto* tags_opt = route_cmd->add_option(
      "--tags-json", rt.tags_json,
      R"(Inline tags, e.g. {"knowledge":["algebra"],"capabilities":["coding"]})");
  auto* text_opt = route_cmd->add_option(
      "--text", rt.text, "Raw query text; requires a configured tagger");
  tags_opt->excludes(text_opt);
  text_opt->excludes(tags_opt);
  route_cmd->add_option("--beta", rt.beta, "Cost penalty")
      ->envname("MODELMUX_BETA");
  route_cmd->add_option("--gamma", rt.gamma, "Knowledge score weight")
      ->envname("MODELMUX_GAMMA");
  route_cmd->add_option("--delta", rt.delta, "Capability score weight")
      ->envname("MODELMUX_DELTA");
  route_cmd->add_option("--pool", rt.pool, "Restrict candidates (comma list)")
      ->delimiter(',');
  rt.tagger.attach(route_cmd);

  // ---- simulate ----
  auto* sim = app.add_subcommand(
      "simulate", "Replay a trace under one routing strategy");
  struct {
    std::string index, trace, strategy = "mixed", csv, json_out;
    std::uint64_t seed = 0;
    double beta = 0.0, gamma = 1.0, delta = 1.0;
    std::vector<std::string> pool;
  } sm;
  sim->add_option("--index", sm.index, "Index file")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--trace", sm.trace, "Trace file (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--strategy", sm.strategy,
                  "mixed | knowledge_only | capability_only | random | "
                  "fixed:<model>");
  sim->add_option("--seed", sm.seed, "Seed for the random strategy");
  sim->add_option("--beta", sm.beta, "Cost penalty")->envname("MODELMUX_BETA");
  sim->add_option("--gamma", sm.gamma, "Knowledge score weight")
      ->envname("MODELMUX_GAMMA");
  sim->add_option("--delta", sm.delta, "Capability score weight")
      ->envname("MODELMUX_DELTA");
  sim->add_option("--pool", sm.pool, "Restrict candidates (comma list)")
      ->delimiter(',');
  sim->add_option("--csv", sm.csv, "Write the report CSV here");
  sim->add_option("--json", sm.json_out, "Write the report JSON here");

  // ---- sweep-beta ----
  auto* sweep = app.add_subcommand(
      "sweep-beta", "Replay a trace across an ascending beta grid");
  struct {
    std::string index, trace, csv, slopes_csv;
    std::vector<double> betas;
    double gamma = 1.0, delta = 1.0;
  } sb;
  sweep->add_option("--index", sb.index, "Index file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--trace", sb.trace, "Trace file (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--betas", sb.betas, "Ascending beta grid (comma list)")
      ->required()
      ->delimiter(',');
  sweep->add_option("--gamma", sb.gamma, "Knowledge score weight")
      ->envname("MODELMUX_GAMMA");
  sweep->add_option("--delta", sb.delta, "Capability score weight")
      ->envname("MODELMUX_DELTA");
  sweep->add_option("--csv", sb.csv, "Write the report CSV here");
  sweep->add_option("--slopes-csv", sb.slopes_csv,
                    "Write per-query chosen cost slopes (beta,query_id,slope)");

  // ---- dynamic-pool ----
  auto* dyn = app.add_subcommand(
      "dynamic-pool", "Replay a trace while the candidate pool grows");
  struct {
    std::string index, trace, json_out, csv;
    std::vector<std::string> additions;
    double beta = 0.0, gamma = 1.0, delta = 1.0;
  } dp;
  dyn->add_option("--index", dp.index, "Index file")
      ->required()
      ->check(CLI::ExistingFile);
  dyn->add_option("--trace", dp.trace, "Trace file (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  dyn->add_option("--additions", dp.additions,
                  "Models joining the pool, in order (comma list)")
      ->required()
      ->delimiter(',');
  dyn->add_option("--beta", dp.beta, "Cost penalty")->envname("MODELMUX_BETA");
  dyn->add_option("--gamma", dp.gamma, "Knowledge score weight")
      ->envname("MODELMUX_GAMMA");
  dyn->add_option("--delta", dp.delta, "Capability score weight")
      ->envname("MODELMUX_DELTA");
  dyn->add_option("--json", dp.json_out, "Write per-step results here");
  dyn->add_option("--csv", dp.csv, "Write per-step report rows here");

  // ---- domain-dist ----
  auto* dom = app.add_subcommand(
      "domain-dist", "Weighted-rank domain distribution from a tags file");
  struct {
    std::string tags, csv;
  } dd;
  dom->add_option("--tags", dd.tags, "Query tags (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  dom->add_option("--csv", dd.csv, "Write domain,percent rows here");

  // ---- serve ----
  auto* serve = app.add_subcommand("serve", "Run the HTTP routing gateway");
  struct {
    std::string index, tags, addr = "127.0.0.1:8080", admin_token, registry;
    std::string request_log;
    double beta = 0.0, gamma = 1.0, delta = 1.0;
    int tagger_concurrency = 4;
    TaggerFlags tagger;
  } sv;
  serve->add_option("--index", sv.index, "Index file")
      ->required()
      ->check(CLI::ExistingFile);
  serve->add_option("--tags", sv.tags,
                    "Corpus tags (JSONL); enables record staging")
      ->check(CLI::ExistingFile);
  serve->add_option("--addr", sv.addr, "host:port to bind")
      ->envname("ROUTER_BIND_ADDR");
  serve->add_option("--admin-token", sv.admin_token,
                    "Bearer token guarding admin endpoints")
      ->envname("ROUTER_ADMIN_TOKEN");
  serve->add_option("--registry", sv.registry,
                    "Model registry JSON (id, display_name, endpoint, "
                    "cost_per_call, enabled)")
      ->check(CLI::ExistingFile);
  serve->add_option("--request-log", sv.request_log,
                    "Request log (JSONL), one line per request");
  serve->add_option("--beta", sv.beta, "Cost penalty")->envname("MODELMUX_BETA");
  serve->add_option("--gamma", sv.gamma, "Knowledge score weight")
      ->envname("MODELMUX_GAMMA");
  serve->add_option("--delta", sv.delta, "Capability score weight")
      ->envname("MODELMUX_DELTA");
  serve->add_option("--tagger-concurrency", sv.tagger_concurrency,
                    "Max concurrent tagger calls");
  sv.tagger.attach(serve);

  // ---- synth ----
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic corpus and trace for experiments");
  struct {
    std::string out_dir;
    int models = 4, domains = 4;
    double diag = 0.9, off = 0.5;
    int index_queries = 2000, trace_queries = 1000, trials = 1;
    int min_tags = 1, max_tags = 1;
    double alpha = 0.5, tagging_cost = 0.0;
    std::vector<double> costs;
    std::uint64_t seed = 42;
  } sy;
  synth->add_option("--out-dir", sy.out_dir, "Output directory")->required();
  synth->add_option("--models", sy.models, "Model count");
  synth->add_option("--domains", sy.domains, "Domain count");
  synth->add_option("--diag", sy.diag, "Expertise on the model's own domain");
  synth->add_option("--off", sy.off, "Expertise elsewhere");
  synth->add_option("--index-queries", sy.index_queries, "Indexed query count");
  synth->add_option("--trace-queries", sy.trace_queries, "Held-out query count");
  synth->add_option("--trials", sy.trials, "Trials per (model, query)");
  synth->add_option("--min-tags", sy.min_tags, "Min knowledge tags per query");
  synth->add_option("--max-tags", sy.max_tags, "Max knowledge tags per query");
  synth->add_option("--alpha", sy.alpha, "Rank decay for multi-tag blending");
  synth->add_option("--tagging-cost", sy.tagging_cost,
                    "Tagging cost attached to each trace entry");
  synth->add_option("--costs", sy.costs, "Per-model call costs (comma list)")
      ->delimiter(',');
  synth->add_option("--seed", sy.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const CapabilityTaxonomy taxonomy = CapabilityTaxonomy::defaults();

  try {
    if (build->parsed()) {
      if (!(bi.alpha > 0.0)) {
        std::cerr << "error: --alpha must be > 0\n";
        return kUsage;
      }
      auto tags_in = open_input(bi.tags);
      TagMap raw_tags = load_tags(tags_in, taxonomy);
      auto records_in = open_input(bi.records);
      RecordMap records = ingest_records(records_in);
      auto provider = bi.embed.make();
      Vocabulary vocab =
          build_vocabulary(knowledge_occurrences(raw_tags), *provider,
                           bi.sim_threshold, bi.freq_floor);
      IndexCorpus corpus = make_corpus(raw_tags, records, vocab);
      std::vector<std::string> warnings;
      ScoreIndex index =
          build_index(corpus, vocab, taxonomy, bi.alpha, &warnings);
      save_index(index, bi.out);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      std::set<std::string> elements;
      for (const auto& [model_id, profile] : index.models) {
        (void)model_id;
        for (const auto& [element, stat] : profile.knowledge_stats) {
          (void)stat;
          elements.insert(element);
        }
      }
      std::int64_t total = 0, other = 0;
      for (const auto& [label, freq] : vocab.frequencies) {
        total += freq;
        if (vocab.other_members.count(label) > 0) other += freq;
      }
      std::cout << "models: " << index.models.size()
                << "\nknowledge elements: " << elements.size()
                << "\nother share: "
                << format_double(total > 0 ? double(other) / total : 0.0)
                << "\nwrote " << bi.out << "\n";
      return kOk;
    }

    if (route_cmd->parsed()) {
      ScoreIndex index = load_index(rt.index);
      TagSet tags;
      if (!rt.tags_json.empty()) {
        json parsed = json::parse(rt.tags_json, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) {
          std::cerr << "error: --tags-json is not a JSON object\n";
          return kUsage;
        }
        tags.knowledge = parsed.value("knowledge", std::vector<std::string>{});
        tags.capabilities =
            parsed.value("capabilities", std::vector<std::string>{});
      } else if (!rt.text.empty()) {
        auto tagger = rt.tagger.make(taxonomy);
        if (!tagger) {
          std::cerr << "error: --text requires a tagger (set TAGGER_API_URL "
                       "or --tagger-url)\n";
          return kDependency;
        }
        tags = tagger->tag(rt.text).tags;
      } else {
        std::cerr << "error: one of --tags-json or --text is required\n";
        return kUsage;
      }
      RoutingConfig cfg;
      cfg.alpha = index.alpha_used;
      cfg.beta = rt.beta;
      cfg.gamma = rt.gamma;
      cfg.delta = rt.delta;
      RoutingDecision decision = route_query(index, tags, cfg, rt.pool);
      std::cout << decision_json(index, tags, decision).dump(2) << "\n";
      return kOk;
    }

    if (sim->parsed()) {
      ScoreIndex index = load_index(sm.index);
      auto trace_in = open_input(sm.trace);
      TraceSet trace = load_trace(trace_in, taxonomy);
      Strategy strategy = parse_strategy(sm.strategy);
      if (strategy.kind == Strategy::Kind::Random && sm.seed != 0) {
        strategy.seed = sm.seed;
      }
      RoutingConfig cfg;
      cfg.alpha = index.alpha_used;
      cfg.beta = sm.beta;
      cfg.gamma = sm.gamma;
      cfg.delta = sm.delta;
      HarnessReport report = replay(trace, index, cfg, strategy, sm.pool);
      if (!sm.csv.empty()) {
        auto out = open_output(sm.csv);
        write_report_csv({report}, out);
      }
      if (!sm.json_out.empty()) {
        auto out = open_output(sm.json_out);
        out << report_to_json(report) << "\n";
      }
      std::cout << report_to_json(report) << "\n";
      return kOk;
    }

    if (sweep->parsed()) {
      ScoreIndex index = load_index(sb.index);
      auto trace_in = open_input(sb.trace);
      TraceSet trace = load_trace(trace_in, taxonomy);
      RoutingConfig cfg;
      cfg.alpha = index.alpha_used;
      cfg.gamma = sb.gamma;
      cfg.delta = sb.delta;
      auto steps = beta_sweep(trace, index, cfg, sb.betas);
      std::vector<HarnessReport> reports;
      for (const auto& step : steps) reports.push_back(step.report);
      if (!sb.csv.empty()) {
        auto out = open_output(sb.csv);
        write_report_csv(reports, out);
      }
      if (!sb.slopes_csv.empty()) {
        auto out = open_output(sb.slopes_csv);
        out << "beta,query_id,cost_slope\n";
        for (const auto& step : steps) {
          for (const auto& [query_id, slope] : step.cost_slopes) {
            out << format_double(step.beta) << "," << query_id << ","
                << format_double(slope) << "\n";
          }
        }
      }
      for (const auto& step : steps) {
        std::cout << "beta " << format_double(step.beta) << ": routed "
                  << format_double(step.report.overall.routed_score)
                  << ", cost ratio "
                  << format_double(step.report.overall.cost_ratio) << "\n";
      }
      return kOk;
    }

    if (dyn->parsed()) {
      ScoreIndex index = load_index(dp.index);
      auto trace_in = open_input(dp.trace);
      TraceSet trace = load_trace(trace_in, taxonomy);
      RoutingConfig cfg;
      cfg.alpha = index.alpha_used;
      cfg.beta = dp.beta;
      cfg.gamma = dp.gamma;
      cfg.delta = dp.delta;
      auto steps = dynamic_pool_experiment(trace, index, cfg, dp.additions);
      json out_steps = json::array();
      std::vector<HarnessReport> reports;
      for (const auto& step : steps) {
        json singles = json::object();
        for (const auto& [model, score] : step.single_scores) {
          singles[model] = score;
        }
        out_steps.push_back({{"pool", step.pool},
                             {"routed_score", step.report.overall.routed_score},
                             {"best_single_model",
                              step.report.overall.best_single_model_id},
                             {"best_single_score",
                              step.report.overall.best_single_score},
                             {"single_scores", singles}});
        HarnessReport named = step.report;
        std::string pool_name;
        for (const auto& m : step.pool) {
          if (!pool_name.empty()) pool_name += "+";
          pool_name += m;
        }
        named.strategy = "mixed|pool=" + pool_name;
        reports.push_back(std::move(named));
      }
      if (!dp.csv.empty()) {
        auto out = open_output(dp.csv);
        write_report_csv(reports, out);
      }
      json doc = {{"steps", out_steps}};
      if (!dp.json_out.empty()) {
        auto out = open_output(dp.json_out);
        out << doc.dump(2) << "\n";
      }
      std::cout << doc.dump(2) << "\n";
      return kOk;
    }

    if (dom->parsed()) {
      auto tags_in = open_input(dd.tags);
      TagMap tags = load_tags(tags_in, taxonomy);
      std::vector<std::vector<std::string>> lists;
      for (const auto& [query_id, t] : tags) {
        (void)query_id;
        if (!t.knowledge.empty()) lists.push_back(t.knowledge);
      }
      DomainDistribution dist = domain_distribution(lists);
      if (!dd.csv.empty()) {
        auto out = open_output(dd.csv);
        out << "domain,percent\n";
        for (const auto& [domain, pct] : dist.percentages) {
          out << domain << "," << format_double(pct) << "\n";
        }
      }
      json percentages = json::object();
      for (const auto& [domain, pct] : dist.percentages) {
        percentages[domain] = pct;
      }
      std::cout << json{{"percentages", percentages}}.dump(2) << "\n";
      return kOk;
    }

    if (serve->parsed()) {
      ScoreIndex index = load_index(sv.index);
      TagMap corpus_tags;
      if (!sv.tags.empty()) {
        auto tags_in = open_input(sv.tags);
        TagMap raw = load_tags(tags_in, taxonomy);
        for (const auto& [query_id, t] : raw) {
          corpus_tags.emplace(query_id, canonical_tags(index, t));
        }
      }
      std::vector<ModelInfo> registry;
      if (!sv.registry.empty()) {
        auto reg_in = open_input(sv.registry);
        json parsed = json::parse(reg_in, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_array()) {
          std::cerr << "error: registry must be a JSON array\n";
          return kUsage;
        }
        for (const auto& row : parsed) {
          ModelInfo info;
          info.id = row.value("id", std::string());
          info.display_name = row.value("display_name", std::string());
          info.endpoint = row.value("endpoint", std::string());
          info.cost_per_call = row.value("cost_per_call", 0.0);
          info.enabled = row.value("enabled", true);
          if (info.id.empty()) {
            std::cerr << "error: registry entry without id\n";
            return kUsage;
          }
          registry.push_back(std::move(info));
        }
      }
      GatewayConfig cfg;
      auto colon = sv.addr.rfind(':');
      if (colon == std::string::npos) {
        cfg.bind_addr = sv.addr;
        cfg.port = 8080;
      } else {
        cfg.bind_addr = sv.addr.substr(0, colon);
        cfg.port = std::stoi(sv.addr.substr(colon + 1));
      }
      cfg.admin_token = sv.admin_token;
      cfg.routing.alpha = index.alpha_used;
      cfg.routing.beta = sv.beta;
      cfg.routing.gamma = sv.gamma;
      cfg.routing.delta = sv.delta;
      cfg.tagger_concurrency = sv.tagger_concurrency;
      cfg.request_log_path = sv.request_log;
      Gateway gateway(cfg, std::move(index), std::move(corpus_tags),
                      sv.tagger.make(taxonomy), std::move(registry));
      int port = gateway.start();
      std::cout << "listening on " << cfg.bind_addr << ":" << port << std::endl;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      while (!g_stop.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      gateway.stop();
      return kOk;
    }

    if (synth->parsed()) {
      SyntheticSpec spec;
      for (int i = 0; i < sy.models; ++i) {
        spec.models.push_back("m" + std::to_string(i + 1));
      }
      for (int i = 0; i < sy.domains; ++i) {
        spec.domains.push_back("d" + std::to_string(i + 1));
      }
      spec.expertise.assign(sy.models, std::vector<double>(sy.domains, sy.off));
      for (int i = 0; i < std::min(sy.models, sy.domains); ++i) {
        spec.expertise[i][i] = sy.diag;
      }
      spec.model_costs = sy.costs;
      spec.index_queries = sy.index_queries;
      spec.trace_queries = sy.trace_queries;
      spec.trials = sy.trials;
      spec.min_tags = sy.min_tags;
      spec.max_tags = sy.max_tags;
      spec.alpha = sy.alpha;
      spec.tagging_cost = sy.tagging_cost;
      spec.seed = sy.seed;
      SyntheticData data = generate_synthetic(spec);
      std::filesystem::create_directories(sy.out_dir);
      {
        auto out = open_output(sy.out_dir + "/tags.jsonl");
        write_tags_file(data.tags, out);
      }
      {
        auto out = open_output(sy.out_dir + "/records.jsonl");
        write_records_file(data.records, out);
      }
      {
        auto out = open_output(sy.out_dir + "/trace.jsonl");
        save_trace(data.trace, out);
      }
      std::cout << "wrote " << sy.out_dir << "/{tags,records,trace}.jsonl\n";
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << error_kind_name(e.kind()) << "): " << e.what()
              << "\n";
    return exit_code(e, build->parsed());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
