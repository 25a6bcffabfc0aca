#include "modelmux/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <semaphore>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "modelmux/util.hpp"

namespace modelmux {

namespace {

using nlohmann::json;

json fallback_json(const std::vector<FallbackUse>& fallbacks) {
  json out = json::array();
  for (const auto& f : fallbacks) {
    out.push_back({{"element", f.element}, {"kind", fallback_kind_name(f.kind)}});
  }
  return out;
}

json breakdown_json(const RoutingDecision& decision) {
  json out = json::object();
  for (const auto& [model, b] : decision.breakdown) {
    out[model] = {{"ks", b.knowledge_score},
                  {"cs", b.capability_score},
                  {"mixed", b.mixed_score},
                  {"cost_slope", b.mixed_cost_slope}};
  }
  return out;
}

void reply_error(httplib::Response& res, int status, const std::string& kind,
                 const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", kind}, {"message", message}}.dump(),
                  "application/json");
}

}  // namespace

struct Gateway::Impl {
  GatewayConfig config;
  TagMap corpus_tags;
  std::shared_ptr<TaggerClient> tagger;
  std::map<std::string, ModelInfo> registry;

  std::mutex snapshot_mutex;
  std::shared_ptr<const ScoreIndex> snapshot;

  std::mutex admin_mutex;  // serializes staging and rebuilds
  std::map<std::string, std::map<std::string, EvalAggregate>> staged;

  std::counting_semaphore<64> tagger_slots;
  std::mutex log_mutex;
  std::atomic<std::int64_t> seq{0};

  httplib::Server server;
  std::thread serve_thread;
  int bound_port = 0;

  Impl(GatewayConfig cfg, ScoreIndex index, TagMap tags,
       std::shared_ptr<TaggerClient> tag_client, std::vector<ModelInfo> models)
      : config(std::move(cfg)),
        corpus_tags(std::move(tags)),
        tagger(std::move(tag_client)),
        tagger_slots(std::max(1, std::min(64, config.tagger_concurrency))) {
    snapshot = std::make_shared<const ScoreIndex>(std::move(index));
    for (auto& info : models) registry.emplace(info.id, std::move(info));
    wire_routes();
  }

  std::shared_ptr<const ScoreIndex> current() {
    std::lock_guard<std::mutex> lock(snapshot_mutex);
    return snapshot;
  }

  void swap(std::shared_ptr<const ScoreIndex> next) {
    std::lock_guard<std::mutex> lock(snapshot_mutex);
    snapshot = std::move(next);
  }

  bool authorized(const httplib::Request& req) {
    if (config.admin_token.empty()) return false;
    auto header = req.get_header_value("Authorization");
    return header == "Bearer " + config.admin_token;
  }

  void log_request(const httplib::Request& req, int status,
                   const std::string& model_id, std::int64_t version) {
    if (config.request_log_path.empty()) return;
    json line = {{"seq", seq.fetch_add(1)},
                 {"method", req.method},
                 {"path", req.path},
                 {"status", status}};
    if (!model_id.empty()) line["model_id"] = model_id;
    if (version >= 0) line["index_version"] = version;
    std::lock_guard<std::mutex> lock(log_mutex);
    std::ofstream out(config.request_log_path, std::ios::app);
    if (out) out << line.dump() << "\n";
  }

  std::vector<std::string> default_pool(const ScoreIndex& index) {
    std::vector<std::string> pool;
    for (const auto& [model_id, profile] : index.models) {
      (void)profile;
      auto it = registry.find(model_id);
      if (it != registry.end() && !it->second.enabled) continue;
      pool.push_back(model_id);
    }
    return pool;
  }

  void handle_route(const httplib::Request& req, httplib::Response& res) {
    auto snap = current();
    const ScoreIndex& index = *snap;
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      reply_error(res, 400, "bad_request", "body must be a JSON object");
      log_request(req, res.status, "", index.version);
      return;
    }
    try {
      const bool has_text = body.contains("text");
      const bool has_tags = body.contains("tags");
      if (has_text == has_tags) {
        reply_error(res, 400, "bad_request",
                    "body needs exactly one of 'text' or 'tags'");
        log_request(req, res.status, "", index.version);
        return;
      }

      TagSet tags;
      double tagging_cost = 0.0;
      if (has_tags) {
        const auto& t = body["tags"];
        if (!t.is_object()) {
          reply_error(res, 400, "bad_request", "'tags' must be an object");
          log_request(req, res.status, "", index.version);
          return;
        }
        tags.knowledge = t.value("knowledge", std::vector<std::string>{});
        tags.capabilities = t.value("capabilities", std::vector<std::string>{});
      } else {
        if (!tagger) {
          reply_error(res, 503, "tagger_unavailable", "no tagger configured");
          log_request(req, res.status, "", index.version);
          return;
        }
        if (!body["text"].is_string()) {
          reply_error(res, 400, "bad_request", "'text' must be a string");
          log_request(req, res.status, "", index.version);
          return;
        }
        tagger_slots.acquire();
        try {
          TagResult result = tagger->tag(body["text"].get<std::string>());
          tagger_slots.release();
          tags = std::move(result.tags);
          tagging_cost = result.tagging_cost;
        } catch (...) {
          tagger_slots.release();
          throw;
        }
      }

      RoutingConfig cfg = config.routing;
      cfg.alpha = body.value("alpha", index.alpha_used);
      cfg.beta = body.value("beta", cfg.beta);
      cfg.gamma = body.value("gamma", cfg.gamma);
      cfg.delta = body.value("delta", cfg.delta);
      std::vector<std::string> pool =
          body.value("pool", std::vector<std::string>{});
      if (body.contains("pool") && pool.empty()) {
        throw Error(Error::Kind::EmptyPool, "requested pool is empty");
      }
      if (pool.empty()) pool = default_pool(index);

      RoutingDecision decision = route_query(index, tags, cfg, pool);
      TagSet used = canonical_tags(index, tags);
      json out = {
          {"model_id", decision.model_id},
          {"index_version", index.version},
          {"tagging_cost", tagging_cost},
          {"tags_used",
           {{"knowledge", used.knowledge}, {"capabilities", used.capabilities}}},
          {"fallbacks_used",
           fallback_json(decision.breakdown.at(decision.model_id).fallbacks_used)},
          {"breakdown", breakdown_json(decision)},
      };
      if (body.value("forward", false)) {
        forward(decision.model_id, body, out);
      }
      res.status = 200;
      res.set_content(out.dump(), "application/json");
      log_request(req, res.status, decision.model_id, index.version);
    } catch (const Error& e) {
      switch (e.kind()) {
        case Error::Kind::AlphaMismatch:
          reply_error(res, 409, "alpha_mismatch", e.what());
          break;
        case Error::Kind::EmptyPool:
        case Error::Kind::UnknownModel:
          reply_error(res, 422, "bad_pool", e.what());
          break;
        case Error::Kind::TaggerUnavailable:
        case Error::Kind::TaggerParseError:
        case Error::Kind::MissingTags:
          reply_error(res, 503, "tagger_unavailable", e.what());
          break;
        default:
          reply_error(res, 400, error_kind_name(e.kind()), e.what());
      }
      log_request(req, res.status, "", index.version);
    } catch (const json::exception& e) {
      reply_error(res, 400, "bad_request", e.what());
      log_request(req, res.status, "", index.version);
    }
  }

  void forward(const std::string& model_id, const json& body, json& out) {
    auto it = registry.find(model_id);
    if (it == registry.end() || it->second.endpoint.empty()) {
      out["forwarded"] = false;
      return;
    }
    httplib::Client client(it->second.endpoint);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    json payload = {{"model_id", model_id},
                    {"text", body.value("text", std::string())}};
    auto res = client.Post("/invoke", payload.dump(), "application/json");
    out["forwarded"] = static_cast<bool>(res);
    if (res) {
      out["forwarded_status"] = res->status;
      out["forwarded_body"] = res->body;
    }
  }

  void handle_models(const httplib::Request& req, httplib::Response& res) {
    auto snap = current();
    json models = json::array();
    std::map<std::string, json> merged;
    for (const auto& [model_id, profile] : snap->models) {
      merged[model_id] = {{"id", model_id},
                          {"record_count", profile.record_count},
                          {"in_index", true},
                          {"enabled", true}};
    }
    for (const auto& [model_id, info] : registry) {
      auto& row = merged[model_id];
      if (row.is_null()) {
        row = {{"id", model_id}, {"record_count", 0}, {"in_index", false}};
      }
      row["enabled"] = info.enabled;
      if (!info.display_name.empty()) row["display_name"] = info.display_name;
      if (info.cost_per_call > 0.0) row["cost_per_call"] = info.cost_per_call;
    }
    for (auto& [model_id, row] : merged) {
      (void)model_id;
      models.push_back(std::move(row));
    }
    res.set_content(json{{"models", models}}.dump(), "application/json");
    log_request(req, res.status, "", snap->version);
  }

  void handle_upload(const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req)) {
      reply_error(res, 401, "unauthorized", "admin token required");
      log_request(req, res.status, "", -1);
      return;
    }
    const std::string model_id = req.matches[1];
    try {
      std::istringstream body(req.body);
      RecordMap records = ingest_records(body);
      if (records.empty()) {
        reply_error(res, 400, "bad_request", "no records in body");
        log_request(req, res.status, model_id, -1);
        return;
      }
      std::map<std::string, EvalAggregate> slice;
      for (const auto& [key, agg] : records) {
        if (key.first != model_id) {
          reply_error(res, 400, "bad_request",
                      "record model_id '" + key.first +
                          "' does not match path model '" + model_id + "'");
          log_request(req, res.status, model_id, -1);
          return;
        }
        if (corpus_tags.find(key.second) == corpus_tags.end()) {
          reply_error(res, 400, "bad_request",
                      "query '" + key.second + "' is not in the corpus");
          log_request(req, res.status, model_id, -1);
          return;
        }
        slice.emplace(key.second, agg);
      }
      std::lock_guard<std::mutex> lock(admin_mutex);
      if (current()->models.count(model_id) > 0 || staged.count(model_id) > 0) {
        reply_error(res, 409, "conflict",
                    "model '" + model_id + "' already present");
        log_request(req, res.status, model_id, -1);
        return;
      }
      staged.emplace(model_id, std::move(slice));
      res.status = 200;
      res.set_content(json{{"staged_model", model_id},
                           {"staged_queries", staged[model_id].size()}}
                          .dump(),
                      "application/json");
      log_request(req, res.status, model_id, -1);
    } catch (const Error& e) {
      reply_error(res, 400, error_kind_name(e.kind()), e.what());
      log_request(req, res.status, model_id, -1);
    }
  }

  void handle_rebuild(const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req)) {
      reply_error(res, 401, "unauthorized", "admin token required");
      log_request(req, res.status, "", -1);
      return;
    }
    try {
      std::lock_guard<std::mutex> lock(admin_mutex);
      auto snap = current();
      ScoreIndex next = *snap;
      json applied = json::array();
      for (const auto& [model_id, slice] : staged) {
        next = add_model(next, model_id, slice, corpus_tags);
        applied.push_back(model_id);
      }
      staged.clear();
      auto fresh = std::make_shared<const ScoreIndex>(std::move(next));
      const std::int64_t version = fresh->version;
      swap(std::move(fresh));
      res.status = 200;
      res.set_content(
          json{{"version", version}, {"applied", applied}}.dump(),
          "application/json");
      log_request(req, res.status, "", version);
    } catch (const Error& e) {
      int status = e.kind() == Error::Kind::Conflict ? 409 : 400;
      reply_error(res, status, error_kind_name(e.kind()), e.what());
      log_request(req, res.status, "", -1);
    }
  }

  void handle_stats(const httplib::Request& req, httplib::Response& res) {
    auto snap = current();
    std::set<std::string> knowledge_elements;
    std::set<std::string> capability_elements;
    for (const auto& [model_id, profile] : snap->models) {
      (void)model_id;
      for (const auto& [element, stat] : profile.knowledge_stats) {
        (void)stat;
        knowledge_elements.insert(element);
      }
      for (const auto& [element, stat] : profile.capability_stats) {
        (void)stat;
        capability_elements.insert(element);
      }
    }
    std::int64_t total_freq = 0;
    std::int64_t other_freq = 0;
    for (const auto& [label, freq] : snap->vocabulary.frequencies) {
      total_freq += freq;
      if (snap->vocabulary.other_members.count(label) > 0) other_freq += freq;
    }
    json out = {
        {"version", snap->version},
        {"alpha_used", snap->alpha_used},
        {"model_count", snap->models.size()},
        {"knowledge_elements", knowledge_elements.size()},
        {"capability_elements", capability_elements.size()},
        {"other_share",
         total_freq > 0 ? static_cast<double>(other_freq) / total_freq : 0.0},
    };
    res.set_content(out.dump(), "application/json");
    log_request(req, res.status, "", snap->version);
  }

  void wire_routes() {
    server.Post("/v1/route", [this](const httplib::Request& req,
                                    httplib::Response& res) {
      handle_route(req, res);
    });
    server.Get("/v1/models", [this](const httplib::Request& req,
                                    httplib::Response& res) {
      handle_models(req, res);
    });
    server.Post(R"(/v1/models/([^/]+)/records)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  handle_upload(req, res);
                });
    server.Post("/v1/index/rebuild", [this](const httplib::Request& req,
                                            httplib::Response& res) {
      handle_rebuild(req, res);
    });
    server.Get("/v1/index/stats", [this](const httplib::Request& req,
                                         httplib::Response& res) {
      handle_stats(req, res);
    });
    server.Get("/healthz",
               [this](const httplib::Request& req, httplib::Response& res) {
                 res.set_content("ok", "text/plain");
                 log_request(req, res.status, "", -1);
               });
  }
};

Gateway::Gateway(GatewayConfig config, ScoreIndex index, TagMap corpus_tags,
                 std::shared_ptr<TaggerClient> tagger,
                 std::vector<ModelInfo> registry)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(index),
                                   std::move(corpus_tags), std::move(tagger),
                                   std::move(registry))) {}

Gateway::~Gateway() { stop(); }

int Gateway::start() {
  if (impl_->config.port == 0) {
    impl_->bound_port =
        impl_->server.bind_to_any_port(impl_->config.bind_addr);
  } else {
    if (!impl_->server.bind_to_port(impl_->config.bind_addr,
                                    impl_->config.port)) {
      throw Error(Error::Kind::InvalidConfig,
                  "cannot bind " + impl_->config.bind_addr + ":" +
                      std::to_string(impl_->config.port));
    }
    impl_->bound_port = impl_->config.port;
  }
  if (impl_->bound_port <= 0) {
    throw Error(Error::Kind::InvalidConfig,
                "cannot bind " + impl_->config.bind_addr);
  }
  impl_->serve_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->bound_port;
}

void Gateway::stop() {
  if (impl_->serve_thread.joinable()) {
    impl_->server.stop();
    impl_->serve_thread.join();
  }
}

int Gateway::port() const { return impl_->bound_port; }

}  // namespace modelmux
