#pragma once

#include <memory>
#include <string>
#include <vector>

#include "modelmux/index.hpp"
#include "modelmux/tagger.hpp"

namespace modelmux {

struct ModelInfo {
  std::string id;
  std::string display_name;
  std::string endpoint;  // pass-through target; empty disables forwarding
  double cost_per_call = 0.0;
  bool enabled = true;
};

struct GatewayConfig {
  std::string bind_addr = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::string admin_token;  // empty keeps admin endpoints locked
  RoutingConfig routing;    // alpha is taken from the index snapshot
  int tagger_concurrency = 4;
  std::string request_log_path;  // JSONL, one line per request; optional
};

// HTTP gateway over one index snapshot. Requests read an immutable snapshot
// behind a shared_ptr; rebuilds swap the pointer, so every response carries
// exactly one index generation.
//
// Endpoints:
//   POST /v1/route                 decision for {"text"} or {"tags"}
//   GET  /v1/models                registry merged with index membership
//   POST /v1/models/:id/records    stage eval records (admin)
//   POST /v1/index/rebuild         apply staged models via add_model (admin)
//   GET  /v1/index/stats           generation, model/element counts, OTHER share
//   GET  /healthz                  liveness
class Gateway {
 public:
  // corpus_tags are the canonical corpus queries the index was built from;
  // staged record uploads must reference them.
  Gateway(GatewayConfig config, ScoreIndex index, TagMap corpus_tags,
          std::shared_ptr<TaggerClient> tagger = nullptr,
          std::vector<ModelInfo> registry = {});
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  void stop();

  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace modelmux
