#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "layoutseq/io.hpp"
#include "layoutseq/sampler.hpp"

namespace httplib {
class Server;
}

namespace layoutseq {

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

/// HTTP/JSON front end over one frozen model snapshot.
///   GET  /meta
///   POST /generate/{ugen|gen-t|gen-ts|gen-r}
///   POST /refine
///   POST /complete
/// Bodies carry constraint fields (types as names, sizes and boxes in
/// bins) plus optional n, seed, use_fsm, strategy, k, temperature.
class Service {
 public:
  Service(ModelBundle bundle, SamplerConfig defaults, std::uint64_t base_seed = 0);
  ~Service();

  /// Routes one request without a socket.
  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

  /// Binds `host:port` (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();

  const ModelBundle& bundle() const { return bundle_; }

 private:
  HttpResponse meta() const;
  HttpResponse run(Task task, const nlohmann::json& body) const;

  ModelBundle bundle_;
  SamplerConfig defaults_;
  std::uint64_t base_seed_;
  mutable std::atomic<std::uint64_t> counter_{0};
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace layoutseq
