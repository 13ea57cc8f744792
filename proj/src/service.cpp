#include "layoutseq/service.hpp"

#include <cstdio>

#include <httplib.h>

#include "layoutseq/error.hpp"
#include "layoutseq/log.hpp"
#include "layoutseq/metrics.hpp"
#include "layoutseq/relations.hpp"

namespace layoutseq {

using nlohmann::json;

namespace {

constexpr int kMaxSamples = 64;

HttpResponse error_response(int status, const std::string& message) { return {status, {{"error", message}}}; }

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownCategory: return 409;
    case ErrorKind::Capacity: return 422;
    case ErrorKind::InvalidInput:
    case ErrorKind::InvalidConstraint:
    case ErrorKind::EmptyLayout:
    case ErrorKind::Parse:
    case ErrorKind::Config: return 400;
    default: return 500;
  }
}

std::string opaque_id() {
  static std::atomic<std::uint64_t> n{0};
  char buf[32];
  std::snprintf(buf, sizeof buf, "E%08llx", static_cast<unsigned long long>(++n) * 2654435761ULL % 0xffffffffULL);
  return buf;
}

SamplerConfig sampler_options(const json& body, SamplerConfig cfg, int& n) {
  auto bad = [](const std::string& field, const std::string& what) {
    throw Error(ErrorKind::InvalidInput, "field '" + field + "': " + what);
  };
  if (auto it = body.find("n"); it != body.end()) {
    if (!it->is_number_integer() || it->get<long long>() < 1 || it->get<long long>() > kMaxSamples) {
      bad("n", "expected an integer in [1, " + std::to_string(kMaxSamples) + "]");
    }
    n = it->get<int>();
  }
  if (auto it = body.find("use_fsm"); it != body.end()) {
    if (!it->is_boolean()) bad("use_fsm", "expected a boolean");
    cfg.use_fsm = it->get<bool>();
  }
  if (auto it = body.find("strategy"); it != body.end()) {
    if (!it->is_string() || !parse_strategy(it->get<std::string>())) bad("strategy", "expected greedy or top-k");
    cfg.strategy = *parse_strategy(it->get<std::string>());
  }
  if (auto it = body.find("k"); it != body.end()) {
    if (!it->is_number_integer() || it->get<long long>() < 1) bad("k", "expected a positive integer");
    cfg.k = it->get<int>();
  }
  if (auto it = body.find("temperature"); it != body.end()) {
    if (!it->is_number() || !(it->get<double>() > 0.0)) bad("temperature", "expected a positive number");
    cfg.temperature = it->get<double>();
  }
  return cfg;
}

}  // namespace

Service::Service(ModelBundle bundle, SamplerConfig defaults, std::uint64_t base_seed)
    : bundle_(std::move(bundle)), defaults_(defaults), base_seed_(base_seed) {
  defaults_.with_prefix = bundle_.with_prefix;
  defaults_.validate();
}

Service::~Service() = default;

HttpResponse Service::meta() const {
  const auto& v = *bundle_.vocab;
  json tasks = json::array();
  for (Task t : kAllTasks) tasks.push_back(std::string(to_string(t)));
  return {200,
          {{"categories", v.categories().names()},
           {"background_labels", v.categories().background_labels()},
           {"bins", v.bins()},
           {"max_elements", v.max_elements()},
           {"model", to_json(bundle_.config)},
           {"snapshot_id", bundle_.snapshot_id},
           {"tasks", tasks}}};
}

HttpResponse Service::run(Task task, const json& body) const {
  const auto& vocab = *bundle_.vocab;
  int n = 1;
  SamplerConfig cfg = sampler_options(body, defaults_, n);
  if (auto it = body.find("seed"); it != body.end()) {
    if (!it->is_number_unsigned()) throw Error(ErrorKind::InvalidInput, "field 'seed': expected a non-negative integer");
    cfg.seed = it->get<std::uint64_t>();
  } else {
    cfg.seed = base_seed_ + counter_.fetch_add(1);
  }
  const ConstraintSpec spec = spec_from_json(body, vocab, task);

  json layouts = json::array();
  json flags = json::array();
  if (task == Task::Refinement) {
    const Layout out = refine(*bundle_.model, vocab, *spec.draft, cfg);
    layouts.push_back(layout_to_json(out, vocab.categories(), vocab.bins()));
    flags.push_back({{"parsed", true}});
  } else {
    const ConstraintSpec canonical = canonicalize_spec(spec, vocab.categories());
    for (const Sample& s : generate(*bundle_.model, vocab, spec, cfg, n)) {
      json f = {{"parsed", s.layout.has_value()}, {"fallback", s.flagged}, {"fsm_violations", s.violations}};
      if (s.layout) {
        layouts.push_back(layout_to_json(*s.layout, vocab.categories(), vocab.bins()));
        if (task == Task::GenR) {
          const auto& els = s.layout->elements;
          json violated = json::array();
          for (std::size_t r = 0; r < canonical.relationships.size(); ++r) {
            const auto& rel = canonical.relationships[r];
            const bool ok = rel.a < s.layout->size() && rel.b < s.layout->size() &&
                            relation_holds(rel.relation, els[static_cast<std::size_t>(rel.a)].box,
                                           els[static_cast<std::size_t>(rel.b)].box);
            if (!ok) violated.push_back(r);
          }
          f["violation_rate"] = violation_rate({s.layout}, {canonical});
          f["violated_relationships"] = violated;
        }
      } else {
        layouts.push_back(nullptr);
        f["error"] = s.error;
      }
      flags.push_back(std::move(f));
    }
  }
  return {200, {{"layouts", layouts}, {"flags", flags}, {"seed", cfg.seed}, {"snapshot_id", bundle_.snapshot_id}}};
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
  try {
    if (method == "GET" && path == "/meta") return meta();
    if (method != "POST") return error_response(method == "GET" ? 404 : 405, "no route for " + method + " " + path);
    std::optional<Task> task;
    if (path == "/refine") {
      task = Task::Refinement;
    } else if (path == "/complete") {
      task = Task::Completion;
    } else if (path.rfind("/generate/", 0) == 0) {
      const auto t = parse_task(path.substr(10));
      if (t && (*t == Task::UGen || *t == Task::GenT || *t == Task::GenTS || *t == Task::GenR)) task = t;
    }
    if (!task) return error_response(404, "no route for " + method + " " + path);
    json parsed;
    try {
      parsed = body.empty() ? json::object() : json::parse(body);
    } catch (const json::exception& e) {
      return error_response(400, std::string("body: malformed JSON: ") + e.what());
    }
    if (!parsed.is_object()) return error_response(400, "body: expected a JSON object");
    return run(*task, parsed);
  } catch (const Error& e) {
    const int status = status_for(e.kind());
    if (status != 500) return error_response(status, e.what());
    const std::string id = opaque_id();
    spdlog::error("request {} {} failed [{}]: {}", method, path, id, e.what());
    return error_response(500, "internal error " + id);
  } catch (const std::exception& e) {
    const std::string id = opaque_id();
    spdlog::error("request {} {} failed [{}]: {}", method, path, id, e.what());
    return error_response(500, "internal error " + id);
  }
}

int Service::bind(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  server_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Get(R"(/meta)", route);
  server_->Post(R"(/generate/[a-z-]+)", route);
  server_->Post(R"(/refine)", route);
  server_->Post(R"(/complete)", route);
  server_->Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorKind::Io, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void Service::listen() {
  if (!server_) throw Error(ErrorKind::State, "listen() before bind()");
  spdlog::info("serving snapshot {}", bundle_.snapshot_id);
  server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace layoutseq
