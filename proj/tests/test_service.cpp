#include <algorithm>
#include <chrono>
#include <future>
#include <thread>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "layoutseq/service.hpp"

// After Eigen: resolv.h defines _res as a macro.
#include <httplib.h>

using namespace layoutseq;
using nlohmann::json;

namespace {

ModelBundle tiny_bundle() {
  ModelBundle b;
  b.config.layers = 1;
  b.config.heads = 2;
  b.config.d_model = 16;
  b.config.d_ff = 32;
  b.config.max_input_len = 128;
  b.config.max_output_len = 121;
  b.config.dropout = 0.0;
  b.vocab = std::make_unique<Vocabulary>(testing::five_categories(), kDefaultBins, kDefaultMaxElements);
  b.model = std::make_unique<Seq2SeqModel>(b.config, b.vocab->size(), 5);
  b.snapshot_id = "snap-test";
  return b;
}

const Service& service() {
  static const Service s(tiny_bundle(), SamplerConfig{}, 100);
  return s;
}

HttpResponse post(const std::string& path, const json& body) { return service().handle("POST", path, body.dump()); }

std::vector<std::string> names(const json& layout) {
  std::vector<std::string> out;
  for (const auto& e : layout["elements"]) out.push_back(e["category"]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("meta describes the snapshot") {
  const auto r = service().handle("GET", "/meta", "");
  CHECK(r.status == 200);
  CHECK(r.body["categories"] == json{"button", "icon", "image", "text", "title"});
  CHECK(r.body["bins"] == 128);
  CHECK(r.body["max_elements"] == 20);
  CHECK(r.body["snapshot_id"] == "snap-test");
  CHECK(r.body["model"]["d_model"] == 16);
  CHECK(r.body["tasks"].size() == 6);
}

TEST_CASE("ugen with a pinned seed is stable") {
  const json body = {{"n", 3}, {"seed", 1}};
  const auto a = post("/generate/ugen", body);
  REQUIRE(a.status == 200);
  CHECK(a.body["layouts"].size() == 3);
  for (const auto& f : a.body["flags"]) CHECK(f["parsed"] == true);
  for (const auto& l : a.body["layouts"]) {
    CHECK(!l.is_null());
    CHECK(l["canvas"]["w"] == 128);
  }
  CHECK(post("/generate/ugen", body).body == a.body);
  CHECK(a.body["seed"] == 1);
}

TEST_CASE("replay depends only on the body") {
  // Unrelated traffic in between must not change a pinned response.
  const json body = {{"types", {"text", "button", "text"}}, {"n", 2}, {"seed", 42}};
  const auto first = post("/generate/gen-t", body);
  post("/generate/ugen", {{"n", 2}});
  post("/generate/gen-t", {{"types", {"icon"}}});
  const auto second = post("/generate/gen-t", body);
  CHECK(first.status == 200);
  CHECK(first.body == second.body);
}

TEST_CASE("gen-ts triples come back exactly") {
  const json body = {{"types", {"title", "image"}}, {"sizes", {{{"w", 100}, {"h", 12}}, {{"w", 40}, {"h", 64}}}},
                     {"use_fsm", true}, {"n", 5}, {"seed", 3}};
  const auto r = post("/generate/gen-ts", body);
  REQUIRE(r.status == 200);
  for (const auto& l : r.body["layouts"]) {
    std::vector<std::tuple<std::string, int, int>> got;
    for (const auto& e : l["elements"]) got.emplace_back(e["category"], e["bbox"][2], e["bbox"][3]);
    std::sort(got.begin(), got.end());
    CHECK(got == std::vector<std::tuple<std::string, int, int>>{{"image", 40, 64}, {"title", 100, 12}});
  }
}

TEST_CASE("gen-r reports violations per layout") {
  const json body = {{"types", {"image", "text"}},
                     {"relationships", {{{"a", 0}, {"b", 1}, {"relation", "above"}}}},
                     {"n", 4},
                     {"seed", 8}};
  const auto r = post("/generate/gen-r", body);
  REQUIRE(r.status == 200);
  for (const auto& f : r.body["flags"]) {
    if (f["parsed"] == true) {
      CHECK(f.contains("violation_rate"));
      CHECK(f["violated_relationships"].is_array());
    }
  }
}

TEST_CASE("refine and complete keep their inputs") {
  const json draft = {{"elements",
                       {{{"category", "text"}, {"bbox", {10, 10, 50, 8}}},
                        {{"category", "button"}, {"bbox", {10, 30, 20, 10}}},
                        {{"category", "text"}, {"bbox", {12, 50, 50, 8}}}}}};
  const auto r = post("/refine", {{"draft", draft}});
  REQUIRE(r.status == 200);
  REQUIRE(r.body["layouts"].size() == 1);
  CHECK(names(r.body["layouts"][0]) == std::vector<std::string>{"button", "text", "text"});

  const json partial = {{"elements", {{{"category", "title"}, {"bbox", {5, 5, 100, 10}}}}}};
  const auto c = post("/complete", {{"partial", partial}, {"n", 3}, {"seed", 4}});
  REQUIRE(c.status == 200);
  for (const auto& l : c.body["layouts"]) {
    REQUIRE(!l.is_null());
    CHECK(l["elements"][0] == partial["elements"][0]);
  }
}

TEST_CASE("error statuses") {
  auto status = [](const std::string& path, const std::string& body) { return service().handle("POST", path, body).status; };
  CHECK(status("/generate/ugen", "{not json") == 400);
  CHECK(status("/generate/ugen", "[1, 2]") == 400);
  CHECK(status("/generate/ugen", R"({"n": 0})") == 400);
  CHECK(status("/generate/ugen", R"({"temperature": -1})") == 400);
  CHECK(status("/generate/gen-t", R"({"types": "text"})") == 400);
  CHECK(status("/refine", "{}") == 400);
  CHECK(status("/generate/gen-r", R"({"types": ["text"], "relationships": [{"a": 0, "b": 1, "relation": "near"}]})") == 400);
  CHECK(status("/generate/gen-t", R"({"types": ["widget"]})") == 409);
  json many = {{"types", std::vector<std::string>(21, "text")}};
  CHECK(status("/generate/gen-t", many.dump()) == 422);
  CHECK(status("/generate/nonsense", "{}") == 404);
  CHECK(service().handle("GET", "/nowhere", "").status == 404);

  const auto r = service().handle("POST", "/generate/gen-t", R"({"types": "text"})");
  CHECK(r.body["error"].get<std::string>().find("types") != std::string::npos);
}

TEST_CASE("concurrent identical requests agree") {
  const std::string body = json{{"n", 2}, {"seed", 77}, {"types", {"icon", "text"}}}.dump();
  std::vector<std::future<HttpResponse>> futures;
  for (int i = 0; i < 4; ++i) {
    futures.push_back(std::async(std::launch::async, [&] { return service().handle("POST", "/generate/gen-t", body); }));
  }
  std::vector<json> bodies;
  for (auto& f : futures) bodies.push_back(f.get().body);
  for (const auto& b : bodies) CHECK(b == bodies.front());
}

TEST_CASE("unpinned requests draw fresh seeds") {
  const auto a = post("/generate/ugen", json::object());
  const auto b = post("/generate/ugen", json::object());
  CHECK(a.body["seed"] != b.body["seed"]);
}

TEST_CASE("live server over a socket") {
  Service s(tiny_bundle(), SamplerConfig{}, 0);
  const int port = s.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread th([&] { s.listen(); });

  httplib::Client cli("127.0.0.1", port);
  httplib::Result meta;
  for (int i = 0; i < 100 && !meta; ++i) {
    meta = cli.Get("/meta");
    if (!meta) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  REQUIRE(meta);
  CHECK(meta->status == 200);
  CHECK(meta->get_header_value("Access-Control-Allow-Origin") == "*");
  CHECK(json::parse(meta->body)["snapshot_id"] == "snap-test");

  const auto gen = cli.Post("/generate/ugen", R"({"n": 2, "seed": 1})", "application/json");
  REQUIRE(gen);
  CHECK(gen->status == 200);
  CHECK(json::parse(gen->body)["layouts"].size() == 2);

  const auto opt = cli.Options("/generate/ugen");
  REQUIRE(opt);
  CHECK(opt->status == 204);

  const auto bad = cli.Post("/generate/gen-t", R"({"types": ["widget"]})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 409);

  s.stop();
  th.join();
}
