#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "layoutseq/config.hpp"
#include "layoutseq/error.hpp"

using namespace layoutseq;
using nlohmann::json;

namespace {

std::string config_error(const json& flat) {
  try {
    RunConfig c;
    c.apply(flat);
    c.validate();
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults carry the reference schedule and validate") {
  RunConfig c;
  CHECK(c.train.epochs == 100);
  CHECK(c.train.batch_size == 32);
  CHECK(c.train.warmup_steps == 1000);
  CHECK(c.train.learning_rate == 1e-4);
  CHECK(c.sampler.k == 10);
  CHECK(c.sampler.temperature == 0.5);
  CHECK(c.data.split == std::array<double, 3>{0.9, 0.05, 0.05});
  CHECK_NOTHROW(c.validate());
  CHECK(c.explicit_keys.empty());
}

TEST_CASE("unknown keys and type mismatches name the key") {
  CHECK(config_error({{"model.layerz", 2}}).find("model.layerz") != std::string::npos);
  CHECK(config_error({{"train.batch_size", "big"}}).find("train.batch_size") != std::string::npos);
  CHECK(config_error({{"model.dropout", true}}).find("model.dropout") != std::string::npos);
  CHECK(config_error({{"model.output_order", "diagonal"}}).find("model.output_order") != std::string::npos);
  CHECK(config_error({{"seed", -1}}).find("seed") != std::string::npos);
  CHECK(config_error({{"data.split_train", 0.5}}).find("split") != std::string::npos);
  CHECK(config_error({{"train.learning_rate", 0.0}}).find("learning_rate") != std::string::npos);
  CHECK(config_error({{"model.d_model", 30}, {"model.heads", 4}}) != "");
  CHECK(config_error(json::array()) != "");
}

TEST_CASE("every key round trips through JSON") {
  RunConfig c;
  c.set("model.layers", 3);
  c.set("model.architecture", "dec");
  c.set("sampler.strategy", "greedy");
  c.set("mixing.ugen", 0.5);
  c.set("paths.out", "elsewhere");
  const json j = c.to_json();
  CHECK(j.size() == RunConfig::keys().size());
  RunConfig d;
  d.apply(j);
  CHECK(d.to_json() == j);
  CHECK(d.model.layers == 3);
  CHECK(d.model.architecture == Architecture::DecoderOnly);
  CHECK(d.sampler.strategy == Strategy::Greedy);
  CHECK(d.paths.out == "elsewhere");
  CHECK(c.explicit_keys.count("mixing.ugen") == 1);
}

TEST_CASE("flags applied after the file win") {
  const auto path = std::filesystem::temp_directory_path() / ("layoutseq-cfg-" + std::to_string(::getpid()) + ".json");
  {
    std::ofstream os(path);
    os << json{{"train.learning_rate", 0.01}, {"seed", 3}, {"model.layers", 4}}.dump();
  }
  RunConfig c = load_run_config(path);
  CHECK(c.seed == 3);
  c.set("seed", 9);
  CHECK(c.seed == 9);
  CHECK(c.train.learning_rate == 0.01);
  CHECK(c.model.layers == 4);
  std::filesystem::remove(path);

  try {
    load_run_config(path);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}
