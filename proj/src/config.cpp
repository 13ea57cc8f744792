#include "layoutseq/config.hpp"

#include <functional>
#include <map>

#include "layoutseq/error.hpp"
#include "layoutseq/io.hpp"

namespace layoutseq {

using nlohmann::json;

namespace {

struct Entry {
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw Error(ErrorKind::Config, "config key '" + key + "': expected " + expected);
}

template <typename T>
T as(const std::string& key, const json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) type_error(key, "a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) type_error(key, "an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.get<long long>() < 0) type_error(key, "a non-negative integer");
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) type_error(key, "a number");
  } else {
    if (!v.is_string()) type_error(key, "a string");
  }
  return v.get<T>();
}

template <typename T, typename Ref>
Entry field(const std::string& key, Ref ref) {
  return {[key, ref](RunConfig& c, const json& v) { ref(c) = as<T>(key, v); },
          [ref](const RunConfig& c) { return json(ref(const_cast<RunConfig&>(c))); }};
}

template <typename E, typename Ref, typename Parse, typename Show>
Entry enum_field(const std::string& key, Ref ref, Parse parse, Show show, const char* choices) {
  return {[=](RunConfig& c, const json& v) {
            const auto parsed = parse(as<std::string>(key, v));
            if (!parsed) type_error(key, choices);
            ref(c) = *parsed;
          },
          [=](const RunConfig& c) { return json(std::string(show(ref(const_cast<RunConfig&>(c))))); }};
}

#define REF(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> entries = [] {
    std::map<std::string, Entry> m;
    m["model.layers"] = field<int>("model.layers", REF(model.layers));
    m["model.heads"] = field<int>("model.heads", REF(model.heads));
    m["model.d_model"] = field<int>("model.d_model", REF(model.d_model));
    m["model.d_ff"] = field<int>("model.d_ff", REF(model.d_ff));
    m["model.max_input_len"] = field<int>("model.max_input_len", REF(model.max_input_len));
    m["model.max_output_len"] = field<int>("model.max_output_len", REF(model.max_output_len));
    m["model.dropout"] = field<double>("model.dropout", REF(model.dropout));
    m["model.tie_embeddings"] = field<bool>("model.tie_embeddings", REF(model.tie_embeddings));
    m["model.architecture"] = enum_field<Architecture>(
        "model.architecture", REF(model.architecture), [](const std::string& s) { return parse_architecture(s); },
        [](Architecture a) { return to_string(a); }, "encdec or dec");
    m["model.output_order"] = enum_field<OrderPolicy>(
        "model.output_order", REF(model.output_order), [](const std::string& s) { return parse_order(s); },
        [](OrderPolicy p) { return to_string(p); }, "alphabetic or position");

    m["sampler.strategy"] = enum_field<Strategy>(
        "sampler.strategy", REF(sampler.strategy), [](const std::string& s) { return parse_strategy(s); },
        [](Strategy s) { return to_string(s); }, "greedy or top-k");
    m["sampler.k"] = field<int>("sampler.k", REF(sampler.k));
    m["sampler.temperature"] = field<double>("sampler.temperature", REF(sampler.temperature));
    m["sampler.max_steps"] = field<int>("sampler.max_steps", REF(sampler.max_steps));
    m["sampler.use_fsm"] = field<bool>("sampler.use_fsm", REF(sampler.use_fsm));

    for (Task t : kAllTasks) {
      const std::string key = "mixing." + std::string(to_string(t));
      const auto i = static_cast<std::size_t>(t);
      m[key] = {[key, i](RunConfig& c, const json& v) { c.mixing.weights[i] = as<double>(key, v); },
                [i](const RunConfig& c) { return json(c.mixing.weights[i]); }};
    }

    m["data.name"] = field<std::string>("data.name", REF(data.name));
    m["data.schema"] = field<std::string>("data.schema", REF(data.schema));
    m["data.synth_style"] = field<std::string>("data.synth_style", REF(data.synth_style));
    m["data.synth_count"] = field<int>("data.synth_count", REF(data.synth_count));
    m["data.bins"] = field<int>("data.bins", REF(data.bins));
    m["data.max_elements"] = field<int>("data.max_elements", REF(data.max_elements));
    m["data.split_train"] = field<double>("data.split_train", REF(data.split[0]));
    m["data.split_val"] = field<double>("data.split_val", REF(data.split[1]));
    m["data.split_test"] = field<double>("data.split_test", REF(data.split[2]));
    m["data.relation_sample_rate"] = field<double>("data.relation_sample_rate", REF(data.relation_sample_rate));
    m["data.max_relationships"] = field<std::size_t>("data.max_relationships", REF(data.max_relationships));
    m["data.noise_std"] = field<double>("data.noise_std", REF(data.noise_std));
    m["data.completion_known"] = field<int>("data.completion_known", REF(data.completion_known));

    m["train.epochs"] = field<int>("train.epochs", REF(train.epochs));
    m["train.batch_size"] = field<int>("train.batch_size", REF(train.batch_size));
    m["train.warmup_steps"] = field<long>("train.warmup_steps", REF(train.warmup_steps));
    m["train.learning_rate"] = field<double>("train.learning_rate", REF(train.learning_rate));
    m["train.max_steps"] = field<long>("train.max_steps", REF(train.max_steps));
    m["train.checkpoint_every"] = field<long>("train.checkpoint_every", REF(train.checkpoint_every));

    m["paths.data"] = field<std::string>("paths.data", REF(paths.data));
    m["paths.out"] = field<std::string>("paths.out", REF(paths.out));
    m["paths.checkpoint"] = field<std::string>("paths.checkpoint", REF(paths.checkpoint));

    m["seed"] = field<std::uint64_t>("seed", REF(seed));
    return m;
  }();
  return entries;
}

#undef REF

}  // namespace

RunConfig::RunConfig() {
  // Reference single-task schedule: 100 epochs, batch 32, 1000 warmup steps, lr 1e-4.
  train.epochs = 100;
  train.batch_size = 32;
  train.warmup_steps = 1000;
  train.learning_rate = 1e-4;
}

void RunConfig::set(const std::string& key, const json& value) {
  const auto& reg = registry();
  auto it = reg.find(key);
  if (it == reg.end()) throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
  it->second.set(*this, value);
  explicit_keys.insert(key);
}

void RunConfig::apply(const json& flat) {
  if (!flat.is_object()) throw Error(ErrorKind::Config, "config must be a flat JSON object");
  for (auto it = flat.begin(); it != flat.end(); ++it) set(it.key(), it.value());
}

json RunConfig::to_json() const {
  json j = json::object();
  for (const auto& [key, e] : registry()) j[key] = e.get(*this);
  return j;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, e] : registry()) out.push_back(key);
  return out;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
  model.validate();
  sampler.validate();
  mixing.validate();
  if (!parse_schema(data.schema)) fail("data.schema must be generic, rico-like or publaynet-like");
  if (!parse_style(data.synth_style)) fail("data.synth_style must be grid or freeform");
  if (data.synth_count < 1) fail("data.synth_count must be >= 1");
  if (data.bins < 2) fail("data.bins must be >= 2");
  if (data.max_elements < 1) fail("data.max_elements must be >= 1");
  const double total = data.split[0] + data.split[1] + data.split[2];
  if (data.split[0] < 0 || data.split[1] < 0 || data.split[2] < 0 || std::abs(total - 1.0) > 1e-9) {
    fail("data.split_train/val/test must be non-negative and sum to 1");
  }
  if (!(data.relation_sample_rate >= 0.0 && data.relation_sample_rate <= 1.0)) fail("data.relation_sample_rate must be in [0, 1]");
  if (data.noise_std < 0.0) fail("data.noise_std must be >= 0");
  if (data.completion_known < 1) fail("data.completion_known must be >= 1");
  if (train.epochs < 1) fail("train.epochs must be >= 1");
  if (train.batch_size < 1) fail("train.batch_size must be >= 1");
  if (train.warmup_steps < 0) fail("train.warmup_steps must be >= 0");
  if (!(train.learning_rate > 0.0)) fail("train.learning_rate must be > 0");
  if (train.max_steps < 0) fail("train.max_steps must be >= 0");
  if (train.checkpoint_every < 0) fail("train.checkpoint_every must be >= 0");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c;
  json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  c.apply(j);
  return c;
}

}  // namespace layoutseq
