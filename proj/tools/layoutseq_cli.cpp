#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "layoutseq/config.hpp"
#include "layoutseq/data.hpp"
#include "layoutseq/error.hpp"
#include "layoutseq/eval.hpp"
#include "layoutseq/io.hpp"
#include "layoutseq/log.hpp"
#include "layoutseq/metrics.hpp"
#include "layoutseq/service.hpp"

namespace fs = std::filesystem;
using namespace layoutseq;
using nlohmann::json;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string order;
  std::string arch;
  std::vector<std::string> sets;
  int n = 0;
  bool fsm = false;
  bool no_fsm = false;

  std::string task;
  bool multi = false;
  std::string constraints;
  std::string output;
  std::string input;
  std::string schema;
  std::string name;
  std::string style;
  std::string host = "127.0.0.1";
  int port = 8080;
  bool no_fid = false;
};

// Usage problems exit with 1, everything else with 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

RunConfig resolve(const Options& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  if (o.seed) cfg.set("seed", *o.seed);
  if (!o.out.empty()) cfg.set("paths.out", o.out);
  if (!o.data.empty()) cfg.set("paths.data", o.data);
  if (!o.checkpoint.empty()) cfg.set("paths.checkpoint", o.checkpoint);
  if (!o.order.empty()) cfg.set("model.output_order", o.order);
  if (!o.arch.empty()) cfg.set("model.architecture", o.arch);
  if (!o.style.empty()) cfg.set("data.synth_style", o.style);
  if (!o.schema.empty()) cfg.set("data.schema", o.schema);
  if (!o.name.empty()) cfg.set("data.name", o.name);
  if (o.no_fsm && !o.fsm) cfg.set("sampler.use_fsm", false);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Config, "--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), parse_value(kv.substr(eq + 1)));
  }
  cfg.validate();
  spdlog::info("resolved config {}", cfg.to_json().dump());
  return cfg;
}

Task require_task(const std::string& name) {
  if (name.empty()) throw UsageError("--task is required");
  const auto t = parse_task(name);
  if (!t) throw UsageError("unknown task '" + name + "'");
  return *t;
}

fs::path data_dir(const RunConfig& cfg) {
  if (cfg.paths.data.empty()) throw UsageError("no dataset directory (use --data or paths.data)");
  return cfg.paths.data;
}

// Dataset commands write to --data when given.
fs::path dataset_out(const RunConfig& cfg) { return cfg.paths.data.empty() ? fs::path(cfg.paths.out) : fs::path(cfg.paths.data); }

fs::path checkpoint_stem(const RunConfig& cfg) {
  return cfg.paths.checkpoint.empty() ? fs::path(cfg.paths.out) / "model" : fs::path(cfg.paths.checkpoint);
}

ExampleOptions example_options(const RunConfig& cfg, bool with_prefix) {
  ExampleOptions ex;
  ex.output_order = cfg.model.output_order;
  ex.with_prefix = with_prefix;
  ex.relation_sample_rate = cfg.data.relation_sample_rate;
  ex.max_relationships = cfg.data.max_relationships;
  ex.noise_std = cfg.data.noise_std;
  ex.completion_known = cfg.data.completion_known;
  return ex;
}

void write_splits(const fs::path& dir, const std::vector<Layout>& layouts, DatasetManifest manifest,
                  const RunConfig& cfg) {
  fs::create_directories(dir);
  const Splits s = split(layouts, cfg.data.split, cfg.seed);
  write_dataset(dir / "train.jsonl", s.train, manifest.categories);
  write_dataset(dir / "val.jsonl", s.val, manifest.categories);
  write_dataset(dir / "test.jsonl", s.test, manifest.categories);
  manifest.split_counts = {s.train.size(), s.val.size(), s.test.size()};
  manifest.split_fractions = cfg.data.split;
  manifest.max_elements = cfg.data.max_elements;
  manifest.bins = cfg.data.bins;
  manifest.seed = cfg.seed;
  write_manifest(dir / "manifest.json", manifest);
  std::printf("wrote %zu/%zu/%zu layouts to %s\n", s.train.size(), s.val.size(), s.test.size(), dir.c_str());
}

int dataset_synth(const Options& o) {
  RunConfig cfg = resolve(o);
  if (o.n > 0) cfg.data.synth_count = o.n;
  const CategorySet cats = default_synthetic_categories();
  const auto layouts = synthesize(cfg.data.synth_count, cats, *parse_style(cfg.data.synth_style), cfg.seed,
                                  cfg.data.bins, cfg.data.max_elements);
  DatasetManifest m;
  m.name = cfg.data.name;
  m.categories = cats;
  m.source_path = "synthetic:" + cfg.data.synth_style;
  write_splits(dataset_out(cfg), layouts, m, cfg);
  return 0;
}

int dataset_ingest(const Options& o) {
  RunConfig cfg = resolve(o);
  if (o.input.empty()) throw UsageError("--input is required");
  IngestResult r = ingest(o.input, *parse_schema(cfg.data.schema), cfg.data.max_elements, cfg.data.bins);
  spdlog::info("ingested {} layouts, skipped {}", r.layouts.size(), r.skipped);
  DatasetManifest m;
  m.name = cfg.data.name == "synthetic" ? fs::path(o.input).stem().string() : cfg.data.name;
  m.categories = r.categories;
  m.source_path = o.input;
  write_splits(dataset_out(cfg), r.layouts, m, cfg);
  return 0;
}

int dataset_stats(const Options& o) {
  const RunConfig cfg = resolve(o);
  const fs::path dir = data_dir(cfg);
  const DatasetManifest m = read_manifest(dir / "manifest.json");
  std::printf("dataset %s (%d categories, %d bins)\n", m.name.c_str(), m.categories.size(), m.bins);
  std::map<std::string, std::size_t> per_cat;
  for (const char* part : {"train", "val", "test"}) {
    const auto layouts = read_dataset(dir / (std::string(part) + ".jsonl"), m.categories, m.bins);
    std::size_t elements = 0;
    for (const auto& l : layouts) {
      elements += l.elements.size();
      for (const auto& e : l.elements) ++per_cat[m.categories.name(e.category)];
    }
    std::printf("%-5s %6zu layouts  %5.2f elements/layout  align %.5f  overlap %.5f\n", part, layouts.size(),
                layouts.empty() ? 0.0 : static_cast<double>(elements) / static_cast<double>(layouts.size()),
                mean_alignment(layouts, m.bins), mean_overlap(layouts, m.categories, m.bins));
  }
  for (const auto& [name, count] : per_cat) std::printf("  %-24s %zu\n", name.c_str(), count);
  return 0;
}

// Reference schedules are sized for the full public datasets.
void apply_desk_schedule(RunConfig& cfg) {
  for (const auto& k : cfg.explicit_keys) {
    if (k.rfind("train.", 0) == 0) return;
  }
  cfg.train.epochs = 40;
  cfg.train.batch_size = 16;
  cfg.train.warmup_steps = 50;
  cfg.train.learning_rate = 1e-3;
  cfg.train.max_steps = 2000;
  spdlog::info("synthetic dataset: desk schedule (batch 16, lr 1e-3, warmup 50, at most 2000 steps)");
}

int train(const Options& o) {
  RunConfig cfg = resolve(o);
  if (o.multi == !o.task.empty()) throw UsageError("train needs exactly one of --task or --multi");
  if (!o.multi) require_task(o.task);
  const fs::path dir = data_dir(cfg);
  const DatasetManifest m = read_manifest(dir / "manifest.json");
  if (m.name == "synthetic") apply_desk_schedule(cfg);
  const Vocabulary vocab(m.categories, m.bins, m.max_elements);
  const auto train_set = read_dataset(dir / "train.jsonl", m.categories, m.bins);
  const auto val_set = read_dataset(dir / "val.jsonl", m.categories, m.bins);
  const ExampleOptions ex = example_options(cfg, o.multi);

  const fs::path out = cfg.paths.out;
  fs::create_directories(out);
  Schedule sched = cfg.train;
  if (sched.checkpoint_every > 0) sched.checkpoint_path = out / "checkpoint.ckpt";

  Seq2SeqModel model(cfg.model, vocab.size(), cfg.seed);
  spdlog::info("model: {} parameters", model.parameter_count());
  auto log_step = [](long step, double loss) {
    if (step % 100 == 0) spdlog::info("step {} loss {:.4f}", step, loss);
  };
  TrainResult result;
  double val_nll = 0.0;
  if (o.multi) {
    std::map<Task, std::vector<TrainingExample>> sets;
    std::vector<TrainingExample> val_all;
    for (Task t : kAllTasks) {
      if (cfg.mixing.weight(t) <= 0.0) continue;
      sets[t] = build_examples(train_set, t, vocab, ex, cfg.seed);
      auto v = build_examples(val_set, t, vocab, ex, cfg.seed + 1);
      val_all.insert(val_all.end(), v.begin(), v.end());
    }
    result = train_multi(model, sets, cfg.mixing, sched, cfg.seed, log_step);
    if (!val_all.empty()) val_nll = evaluate_nll(model, val_all);
  } else {
    const Task task = require_task(o.task);
    const auto examples = build_examples(train_set, task, vocab, ex, cfg.seed);
    result = train_single(model, examples, sched, cfg.seed, log_step);
    const auto val = build_examples(val_set, task, vocab, ex, cfg.seed + 1);
    if (!val.empty()) val_nll = evaluate_nll(model, val);
  }
  write_loss_csv(out / "loss.csv", result.curve);
  json meta = {{"task", o.multi ? "multi" : o.task}, {"steps", result.steps}, {"final_loss", result.final_loss},
               {"val_nll", val_nll}, {"dataset", m.name}, {"config", cfg.to_json()}};
  save_model(checkpoint_stem(cfg), model, vocab, o.multi, meta);
  std::printf("trained %ld steps, final loss %.4f, val nll %.4f -> %s\n", result.steps, result.final_loss, val_nll,
              checkpoint_stem(cfg).c_str());
  return 0;
}

int eval(const Options& o) {
  RunConfig cfg = resolve(o);
  const Task task = require_task(o.task);
  ModelBundle b = load_model(checkpoint_stem(cfg));
  const Vocabulary& vocab = *b.vocab;
  const fs::path dir = data_dir(cfg);
  auto test = read_dataset(dir / "test.jsonl", vocab.categories(), vocab.bins());
  if (o.n > 0 && static_cast<std::size_t>(o.n) < test.size()) test.resize(static_cast<std::size_t>(o.n));

  std::optional<FeatureNet> net;
  if (!o.no_fid) {
    auto train_set = read_dataset(dir / "train.jsonl", vocab.categories(), vocab.bins());
    if (train_set.size() > 2000) train_set.resize(2000);
    try {
      net.emplace(train_feature_net(train_set, vocab, cfg.seed));
      spdlog::info("feature net held-out accuracy {:.3f}", net->heldout_accuracy());
    } catch (const Error& e) {
      spdlog::warn("FID unavailable: {}", e.what());
    }
  }

  std::vector<bool> modes;
  if (o.fsm) modes.push_back(true);
  if (o.no_fsm) modes.push_back(false);
  if (modes.empty()) modes.push_back(cfg.sampler.use_fsm);

  json out = {{"task", std::string(to_string(task))},
              {"checkpoint", checkpoint_stem(cfg).string()},
              {"snapshot_id", b.snapshot_id},
              {"reports", json::array()}};
  std::vector<MetricReport> reports;
  for (bool fsm : modes) {
    EvalOptions opt;
    opt.task = task;
    opt.sampler = cfg.sampler;
    opt.sampler.use_fsm = fsm;
    opt.sampler.with_prefix = b.with_prefix;
    opt.examples = example_options(cfg, b.with_prefix);
    opt.seed = cfg.seed;
    opt.feature_net = net ? &*net : nullptr;
    EvalRun run = evaluate_task(*b.model, vocab, test, opt);
    run.report.task = std::string(to_string(task)) + (fsm ? " fsm" : " no-fsm");
    json j = to_json(run.report);
    j["fsm"] = fsm;
    out["reports"].push_back(j);
    reports.push_back(run.report);
  }
  fs::create_directories(cfg.paths.out);
  const fs::path path = o.output.empty() ? fs::path(cfg.paths.out) / ("metrics-" + o.task + ".json") : fs::path(o.output);
  write_json_file(path, out);
  std::cout << format_table(reports);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

// generate / refine / complete go through the same handler as the HTTP API.
int sample(const Options& o, Task task) {
  RunConfig cfg = resolve(o);
  json body = o.constraints.empty() ? json::object() : read_json_file(o.constraints);
  if (!body.is_object()) throw UsageError("constraints file must hold a JSON object");
  if (task == Task::Refinement && !body.contains("draft")) body = {{"draft", body}};
  if (task == Task::Completion && !body.contains("partial")) body = {{"partial", body}};
  body["n"] = o.n > 0 ? o.n : 1;
  body["seed"] = cfg.seed;
  body["use_fsm"] = cfg.sampler.use_fsm;
  body["strategy"] = std::string(to_string(cfg.sampler.strategy));
  body["k"] = cfg.sampler.k;
  body["temperature"] = cfg.sampler.temperature;

  SamplerConfig defaults = cfg.sampler;
  Service svc(load_model(checkpoint_stem(cfg)), defaults, cfg.seed);
  std::string route = task == Task::Refinement ? "/refine"
                      : task == Task::Completion ? "/complete"
                                                 : "/generate/" + std::string(to_string(task));
  const HttpResponse r = svc.handle("POST", route, body.dump());
  if (r.status != 200) {
    std::fprintf(stderr, "error: %s\n", r.body.value("error", std::string("request failed")).c_str());
    return r.status >= 500 ? 2 : 1;
  }
  json out = r.body;
  out["task"] = std::string(to_string(task));
  fs::create_directories(cfg.paths.out);
  const fs::path path =
      o.output.empty() ? fs::path(cfg.paths.out) / (std::string(to_string(task)) + ".json") : fs::path(o.output);
  write_json_file(path, out);
  std::printf("wrote %zu layouts to %s\n", out["layouts"].size(), path.c_str());
  return 0;
}

int coord_sim(const Options& o) {
  const RunConfig cfg = resolve(o);
  const ModelBundle b = load_model(checkpoint_stem(cfg));
  const Matrix sim = coord_embedding_similarity(*b.model, *b.vocab);
  fs::create_directories(cfg.paths.out);
  const fs::path path = o.output.empty() ? fs::path(cfg.paths.out) / "coord_similarity.csv" : fs::path(o.output);
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  f.precision(6);
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    for (Eigen::Index j = 0; j < sim.cols(); ++j) f << (j ? "," : "") << sim(i, j);
    f << '\n';
  }
  const int far = static_cast<int>(std::min<Eigen::Index>(64, sim.rows() - 1));
  std::printf("mean similarity |i-j|=1: %.4f  |i-j|=%d: %.4f\nwrote %s\n", mean_similarity_at(sim, 1), far,
              mean_similarity_at(sim, far), path.c_str());
  return 0;
}

int serve(const Options& o) {
  const RunConfig cfg = resolve(o);
  Service svc(load_model(checkpoint_stem(cfg)), cfg.sampler, cfg.seed);
  const int port = svc.bind(o.host, o.port);
  spdlog::info("listening on {}:{}", o.host, port);
  svc.listen();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"layout generation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "flat JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--data", o.data, "dataset directory");
  app.add_option("--checkpoint", o.checkpoint, "model stem (no extension)");
  app.add_option("--order", o.order, "output order")->check(CLI::IsMember({"alphabetic", "position"}));
  app.add_option("--arch", o.arch, "architecture")->check(CLI::IsMember({"encdec", "dec"}));
  app.add_option("--set", o.sets, "override a config key (key=value)");
  app.add_option("-n", o.n, "sample count / layout count")->check(CLI::PositiveNumber);
  app.add_flag("--fsm", o.fsm, "constrained decoding");
  app.add_flag("--no-fsm", o.no_fsm, "unconstrained decoding");
  app.add_option("--task", o.task, "task name");
  app.add_option("--output", o.output, "output file");

  auto* dataset = app.add_subcommand("dataset", "build or inspect a dataset");
  dataset->require_subcommand(1);
  dataset->fallthrough();
  auto* synth = dataset->add_subcommand("synth", "synthesize layouts and write splits");
  synth->add_option("--style", o.style, "grid or freeform");
  auto* ingest_cmd = dataset->add_subcommand("ingest", "normalize a raw dataset and write splits");
  ingest_cmd->add_option("--input", o.input, "source file or directory")->required();
  ingest_cmd->add_option("--schema", o.schema, "generic, rico-like or publaynet-like");
  ingest_cmd->add_option("--name", o.name, "dataset name");
  auto* stats = dataset->add_subcommand("stats", "summarize a dataset directory");

  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_flag("--multi", o.multi, "joint training over all tasks");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval_cmd->add_flag("--no-fid", o.no_fid, "skip the feature network");
  auto* generate_cmd = app.add_subcommand("generate", "sample layouts");
  auto* refine_cmd = app.add_subcommand("refine", "refine a draft layout");
  auto* complete_cmd = app.add_subcommand("complete", "complete a partial layout");
  for (auto* c : {generate_cmd, refine_cmd, complete_cmd}) c->add_option("--constraints", o.constraints, "constraint JSON");
  auto* coord_cmd = app.add_subcommand("coord-sim", "coordinate embedding similarity CSV");
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  serve_cmd->add_option("--host", o.host, "bind address");
  serve_cmd->add_option("--port", o.port, "port (0 picks a free one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth) return dataset_synth(o);
    if (*ingest_cmd) return dataset_ingest(o);
    if (*stats) return dataset_stats(o);
    if (*train_cmd) return train(o);
    if (*eval_cmd) return eval(o);
    if (*generate_cmd) return sample(o, require_task(o.task.empty() ? "ugen" : o.task));
    if (*refine_cmd) return sample(o, Task::Refinement);
    if (*complete_cmd) return sample(o, Task::Completion);
    if (*coord_cmd) return coord_sim(o);
    if (*serve_cmd) return serve(o);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::Config ? 1 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
