// Runs every headline criterion at its stated tolerance and time budget,
// printing one PASS/FAIL line each. Optional arguments select criteria by name.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "layoutseq/data.hpp"
#include "layoutseq/error.hpp"
#include "layoutseq/eval.hpp"
#include "layoutseq/log.hpp"
#include "layoutseq/metrics.hpp"
#include "layoutseq/sampler.hpp"
#include "oracles.hpp"

using namespace layoutseq;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<int> categories_of(const Layout& l) {
  std::vector<int> c;
  for (const auto& e : l.elements) c.push_back(e.category);
  std::sort(c.begin(), c.end());
  return c;
}

// ---- codec ----

Outcome codec() {
  const auto cats = testing::five_categories();
  const Vocabulary vocab(cats, kDefaultBins, kDefaultMaxElements);
  Rng rng = make_rng(1001);
  int round_trips = 0, grammars = 0, total_grammars = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + i % kDefaultMaxElements;
    const Layout l = testing::layout_of_size(rng, n, cats.size());
    if (decode_layout(encode_layout(l, vocab), vocab) == l) ++round_trips;
    for (Task t : kAllTasks) {
      for (bool prefix : {false, true}) {
        ++total_grammars;
        ExampleOptions opt;
        const ConstraintSpec spec = constraint_for(l, t, vocab, opt, rng);
        try {
          const ConstraintSpec back = parse_input(encode_input(spec, vocab, prefix), t, vocab);
          if (canonicalize_spec(back, cats) == canonicalize_spec(spec, cats)) ++grammars;
        } catch (const Error&) {
        }
      }
    }
  }
  return {round_trips == 1000 && grammars == total_grammars,
          fmt("round trip %d/1000, input grammars %d/%d", round_trips, grammars, total_grammars)};
}

// ---- fsm format guarantee ----

Outcome fsm_format() {
  const Vocabulary vocab(testing::five_categories(), kDefaultBins, kDefaultMaxElements);
  const Seq2SeqModel model(ModelConfig{}, vocab.size(), 11);
  ConstraintSpec spec;
  SamplerConfig cfg;
  cfg.seed = 5;
  int clean = 0;
  for (const auto& s : generate(model, vocab, spec, cfg, 1000)) {
    if (s.layout && s.violations == 0 && !s.flagged) ++clean;
  }
  cfg.use_fsm = false;
  int malformed = 0;
  for (const auto& s : generate(model, vocab, spec, cfg, 1000)) {
    if (!s.layout) ++malformed;
  }
  return {clean == 1000 && malformed >= 1, fmt("masked clean %d/1000, unmasked malformed %d/1000", clean, malformed)};
}

// ---- exact constraint satisfaction ----

Outcome exact_constraints() {
  const auto cats = default_synthetic_categories();
  const Vocabulary vocab(cats, kDefaultBins, kDefaultMaxElements);
  const Seq2SeqModel model(ModelConfig{}, vocab.size(), 12);
  const auto layouts = synthesize(1000, cats, SynthStyle::Freeform, 31);
  int gen_t = 0, gen_ts = 0, refined = 0;
  SamplerConfig cfg;
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    const Layout& l = layouts[i];
    cfg.seed = 7000 + i;
    ConstraintSpec t;
    t.task = Task::GenT;
    for (const auto& e : l.elements) t.types.push_back(e.category);
    const auto st = generate(model, vocab, t, cfg, 1).front();
    if (st.layout && categories_of(*st.layout) == categories_of(l)) ++gen_t;

    ConstraintSpec ts = t;
    ts.task = Task::GenTS;
    std::vector<std::array<int, 3>> want;
    for (const auto& e : l.elements) {
      ts.sizes.push_back({e.box.w, e.box.h});
      want.push_back({e.category, e.box.w, e.box.h});
    }
    const auto sts = generate(model, vocab, ts, cfg, 1).front();
    if (sts.layout) {
      std::vector<std::array<int, 3>> got;
      for (const auto& e : sts.layout->elements) got.push_back({e.category, e.box.w, e.box.h});
      std::sort(got.begin(), got.end());
      std::sort(want.begin(), want.end());
      if (got == want) ++gen_ts;
    }
  }
  SamplerConfig greedy;
  greedy.strategy = Strategy::Greedy;
  Rng rng = make_rng(32);
  for (std::size_t i = 0; i < 500; ++i) {
    const Layout draft = add_refinement_noise(layouts[i], 0.01, rng);
    const Layout out = refine(model, vocab, draft, greedy);
    if (categories_of(out) == categories_of(draft)) ++refined;
  }
  return {gen_t == 1000 && gen_ts == 1000 && refined == 500,
          fmt("gen-t %d/1000, gen-ts %d/1000, refinement %d/500", gen_t, gen_ts, refined)};
}

// ---- gen-r direction ----

Outcome gen_r_direction() {
  const auto cats = default_synthetic_categories();
  const Vocabulary vocab(cats, kDefaultBins, kDefaultMaxElements);
  const auto train = synthesize(1000, cats, SynthStyle::Grid, 21);
  const auto test = synthesize(200, cats, SynthStyle::Grid, 22);
  ExampleOptions opt;
  opt.max_relationships = 24;
  const auto examples = build_examples(train, Task::GenR, vocab, opt, 1);
  ModelConfig mc;
  mc.dropout = 0.0;
  Seq2SeqModel model(mc, vocab.size(), 3);
  Schedule s;
  s.epochs = 1000;
  s.max_steps = 500;
  s.learning_rate = 1e-3;
  s.batch_size = 16;
  s.warmup_steps = 50;
  train_single(model, examples, s, 5);

  std::vector<ConstraintSpec> specs;
  for (std::size_t i = 0; i < test.size(); ++i) {
    Rng r = make_rng(99, i);
    specs.push_back(constraint_for(test[i], Task::GenR, vocab, opt, r));
  }
  double rate[2];
  int parsed[2] = {0, 0};
  for (int masked = 0; masked < 2; ++masked) {
    SamplerConfig cfg;
    cfg.use_fsm = masked == 1;
    std::vector<std::optional<Layout>> out;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      cfg.seed = 1000 + i;
      const auto smp = generate(model, vocab, specs[i], cfg, 1).front();
      if (smp.layout) {
        ++parsed[masked];
        out.push_back(smp.layout);
      } else {
        out.push_back(salvage_layout(smp.tokens, vocab));
      }
    }
    rate[masked] = violation_rate(out, specs);
  }
  return {rate[1] <= 0.5 * rate[0],
          fmt("masked %.4f (%d/200 parsed) vs unmasked %.4f (%d/200 parsed), ratio %.3f", rate[1], parsed[1], rate[0],
              parsed[0], rate[0] > 0 ? rate[1] / rate[0] : 0.0)};
}

// ---- gradients ----

Outcome gradients() {
  Rng rng = make_rng(17);
  const auto& ops = gradcheck::op_names();
  double worst = 0.0;
  bool unused_ok = true;
  for (int i = 0; i < 100; ++i) {
    auto g = gradcheck::make_graph(ops[static_cast<std::size_t>(i) % ops.size()], rng);
    const auto r = gradcheck::check(g);
    worst = std::max(worst, r.max_relative_error);
    unused_ok = unused_ok && r.unused_zero;
  }
  return {worst < 1e-4 && unused_ok, fmt("100 graphs over %zu ops, worst relative error %.2e", ops.size(), worst)};
}

// ---- trainability, shared with the coordinate-embedding check ----

std::optional<Seq2SeqModel> overfit_model;
std::optional<Vocabulary> overfit_vocab;

Outcome trainability() {
  const auto cats = default_synthetic_categories();
  overfit_vocab.emplace(cats, kDefaultBins, kDefaultMaxElements);
  const Vocabulary& vocab = *overfit_vocab;
  std::vector<Layout> layouts;
  for (const auto& l : synthesize(2000, cats, SynthStyle::Grid, 7)) {
    if (l.size() >= 8 && layouts.size() < 32) layouts.push_back(l);
  }
  ExampleOptions opt;
  opt.output_order = OrderPolicy::Position;
  const auto ex = build_examples(layouts, Task::UGen, vocab, opt, 1);
  ModelConfig mc;
  mc.dropout = 0.0;
  mc.output_order = OrderPolicy::Position;
  overfit_model.emplace(mc, vocab.size(), 3);
  const double init = evaluate_nll(*overfit_model, ex);
  const double ln_v = std::log(static_cast<double>(vocab.size()));
  Schedule s;
  s.epochs = 100000;
  s.max_steps = 2000;
  s.learning_rate = 1e-3;
  s.batch_size = 8;
  s.warmup_steps = 50;
  const auto r = train_single(*overfit_model, ex, s, 5);
  const double final_nll = evaluate_nll(*overfit_model, ex);
  const bool init_ok = std::abs(init - ln_v) <= 0.1 * ln_v;
  return {init_ok && final_nll < 0.1 && r.steps <= 2000 && layouts.size() == 32,
          fmt("%zu examples, init %.4f vs ln V %.4f, NLL %.4f after %ld steps", layouts.size(), init, ln_v, final_nll,
              r.steps)};
}

Outcome coord_similarity() {
  if (!overfit_model) {
    const Outcome o = trainability();
    if (!o.pass) return {false, "overfit run failed: " + o.detail};
  }
  const Matrix sim = coord_embedding_similarity(*overfit_model, *overfit_vocab);
  const double d1 = mean_similarity_at(sim, 1), d64 = mean_similarity_at(sim, 64);
  return {d1 > d64, fmt("mean cosine at distance 1 %.4f vs distance 64 %.4f", d1, d64)};
}

// ---- mixing ----

Outcome mixing() {
  const double expected[kNumTasks] = {1.0 / 12, 1.0 / 12, 1.0 / 3, 1.0 / 12, 1.0 / 3, 1.0 / 12};
  const TaskSampler sampler(MixingPlan::reference());
  Rng rng = make_rng(2024);
  std::map<Task, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[sampler.draw(rng)];
  double worst = 0.0;
  for (std::size_t i = 0; i < kNumTasks; ++i) {
    worst = std::max(worst, std::abs(counts[kAllTasks[i]] / double(draws) - expected[i]));
  }
  return {worst <= 0.02, fmt("100000 draws, largest absolute deviation %.4f", worst)};
}

// ---- metric oracles ----

Outcome metric_oracles() {
  Rng rng = make_rng(4242);
  int hungarian_ok = 0;
  for (int i = 0; i < 200; ++i) {
    const Layout a = testing::layout_of_size(rng, 1 + i % 6, 3), b = testing::layout_of_size(rng, 1 + (i / 6) % 6, 3);
    if (std::abs(layout_similarity(a, b) - oracles::similarity(a, b, kDefaultBins)) <= 1e-12) ++hungarian_ok;
  }
  double align_err = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Layout l = testing::random_layout(rng, 5);
    align_err = std::max(align_err, std::abs(alignment(l) - oracles::alignment(l, kDefaultBins)));
  }
  const auto cats = default_synthetic_categories();
  const double grid_overlap = mean_overlap(synthesize(500, cats, SynthStyle::Grid, 5), cats);

  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(400, 8);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  const double self = fid(a, a);

  Eigen::MatrixXd x(500, 1), y(300, 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = 1.0 + 2.0 * g(rng);
  for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, 0) = -0.5 + 0.7 * g(rng);
  auto moments = [](const Eigen::MatrixXd& m) {
    double mu = 0.0, v = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) mu += m(i, 0);
    mu /= double(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) v += (m(i, 0) - mu) * (m(i, 0) - mu);
    return std::pair{mu, std::sqrt(v / double(m.rows() - 1))};
  };
  const auto [mx, sx] = moments(x);
  const auto [my, sy] = moments(y);
  const double err_1d = std::abs(fid(x, y) - ((mx - my) * (mx - my) + (sx - sy) * (sx - sy)));

  // Points mu +- s_k e_k have exactly diagonal sample covariance 2 s_k^2 / (2D - 1).
  const int D = 8;
  auto axis_set = [&](const Eigen::VectorXd& mu, const Eigen::VectorXd& s) {
    Eigen::MatrixXd m(2 * D, D);
    for (int k = 0; k < D; ++k) {
      m.row(2 * k) = mu.transpose();
      m.row(2 * k + 1) = mu.transpose();
      m(2 * k, k) += s(k);
      m(2 * k + 1, k) -= s(k);
    }
    return m;
  };
  Eigen::VectorXd mu_a(D), mu_b(D), s_a(D), s_b(D);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  for (int k = 0; k < D; ++k) {
    mu_a(k) = g(rng);
    mu_b(k) = g(rng);
    s_a(k) = u(rng);
    s_b(k) = u(rng);
  }
  double closed = (mu_a - mu_b).squaredNorm();
  for (int k = 0; k < D; ++k) {
    const double la = 2 * s_a(k) * s_a(k) / (2 * D - 1), lb = 2 * s_b(k) * s_b(k) / (2 * D - 1);
    closed += (std::sqrt(la) - std::sqrt(lb)) * (std::sqrt(la) - std::sqrt(lb));
  }
  const double err_diag = std::abs(fid(axis_set(mu_a, s_a), axis_set(mu_b, s_b)) - closed);

  const bool pass = hungarian_ok == 200 && align_err <= 1e-12 && grid_overlap == 0.0 && self < 1e-6 &&
                    err_1d <= 1e-9 && err_diag <= 1e-9;
  return {pass, fmt("hungarian %d/200, alignment err %.1e, grid overlap %.1f, fid(A,A) %.1e, 1-D err %.1e, "
                    "diagonal err %.1e",
                    hungarian_ok, align_err, grid_overlap, self, err_1d, err_diag)};
}

// ---- determinism ----

struct Hasher {
  std::uint64_t h = 1469598103934665603ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ c[i]) * 1099511628211ULL;
  }
  void add(double v) { bytes(&v, sizeof v); }
  void add(long v) { bytes(&v, sizeof v); }
  void add(const std::string& v) { bytes(v.data(), v.size()); }
  void add(const std::vector<int>& v) { bytes(v.data(), v.size() * sizeof(int)); }
  void add(const Matrix& m) { bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double)); }
  void add(const Layout& l) {
    for (const auto& e : l.elements) {
      const int v[5] = {e.category, e.box.x, e.box.y, e.box.w, e.box.h};
      bytes(v, sizeof v);
    }
    add(-1L);
  }
};

std::map<std::string, std::uint64_t> pipeline_hashes(std::uint64_t seed) {
  std::map<std::string, std::uint64_t> out;
  const auto cats = default_synthetic_categories();
  const Vocabulary vocab(cats, kDefaultBins, kDefaultMaxElements);

  Hasher h;
  const auto grid = synthesize(300, cats, SynthStyle::Grid, seed);
  const auto free = synthesize(300, cats, SynthStyle::Freeform, seed);
  for (const auto& l : grid) h.add(l);
  for (const auto& l : free) h.add(l);
  out["synthesize"] = h.h;

  h = {};
  const Splits s = split(free, {0.9, 0.05, 0.05}, seed);
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    for (const auto& l : *part) h.add(l);
  }
  out["split"] = h.h;

  h = {};
  std::map<Task, std::vector<TrainingExample>> sets;
  for (Task t : kAllTasks) {
    ExampleOptions opt;
    opt.with_prefix = true;
    sets[t] = build_examples(s.train, t, vocab, opt, seed);
    for (const auto& ex : sets[t]) {
      h.add(ex.input.ids);
      h.add(ex.target.ids);
    }
  }
  out["examples"] = h.h;

  ModelConfig mc;
  mc.layers = 1;
  mc.d_model = 32;
  mc.d_ff = 64;
  Seq2SeqModel model(mc, vocab.size(), seed);
  h = {};
  for (const auto& p : model.state()) h.add(p.value);
  out["init"] = h.h;

  Schedule sched;
  sched.max_steps = 15;
  sched.batch_size = 4;
  sched.learning_rate = 1e-3;
  h = {};
  const auto single = train_single(model, sets[Task::UGen], sched, seed);
  for (const auto& p : single.curve) h.add(p.loss);
  for (const auto& p : model.state()) h.add(p.value);
  out["train_single"] = h.h;

  h = {};
  const auto multi = train_multi(model, sets, MixingPlan::reference(), sched, seed);
  for (const auto& p : multi.curve) h.add(p.loss);
  for (const auto& p : model.state()) h.add(p.value);
  out["train_multi"] = h.h;

  h = {};
  SamplerConfig cfg;
  cfg.seed = seed;
  cfg.with_prefix = true;
  std::vector<Layout> generated;
  for (const auto& smp : generate(model, vocab, ConstraintSpec{}, cfg, 20)) {
    h.add(smp.tokens);
    if (smp.layout) generated.push_back(*smp.layout);
  }
  Rng rng = make_rng(seed, 77);
  const ConstraintSpec genr = constraint_for(s.test[0], Task::GenR, vocab, ExampleOptions{}, rng);
  for (const auto& smp : generate(model, vocab, genr, cfg, 5)) h.add(smp.tokens);
  SamplerConfig greedy = cfg;
  greedy.strategy = Strategy::Greedy;
  h.add(refine(model, vocab, s.test[1], greedy));
  out["sampling"] = h.h;

  h = {};
  if (!generated.empty()) {
    h.add(miou(generated, s.test));
    h.add(mean_alignment(generated));
    h.add(mean_overlap(generated, cats));
  }
  const FeatureNet net = train_feature_net(grid, vocab, seed);
  h.add(net.features(s.test, vocab));
  out["metrics"] = h.h;

  h = {};
  EvalOptions eo;
  eo.task = Task::GenT;
  eo.seed = seed;
  eo.sampler.with_prefix = true;
  eo.examples.with_prefix = true;
  eo.feature_net = &net;
  const std::vector<Layout> eval_set(s.train.begin(), s.train.begin() + 60);
  const EvalRun run = evaluate_task(model, vocab, eval_set, eo);
  h.add(to_json(run.report).dump());
  for (const auto& o : run.outputs) {
    if (o) h.add(*o);
  }
  out["evaluate"] = h.h;

  h = {};
  const auto ckpt = std::filesystem::temp_directory_path() / ("layoutseq-acc-" + std::to_string(seed) + ".ckpt");
  tensor::save_checkpoint(ckpt, model.state());
  std::ifstream is(ckpt, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::filesystem::remove(ckpt);
  h.add(bytes);
  out["checkpoint"] = h.h;
  return out;
}

Outcome determinism() {
  const auto a = pipeline_hashes(123), b = pipeline_hashes(123);
  std::string differing;
  for (const auto& [stage, hash] : a) {
    if (b.at(stage) != hash) differing += " " + stage;
  }
  return {differing.empty(),
          differing.empty() ? fmt("%zu stages bit-identical across paired runs", a.size()) : "differs:" + differing};
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  const std::vector<Criterion> criteria = {
      {"codec-roundtrip", 5, codec},
      {"fsm-format", 30, fsm_format},
      {"exact-constraints", 60, exact_constraints},
      {"gen-r-direction", 600, gen_r_direction},
      {"gradients", 60, gradients},
      {"trainability", 300, trainability},
      {"mixing", 60, mixing},
      {"metric-oracles", 60, metric_oracles},
      {"coord-similarity", 600, coord_similarity},
      {"determinism", 600, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (argc > 1 && std::none_of(argv + 1, argv + argc, [&](const char* a) { return c.name == a; })) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs < c.budget_seconds;
    if (!pass) ++failures;
    std::printf("%s  %-18s %s [%.1fs, budget %.0fs]\n", pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), secs,
                c.budget_seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
