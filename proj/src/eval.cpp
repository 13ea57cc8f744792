#include "layoutseq/eval.hpp"

#include <algorithm>
#include <tuple>

#include "layoutseq/error.hpp"
#include "layoutseq/log.hpp"

namespace layoutseq {

namespace {

std::vector<std::tuple<int, int, int>> triples(const Layout& l) {
  std::vector<std::tuple<int, int, int>> out;
  for (const auto& e : l.elements) out.emplace_back(e.category, e.box.w, e.box.h);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

bool satisfies(const Layout& out, const ConstraintSpec& spec) {
  switch (spec.task) {
    case Task::UGen: return true;
    case Task::GenT:
    case Task::GenR: return category_multiset(out) == sorted(spec.types);
    case Task::GenTS: {
      if (spec.sizes.size() != spec.types.size()) return false;
      std::vector<std::tuple<int, int, int>> want;
      for (std::size_t i = 0; i < spec.types.size(); ++i) want.emplace_back(spec.types[i], spec.sizes[i].w, spec.sizes[i].h);
      std::sort(want.begin(), want.end());
      return triples(out) == want;
    }
    case Task::Refinement: return spec.draft && category_multiset(out) == category_multiset(*spec.draft);
    case Task::Completion: {
      if (!spec.partial || out.size() < spec.partial->size()) return false;
      return std::equal(spec.partial->elements.begin(), spec.partial->elements.end(), out.elements.begin());
    }
  }
  return false;
}

EvalRun evaluate_task(const Seq2SeqModel& model, const Vocabulary& vocab, const std::vector<Layout>& test,
                      const EvalOptions& options) {
  if (test.empty()) throw Error(ErrorKind::EmptyDataset, "no test layouts");
  ExampleOptions ex = options.examples;
  ex.output_order = model.config().output_order;
  EvalRun run;
  std::vector<Layout> generated;
  std::size_t unparsed = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    Rng rng = make_rng(options.seed, i);
    const ConstraintSpec spec = canonicalize_spec(constraint_for(test[i], options.task, vocab, ex, rng), vocab.categories());
    SamplerConfig sc = options.sampler;
    sc.seed = options.seed * 1000003ULL + i;
    const Sample s = generate(model, vocab, spec, sc, 1).front();
    std::optional<Layout> out = s.layout;
    if (!out) {
      ++unparsed;
      Layout salvaged = salvage_layout(s.tokens, vocab);
      if (!salvaged.empty()) out = std::move(salvaged);
    } else if (satisfies(*out, spec)) {
      ++run.satisfied;
    }
    if (out) generated.push_back(*out);
    run.specs.push_back(spec);
    run.outputs.push_back(std::move(out));
  }

  MetricReport& r = run.report;
  r.task = std::string(to_string(options.task));
  r.generated = generated.size();
  r.references = test.size();
  r.unparsed = unparsed;
  r.satisfaction = static_cast<double>(run.satisfied) / static_cast<double>(test.size());
  if (!generated.empty()) {
    r.miou = miou(generated, test, vocab.bins());
    r.alignment = mean_alignment(generated, vocab.bins());
    r.overlap = mean_overlap(generated, vocab.categories(), vocab.bins());
  }
  if (options.feature_net) {
    const auto d = static_cast<std::size_t>(options.feature_net->feature_dim());
    if (generated.size() > d && test.size() > d) {
      r.fid = fid(options.feature_net->features(generated, vocab), options.feature_net->features(test, vocab));
    } else {
      spdlog::warn("FID skipped: needs more than {} layouts per corpus", d);
    }
  }
  if (options.task == Task::GenR) r.violation_rate = violation_rate(run.outputs, run.specs);
  return run;
}

}  // namespace layoutseq
