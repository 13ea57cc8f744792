#pragma once

#include <optional>
#include <vector>

#include "layoutseq/data.hpp"
#include "layoutseq/metrics.hpp"
#include "layoutseq/sampler.hpp"

namespace layoutseq {

/// Does `out` honor the hard constraints of `spec`? Types (Gen-T, Gen-R)
/// and (type, w, h) triples (Gen-TS) compare as multisets, Refinement
/// keeps the draft's categories, Completion keeps the partial prefix.
bool satisfies(const Layout& out, const ConstraintSpec& spec);

struct EvalOptions {
  Task task = Task::UGen;
  SamplerConfig sampler;
  ExampleOptions examples;
  std::uint64_t seed = 0;
  const FeatureNet* feature_net = nullptr;
};

struct EvalRun {
  MetricReport report;
  std::vector<ConstraintSpec> specs;
  std::vector<std::optional<Layout>> outputs;  // unparsed samples are salvaged
  std::size_t satisfied = 0;
};

/// One sample per test layout, conditioned on the constraint that layout
/// induces; metrics are computed against the test layouts.
EvalRun evaluate_task(const Seq2SeqModel& model, const Vocabulary& vocab, const std::vector<Layout>& test,
                      const EvalOptions& options);

}  // namespace layoutseq
