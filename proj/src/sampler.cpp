#include "layoutseq/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>

#include "layoutseq/error.hpp"
#include "layoutseq/log.hpp"

namespace layoutseq {

namespace {

std::atomic<std::uint64_t> g_steps{0};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

Sample draw_one(const Seq2SeqModel& model, const Vocabulary& vocab, const ConstraintSpec& spec,
                const std::vector<int>& input, const SamplerConfig& cfg, Rng& rng) {
  tensor::FlushDenormalsGuard ftz;
  Sample s;
  std::optional<Fsm> fsm;
  if (cfg.use_fsm) fsm.emplace(spec, vocab, schedule_mode_for(model.config()));

  // Completion starts from the force-fed partial layout.
  std::vector<int> prefix{Vocabulary::kSos};
  if (fsm) {
    prefix = fsm->tokens();
  } else if (spec.task == Task::Completion) {
    const TokenSequence partial = encode_layout(*spec.partial, vocab);
    prefix.assign(partial.ids.begin(), partial.ids.end() - 1);
  }
  const int limit = std::min(cfg.max_steps, model.config().max_output_len);

  Seq2SeqModel::Decoder decoder(model, input);
  Eigen::VectorXd logits;
  for (int t : prefix) logits = decoder.step(t);
  s.tokens = prefix;
  while (static_cast<int>(s.tokens.size()) < limit) {
    int token = 0;
    if (fsm) {
      const FeasibleSet feasible = fsm->feasible();
      token = pick_token(mask_logits(logits, feasible), cfg, rng);
      fsm->advance(token);
    } else {
      token = pick_token(logits, cfg, rng);
    }
    ++g_steps;
    s.tokens.push_back(token);
    if (token == Vocabulary::kEos || (fsm && fsm->done())) break;
    if (static_cast<int>(s.tokens.size()) < limit) logits = decoder.step(token);
  }
  if (fsm) {
    s.flagged = fsm->any_fallback();
    s.violations = fsm->violations().size();
  }
  try {
    s.layout = decode_layout(s.tokens, vocab);
  } catch (const Error& e) {
    s.error = e.what();
  }
  return s;
}

}  // namespace

std::string_view to_string(Strategy s) { return s == Strategy::Greedy ? "greedy" : "top-k"; }

std::optional<Strategy> parse_strategy(std::string_view name) {
  if (name == "greedy") return Strategy::Greedy;
  if (name == "top-k" || name == "topk") return Strategy::TopK;
  return std::nullopt;
}

void SamplerConfig::validate() const {
  if (k < 1) throw Error(ErrorKind::Config, "sampler.k must be >= 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw Error(ErrorKind::Config, "sampler.temperature must be > 0");
  if (max_steps < 7) throw Error(ErrorKind::Config, "sampler.max_steps must be >= 7");
}

Eigen::VectorXd mask_logits(const Eigen::VectorXd& logits, const FeasibleSet& feasible) {
  if (static_cast<std::size_t>(logits.size()) != feasible.allowed.size()) {
    throw Error(ErrorKind::Shape, "mask_logits: mask length differs from vocabulary");
  }
  if (feasible.empty()) throw Error(ErrorKind::InvalidConstraint, "mask_logits: empty feasible set");
  Eigen::VectorXd out = logits;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!feasible.allowed[static_cast<std::size_t>(i)]) out(i) = kNegInf;
  }
  return out;
}

Eigen::VectorXd next_token_distribution(const Eigen::VectorXd& logits, const SamplerConfig& cfg) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(logits.size());
  if (cfg.strategy == Strategy::Greedy) {
    p(argmax(logits)) = 1.0;
    return p;
  }
  std::vector<int> idx;
  for (int i = 0; i < logits.size(); ++i) {
    if (std::isfinite(logits(i))) idx.push_back(i);
  }
  if (idx.empty()) throw Error(ErrorKind::InvalidInput, "no finite logits to sample from");
  const auto keep = std::min<std::size_t>(idx.size(), static_cast<std::size_t>(cfg.k));
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(), [&](int a, int b) {
    return logits(a) > logits(b) || (logits(a) == logits(b) && a < b);
  });
  const double top = logits(idx.front());
  double total = 0.0;
  for (std::size_t j = 0; j < keep; ++j) {
    const double w = std::exp((logits(idx[j]) - top) / cfg.temperature);
    p(idx[j]) = w;
    total += w;
  }
  return p / total;
}

int pick_token(const Eigen::VectorXd& logits, const SamplerConfig& cfg, Rng& rng) {
  if (cfg.strategy == Strategy::Greedy) return argmax(logits);
  const Eigen::VectorXd p = next_token_distribution(logits, cfg);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  int last = 0;
  for (int i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    acc += p(i);
    last = i;
    if (u < acc) return i;
  }
  return last;
}

ScheduleMode schedule_mode_for(const ModelConfig& config) {
  return config.output_order == OrderPolicy::Position ? ScheduleMode::AnyOrder : ScheduleMode::InOrder;
}

std::vector<Sample> generate(const Seq2SeqModel& model, const Vocabulary& vocab, const ConstraintSpec& spec,
                             const SamplerConfig& cfg, int n) {
  cfg.validate();
  if (n < 1) throw Error(ErrorKind::InvalidInput, "n_samples must be >= 1");
  if (model.vocab_size() != vocab.size()) {
    throw Error(ErrorKind::InvalidInput, "model vocabulary size " + std::to_string(model.vocab_size()) +
                                             " differs from " + std::to_string(vocab.size()));
  }
  ConstraintSpec canonical = canonicalize_spec(spec, vocab.categories());
  if (canonical.task == Task::Refinement && canonical.draft) {
    canonical.draft = order_elements(*canonical.draft, OrderPolicy::Alphabetic, vocab.categories());
  }
  validate_spec(canonical, vocab);
  const TokenSequence input = encode_input(canonical, vocab, cfg.with_prefix);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(i));
    out.push_back(draw_one(model, vocab, canonical, input.ids, cfg, rng));
    if (out.back().flagged) spdlog::debug("sample {} fell back on an unsatisfiable slot", i);
  }
  return out;
}

Layout refine(const Seq2SeqModel& model, const Vocabulary& vocab, const Layout& draft, const SamplerConfig& cfg) {
  if (draft.empty()) throw Error(ErrorKind::EmptyLayout, "refine needs a non-empty draft");
  ConstraintSpec spec;
  spec.task = Task::Refinement;
  spec.draft = draft;
  SamplerConfig greedy = cfg;
  greedy.strategy = Strategy::Greedy;
  greedy.use_fsm = true;
  auto samples = generate(model, vocab, spec, greedy, 1);
  if (!samples.front().layout) throw Error(ErrorKind::Grammar, "refinement produced no layout: " + samples.front().error);
  Layout out = std::move(*samples.front().layout);
  out.canvas_width = draft.canvas_width;
  out.canvas_height = draft.canvas_height;
  return out;
}

std::uint64_t sampler_step_count() { return g_steps.load(); }

}  // namespace layoutseq
