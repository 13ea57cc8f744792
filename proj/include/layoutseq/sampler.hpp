#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "layoutseq/fsm.hpp"
#include "layoutseq/model.hpp"

namespace layoutseq {

enum class Strategy { Greedy, TopK };
std::string_view to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

struct SamplerConfig {
  Strategy strategy = Strategy::TopK;
  int k = 10;
  double temperature = 0.5;
  int max_steps = 121;  // total sequence length, <sos> and <eos> included
  bool use_fsm = true;
  std::uint64_t seed = 0;
  bool with_prefix = false;  // the model was trained on task-prefixed inputs

  void validate() const;
};

struct Sample {
  std::optional<Layout> layout;  // empty when the sequence does not parse
  std::vector<int> tokens;       // starts with <sos>
  bool flagged = false;          // some slot fell back to its whole group
  std::size_t violations = 0;
  std::string error;
};

/// Sets infeasible logits to -inf. Throws InvalidConstraint on an empty
/// feasible set (the FSM reports those as fallback sets instead).
Eigen::VectorXd mask_logits(const Eigen::VectorXd& logits, const FeasibleSet& feasible);

/// Next-token distribution under `strategy`: greedy is one-hot on the
/// lowest-index argmax; top-k keeps the k highest finite logits, divides
/// by the temperature and normalizes.
Eigen::VectorXd next_token_distribution(const Eigen::VectorXd& logits, const SamplerConfig& cfg);

int pick_token(const Eigen::VectorXd& logits, const SamplerConfig& cfg, Rng& rng);

ScheduleMode schedule_mode_for(const ModelConfig& config);

/// Draws `n` independent samples; sample i uses stream i of `cfg.seed`.
std::vector<Sample> generate(const Seq2SeqModel& model, const Vocabulary& vocab, const ConstraintSpec& spec,
                             const SamplerConfig& cfg, int n);

/// Greedy refinement of a non-empty draft under the Refinement FSM.
Layout refine(const Seq2SeqModel& model, const Vocabulary& vocab, const Layout& draft, const SamplerConfig& cfg);

/// Number of decoding steps taken by this process so far.
std::uint64_t sampler_step_count();

}  // namespace layoutseq
