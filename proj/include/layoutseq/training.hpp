#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "layoutseq/model.hpp"
#include "layoutseq/vocab.hpp"

namespace layoutseq {

struct TrainingExample {
  TokenSequence input;
  TokenSequence target;
  Task task = Task::UGen;
};

/// Per-task sampling probabilities for multi-task training.
struct MixingPlan {
  std::array<double, kNumTasks> weights{};

  /// UGen 1/12, Gen-T 1/12, Gen-TS 1/3, Gen-R 1/12, Refinement 1/3,
  /// Completion 1/12.
  static MixingPlan reference();
  static MixingPlan uniform();

  double weight(Task t) const { return weights[static_cast<std::size_t>(t)]; }
  /// Throws Config unless every weight is > 0 and they sum to 1 (1e-12).
  void validate() const;
};

class TaskSampler {
 public:
  explicit TaskSampler(const MixingPlan& plan);
  Task draw(Rng& rng) const;

 private:
  std::array<double, kNumTasks> cumulative_{};
};

struct Schedule {
  int epochs = 1;
  int batch_size = 32;
  long warmup_steps = 0;
  double learning_rate = 1e-4;
  long max_steps = 0;  // 0: run all epochs
  long checkpoint_every = 0;
  std::filesystem::path checkpoint_path;  // empty: no checkpoints
};

struct LossPoint {
  long step = 0;
  std::string task;  // task name, or "all"
  double loss = 0.0;
};

struct TrainResult {
  std::vector<LossPoint> curve;
  long steps = 0;
  double final_loss = 0.0;
};

using StepCallback = std::function<void(long step, double loss)>;

/// Teacher-forced NLL minimization with Adam. Every batch is built from
/// ground-truth sequences only.
TrainResult train_single(Seq2SeqModel& model, std::span<const TrainingExample> examples, const Schedule& schedule,
                         std::uint64_t seed, const StepCallback& on_step = {});

/// Each batch element's task is drawn from `plan`; a task's examples are
/// cycled (reshuffled on exhaustion), and an epoch spans the largest task.
TrainResult train_multi(Seq2SeqModel& model, const std::map<Task, std::vector<TrainingExample>>& datasets,
                        const MixingPlan& plan, const Schedule& schedule, std::uint64_t seed,
                        const StepCallback& on_step = {});

/// Mean per-token NLL with dropout disabled.
double evaluate_nll(const Seq2SeqModel& model, std::span<const TrainingExample> examples, int batch_size = 32);

/// Writes "step,task,loss" rows.
void write_loss_csv(const std::filesystem::path& path, std::span<const LossPoint> curve);

}  // namespace layoutseq
