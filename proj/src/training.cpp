#include "layoutseq/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "layoutseq/error.hpp"
#include "layoutseq/log.hpp"

namespace layoutseq {

namespace t = layoutseq::tensor;

MixingPlan MixingPlan::reference() {
  MixingPlan p;
  p.weights = {1.0 / 12, 1.0 / 12, 1.0 / 3, 1.0 / 12, 1.0 / 3, 1.0 / 12};
  return p;
}

MixingPlan MixingPlan::uniform() {
  MixingPlan p;
  p.weights.fill(1.0 / kNumTasks);
  return p;
}

void MixingPlan::validate() const {
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) {
      throw Error(ErrorKind::Config, "mixing weight for " + std::string(to_string(kAllTasks[i])) + " must be > 0");
    }
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::Config, "mixing weights must sum to 1");
}

TaskSampler::TaskSampler(const MixingPlan& plan) {
  plan.validate();
  std::partial_sum(plan.weights.begin(), plan.weights.end(), cumulative_.begin());
}

Task TaskSampler::draw(Rng& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, cumulative_.back())(rng);
  for (std::size_t i = 0; i < cumulative_.size(); ++i) {
    if (u < cumulative_[i]) return kAllTasks[i];
  }
  return kAllTasks.back();
}

namespace {

SequencePair to_pair(const TrainingExample& ex) { return {ex.input.ids, ex.target.ids}; }

// Per-row NLL from logit values, for per-task logging.
std::vector<double> row_nll(const t::Matrix& logits, std::span<const int> targets) {
  std::vector<double> out(targets.size(), 0.0);
  for (t::Index r = 0; r < logits.rows(); ++r) {
    const int tgt = targets[static_cast<std::size_t>(r)];
    if (tgt < 0) continue;
    const double mx = logits.row(r).maxCoeff();
    out[static_cast<std::size_t>(r)] = mx + std::log((logits.row(r).array() - mx).exp().sum()) - logits(r, tgt);
  }
  return out;
}

class Trainer {
 public:
  Trainer(Seq2SeqModel& model, const Schedule& schedule, std::uint64_t seed)
      : model_(model),
        schedule_(schedule),
        optimizer_(model.parameters(), {schedule.learning_rate, schedule.warmup_steps}),
        dropout_rng_(make_rng(seed, 2)) {
    if (schedule.batch_size < 1) throw Error(ErrorKind::Config, "train.batch_size must be >= 1");
    if (schedule.epochs < 1) throw Error(ErrorKind::Config, "train.epochs must be >= 1");
  }

  // One optimizer step; returns the batch loss.
  double step(std::span<const SequencePair> batch, std::span<const Task> tasks, TrainResult& result) {
    std::vector<int> targets;
    const t::Tensor logits = model_.batch_logits(batch, targets, &dropout_rng_);
    const t::Tensor loss = t::cross_entropy(logits, targets);
    const double value = loss.item();
    const long step_no = optimizer_.step_count() + 1;
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::Training, "loss became " + std::to_string(value) + " at step " + std::to_string(step_no) +
                                           " (lr " + std::to_string(optimizer_.learning_rate_at(step_no)) + ")");
    }
    loss.backward();
    optimizer_.step();
    result.curve.push_back({step_no, "all", value});
    if (!tasks.empty()) log_per_task(logits.value(), targets, batch, tasks, step_no, result);
    result.steps = step_no;
    result.final_loss = value;
    if (schedule_.checkpoint_every > 0 && !schedule_.checkpoint_path.empty() &&
        step_no % schedule_.checkpoint_every == 0) {
      save();
    }
    return value;
  }

  void finish() {
    if (!schedule_.checkpoint_path.empty()) save();
  }

 private:
  void log_per_task(const t::Matrix& logits, std::span<const int> targets, std::span<const SequencePair> batch,
                    std::span<const Task> tasks, long step_no, TrainResult& result) const {
    const auto nll = row_nll(logits, targets);
    const std::size_t rows_per_item = targets.size() / batch.size();
    std::array<double, kNumTasks> sum{};
    std::array<long, kNumTasks> count{};
    for (std::size_t r = 0; r < targets.size(); ++r) {
      if (targets[r] < 0) continue;
      const auto task = static_cast<std::size_t>(tasks[r / rows_per_item]);
      sum[task] += nll[r];
      ++count[task];
    }
    for (std::size_t i = 0; i < kNumTasks; ++i) {
      if (count[i] > 0) {
        result.curve.push_back({step_no, std::string(to_string(kAllTasks[i])), sum[i] / static_cast<double>(count[i])});
      }
    }
  }

  void save() const {
    const auto state = model_.state();
    t::save_checkpoint(schedule_.checkpoint_path, state);
  }

  Seq2SeqModel& model_;
  const Schedule& schedule_;
  t::Adam optimizer_;
  Rng dropout_rng_;
};

bool reached_cap(const Schedule& s, long steps) { return s.max_steps > 0 && steps >= s.max_steps; }

}  // namespace

TrainResult train_single(Seq2SeqModel& model, std::span<const TrainingExample> examples, const Schedule& schedule,
                         std::uint64_t seed, const StepCallback& on_step) {
  if (examples.empty()) throw Error(ErrorKind::EmptyDataset, "no training examples");
  t::FlushDenormalsGuard ftz;
  Trainer trainer(model, schedule, seed);
  Rng order_rng = make_rng(seed, 1);
  TrainResult result;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(schedule.batch_size);
  for (int epoch = 0; epoch < schedule.epochs && !reached_cap(schedule, result.steps); ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t start = 0; start < order.size() && !reached_cap(schedule, result.steps); start += bs) {
      std::vector<SequencePair> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) batch.push_back(to_pair(examples[order[i]]));
      const double loss = trainer.step(batch, {}, result);
      if (on_step) on_step(result.steps, loss);
    }
    spdlog::debug("epoch {} done, step {}, loss {:.4f}", epoch + 1, result.steps, result.final_loss);
  }
  for (auto& p : result.curve) p.task = std::string(to_string(examples.front().task));
  trainer.finish();
  return result;
}

TrainResult train_multi(Seq2SeqModel& model, const std::map<Task, std::vector<TrainingExample>>& datasets,
                        const MixingPlan& plan, const Schedule& schedule, std::uint64_t seed,
                        const StepCallback& on_step) {
  const TaskSampler sampler(plan);
  std::size_t largest = 0;
  for (Task task : kAllTasks) {
    auto it = datasets.find(task);
    if (it == datasets.end() || it->second.empty()) {
      throw Error(ErrorKind::EmptyDataset, "multi-task training needs examples for " + std::string(to_string(task)));
    }
    largest = std::max(largest, it->second.size());
  }
  t::FlushDenormalsGuard ftz;
  Trainer trainer(model, schedule, seed);
  Rng task_rng = make_rng(seed, 3);
  Rng order_rng = make_rng(seed, 4);

  // Per-task cursor over a shuffled order, reshuffled on exhaustion.
  struct Stream {
    const std::vector<TrainingExample>* examples;
    std::vector<std::size_t> order;
    std::size_t next = 0;
  };
  std::array<Stream, kNumTasks> streams;
  for (Task task : kAllTasks) {
    auto& s = streams[static_cast<std::size_t>(task)];
    s.examples = &datasets.at(task);
    s.order.resize(s.examples->size());
    std::iota(s.order.begin(), s.order.end(), std::size_t{0});
    std::shuffle(s.order.begin(), s.order.end(), order_rng);
  }
  auto take = [&](Task task) -> const TrainingExample& {
    auto& s = streams[static_cast<std::size_t>(task)];
    if (s.next == s.order.size()) {
      std::shuffle(s.order.begin(), s.order.end(), order_rng);
      s.next = 0;
    }
    return (*s.examples)[s.order[s.next++]];
  };

  TrainResult result;
  const auto bs = static_cast<std::size_t>(schedule.batch_size);
  const std::size_t steps_per_epoch = (largest + bs - 1) / bs;
  for (int epoch = 0; epoch < schedule.epochs && !reached_cap(schedule, result.steps); ++epoch) {
    for (std::size_t s = 0; s < steps_per_epoch && !reached_cap(schedule, result.steps); ++s) {
      std::vector<SequencePair> batch;
      std::vector<Task> tasks;
      for (std::size_t i = 0; i < bs; ++i) {
        const Task task = sampler.draw(task_rng);
        batch.push_back(to_pair(take(task)));
        tasks.push_back(task);
      }
      const double loss = trainer.step(batch, tasks, result);
      if (on_step) on_step(result.steps, loss);
    }
    spdlog::debug("epoch {} done, step {}, loss {:.4f}", epoch + 1, result.steps, result.final_loss);
  }
  trainer.finish();
  return result;
}

double evaluate_nll(const Seq2SeqModel& model, std::span<const TrainingExample> examples, int batch_size) {
  t::NoGradGuard guard;
  t::FlushDenormalsGuard ftz;
  double total = 0.0;
  long count = 0;
  const auto bs = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < examples.size(); start += bs) {
    std::vector<SequencePair> batch;
    for (std::size_t i = start; i < std::min(examples.size(), start + bs); ++i) batch.push_back(to_pair(examples[i]));
    std::vector<int> targets;
    const t::Tensor logits = model.batch_logits(batch, targets);
    const auto nll = row_nll(logits.value(), targets);
    for (std::size_t r = 0; r < targets.size(); ++r) {
      if (targets[r] < 0) continue;
      total += nll[r];
      ++count;
    }
  }
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const LossPoint> curve) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << "step,task,loss\n";
  os.precision(17);
  for (const auto& p : curve) os << p.step << ',' << p.task << ',' << p.loss << '\n';
}

}  // namespace layoutseq
