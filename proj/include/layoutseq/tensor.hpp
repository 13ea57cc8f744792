#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "layoutseq/random.hpp"

namespace layoutseq::tensor {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  bool requires_grad = false;
  bool grad_fresh = false;  // set by backward(), cleared by the optimizer
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

/// Handle to a node of the autodiff tape. Copies share the node.
/// Tensors are two-dimensional and row-major; a "vector" is 1 x n.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  std::vector<Index> shape() const { return {rows(), cols()}; }
  bool requires_grad() const { return node_->requires_grad; }

  bool has_grad() const { return node_->grad.size() != 0; }
  /// Gradient, or zeros when nothing has flowed in.
  Matrix grad() const;
  Matrix& grad_storage() { return node_->grad; }
  bool grad_fresh() const { return node_->grad_fresh; }
  void zero_grad();

  double item() const;

  /// Reverse-mode accumulation from this scalar into every tensor that
  /// requires grad. Throws InvalidUse for non-scalars.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables tape recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Flushes subnormal floats to zero on the current thread while alive.
class FlushDenormalsGuard {
 public:
  FlushDenormalsGuard();
  ~FlushDenormalsGuard();
  FlushDenormalsGuard(const FlushDenormalsGuard&) = delete;
  FlushDenormalsGuard& operator=(const FlushDenormalsGuard&) = delete;

 private:
  unsigned previous_ = 0;
};

// Forward ops. Shape mismatches throw a shape error naming both shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// x (r x c) + bias (1 x c), broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// Rows of `table` selected by `ids`.
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);
Tensor gather_rows(const Tensor& x, std::span<const int> rows);
/// Row-wise softmax, max-subtracted.
Tensor softmax(const Tensor& x);
/// Per-row normalization with learnable gain/bias (both 1 x c).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor gelu(const Tensor& x);
Tensor tanh(const Tensor& x);
/// Adds -inf strictly above the diagonal of a square score matrix.
Tensor causal_mask_add(const Tensor& scores);
/// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Mean negative log-likelihood over rows whose target != ignore_index.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index = -1);

/// Batched multi-head scaled dot-product attention. `q` stacks `batch`
/// blocks of `query_len` rows, `k`/`v` stack `batch` blocks of `key_len`
/// rows; columns are split into `heads` equal slices. Keys at or beyond
/// key_lengths[b] are masked; `causal` additionally masks key j > query i.
struct AttentionShape {
  Index batch = 1;
  Index query_len = 1;
  Index key_len = 1;
  Index heads = 1;
  bool causal = false;
  std::vector<int> key_lengths;  // empty = all keys valid
};
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionShape& shape);

struct AdamConfig {
  double learning_rate = 1e-4;
  long warmup_steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with linear warmup: lr_t = lr * min(1, t / warmup_steps).
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  /// Learning rate applied by step number `t` (1-based).
  double learning_rate_at(long t) const;
  long step_count() const { return step_; }

  /// Applies one update and clears gradients. Returns false (and logs a
  /// warning) if no parameter received a gradient since the last step.
  bool step();

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long step_ = 0;
};

struct NamedMatrix {
  std::string name;
  Matrix value;
};

/// Flat binary checkpoint: magic "LSQT", u32 version, u32 count, then per
/// tensor u32 name length, name bytes, u32 rank, u64 dims, f64 payload,
/// all little-endian.
void save_checkpoint(const std::filesystem::path& path, std::span<const NamedMatrix> tensors);
std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path);

}  // namespace layoutseq::tensor
