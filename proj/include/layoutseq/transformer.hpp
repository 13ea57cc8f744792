#pragma once

#include <string>
#include <vector>

#include "layoutseq/tensor.hpp"

namespace layoutseq::nn {

using tensor::Index;
using tensor::Matrix;
using tensor::Tensor;

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
};

struct Norm {
  Tensor gain;
  Tensor bias;
};

struct Attention {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
};

struct FeedForward {
  Linear expand;
  Linear contract;
};

/// Pre-norm self-attention block (also the decoder-only layer).
struct EncoderLayer {
  Norm norm1;
  Attention self_attention;
  Norm norm2;
  FeedForward feed_forward;
};

struct DecoderLayer {
  Norm norm1;
  Attention self_attention;
  Norm norm2;
  Attention cross_attention;
  Norm norm3;
  FeedForward feed_forward;
};

/// Collects named parameters during construction and initializes them
/// from one seeded generator so a config + seed fixes every weight.
class ParamFactory {
 public:
  ParamFactory(std::uint64_t seed, double init_std) : rng_(make_rng(seed, 0x9a7a)), init_std_(init_std) {}

  Tensor normal(const std::string& name, Index rows, Index cols);
  Tensor zeros(const std::string& name, Index rows, Index cols);
  Tensor ones(const std::string& name, Index rows, Index cols);

  Linear linear(const std::string& name, Index in, Index out);
  Norm norm(const std::string& name, Index width);
  Attention attention(const std::string& name, Index width);
  FeedForward feed_forward(const std::string& name, Index width, Index hidden);
  EncoderLayer encoder_layer(const std::string& name, Index width, Index hidden);
  DecoderLayer decoder_layer(const std::string& name, Index width, Index hidden);

  std::vector<std::string>& names() { return names_; }
  std::vector<Tensor>& params() { return params_; }

 private:
  Tensor add(const std::string& name, Matrix value);

  Rng rng_;
  double init_std_;
  std::vector<std::string> names_;
  std::vector<Tensor> params_;
};

/// Dropout is active only when `rng` is non-null.
struct Regularization {
  double dropout = 0.0;
  Rng* rng = nullptr;
};

Tensor apply(const Linear& l, const Tensor& x);
Tensor apply(const Norm& n, const Tensor& x);
Tensor apply(const FeedForward& f, const Tensor& x);

/// Projections plus fused multi-head attention plus output projection.
Tensor attend(const Attention& a, const Tensor& queries, const Tensor& keys_values, const tensor::AttentionShape& shape);

Tensor encoder_layer(const EncoderLayer& layer, const Tensor& x, const tensor::AttentionShape& shape,
                     const Regularization& reg);

Tensor decoder_layer(const DecoderLayer& layer, const Tensor& x, const Tensor& memory,
                     const tensor::AttentionShape& self_shape, const tensor::AttentionShape& cross_shape,
                     const Regularization& reg);

// Plain-matrix inference helpers (no tape) used by incremental decoding.
Matrix layer_norm_rows(const Matrix& x, const Norm& n, double eps = 1e-5);
Matrix linear_rows(const Matrix& x, const Linear& l);
Matrix gelu_rows(const Matrix& x);
/// Single-step multi-head attention of `q` (rows x d) over `keys`/`values`.
Matrix attention_rows(const Matrix& q, const Matrix& keys, const Matrix& values, Index heads);

}  // namespace layoutseq::nn
