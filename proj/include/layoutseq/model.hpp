#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "layoutseq/transformer.hpp"
#include "layoutseq/vocab.hpp"

namespace layoutseq {

using tensor::Matrix;

enum class Architecture { EncoderDecoder, DecoderOnly };

std::string_view to_string(Architecture a);
/// "encdec" / "dec" (also "encoder-decoder" / "decoder-only").
std::optional<Architecture> parse_architecture(std::string_view name);

struct ModelConfig {
  int layers = 2;
  int heads = 4;
  int d_model = 64;
  int d_ff = 256;
  int max_input_len = 448;
  int max_output_len = 121;
  Architecture architecture = Architecture::EncoderDecoder;
  OrderPolicy output_order = OrderPolicy::Alphabetic;
  double dropout = 0.1;
  bool tie_embeddings = true;

  /// 8 layers, 8 heads, 512-wide embeddings, 2048-wide feed-forward.
  static ModelConfig paper_scale();

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// One padded-batch item: the model reads `input` and `decoder_input`
/// (target without its last token) and predicts `targets` (target without
/// its first token), one per decoder position.
struct SequencePair {
  std::vector<int> input;
  std::vector<int> target;
};

class Seq2SeqModel {
 public:
  Seq2SeqModel(const ModelConfig& config, int vocab_size, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  int vocab_size() const { return vocab_size_; }

  std::vector<tensor::Tensor>& parameters() { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  std::size_t parameter_count() const;
  static std::size_t parameter_count(const ModelConfig& config, int vocab_size);

  std::vector<tensor::NamedMatrix> state() const;
  /// Replaces parameter values by name; every parameter must be present
  /// with a matching shape.
  void load_state(std::span<const tensor::NamedMatrix> state);

  /// Teacher-forced logits for a batch: one row per (item, decoder
  /// position), padded to the batch's longest target. `targets_out`
  /// receives the aligned next-token targets, -1 on padding.
  tensor::Tensor batch_logits(std::span<const SequencePair> batch, std::vector<int>& targets_out,
                              Rng* dropout_rng = nullptr) const;

  /// Logits (prefix length x vocab) for one input and decoder prefix;
  /// row t scores the token following prefix[t].
  Matrix forward(std::span<const int> input, std::span<const int> target_prefix) const;

  /// Token embedding table (vocab x d_model).
  const Matrix& token_embedding() const { return token_embedding_.value(); }

  class Decoder;

 private:
  friend class Decoder;

  void check_lengths(std::size_t input_len, std::size_t target_len) const;
  tensor::Tensor embed(std::span<const int> ids, const tensor::Tensor& positions, std::span<const int> position_ids) const;
  tensor::Tensor project(const tensor::Tensor& hidden) const;

  ModelConfig config_;
  int vocab_size_;
  std::vector<std::string> names_;
  std::vector<tensor::Tensor> params_;

  tensor::Tensor token_embedding_;
  tensor::Tensor output_weight_;  // undefined when tied
  tensor::Tensor output_bias_;
  tensor::Tensor encoder_positions_;
  tensor::Tensor decoder_positions_;
  std::vector<nn::EncoderLayer> encoder_;
  nn::Norm encoder_norm_;
  std::vector<nn::DecoderLayer> decoder_;
  std::vector<nn::EncoderLayer> causal_stack_;  // decoder-only variant
  nn::Norm decoder_norm_;
};

/// Incremental (KV-cached) inference over a frozen model. Produces the
/// same logits as `forward`, one decoder token at a time.
class Seq2SeqModel::Decoder {
 public:
  Decoder(const Seq2SeqModel& model, std::span<const int> input);

  /// Feeds one decoder token and returns the next-token logits.
  Eigen::VectorXd step(int token);
  int position() const { return position_; }

 private:
  Eigen::RowVectorXd run_layers(int token, int position);

  const Seq2SeqModel* model_;
  int position_ = 0;
  int input_len_ = 0;
  std::vector<Matrix> self_keys_;
  std::vector<Matrix> self_values_;
  std::vector<Matrix> cross_keys_;
  std::vector<Matrix> cross_values_;
};

/// Cosine similarity between every pair of coordinate-token embeddings
/// (bins x bins); symmetric with an exact unit diagonal.
Matrix coord_embedding_similarity(const Seq2SeqModel& model, const Vocabulary& vocab);

/// Mean of sim(i, j) over pairs with |i - j| = d.
double mean_similarity_at(const Matrix& sim, int d);

}  // namespace layoutseq
