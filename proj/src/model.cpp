#include "layoutseq/model.hpp"

#include <algorithm>
#include <map>

#include "layoutseq/error.hpp"

namespace layoutseq {

namespace t = layoutseq::tensor;
using tensor::Index;
using tensor::Tensor;

std::string_view to_string(Architecture a) { return a == Architecture::EncoderDecoder ? "encdec" : "dec"; }

std::optional<Architecture> parse_architecture(std::string_view name) {
  if (name == "encdec" || name == "encoder-decoder") return Architecture::EncoderDecoder;
  if (name == "dec" || name == "decoder-only") return Architecture::DecoderOnly;
  return std::nullopt;
}

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.layers = 8;
  c.heads = 8;
  c.d_model = 512;
  c.d_ff = 2048;
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
  if (layers < 1) fail("model.layers must be >= 1");
  if (heads < 1) fail("model.heads must be >= 1");
  if (d_model < 1 || d_model % heads != 0) fail("model.d_model must be a positive multiple of model.heads");
  if (d_ff < 1) fail("model.d_ff must be >= 1");
  if (max_input_len < 2) fail("model.max_input_len must be >= 2");
  if (max_output_len < 7) fail("model.max_output_len must be >= 7");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("model.dropout must be in [0, 1)");
}

Seq2SeqModel::Seq2SeqModel(const ModelConfig& config, int vocab_size, std::uint64_t seed)
    : config_(config), vocab_size_(vocab_size) {
  config_.validate();
  if (vocab_size < 1) throw Error(ErrorKind::Config, "vocabulary size must be positive");
  const Index d = config_.d_model;
  const Index ff = config_.d_ff;
  nn::ParamFactory f(seed, 0.02);
  token_embedding_ = f.normal("tok_emb", vocab_size, d);
  if (!config_.tie_embeddings) output_weight_ = f.normal("out.w", d, vocab_size);
  output_bias_ = f.zeros("out.b", 1, vocab_size);
  if (config_.architecture == Architecture::EncoderDecoder) {
    encoder_positions_ = f.normal("enc.pos", config_.max_input_len, d);
    decoder_positions_ = f.normal("dec.pos", config_.max_output_len, d);
    for (int i = 0; i < config_.layers; ++i) encoder_.push_back(f.encoder_layer("enc." + std::to_string(i), d, ff));
    encoder_norm_ = f.norm("enc.ln", d);
    for (int i = 0; i < config_.layers; ++i) decoder_.push_back(f.decoder_layer("dec." + std::to_string(i), d, ff));
  } else {
    decoder_positions_ = f.normal("dec.pos", config_.max_input_len + config_.max_output_len, d);
    for (int i = 0; i < config_.layers; ++i) {
      causal_stack_.push_back(f.encoder_layer("dec." + std::to_string(i), d, ff));
    }
  }
  decoder_norm_ = f.norm("dec.ln", d);
  names_ = std::move(f.names());
  params_ = std::move(f.params());
}

std::size_t Seq2SeqModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value().size());
  return n;
}

std::size_t Seq2SeqModel::parameter_count(const ModelConfig& c, int vocab_size) {
  const std::size_t d = static_cast<std::size_t>(c.d_model);
  const std::size_t ff = static_cast<std::size_t>(c.d_ff);
  const std::size_t v = static_cast<std::size_t>(vocab_size);
  const std::size_t L = static_cast<std::size_t>(c.layers);
  const std::size_t attention = 4 * (d * d + d);
  const std::size_t norm = 2 * d;
  const std::size_t feed_forward = d * ff + ff + ff * d + d;
  std::size_t n = v * d + v + (c.tie_embeddings ? 0 : d * v);
  if (c.architecture == Architecture::EncoderDecoder) {
    n += static_cast<std::size_t>(c.max_input_len + c.max_output_len) * d;
    n += L * (attention + 2 * norm + feed_forward) + norm;
    n += L * (2 * attention + 3 * norm + feed_forward) + norm;
  } else {
    n += static_cast<std::size_t>(c.max_input_len + c.max_output_len) * d;
    n += L * (attention + 2 * norm + feed_forward) + norm;
  }
  return n;
}

std::vector<t::NamedMatrix> Seq2SeqModel::state() const {
  std::vector<t::NamedMatrix> out;
  out.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) out.push_back({names_[i], params_[i].value()});
  return out;
}

void Seq2SeqModel::load_state(std::span<const t::NamedMatrix> state) {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& s : state) by_name[s.name] = &s.value;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto it = by_name.find(names_[i]);
    if (it == by_name.end()) throw Error(ErrorKind::Io, "checkpoint is missing parameter " + names_[i]);
    const Matrix& m = *it->second;
    if (m.rows() != params_[i].rows() || m.cols() != params_[i].cols()) {
      throw Error(ErrorKind::Shape, "checkpoint parameter " + names_[i] + " has the wrong shape");
    }
    params_[i].mutable_value() = m;
  }
}

void Seq2SeqModel::check_lengths(std::size_t input_len, std::size_t target_len) const {
  if (input_len > static_cast<std::size_t>(config_.max_input_len)) {
    throw Error(ErrorKind::Capacity, "input of " + std::to_string(input_len) + " tokens exceeds max_input_len " +
                                         std::to_string(config_.max_input_len));
  }
  if (target_len > static_cast<std::size_t>(config_.max_output_len)) {
    throw Error(ErrorKind::Capacity, "target of " + std::to_string(target_len) + " tokens exceeds max_output_len " +
                                         std::to_string(config_.max_output_len));
  }
}

Tensor Seq2SeqModel::embed(std::span<const int> ids, const Tensor& positions, std::span<const int> position_ids) const {
  return t::add(t::embedding_lookup(token_embedding_, ids), t::embedding_lookup(positions, position_ids));
}

Tensor Seq2SeqModel::project(const Tensor& hidden) const {
  const Tensor logits = config_.tie_embeddings ? t::matmul_nt(hidden, token_embedding_) : t::matmul(hidden, output_weight_);
  return t::add_bias(logits, output_bias_);
}

Tensor Seq2SeqModel::batch_logits(std::span<const SequencePair> batch, std::vector<int>& targets_out,
                                  Rng* dropout_rng) const {
  if (batch.empty()) throw Error(ErrorKind::InvalidInput, "empty batch");
  const Index B = static_cast<Index>(batch.size());
  const nn::Regularization reg{config_.dropout, dropout_rng};
  const int heads = config_.heads;
  std::size_t max_in = 0, max_dec = 0;
  for (const auto& p : batch) {
    if (p.input.empty() || p.target.size() < 2) throw Error(ErrorKind::InvalidInput, "sequence pair too short");
    check_lengths(p.input.size(), p.target.size());
    max_in = std::max(max_in, p.input.size());
    max_dec = std::max(max_dec, p.target.size() - 1);
  }

  if (config_.architecture == Architecture::EncoderDecoder) {
    const Index Li = static_cast<Index>(max_in);
    const Index Ld = static_cast<Index>(max_dec);
    std::vector<int> enc_ids(static_cast<std::size_t>(B * Li), Vocabulary::kPad), enc_pos(enc_ids.size());
    std::vector<int> dec_ids(static_cast<std::size_t>(B * Ld), Vocabulary::kPad), dec_pos(dec_ids.size());
    std::vector<int> in_lens, dec_lens;
    targets_out.assign(dec_ids.size(), -1);
    for (Index b = 0; b < B; ++b) {
      const auto& p = batch[static_cast<std::size_t>(b)];
      for (Index i = 0; i < Li; ++i) {
        const auto at = static_cast<std::size_t>(b * Li + i);
        enc_pos[at] = static_cast<int>(i);
        if (i < static_cast<Index>(p.input.size())) enc_ids[at] = p.input[static_cast<std::size_t>(i)];
      }
      for (Index i = 0; i < Ld; ++i) {
        const auto at = static_cast<std::size_t>(b * Ld + i);
        dec_pos[at] = static_cast<int>(i);
        if (i + 1 < static_cast<Index>(p.target.size())) {
          dec_ids[at] = p.target[static_cast<std::size_t>(i)];
          targets_out[at] = p.target[static_cast<std::size_t>(i + 1)];
        }
      }
      in_lens.push_back(static_cast<int>(p.input.size()));
      dec_lens.push_back(static_cast<int>(p.target.size() - 1));
    }
    Tensor x = embed(enc_ids, encoder_positions_, enc_pos);
    if (reg.rng) x = t::dropout(x, reg.dropout, *reg.rng);
    const t::AttentionShape enc_shape{B, Li, Li, heads, false, in_lens};
    for (const auto& layer : encoder_) x = nn::encoder_layer(layer, x, enc_shape, reg);
    const Tensor memory = nn::apply(encoder_norm_, x);

    Tensor y = embed(dec_ids, decoder_positions_, dec_pos);
    if (reg.rng) y = t::dropout(y, reg.dropout, *reg.rng);
    const t::AttentionShape self_shape{B, Ld, Ld, heads, true, dec_lens};
    const t::AttentionShape cross_shape{B, Ld, Li, heads, false, in_lens};
    for (const auto& layer : decoder_) y = nn::decoder_layer(layer, y, memory, self_shape, cross_shape, reg);
    return project(nn::apply(decoder_norm_, y));
  }

  // Decoder-only: input ‖ target[:-1] under one causal stack.
  std::size_t max_len = 0;
  for (const auto& p : batch) max_len = std::max(max_len, p.input.size() + p.target.size() - 1);
  const Index L = static_cast<Index>(max_len);
  std::vector<int> ids(static_cast<std::size_t>(B * L), Vocabulary::kPad), pos(ids.size());
  std::vector<int> lens;
  targets_out.assign(ids.size(), -1);
  for (Index b = 0; b < B; ++b) {
    const auto& p = batch[static_cast<std::size_t>(b)];
    const std::size_t li = p.input.size();
    const std::size_t len = li + p.target.size() - 1;
    for (Index i = 0; i < L; ++i) {
      const auto at = static_cast<std::size_t>(b * L + i);
      const auto ui = static_cast<std::size_t>(i);
      pos[at] = static_cast<int>(i);
      if (ui < li) {
        ids[at] = p.input[ui];
      } else if (ui < len) {
        ids[at] = p.target[ui - li];
        targets_out[at] = p.target[ui - li + 1];
      }
    }
    lens.push_back(static_cast<int>(len));
  }
  Tensor x = embed(ids, decoder_positions_, pos);
  if (reg.rng) x = t::dropout(x, reg.dropout, *reg.rng);
  const t::AttentionShape shape{B, L, L, heads, true, lens};
  for (const auto& layer : causal_stack_) x = nn::encoder_layer(layer, x, shape, reg);
  return project(nn::apply(decoder_norm_, x));
}

Matrix Seq2SeqModel::forward(std::span<const int> input, std::span<const int> target_prefix) const {
  t::NoGradGuard guard;
  SequencePair p;
  p.input.assign(input.begin(), input.end());
  p.target.assign(target_prefix.begin(), target_prefix.end());
  p.target.push_back(Vocabulary::kPad);
  std::vector<int> targets;
  const Tensor logits = batch_logits(std::span<const SequencePair>(&p, 1), targets);
  if (config_.architecture == Architecture::EncoderDecoder) return logits.value();
  return logits.value().middleRows(static_cast<Index>(input.size()), static_cast<Index>(target_prefix.size()));
}

Seq2SeqModel::Decoder::Decoder(const Seq2SeqModel& model, std::span<const int> input) : model_(&model) {
  const auto& c = model.config_;
  model.check_lengths(input.size(), 0);
  input_len_ = static_cast<int>(input.size());
  const bool encdec = c.architecture == Architecture::EncoderDecoder;
  const Index capacity = encdec ? c.max_output_len : c.max_input_len + c.max_output_len;
  const auto layers = static_cast<std::size_t>(c.layers);
  self_keys_.assign(layers, Matrix::Zero(capacity, c.d_model));
  self_values_.assign(layers, Matrix::Zero(capacity, c.d_model));
  if (encdec) {
    t::NoGradGuard guard;
    std::vector<int> pos(input.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
    Tensor x = model.embed(input, model.encoder_positions_, pos);
    const Index Li = static_cast<Index>(input.size());
    const t::AttentionShape shape{1, Li, Li, c.heads, false, {}};
    for (const auto& layer : model.encoder_) x = nn::encoder_layer(layer, x, shape, {});
    const Matrix memory = nn::layer_norm_rows(x.value(), model.encoder_norm_);
    for (const auto& layer : model.decoder_) {
      cross_keys_.push_back(nn::linear_rows(memory, layer.cross_attention.key));
      cross_values_.push_back(nn::linear_rows(memory, layer.cross_attention.value));
    }
  } else {
    for (int id : input) run_layers(id, position_++);
  }
}

Eigen::RowVectorXd Seq2SeqModel::Decoder::run_layers(int token, int position) {
  const auto& m = *model_;
  const auto& c = m.config_;
  if (token < 0 || token >= m.vocab_size_) throw Error(ErrorKind::InvalidInput, "token id out of range");
  if (position >= m.decoder_positions_.rows()) {
    throw Error(ErrorKind::Capacity, "decoding exceeded the model's maximum sequence length");
  }
  Matrix x = m.token_embedding_.value().row(token) + m.decoder_positions_.value().row(position);
  const Index n = position + 1;
  auto self_block = [&](std::size_t l, const nn::Norm& norm, const nn::Attention& att) {
    const Matrix h = nn::layer_norm_rows(x, norm);
    self_keys_[l].row(position) = nn::linear_rows(h, att.key).row(0);
    self_values_[l].row(position) = nn::linear_rows(h, att.value).row(0);
    const Matrix a = nn::attention_rows(nn::linear_rows(h, att.query), self_keys_[l].topRows(n),
                                        self_values_[l].topRows(n), c.heads);
    x += nn::linear_rows(a, att.output);
  };
  auto ff_block = [&](const nn::Norm& norm, const nn::FeedForward& ff) {
    x += nn::linear_rows(nn::gelu_rows(nn::linear_rows(nn::layer_norm_rows(x, norm), ff.expand)), ff.contract);
  };
  if (c.architecture == Architecture::EncoderDecoder) {
    for (std::size_t l = 0; l < m.decoder_.size(); ++l) {
      const auto& layer = m.decoder_[l];
      self_block(l, layer.norm1, layer.self_attention);
      const Matrix q = nn::linear_rows(nn::layer_norm_rows(x, layer.norm2), layer.cross_attention.query);
      const Matrix a = nn::attention_rows(q, cross_keys_[l], cross_values_[l], c.heads);
      x += nn::linear_rows(a, layer.cross_attention.output);
      ff_block(layer.norm3, layer.feed_forward);
    }
  } else {
    for (std::size_t l = 0; l < m.causal_stack_.size(); ++l) {
      const auto& layer = m.causal_stack_[l];
      self_block(l, layer.norm1, layer.self_attention);
      ff_block(layer.norm2, layer.feed_forward);
    }
  }
  return nn::layer_norm_rows(x, m.decoder_norm_).row(0);
}

Eigen::VectorXd Seq2SeqModel::Decoder::step(int token) {
  const auto& m = *model_;
  const Eigen::RowVectorXd h = run_layers(token, position_++);
  Eigen::VectorXd logits = m.config_.tie_embeddings ? Eigen::VectorXd(m.token_embedding_.value() * h.transpose())
                                                    : Eigen::VectorXd(m.output_weight_.value().transpose() * h.transpose());
  logits += m.output_bias_.value().row(0).transpose();
  return logits;
}

Matrix coord_embedding_similarity(const Seq2SeqModel& model, const Vocabulary& vocab) {
  const Index bins = vocab.bins();
  Matrix e = model.token_embedding().middleRows(vocab.coord_begin(), bins);
  for (Index i = 0; i < bins; ++i) {
    const double n = e.row(i).norm();
    if (n > 0.0) e.row(i) /= n;
  }
  Matrix sim = e * e.transpose();
  for (Index i = 0; i < bins; ++i) {
    sim(i, i) = 1.0;
    for (Index j = i + 1; j < bins; ++j) sim(j, i) = sim(i, j);
  }
  return sim;
}

double mean_similarity_at(const Matrix& sim, int d) {
  if (d < 0 || d >= sim.rows()) throw Error(ErrorKind::InvalidInput, "distance out of range");
  double s = 0.0;
  for (Index i = 0; i + d < sim.rows(); ++i) s += sim(i, i + d);
  return s / static_cast<double>(sim.rows() - d);
}

}  // namespace layoutseq
