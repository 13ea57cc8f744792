#include "layoutseq/transformer.hpp"

#include <cmath>

namespace layoutseq::nn {

namespace t = layoutseq::tensor;

Tensor ParamFactory::add(const std::string& name, Matrix value) {
  names_.push_back(name);
  params_.push_back(Tensor::parameter(std::move(value)));
  return params_.back();
}

Tensor ParamFactory::normal(const std::string& name, Index rows, Index cols) {
  std::normal_distribution<double> dist(0.0, init_std_);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng_);
  return add(name, std::move(m));
}

Tensor ParamFactory::zeros(const std::string& name, Index rows, Index cols) {
  return add(name, Matrix::Zero(rows, cols));
}

Tensor ParamFactory::ones(const std::string& name, Index rows, Index cols) { return add(name, Matrix::Ones(rows, cols)); }

Linear ParamFactory::linear(const std::string& name, Index in, Index out) {
  return {normal(name + ".w", in, out), zeros(name + ".b", 1, out)};
}

Norm ParamFactory::norm(const std::string& name, Index width) {
  return {ones(name + ".g", 1, width), zeros(name + ".b", 1, width)};
}

Attention ParamFactory::attention(const std::string& name, Index width) {
  return {linear(name + ".q", width, width), linear(name + ".k", width, width), linear(name + ".v", width, width),
          linear(name + ".o", width, width)};
}

FeedForward ParamFactory::feed_forward(const std::string& name, Index width, Index hidden) {
  return {linear(name + ".in", width, hidden), linear(name + ".out", hidden, width)};
}

EncoderLayer ParamFactory::encoder_layer(const std::string& name, Index width, Index hidden) {
  EncoderLayer l;
  l.norm1 = norm(name + ".ln1", width);
  l.self_attention = attention(name + ".self", width);
  l.norm2 = norm(name + ".ln2", width);
  l.feed_forward = feed_forward(name + ".ff", width, hidden);
  return l;
}

DecoderLayer ParamFactory::decoder_layer(const std::string& name, Index width, Index hidden) {
  DecoderLayer l;
  l.norm1 = norm(name + ".ln1", width);
  l.self_attention = attention(name + ".self", width);
  l.norm2 = norm(name + ".ln2", width);
  l.cross_attention = attention(name + ".cross", width);
  l.norm3 = norm(name + ".ln3", width);
  l.feed_forward = feed_forward(name + ".ff", width, hidden);
  return l;
}

Tensor apply(const Linear& l, const Tensor& x) { return t::add_bias(t::matmul(x, l.weight), l.bias); }

Tensor apply(const Norm& n, const Tensor& x) { return t::layer_norm(x, n.gain, n.bias); }

Tensor apply(const FeedForward& f, const Tensor& x) { return apply(f.contract, t::gelu(apply(f.expand, x))); }

Tensor attend(const Attention& a, const Tensor& queries, const Tensor& keys_values, const t::AttentionShape& shape) {
  const Tensor q = apply(a.query, queries);
  const Tensor k = apply(a.key, keys_values);
  const Tensor v = apply(a.value, keys_values);
  return apply(a.output, t::multi_head_attention(q, k, v, shape));
}

namespace {
Tensor maybe_dropout(const Tensor& x, const Regularization& reg) {
  if (reg.rng == nullptr || reg.dropout <= 0.0) return x;
  return t::dropout(x, reg.dropout, *reg.rng);
}
}  // namespace

Tensor encoder_layer(const EncoderLayer& layer, const Tensor& x, const t::AttentionShape& shape,
                     const Regularization& reg) {
  const Tensor h = apply(layer.norm1, x);
  Tensor y = t::add(x, maybe_dropout(attend(layer.self_attention, h, h, shape), reg));
  return t::add(y, maybe_dropout(apply(layer.feed_forward, apply(layer.norm2, y)), reg));
}

Tensor decoder_layer(const DecoderLayer& layer, const Tensor& x, const Tensor& memory,
                     const t::AttentionShape& self_shape, const t::AttentionShape& cross_shape,
                     const Regularization& reg) {
  const Tensor h = apply(layer.norm1, x);
  Tensor y = t::add(x, maybe_dropout(attend(layer.self_attention, h, h, self_shape), reg));
  y = t::add(y, maybe_dropout(attend(layer.cross_attention, apply(layer.norm2, y), memory, cross_shape), reg));
  return t::add(y, maybe_dropout(apply(layer.feed_forward, apply(layer.norm3, y)), reg));
}

Matrix layer_norm_rows(const Matrix& x, const Norm& n, double eps) {
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const auto centered = (x.row(r).array() - mu).eval();
    const double inv = 1.0 / std::sqrt(centered.square().mean() + eps);
    out.row(r) = (centered * inv * n.gain.value().row(0).array() + n.bias.value().row(0).array()).matrix();
  }
  return out;
}

Matrix linear_rows(const Matrix& x, const Linear& l) {
  Matrix out;
  out.noalias() = x * l.weight.value();
  out.rowwise() += l.bias.value().row(0);
  return out;
}

Matrix gelu_rows(const Matrix& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); });
}

Matrix attention_rows(const Matrix& q, const Matrix& keys, const Matrix& values, Index heads) {
  const Index d = q.cols();
  const Index dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out(q.rows(), d);
  for (Index h = 0; h < heads; ++h) {
    Matrix s = q.middleCols(h * dh, dh) * keys.middleCols(h * dh, dh).transpose() * sc;
    for (Index r = 0; r < s.rows(); ++r) {
      const double mx = s.row(r).maxCoeff();
      s.row(r) = (s.row(r).array() - mx).exp().matrix();
      s.row(r) /= s.row(r).sum();
    }
    out.middleCols(h * dh, dh).noalias() = s * values.middleCols(h * dh, dh);
  }
  return out;
}

}  // namespace layoutseq::nn
