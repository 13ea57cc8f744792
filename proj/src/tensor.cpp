#include "layoutseq/tensor.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_set>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

#include "layoutseq/error.hpp"
#include "layoutseq/log.hpp"

namespace layoutseq::tensor {

namespace {

thread_local bool g_grad_enabled = true;

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << ", " << m.cols() << "]";
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw Error(ErrorKind::Shape, std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

template <typename Expr>
void accumulate(Node& n, const Expr& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Tensor make_result(Matrix value, std::vector<std::shared_ptr<Node>> parents, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Row-wise softmax of a matrix expression into `out`.
void softmax_rows(const Matrix& x, Matrix& out) {
  out.resize(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    if (!std::isfinite(mx)) {
      out.row(r).setConstant(1.0 / static_cast<double>(x.cols()));
      continue;
    }
    out.row(r) = (x.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
}

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "checkpoint io assumes a little-endian host");
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error(ErrorKind::Io, "truncated checkpoint");
  return v;
}

constexpr char kMagic[4] = {'L', 'S', 'Q', 'T'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

Matrix Tensor::grad() const {
  if (has_grad()) return node_->grad;
  return Matrix::Zero(rows(), cols());
}

void Tensor::zero_grad() {
  node_->grad.resize(0, 0);
  node_->grad_fresh = false;
}

double Tensor::item() const {
  if (node_->value.size() != 1) throw Error(ErrorKind::InvalidUse, "item() on a non-scalar tensor " + shape_str(value()));
  return node_->value(0, 0);
}

void Tensor::backward() const {
  if (node_->value.size() != 1) throw Error(ErrorKind::InvalidUse, "backward() needs a scalar, got " + shape_str(value()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  accumulate(*node_, Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    n->grad_fresh = true;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

#if defined(__SSE__)
FlushDenormalsGuard::FlushDenormalsGuard() : previous_(_mm_getcsr()) { _mm_setcsr(previous_ | 0x8040u); }
FlushDenormalsGuard::~FlushDenormalsGuard() { _mm_setcsr(previous_); }
#else
FlushDenormalsGuard::FlushDenormalsGuard() = default;
FlushDenormalsGuard::~FlushDenormalsGuard() = default;
#endif

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a.value(), b.value());
  Matrix out;
  out.noalias() = a.value() * b.value();
  auto pa = a.node(), pb = b.node();
  return make_result(std::move(out), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) accumulate(*pa, self.grad * pb->value.transpose());
    if (pb->requires_grad) accumulate(*pb, pa->value.transpose() * self.grad);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a.value(), b.value());
  Matrix out;
  out.noalias() = a.value() * b.value().transpose();
  auto pa = a.node(), pb = b.node();
  return make_result(std::move(out), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) accumulate(*pa, self.grad * pb->value);
    if (pb->requires_grad) accumulate(*pb, self.grad.transpose() * pa->value);
  });
}

Tensor transpose(const Tensor& a) {
  auto pa = a.node();
  return make_result(a.value().transpose(), {pa}, [pa](Node& self) { accumulate(*pa, self.grad.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a.value(), b.value());
  auto pa = a.node(), pb = b.node();
  return make_result(a.value() + b.value(), {pa, pb}, [pa, pb](Node& self) {
    accumulate(*pa, self.grad);
    accumulate(*pb, self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("sub", a.value(), b.value());
  auto pa = a.node(), pb = b.node();
  return make_result(a.value() - b.value(), {pa, pb}, [pa, pb](Node& self) {
    accumulate(*pa, self.grad);
    accumulate(*pb, -self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a.value(), b.value());
  auto pa = a.node(), pb = b.node();
  return make_result(a.value().cwiseProduct(b.value()), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) accumulate(*pa, self.grad.cwiseProduct(pb->value));
    if (pb->requires_grad) accumulate(*pb, self.grad.cwiseProduct(pa->value));
  });
}

Tensor scale(const Tensor& a, double s) {
  auto pa = a.node();
  return make_result(a.value() * s, {pa}, [pa, s](Node& self) { accumulate(*pa, self.grad * s); });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) shape_error("add_bias", x.value(), bias.value());
  auto px = x.node(), pb = bias.node();
  Matrix out = x.value();
  out.rowwise() += bias.value().row(0);
  return make_result(std::move(out), {px, pb}, [px, pb](Node& self) {
    accumulate(*px, self.grad);
    if (pb->requires_grad) accumulate(*pb, self.grad.colwise().sum());
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
  const Index n = table.rows();
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= n) {
      throw Error(ErrorKind::Shape, "embedding_lookup: id " + std::to_string(ids[i]) + " outside table " +
                                        shape_str(table.value()));
    }
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  auto pt = table.node();
  std::vector<int> idv(ids.begin(), ids.end());
  return make_result(std::move(out), {pt}, [pt, idv = std::move(idv)](Node& self) {
    if (pt->grad.size() == 0) pt->grad = Matrix::Zero(pt->value.rows(), pt->value.cols());
    for (std::size_t i = 0; i < idv.size(); ++i) pt->grad.row(idv[i]) += self.grad.row(static_cast<Index>(i));
  });
}

Tensor gather_rows(const Tensor& x, std::span<const int> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) {
      throw Error(ErrorKind::Shape, "gather_rows: row " + std::to_string(rows[i]) + " outside " + shape_str(x.value()));
    }
    out.row(static_cast<Index>(i)) = x.value().row(rows[i]);
  }
  auto px = x.node();
  std::vector<int> rv(rows.begin(), rows.end());
  return make_result(std::move(out), {px}, [px, rv = std::move(rv)](Node& self) {
    if (px->grad.size() == 0) px->grad = Matrix::Zero(px->value.rows(), px->value.cols());
    for (std::size_t i = 0; i < rv.size(); ++i) px->grad.row(rv[i]) += self.grad.row(static_cast<Index>(i));
  });
}

Tensor softmax(const Tensor& x) {
  Matrix out;
  softmax_rows(x.value(), out);
  auto px = x.node();
  auto y = std::make_shared<Matrix>(out);
  return make_result(std::move(out), {px}, [px, y](Node& self) {
    Matrix g = y->cwiseProduct(self.grad);
    Eigen::VectorXd dots = g.rowwise().sum();
    g -= y->cwiseProduct(dots.replicate(1, y->cols()));
    accumulate(*px, g);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const Index c = x.cols();
  if (gain.rows() != 1 || gain.cols() != c) shape_error("layer_norm gain", x.value(), gain.value());
  if (bias.rows() != 1 || bias.cols() != c) shape_error("layer_norm bias", x.value(), bias.value());
  auto xhat = std::make_shared<Matrix>(x.rows(), c);
  auto inv_std = std::make_shared<Eigen::VectorXd>(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.value().row(r).mean();
    const auto centered = (x.value().row(r).array() - mu).eval();
    const double var = centered.square().mean();
    (*inv_std)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (centered * (*inv_std)(r)).matrix();
  }
  Matrix out = xhat->array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  auto px = x.node(), pg = gain.node(), pb = bias.node();
  return make_result(std::move(out), {px, pg, pb}, [px, pg, pb, xhat, inv_std](Node& self) {
    if (pg->requires_grad) accumulate(*pg, self.grad.cwiseProduct(*xhat).colwise().sum());
    if (pb->requires_grad) accumulate(*pb, self.grad.colwise().sum());
    if (!px->requires_grad) return;
    const auto n = static_cast<double>(xhat->cols());
    Matrix dxhat = self.grad.array().rowwise() * pg->value.row(0).array();
    Matrix dx(dxhat.rows(), dxhat.cols());
    for (Index r = 0; r < dxhat.rows(); ++r) {
      const double s1 = dxhat.row(r).sum();
      const double s2 = dxhat.row(r).dot(xhat->row(r));
      dx.row(r) = ((dxhat.row(r).array() * n - s1 - xhat->row(r).array() * s2) * ((*inv_std)(r) / n)).matrix();
    }
    accumulate(*px, dx);
  });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  Matrix out = x.value().unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); });
  auto px = x.node();
  return make_result(std::move(out), {px}, [px, inv_sqrt_2pi](Node& self) {
    Matrix d = px->value.unaryExpr([inv_sqrt_2pi](double v) {
      return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    });
    accumulate(*px, self.grad.cwiseProduct(d));
  });
}

Tensor tanh(const Tensor& x) {
  Matrix out = x.value().array().tanh().matrix();
  auto px = x.node();
  auto y = std::make_shared<Matrix>(out);
  return make_result(std::move(out), {px}, [px, y](Node& self) {
    accumulate(*px, self.grad.cwiseProduct((1.0 - y->array().square()).matrix()));
  });
}

Tensor causal_mask_add(const Tensor& scores) {
  if (scores.rows() != scores.cols()) shape_error("causal_mask_add", scores.value(), scores.value());
  Matrix out = scores.value();
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = i + 1; j < out.cols(); ++j) out(i, j) = kNegInf;
  }
  auto ps = scores.node();
  return make_result(std::move(out), {ps}, [ps](Node& self) {
    Matrix g = self.grad;
    for (Index i = 0; i < g.rows(); ++i) {
      for (Index j = i + 1; j < g.cols(); ++j) g(i, j) = 0.0;
    }
    accumulate(*ps, g);
  });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw Error(ErrorKind::InvalidInput, "dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  auto mask = std::make_shared<Matrix>(x.rows(), x.cols());
  const double s = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask->size(); ++i) mask->data()[i] = keep(rng) ? s : 0.0;
  auto px = x.node();
  return make_result(x.value().cwiseProduct(*mask), {px}, [px, mask](Node& self) {
    accumulate(*px, self.grad.cwiseProduct(*mask));
  });
}

Tensor sum(const Tensor& x) {
  auto px = x.node();
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return make_result(std::move(out), {px}, [px](Node& self) {
    accumulate(*px, Matrix::Constant(px->value.rows(), px->value.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index) {
  if (static_cast<Index>(targets.size()) != logits.rows()) {
    throw Error(ErrorKind::Shape, "cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                                      shape_str(logits.value()));
  }
  const Matrix& z = logits.value();
  auto probs = std::make_shared<Matrix>();
  softmax_rows(z, *probs);
  double total = 0.0;
  long count = 0;
  for (Index r = 0; r < z.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t == ignore_index) continue;
    if (t < 0 || t >= z.cols()) throw Error(ErrorKind::Shape, "cross_entropy: target id out of range");
    const double mx = z.row(r).maxCoeff();
    const double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
    total += lse - z(r, t);
    ++count;
  }
  Matrix out(1, 1);
  out(0, 0) = count > 0 ? total / static_cast<double>(count) : 0.0;
  auto pz = logits.node();
  std::vector<int> tv(targets.begin(), targets.end());
  return make_result(std::move(out), {pz}, [pz, probs, tv = std::move(tv), count, ignore_index](Node& self) {
    if (count == 0) return;
    const double g = self.grad(0, 0) / static_cast<double>(count);
    Matrix d = *probs;
    for (Index r = 0; r < d.rows(); ++r) {
      const int t = tv[static_cast<std::size_t>(r)];
      if (t == ignore_index) {
        d.row(r).setZero();
      } else {
        d(r, t) -= 1.0;
      }
    }
    accumulate(*pz, d * g);
  });
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionShape& s) {
  const Index d = q.cols();
  if (k.cols() != d || v.cols() != d) shape_error("attention", q.value(), k.value());
  if (q.rows() != s.batch * s.query_len) shape_error("attention query rows", q.value(), q.value());
  if (k.rows() != s.batch * s.key_len || v.rows() != k.rows()) shape_error("attention key rows", k.value(), v.value());
  if (s.heads < 1 || d % s.heads != 0) throw Error(ErrorKind::Shape, "attention: width not divisible by heads");
  if (!s.key_lengths.empty() && static_cast<Index>(s.key_lengths.size()) != s.batch) {
    throw Error(ErrorKind::Shape, "attention: key_lengths size must equal batch");
  }
  const Index dh = d / s.heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(s.batch * s.heads));
  Matrix out(q.rows(), d);

  auto masked = [s](Index b, Index i, Index j) {
    if (!s.key_lengths.empty() && j >= s.key_lengths[static_cast<std::size_t>(b)]) return true;
    return s.causal && j > i;
  };

  for (Index b = 0; b < s.batch; ++b) {
    for (Index h = 0; h < s.heads; ++h) {
      Matrix scores = q.value().block(b * s.query_len, h * dh, s.query_len, dh) *
                      k.value().block(b * s.key_len, h * dh, s.key_len, dh).transpose() * sc;
      for (Index i = 0; i < s.query_len; ++i) {
        for (Index j = 0; j < s.key_len; ++j) {
          if (masked(b, i, j)) scores(i, j) = kNegInf;
        }
      }
      Matrix& p = (*probs)[static_cast<std::size_t>(b * s.heads + h)];
      softmax_rows(scores, p);
      // Fully masked rows carry no attention.
      for (Index i = 0; i < s.query_len; ++i) {
        if (!std::isfinite(scores.row(i).maxCoeff())) p.row(i).setZero();
      }
      out.block(b * s.query_len, h * dh, s.query_len, dh).noalias() =
          p * v.value().block(b * s.key_len, h * dh, s.key_len, dh);
    }
  }

  auto pq = q.node(), pk = k.node(), pv = v.node();
  return make_result(std::move(out), {pq, pk, pv}, [pq, pk, pv, probs, s, dh, sc](Node& self) {
    Matrix dq = Matrix::Zero(pq->value.rows(), pq->value.cols());
    Matrix dk = Matrix::Zero(pk->value.rows(), pk->value.cols());
    Matrix dv = Matrix::Zero(pv->value.rows(), pv->value.cols());
    for (Index b = 0; b < s.batch; ++b) {
      for (Index h = 0; h < s.heads; ++h) {
        const Matrix& p = (*probs)[static_cast<std::size_t>(b * s.heads + h)];
        const auto go = self.grad.block(b * s.query_len, h * dh, s.query_len, dh);
        const auto qb = pq->value.block(b * s.query_len, h * dh, s.query_len, dh);
        const auto kb = pk->value.block(b * s.key_len, h * dh, s.key_len, dh);
        const auto vb = pv->value.block(b * s.key_len, h * dh, s.key_len, dh);
        dv.block(b * s.key_len, h * dh, s.key_len, dh).noalias() += p.transpose() * go;
        Matrix dp = go * vb.transpose();
        Eigen::VectorXd dots = p.cwiseProduct(dp).rowwise().sum();
        Matrix ds = p.cwiseProduct(dp - dots.replicate(1, dp.cols())) * sc;
        dq.block(b * s.query_len, h * dh, s.query_len, dh).noalias() += ds * kb;
        dk.block(b * s.key_len, h * dh, s.key_len, dh).noalias() += ds.transpose() * qb;
      }
    }
    accumulate(*pq, dq);
    accumulate(*pk, dk);
    accumulate(*pv, dv);
  });
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

double Adam::learning_rate_at(long t) const {
  if (config_.warmup_steps <= 0) return config_.learning_rate;
  return config_.learning_rate * std::min(1.0, static_cast<double>(t) / static_cast<double>(config_.warmup_steps));
}

bool Adam::step() {
  bool any_fresh = false;
  for (const auto& p : params_) any_fresh = any_fresh || (p.grad_fresh() && p.has_grad());
  if (!any_fresh) {
    spdlog::warn("optimizer step without fresh gradients; call backward() first");
    return false;
  }
  ++step_;
  const double lr = learning_rate_at(step_);
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (p.has_grad()) {
      const Matrix& g = p.grad_storage();
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
    } else {
      m_[i] *= config_.beta1;
      v_[i] *= config_.beta2;
    }
    p.mutable_value().array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.epsilon);
    p.zero_grad();
  }
  return true;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedMatrix> tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  write_le<std::uint32_t>(os, kVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_le<std::uint32_t>(os, 2);
    write_le<std::uint64_t>(os, static_cast<std::uint64_t>(t.value.rows()));
    write_le<std::uint64_t>(os, static_cast<std::uint64_t>(t.value.cols()));
    for (Index i = 0; i < t.value.size(); ++i) write_le<double>(os, t.value.data()[i]);
  }
  if (!os) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || !std::equal(magic, magic + 4, kMagic)) throw Error(ErrorKind::Io, path.string() + " is not a checkpoint");
  if (read_le<std::uint32_t>(is) != kVersion) throw Error(ErrorKind::Io, "unsupported checkpoint version");
  const auto count = read_le<std::uint32_t>(is);
  std::vector<NamedMatrix> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedMatrix t;
    t.name.resize(read_le<std::uint32_t>(is));
    is.read(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    const auto rank = read_le<std::uint32_t>(is);
    if (rank < 1 || rank > 2) throw Error(ErrorKind::Io, "unsupported tensor rank " + std::to_string(rank));
    std::uint64_t rows = 1, cols = read_le<std::uint64_t>(is);
    if (rank == 2) {
      rows = cols;
      cols = read_le<std::uint64_t>(is);
    }
    t.value.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index j = 0; j < t.value.size(); ++j) t.value.data()[j] = read_le<double>(is);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace layoutseq::tensor
