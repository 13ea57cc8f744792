#include "layoutseq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "layoutseq/error.hpp"
#include "layoutseq/log.hpp"
#include "layoutseq/relations.hpp"

namespace layoutseq {

namespace t = layoutseq::tensor;

UnitBox unit_box(const QuantizedBox& b, int bins) {
  const double s = 1.0 / bins;
  return {b.x * s, b.y * s, (b.x + b.w) * s, (b.y + b.h) * s};
}

double iou(const UnitBox& a, const UnitBox& b) {
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const double inter = iw > 0.0 && ih > 0.0 ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<int>(cost.rows());
  const auto m = static_cast<int>(cost.cols());
  if (n > m) throw Error(ErrorKind::InvalidInput, "hungarian needs rows <= cols");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) assignment[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  }
  return assignment;
}

double layout_similarity(const Layout& a, const Layout& b, int bins) {
  const int slots = std::max(a.size(), b.size());
  if (slots == 0) return 0.0;
  std::map<int, std::pair<std::vector<UnitBox>, std::vector<UnitBox>>> by_cat;
  for (const auto& e : a.elements) by_cat[e.category].first.push_back(unit_box(e.box, bins));
  for (const auto& e : b.elements) by_cat[e.category].second.push_back(unit_box(e.box, bins));
  double total = 0.0;
  for (const auto& [cat, boxes] : by_cat) {
    const auto& [xs, ys] = boxes;
    if (xs.empty() || ys.empty()) continue;
    const bool flip = xs.size() > ys.size();
    const auto& rows = flip ? ys : xs;
    const auto& cols = flip ? xs : ys;
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -iou(rows[i], cols[j]);
    }
    const auto match = hungarian(cost);
    for (std::size_t i = 0; i < rows.size(); ++i) total -= cost(static_cast<Eigen::Index>(i), match[i]);
  }
  return total / slots;
}

double miou(const std::vector<Layout>& generated, const std::vector<Layout>& references, int bins) {
  if (generated.empty() || references.empty()) throw Error(ErrorKind::InvalidInput, "miou needs non-empty corpora");
  std::map<std::vector<int>, std::vector<std::size_t>> by_multiset;
  for (std::size_t i = 0; i < references.size(); ++i) by_multiset[category_multiset(references[i])].push_back(i);
  double total = 0.0;
  for (const auto& g : generated) {
    double best = 0.0;
    auto it = by_multiset.find(category_multiset(g));
    if (it != by_multiset.end()) {
      for (std::size_t r : it->second) best = std::max(best, layout_similarity(g, references[r], bins));
    } else {
      for (const auto& r : references) best = std::max(best, layout_similarity(g, r, bins));
    }
    total += best;
  }
  return total / static_cast<double>(generated.size());
}

double alignment(const Layout& layout, int bins) {
  const int n = layout.size();
  if (n <= 1) return 0.0;
  std::vector<std::array<double, 6>> anchors;
  for (const auto& e : layout.elements) {
    const UnitBox b = unit_box(e.box, bins);
    anchors.push_back({b.x0, 0.5 * (b.x0 + b.x1), b.x1, b.y0, 0.5 * (b.y0 + b.y1), b.y1});
  }
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int k = 0; k < 6; ++k) g = std::min(g, std::abs(anchors[i][k] - anchors[j][k]));
    }
    total += g;
  }
  return total / n;
}

double overlap(const Layout& layout, const CategorySet& categories, int bins) {
  std::vector<UnitBox> boxes;
  for (const auto& e : layout.elements) {
    if (!categories.is_background(e.category)) boxes.push_back(unit_box(e.box, bins));
  }
  const auto n = boxes.size();
  if (n <= 1) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double area = boxes[i].area();
    if (area <= 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double iw = std::min(boxes[i].x1, boxes[j].x1) - std::max(boxes[i].x0, boxes[j].x0);
      const double ih = std::min(boxes[i].y1, boxes[j].y1) - std::max(boxes[i].y0, boxes[j].y0);
      if (iw > 0.0 && ih > 0.0) total += iw * ih / area;
    }
  }
  return total / static_cast<double>(n);
}

double mean_alignment(const std::vector<Layout>& layouts, int bins) {
  if (layouts.empty()) return 0.0;
  double s = 0.0;
  for (const auto& l : layouts) s += alignment(l, bins);
  return s / static_cast<double>(layouts.size());
}

double mean_overlap(const std::vector<Layout>& layouts, const CategorySet& categories, int bins) {
  if (layouts.empty()) return 0.0;
  double s = 0.0;
  for (const auto& l : layouts) s += overlap(l, categories, bins);
  return s / static_cast<double>(layouts.size());
}

double violation_rate(const std::vector<std::optional<Layout>>& generated, const std::vector<ConstraintSpec>& specs) {
  if (generated.size() != specs.size()) throw Error(ErrorKind::InvalidInput, "violation_rate: corpus sizes differ");
  long total = 0, violated = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (const auto& r : specs[i].relationships) {
      ++total;
      const auto& g = generated[i];
      if (!g || r.a < 0 || r.b < 0 || r.a >= g->size() || r.b >= g->size() ||
          !relation_holds(r.relation, g->elements[static_cast<std::size_t>(r.a)].box,
                          g->elements[static_cast<std::size_t>(r.b)].box)) {
        ++violated;
      }
    }
  }
  return total > 0 ? static_cast<double>(violated) / static_cast<double>(total) : 0.0;
}

namespace {

void fit_gaussian(const Eigen::MatrixXd& x, Eigen::VectorXd& mu, Eigen::MatrixXd& sigma) {
  mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd c = x.rowwise() - mu.transpose();
  sigma = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw Error(ErrorKind::InvalidInput, "fid: feature dimensions differ");
  if (a.rows() <= a.cols() || b.rows() <= b.cols()) {
    throw Error(ErrorKind::InvalidInput, "fid: each set needs more than " + std::to_string(a.cols()) + " rows");
  }
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd s_a, s_b;
  fit_gaussian(a, mu_a, s_a);
  fit_gaussian(b, mu_b, s_b);
  // Tr sqrt(Sa Sb) = Tr sqrt(Sa^1/2 Sb Sa^1/2), which is symmetric PSD.
  const Eigen::MatrixXd ra = psd_sqrt(s_a);
  Eigen::MatrixXd inner = ra * s_b * ra;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (mu_a - mu_b).squaredNorm() + s_a.trace() + s_b.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d);
}

FeatureNet::FeatureNet(const FeatureNetConfig& config, int vocab_size, std::uint64_t seed)
    : config_(config), vocab_size_(vocab_size) {
  if (config.width % config.heads != 0) throw Error(ErrorKind::Config, "feature net width must divide by heads");
  nn::ParamFactory f(seed, 0.1);
  embedding_ = f.normal("fn.emb", vocab_size, config.width);
  positions_ = f.normal("fn.pos", config.max_len, config.width);
  layer_ = f.encoder_layer("fn.layer", config.width, config.hidden);
  norm_ = f.norm("fn.ln", config.width);
  feature_ = f.linear("fn.feature", config.width, config.feature_dim);
  classifier_ = f.linear("fn.cls", config.feature_dim, 2);
  names_ = f.names();
  params_ = f.params();
}

std::pair<t::Tensor, t::Tensor> FeatureNet::run(const std::vector<std::vector<int>>& seqs) const {
  const auto B = static_cast<t::Index>(seqs.size());
  std::size_t max_len = 0;
  for (const auto& s : seqs) max_len = std::max(max_len, s.size());
  if (max_len > static_cast<std::size_t>(config_.max_len)) throw Error(ErrorKind::Capacity, "layout too long for feature net");
  const auto L = static_cast<t::Index>(max_len);
  std::vector<int> ids(static_cast<std::size_t>(B * L), Vocabulary::kPad), pos(ids.size());
  std::vector<int> lens;
  t::Matrix pool = t::Matrix::Zero(B, B * L);
  for (t::Index b = 0; b < B; ++b) {
    const auto& s = seqs[static_cast<std::size_t>(b)];
    for (t::Index i = 0; i < L; ++i) {
      const auto at = static_cast<std::size_t>(b * L + i);
      pos[at] = static_cast<int>(i);
      if (i < static_cast<t::Index>(s.size())) {
        ids[at] = s[static_cast<std::size_t>(i)];
        pool(b, b * L + i) = 1.0 / static_cast<double>(s.size());
      }
    }
    lens.push_back(static_cast<int>(s.size()));
  }
  t::Tensor x = t::add(t::embedding_lookup(embedding_, ids), t::embedding_lookup(positions_, pos));
  x = nn::encoder_layer(layer_, x, {B, L, L, config_.heads, false, lens}, {});
  x = nn::apply(norm_, x);
  const t::Tensor pooled = t::matmul(t::Tensor::constant(std::move(pool)), x);
  const t::Tensor feat = t::tanh(nn::apply(feature_, pooled));
  return {feat, nn::apply(classifier_, feat)};
}

namespace {

std::vector<int> feature_tokens(const Layout& l, const Vocabulary& vocab) {
  return encode_layout(order_elements(l, OrderPolicy::Alphabetic, vocab.categories()), vocab).ids;
}

}  // namespace

Eigen::MatrixXd FeatureNet::features(const std::vector<Layout>& layouts, const Vocabulary& vocab) const {
  t::NoGradGuard guard;
  t::FlushDenormalsGuard ftz;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(layouts.size()), config_.feature_dim);
  constexpr std::size_t chunk = 64;
  for (std::size_t start = 0; start < layouts.size(); start += chunk) {
    std::vector<std::vector<int>> seqs;
    for (std::size_t i = start; i < std::min(layouts.size(), start + chunk); ++i) seqs.push_back(feature_tokens(layouts[i], vocab));
    const auto [feat, logits] = run(seqs);
    out.middleRows(static_cast<Eigen::Index>(start), feat.rows()) = feat.value();
  }
  return out;
}

std::vector<t::NamedMatrix> FeatureNet::state() const {
  std::vector<t::NamedMatrix> out;
  for (std::size_t i = 0; i < params_.size(); ++i) out.push_back({names_[i], params_[i].value()});
  return out;
}

void FeatureNet::load_state(std::span<const t::NamedMatrix> state) {
  std::map<std::string, const t::Matrix*> by_name;
  for (const auto& s : state) by_name[s.name] = &s.value;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto it = by_name.find(names_[i]);
    if (it == by_name.end()) throw Error(ErrorKind::Io, "feature net state lacks " + names_[i]);
    if (it->second->rows() != params_[i].rows() || it->second->cols() != params_[i].cols()) {
      throw Error(ErrorKind::Shape, "feature net state shape mismatch for " + names_[i]);
    }
    params_[i].mutable_value() = *it->second;
  }
}

FeatureNet train_feature_net(const std::vector<Layout>& real, const Vocabulary& vocab, std::uint64_t seed,
                             const FeatureNetConfig& config) {
  if (real.size() < 200) throw Error(ErrorKind::InvalidInput, "feature net needs at least 200 layouts");
  t::FlushDenormalsGuard ftz;
  FeatureNet net(config, vocab.size(), seed);

  // Each real layout is paired with a noised copy; the split keeps pairs together.
  Rng rng = make_rng(seed, 1);
  std::vector<std::size_t> order(real.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = real.size() * 4 / 5;
  std::vector<std::pair<std::vector<int>, int>> train, held;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Layout& l = real[order[k]];
    const Layout noised = add_refinement_noise(l, config.noise_std, rng, vocab.bins());
    auto& dst = k < n_train ? train : held;
    dst.emplace_back(feature_tokens(l, vocab), 1);
    dst.emplace_back(feature_tokens(noised, vocab), 0);
  }

  auto accuracy = [&net](const std::vector<std::pair<std::vector<int>, int>>& data) {
    t::NoGradGuard guard;
    long correct = 0;
    for (std::size_t start = 0; start < data.size(); start += 64) {
      std::vector<std::vector<int>> seqs;
      std::vector<int> labels;
      for (std::size_t i = start; i < std::min(data.size(), start + 64); ++i) {
        seqs.push_back(data[i].first);
        labels.push_back(data[i].second);
      }
      const auto logits = net.run(seqs).second.value();
      for (t::Index r = 0; r < logits.rows(); ++r) correct += (logits(r, 1) > logits(r, 0) ? 1 : 0) == labels[static_cast<std::size_t>(r)];
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
  };

  t::Adam adam(net.params_, {config.learning_rate, 20});
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double best = 0.0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(config.batch_size)) {
      std::vector<std::vector<int>> seqs;
      std::vector<int> labels;
      for (std::size_t i = start; i < std::min(idx.size(), start + static_cast<std::size_t>(config.batch_size)); ++i) {
        seqs.push_back(train[idx[i]].first);
        labels.push_back(train[idx[i]].second);
      }
      const t::Tensor loss = t::cross_entropy(net.run(seqs).second, labels);
      loss_sum += loss.item();
      ++batches;
      loss.backward();
      adam.step();
    }
    const double acc = accuracy(held);
    best = std::max(best, acc);
    spdlog::debug("feature net epoch {}: loss {:.4f}, held-out accuracy {:.3f}", epoch, loss_sum / batches, acc);
    if (acc >= config.target_accuracy) {
      net.accuracy_ = acc;
      return net;
    }
  }
  throw Error(ErrorKind::Training, "feature net reached " + std::to_string(best) + " held-out accuracy after " +
                                       std::to_string(config.max_epochs) + " epochs on " + std::to_string(real.size()) +
                                       " layouts (target " + std::to_string(config.target_accuracy) + ")");
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["task"] = r.task;
  j["miou"] = r.miou;
  j["alignment"] = r.alignment;
  j["overlap"] = r.overlap;
  j["fid"] = r.fid ? nlohmann::json(*r.fid) : nlohmann::json(nullptr);
  j["violation_rate"] = r.violation_rate ? nlohmann::json(*r.violation_rate) : nlohmann::json(nullptr);
  j["satisfaction"] = r.satisfaction ? nlohmann::json(*r.satisfaction) : nlohmann::json(nullptr);
  j["generated"] = r.generated;
  j["references"] = r.references;
  j["unparsed"] = r.unparsed;
  return j;
}

std::string format_table(const std::vector<MetricReport>& reports) {
  auto opt = [](const std::optional<double>& v) {
    char b[32];
    if (!v) return std::string("-");
    std::snprintf(b, sizeof b, "%.4f", *v);
    return std::string(b);
  };
  std::ostringstream os;
  char line[200];
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %9s %8s %8s %9s\n", "task", "mIoU", "Align.", "Overlap", "FID",
                "Viol.", "Sat.", "parsed");
  os << line;
  for (const auto& r : reports) {
    const std::string parsed = std::to_string(r.references - r.unparsed) + "/" + std::to_string(r.references);
    std::snprintf(line, sizeof line, "%-16s %8.4f %8.4f %8.4f %9s %8s %8s %9s\n", r.task.c_str(), r.miou, r.alignment,
                  r.overlap, opt(r.fid).c_str(), opt(r.violation_rate).c_str(), opt(r.satisfaction).c_str(),
                  parsed.c_str());
    os << line;
  }
  return os.str();
}

}  // namespace layoutseq
