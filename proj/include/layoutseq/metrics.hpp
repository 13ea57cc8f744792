#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "layoutseq/transformer.hpp"
#include "layoutseq/vocab.hpp"

namespace layoutseq {

/// A box in unit canvas coordinates, from bin edges: [b/B, (b+len)/B].
struct UnitBox {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  double area() const { return (x1 - x0) * (y1 - y0); }
};

UnitBox unit_box(const QuantizedBox& b, int bins = kDefaultBins);
double iou(const UnitBox& a, const UnitBox& b);

/// Minimum-cost assignment of every row to a distinct column (rows <=
/// cols). Returns the column chosen for each row.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

/// Mean IoU under the best category-respecting bijection; unmatched boxes
/// count as 0 over max(N1, N2) slots.
double layout_similarity(const Layout& a, const Layout& b, int bins = kDefaultBins);

/// Mean over generated layouts of the best similarity to a reference with
/// the same category multiset (any reference when none shares it).
double miou(const std::vector<Layout>& generated, const std::vector<Layout>& references, int bins = kDefaultBins);

double alignment(const Layout& layout, int bins = kDefaultBins);
double overlap(const Layout& layout, const CategorySet& categories, int bins = kDefaultBins);

double mean_alignment(const std::vector<Layout>& layouts, int bins = kDefaultBins);
double mean_overlap(const std::vector<Layout>& layouts, const CategorySet& categories, int bins = kDefaultBins);

/// Fraction of relationships not satisfied; relationship index i refers
/// to generated element i. Missing layouts or elements count as violated.
double violation_rate(const std::vector<std::optional<Layout>>& generated, const std::vector<ConstraintSpec>& specs);

/// Frechet distance between Gaussians fit to the rows of `a` and `b`.
double fid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct FeatureNetConfig {
  int width = 32;
  int heads = 2;
  int hidden = 64;
  int feature_dim = 32;
  int max_len = 121;
  double noise_std = 0.05;
  double target_accuracy = 0.9;
  double learning_rate = 3e-3;
  int batch_size = 32;
  int max_epochs = 60;
};

/// Small transformer encoder over layout token sequences; the pooled
/// penultimate activation is the feature vector.
class FeatureNet {
 public:
  FeatureNet(const FeatureNetConfig& config, int vocab_size, std::uint64_t seed);

  const FeatureNetConfig& config() const { return config_; }
  int feature_dim() const { return config_.feature_dim; }
  double heldout_accuracy() const { return accuracy_; }

  /// One feature row per layout.
  Eigen::MatrixXd features(const std::vector<Layout>& layouts, const Vocabulary& vocab) const;

  std::vector<tensor::NamedMatrix> state() const;
  void load_state(std::span<const tensor::NamedMatrix> state);

 private:
  friend FeatureNet train_feature_net(const std::vector<Layout>&, const Vocabulary&, std::uint64_t,
                                      const FeatureNetConfig&);

  // Returns (pooled features, class logits) for a batch of sequences.
  std::pair<tensor::Tensor, tensor::Tensor> run(const std::vector<std::vector<int>>& seqs) const;

  FeatureNetConfig config_;
  int vocab_size_;
  std::vector<std::string> names_;
  std::vector<tensor::Tensor> params_;
  tensor::Tensor embedding_;
  tensor::Tensor positions_;
  nn::EncoderLayer layer_;
  nn::Norm norm_;
  nn::Linear feature_;
  nn::Linear classifier_;
  double accuracy_ = 0.0;
};

/// Trains real-vs-noised discrimination on an 80/20 split of `real`;
/// throws Training when held-out accuracy stays below the target.
FeatureNet train_feature_net(const std::vector<Layout>& real, const Vocabulary& vocab, std::uint64_t seed,
                             const FeatureNetConfig& config = {});

struct MetricReport {
  std::string task;
  double miou = 0.0;
  double alignment = 0.0;
  double overlap = 0.0;
  std::optional<double> fid;
  std::optional<double> violation_rate;
  std::optional<double> satisfaction;  // fraction of samples meeting the hard constraints
  std::size_t generated = 0;
  std::size_t references = 0;
  std::size_t unparsed = 0;
};

nlohmann::json to_json(const MetricReport& r);

/// Fixed-width table with one row per report.
std::string format_table(const std::vector<MetricReport>& reports);

}  // namespace layoutseq
