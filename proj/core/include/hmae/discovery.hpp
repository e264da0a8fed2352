#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmae/hierarchy.hpp"
#include "hmae/labels.hpp"
#include "hmae/svm.hpp"

namespace hmae {

/// A non-root node of one video's tree.
struct SegmentRef {
  std::string video_id;
  int node = 0;

  auto operator<=>(const SegmentRef&) const = default;
};

struct MaeCluster {
  LabelId mae_id = -1;
  LabelId owner_action = -1;
  std::vector<SegmentRef> members;  ///< sorted
  LinearSvmModel classifier;

  bool operator==(const MaeCluster&) const = default;
};

struct DiscoveryConfig {
  int init_clusters_per_action = 50;
  int min_cluster_size = 5;
  int top_k_detections = 5;
  std::optional<int> final_maes_per_action;  ///< nullopt = auto, ceil(init / 3)
  int max_negative_ratio = 10;
  double svm_c = 1.0;
  int svm_epochs = 200;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

/// Discovered MAEs. Ids are dense; MAEs of one action are contiguous and
/// actions appear in id order.
struct MAEVocabulary {
  LabelTable actions;
  LabelTable maes;
  std::vector<MaeCluster> clusters;  ///< indexed by MAE id
  std::size_t feature_dim = 0;  ///< bow dimension
  /// Classifiers also see the node's temporal length (parsing scorers).
  bool duration_feature = false;

  std::size_t size() const noexcept { return clusters.size(); }
  LabelId owner(LabelId mae) const { return clusters.at(static_cast<std::size_t>(mae)).owner_action; }
  std::vector<LabelId> maes_of(LabelId action) const;
  LabelSpaces label_spaces() const;
  /// FNV-1a over a canonical text serialization (labels, owners, classifiers).
  std::uint64_t fingerprint() const;
  std::string hash() const;

  bool operator==(const MAEVocabulary&) const = default;
};

/// Per-node MAE classifier outputs. Rows are the non-root nodes 1..M_n.
class ScoreTable {
 public:
  ScoreTable() = default;
  ScoreTable(std::size_t num_segments, std::size_t num_maes)
      : rows_(num_segments), cols_(num_maes), data_(num_segments * num_maes, 0.0) {}

  std::size_t num_segments() const noexcept { return rows_; }
  std::size_t num_maes() const noexcept { return cols_; }
  double operator()(int node, LabelId mae) const { return data_[index(node, mae)]; }
  double& operator()(int node, LabelId mae) { return data_[index(node, mae)]; }

  bool operator==(const ScoreTable&) const = default;

 private:
  std::size_t index(int node, LabelId mae) const {
    return (static_cast<std::size_t>(node) - 1) * cols_ + static_cast<std::size_t>(mae);
  }
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// 1 - sum_d min(a_d, b_d).
double intersection_distance(std::span<const double> a, std::span<const double> b);
/// Euclidean distance on (center x, center y, height, width) of mean boxes.
double spatial_distance(const SpatioTemporalSegment& a, const SpatioTemporalSegment& b);

/// Clusters the non-root segments of one action's trees. Clusters smaller
/// than min_cluster_size are dropped. Classifiers are left empty.
std::vector<MaeCluster> init_clusters(std::span<const SegmentTree> trees, LabelId action,
                                      const DiscoveryConfig& cfg);

/// Trains one classifier per initial cluster, groups clusters whose
/// classifiers fire on the same sibling clusters and retrains one classifier
/// per group. `init` is indexed by action id; `trees` and `tree_actions` cover
/// every training video and supply the negatives.
MAEVocabulary discriminative_merge(const std::vector<std::vector<MaeCluster>>& init,
                                   const LabelTable& actions, std::span<const SegmentTree> trees,
                                   std::span<const LabelId> tree_actions, const DiscoveryConfig& cfg);

/// Co-firing affinity between clusters: entry (i, j) counts the clusters that
/// both i and j reach with their top-K detections, each classifier counting
/// as firing on its own cluster. Diagonal is zero. Exposed for tests.
SymMatrix cofiring_affinity(const std::vector<std::vector<int>>& fired);

/// init_clusters for every action followed by discriminative_merge.
MAEVocabulary discover_maes(std::span<const SegmentTree> trees, std::span<const LabelId> tree_actions,
                            const LabelTable& actions, const DiscoveryConfig& cfg);

/// Classifier input for one node: its bow, followed by span length / 32 when
/// the vocabulary uses the duration feature.
std::vector<double> scoring_features(const MAEVocabulary& vocab, const SegmentTree& tree, int node);

/// Classifier output of every MAE on every non-root node.
ScoreTable assign_mae_scores(const MAEVocabulary& vocab, const SegmentTree& tree);

/// H^n for training: cluster membership where available, otherwise the best
/// scoring MAE of the video's action. Index 0 (root) holds -1.
std::vector<LabelId> training_mae_assignment(const MAEVocabulary& vocab, const SegmentTree& tree,
                                             const ScoreTable& scores, LabelId action);

/// Fraction of training segments within intersection distance 0.5 of some
/// member of a same-action MAE.
double inclusivity_coverage(const MAEVocabulary& vocab, std::span<const SegmentTree> trees,
                            std::span<const LabelId> tree_actions);

}  // namespace hmae
