#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hmae/dataset.hpp"
#include "hmae/inference.hpp"
#include "hmae/svm.hpp"

namespace hmae {

/// |a ∩ b| / |a ∪ b| over inclusive frame ranges.
double temporal_iou(const FrameSpan& a, const FrameSpan& b);

struct LabeledInterval {
  std::string video_id;
  LabelId label = 0;
  FrameSpan span;

  bool operator==(const LabeledInterval&) const = default;
};

struct ScoredInterval {
  std::string video_id;
  LabelId label = 0;
  FrameSpan span;
  double score = 0.0;

  bool operator==(const ScoredInterval&) const = default;
};

struct AccuracyReport {
  double mean = 0.0;
  std::vector<std::pair<LabelId, double>> per_class;  ///< classes present in the truth, ascending
};

/// Mean over classes of the fraction of that class's videos predicted
/// correctly. Pairs are (predicted, truth). Classes of [0, num_classes) with
/// no truth instance are skipped with a warning.
AccuracyReport per_class_accuracy(std::span<const std::pair<LabelId, LabelId>> predictions,
                                  std::optional<std::size_t> num_classes = std::nullopt);

/// All-points interpolated AP of one ranked list. `hits` marks true positives
/// in rank order; `positives` is the number of ground-truth instances.
double average_precision(const std::vector<bool>& hits, std::size_t positives);

/// Localization mAP per threshold. Per label, predictions are ranked by score
/// (stable) and each claims the unmatched ground-truth instance of the same
/// video with the highest IoU, provided it reaches the threshold. The mean
/// runs over labels present in the truth.
std::vector<double> localization_map(std::span<const ScoredInterval> predictions,
                                     std::span<const LabeledInterval> truth, std::span<const double> thresholds);

/// Greedy per-label non-maximum suppression by descending score.
std::vector<ScoredInterval> nms(std::vector<ScoredInterval> intervals, double iou_threshold);

/// Intervals claimed by a parse: every non-background node (label 0 is
/// background) with its local potential as confidence. Along a parent-child
/// chain sharing one label only the topmost node is kept; NMS follows.
/// Returned labels are parse-label ids (node label - 1).
std::vector<ScoredInterval> parse_to_intervals(const ModelParams& params, const SegmentTree& tree,
                                               const ScoreTable& scores, const Labeling& labeling,
                                               double nms_iou = 0.5);

struct WindowConfig {
  std::vector<int> lengths{8, 16, 24, 32};
  double step = 0.25;  ///< fraction of the window length
  double nms_iou = 0.5;
  int random_negatives_per_video = 4;
  double svm_c = 1.0;
  int svm_epochs = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One linear scorer per parse label over window-aggregated bows.
struct WindowScorer {
  std::vector<LinearSvmModel> per_label;
};

/// Positives: annotated intervals of the label. Negatives: intervals of other
/// labels and random windows that do not overlap the label's instances.
WindowScorer train_window_scorer(std::span<const VideoRecord> videos, std::size_t num_labels,
                                 const WindowConfig& cfg);

/// Scores every window on the grid for every label, then NMS per label.
std::vector<ScoredInterval> sliding_window_baseline(const VideoRecord& video, const WindowScorer& scorer,
                                                    const WindowConfig& cfg);

/// Root-model baseline: one-vs-rest linear SVMs on the tree root feature x_0.
struct RootModel {
  std::vector<LinearSvmModel> per_class;

  LabelId predict(const SegmentTree& tree) const;
};

RootModel train_root_model(std::span<const SegmentTree> trees, std::span<const LabelId> actions,
                           std::size_t num_classes, double c, int epochs, std::uint64_t seed);

AccuracyReport root_model_ablation(std::span<const SegmentTree> train_trees, std::span<const LabelId> train_actions,
                                   std::span<const SegmentTree> test_trees, std::span<const LabelId> test_actions,
                                   std::size_t num_classes, double c, int epochs, std::uint64_t seed);

}  // namespace hmae
