#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hmae/dataset.hpp"
#include "hmae/discovery.hpp"
#include "hmae/hierarchy.hpp"

namespace hmae {

inline constexpr std::size_t kSpatialBins = 25;
inline constexpr std::size_t kTemporalBins = 3;

enum class TemporalRelation { before = 0, co_occur = 1, after = 2 };

/// Cell of the 5x5 grid holding the mean box center, row-major, clamped.
int bin_s_index(const SpatioTemporalSegment& node);
std::array<double, kSpatialBins> bin_s(const SpatioTemporalSegment& node);
/// Child midpoint against the parent's inclusive span.
TemporalRelation bin_t_relation(const SpatioTemporalSegment& child, const SpatioTemporalSegment& parent);
std::array<double, kTemporalBins> bin_t(const SpatioTemporalSegment& child, const SpatioTemporalSegment& parent);

/// Offsets of the weight blocks inside the flat parameter vector:
/// alpha (2 per node label), beta_spatial (25 per label), beta_temporal
/// (3 per label), then eta (root_dim per class).
struct ParamLayout {
  std::size_t num_labels = 0;
  std::size_t num_classes = 0;
  std::size_t root_dim = 0;

  std::size_t alpha(LabelId h) const { return 2 * static_cast<std::size_t>(h); }
  std::size_t beta_spatial(LabelId h) const { return 2 * num_labels + kSpatialBins * static_cast<std::size_t>(h); }
  std::size_t beta_temporal(LabelId h) const {
    return (2 + kSpatialBins) * num_labels + kTemporalBins * static_cast<std::size_t>(h);
  }
  std::size_t eta(LabelId y) const {
    return (2 + kSpatialBins + kTemporalBins) * num_labels + root_dim * static_cast<std::size_t>(y);
  }
  std::size_t size() const { return (2 + kSpatialBins + kTemporalBins) * num_labels + root_dim * num_classes; }

  bool operator==(const ParamLayout&) const = default;
};

/// Weights of the tree model. In recognition mode node labels are MAEs and
/// `owner` maps each to its action; a labeling is feasible only when every
/// node label belongs to the labeled action. In parsing mode `owner` is empty,
/// there are no classes and every node label is allowed everywhere.
struct ModelParams {
  Mode mode = Mode::recognition;
  ParamLayout layout;
  std::vector<LabelId> owner;
  std::vector<double> w;

  static ModelParams recognition(std::vector<LabelId> owner, std::size_t num_classes, std::size_t root_dim);
  static ModelParams parsing(std::size_t num_labels);

  /// Throws ValidationError when sizes disagree or weights are non-finite.
  void validate() const;

  bool operator==(const ModelParams&) const = default;
};

/// Action plus one label per node. node_labels[0] (root) is ignored and kept
/// at -1. In parsing mode `action` is -1.
struct Labeling {
  LabelId action = -1;
  std::vector<LabelId> node_labels;

  bool operator==(const Labeling&) const = default;
};

/// alpha_h . (score, 1) + beta_spatial_h . bin_s(i) + beta_temporal_h . bin_t(i, parent(i)).
double node_potential(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores, int node,
                      LabelId label);
/// eta_y . x_0 (zero in parsing mode).
double root_potential(const ModelParams& params, const SegmentTree& tree, LabelId action);

/// True when every node label is owned by the action (always true in parsing mode).
bool feasible(const ModelParams& params, const Labeling& labeling);

/// Tree score of a labeling; -infinity when infeasible. Throws ValidationError
/// for unlabeled nodes or out-of-range labels.
double score(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores, const Labeling& labeling);

/// Phi with score(params, ...) == params.w . Phi for feasible labelings.
/// Throws ValidationError on infeasible labelings.
std::vector<double> joint_feature_map(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores,
                                      const Labeling& labeling);

}  // namespace hmae
