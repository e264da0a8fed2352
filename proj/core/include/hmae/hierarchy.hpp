#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hmae/dataset.hpp"
#include "hmae/linalg.hpp"

namespace hmae {

/// Inclusive frame interval.
struct FrameSpan {
  int start = 0;
  int end = 0;

  double midpoint() const noexcept { return 0.5 * (start + end); }
  bool contains(const FrameSpan& o) const noexcept { return start <= o.start && o.end <= end; }
  bool operator==(const FrameSpan&) const = default;
};

/// A tube of proposals, one node of the segment hierarchy.
struct SpatioTemporalSegment {
  int segment_id = 0;
  std::vector<int> member_proposals;  ///< indices into VideoRecord::proposals, ascending
  FrameSpan time_span;
  BBox mean_bbox;
  std::vector<double> bow;         ///< L1-normalized sum of member local_bow
  std::vector<double> appearance;  ///< mean member appearance_hist

  bool operator==(const SpatioTemporalSegment&) const = default;
};

/// Per-video segment hierarchy. Node 0 is the root, the super-segment covering
/// every kept proposal; its bow is the root feature x_0. Nodes 1..M are the
/// remaining segments, listed parents-before-children. Feature x_i is
/// nodes[i].bow.
struct SegmentTree {
  std::string video_id;
  int num_frames = 0;
  std::vector<SpatioTemporalSegment> nodes;
  std::vector<int> parent;  ///< parent[0] == -1

  /// Number of labeled (non-root) nodes, M_n.
  std::size_t num_segments() const noexcept { return nodes.empty() ? 0 : nodes.size() - 1; }
  const std::vector<double>& root_feature() const { return nodes.at(0).bow; }
  std::vector<std::vector<int>> children() const;

  /// Structural check: single root, acyclic, connected, parents listed before
  /// children, spans nested, parent members equal the union of its children.
  /// Throws ValidationError describing the first violation.
  void validate() const;

  bool operator==(const SegmentTree&) const = default;
};

struct DistanceWeights {
  double color = 1.0;
  double shape = 1.0;
  double xyt = 1.0;
};

struct HierarchyConfig {
  double foreground_threshold = -1.0;
  int top_n_seed_positives = 1;
  std::optional<int> num_st_clusters;  ///< nullopt = auto, max(20, ceil(|kept|/15))
  double trim_overlap = 0.8;
  DistanceWeights distance_weights;
  double svm_c = 1.0;
  int svm_epochs = 200;
  std::uint64_t seed = 0;

  /// Throws ValidationError on out-of-range fields.
  void validate() const;
};

/// Chi-square distance 0.5 * sum (a-b)^2 / (a+b), skipping empty bins.
double chi2_distance(std::span<const double> a, std::span<const double> b);
/// Fraction of cells where two binary masks disagree.
double mask_disagreement(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Foreground pruning: seeds are the top-N proposals per frame by objectness +
/// motion; an equal number of negatives is drawn from the rest of the video; a
/// linear SVM on appearance_hist scores every proposal; indices scoring above
/// the threshold are returned in ascending order.
std::vector<int> score_and_prune_proposals(const VideoRecord& video, const HierarchyConfig& cfg);

/// Pairwise proposal affinity used for pooling (exposed for tests).
SymMatrix proposal_affinity(const VideoRecord& video, std::span<const int> kept,
                            const DistanceWeights& weights);

/// Spectral clustering of the kept proposals into spatiotemporal segments.
/// Segments are ordered by their smallest member index.
std::vector<SpatioTemporalSegment> pool_spatiotemporal_segments(const VideoRecord& video,
                                                                std::span<const int> kept,
                                                                const HierarchyConfig& cfg);

/// Greedy agglomeration of the segments into one super-segment, followed by
/// redundancy trimming. Leaves of the result are the input segments.
SegmentTree build_hierarchy(const VideoRecord& video, std::vector<SpatioTemporalSegment> segments,
                            const HierarchyConfig& cfg);

/// Prune, pool and agglomerate in one call.
SegmentTree build_segment_tree(const VideoRecord& video, const HierarchyConfig& cfg);

/// Segment summarizing the given proposals.
SpatioTemporalSegment make_segment(const VideoRecord& video, std::vector<int> members, int segment_id);

/// Fraction of the parent's proposals that also belong to the child.
double member_overlap(const SpatioTemporalSegment& parent, const SpatioTemporalSegment& child);

}  // namespace hmae
