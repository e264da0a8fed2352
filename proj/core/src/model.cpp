#include "hmae/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmae/error.hpp"
#include "hmae/linalg.hpp"

namespace hmae {

int bin_s_index(const SpatioTemporalSegment& node) {
  auto cell = [](double c) { return std::clamp(static_cast<int>(std::floor(c * 5.0)), 0, 4); };
  return cell(node.mean_bbox.center_x()) + 5 * cell(node.mean_bbox.center_y());
}

std::array<double, kSpatialBins> bin_s(const SpatioTemporalSegment& node) {
  std::array<double, kSpatialBins> v{};
  v[static_cast<std::size_t>(bin_s_index(node))] = 1.0;
  return v;
}

TemporalRelation bin_t_relation(const SpatioTemporalSegment& child, const SpatioTemporalSegment& parent) {
  const double m = child.time_span.midpoint();
  if (m < parent.time_span.start) return TemporalRelation::before;
  if (m > parent.time_span.end) return TemporalRelation::after;
  return TemporalRelation::co_occur;
}

std::array<double, kTemporalBins> bin_t(const SpatioTemporalSegment& child, const SpatioTemporalSegment& parent) {
  std::array<double, kTemporalBins> v{};
  v[static_cast<std::size_t>(bin_t_relation(child, parent))] = 1.0;
  return v;
}

ModelParams ModelParams::recognition(std::vector<LabelId> owner, std::size_t num_classes, std::size_t root_dim) {
  ModelParams p;
  p.mode = Mode::recognition;
  p.layout = {owner.size(), num_classes, root_dim};
  p.owner = std::move(owner);
  p.w.assign(p.layout.size(), 0.0);
  return p;
}

ModelParams ModelParams::parsing(std::size_t num_labels) {
  ModelParams p;
  p.mode = Mode::parsing;
  p.layout = {num_labels, 0, 0};
  p.w.assign(p.layout.size(), 0.0);
  return p;
}

void ModelParams::validate() const {
  if (w.size() != layout.size())
    throw ValidationError("model has " + std::to_string(w.size()) + " weights, layout needs " +
                          std::to_string(layout.size()));
  if (mode == Mode::recognition) {
    if (owner.size() != layout.num_labels) throw ValidationError("model owner map does not cover every MAE");
    for (LabelId o : owner)
      if (o < 0 || static_cast<std::size_t>(o) >= layout.num_classes)
        throw ValidationError("model owner id " + std::to_string(o) + " out of range");
  } else if (layout.num_classes != 0 || !owner.empty()) {
    throw ValidationError("parsing model cannot carry classes or owners");
  }
  for (double v : w)
    if (!std::isfinite(v)) throw ValidationError("model weights must be finite");
}

namespace {

void check_labeling(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores,
                    const Labeling& labeling) {
  if (labeling.node_labels.size() != tree.nodes.size())
    throw ValidationError("labeling covers " + std::to_string(labeling.node_labels.size()) + " nodes, tree '" +
                          tree.video_id + "' has " + std::to_string(tree.nodes.size()));
  if (scores.num_segments() != tree.num_segments() || scores.num_maes() != params.layout.num_labels)
    throw ValidationError("score table shape does not match tree '" + tree.video_id + "' and model");
  for (std::size_t i = 1; i < labeling.node_labels.size(); ++i) {
    const LabelId h = labeling.node_labels[i];
    if (h < 0) throw ValidationError("node " + std::to_string(i) + " of '" + tree.video_id + "' is unlabeled");
    if (static_cast<std::size_t>(h) >= params.layout.num_labels)
      throw ValidationError("node label " + std::to_string(h) + " out of range");
  }
  if (params.mode == Mode::recognition &&
      (labeling.action < 0 || static_cast<std::size_t>(labeling.action) >= params.layout.num_classes))
    throw ValidationError("action id " + std::to_string(labeling.action) + " out of range");
}

}  // namespace

double node_potential(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores, int node,
                      LabelId label) {
  const auto& L = params.layout;
  const auto i = static_cast<std::size_t>(node);
  const auto p = static_cast<std::size_t>(tree.parent[i]);
  const auto& w = params.w;
  return w[L.alpha(label)] * scores(node, label) + w[L.alpha(label) + 1] +
         w[L.beta_spatial(label) + static_cast<std::size_t>(bin_s_index(tree.nodes[i]))] +
         w[L.beta_temporal(label) + static_cast<std::size_t>(bin_t_relation(tree.nodes[i], tree.nodes[p]))];
}

double root_potential(const ModelParams& params, const SegmentTree& tree, LabelId action) {
  if (params.mode == Mode::parsing) return 0.0;
  const auto& x0 = tree.root_feature();
  if (x0.size() != params.layout.root_dim)
    throw ValidationError("root feature dimension " + std::to_string(x0.size()) + " does not match model " +
                          std::to_string(params.layout.root_dim));
  return dot(std::span(params.w).subspan(params.layout.eta(action), params.layout.root_dim), x0);
}

bool feasible(const ModelParams& params, const Labeling& labeling) {
  if (params.mode == Mode::parsing) return true;
  for (std::size_t i = 1; i < labeling.node_labels.size(); ++i)
    if (params.owner[static_cast<std::size_t>(labeling.node_labels[i])] != labeling.action) return false;
  return true;
}

double score(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores, const Labeling& labeling) {
  check_labeling(params, tree, scores, labeling);
  if (!feasible(params, labeling)) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (std::size_t i = 1; i < tree.nodes.size(); ++i)
    s += node_potential(params, tree, scores, static_cast<int>(i), labeling.node_labels[i]);
  return s + root_potential(params, tree, labeling.action);
}

std::vector<double> joint_feature_map(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores,
                                      const Labeling& labeling) {
  check_labeling(params, tree, scores, labeling);
  if (!feasible(params, labeling)) throw ValidationError("joint_feature_map: infeasible labeling");
  const auto& L = params.layout;
  std::vector<double> phi(L.size(), 0.0);
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const LabelId h = labeling.node_labels[i];
    phi[L.alpha(h)] += scores(static_cast<int>(i), h);
    phi[L.alpha(h) + 1] += 1.0;
    phi[L.beta_spatial(h) + static_cast<std::size_t>(bin_s_index(tree.nodes[i]))] += 1.0;
    const auto p = static_cast<std::size_t>(tree.parent[i]);
    phi[L.beta_temporal(h) + static_cast<std::size_t>(bin_t_relation(tree.nodes[i], tree.nodes[p]))] += 1.0;
  }
  if (params.mode == Mode::recognition) {
    const auto& x0 = tree.root_feature();
    if (x0.size() != L.root_dim) throw ValidationError("root feature dimension does not match model");
    std::copy(x0.begin(), x0.end(), phi.begin() + static_cast<std::ptrdiff_t>(L.eta(labeling.action)));
  }
  return phi;
}

}  // namespace hmae
