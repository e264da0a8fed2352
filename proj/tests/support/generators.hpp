#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hmae/dataset.hpp"
#include "hmae/discovery.hpp"
#include "hmae/evaluation.hpp"
#include "hmae/hierarchy.hpp"
#include "hmae/inference.hpp"
#include "hmae/linalg.hpp"
#include "hmae/model.hpp"

namespace hmae::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::vector<double> random_simplex(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double sum = 0.0;
  for (auto& x : v) sum += (x = uniform(rng, 0.01, 1.0));
  for (auto& x : v) x /= sum;
  return v;
}

inline ProposalDescriptor random_proposal(Rng& rng, int frame, std::size_t d_a, std::size_t d_b, std::size_t k) {
  ProposalDescriptor p;
  p.frame_index = frame;
  p.bbox = {uniform(rng, 0.0, 0.7), uniform(rng, 0.0, 0.7), uniform(rng, 0.05, 0.3), uniform(rng, 0.05, 0.3)};
  p.appearance_hist = random_simplex(rng, d_a);
  p.shape_feature.resize(k * k);
  for (auto& s : p.shape_feature) s = static_cast<std::uint8_t>(uniform_int(rng, 0, 1));
  p.local_bow.resize(d_b);
  for (auto& b : p.local_bow) b = uniform_int(rng, 0, 5);
  p.objectness_score = uniform(rng, 0.0, 1.0);
  p.motion_score = uniform(rng, 0.0, 1.0);
  return p;
}

/// Valid tree with `segments` non-root nodes: random parents, every leaf owns
/// one or two proposals, inner members are unions, spans follow the frames.
inline SegmentTree random_tree(Rng& rng, int segments, std::size_t bow_dim, int frames = 20) {
  SegmentTree t;
  t.video_id = "v" + std::to_string(rng() % 100000);
  t.num_frames = frames;
  const int n = segments + 1;
  t.parent.assign(static_cast<std::size_t>(n), -1);
  for (int i = 1; i < n; ++i) t.parent[static_cast<std::size_t>(i)] = uniform_int(rng, 0, i - 1);
  std::vector<std::vector<int>> kids(static_cast<std::size_t>(n));
  for (int i = 1; i < n; ++i) kids[static_cast<std::size_t>(t.parent[static_cast<std::size_t>(i)])].push_back(i);

  std::vector<int> frame_of;
  std::vector<std::vector<int>> members(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (!kids[static_cast<std::size_t>(i)].empty()) continue;
    const int count = uniform_int(rng, 1, 2);
    for (int c = 0; c < count; ++c) {
      members[static_cast<std::size_t>(i)].push_back(static_cast<int>(frame_of.size()));
      frame_of.push_back(uniform_int(rng, 0, frames - 1));
    }
  }
  for (int i = n - 1; i >= 0; --i)
    for (int c : kids[static_cast<std::size_t>(i)]) {
      auto& m = members[static_cast<std::size_t>(i)];
      const auto& cm = members[static_cast<std::size_t>(c)];
      m.insert(m.end(), cm.begin(), cm.end());
    }
  t.nodes.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& node = t.nodes[static_cast<std::size_t>(i)];
    node.segment_id = i;
    node.member_proposals = members[static_cast<std::size_t>(i)];
    std::sort(node.member_proposals.begin(), node.member_proposals.end());
    node.time_span = {frames, -1};
    for (int p : node.member_proposals) {
      node.time_span.start = std::min(node.time_span.start, frame_of[static_cast<std::size_t>(p)]);
      node.time_span.end = std::max(node.time_span.end, frame_of[static_cast<std::size_t>(p)]);
    }
    node.mean_bbox = {uniform(rng, 0.0, 0.8), uniform(rng, 0.0, 0.8), uniform(rng, 0.05, 0.2), uniform(rng, 0.05, 0.2)};
    node.bow = random_simplex(rng, bow_dim);
    node.appearance = random_simplex(rng, 4);
  }
  return t;
}

inline ScoreTable random_scores(Rng& rng, const SegmentTree& tree, std::size_t maes) {
  ScoreTable s(tree.num_segments(), maes);
  for (int i = 1; i <= static_cast<int>(tree.num_segments()); ++i)
    for (LabelId h = 0; h < static_cast<LabelId>(maes); ++h) s(i, h) = uniform(rng, -2.0, 2.0);
  return s;
}

/// Recognition params with `classes` actions owning `per_class` contiguous MAEs each.
inline ModelParams random_recognition_params(Rng& rng, int classes, int per_class, std::size_t root_dim) {
  std::vector<LabelId> owner;
  for (int y = 0; y < classes; ++y)
    for (int h = 0; h < per_class; ++h) owner.push_back(y);
  auto p = ModelParams::recognition(owner, static_cast<std::size_t>(classes), root_dim);
  for (auto& w : p.w) w = uniform(rng, -1.0, 1.0);
  return p;
}

inline ModelParams random_parsing_params(Rng& rng, std::size_t labels) {
  auto p = ModelParams::parsing(labels);
  for (auto& w : p.w) w = uniform(rng, -1.0, 1.0);
  return p;
}

inline Labeling random_feasible_labeling(Rng& rng, const ModelParams& params, const SegmentTree& tree,
                                         std::size_t classes) {
  Labeling l;
  l.node_labels.assign(tree.nodes.size(), -1);
  if (params.mode == Mode::parsing) {
    for (std::size_t i = 1; i < tree.nodes.size(); ++i)
      l.node_labels[i] = uniform_int(rng, 0, static_cast<int>(params.layout.num_labels) - 1);
    return l;
  }
  l.action = uniform_int(rng, 0, static_cast<int>(classes) - 1);
  std::vector<LabelId> own;
  for (std::size_t h = 0; h < params.owner.size(); ++h)
    if (params.owner[h] == l.action) own.push_back(static_cast<LabelId>(h));
  for (std::size_t i = 1; i < tree.nodes.size(); ++i)
    l.node_labels[i] = own[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(own.size()) - 1))];
  return l;
}

inline SymMatrix random_symmetric(Rng& rng, std::size_t n) {
  SymMatrix a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a.set(i, j, uniform(rng, -1.0, 1.0));
  return a;
}

/// Planted block affinity: 1 inside a block, `noise` * U(0,1) across blocks.
inline SymMatrix block_affinity(Rng& rng, const std::vector<int>& truth, double noise) {
  const std::size_t n = truth.size();
  SymMatrix a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      a.set(i, j, truth[i] == truth[j] ? 1.0 : noise * uniform(rng, 0.0, 1.0));
  return a;
}

inline std::vector<int> blocks(int count, int size) {
  std::vector<int> out;
  for (int b = 0; b < count; ++b) out.insert(out.end(), static_cast<std::size_t>(size), b);
  return out;
}

inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [k, v] : joint) index += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// Exhaustive MAP by depth-first recursion over nodes from the last to the
/// first, scoring complete labelings with the model scorer.
inline InferenceResult reference_map(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores,
                                     std::optional<LabelId> y_true = std::nullopt,
                                     const std::vector<LabelId>* z_true = nullptr) {
  const std::size_t n = tree.nodes.size();
  std::vector<LabelId> classes;
  if (params.mode == Mode::parsing)
    classes = {-1};
  else
    for (LabelId y = static_cast<LabelId>(params.layout.num_classes); y-- > 0;) classes.push_back(y);

  InferenceResult best;
  bool have = false;
  for (LabelId y : classes) {
    std::vector<LabelId> states;
    for (std::size_t h = params.layout.num_labels; h-- > 0;)
      if (params.mode == Mode::parsing || params.owner[h] == y) states.push_back(static_cast<LabelId>(h));
    if (states.empty() && n > 1) continue;
    Labeling cur;
    cur.action = y;
    cur.node_labels.assign(n, -1);
    auto visit = [&](auto&& self, std::size_t node) -> void {
      if (node == 0) {
        double s = score(params, tree, scores, cur);
        if (y_true && y != *y_true) s += 1.0;
        if (z_true && n > 1) {
          int wrong = 0;
          for (std::size_t i = 1; i < n; ++i) wrong += cur.node_labels[i] != (*z_true)[i] ? 1 : 0;
          s += static_cast<double>(wrong) / static_cast<double>(n - 1);
        }
        if (!have || s > best.score || (s == best.score && tie_break_less(cur, best.labeling))) {
          best = {cur, s};
          have = true;
        }
        return;
      }
      for (LabelId h : states) {
        cur.node_labels[node] = h;
        self(self, node - 1);
      }
    };
    visit(visit, n - 1);
  }
  return best;
}

/// Quadratic reference for localization mAP: each prediction scans the whole
/// truth list, ranks are recomputed by counting strictly higher scores.
inline std::vector<double> reference_map_metric(const std::vector<ScoredInterval>& preds,
                                                const std::vector<LabeledInterval>& truth,
                                                const std::vector<double>& thresholds) {
  std::set<LabelId> labels;
  for (const auto& t : truth) labels.insert(t.label);
  std::vector<double> out;
  for (double thr : thresholds) {
    double total = 0.0;
    for (LabelId label : labels) {
      std::vector<std::size_t> order;
      for (std::size_t p = 0; p < preds.size(); ++p)
        if (preds[p].label == label) order.push_back(p);
      std::vector<std::pair<std::size_t, std::size_t>> ranked;
      for (std::size_t p : order) {
        std::size_t rank = 0;
        for (std::size_t q : order)
          if (preds[q].score > preds[p].score || (preds[q].score == preds[p].score && q < p)) ++rank;
        ranked.emplace_back(rank, p);
      }
      std::sort(ranked.begin(), ranked.end());
      std::vector<bool> used(truth.size(), false);
      std::vector<bool> hit;
      for (const auto& [rank, p] : ranked) {
        double best = -1.0;
        std::size_t pick = truth.size();
        for (std::size_t g = 0; g < truth.size(); ++g) {
          if (used[g] || truth[g].label != label || truth[g].video_id != preds[p].video_id) continue;
          const double iou = temporal_iou(preds[p].span, truth[g].span);
          if (iou >= thr && iou > best) {
            best = iou;
            pick = g;
          }
        }
        if (pick < truth.size()) used[pick] = true;
        hit.push_back(pick < truth.size());
      }
      std::size_t positives = 0;
      for (const auto& t : truth) positives += t.label == label ? 1 : 0;
      double ap = 0.0, prev = 0.0;
      std::size_t tp = 0;
      for (std::size_t k = 0; k < hit.size(); ++k) {
        tp += hit[k] ? 1 : 0;
        const double recall = static_cast<double>(tp) / static_cast<double>(positives);
        if (!(recall > prev)) continue;
        double best_prec = 0.0;
        std::size_t tp_j = tp;
        for (std::size_t j = k; j < hit.size(); ++j) {
          if (j > k) tp_j += hit[j] ? 1 : 0;
          best_prec = std::max(best_prec, static_cast<double>(tp_j) / static_cast<double>(j + 1));
        }
        ap += (recall - prev) * best_prec;
        prev = recall;
      }
      total += ap;
    }
    out.push_back(labels.empty() ? 0.0 : total / static_cast<double>(labels.size()));
  }
  return out;
}

/// Random localization instance over a few videos and labels.
struct MapInstance {
  std::vector<ScoredInterval> preds;
  std::vector<LabeledInterval> truth;
};

inline MapInstance random_map_instance(Rng& rng) {
  MapInstance m;
  const int videos = uniform_int(rng, 1, 3);
  const int labels = uniform_int(rng, 1, 3);
  for (int v = 0; v < videos; ++v) {
    const std::string id = "v" + std::to_string(v);
    for (int k = uniform_int(rng, 0, 4); k > 0; --k) {
      const int s = uniform_int(rng, 0, 40);
      m.truth.push_back({id, uniform_int(rng, 0, labels - 1), {s, s + uniform_int(rng, 0, 12)}});
    }
    for (int k = uniform_int(rng, 0, 6); k > 0; --k) {
      const int s = uniform_int(rng, 0, 40);
      // Coarse scores make ties common.
      m.preds.push_back({id, uniform_int(rng, 0, labels - 1), {s, s + uniform_int(rng, 0, 12)},
                         static_cast<double>(uniform_int(rng, 0, 5))});
    }
  }
  return m;
}

}  // namespace hmae::testing
