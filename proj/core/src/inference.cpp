#include "hmae/inference.hpp"

#include <algorithm>
#include <limits>
#include <optional>

#include "hmae/error.hpp"
#include "hmae/log.hpp"

namespace hmae {

std::vector<std::size_t> max_sum_tree(std::span<const int> parent, const std::vector<std::vector<double>>& unary,
                                      const PairwiseFn& pairwise) {
  const std::size_t n = parent.size();
  if (unary.size() != n) throw ValidationError("max_sum_tree: one unary vector per node required");
  for (const auto& u : unary)
    if (u.empty()) throw ValidationError("max_sum_tree: node without states");

  // belief[i][s]: unary plus the messages of i's children.
  std::vector<std::vector<double>> belief = unary;
  std::vector<std::vector<std::size_t>> back(n);
  for (std::size_t i = n; i-- > 1;) {
    const auto p = static_cast<std::size_t>(parent[i]);
    const std::size_t parent_states = unary[p].size();
    std::vector<double> msg(parent_states);
    back[i].resize(parent_states);
    if (!pairwise) {
      std::size_t best = 0;
      for (std::size_t s = 1; s < belief[i].size(); ++s)
        if (belief[i][s] > belief[i][best]) best = s;
      std::fill(msg.begin(), msg.end(), belief[i][best]);
      std::fill(back[i].begin(), back[i].end(), best);
    } else {
      for (std::size_t sp = 0; sp < parent_states; ++sp) {
        std::size_t best = 0;
        double best_v = belief[i][0] + pairwise(i, 0, sp);
        for (std::size_t s = 1; s < belief[i].size(); ++s) {
          const double v = belief[i][s] + pairwise(i, s, sp);
          if (v > best_v) {
            best_v = v;
            best = s;
          }
        }
        msg[sp] = best_v;
        back[i][sp] = best;
      }
    }
    for (std::size_t sp = 0; sp < parent_states; ++sp) belief[p][sp] += msg[sp];
  }

  std::vector<std::size_t> state(n, 0);
  for (std::size_t s = 1; s < belief[0].size(); ++s)
    if (belief[0][s] > belief[0][state[0]]) state[0] = s;
  for (std::size_t i = 1; i < n; ++i) state[i] = back[i][state[static_cast<std::size_t>(parent[i])]];
  return state;
}

bool tie_break_less(const Labeling& a, const Labeling& b) {
  if (a.node_labels != b.node_labels) return a.node_labels < b.node_labels;
  return a.action < b.action;
}

double parsing_loss(std::span<const LabelId> truth, std::span<const LabelId> predicted) {
  if (truth.size() != predicted.size()) throw ValidationError("parsing_loss: labelings differ in size");
  if (truth.size() <= 1) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 1; i < truth.size(); ++i) wrong += truth[i] != predicted[i] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(truth.size() - 1);
}

namespace {

void check_inputs(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores, Mode mode) {
  if (params.mode != mode)
    throw ValidationError("a " + to_string(params.mode) + " model cannot run " + to_string(mode) + " inference");
  if (tree.nodes.empty() || tree.parent.size() != tree.nodes.size())
    throw ValidationError("tree '" + tree.video_id + "' is malformed");
  if (scores.num_segments() != tree.num_segments() || scores.num_maes() != params.layout.num_labels)
    throw ValidationError("score table shape does not match tree '" + tree.video_id + "' and model");
}

// Best labeling restricted to `states` per node, with optional per-node loss.
Labeling best_labeling(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores,
                       const std::vector<LabelId>& states, std::span<const LabelId> z_true) {
  const std::size_t n = tree.nodes.size();
  const double per_node_loss = n > 1 ? 1.0 / static_cast<double>(n - 1) : 0.0;
  std::vector<std::vector<double>> unary(n);
  unary[0] = {0.0};
  for (std::size_t i = 1; i < n; ++i) {
    unary[i].resize(states.size());
    for (std::size_t s = 0; s < states.size(); ++s) {
      unary[i][s] = node_potential(params, tree, scores, static_cast<int>(i), states[s]);
      if (!z_true.empty() && states[s] != z_true[i]) unary[i][s] += per_node_loss;
    }
  }
  const auto picked = max_sum_tree(tree.parent, unary);
  Labeling out;
  out.node_labels.assign(n, -1);
  for (std::size_t i = 1; i < n; ++i) out.node_labels[i] = states[picked[i]];
  return out;
}

InferenceResult recognition_search(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores,
                                   std::optional<LabelId> y_true) {
  check_inputs(params, tree, scores, Mode::recognition);
  if (params.layout.num_classes == 0) throw ValidationError("model has no action classes");
  std::vector<std::vector<LabelId>> own(params.layout.num_classes);
  for (std::size_t h = 0; h < params.owner.size(); ++h)
    own[static_cast<std::size_t>(params.owner[h])].push_back(static_cast<LabelId>(h));

  InferenceResult best;
  best.score = -std::numeric_limits<double>::infinity();
  bool have = false;
  for (std::size_t y = 0; y < own.size(); ++y) {
    const auto action = static_cast<LabelId>(y);
    const double loss = (y_true && *y_true != action) ? 1.0 : 0.0;
    InferenceResult cand;
    if (own[y].empty() && tree.num_segments() > 0) {
      logger()->warn("action {} has no MAEs; scoring it by the root term alone", action);
      cand.labeling.action = action;
      cand.labeling.node_labels.assign(tree.nodes.size(), -1);
      cand.score = root_potential(params, tree, action) + loss;
    } else {
      cand.labeling = best_labeling(params, tree, scores, own[y], {});
      cand.labeling.action = action;
      cand.score = score(params, tree, scores, cand.labeling) + loss;
    }
    if (!have || cand.score > best.score ||
        (cand.score == best.score && tie_break_less(cand.labeling, best.labeling))) {
      best = std::move(cand);
      have = true;
    }
  }
  return best;
}

std::vector<LabelId> all_labels(const ModelParams& params) {
  std::vector<LabelId> states(params.layout.num_labels);
  for (std::size_t h = 0; h < states.size(); ++h) states[h] = static_cast<LabelId>(h);
  if (states.empty()) throw ValidationError("parsing model has no node labels");
  return states;
}

}  // namespace

InferenceResult infer(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores) {
  return recognition_search(params, tree, scores, std::nullopt);
}

InferenceResult infer_loss_augmented_recognition(const ModelParams& params, const SegmentTree& tree,
                                                 const ScoreTable& scores, LabelId y_true) {
  if (y_true < 0 || static_cast<std::size_t>(y_true) >= params.layout.num_classes)
    throw ValidationError("true action id " + std::to_string(y_true) + " out of range");
  return recognition_search(params, tree, scores, y_true);
}

InferenceResult infer_parsing(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores) {
  check_inputs(params, tree, scores, Mode::parsing);
  InferenceResult r;
  r.labeling = best_labeling(params, tree, scores, all_labels(params), {});
  r.score = score(params, tree, scores, r.labeling);
  return r;
}

InferenceResult infer_loss_augmented_parsing(const ModelParams& params, const SegmentTree& tree,
                                             const ScoreTable& scores, std::span<const LabelId> z_true) {
  check_inputs(params, tree, scores, Mode::parsing);
  if (z_true.size() != tree.nodes.size())
    throw ValidationError("parse annotation covers " + std::to_string(z_true.size()) + " nodes, tree '" +
                          tree.video_id + "' has " + std::to_string(tree.nodes.size()));
  for (std::size_t i = 1; i < z_true.size(); ++i)
    if (z_true[i] < 0 || static_cast<std::size_t>(z_true[i]) >= params.layout.num_labels)
      throw ValidationError("node " + std::to_string(i) + " of '" + tree.video_id + "' has no valid annotation");
  InferenceResult r;
  r.labeling = best_labeling(params, tree, scores, all_labels(params), z_true);
  r.score = score(params, tree, scores, r.labeling) + parsing_loss(z_true, r.labeling.node_labels);
  return r;
}

}  // namespace hmae
