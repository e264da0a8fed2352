#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hmae/model.hpp"

namespace hmae {

struct InferenceResult {
  Labeling labeling;
  double score = 0.0;  ///< includes the loss term for the loss-augmented variants
};

/// Edge potential for (node, child state, parent state).
using PairwiseFn = std::function<double(std::size_t, std::size_t, std::size_t)>;

/// Exact MAP state per node on a tree given parents-before-children order.
/// unary[i] lists the scores of node i's states (the root included). An empty
/// pairwise function means edge terms depend on the child state only and are
/// already folded into the unaries; messages are then constant in the parent
/// state. Ties go to the lowest state index.
std::vector<std::size_t> max_sum_tree(std::span<const int> parent, const std::vector<std::vector<double>>& unary,
                                      const PairwiseFn& pairwise = {});

/// Total order on candidate labelings at equal score: lexicographically
/// smaller node labels first, then the lower action id.
bool tie_break_less(const Labeling& a, const Labeling& b);

/// argmax over (Y, H) of the tree score (recognition models).
InferenceResult infer(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores);
/// argmax of score + [Y != y_true].
InferenceResult infer_loss_augmented_recognition(const ModelParams& params, const SegmentTree& tree,
                                                 const ScoreTable& scores, LabelId y_true);
/// argmax over node labelings (parsing models).
InferenceResult infer_parsing(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores);
/// argmax of score + (1/M_n) * Hamming(z, z_true). z_true[0] is ignored.
InferenceResult infer_loss_augmented_parsing(const ModelParams& params, const SegmentTree& tree,
                                             const ScoreTable& scores, std::span<const LabelId> z_true);

/// (1/M_n) * number of non-root nodes where the labels differ.
double parsing_loss(std::span<const LabelId> truth, std::span<const LabelId> predicted);

}  // namespace hmae
