#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hmae/dataset.hpp"
#include "hmae/discovery.hpp"
#include "hmae/inference.hpp"
#include "hmae/model.hpp"

namespace hmae {

struct TrainConfig {
  double c = 1.0;
  double tolerance = 1e-3;
  int max_iterations = 100;
  int qp_inner = 500;  ///< coordinate sweeps per working-set solve
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

/// One training video: its tree, node scores and ground-truth labeling.
struct TrainingExample {
  SegmentTree tree;
  ScoreTable scores;
  Labeling truth;
};

struct IterationRecord {
  int iteration = 0;
  std::size_t constraints = 0;  ///< working-set size after this round
  std::size_t added = 0;
  double max_violation = 0.0;  ///< largest violation beyond the current slack
  double objective = 0.0;      ///< working-set primal objective after the solve
  double dual = 0.0;
};

struct TrainedModel {
  Mode mode = Mode::recognition;
  ModelParams params;
  LabelTable actions;  ///< empty in parsing mode
  LabelTable labels;   ///< node labels: MAEs, or background + parse labels
  std::string vocab_hash;
  /// Running-best primal objective of each working-set solve, one value per
  /// sweep. Solves are concatenated; solve_offsets marks where each starts.
  std::vector<double> objective_trace;
  std::vector<std::size_t> solve_offsets;
  std::vector<IterationRecord> log;
  std::vector<double> slacks;  ///< xi_n per training video, final weights
  bool converged = false;
};

/// Recognition examples: MAE scores from the vocabulary and H^n from cluster
/// membership (argmax same-action MAE for uncovered nodes).
std::vector<TrainingExample> recognition_examples(std::span<const SegmentTree> trees,
                                                  std::span<const LabelId> actions, const MAEVocabulary& vocab);

/// Node label for parsing: the annotated interval with the highest temporal
/// IoU against the node's span (ties: longer interval, then lower label).
/// Returned ids live in the node-label space: 0 is background, parse label z
/// maps to z + 1. Index 0 (root) holds -1.
std::vector<LabelId> associate_parse_labels(const SegmentTree& tree, std::span<const ParseInterval> annotations);

/// One-vs-rest linear scorers for the node labels (background first), trained
/// on node bows of the associated training trees. Plays the MAE vocabulary's
/// role in parsing mode; owners are -1.
MAEVocabulary train_node_label_scorers(std::span<const SegmentTree> trees,
                                       const std::vector<std::vector<LabelId>>& node_labels,
                                       const LabelTable& parse_labels, const DiscoveryConfig& cfg);

std::vector<TrainingExample> parsing_examples(std::span<const SegmentTree> trees,
                                              const std::vector<std::vector<LabelId>>& node_labels,
                                              const MAEVocabulary& scorers);

/// n-slack structured SVM with margin rescaling and 0-1 action loss.
TrainedModel train_recognition(std::span<const TrainingExample> data, const MAEVocabulary& vocab,
                               const TrainConfig& cfg);
/// Same solver with the per-node Hamming loss over node labels.
TrainedModel train_parsing(std::span<const TrainingExample> data, const MAEVocabulary& scorers,
                           const TrainConfig& cfg);

/// Largest margin violation of one example: max over labelings of
/// score + loss, minus the ground-truth score.
double max_violation(const ModelParams& params, const TrainingExample& example);

/// Per-iteration CSV (iteration, constraints, added, max_violation, objective, dual).
void write_training_log(std::ostream& out, const TrainedModel& model);

}  // namespace hmae
