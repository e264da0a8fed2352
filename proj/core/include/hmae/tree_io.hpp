#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hmae/discovery.hpp"
#include "hmae/evaluation.hpp"
#include "hmae/training.hpp"

// Cross-stage file formats. Labels are always written by name, since ids are
// only meaningful inside one process.
namespace hmae {

struct NamedInterval {
  std::string label;
  int start = 0;
  int end = 0;
  int level = 1;

  bool operator==(const NamedInterval&) const = default;
};

/// One line of a tree file: the hierarchy plus the supervision that came with
/// the video.
struct TreeRecord {
  SegmentTree tree;
  std::optional<std::string> action;
  std::vector<NamedInterval> annotations;

  bool operator==(const TreeRecord&) const = default;
};

struct TreeFile {
  Mode mode = Mode::recognition;
  std::vector<TreeRecord> records;

  bool operator==(const TreeFile&) const = default;
};

TreeRecord make_tree_record(const VideoRecord& video, const LabelSpaces& labels, SegmentTree tree);

void write_trees(std::ostream& out, const TreeFile& file);
TreeFile read_trees(std::istream& in);
void save_trees(const std::filesystem::path& path, const TreeFile& file);
TreeFile load_trees(const std::filesystem::path& path);

/// Trees, action ids and parse annotations of a tree file, with label tables
/// interned in sorted order.
struct TreeCorpus {
  std::vector<SegmentTree> trees;
  LabelTable actions;
  std::vector<LabelId> action_of;  ///< -1 when the record has no action
  LabelTable parse_labels;
  std::vector<std::vector<ParseInterval>> annotations;
};
TreeCorpus to_corpus(const TreeFile& file);

/// The stored hash is checked against the recomputed one on load.
std::string vocabulary_to_json(const MAEVocabulary& vocab);
MAEVocabulary vocabulary_from_json(const std::string& text);
void save_vocabulary(const std::filesystem::path& path, const MAEVocabulary& vocab);
MAEVocabulary load_vocabulary(const std::filesystem::path& path);

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

/// Throws ValidationError unless the model was trained against `vocab`.
void check_vocabulary(const TrainedModel& model, const MAEVocabulary& vocab);

struct NamedScoredInterval {
  std::string label;
  int start = 0;
  int end = 0;
  double score = 0.0;

  bool operator==(const NamedScoredInterval&) const = default;
};

struct Prediction {
  std::string video_id;
  std::optional<std::string> action;  ///< recognition only
  std::vector<std::optional<std::string>> nodes;  ///< per node; root unset
  double score = 0.0;
  std::vector<NamedScoredInterval> intervals;  ///< parsing only

  bool operator==(const Prediction&) const = default;
};

struct PredictionFile {
  Mode mode = Mode::recognition;
  std::string vocab_hash;
  std::vector<Prediction> predictions;

  bool operator==(const PredictionFile&) const = default;
};

void write_predictions(std::ostream& out, const PredictionFile& file);
PredictionFile read_predictions(std::istream& in);
void save_predictions(const std::filesystem::path& path, const PredictionFile& file);
PredictionFile load_predictions(const std::filesystem::path& path);

}  // namespace hmae
