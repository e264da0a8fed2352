#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hmae/dataset.hpp"
#include "hmae/inference.hpp"
#include "hmae/parse_vocab.hpp"

namespace hmae {

enum class Split { train, test, all };
std::string to_string(Split split);
Split parse_split(std::string_view text);

struct RecognitionSynthConfig {
  int num_classes = 4;
  int videos_per_class = 40;
  int maes_per_class = 3;
  double noise = 0.1;
  std::uint64_t seed = 0;
  /// Prototype bows and appearances shared by all classes; only spatial cells
  /// and temporal order differ, so x_0 carries no class signal.
  bool shared_bows = false;
  Split split = Split::all;
  int frames = 24;
  /// Expected distractors per frame; unset means 5 * noise.
  std::optional<double> background_rate;
  std::size_t d_a = 16;
  std::size_t d_b = 32;
  std::size_t k = 4;

  void validate() const;
};

struct ParsingSynthConfig {
  int label_vocab_size = 8;  ///< fine-grained labels
  int sequences = 60;
  int mean_instances_per_sequence = 4;
  double noise = 0.1;
  std::uint64_t seed = 0;
  Split split = Split::all;
  int min_instance_frames = 8;
  int max_instance_frames = 14;
  std::optional<double> background_rate;  ///< unset means 5 * noise
  ParseVocabConfig vocab;
  std::size_t d_a = 16;
  std::size_t d_b = 32;
  std::size_t k = 4;

  void validate() const;
};

/// Ground truth kept out of the dataset file.
struct PlantedVideo {
  std::string video_id;
  Split split = Split::train;
  std::vector<int> prototype;  ///< per proposal; -1 for background distractors

  bool operator==(const PlantedVideo&) const = default;
};

struct SynthMetadata {
  std::string kind;  ///< "recognition" or "parsing"
  std::uint64_t seed = 0;
  std::vector<PlantedVideo> videos;
  std::vector<std::string> prototype_names;
  std::vector<ComposedLabel> parse_vocabulary;  ///< parsing only

  const PlantedVideo* find(const std::string& video_id) const;
  bool operator==(const SynthMetadata&) const = default;
};

struct SynthOutput {
  Dataset dataset;
  SynthMetadata metadata;
};

SynthOutput generate_recognition_set(const RecognitionSynthConfig& cfg);
SynthOutput generate_parsing_set(const ParsingSynthConfig& cfg);

std::string metadata_to_json(const SynthMetadata& meta);
SynthMetadata metadata_from_json(const std::string& text);
void save_metadata(const std::filesystem::path& path, const SynthMetadata& meta);
SynthMetadata load_metadata(const std::filesystem::path& path);

/// Planted identity of a segment: the most common prototype id among its
/// member proposals (ties to the lower id).
int planted_segment_id(const PlantedVideo& video, const std::vector<int>& members);

/// Optional loss for brute_force_map: 0-1 action loss against y_true
/// (recognition) or per-node Hamming loss against z_true (parsing).
struct LossSpec {
  std::optional<LabelId> y_true;
  std::optional<std::vector<LabelId>> z_true;
};

/// Exhaustive MAP over every feasible labeling, with the same tie-break as
/// infer. Throws ValidationError beyond 10^7 labelings.
InferenceResult brute_force_map(const ModelParams& params, const SegmentTree& tree, const ScoreTable& scores,
                                const LossSpec& loss = {});

}  // namespace hmae
