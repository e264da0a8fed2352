#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmae/labels.hpp"

namespace hmae {

enum class Mode { recognition, parsing };

std::string to_string(Mode mode);
/// Throws ValidationError for anything but "recognition" / "parsing".
Mode parse_mode(std::string_view text);

/// Axis-aligned box, all components normalized to the frame extent.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double center_x() const noexcept { return x + 0.5 * w; }
  double center_y() const noexcept { return y + 0.5 * h; }
  bool operator==(const BBox&) const = default;
};

/// One per-frame region proposal, already described by appearance, shape and
/// motion features.
struct ProposalDescriptor {
  int frame_index = 0;
  BBox bbox;
  std::vector<double> appearance_hist;  ///< D_a, on the simplex
  std::vector<std::uint8_t> shape_feature;  ///< K*K binary mask, row-major
  std::vector<double> local_bow;  ///< D_b codeword counts
  double objectness_score = 0.0;
  double motion_score = 0.0;

  bool operator==(const ProposalDescriptor&) const = default;
};

/// Inclusive frame interval carrying a parse label.
struct ParseInterval {
  LabelId label = 0;
  int start_frame = 0;
  int end_frame = 0;
  int level = 1;

  bool operator==(const ParseInterval&) const = default;
};

struct VideoRecord {
  std::string video_id;
  int num_frames = 0;
  std::vector<ProposalDescriptor> proposals;
  std::optional<LabelId> action_label;
  std::optional<std::vector<ParseInterval>> parse_annotations;

  bool operator==(const VideoRecord&) const = default;
};

/// Dataset-level constants, declared once on the first JSONL line.
struct DatasetHeader {
  std::size_t d_a = 0;
  std::size_t d_b = 0;
  std::size_t k = 0;
  Mode mode = Mode::recognition;

  std::size_t shape_dim() const noexcept { return k * k; }
  bool operator==(const DatasetHeader&) const = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<VideoRecord> videos;  ///< sorted by video_id
  LabelSpaces labels;

  bool operator==(const Dataset&) const = default;
};

/// Reads a dataset JSONL file and validates every record against the header.
/// Labels are interned in lexicographic order; videos are sorted by id.
Dataset load_dataset(const std::filesystem::path& path, Mode mode);
Dataset read_dataset(std::istream& in, Mode mode);

void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Checks one record against the header; throws ValidationError naming the
/// offending field. `line` only decorates the message (0 = unknown).
void validate_video(const VideoRecord& video, const DatasetHeader& header, std::size_t line = 0);

/// L1-normalizes `v` in place; an all-zero vector becomes uniform.
/// Returns false when the uniform fallback was taken.
bool normalize_l1(std::vector<double>& v);

/// Element-wise sum of local_bow over the members, L1-normalized.
/// All-zero sums normalize to the uniform vector (with a warning).
/// Throws ValidationError on an empty member list.
std::vector<double> aggregate_bow(std::span<const ProposalDescriptor> members);
std::vector<double> aggregate_bow(std::span<const ProposalDescriptor> proposals,
                                  std::span<const int> members);

/// Mean appearance histogram of the selected proposals (stays on the simplex).
std::vector<double> mean_appearance(std::span<const ProposalDescriptor> proposals,
                                    std::span<const int> members);

}  // namespace hmae
