#pragma once

#include <map>
#include <string>
#include <vector>

#include "hmae/dataset.hpp"

namespace hmae {

struct ParseVocabConfig {
  int max_length = 4;
  int min_support = 10;  ///< an n-gram is kept when it occurs more than this often

  void validate() const;
};

struct ComposedLabel {
  std::vector<std::string> parts;
  std::string name;  ///< parts joined by '-'
  int support = 0;

  bool operator==(const ComposedLabel&) const = default;
};

std::string compose_name(const std::vector<std::string>& parts);

/// Contiguous n-grams (1 <= n <= max_length) of the fine-label sequences,
/// counted over every position, kept when support > min_support. Sorted by
/// length, then name.
std::vector<ComposedLabel> compose_parse_vocabulary(const std::vector<std::vector<std::string>>& sequences,
                                                    const ParseVocabConfig& cfg);

/// A fine-grained labeled instance of a sequence, in temporal order.
struct FineInstance {
  std::string label;
  int start_frame = 0;
  int end_frame = 0;
};

/// Interval annotations for every occurrence of a vocabulary entry in the
/// instance sequence: level = n-gram length, span from first start to last end.
/// `ids` maps composed names to parse-label ids; entries missing from it are skipped.
std::vector<ParseInterval> annotate_sequence(const std::vector<FineInstance>& instances,
                                             const std::vector<ComposedLabel>& vocab,
                                             const std::map<std::string, LabelId>& ids);

}  // namespace hmae
