#include "hmae/parse_vocab.hpp"

#include <algorithm>

#include "hmae/error.hpp"

namespace hmae {

void ParseVocabConfig::validate() const {
  if (max_length <= 0) throw ValidationError("max_length must be positive");
  if (min_support < 0) throw ValidationError("min_support must be >= 0");
}

std::string compose_name(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += '-';
    out += parts[i];
  }
  return out;
}

std::vector<ComposedLabel> compose_parse_vocabulary(const std::vector<std::vector<std::string>>& sequences,
                                                    const ParseVocabConfig& cfg) {
  cfg.validate();
  std::map<std::vector<std::string>, int> counts;
  for (const auto& seq : sequences)
    for (std::size_t i = 0; i < seq.size(); ++i)
      for (std::size_t n = 1; n <= static_cast<std::size_t>(cfg.max_length) && i + n <= seq.size(); ++n)
        ++counts[std::vector<std::string>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                          seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  std::vector<ComposedLabel> out;
  for (const auto& [parts, support] : counts)
    if (support > cfg.min_support) out.push_back({parts, compose_name(parts), support});
  std::sort(out.begin(), out.end(), [](const ComposedLabel& a, const ComposedLabel& b) {
    return a.parts.size() != b.parts.size() ? a.parts.size() < b.parts.size() : a.name < b.name;
  });
  return out;
}

std::vector<ParseInterval> annotate_sequence(const std::vector<FineInstance>& instances,
                                             const std::vector<ComposedLabel>& vocab,
                                             const std::map<std::string, LabelId>& ids) {
  std::vector<ParseInterval> out;
  for (const auto& entry : vocab) {
    const auto id = ids.find(entry.name);
    if (id == ids.end()) continue;
    const std::size_t n = entry.parts.size();
    for (std::size_t i = 0; i + n <= instances.size(); ++i) {
      bool match = true;
      for (std::size_t k = 0; k < n && match; ++k) match = instances[i + k].label == entry.parts[k];
      if (match)
        out.push_back({id->second, instances[i].start_frame, instances[i + n - 1].end_frame, static_cast<int>(n)});
    }
  }
  std::sort(out.begin(), out.end(), [](const ParseInterval& a, const ParseInterval& b) {
    if (a.start_frame != b.start_frame) return a.start_frame < b.start_frame;
    if (a.end_frame != b.end_frame) return a.end_frame < b.end_frame;
    return a.label < b.label;
  });
  return out;
}

}  // namespace hmae
