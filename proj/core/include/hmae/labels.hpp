#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hmae {

using LabelId = int;

/// Interning table: strings in files, dense ids from 0 in memory.
class LabelTable {
 public:
  LabelTable() = default;
  explicit LabelTable(std::vector<std::string> names);

  /// Returns the existing id or appends a new one.
  LabelId intern(std::string_view name);
  std::optional<LabelId> find(std::string_view name) const;
  /// Throws ValidationError for unknown names.
  LabelId id(std::string_view name) const;
  const std::string& name(LabelId id) const;

  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Table with the same names in lexicographic order.
  static LabelTable sorted(std::vector<std::string> names);

  bool operator==(const LabelTable& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, LabelId, std::less<>> index_;
};

/// Action labels, discovered MAEs with their owning action, and (parsing only)
/// the parse-label vocabulary.
struct LabelSpaces {
  LabelTable actions;
  LabelTable maes;
  std::vector<LabelId> mae_owner;  ///< indexed by MAE id, values are action ids
  LabelTable parse_labels;

  /// MAE ids owned by `action`, ascending.
  std::vector<LabelId> maes_of(LabelId action) const;

  bool operator==(const LabelSpaces&) const = default;
};

}  // namespace hmae
