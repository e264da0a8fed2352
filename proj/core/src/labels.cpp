#include "hmae/labels.hpp"

#include <algorithm>

#include "hmae/error.hpp"

namespace hmae {

LabelTable::LabelTable(std::vector<std::string> names) {
  for (auto& n : names) {
    if (find(n)) throw ValidationError("duplicate label '" + n + "'");
    intern(n);
  }
}

LabelId LabelTable::intern(std::string_view name) {
  if (auto it = index_.find(name); it != index_.end()) return it->second;
  const auto id = static_cast<LabelId>(names_.size());
  names_.emplace_back(name);
  index_.emplace(std::string(name), id);
  return id;
}

std::optional<LabelId> LabelTable::find(std::string_view name) const {
  if (auto it = index_.find(name); it != index_.end()) return it->second;
  return std::nullopt;
}

LabelId LabelTable::id(std::string_view name) const {
  if (auto found = find(name)) return *found;
  throw ValidationError("unknown label '" + std::string(name) + "'");
}

const std::string& LabelTable::name(LabelId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size())
    throw ValidationError("label id " + std::to_string(id) + " out of range");
  return names_[static_cast<std::size_t>(id)];
}

LabelTable LabelTable::sorted(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return LabelTable(std::move(names));
}

std::vector<LabelId> LabelSpaces::maes_of(LabelId action) const {
  std::vector<LabelId> out;
  for (std::size_t h = 0; h < mae_owner.size(); ++h)
    if (mae_owner[h] == action) out.push_back(static_cast<LabelId>(h));
  return out;
}

}  // namespace hmae
