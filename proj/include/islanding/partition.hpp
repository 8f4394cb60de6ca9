#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace islanding {

/// Disjoint machine-id groups covering a machine set.
struct GeneratorPartition {
  std::vector<std::vector<std::string>> groups;

  std::size_t u() const { return groups.size(); }

  /// Group index of every id in `ids`. Throws InputError unless the groups
  /// form a disjoint cover of `ids`.
  std::vector<std::size_t> assignment(const std::vector<std::string>& ids) const;

  /// Same partition restricted to `ids`; groups left empty are dropped.
  GeneratorPartition restricted_to(const std::vector<std::string>& ids) const;

  bool operator==(const GeneratorPartition&) const = default;
};

}  // namespace islanding
