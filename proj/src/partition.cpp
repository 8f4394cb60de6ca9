#include "islanding/partition.hpp"

#include <unordered_map>

#include "islanding/error.hpp"

namespace islanding {

std::vector<std::size_t> GeneratorPartition::assignment(const std::vector<std::string>& ids) const {
  std::unordered_map<std::string, std::size_t> group;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw InputError("partition contains an empty group");
    for (const auto& id : groups[g]) {
      if (!group.emplace(id, g).second) throw InputError("machine '" + id + "' appears in two groups");
    }
  }
  if (group.size() != ids.size()) throw InputError("partition does not cover the machine set");
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = group.find(id);
    if (it == group.end()) throw InputError("machine '" + id + "' is missing from the partition");
    out.push_back(it->second);
  }
  return out;
}

GeneratorPartition GeneratorPartition::restricted_to(const std::vector<std::string>& ids) const {
  GeneratorPartition out;
  for (const auto& g : groups) {
    std::vector<std::string> kept;
    for (const auto& id : g) {
      for (const auto& keep : ids) {
        if (keep == id) {
          kept.push_back(id);
          break;
        }
      }
    }
    if (!kept.empty()) out.groups.push_back(std::move(kept));
  }
  return out;
}

}  // namespace islanding
