#include "fgtrac/error.hpp"
#include "fgtrac/reference.hpp"

namespace fgtrac::reference {

merkle::MerkleTree merkle_build_serial(std::span<const std::string> leaves) {
  if (leaves.empty()) throw Error(ErrorCode::EmptyLeafSet, "cannot build a tree over zero leaves");
  std::vector<std::vector<Digest>> levels(1);
  for (const auto& leaf : leaves) levels[0].push_back(merkle::leaf_hash(leaf));
  while (levels.back().size() > 1) {
    std::vector<Digest> above;
    const auto& below = levels.back();
    for (std::size_t i = 0; i < below.size(); i += 2) {
      above.push_back(i + 1 < below.size() ? merkle::node_hash(below[i], below[i + 1]) : below[i]);
    }
    levels.push_back(std::move(above));
  }
  return merkle::MerkleTree::from_levels(std::move(levels));
}

}  // namespace fgtrac::reference
