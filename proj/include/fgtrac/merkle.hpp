#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fgtrac/digest.hpp"
#include "json.hpp"

namespace fgtrac::merkle {

// Leaf and interior hashes use distinct one-byte prefixes (0x00 / 0x01) so a
// leaf can never be confused with an interior node.
Digest leaf_hash(std::string_view data);
Digest node_hash(const Digest& left, const Digest& right);

/// Binary hash tree. An unpaired trailing node is promoted unchanged to the
/// next level (no duplication).
class MerkleTree {
 public:
  std::size_t leaf_count() const { return levels_.front().size(); }
  const Digest& root() const { return levels_.back().front(); }
  const std::vector<std::vector<Digest>>& levels() const { return levels_; }
  std::size_t height() const { return levels_.size(); }

  static MerkleTree from_levels(std::vector<std::vector<Digest>> levels);

 private:
  explicit MerkleTree(std::vector<std::vector<Digest>> levels) : levels_(std::move(levels)) {}
  std::vector<std::vector<Digest>> levels_;
};

/// Side on which the sibling sits relative to the running hash.
enum class Side { Left, Right };

struct ProofStep {
  Digest sibling;
  Side side = Side::Right;
  friend bool operator==(const ProofStep&, const ProofStep&) = default;
};

struct MerkleProof {
  std::uint64_t leaf_index = 0;
  std::vector<ProofStep> path;
  friend bool operator==(const MerkleProof&, const MerkleProof&) = default;
};

/// Throws EmptyLeafSet. Level hashing runs in parallel (OpenMP) above a
/// size threshold; the result is identical to the serial reference.
MerkleTree build(std::span<const std::string> leaves);
MerkleTree build_from_leaf_hashes(std::vector<Digest> leaf_hashes);

/// Throws IndexOutOfRange.
MerkleProof prove(const MerkleTree& tree, std::uint64_t leaf_index);

bool verify(std::string_view leaf_data, const MerkleProof& proof, const Digest& root);

/// {"leaf_index": n, "path": [{"sibling": "<hex>", "side": "L"|"R"}, ...]}
nlohmann::json to_json(const MerkleProof& proof);
MerkleProof proof_from_json(const nlohmann::json& j);

}  // namespace fgtrac::merkle
