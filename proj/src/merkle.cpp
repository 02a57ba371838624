#include "fgtrac/merkle.hpp"

#include "fgtrac/error.hpp"

namespace fgtrac::merkle {

namespace {

constexpr std::uint8_t kLeafPrefix = 0x00;
constexpr std::uint8_t kNodePrefix = 0x01;

// Below this many nodes per level, thread start-up costs more than hashing.
constexpr std::ptrdiff_t kParallelThreshold = 256;

}  // namespace

Digest leaf_hash(std::string_view data) {
  Sha256 h;
  h.update(kLeafPrefix).update(data);
  return h.finish();
}

Digest node_hash(const Digest& left, const Digest& right) {
  std::array<std::uint8_t, 1 + 2 * kDigestSize> buf;
  buf[0] = kNodePrefix;
  std::copy(left.bytes.begin(), left.bytes.end(), buf.begin() + 1);
  std::copy(right.bytes.begin(), right.bytes.end(), buf.begin() + 1 + kDigestSize);
  return sha256(std::span<const std::uint8_t>(buf));
}

MerkleTree MerkleTree::from_levels(std::vector<std::vector<Digest>> levels) {
  if (levels.empty() || levels.front().empty()) throw Error(ErrorCode::EmptyLeafSet, "no leaves");
  return MerkleTree(std::move(levels));
}

MerkleTree build_from_leaf_hashes(std::vector<Digest> leaf_hashes) {
  if (leaf_hashes.empty()) throw Error(ErrorCode::EmptyLeafSet, "cannot build a tree over zero leaves");
  std::vector<std::vector<Digest>> levels;
  levels.push_back(std::move(leaf_hashes));
  while (levels.back().size() > 1) {
    const auto& below = levels.back();
    const auto pairs = static_cast<std::ptrdiff_t>(below.size() / 2);
    std::vector<Digest> above((below.size() + 1) / 2);
#pragma omp parallel for schedule(static) if (pairs >= kParallelThreshold)
    for (std::ptrdiff_t i = 0; i < pairs; ++i) {
      above[i] = node_hash(below[2 * i], below[2 * i + 1]);
    }
    if (below.size() % 2 == 1) above.back() = below.back();
    levels.push_back(std::move(above));
  }
  return MerkleTree::from_levels(std::move(levels));
}

MerkleTree build(std::span<const std::string> leaves) {
  if (leaves.empty()) throw Error(ErrorCode::EmptyLeafSet, "cannot build a tree over zero leaves");
  const auto n = static_cast<std::ptrdiff_t>(leaves.size());
  std::vector<Digest> hashed(leaves.size());
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < n; ++i) hashed[i] = leaf_hash(leaves[i]);
  return build_from_leaf_hashes(std::move(hashed));
}

MerkleProof prove(const MerkleTree& tree, std::uint64_t leaf_index) {
  if (leaf_index >= tree.leaf_count()) {
    throw Error(ErrorCode::IndexOutOfRange,
                "leaf " + std::to_string(leaf_index) + " of " + std::to_string(tree.leaf_count()));
  }
  MerkleProof proof{leaf_index, {}};
  std::uint64_t pos = leaf_index;
  const auto& levels = tree.levels();
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    const auto& level = levels[k];
    if (pos % 2 == 1) {
      proof.path.push_back({level[pos - 1], Side::Left});
    } else if (pos + 1 < level.size()) {
      proof.path.push_back({level[pos + 1], Side::Right});
    }
    // else: promoted, no sibling at this level
    pos /= 2;
  }
  return proof;
}

bool verify(std::string_view leaf_data, const MerkleProof& proof, const Digest& root) {
  Digest acc = leaf_hash(leaf_data);
  for (const auto& step : proof.path) {
    acc = step.side == Side::Right ? node_hash(acc, step.sibling) : node_hash(step.sibling, acc);
  }
  return constant_time_equal(acc, root);
}

nlohmann::json to_json(const MerkleProof& proof) {
  nlohmann::json path = nlohmann::json::array();
  for (const auto& s : proof.path) {
    path.push_back({{"sibling", s.sibling.hex()}, {"side", s.side == Side::Left ? "L" : "R"}});
  }
  return {{"leaf_index", proof.leaf_index}, {"path", std::move(path)}};
}

MerkleProof proof_from_json(const nlohmann::json& j) {
  try {
    MerkleProof p;
    p.leaf_index = j.at("leaf_index").get<std::uint64_t>();
    for (const auto& s : j.at("path")) {
      auto side = s.at("side").get<std::string>();
      if (side != "L" && side != "R") throw Error(ErrorCode::ParseError, "proof side must be L or R");
      p.path.push_back({Digest::from_hex(s.at("sibling").get<std::string>()), side == "L" ? Side::Left : Side::Right});
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad proof: ") + e.what());
  }
}

}  // namespace fgtrac::merkle
