#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fgtrac/clock.hpp"
#include "fgtrac/digest.hpp"

namespace fgtrac::ledger {

struct Block {
  std::uint64_t index = 0;
  Digest prev_hash;
  Digest merkle_root;
  std::string batch_id;
  std::int64_t timestamp_ms = 0;
  Digest block_hash;

  friend bool operator==(const Block&, const Block&) = default;
};

/// SHA-256 over the canonical JSON of every field except block_hash.
Digest compute_block_hash(const Block& block);

/// One canonical-JSON line (sorted keys, hex digests, no newline).
std::string canonical_serialize(const Block& block);
/// Strict; throws ParseError.
Block parse_block(std::string_view line);

Block genesis(const Clock& clock = Clock::fixed());

std::filesystem::path ledger_path(const std::filesystem::path& dir, std::string_view run_id);

// Append-only hash chain of Merkle-root commitments. The public surface has
// no way to modify or remove an existing block.
class Ledger {
 public:
  static Ledger in_memory(Clock clock = Clock::system());
  /// Writes a fresh file holding only the genesis block.
  static Ledger create(const std::filesystem::path& file, Clock clock);
  /// Read-only load. Lines are parsed until the first one that is not a
  /// canonical block; that position is reported by load_fault().
  static Ledger open(const std::filesystem::path& file);

  const Block& commit(const Digest& root, std::string batch_id);

  std::span<const Block> blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }
  std::optional<std::uint64_t> load_fault() const { return load_fault_; }

  /// Root of the most recent block carrying `batch_id`; throws UnknownBatch.
  Digest latest_root_for(std::string_view batch_id) const;
  std::optional<std::uint64_t> find_batch(std::string_view batch_id) const;

 private:
  explicit Ledger(Clock clock) : clock_(clock) {}

  Clock clock_;
  bool read_only_ = false;
  std::unique_ptr<std::ofstream> out_;
  std::vector<Block> blocks_;
  std::map<std::string, std::uint64_t, std::less<>> by_batch_;
  std::optional<std::uint64_t> load_fault_;
};

struct ChainStatus {
  std::optional<std::uint64_t> broken_at;
  bool ok() const { return !broken_at; }
};

/// Recomputes every block hash and link; reports the smallest bad index.
ChainStatus verify_chain(const Ledger& ledger);

}  // namespace fgtrac::ledger
