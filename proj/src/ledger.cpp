#include "fgtrac/ledger.hpp"

#include "fgtrac/error.hpp"
#include "json.hpp"

namespace fgtrac::ledger {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

inline constexpr std::string_view kGenesisBatch = "genesis";

json preimage(const Block& b) {
  return {{"index", b.index},
          {"prev_hash", b.prev_hash.hex()},
          {"merkle_root", b.merkle_root.hex()},
          {"batch_id", b.batch_id},
          {"timestamp_ms", b.timestamp_ms}};
}

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::ParseError, "block: " + why); }

}  // namespace

Digest compute_block_hash(const Block& block) { return sha256(preimage(block).dump()); }

std::string canonical_serialize(const Block& block) {
  json j = preimage(block);
  j["block_hash"] = block.block_hash.hex();
  return j.dump();
}

Block parse_block(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  if (!j.is_object() || j.size() != 6) malformed("expected exactly six fields");
  auto digest = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) malformed(std::string("missing ") + key);
    auto d = Digest::try_from_hex(j[key].get<std::string>());
    if (!d) malformed(std::string("bad digest in ") + key);
    return *d;
  };
  Block b;
  if (!j.contains("index") || !j["index"].is_number_unsigned()) malformed("bad index");
  if (!j.contains("timestamp_ms") || !j["timestamp_ms"].is_number_integer()) malformed("bad timestamp_ms");
  if (!j.contains("batch_id") || !j["batch_id"].is_string()) malformed("bad batch_id");
  b.index = j["index"].get<std::uint64_t>();
  b.prev_hash = digest("prev_hash");
  b.merkle_root = digest("merkle_root");
  b.batch_id = j["batch_id"].get<std::string>();
  b.timestamp_ms = j["timestamp_ms"].get<std::int64_t>();
  b.block_hash = digest("block_hash");
  return b;
}

Block genesis(const Clock& clock) {
  Block b;
  b.index = 0;
  b.batch_id = std::string(kGenesisBatch);
  b.timestamp_ms = clock.stamp(0);
  b.block_hash = compute_block_hash(b);
  return b;
}

fs::path ledger_path(const fs::path& dir, std::string_view run_id) {
  return dir / (std::string(run_id) + ".ledger.ndjson");
}

Ledger Ledger::in_memory(Clock clock) {
  Ledger l(clock);
  l.blocks_.push_back(genesis(clock));
  l.by_batch_[l.blocks_.back().batch_id] = 0;
  return l;
}

Ledger Ledger::create(const fs::path& file, Clock clock) {
  if (fs::exists(file)) throw Error(ErrorCode::StorageFailure, file.string() + " already exists");
  Ledger l(clock);
  l.out_ = std::make_unique<std::ofstream>(file, std::ios::binary | std::ios::out);
  if (!*l.out_) throw Error(ErrorCode::StorageFailure, "cannot create " + file.string());
  Block g = genesis(clock);
  *l.out_ << canonical_serialize(g) << '\n';
  l.out_->flush();
  if (!*l.out_) throw Error(ErrorCode::StorageFailure, "write to ledger failed");
  l.by_batch_[g.batch_id] = 0;
  l.blocks_.push_back(std::move(g));
  return l;
}

Ledger Ledger::open(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot open " + file.string());
  Ledger l(Clock::system());
  l.read_only_ = true;
  std::string line;
  std::uint64_t pos = 0;
  while (std::getline(in, line)) {
    try {
      Block b = parse_block(line);
      // The hex parser is strict, so any alternative spelling of the same
      // block fails this comparison rather than slipping through.
      if (canonical_serialize(b) != line) malformed("not canonical");
      l.by_batch_[b.batch_id] = l.blocks_.size();
      l.blocks_.push_back(std::move(b));
    } catch (const Error&) {
      l.load_fault_ = pos;
      break;
    }
    ++pos;
  }
  if (pos == 0 && !l.load_fault_) l.load_fault_ = 0;  // no genesis
  return l;
}

const Block& Ledger::commit(const Digest& root, std::string batch_id) {
  if (read_only_) throw Error(ErrorCode::StorageFailure, "ledger is read-only");
  const Block& last = blocks_.back();
  Block b;
  b.index = last.index + 1;
  b.prev_hash = last.block_hash;
  b.merkle_root = root;
  b.batch_id = std::move(batch_id);
  b.timestamp_ms = clock_.stamp(b.index);
  b.block_hash = compute_block_hash(b);
  if (out_) {
    *out_ << canonical_serialize(b) << '\n';
    out_->flush();
    if (!*out_) throw Error(ErrorCode::StorageFailure, "write to ledger failed");
  }
  by_batch_[b.batch_id] = blocks_.size();
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

std::optional<std::uint64_t> Ledger::find_batch(std::string_view batch_id) const {
  auto it = by_batch_.find(batch_id);
  if (it == by_batch_.end()) return std::nullopt;
  return it->second;
}

Digest Ledger::latest_root_for(std::string_view batch_id) const {
  auto idx = find_batch(batch_id);
  if (!idx) throw Error(ErrorCode::UnknownBatch, "no block for batch '" + std::string(batch_id) + "'");
  return blocks_[*idx].merkle_root;
}

ChainStatus verify_chain(const Ledger& ledger) {
  auto blocks = ledger.blocks();
  for (std::uint64_t i = 0; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    const Digest expected_prev = i == 0 ? Digest::zero() : blocks[i - 1].block_hash;
    if (b.index != i || b.prev_hash != expected_prev || compute_block_hash(b) != b.block_hash) {
      return {i};
    }
  }
  if (ledger.load_fault()) return {ledger.load_fault()};
  return {};
}

}  // namespace fgtrac::ledger
