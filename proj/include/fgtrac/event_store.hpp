#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fgtrac/clock.hpp"
#include "fgtrac/tracelog.hpp"

namespace fgtrac::trace {

struct SealRecord {
  std::uint64_t from_seq = 0;
  std::uint64_t to_seq = 0;
  std::string batch_id;
  friend bool operator==(const SealRecord&, const SealRecord&) = default;
};

std::filesystem::path trace_path(const std::filesystem::path& dir, std::string_view run_id);
std::filesystem::path seals_path(const std::filesystem::path& dir, std::string_view run_id);

// Append-only event store for one run. One writer appends; readers may query
// concurrently between appends. Each stored line is kept verbatim so that
// sealing hashes exactly the bytes on disk.
//
// A store opened from disk is read-only and tolerant: lines that fail to
// parse, are not canonical, or carry the wrong seq are kept as raw bytes and
// reported by corrupt_lines() instead of aborting the load.
class EventStore {
 public:
  static EventStore in_memory(std::string run_id, Clock clock = Clock::system());
  /// Creates `<dir>/<run_id>.trace.ndjson`; fails with StorageFailure if it exists.
  static EventStore create(const std::filesystem::path& dir, std::string run_id, Clock clock);
  static EventStore open(const std::filesystem::path& dir, std::string run_id);

  EventStore(EventStore&&) noexcept = default;
  EventStore& operator=(EventStore&&) noexcept = default;

  const std::string& run_id() const { return run_id_; }
  const Clock& clock() const { return clock_; }
  bool read_only() const { return read_only_; }

  std::uint64_t next_seq() const;
  std::uint64_t size() const { return next_seq(); }

  /// Throws SequenceGap unless event.seq == next_seq(), StorageFailure on I/O.
  std::uint64_t append(const TraceEvent& event);

  std::uint64_t record_user_mapping(std::string_view raw_id);
  std::uint64_t record_training_role(const PseudonymousId& subject, Role role);
  std::uint64_t record_modality_attention(const PseudonymousId& subject,
                                          std::vector<ModalityWeight> weights, std::int64_t epoch);
  std::uint64_t record_batch_attention(std::string batch_id, std::vector<ModalityWeight> weights,
                                       std::int64_t epoch);
  std::uint64_t record_contribution(const PseudonymousId& target, const PseudonymousId& candidate,
                                    std::string checkpoint_set_id, double score);
  std::uint64_t record_training_action(TrainingActionPayload action,
                                       std::optional<PseudonymousId> subject = std::nullopt);

  /// Seq-ordered events involving `subject`; O(log M) index lookup.
  std::vector<TraceEvent> query_by_subject(const PseudonymousId& subject) const;

  /// Canonical bytes of events [from_seq, to_seq]; marks the range sealed.
  /// Throws RangeOutOfBounds or RangeOverlap.
  std::vector<std::string> seal_batch(std::uint64_t from_seq, std::uint64_t to_seq);

  struct SealedBatch {
    SealRecord record;
    std::vector<std::string> leaves;
  };
  /// Seals everything appended since the last seal, if anything.
  std::optional<SealedBatch> seal_pending();

  std::vector<SealRecord> seals() const;
  std::optional<SealRecord> seal_containing(std::uint64_t seq) const;

  /// Raw stored bytes of line `seq` (the Merkle leaf).
  std::string line(std::uint64_t seq) const;
  std::optional<TraceEvent> event(std::uint64_t seq) const;
  std::vector<std::uint64_t> corrupt_lines() const;

 private:
  EventStore(std::string run_id, Clock clock);
  TraceEvent next_event(std::optional<PseudonymousId> subject, Payload payload) const;
  void index(const TraceEvent& event, std::uint64_t seq);
  void persist_seals() const;

  std::string run_id_;
  Clock clock_;
  bool read_only_ = false;
  std::filesystem::path dir_;
  std::unique_ptr<std::ofstream> out_;

  std::unique_ptr<std::shared_mutex> mu_ = std::make_unique<std::shared_mutex>();
  std::vector<std::string> lines_;
  std::vector<std::optional<TraceEvent>> events_;
  std::vector<std::uint64_t> corrupt_;
  std::map<PseudonymousId, std::vector<std::uint64_t>> by_subject_;
  std::vector<SealRecord> seals_;
  std::int64_t last_timestamp_ = 0;
};

}  // namespace fgtrac::trace
