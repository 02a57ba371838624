#include "fgtrac/event_store.hpp"

#include <algorithm>
#include <mutex>

#include "fgtrac/error.hpp"

namespace fgtrac::trace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path trace_path(const fs::path& dir, std::string_view run_id) {
  return dir / (std::string(run_id) + ".trace.ndjson");
}

fs::path seals_path(const fs::path& dir, std::string_view run_id) {
  return dir / (std::string(run_id) + ".seals.json");
}

EventStore::EventStore(std::string run_id, Clock clock) : run_id_(std::move(run_id)), clock_(clock) {}

EventStore EventStore::in_memory(std::string run_id, Clock clock) {
  return EventStore(std::move(run_id), clock);
}

EventStore EventStore::create(const fs::path& dir, std::string run_id, Clock clock) {
  EventStore store(std::move(run_id), clock);
  store.dir_ = dir;
  auto path = trace_path(dir, store.run_id_);
  if (fs::exists(path)) throw Error(ErrorCode::StorageFailure, path.string() + " already exists");
  store.out_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::out);
  if (!*store.out_) throw Error(ErrorCode::StorageFailure, "cannot create " + path.string());
  store.persist_seals();
  return store;
}

EventStore EventStore::open(const fs::path& dir, std::string run_id) {
  EventStore store(std::move(run_id), Clock::system());
  store.dir_ = dir;
  store.read_only_ = true;

  auto path = trace_path(dir, store.run_id_);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot open " + path.string());
  std::string raw;
  while (std::getline(in, raw)) {
    const std::uint64_t seq = store.lines_.size();
    std::optional<TraceEvent> ev;
    try {
      TraceEvent parsed = parse_event(raw);
      if (parsed.seq == seq && canonical_serialize(parsed) == raw) ev = std::move(parsed);
    } catch (const Error&) {
    }
    if (ev) {
      store.index(*ev, seq);
    } else {
      store.corrupt_.push_back(seq);
    }
    store.lines_.push_back(std::move(raw));
    store.events_.push_back(std::move(ev));
  }

  std::ifstream seals_in(seals_path(dir, store.run_id_), std::ios::binary);
  if (seals_in) {
    // A damaged registry loads as empty; auditing cross-checks it against
    // the ledger, so the damage still surfaces there.
    try {
      json j = json::parse(seals_in);
      for (const auto& s : j.at("seals")) {
        store.seals_.push_back({s.at("from_seq").get<std::uint64_t>(), s.at("to_seq").get<std::uint64_t>(),
                                s.at("batch_id").get<std::string>()});
      }
    } catch (const json::exception&) {
      store.seals_.clear();
    }
  }
  return store;
}

std::uint64_t EventStore::next_seq() const {
  std::shared_lock lock(*mu_);
  return lines_.size();
}

void EventStore::index(const TraceEvent& event, std::uint64_t seq) {
  for (const auto& id : involved_subjects(event)) by_subject_[id].push_back(seq);
}

std::uint64_t EventStore::append(const TraceEvent& event) {
  if (read_only_) throw Error(ErrorCode::StorageFailure, "store is read-only");
  std::string line = canonical_serialize(event);

  std::unique_lock lock(*mu_);
  if (event.seq != lines_.size()) {
    throw Error(ErrorCode::SequenceGap,
                "expected seq " + std::to_string(lines_.size()) + ", got " + std::to_string(event.seq));
  }
  if (out_) {
    *out_ << line << '\n';
    out_->flush();
    if (!*out_) throw Error(ErrorCode::StorageFailure, "write to trace file failed");
  }
  index(event, event.seq);
  last_timestamp_ = event.timestamp_ms;
  lines_.push_back(std::move(line));
  events_.push_back(event);
  return event.seq;
}

TraceEvent EventStore::next_event(std::optional<PseudonymousId> subject, Payload payload) const {
  TraceEvent e;
  std::shared_lock lock(*mu_);
  e.seq = lines_.size();
  // Real clocks can step backwards; the file order must stay time-ordered.
  e.timestamp_ms = std::max(clock_.stamp(e.seq), lines_.empty() ? std::int64_t{0} : last_timestamp_);
  e.run_id = run_id_;
  e.subject = std::move(subject);
  e.payload = std::move(payload);
  return e;
}

std::uint64_t EventStore::record_user_mapping(std::string_view raw_id) {
  auto id = hash_id(raw_id);
  return append(next_event(id, UserMappingPayload{std::string(raw_id), id}));
}

std::uint64_t EventStore::record_training_role(const PseudonymousId& subject, Role role) {
  return append(next_event(subject, TrainingRolePayload{role}));
}

std::uint64_t EventStore::record_modality_attention(const PseudonymousId& subject,
                                                    std::vector<ModalityWeight> weights,
                                                    std::int64_t epoch) {
  return append(next_event(subject, ModalityAttentionPayload{std::move(weights), epoch, std::nullopt}));
}

std::uint64_t EventStore::record_batch_attention(std::string batch_id, std::vector<ModalityWeight> weights,
                                                 std::int64_t epoch) {
  return append(next_event(std::nullopt, ModalityAttentionPayload{std::move(weights), epoch, std::move(batch_id)}));
}

std::uint64_t EventStore::record_contribution(const PseudonymousId& target, const PseudonymousId& candidate,
                                              std::string checkpoint_set_id, double score) {
  return append(next_event(target, SampleContributionPayload{target, candidate, std::move(checkpoint_set_id), score}));
}

std::uint64_t EventStore::record_training_action(TrainingActionPayload action,
                                                 std::optional<PseudonymousId> subject) {
  return append(next_event(std::move(subject), std::move(action)));
}

std::vector<TraceEvent> EventStore::query_by_subject(const PseudonymousId& subject) const {
  std::shared_lock lock(*mu_);
  std::vector<TraceEvent> out;
  auto it = by_subject_.find(subject);
  if (it == by_subject_.end()) return out;
  out.reserve(it->second.size());
  for (auto seq : it->second) out.push_back(*events_[seq]);
  return out;
}

std::vector<std::string> EventStore::seal_batch(std::uint64_t from_seq, std::uint64_t to_seq) {
  if (read_only_) throw Error(ErrorCode::StorageFailure, "store is read-only");
  std::vector<std::string> leaves;
  {
    std::unique_lock lock(*mu_);
    if (from_seq > to_seq || to_seq >= lines_.size()) {
      throw Error(ErrorCode::RangeOutOfBounds,
                  "[" + std::to_string(from_seq) + "," + std::to_string(to_seq) + "] with " +
                      std::to_string(lines_.size()) + " events");
    }
    for (const auto& s : seals_) {
      if (from_seq <= s.to_seq && s.from_seq <= to_seq) {
        throw Error(ErrorCode::RangeOverlap, "overlaps sealed batch " + s.batch_id);
      }
    }
    leaves.assign(lines_.begin() + static_cast<std::ptrdiff_t>(from_seq),
                  lines_.begin() + static_cast<std::ptrdiff_t>(to_seq) + 1);
    SealRecord rec{from_seq, to_seq, batch_id_for(run_id_, from_seq, to_seq)};
    auto pos = std::lower_bound(seals_.begin(), seals_.end(), rec,
                                [](const SealRecord& a, const SealRecord& b) { return a.from_seq < b.from_seq; });
    seals_.insert(pos, std::move(rec));
  }
  persist_seals();
  return leaves;
}

std::optional<EventStore::SealedBatch> EventStore::seal_pending() {
  std::uint64_t from = 0;
  std::uint64_t end = 0;
  {
    std::shared_lock lock(*mu_);
    for (const auto& s : seals_) from = std::max(from, s.to_seq + 1);
    end = lines_.size();
  }
  if (from >= end) return std::nullopt;
  auto leaves = seal_batch(from, end - 1);
  return SealedBatch{*seal_containing(from), std::move(leaves)};
}

std::vector<SealRecord> EventStore::seals() const {
  std::shared_lock lock(*mu_);
  return seals_;
}

std::optional<SealRecord> EventStore::seal_containing(std::uint64_t seq) const {
  std::shared_lock lock(*mu_);
  auto it = std::upper_bound(seals_.begin(), seals_.end(), seq,
                             [](std::uint64_t v, const SealRecord& s) { return v < s.from_seq; });
  if (it == seals_.begin()) return std::nullopt;
  --it;
  if (seq > it->to_seq) return std::nullopt;
  return *it;
}

std::string EventStore::line(std::uint64_t seq) const {
  std::shared_lock lock(*mu_);
  if (seq >= lines_.size()) throw Error(ErrorCode::IndexOutOfRange, "no line " + std::to_string(seq));
  return lines_[seq];
}

std::optional<TraceEvent> EventStore::event(std::uint64_t seq) const {
  std::shared_lock lock(*mu_);
  if (seq >= events_.size()) return std::nullopt;
  return events_[seq];
}

std::vector<std::uint64_t> EventStore::corrupt_lines() const {
  std::shared_lock lock(*mu_);
  return corrupt_;
}

void EventStore::persist_seals() const {
  if (dir_.empty() || read_only_) return;
  json seals = json::array();
  {
    std::shared_lock lock(*mu_);
    for (const auto& s : seals_) {
      seals.push_back({{"from_seq", s.from_seq}, {"to_seq", s.to_seq}, {"batch_id", s.batch_id}});
    }
  }
  json doc = {{"run_id", run_id_}, {"seals", std::move(seals)}};
  auto path = seals_path(dir_, run_id_);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace fgtrac::trace
