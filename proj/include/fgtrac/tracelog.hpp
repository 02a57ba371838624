#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fgtrac/identity.hpp"
#include "json.hpp"

namespace fgtrac::trace {

// The five operational log kinds. Names are part of the on-disk format.
enum class EventKind { UserMapping, TrainingRole, ModalityAttention, SampleContribution, TrainingAction };

enum class Role { Train, Validation, Test };

std::string_view to_string(EventKind kind);
std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

struct UserMappingPayload {
  std::string raw_id;
  PseudonymousId pseudonym;
  friend bool operator==(const UserMappingPayload&, const UserMappingPayload&) = default;
};

struct TrainingRolePayload {
  Role role = Role::Train;
  friend bool operator==(const TrainingRolePayload&, const TrainingRolePayload&) = default;
};

struct ModalityWeight {
  std::string modality;
  double weight = 0.0;
  friend bool operator==(const ModalityWeight&, const ModalityWeight&) = default;
};

// Per-sample when the event carries a subject; per-batch when it carries a
// batch_id instead.
struct ModalityAttentionPayload {
  std::vector<ModalityWeight> weights;
  std::int64_t epoch = 0;
  std::optional<std::string> batch_id;
  friend bool operator==(const ModalityAttentionPayload&, const ModalityAttentionPayload&) = default;
};

struct SampleContributionPayload {
  PseudonymousId target;
  PseudonymousId candidate;
  std::string checkpoint_set_id;
  double score = 0.0;
  friend bool operator==(const SampleContributionPayload&, const SampleContributionPayload&) = default;
};

// `members` lists the subjects a batch-level action touched (train step,
// evaluation pass); it is what ties per-batch actions to individual samples.
struct TrainingActionPayload {
  std::string action;
  std::optional<std::int64_t> epoch;
  std::string model_version;
  std::optional<std::int64_t> cost_ms;
  std::optional<std::int64_t> batch_index;
  std::vector<PseudonymousId> members;
  std::optional<std::int64_t> predicted_label;
  std::optional<double> value;
  friend bool operator==(const TrainingActionPayload&, const TrainingActionPayload&) = default;
};

using Payload = std::variant<UserMappingPayload, TrainingRolePayload, ModalityAttentionPayload,
                             SampleContributionPayload, TrainingActionPayload>;

struct TraceEvent {
  std::uint64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  std::string run_id;
  std::optional<PseudonymousId> subject;
  Payload payload;

  EventKind kind() const { return static_cast<EventKind>(payload.index()); }

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

inline constexpr double kWeightSumTolerance = 1e-9;

/// Throws InvalidEvent when `event` breaks its kind's invariants.
void validate(const TraceEvent& event);

/// Single-line JSON, keys sorted at every level, no whitespace, shortest
/// round-trip reals. No trailing newline.
std::string canonical_serialize(const TraceEvent& event);

nlohmann::json to_json(const TraceEvent& event);
TraceEvent from_json(const nlohmann::json& j);

/// Strict inverse of canonical_serialize; throws ParseError.
TraceEvent parse_event(std::string_view line);

/// Every subject the event should be retrievable under: the subject field,
/// both contribution parties and batch members.
std::vector<PseudonymousId> involved_subjects(const TraceEvent& event);

/// `<run_id>:<from>-<to>` with sequence numbers zero-padded to a fixed width,
/// so committed block records have the same size for any batch.
std::string batch_id_for(std::string_view run_id, std::uint64_t from_seq, std::uint64_t to_seq);

}  // namespace fgtrac::trace
