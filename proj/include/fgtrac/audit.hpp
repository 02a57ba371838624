#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fgtrac/event_store.hpp"
#include "fgtrac/influence.hpp"
#include "fgtrac/ledger.hpp"
#include "fgtrac/merkle.hpp"

namespace fgtrac::audit {

struct EventProof {
  std::uint64_t seq = 0;
  std::string batch_id;
  merkle::MerkleProof proof;
  friend bool operator==(const EventProof&, const EventProof&) = default;
};

struct TimelineEntry {
  std::uint64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  std::string label;  // event kind, or the action name for training actions
  friend bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
};

struct ParticipationTimeline {
  trace::Role role = trace::Role::Train;
  std::vector<TimelineEntry> entries;
  std::optional<std::int64_t> first_used_epoch;
  std::optional<std::int64_t> last_used_epoch;     // any epoch-scoped action naming the subject
  std::optional<std::int64_t> last_trained_epoch;  // train_step actions only
  std::optional<std::int64_t> predicted_label;     // most recent prediction
  friend bool operator==(const ParticipationTimeline&, const ParticipationTimeline&) = default;
};

struct ModalityUsage {
  std::int64_t epoch = 0;  // latest epoch with an attention record
  std::vector<trace::ModalityWeight> weights;
  std::size_t records = 0;
  friend bool operator==(const ModalityUsage&, const ModalityUsage&) = default;
};

struct AuditReport {
  PseudonymousId subject;
  bool verified = false;
  std::vector<trace::TraceEvent> events;
  std::vector<EventProof> proofs;  // parallel to events
  ParticipationTimeline participation;
  std::optional<ModalityUsage> modality_usage;
  std::optional<influence::ContributionSummary> contribution;
  friend bool operator==(const AuditReport&, const AuditReport&) = default;
};

// Refusal outcomes carry no event content.
struct TamperingDetected {
  std::string batch_id;
  std::optional<std::uint64_t> seq;
  std::string reason;
  friend bool operator==(const TamperingDetected&, const TamperingDetected&) = default;
};
struct AuthorizationDenied {
  friend bool operator==(const AuthorizationDenied&, const AuthorizationDenied&) = default;
};
struct UnknownSubject {
  friend bool operator==(const UnknownSubject&, const UnknownSubject&) = default;
};

using AuditOutcome = std::variant<AuditReport, TamperingDetected, AuthorizationDenied, UnknownSubject>;

/// Throws MissingRoleEvent.
ParticipationTimeline build_participation(std::span<const trace::TraceEvent> events);

std::optional<ModalityUsage> summarize_modality(std::span<const trace::TraceEvent> events);

std::vector<influence::InfluenceRecord> contribution_records(std::span<const trace::TraceEvent> events,
                                                             const PseudonymousId& subject);

// Query module over one sealed, committed run.
//
// Construction checks the whole commitment structure once: the ledger chain,
// that the seal registry matches the committed batches one for one and
// covers every stored line, and that each batch's recomputed root equals its
// committed root. Membership proofs alone cannot show that an event was not
// moved away from a subject, so an audit is refused whenever any of these
// checks failed. Per-event proofs are then verified on every audit.
class Auditor {
 public:
  Auditor(const trace::EventStore& store, const ledger::Ledger& ledger, std::string secret);

  AuditOutcome audit(const PseudonymousId& subject, const AccessToken& token) const;

  /// First commitment failure found at construction, if any.
  const std::optional<TamperingDetected>& integrity() const { return integrity_; }

 private:
  struct Batch {
    trace::SealRecord seal;
    merkle::MerkleTree tree;
  };

  void check_integrity();

  const trace::EventStore& store_;
  const ledger::Ledger& ledger_;
  std::string secret_;
  std::map<std::string, Batch, std::less<>> batches_;
  std::optional<TamperingDetected> integrity_;
};

AuditOutcome audit(const PseudonymousId& subject, const AccessToken& token, std::string_view secret,
                   const trace::EventStore& store, const ledger::Ledger& ledger);

/// Third-party check of a released report using only the ledger: every
/// event's canonical bytes must fold to its batch's committed root, and the
/// chain must verify.
bool verify_report_offline(const AuditReport& report, const ledger::Ledger& ledger);

enum class ReportFormat { Text, Json };

std::string render_report(const AuditReport& report, ReportFormat format);
nlohmann::json to_json(const AuditReport& report);
AuditReport report_from_json(const nlohmann::json& j);
AuditReport parse_report(std::string_view json_text);

}  // namespace fgtrac::audit
