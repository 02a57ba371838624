#include "fgtrac/audit.hpp"

#include <algorithm>

#include "fgtrac/error.hpp"

namespace fgtrac::audit {

using trace::EventKind;
using trace::TraceEvent;

ParticipationTimeline build_participation(std::span<const TraceEvent> events) {
  ParticipationTimeline t;
  bool have_role = false;
  for (const auto& e : events) {
    std::string label(trace::to_string(e.kind()));
    if (const auto* r = std::get_if<trace::TrainingRolePayload>(&e.payload)) {
      t.role = r->role;
      have_role = true;
    } else if (const auto* a = std::get_if<trace::TrainingActionPayload>(&e.payload)) {
      label = a->action;
      if (a->epoch) {
        if (!t.first_used_epoch || *a->epoch < *t.first_used_epoch) t.first_used_epoch = a->epoch;
        if (!t.last_used_epoch || *a->epoch > *t.last_used_epoch) t.last_used_epoch = a->epoch;
        if (a->action == "train_step" && (!t.last_trained_epoch || *a->epoch > *t.last_trained_epoch)) {
          t.last_trained_epoch = a->epoch;
        }
      }
      if (a->action == "prediction" && a->predicted_label) t.predicted_label = a->predicted_label;
    }
    t.entries.push_back({e.seq, e.timestamp_ms, std::move(label)});
  }
  if (!have_role) throw Error(ErrorCode::MissingRoleEvent, "subject has no training role event");
  return t;
}

std::optional<ModalityUsage> summarize_modality(std::span<const TraceEvent> events) {
  std::optional<ModalityUsage> usage;
  for (const auto& e : events) {
    const auto* m = std::get_if<trace::ModalityAttentionPayload>(&e.payload);
    if (m == nullptr) continue;
    if (!usage) usage.emplace();
    ++usage->records;
    if (usage->records == 1 || m->epoch >= usage->epoch) {
      usage->epoch = m->epoch;
      usage->weights = m->weights;
    }
  }
  return usage;
}

std::vector<influence::InfluenceRecord> contribution_records(std::span<const TraceEvent> events,
                                                             const PseudonymousId& subject) {
  std::vector<influence::InfluenceRecord> out;
  for (const auto& e : events) {
    const auto* c = std::get_if<trace::SampleContributionPayload>(&e.payload);
    if (c == nullptr || (c->target != subject && c->candidate != subject)) continue;
    out.push_back({c->target, c->candidate, c->checkpoint_set_id, c->score});
  }
  return out;
}

Auditor::Auditor(const trace::EventStore& store, const ledger::Ledger& ledger, std::string secret)
    : store_(store), ledger_(ledger), secret_(std::move(secret)) {
  check_integrity();
}

void Auditor::check_integrity() {
  auto fail = [&](std::string batch_id, std::optional<std::uint64_t> seq, std::string reason) {
    integrity_ = TamperingDetected{std::move(batch_id), seq, std::move(reason)};
  };

  auto chain = ledger::verify_chain(ledger_);
  auto blocks = ledger_.blocks();
  if (!chain.ok()) {
    const auto i = *chain.broken_at;
    fail(i < blocks.size() ? blocks[i].batch_id : "block-" + std::to_string(i), std::nullopt,
         "ledger chain broken at block " + std::to_string(i));
    return;
  }

  const auto seals = store_.seals();
  const auto corrupt = store_.corrupt_lines();
  const std::uint64_t lines = store_.size();
  std::uint64_t expected_from = 0;
  for (std::size_t s = 0; s < seals.size(); ++s) {
    const auto& seal = seals[s];
    if (s + 1 >= blocks.size() || blocks[s + 1].batch_id != seal.batch_id) {
      fail(seal.batch_id, std::nullopt, "seal registry does not match committed batches");
      return;
    }
    if (seal.from_seq != expected_from || seal.to_seq < seal.from_seq ||
        seal.batch_id != trace::batch_id_for(store_.run_id(), seal.from_seq, seal.to_seq)) {
      fail(seal.batch_id, std::nullopt, "seal registry ranges are inconsistent");
      return;
    }
    if (seal.to_seq >= lines) {
      fail(seal.batch_id, std::nullopt,
           "batch leaf count mismatch: sealed " + std::to_string(seal.to_seq - seal.from_seq + 1) +
               " events but the trace holds only " + std::to_string(lines > seal.from_seq ? lines - seal.from_seq : 0));
      return;
    }
    std::vector<std::string> leaves;
    leaves.reserve(seal.to_seq - seal.from_seq + 1);
    for (auto q = seal.from_seq; q <= seal.to_seq; ++q) leaves.push_back(store_.line(q));
    auto tree = merkle::build(leaves);
    if (tree.root() != blocks[s + 1].merkle_root) {
      std::optional<std::uint64_t> bad;
      for (auto q : corrupt) {
        if (q >= seal.from_seq && q <= seal.to_seq) {
          bad = q;
          break;
        }
      }
      fail(seal.batch_id, bad, "recomputed Merkle root differs from the committed root");
      return;
    }
    batches_.emplace(seal.batch_id, Batch{seal, std::move(tree)});
    expected_from = seal.to_seq + 1;
  }
  if (seals.size() + 1 != blocks.size()) {
    fail(blocks[std::min(blocks.size() - 1, seals.size() + 1)].batch_id, std::nullopt,
         "committed batch missing from the seal registry");
    return;
  }
  if (expected_from != lines) {
    fail("unsealed", expected_from, "trace holds events that were never sealed and committed");
    return;
  }
}

AuditOutcome Auditor::audit(const PseudonymousId& subject, const AccessToken& token) const {
  if (!check_token(secret_, subject, token)) return AuthorizationDenied{};
  if (integrity_) return *integrity_;

  auto events = store_.query_by_subject(subject);
  const bool mapped = std::any_of(events.begin(), events.end(), [&](const TraceEvent& e) {
    const auto* m = std::get_if<trace::UserMappingPayload>(&e.payload);
    return m != nullptr && m->pseudonym == subject;
  });
  if (!mapped) return UnknownSubject{};

  std::vector<EventProof> proofs;
  proofs.reserve(events.size());
  for (const auto& e : events) {
    auto seal = store_.seal_containing(e.seq);
    if (!seal) return TamperingDetected{"unsealed", e.seq, "event is not covered by any sealed batch"};
    const auto& batch = batches_.at(seal->batch_id);
    auto proof = merkle::prove(batch.tree, e.seq - seal->from_seq);
    if (!merkle::verify(store_.line(e.seq), proof, ledger_.latest_root_for(seal->batch_id))) {
      return TamperingDetected{seal->batch_id, e.seq, "Merkle proof does not reach the committed root"};
    }
    proofs.push_back({e.seq, seal->batch_id, std::move(proof)});
  }

  AuditReport report;
  report.subject = subject;
  report.verified = true;
  report.participation = build_participation(events);
  report.modality_usage = summarize_modality(events);
  auto records = contribution_records(events, subject);
  if (!records.empty()) report.contribution = influence::summarize(records, subject);
  report.events = std::move(events);
  report.proofs = std::move(proofs);
  return report;
}

AuditOutcome audit(const PseudonymousId& subject, const AccessToken& token, std::string_view secret,
                   const trace::EventStore& store, const ledger::Ledger& ledger) {
  // Token check first, so an unauthorized caller does not trigger the
  // whole-store verification.
  if (!check_token(secret, subject, token)) return AuthorizationDenied{};
  return Auditor(store, ledger, std::string(secret)).audit(subject, token);
}

bool verify_report_offline(const AuditReport& report, const ledger::Ledger& ledger) {
  if (!report.verified || report.events.size() != report.proofs.size()) return false;
  if (!ledger::verify_chain(ledger).ok()) return false;
  for (std::size_t i = 0; i < report.events.size(); ++i) {
    const auto& p = report.proofs[i];
    if (p.seq != report.events[i].seq) return false;
    auto block = ledger.find_batch(p.batch_id);
    if (!block) return false;
    std::string leaf;
    try {
      leaf = trace::canonical_serialize(report.events[i]);
    } catch (const Error&) {
      return false;
    }
    if (!merkle::verify(leaf, p.proof, ledger.blocks()[*block].merkle_root)) return false;
  }
  return true;
}

}  // namespace fgtrac::audit
