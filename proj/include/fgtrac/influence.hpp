#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fgtrac/event_store.hpp"
#include "fgtrac/trainer.hpp"

namespace fgtrac::influence {

/// d loss / d(W, b) at one parameter state; W row-major, then b.
struct GradientVector {
  std::vector<double> values;
  friend bool operator==(const GradientVector&, const GradientVector&) = default;
};

/// Throws DimensionMismatch.
GradientVector grad_loss(const train::ModelParams& params, const train::Sample& sample);

/// Index-order dot product; the summation order is fixed, so a.b == b.a
/// bit for bit.
double dot(std::span<const double> a, std::span<const double> b);

/// Sum over checkpoints, in the given order, of grad(target) . grad(candidate).
/// The fold is left to right, so appending a checkpoint adds exactly its term:
/// I(C + [c]) == I(C) + I([c]). Throws EmptyCheckpointSet, DimensionMismatch.
double influence_cp(const train::Sample& target, const train::Sample& candidate,
                    std::span<const train::Checkpoint> checkpoints);

/// Names a checkpoint set, e.g. "epochs-3-7-12".
std::string checkpoint_set_id(std::span<const train::Checkpoint> checkpoints);

struct InfluenceRecord {
  PseudonymousId target;
  PseudonymousId candidate;
  std::string checkpoint_set_id;
  double score = 0.0;
  friend bool operator==(const InfluenceRecord&, const InfluenceRecord&) = default;
};

// Per-checkpoint gradients keyed by (checkpoint_id, subject). Each sample's
// gradient is computed once per checkpoint and reused across every pair.
// Writes happen outside parallel regions; concurrent readers are safe.
class GradientCache {
 public:
  const std::vector<double>* find(std::string_view checkpoint_id, const PseudonymousId& subject) const;
  void insert(const std::string& checkpoint_id, const PseudonymousId& subject, std::vector<double> grad);
  std::size_t size() const;

  /// Computes and stores every missing (checkpoint, sample) gradient.
  /// Parallel over samples.
  void fill(std::span<const train::Checkpoint> checkpoints, std::span<const train::Sample> samples);
  /// As above with the samples' pseudonymous ids already computed.
  void fill(std::span<const train::Checkpoint> checkpoints, std::span<const train::Sample> samples,
            std::span<const PseudonymousId> ids);

  /// `<run_id>.grads.bin`: per entry, u32-LE length + checkpoint_id UTF-8,
  /// 32-byte subject, u32-LE vector length, then f64-LE values.
  void write_spill(const std::filesystem::path& file) const;
  static GradientCache read_spill(const std::filesystem::path& file);

 private:
  using PerCheckpoint = std::map<PseudonymousId, std::vector<double>>;
  std::map<std::string, PerCheckpoint, std::less<>> grads_;
};

/// One record per candidate, scored against `target` (parallel over
/// candidates; values match influence_cp exactly). Records are returned and
/// logged in ascending candidate-hex order. Throws EmptyCheckpointSet,
/// DimensionMismatch, InvalidConfig (no candidates).
std::vector<InfluenceRecord> influence_profile(const train::Sample& target,
                                               std::span<const train::Sample> train_samples,
                                               std::span<const train::Checkpoint> checkpoints,
                                               trace::EventStore* store, GradientCache& cache);
std::vector<InfluenceRecord> influence_profile(const train::Sample& target,
                                               std::span<const train::Sample> train_samples,
                                               std::span<const train::Checkpoint> checkpoints,
                                               trace::EventStore* store);

struct ContributionSummary {
  PseudonymousId subject;
  std::size_t positive_count = 0;
  std::size_t negative_count = 0;
  std::size_t records = 0;
  double net_score = 0.0;
  std::vector<std::pair<PseudonymousId, double>> top_positive;
  friend bool operator==(const ContributionSummary&, const ContributionSummary&) = default;
};

/// Signed profile of `subject`: peers are the other party of each record.
/// top_positive is sorted by descending score, then peer hex ascending.
ContributionSummary summarize(std::span<const InfluenceRecord> records, const PseudonymousId& subject,
                              std::size_t top_n = 5);

}  // namespace fgtrac::influence
