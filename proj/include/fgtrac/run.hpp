#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fgtrac/event_store.hpp"
#include "fgtrac/ledger.hpp"
#include "fgtrac/trainer.hpp"
#include "json.hpp"

namespace fgtrac::run {

inline constexpr const char* kConfigSchema = "fgtrac.run/v1";

struct RunConfig {
  std::string schema = kConfigSchema;
  std::optional<std::string> run_id;  // default "run-<seed>" (fixed clock) or "run-<seed>-<ms>"
  train::DatasetConfig dataset;
  std::array<double, 3> split{0.6, 0.2, 0.2};
  train::TrainConfig training;
  bool fixed_clock = false;
  bool hooks = true;
  std::size_t query_count = 5;  // test-split targets profiled for influence
  bool spill_gradients = false;
  std::string output_dir = "runs";

  static RunConfig defaults();
  /// Missing keys keep their defaults; unknown schema -> InvalidConfig.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& file);
  nlohmann::json to_json() const;
};

struct SubjectEntry {
  PseudonymousId subject;
  trace::Role role;
};

struct RunArtifacts {
  std::string run_id;
  std::filesystem::path dir;
  std::filesystem::path trace_file;
  std::filesystem::path seals_file;
  std::filesystem::path ledger_file;
  std::filesystem::path config_file;
  std::filesystem::path checkpoints_file;
  std::filesystem::path model_file;
  std::filesystem::path subjects_file;
  std::vector<SubjectEntry> roster;
  train::TrainRunResult training;
};

/// End-to-end pipeline: dataset, split (identity + role logs), instrumented
/// training with a seal + commit at every epoch end, checkpoint selection,
/// influence profiles for the query targets, predictions, final commit.
/// Never reuses an existing run directory (RunExists). On failure a FAILED
/// marker is left in the run directory and the error is rethrown.
RunArtifacts demo_run(const RunConfig& config, const std::filesystem::path& out_root);

/// Seals all pending events and commits their root. No-op when nothing is pending.
void anchor_pending(trace::EventStore& store, ledger::Ledger& ledger);

// A finished run opened read-only from its directory.
class RunView {
 public:
  static RunView open(const std::filesystem::path& dir);

  const std::string& run_id() const { return run_id_; }
  const trace::EventStore& store() const { return store_; }
  const ledger::Ledger& ledger() const { return ledger_; }

 private:
  RunView(std::string run_id, trace::EventStore store, ledger::Ledger ledger)
      : run_id_(std::move(run_id)), store_(std::move(store)), ledger_(std::move(ledger)) {}
  std::string run_id_;
  trace::EventStore store_;
  ledger::Ledger ledger_;
};

/// Run id of the run stored in `dir` (from its trace file name).
std::string discover_run_id(const std::filesystem::path& dir);

enum class TamperMode { FlipBit, DeleteLine, Reorder };
enum class TamperTarget { Event, Block };

struct TamperSpec {
  TamperTarget target = TamperTarget::Event;
  std::uint64_t index = 0;  // event seq or block index
  TamperMode mode = TamperMode::FlipBit;
  std::optional<std::size_t> byte;  // flip-bit position within the line; default: middle
  unsigned bit = 0;
};

struct TamperResult {
  std::filesystem::path dir;
  std::filesystem::path file;
  std::string description;
};

/// Copies the run in `src` to `dst` and applies one mutation to the copy.
/// Throws TargetNotFound, RunExists.
TamperResult tamper(const std::filesystem::path& src, const std::filesystem::path& dst, const TamperSpec& spec);

TamperMode tamper_mode_from_string(const std::string& text);

nlohmann::json params_to_json(const train::ModelParams& params);

}  // namespace fgtrac::run
