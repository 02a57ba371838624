#include "fgtrac/run.hpp"

#include <chrono>
#include <fstream>
#include <set>

#include "fgtrac/error.hpp"
#include "fgtrac/influence.hpp"
#include "fgtrac/merkle.hpp"

namespace fgtrac::run {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.training.modalities = {{"imaging", {0, 2}}, {"phenotype", {1, 3}}};
  return c;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c = defaults();
  try {
    c.schema = j.value("schema", std::string(kConfigSchema));
    if (c.schema != kConfigSchema) throw Error(ErrorCode::InvalidConfig, "unsupported config schema '" + c.schema + "'");
    if (j.contains("run_id")) c.run_id = j.at("run_id").get<std::string>();
    c.dataset.seed = c.training.seed = j.value("seed", c.training.seed);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      c.dataset.n_per_class = d.value("n_per_class", c.dataset.n_per_class);
      c.dataset.classes = d.value("classes", c.dataset.classes);
      c.dataset.dim = d.value("dim", c.dataset.dim);
      c.dataset.class_separation = d.value("class_separation", c.dataset.class_separation);
    }
    if (j.contains("split")) c.split = j.at("split").get<std::array<double, 3>>();
    c.training.epochs = j.value("epochs", c.training.epochs);
    c.training.batch_size = j.value("batch_size", c.training.batch_size);
    c.training.lr = j.value("lr", c.training.lr);
    c.training.num_checkpoints = j.value("num_checkpoints", c.training.num_checkpoints);
    if (j.contains("modalities")) {
      c.training.modalities.clear();
      for (const auto& m : j.at("modalities")) {
        c.training.modalities.push_back({m.at("name").get<std::string>(), m.at("dims").get<std::vector<std::size_t>>()});
      }
    }
    c.fixed_clock = j.value("fixed_clock", c.fixed_clock);
    c.hooks = j.value("hooks", c.hooks);
    c.query_count = j.value("query_count", c.query_count);
    c.spill_gradients = j.value("spill_gradients", c.spill_gradients);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config " + file.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

json RunConfig::to_json() const {
  json modalities = json::array();
  for (const auto& m : training.modalities) modalities.push_back({{"name", m.name}, {"dims", m.dims}});
  json j = {{"schema", schema},
            {"seed", training.seed},
            {"dataset",
             {{"n_per_class", dataset.n_per_class},
              {"classes", dataset.classes},
              {"dim", dataset.dim},
              {"class_separation", dataset.class_separation}}},
            {"split", split},
            {"epochs", training.epochs},
            {"batch_size", training.batch_size},
            {"lr", training.lr},
            {"num_checkpoints", training.num_checkpoints},
            {"modalities", std::move(modalities)},
            {"fixed_clock", fixed_clock},
            {"hooks", hooks},
            {"query_count", query_count},
            {"spill_gradients", spill_gradients},
            {"output_dir", output_dir}};
  if (run_id) j["run_id"] = *run_id;
  return j;
}

json params_to_json(const train::ModelParams& params) {
  return {{"classes", params.classes}, {"dim", params.dim}, {"weights", params.weights}, {"bias", params.bias}};
}

void anchor_pending(trace::EventStore& store, ledger::Ledger& ledger) {
  if (auto batch = store.seal_pending()) {
    ledger.commit(merkle::build(batch->leaves).root(), batch->record.batch_id);
  }
}

namespace {

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + file.string());
}

std::string resolve_run_id(const RunConfig& config) {
  if (config.run_id) return *config.run_id;
  std::string id = "run-" + std::to_string(config.training.seed);
  if (!config.fixed_clock) {
    using namespace std::chrono;
    id += "-" + std::to_string(duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
  }
  return id;
}

void execute(const RunConfig& config, RunArtifacts& art) {
  const Clock clock = config.fixed_clock ? Clock::fixed() : Clock::system();
  RunConfig resolved = config;
  resolved.run_id = art.run_id;
  write_json(art.config_file, resolved.to_json());

  std::optional<trace::EventStore> store;
  std::optional<ledger::Ledger> chain;
  if (config.hooks) {
    store.emplace(trace::EventStore::create(art.dir, art.run_id, clock));
    chain.emplace(ledger::Ledger::create(art.ledger_file, clock));
  }
  trace::EventStore* log = store ? &*store : nullptr;

  // Phase 1: identity mapping and role assignment.
  const auto dataset = train::make_dataset(config.dataset);
  const auto roles = train::split(dataset, config.split, config.training.seed, log);

  // Phase 2 with Phase 3 anchoring at every epoch end.
  auto on_epoch_end = [&](int) {
    if (store) anchor_pending(*store, *chain);
  };
  art.training = train::train(dataset, roles, config.training, log, on_epoch_end);

  std::vector<train::Checkpoint> selected;
  for (int e : art.training.selected) selected.push_back(art.training.checkpoints[static_cast<std::size_t>(e)]);

  if (store) {
    if (!selected.empty()) {
      std::vector<train::Sample> candidates;
      for (auto i : roles.train) candidates.push_back(dataset.samples[i]);
      influence::GradientCache cache;
      const std::size_t q = std::min(config.query_count, roles.test.size());
      for (std::size_t t = 0; t < q; ++t) {
        influence::influence_profile(dataset.samples[roles.test[t]], candidates, selected, log, cache);
      }
      if (config.spill_gradients) cache.write_spill(art.dir / (art.run_id + ".grads.bin"));
    } else {
      trace::TrainingActionPayload skipped;
      skipped.action = "influence_skipped";
      skipped.model_version = train::model_version_for(log, "final");
      store->record_training_action(std::move(skipped));
    }

    for (const auto& s : dataset.samples) train::predict(art.training.final_params, s, log, "final");
    anchor_pending(*store, *chain);
  }

  json ckpts = json::array();
  const std::set<int> chosen(art.training.selected.begin(), art.training.selected.end());
  for (const auto& c : art.training.checkpoints) {
    ckpts.push_back({{"checkpoint_id", c.checkpoint_id},
                     {"epoch", c.epoch},
                     {"val_loss", art.training.val_losses[static_cast<std::size_t>(c.epoch)]},
                     {"selected", chosen.count(c.epoch) > 0},
                     {"params", params_to_json(c.params)}});
  }
  write_json(art.checkpoints_file, {{"run_id", art.run_id}, {"checkpoints", std::move(ckpts)}});
  write_json(art.model_file, {{"run_id", art.run_id}, {"params", params_to_json(art.training.final_params)}});

  json subjects = json::array();
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto id = hash_id(dataset.samples[i].subject_raw_id);
    art.roster.push_back({id, roles.roles[i]});
    subjects.push_back({{"subject", id.hex()}, {"role", trace::to_string(roles.roles[i])}});
  }
  write_json(art.subjects_file, {{"run_id", art.run_id}, {"hooks", config.hooks}, {"subjects", std::move(subjects)}});
}

}  // namespace

RunArtifacts demo_run(const RunConfig& config, const fs::path& out_root) {
  RunArtifacts art;
  art.run_id = resolve_run_id(config);
  art.dir = out_root / art.run_id;
  if (fs::exists(art.dir)) throw Error(ErrorCode::RunExists, art.dir.string() + " already exists");
  fs::create_directories(art.dir);
  art.trace_file = trace::trace_path(art.dir, art.run_id);
  art.seals_file = trace::seals_path(art.dir, art.run_id);
  art.ledger_file = ledger::ledger_path(art.dir, art.run_id);
  art.config_file = art.dir / "run.json";
  art.checkpoints_file = art.dir / "checkpoints.json";
  art.model_file = art.dir / "model.json";
  art.subjects_file = art.dir / "subjects.json";

  try {
    execute(config, art);
  } catch (const std::exception& e) {
    std::ofstream marker(art.dir / "FAILED");
    marker << e.what() << '\n';
    throw;
  }
  return art;
}

std::string discover_run_id(const fs::path& dir) {
  static constexpr std::string_view kSuffix = ".trace.ndjson";
  std::optional<std::string> found;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::StorageFailure, dir.string() + " is not a run directory");
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.size() > kSuffix.size() && name.ends_with(kSuffix)) {
      if (found) throw Error(ErrorCode::StorageFailure, "more than one trace file in " + dir.string());
      found = name.substr(0, name.size() - kSuffix.size());
    }
  }
  if (!found) throw Error(ErrorCode::StorageFailure, "no trace file in " + dir.string());
  return *found;
}

RunView RunView::open(const fs::path& dir) {
  auto run_id = discover_run_id(dir);
  auto store = trace::EventStore::open(dir, run_id);
  auto chain = ledger::Ledger::open(ledger::ledger_path(dir, run_id));
  return RunView(std::move(run_id), std::move(store), std::move(chain));
}

TamperMode tamper_mode_from_string(const std::string& text) {
  if (text == "flip-bit") return TamperMode::FlipBit;
  if (text == "delete-line") return TamperMode::DeleteLine;
  if (text == "reorder") return TamperMode::Reorder;
  throw Error(ErrorCode::InvalidConfig, "unknown tamper mode '" + text + "'");
}

TamperResult tamper(const fs::path& src, const fs::path& dst, const TamperSpec& spec) {
  const auto run_id = discover_run_id(src);
  if (fs::exists(dst)) throw Error(ErrorCode::RunExists, dst.string() + " already exists");
  fs::create_directories(dst);
  fs::copy(src, dst, fs::copy_options::recursive);

  TamperResult result;
  result.dir = dst;
  result.file = spec.target == TamperTarget::Event ? trace::trace_path(dst, run_id) : ledger::ledger_path(dst, run_id);

  std::vector<std::string> lines;
  {
    std::ifstream in(result.file, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) lines.push_back(std::move(line));
  }
  const char* what = spec.target == TamperTarget::Event ? "event" : "block";
  if (spec.index >= lines.size()) {
    throw Error(ErrorCode::TargetNotFound, std::string(what) + " " + std::to_string(spec.index) + " not found");
  }

  const auto i = static_cast<std::size_t>(spec.index);
  switch (spec.mode) {
    case TamperMode::FlipBit: {
      auto& line = lines[i];
      const std::size_t byte = spec.byte.value_or(line.size() / 2);
      if (byte >= line.size() || spec.bit > 7) throw Error(ErrorCode::TargetNotFound, "bit position outside the line");
      line[byte] = static_cast<char>(static_cast<unsigned char>(line[byte]) ^ (1u << spec.bit));
      result.description = "flipped bit " + std::to_string(spec.bit) + " of byte " + std::to_string(byte) + " in " +
                           what + " " + std::to_string(i);
      break;
    }
    case TamperMode::DeleteLine:
      lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(i));
      result.description = std::string("deleted ") + what + " " + std::to_string(i);
      break;
    case TamperMode::Reorder: {
      if (lines.size() < 2) throw Error(ErrorCode::TargetNotFound, "nothing to reorder with");
      const std::size_t j = i + 1 < lines.size() ? i + 1 : i - 1;
      std::swap(lines[i], lines[j]);
      result.description = std::string("swapped ") + what + "s " + std::to_string(std::min(i, j)) + " and " +
                           std::to_string(std::max(i, j));
      break;
    }
  }

  std::ofstream out(result.file, std::ios::binary | std::ios::trunc);
  for (const auto& line : lines) out << line << '\n';
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot rewrite " + result.file.string());
  return result;
}

}  // namespace fgtrac::run
