#include "fgtrac/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "fgtrac/error.hpp"

namespace fgtrac::train {

namespace {

[[noreturn]] void bad_config(const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); }

std::vector<PseudonymousId> ids_of(const Dataset& ds, std::span<const std::size_t> indices) {
  std::vector<PseudonymousId> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(hash_id(ds.samples[i].subject_raw_id));
  return out;
}

}  // namespace

Dataset make_dataset(const DatasetConfig& config) {
  if (config.classes < 2) bad_config("need at least 2 classes");
  if (config.dim < 2) bad_config("need at least 2 feature dimensions");
  if (config.n_per_class < 2) bad_config("need at least 2 samples per class");
  if (!std::isfinite(config.class_separation) || config.class_separation < 0.0) {
    bad_config("class_separation must be finite and non-negative");
  }

  const double k = static_cast<double>(config.classes);
  const double radius = config.class_separation / (2.0 * std::sin(std::numbers::pi / k));
  std::vector<std::vector<double>> means(config.classes, std::vector<double>(config.dim, 0.0));
  for (std::size_t c = 0; c < config.classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / k;
    means[c][0] = radius * std::cos(angle);
    means[c][1] = radius * std::sin(angle);
  }

  Dataset ds{{}, config.dim, config.classes};
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t n = config.n_per_class * config.classes;
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % config.classes;
    Sample s{"subj-" + std::to_string(i), std::vector<double>(config.dim), static_cast<int>(c)};
    for (std::size_t j = 0; j < config.dim; ++j) s.features[j] = means[c][j] + noise(rng);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

RoleAssignment split(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed,
                     trace::EventStore* store) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!std::isfinite(r) || r < 0.0) throw Error(ErrorCode::InvalidRatios, "ratios must be finite and >= 0");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidRatios, "ratios must sum to 1");

  const auto n = static_cast<long long>(dataset.samples.size());
  const long long n_train = std::llround(static_cast<double>(n) * ratios[0]);
  const long long n_val = std::llround(static_cast<double>(n) * ratios[1]);
  const long long n_test = n - n_train - n_val;
  if (n_train <= 0 || n_val <= 0 || n_test <= 0 || ratios[2] <= 0.0) {
    throw Error(ErrorCode::EmptySplit, "every split must receive at least one sample");
  }

  std::vector<std::size_t> order(dataset.samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  RoleAssignment out;
  out.roles.resize(order.size());
  for (long long pos = 0; pos < n; ++pos) {
    const auto idx = order[static_cast<std::size_t>(pos)];
    out.roles[idx] = pos < n_train ? trace::Role::Train
                     : pos < n_train + n_val ? trace::Role::Validation
                                             : trace::Role::Test;
  }
  for (std::size_t i = 0; i < out.roles.size(); ++i) {
    switch (out.roles[i]) {
      case trace::Role::Train: out.train.push_back(i); break;
      case trace::Role::Validation: out.validation.push_back(i); break;
      case trace::Role::Test: out.test.push_back(i); break;
    }
  }

  if (store != nullptr) {
    for (const auto& s : dataset.samples) store->record_user_mapping(s.subject_raw_id);
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      store->record_training_role(hash_id(dataset.samples[i].subject_raw_id), out.roles[i]);
    }
  }
  return out;
}

double mean_loss(const ModelParams& params, const Dataset& dataset, std::span<const std::size_t> indices) {
  double total = 0.0;
  for (auto i : indices) total += forward_loss(params, dataset.samples[i]);
  return total / static_cast<double>(indices.size());
}

std::vector<trace::ModalityWeight> modality_attention(const ModelParams& params, const Sample& sample,
                                                      std::span<const ModalityGroup> groups) {
  std::vector<double> mass(groups.size(), 0.0);
  double total = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (auto j : groups[g].dims) {
      for (std::size_t k = 0; k < params.classes; ++k) mass[g] += std::abs(params.w(k, j) * sample.features[j]);
    }
    total += mass[g];
  }
  std::vector<trace::ModalityWeight> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double w = total > 0.0 ? mass[g] / total : 1.0 / static_cast<double>(groups.size());
    out.push_back({groups[g].name, w});
  }
  return out;
}

std::string model_version_for(const trace::EventStore* store, const std::string& tag) {
  return store != nullptr ? store->run_id() + "@" + tag : tag;
}

TrainRunResult train(const Dataset& dataset, const RoleAssignment& roles, const TrainConfig& config,
                     trace::EventStore* store, const std::function<void(int)>& on_epoch_end) {
  if (config.epochs < 1) bad_config("epochs must be >= 1");
  if (config.batch_size < 1) bad_config("batch_size must be >= 1");
  if (!(config.lr > 0.0) || !std::isfinite(config.lr)) bad_config("lr must be positive");
  if (config.num_checkpoints < 1) bad_config("num_checkpoints must be >= 1");
  if (roles.train.empty()) bad_config("train split is empty");
  if (roles.validation.empty()) bad_config("validation split is empty");
  for (const auto& g : config.modalities) {
    if (g.name.empty() || g.dims.empty()) bad_config("modality groups need a name and dims");
    for (auto j : g.dims) {
      if (j >= dataset.dim) bad_config("modality dim out of range");
    }
  }

  ModelParams params = ModelParams::zeros(dataset.classes, dataset.dim);
  TrainRunResult result;
  const Clock clock = store != nullptr ? store->clock() : Clock::fixed();
  const bool log_attention = store != nullptr && !config.modalities.empty();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_started = clock.start();
    const std::string version = model_version_for(store, "epoch-" + std::to_string(epoch));

    std::vector<std::size_t> order = roles.train;
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    std::int64_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const auto batch_started = clock.start();
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> batch(order.data() + start, end - start);

      std::vector<PseudonymousId> members;
      if (store != nullptr) {
        members = ids_of(dataset, batch);
        trace::TrainingActionPayload pre;
        pre.action = "preprocess";
        pre.epoch = epoch;
        pre.batch_index = batch_index;
        pre.model_version = version;
        pre.members = members;
        store->record_training_action(std::move(pre));
        if (log_attention) {
          for (std::size_t m = 0; m < batch.size(); ++m) {
            store->record_modality_attention(
                members[m], modality_attention(params, dataset.samples[batch[m]], config.modalities), epoch);
          }
        }
      }

      std::vector<double> grad(params.size(), 0.0);
      for (auto i : batch) {
        auto g = loss_gradient(params, dataset.samples[i]);
        for (std::size_t p = 0; p < g.size(); ++p) grad[p] += g[p];
      }
      const double step = config.lr / static_cast<double>(batch.size());
      const std::size_t nw = params.weights.size();
      for (std::size_t p = 0; p < nw; ++p) params.weights[p] -= step * grad[p];
      for (std::size_t k = 0; k < params.classes; ++k) params.bias[k] -= step * grad[nw + k];

      if (store != nullptr) {
        trace::TrainingActionPayload act;
        act.action = "train_step";
        act.epoch = epoch;
        act.batch_index = batch_index;
        act.model_version = version;
        act.cost_ms = clock.cost_ms(batch_started);
        act.members = std::move(members);
        store->record_training_action(std::move(act));
      }
    }

    const double val_loss = mean_loss(params, dataset, roles.validation);
    result.val_losses.push_back(val_loss);
    result.checkpoints.push_back({"epoch-" + std::to_string(epoch), epoch, params});

    if (store != nullptr) {
      auto evaluate = [&](const std::vector<std::size_t>& split_indices, const char* split_name) {
        if (split_indices.empty()) return;
        trace::TrainingActionPayload ev;
        ev.action = std::string("evaluate_") + split_name;
        ev.epoch = epoch;
        ev.model_version = version;
        ev.members = ids_of(dataset, split_indices);
        ev.value = mean_loss(params, dataset, split_indices);
        store->record_training_action(std::move(ev));
      };
      evaluate(roles.validation, "validation");
      evaluate(roles.test, "test");

      trace::TrainingActionPayload end;
      end.action = "epoch_end";
      end.epoch = epoch;
      end.model_version = version;
      end.cost_ms = clock.cost_ms(epoch_started);
      end.value = val_loss;
      store->record_training_action(std::move(end));
    }
    if (on_epoch_end) on_epoch_end(epoch);
  }

  result.selected = select_checkpoints(result.val_losses, config.num_checkpoints, dataset.classes);
  if (store != nullptr) {
    for (int e : result.selected) {
      trace::TrainingActionPayload saved;
      saved.action = "checkpoint_saved";
      saved.epoch = e;
      saved.model_version = model_version_for(store, "epoch-" + std::to_string(e));
      saved.value = result.val_losses[static_cast<std::size_t>(e)];
      store->record_training_action(std::move(saved));
    }
  }
  result.final_params = std::move(params);
  return result;
}

std::vector<int> select_checkpoints(std::span<const double> val_losses, std::size_t k, std::size_t classes) {
  const double baseline = std::log(static_cast<double>(classes));
  std::vector<std::pair<int, double>> eligible;  // (epoch, drop)
  for (std::size_t e = 1; e < val_losses.size(); ++e) {
    const double drop = val_losses[e - 1] - val_losses[e];
    if (val_losses[e] < baseline && drop > 0.0) eligible.emplace_back(static_cast<int>(e), drop);
  }
  std::stable_sort(eligible.begin(), eligible.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (eligible.size() > k) eligible.resize(k);
  std::vector<int> out;
  for (const auto& [e, _] : eligible) out.push_back(e);
  std::sort(out.begin(), out.end());
  return out;
}

int predict(const ModelParams& params, const Sample& sample, trace::EventStore* store,
            const std::string& model_version) {
  if (sample.features.size() != params.dim) {
    throw Error(ErrorCode::DimensionMismatch, "sample does not match model dimension");
  }
  auto z = logits(params, sample.features);
  int best = 0;
  for (std::size_t k = 1; k < z.size(); ++k) {
    if (z[k] > z[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  if (store != nullptr) {
    trace::TrainingActionPayload act;
    act.action = "prediction";
    act.model_version = model_version_for(store, model_version);
    act.predicted_label = best;
    store->record_training_action(std::move(act), hash_id(sample.subject_raw_id));
  }
  return best;
}

}  // namespace fgtrac::train
