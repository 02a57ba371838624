#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fgtrac/event_store.hpp"
#include "fgtrac/model.hpp"

namespace fgtrac::train {

struct Dataset {
  std::vector<Sample> samples;
  std::size_t dim = 0;
  std::size_t classes = 0;
};

struct DatasetConfig {
  std::uint64_t seed = 7;
  std::size_t n_per_class = 40;
  std::size_t classes = 3;
  std::size_t dim = 4;
  double class_separation = 10.0;  // in units of the blob standard deviation (1)
};

/// Isotropic unit-variance Gaussian blobs. Class means sit on a circle in the
/// first two coordinates, adjacent means exactly `class_separation` apart.
/// Samples are class-interleaved; raw ids are "subj-<index>".
/// Throws InvalidConfig.
Dataset make_dataset(const DatasetConfig& config);

struct RoleAssignment {
  std::vector<trace::Role> roles;  // per dataset index
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Deterministic shuffled split. With a store, logs every UserMapping, then
/// every TrainingRole, in dataset order. Throws InvalidRatios / EmptySplit.
RoleAssignment split(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed,
                     trace::EventStore* store);

struct Checkpoint {
  std::string checkpoint_id;
  int epoch = 0;
  ModelParams params;
};

/// Contiguous feature block reported as one modality in attention logs.
struct ModalityGroup {
  std::string name;
  std::vector<std::size_t> dims;
};

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 16;
  double lr = 0.1;
  std::uint64_t seed = 7;
  std::size_t num_checkpoints = 3;
  std::vector<ModalityGroup> modalities;
};

struct TrainRunResult {
  ModelParams final_params;
  std::vector<Checkpoint> checkpoints;  // one per epoch, end-of-epoch state
  std::vector<double> val_losses;       // per epoch, end-of-epoch state
  std::vector<int> selected;            // ascending epoch indices (the set C)
};

/// Mean cross-entropy over `indices`.
double mean_loss(const ModelParams& params, const Dataset& dataset, std::span<const std::size_t> indices);

/// Share of |W_kj x_j| mass falling in each modality's dims; uniform when the
/// model has no mass (e.g. zero init). Reads params only.
std::vector<trace::ModalityWeight> modality_attention(const ModelParams& params, const Sample& sample,
                                                      std::span<const ModalityGroup> groups);

/// Mini-batch SGD from zero init. Logging goes to `store` when non-null and
/// never touches the numeric path. `on_epoch_end(e)` runs after epoch e's
/// events are appended (the pipeline seals and commits there).
/// Throws InvalidConfig.
TrainRunResult train(const Dataset& dataset, const RoleAssignment& roles, const TrainConfig& config,
                     trace::EventStore* store, const std::function<void(int)>& on_epoch_end = {});

/// Epochs e >= 1 with val_losses[e] < ln(classes) and a positive drop from
/// e-1; the k largest drops, earlier epoch first on ties. Sorted ascending.
std::vector<int> select_checkpoints(std::span<const double> val_losses, std::size_t k, std::size_t classes);

/// Argmax of the logits, lowest class on ties. Logs a "prediction" action
/// for the sample's subject when `store` is non-null.
int predict(const ModelParams& params, const Sample& sample, trace::EventStore* store,
            const std::string& model_version = "final");

std::string model_version_for(const trace::EventStore* store, const std::string& tag);

}  // namespace fgtrac::train
