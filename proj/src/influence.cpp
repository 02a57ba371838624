#include "fgtrac/influence.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fgtrac/error.hpp"

namespace fgtrac::influence {

namespace fs = std::filesystem;

GradientVector grad_loss(const train::ModelParams& params, const train::Sample& sample) {
  return {train::loss_gradient(params, sample)};
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "gradient lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

namespace {

void check_checkpoints(std::span<const train::Checkpoint> checkpoints) {
  if (checkpoints.empty()) throw Error(ErrorCode::EmptyCheckpointSet, "no checkpoints selected");
  const auto& first = checkpoints.front().params;
  for (const auto& c : checkpoints) {
    if (c.params.classes != first.classes || c.params.dim != first.dim) {
      throw Error(ErrorCode::DimensionMismatch, "checkpoints disagree on model shape");
    }
  }
}

}  // namespace

double influence_cp(const train::Sample& target, const train::Sample& candidate,
                    std::span<const train::Checkpoint> checkpoints) {
  check_checkpoints(checkpoints);
  double total = 0.0;
  for (const auto& c : checkpoints) {
    total += dot(grad_loss(c.params, target).values, grad_loss(c.params, candidate).values);
  }
  return total;
}

std::string checkpoint_set_id(std::span<const train::Checkpoint> checkpoints) {
  std::string id = "epochs";
  for (const auto& c : checkpoints) id += "-" + std::to_string(c.epoch);
  return id;
}

const std::vector<double>* GradientCache::find(std::string_view checkpoint_id,
                                               const PseudonymousId& subject) const {
  auto per = grads_.find(checkpoint_id);
  if (per == grads_.end()) return nullptr;
  auto it = per->second.find(subject);
  return it == per->second.end() ? nullptr : &it->second;
}

void GradientCache::insert(const std::string& checkpoint_id, const PseudonymousId& subject,
                           std::vector<double> grad) {
  grads_[checkpoint_id].insert_or_assign(subject, std::move(grad));
}

std::size_t GradientCache::size() const {
  std::size_t n = 0;
  for (const auto& [id, per] : grads_) n += per.size();
  return n;
}

void GradientCache::fill(std::span<const train::Checkpoint> checkpoints, std::span<const train::Sample> samples) {
  std::vector<PseudonymousId> ids(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) ids[i] = hash_id(samples[i].subject_raw_id);
  fill(checkpoints, samples, ids);
}

void GradientCache::fill(std::span<const train::Checkpoint> checkpoints, std::span<const train::Sample> samples,
                         std::span<const PseudonymousId> ids) {
  if (ids.size() != samples.size()) throw Error(ErrorCode::DimensionMismatch, "one id per sample required");
  for (const auto& c : checkpoints) {
    auto& per = grads_[c.checkpoint_id];
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!per.contains(ids[i])) missing.push_back(i);
    }
    std::vector<std::vector<double>> computed(missing.size());
    const auto n = static_cast<std::ptrdiff_t>(missing.size());
    // Exceptions must not escape an OpenMP region; shapes are checked first.
    for (auto i : missing) train::check_shape(c.params, samples[i]);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t m = 0; m < n; ++m) {
      computed[m] = train::loss_gradient(c.params, samples[missing[m]]);
    }
    for (std::size_t m = 0; m < missing.size(); ++m) per.insert_or_assign(ids[missing[m]], std::move(computed[m]));
  }
}

namespace {

template <typename T>
void put_le(std::ofstream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "spill format assumes a little-endian host");
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get_le(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw Error(ErrorCode::ParseError, "truncated gradient spill file");
  return value;
}

}  // namespace

void GradientCache::write_spill(const fs::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + file.string());
  for (const auto& [id, per] : grads_) {
    for (const auto& [subject, grad] : per) {
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
      out.write(id.data(), static_cast<std::streamsize>(id.size()));
      out.write(reinterpret_cast<const char*>(subject.digest.bytes.data()), kDigestSize);
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(grad.size()));
      for (double v : grad) put_le<double>(out, v);
    }
  }
  if (!out) throw Error(ErrorCode::StorageFailure, "write to " + file.string() + " failed");
}

GradientCache GradientCache::read_spill(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot open " + file.string());
  GradientCache cache;
  while (in.peek() != std::ifstream::traits_type::eof()) {
    const auto id_len = get_le<std::uint32_t>(in);
    std::string id(id_len, '\0');
    in.read(id.data(), id_len);
    PseudonymousId subject;
    in.read(reinterpret_cast<char*>(subject.digest.bytes.data()), kDigestSize);
    if (!in) throw Error(ErrorCode::ParseError, "truncated gradient spill file");
    const auto n = get_le<std::uint32_t>(in);
    std::vector<double> grad(n);
    for (auto& v : grad) v = get_le<double>(in);
    cache.grads_[id].insert_or_assign(subject, std::move(grad));
  }
  return cache;
}

std::vector<InfluenceRecord> influence_profile(const train::Sample& target,
                                               std::span<const train::Sample> train_samples,
                                               std::span<const train::Checkpoint> checkpoints,
                                               trace::EventStore* store, GradientCache& cache) {
  check_checkpoints(checkpoints);
  if (train_samples.empty()) throw Error(ErrorCode::InvalidConfig, "no candidate training samples");

  const auto target_id = hash_id(target.subject_raw_id);
  const std::size_t n = train_samples.size();
  std::vector<PseudonymousId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = hash_id(train_samples[i].subject_raw_id);

  cache.fill(checkpoints, std::span<const train::Sample>(&target, 1), std::span<const PseudonymousId>(&target_id, 1));
  cache.fill(checkpoints, train_samples, ids);

  std::vector<const std::vector<double>*> target_grads;
  for (const auto& c : checkpoints) target_grads.push_back(cache.find(c.checkpoint_id, target_id));

  // Resolve every cache entry up front so the parallel loop only reads.
  std::vector<std::vector<const std::vector<double>*>> cand_grads(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& c : checkpoints) cand_grads[i].push_back(cache.find(c.checkpoint_id, ids[i]));
  }

  std::vector<double> scores(n, 0.0);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < target_grads.size(); ++c) total += dot(*target_grads[c], *cand_grads[i][c]);
    scores[i] = total;
  }

  const std::string set_id = checkpoint_set_id(checkpoints);
  std::vector<InfluenceRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) records.push_back({target_id, ids[i], set_id, scores[i]});
  std::sort(records.begin(), records.end(),
            [](const InfluenceRecord& a, const InfluenceRecord& b) { return a.candidate < b.candidate; });
  if (store != nullptr) {
    for (const auto& r : records) store->record_contribution(r.target, r.candidate, r.checkpoint_set_id, r.score);
  }
  return records;
}

std::vector<InfluenceRecord> influence_profile(const train::Sample& target,
                                               std::span<const train::Sample> train_samples,
                                               std::span<const train::Checkpoint> checkpoints,
                                               trace::EventStore* store) {
  GradientCache cache;
  return influence_profile(target, train_samples, checkpoints, store, cache);
}

ContributionSummary summarize(std::span<const InfluenceRecord> records, const PseudonymousId& subject,
                              std::size_t top_n) {
  ContributionSummary s;
  s.subject = subject;
  std::vector<std::pair<PseudonymousId, double>> positives;
  for (const auto& r : records) {
    ++s.records;
    s.net_score += r.score;
    const PseudonymousId& peer = r.target == subject ? r.candidate : r.target;
    if (r.score > 0.0) {
      ++s.positive_count;
      positives.emplace_back(peer, r.score);
    } else if (r.score < 0.0) {
      ++s.negative_count;
    }
  }
  std::sort(positives.begin(), positives.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (positives.size() > top_n) positives.resize(top_n);
  s.top_positive = std::move(positives);
  return s;
}

}  // namespace fgtrac::influence
