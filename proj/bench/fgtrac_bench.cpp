// Parallel kernels against their serial references.
//
//   fgtrac_bench --benchmark_filter=Merkle
//   OMP_NUM_THREADS=8 fgtrac_bench

#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "fgtrac/influence.hpp"
#include "fgtrac/merkle.hpp"
#include "fgtrac/reference.hpp"
#include "fgtrac/tracelog.hpp"

namespace {

using namespace fgtrac;

std::vector<std::string> event_lines(std::size_t n) {
  std::vector<std::string> lines;
  lines.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    trace::TraceEvent e;
    e.seq = i;
    e.timestamp_ms = static_cast<std::int64_t>(i);
    e.run_id = "bench";
    e.subject = hash_id("subj-" + std::to_string(i));
    e.payload = trace::TrainingRolePayload{trace::Role::Train};
    lines.push_back(trace::canonical_serialize(e));
  }
  return lines;
}

void BM_MerkleParallel(benchmark::State& state) {
  const auto lines = event_lines(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(merkle::build(lines).root());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MerkleSerial(benchmark::State& state) {
  const auto lines = event_lines(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::merkle_build_serial(lines).root());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct InfluenceSetup {
  std::vector<train::Checkpoint> checkpoints;
  std::vector<train::Sample> candidates;
  std::vector<train::Sample> targets;

  InfluenceSetup(std::size_t n, std::size_t t) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 0.5);
    const std::size_t classes = 10, dim = 64;
    for (int c = 0; c < 3; ++c) {
      auto p = train::ModelParams::zeros(classes, dim);
      for (auto& w : p.weights) w = g(rng);
      for (auto& b : p.bias) b = g(rng);
      checkpoints.push_back({"epoch-" + std::to_string(c + 1), c + 1, std::move(p)});
    }
    auto sample = [&](const std::string& id) {
      train::Sample s{id, std::vector<double>(dim), static_cast<int>(rng() % classes)};
      for (auto& x : s.features) x = g(rng);
      return s;
    };
    for (std::size_t i = 0; i < n; ++i) candidates.push_back(sample("c-" + std::to_string(i)));
    for (std::size_t i = 0; i < t; ++i) targets.push_back(sample("t-" + std::to_string(i)));
  }
};

// Args: candidates, targets. One gradient cache is shared by all targets of
// an iteration, as in the pipeline's query set.
void BM_InfluenceParallel(benchmark::State& state) {
  const InfluenceSetup s(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    influence::GradientCache cache;
    for (const auto& t : s.targets) {
      benchmark::DoNotOptimize(influence::influence_profile(t, s.candidates, s.checkpoints, nullptr, cache));
    }
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

void BM_InfluenceSerial(benchmark::State& state) {
  const InfluenceSetup s(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    for (const auto& t : s.targets) {
      benchmark::DoNotOptimize(reference::influence_scores_serial(t, s.candidates, s.checkpoints));
    }
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

BENCHMARK(BM_MerkleParallel)->RangeMultiplier(8)->Range(64, 1 << 18)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MerkleSerial)->RangeMultiplier(8)->Range(64, 1 << 18)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_InfluenceParallel)
    ->ArgsProduct({{256, 1024, 4096}, {1, 5, 20}})
    ->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_InfluenceSerial)
    ->ArgsProduct({{256, 1024, 4096}, {1, 5, 20}})
    ->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
