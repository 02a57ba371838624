#pragma once

// Serial reference implementations of the parallel kernels. They are kept in
// the library so tests and the benchmark can compare against them; the
// pipeline itself never calls them.

#include <span>
#include <string>
#include <vector>

#include "fgtrac/influence.hpp"
#include "fgtrac/merkle.hpp"

namespace fgtrac::reference {

/// Straight-line Merkle build: one digest at a time, no threading.
merkle::MerkleTree merkle_build_serial(std::span<const std::string> leaves);

/// Influence scores of every candidate on `target`, recomputing every
/// gradient per pair through influence_cp. No cache, no threading.
std::vector<double> influence_scores_serial(const train::Sample& target,
                                            std::span<const train::Sample> candidates,
                                            std::span<const train::Checkpoint> checkpoints);

}  // namespace fgtrac::reference
