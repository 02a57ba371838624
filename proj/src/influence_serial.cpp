#include "fgtrac/reference.hpp"

namespace fgtrac::reference {

std::vector<double> influence_scores_serial(const train::Sample& target,
                                            std::span<const train::Sample> candidates,
                                            std::span<const train::Checkpoint> checkpoints) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(influence::influence_cp(target, c, checkpoints));
  return scores;
}

}  // namespace fgtrac::reference
