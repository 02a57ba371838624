#include "fgtrac/clock.hpp"

namespace fgtrac {

std::int64_t Clock::stamp(std::uint64_t ordinal) const {
  if (fixed_) return static_cast<std::int64_t>(ordinal);
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::int64_t Clock::cost_ms(time_point started) const {
  if (fixed_) return 0;
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now() - started).count();
}

}  // namespace fgtrac
