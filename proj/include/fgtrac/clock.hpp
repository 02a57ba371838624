#pragma once

#include <chrono>
#include <cstdint>

namespace fgtrac {

// Source of record timestamps. In fixed mode the timestamp of a record is its
// ordinal (event seq or block index) and measured costs are zero, so two runs
// with the same seed produce byte-identical files.
class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;

  static Clock system() { return Clock(false); }
  static Clock fixed() { return Clock(true); }

  bool is_fixed() const { return fixed_; }

  std::int64_t stamp(std::uint64_t ordinal) const;
  time_point start() const { return std::chrono::steady_clock::now(); }
  std::int64_t cost_ms(time_point started) const;

 private:
  explicit Clock(bool fixed) : fixed_(fixed) {}
  bool fixed_;
};

}  // namespace fgtrac
