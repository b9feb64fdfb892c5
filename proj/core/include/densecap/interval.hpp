#pragma once

#include <compare>

namespace densecap {

// Closed segment interval [start, end], measured in whole segments.
struct Interval {
  int start = 0;
  int end = 0;

  int length() const noexcept { return end - start + 1; }
  bool well_formed() const noexcept { return start >= 0 && start <= end; }
  auto operator<=>(const Interval&) const = default;
};

// |a ∩ b| / |a ∪ b| with segment-count measure. Throws std::invalid_argument
// for a malformed interval.
double tiou(Interval a, Interval b);

}  // namespace densecap
