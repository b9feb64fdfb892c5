#include "densecap/interval.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace densecap {

double tiou(Interval a, Interval b) {
  if (!a.well_formed() || !b.well_formed()) {
    throw std::invalid_argument("tiou: malformed interval [" + std::to_string(a.start) + "," +
                                std::to_string(a.end) + "] / [" + std::to_string(b.start) + "," +
                                std::to_string(b.end) + "]");
  }
  const int inter = std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start) + 1);
  const int uni = a.length() + b.length() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace densecap
