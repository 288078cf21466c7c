#include "geomcarve/grid.hpp"

#include <algorithm>

namespace geomcarve {

std::size_t ValidMask::count() const {
  return static_cast<std::size_t>(std::count_if(flags.begin(), flags.end(),
                                                [](std::uint8_t f) { return f != 0; }));
}

double pairwise_sum(std::span<const double> terms) {
  constexpr std::size_t kBlock = 8;
  if (terms.size() <= kBlock) {
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
  }
  const std::size_t half = terms.size() / 2;
  return pairwise_sum(terms.first(half)) + pairwise_sum(terms.subspan(half));
}

}  // namespace geomcarve
