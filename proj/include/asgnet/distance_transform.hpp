#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace asg {

/// Exact Euclidean distance from every pixel to the nearest foreground pixel.
///
/// `nearest` holds the flat index (y * w + x) of that pixel, or -1 when the
/// mask has no foreground. Among equidistant candidates the one with the
/// smallest column wins, then the smallest row.
struct DistanceField {
  int h = 0;
  int w = 0;
  std::vector<double> distance;
  std::vector<int> nearest;
};

/// Two separable passes of 1-D lower envelopes of parabolas (columns, then
/// rows). Breakpoints are compared as exact integer fractions.
DistanceField distance_to_foreground(std::span<const std::uint8_t> mask, int h, int w);

}  // namespace asg
