#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace attnshap {

/// Cell arrangement for a heatmap: a 1-D strip for token sequences or a
/// rows-by-cols grid for image patches.
struct HeatmapLayout {
  std::size_t rows = 1;
  std::size_t cols = 0;
  std::size_t cell_px = 16;
};

/// Writes a binary PPM with one cell per value on a symmetric diverging
/// scale: the largest magnitude saturates (negative blue, positive red) and
/// zero maps exactly to the white midpoint. The scale is relative per image;
/// an all-zero input produces a uniform midpoint image.
void emit_heatmap(const std::vector<double>& values, const HeatmapLayout& layout,
                  const std::string& path);

}  // namespace attnshap
