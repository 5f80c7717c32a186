#include "attnshap/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "attnshap/serialize.hpp"

namespace attnshap {

void emit_heatmap(const std::vector<double>& values, const HeatmapLayout& layout,
                  const std::string& path) {
  if (layout.rows == 0 || layout.cols == 0 || layout.cell_px == 0) {
    throw std::invalid_argument("emit_heatmap: empty layout");
  }
  if (values.size() != layout.rows * layout.cols) {
    throw std::invalid_argument("emit_heatmap: " + std::to_string(values.size()) +
                                " values do not fill a " + std::to_string(layout.rows) +
                                "x" + std::to_string(layout.cols) + " layout");
  }
  double peak = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("emit_heatmap: non-finite value");
    }
    peak = std::max(peak, std::fabs(v));
  }

  const std::size_t w = layout.cols * layout.cell_px;
  const std::size_t h = layout.rows * layout.cell_px;
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  out.reserve(out.size() + 3 * w * h);

  auto cell_color = [&](double v, unsigned char rgb[3]) {
    double t = peak > 0.0 ? v / peak : 0.0;  // [-1, 1], 0 at the midpoint
    double r = 255.0, g = 255.0, b = 255.0;
    if (t > 0.0) {
      g = 255.0 * (1.0 - t);
      b = g;
    } else if (t < 0.0) {
      r = 255.0 * (1.0 + t);
      g = r;
    }
    rgb[0] = static_cast<unsigned char>(std::lround(r));
    rgb[1] = static_cast<unsigned char>(std::lround(g));
    rgb[2] = static_cast<unsigned char>(std::lround(b));
  };

  for (std::size_t py = 0; py < h; ++py) {
    std::size_t cell_row = py / layout.cell_px;
    for (std::size_t px = 0; px < w; ++px) {
      std::size_t cell_col = px / layout.cell_px;
      unsigned char rgb[3];
      cell_color(values[cell_row * layout.cols + cell_col], rgb);
      out.push_back(static_cast<char>(rgb[0]));
      out.push_back(static_cast<char>(rgb[1]));
      out.push_back(static_cast<char>(rgb[2]));
    }
  }
  write_text_file(path, out);
}

}  // namespace attnshap
