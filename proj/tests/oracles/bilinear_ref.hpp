#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

// Plain scalar bilinear interpolation on a [h,w,c] buffer, half-pixel
// (align_corners=false) sampling. Written against raw vectors so it shares
// no code with the tensor op it checks.
namespace oracle {

inline std::vector<double> bilinear_ref(const std::vector<double>& src, std::size_t h,
                                        std::size_t w, std::size_t c, std::size_t out_h,
                                        std::size_t out_w) {
  std::vector<double> dst(out_h * out_w * c);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      double sy = (double(oy) + 0.5) * double(h) / double(out_h) - 0.5;
      double sx = (double(ox) + 0.5) * double(w) / double(out_w) - 0.5;
      sy = std::max(sy, 0.0);
      sx = std::max(sx, 0.0);
      std::size_t y0 = std::min<std::size_t>(std::size_t(sy), h - 1);
      std::size_t x0 = std::min<std::size_t>(std::size_t(sx), w - 1);
      const std::size_t y1 = std::min(y0 + 1, h - 1);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fy = sy - double(y0);
      const double fx = sx - double(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double p00 = src[(y0 * w + x0) * c + ch];
        const double p01 = src[(y0 * w + x1) * c + ch];
        const double p10 = src[(y1 * w + x0) * c + ch];
        const double p11 = src[(y1 * w + x1) * c + ch];
        const double top = p00 + fx * (p01 - p00);
        const double bot = p10 + fx * (p11 - p10);
        dst[(oy * out_w + ox) * c + ch] = top + fy * (bot - top);
      }
    }
  }
  return dst;
}

}  // namespace oracle
