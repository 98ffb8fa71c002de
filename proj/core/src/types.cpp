#include "lsc/types.hpp"

#include <algorithm>
#include <cmath>

namespace lsc {

void PointAnnotationSet::validate() const {
  if (width <= 0 || height <= 0) {
    throw Error("image '" + image_id + "': width and height must be positive");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 || p.x >= width ||
        p.y >= height) {
      throw Error("image '" + image_id + "': point " + std::to_string(i) +
                  " lies outside the image bounds");
    }
  }
}

double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

ImageFrame ImageFrame::padded_to(int width, int height, int multiple) {
  if (width <= 0 || height <= 0) throw Error("image dimensions must be positive");
  if (multiple <= 0) throw Error("padding multiple must be positive");
  ImageFrame f;
  f.width = width;
  f.height = height;
  f.padded_width = (width + multiple - 1) / multiple * multiple;
  f.padded_height = (height + multiple - 1) / multiple * multiple;
  f.offset_x = (f.padded_width - width) / 2;
  f.offset_y = (f.padded_height - height) / 2;
  return f;
}

}  // namespace lsc
