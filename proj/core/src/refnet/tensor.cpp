#include "lsc/refnet/tensor.hpp"

#include <algorithm>

namespace lsc::nn {

Tensor pad_to_frame(const Tensor& image, const ImageFrame& frame) {
  if (image.width() != frame.width || image.height() != frame.height) {
    throw Error("image size does not match its frame");
  }
  Tensor out(Shape{image.channels(), frame.padded_height, frame.padded_width}, 0.0);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < image.height(); ++y) {
      const double* src = image.data() + (static_cast<std::size_t>(c) * image.height() + y) * image.width();
      std::copy(src, src + image.width(), &out.at(c, y + frame.offset_y, frame.offset_x));
    }
  }
  return out;
}

}  // namespace lsc::nn
