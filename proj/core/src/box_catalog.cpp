#include "lsc/box_catalog.hpp"

#include <string>

namespace lsc {

int stride_of(int scale) {
  if (scale < 0 || scale >= kMaxScales) {
    throw Error("scale index " + std::to_string(scale) + " outside [0, " +
                std::to_string(kMaxScales) + ")");
  }
  return kCoarsestStride >> scale;
}

BoxCatalog BoxCatalog::build(int n_scales, int n_boxes, std::vector<int> gamma) {
  if (n_scales < 1) throw Error("n_scales must be at least 1");
  if (n_scales > kMaxScales) {
    throw Error("n_scales must be at most " + std::to_string(kMaxScales));
  }
  if (n_boxes < 1) throw Error("n_boxes must be at least 1");
  if (static_cast<int>(gamma.size()) != n_scales) {
    throw Error("gamma must hold one increment per scale");
  }
  for (int g : gamma) {
    if (g < 1) throw Error("gamma increments must be >= 1");
  }

  BoxCatalog c;
  c.n_scales_ = n_scales;
  c.n_boxes_ = n_boxes;
  c.gamma_ = std::move(gamma);
  c.beta_.assign(static_cast<std::size_t>(n_scales) * n_boxes, 0);

  // Finest scale first; every coarser scale continues from it.
  for (int s = n_scales - 1; s >= 0; --s) {
    for (int b = 1; b <= n_boxes; ++b) {
      int side = 0;
      if (s == n_scales - 1) {
        side = 1 + (b - 1) * c.gamma_[s];
      } else {
        side = c.beta_[static_cast<std::size_t>(s + 1) * n_boxes + (n_boxes - 1)] + b * c.gamma_[s];
      }
      c.beta_[static_cast<std::size_t>(s) * n_boxes + (b - 1)] = side;
    }
  }
  return c;
}

int BoxCatalog::beta(int scale, int box) const {
  if (scale < 0 || scale >= n_scales_ || box < 1 || box > n_boxes_) {
    throw Error("box (" + std::to_string(scale) + ", " + std::to_string(box) +
                ") outside the catalog");
  }
  return beta_[static_cast<std::size_t>(scale) * n_boxes_ + (box - 1)];
}

int BoxCatalog::stride(int scale) const {
  if (scale < 0 || scale >= n_scales_) {
    throw Error("scale index " + std::to_string(scale) + " outside the catalog");
  }
  return stride_of(scale);
}

GridShape grid_shape(int width, int height, int scale) {
  const int stride = stride_of(scale);
  if (width < kCoarsestStride || height < kCoarsestStride) {
    throw Error("image " + std::to_string(width) + "x" + std::to_string(height) +
                " is smaller than the coarsest stride " + std::to_string(kCoarsestStride));
  }
  return {(width + stride - 1) / stride, (height + stride - 1) / stride};
}

}  // namespace lsc
