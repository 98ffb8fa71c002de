#include "lsc/grids.hpp"

#include <cmath>
#include <string>

namespace lsc {

LabelGridSet make_label_grids(const ImageFrame& frame, int n_scales) {
  LabelGridSet set;
  set.frame = frame;
  set.scales.reserve(n_scales);
  for (int s = 0; s < n_scales; ++s) {
    const auto shape = grid_shape(frame.padded_width, frame.padded_height, s);
    set.scales.emplace_back(shape.width, shape.height, 0);
  }
  return set;
}

ScoreGrid::ScoreGrid(int channels, int width, int height, double fill)
    : channels_(channels), width_(width), height_(height),
      values_(static_cast<std::size_t>(channels) * width * height, fill) {
  if (channels <= 0 || width < 0 || height < 0) throw Error("invalid score grid shape");
}

int ScoreGrid::argmax(int x, int y) const {
  int best = 0;
  double best_value = at(0, x, y);
  for (int c = 1; c < channels_; ++c) {
    const double v = at(c, x, y);
    if (v > best_value) {
      best = c;
      best_value = v;
    }
  }
  return best;
}

void softmax_channels(ScoreGrid& logits) {
  const std::size_t plane = logits.plane();
  auto& v = logits.values();
  const int channels = logits.channels();
  for (std::size_t i = 0; i < plane; ++i) {
    double peak = v[i];
    for (int c = 1; c < channels; ++c) peak = std::max(peak, v[c * plane + i]);
    double sum = 0.0;
    for (int c = 0; c < channels; ++c) {
      double& e = v[c * plane + i];
      e = std::exp(e - peak);
      sum += e;
    }
    for (int c = 0; c < channels; ++c) v[c * plane + i] /= sum;
  }
}

bool is_normalized(const ScoreGridSet& scores, double tol) {
  for (const auto& grid : scores) {
    const std::size_t plane = grid.plane();
    for (std::size_t i = 0; i < plane; ++i) {
      double sum = 0.0;
      for (int c = 0; c < grid.channels(); ++c) {
        const double p = grid.values()[c * plane + i];
        if (!(p >= 0.0 && p <= 1.0)) return false;
        sum += p;
      }
      if (std::abs(sum - 1.0) > tol) return false;
    }
  }
  return true;
}

ScoreGridSet one_hot_scores(const LabelGridSet& labels, int n_boxes) {
  ScoreGridSet out;
  out.reserve(labels.scales.size());
  for (const auto& grid : labels.scales) {
    ScoreGrid g(n_boxes + 1, grid.width(), grid.height(), 0.0);
    for (int y = 0; y < grid.height(); ++y) {
      for (int x = 0; x < grid.width(); ++x) {
        const int cls = grid.at(x, y);
        if (cls < 0 || cls > n_boxes) throw Error("label outside [0, n_boxes]");
        g.at(cls, x, y) = 1.0;
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

LabelGridSet argmax_labels(const ScoreGridSet& scores, const ImageFrame& frame) {
  LabelGridSet set;
  set.frame = frame;
  for (const auto& g : scores) {
    LabelGrid labels(g.width(), g.height(), 0);
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) labels.at(x, y) = g.argmax(x, y);
    }
    set.scales.push_back(std::move(labels));
  }
  return set;
}

ClassWeightTable::ClassWeightTable(int n_scales, int n_boxes, double fill)
    : n_scales_(n_scales), n_boxes_(n_boxes),
      values_(static_cast<std::size_t>(n_scales) * (n_boxes + 1), fill) {
  if (n_scales < 1 || n_boxes < 1) throw Error("weight table needs at least one scale and box");
}

std::size_t ClassWeightTable::index(int scale, int cls) const {
  if (scale < 0 || scale >= n_scales_ || cls < 0 || cls > n_boxes_) {
    throw Error("weight index (" + std::to_string(scale) + ", " + std::to_string(cls) +
                ") out of range");
  }
  return static_cast<std::size_t>(scale) * (n_boxes_ + 1) + cls;
}

}  // namespace lsc
