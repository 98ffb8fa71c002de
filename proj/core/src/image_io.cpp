#include "lsc/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "lsc/serialization.hpp"

namespace lsc::io {
namespace fs = std::filesystem;

namespace {

class HeaderReader {
public:
  HeaderReader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  int next_int() {
    skip_space();
    if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      throw Error(source_ + ": malformed PNM header");
    }
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1 << 20) throw Error(source_ + ": PNM dimension too large");
    }
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() const { return pos_ + 1; }

private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 2;
};

}  // namespace

nn::Tensor decode_pnm(const std::string& bytes, const std::string& source) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw Error(source + ": only binary PGM (P5) and PPM (P6) are supported");
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  HeaderReader header(bytes, source);
  const int width = header.next_int();
  const int height = header.next_int();
  const int maxval = header.next_int();
  if (width <= 0 || height <= 0) throw Error(source + ": empty image");
  if (maxval <= 0 || maxval > 255) throw Error(source + ": only 8-bit PNM is supported");
  const std::size_t start = header.raster_start();
  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() < start + need) throw Error(source + ": truncated raster");

  nn::Tensor out(nn::Shape{3, height, width});
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t px = start + (static_cast<std::size_t>(y) * width + x) * channels;
      for (int c = 0; c < 3; ++c) {
        const auto byte = static_cast<unsigned char>(bytes[px + (channels == 3 ? c : 0)]);
        out.at(c, y, x) = static_cast<double>(byte) / maxval;
      }
    }
  }
  return out;
}

nn::Tensor read_pnm(const fs::path& path) { return decode_pnm(read_file(path), path.string()); }

std::string encode_pnm(const nn::Tensor& image) {
  const int channels = image.channels();
  if (channels != 1 && channels != 3) throw Error("PNM output needs 1 or 3 channels");
  std::string out = std::string(channels == 3 ? "P6" : "P5") + "\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + image.shape().numel());
  std::size_t k = header;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < channels; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        out[k++] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
    }
  }
  return out;
}

void write_pnm(const fs::path& path, const nn::Tensor& image) { write_file_atomic(path, encode_pnm(image)); }

fs::path find_image(const fs::path& dir, const std::string& image_id) {
  for (const char* ext : {".ppm", ".pgm"}) {
    fs::path p = dir / (image_id + ext);
    if (fs::exists(p)) return p;
  }
  throw Error("no image for '" + image_id + "' in '" + dir.string() + "'");
}

void draw_boxes(nn::Tensor& image, const std::vector<Detection>& detections, double r, double g, double b) {
  if (image.channels() != 3) throw Error("overlay needs a 3-channel image");
  const double color[3] = {r, g, b};
  const auto plot = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= image.width() || y >= image.height()) return;
    for (int c = 0; c < 3; ++c) image.at(c, y, x) = color[c];
  };
  for (const auto& d : detections) {
    const Box box = d.bounds();
    const int x0 = static_cast<int>(std::floor(box.x0));
    const int y0 = static_cast<int>(std::floor(box.y0));
    const int x1 = static_cast<int>(std::ceil(box.x1)) - 1;
    const int y1 = static_cast<int>(std::ceil(box.y1)) - 1;
    for (int x = x0; x <= x1; ++x) {
      plot(x, y0);
      plot(x, y1);
    }
    for (int y = y0; y <= y1; ++y) {
      plot(x0, y);
      plot(x1, y);
    }
  }
}

}  // namespace lsc::io
