#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lsc/refnet/tensor.hpp"
#include "lsc/types.hpp"

namespace lsc::io {

/// Reads binary PPM (P6) or PGM (P5), 8-bit, into a (3, h, w) tensor in [0, 1].
/// Grey images are replicated to three channels.
nn::Tensor read_pnm(const std::filesystem::path& path);
nn::Tensor decode_pnm(const std::string& bytes, const std::string& source = "<image>");

/// Writes a 1- or 3-channel tensor (values clamped to [0, 1]) as binary PNM.
std::string encode_pnm(const nn::Tensor& image);
void write_pnm(const std::filesystem::path& path, const nn::Tensor& image);

/// Looks for <dir>/<image_id>.ppm then .pgm.
std::filesystem::path find_image(const std::filesystem::path& dir, const std::string& image_id);

/// Draws one-pixel box outlines onto a 3-channel image.
void draw_boxes(nn::Tensor& image, const std::vector<Detection>& detections, double r = 1.0, double g = 0.1,
                double b = 0.1);

}  // namespace lsc::io
