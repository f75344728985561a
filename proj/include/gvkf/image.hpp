// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace gvkf {

/// Row-major double-precision image with 1 (gray) or 3 (rgb) channels. Color values are
/// nominally in [0,1]; 8-bit quantisation happens only when writing PPM.
class ImageBuffer {
  public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels, double fill = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }

    double &at(int x, int y, int c) { return data_[index(x, y, c)]; }
    double at(int x, int y, int c) const { return data_[index(x, y, c)]; }

    std::vector<double> &data() { return data_; }
    const std::vector<double> &data() const { return data_; }

    bool same_shape(const ImageBuffer &other) const {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

  private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels_) +
               static_cast<std::size_t>(c);
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

/// Binary P6, maxval 255. Values are clamped to [0,1] and rounded.
void write_ppm(const ImageBuffer &img, const std::filesystem::path &path);
/// Reads P6 (maxval <= 255) into an rgb image scaled to [0,1].
ImageBuffer read_ppm(const std::filesystem::path &path);

/// Grayscale PFM ("Pf"), little-endian (scale -1.0), rows stored bottom-up.
void write_pfm(const ImageBuffer &img, const std::filesystem::path &path);
ImageBuffer read_pfm(const std::filesystem::path &path);

} // namespace gvkf
