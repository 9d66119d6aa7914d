#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "luxsched/error.hpp"

namespace luxsched {

// Row-major, channel-interleaved raster of real values. Row 0 is the top row.
template <int Channels>
class Raster {
 public:
  static constexpr int kChannels = Channels;

  Raster() = default;
  Raster(int width, int height, double fill = 0.0)
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}
  Raster(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height)) {
      throw DimensionMismatchError("raster data length does not match width*height*channels");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  double* pixel(std::size_t p) { return data_.data() + p * Channels; }
  const double* pixel(std::size_t p) const { return data_.data() + p * Channels; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Raster& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  template <int Other>
  bool same_extent(const Raster<Other>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width < 0 || height < 0) throw ValidationError("raster dimensions must be non-negative");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * Channels;
  }
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// H x W x 3 scene-linear radiance.
using LinearImage = Raster<3>;
/// H x W scalar field, e.g. the light contribution map.
using ScalarMap = Raster<1>;

inline double pixel_luminance(const double* rgb) { return (rgb[0] + rgb[1] + rgb[2]) / 3.0; }

}  // namespace luxsched
