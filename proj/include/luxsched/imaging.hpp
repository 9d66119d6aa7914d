#pragma once

#include <array>
#include <filesystem>
#include <limits>

#include "luxsched/raster.hpp"

namespace luxsched {

/// Co-located illumination decomposition of one view: I(k) = A + k * (S ⊗ C).
///
/// `light_map` carries all of the light's magnitude; `light_color` is a
/// chromaticity with non-negative entries summing to one.
struct Decomposition {
  LinearImage ambient;
  ScalarMap light_map;
  std::array<double, 3> light_color{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  int width() const { return ambient.width(); }
  int height() const { return ambient.height(); }

  /// Throws InvalidDecompositionError when shapes disagree, the light map is
  /// negative somewhere, or the color is not a normalized non-negative vector.
  void validate() const;
};

/// Pre-clip radiance of the scene with the co-located light at fraction `k`.
/// k == 0 returns the ambient image bit-for-bit.
LinearImage relight(const Decomposition& d, double k);

/// Per-channel clamp to [0, 1]: a fixed-exposure sensor saturating.
LinearImage clip_sensor(const LinearImage& img);

struct DecomposeOptions {
  /// Pixels with any channel at or above this level in either capture are
  /// treated as clipped and excluded from the light fit. Infinity disables.
  double saturation_level = 1.0;
  /// Relative tolerance for small negative entries of the fitted color
  /// before the fit is rejected as non-physical.
  double negative_tolerance = 1e-9;
};

/// Recovers (A, S, C) from two captures of the same view at light levels k1 != k2.
///
/// The difference (i2 - i1) / (k2 - k1) is exactly S ⊗ C under superposition;
/// S and C come from its best rank-1 approximation over unclipped pixels.
Decomposition decompose_paired(const LinearImage& i1, double k1, const LinearImage& i2, double k2,
                               const DecomposeOptions& options = {});

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// Peak signal-to-noise ratio with peak 1.0. Identical images give kInfinitePsnr.
double psnr(const LinearImage& a, const LinearImage& b);

/// Mean SSIM over all 8x8 sliding windows of the luminance channel
/// (mean of R, G, B), uniform window weights, C1 = 0.01^2, C2 = 0.03^2.
double ssim(const LinearImage& a, const LinearImage& b);

inline constexpr int kSsimWindow = 8;

struct FidelityReport {
  double psnr = 0.0;
  double ssim = 0.0;
  /// |mean_lum(pred) - mean_lum(ref)| / mean_lum(ref) * 100
  double delta_luminance_pct = 0.0;
};

FidelityReport fidelity(const LinearImage& predicted, const LinearImage& reference);

struct LuminanceStats {
  double mean_luminance = 0.0;
  double saturated_fraction = 0.0;
  double dark_fraction = 0.0;
  double gradient_energy = 0.0;
};

inline constexpr double kSaturatedLevel = 0.98;
inline constexpr double kDarkLevel = 0.02;
inline constexpr double kGradientNormalizer = 0.5;

/// Summary statistics of a clipped image.
///
/// gradient_energy is the mean forward-difference gradient magnitude of the
/// luminance over the (W-1) x (H-1) interior, divided by 0.5 and clamped to [0, 1].
LuminanceStats luminance_stats(const LinearImage& img);

/// Luminance per pixel, (R + G + B) / 3.
ScalarMap luminance(const LinearImage& img);

/// Forward-difference gradient magnitude of a scalar map. Entries in the last
/// row and column are zero.
ScalarMap gradient_magnitude(const ScalarMap& lum);

/// Fraction of pixels per luminance bin over [0, 1]; values outside are clamped
/// into the end bins. The fractions sum to one.
template <std::size_t Bins>
std::array<double, Bins> luminance_histogram(const LinearImage& img) {
  std::array<std::size_t, Bins> counts{};
  const std::size_t n = img.pixel_count();
  for (std::size_t p = 0; p < n; ++p) {
    const double l = pixel_luminance(img.pixel(p));
    auto bin = static_cast<long>(l * static_cast<double>(Bins));
    if (bin < 0) bin = 0;
    if (bin >= static_cast<long>(Bins)) bin = Bins - 1;
    ++counts[static_cast<std::size_t>(bin)];
  }
  std::array<double, Bins> out{};
  if (n == 0) return out;
  for (std::size_t i = 0; i < Bins; ++i) out[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
  return out;
}

namespace decomposition_io {

/// Writes ambient.pfm, light_map.pfm and light_color.json into `dir`.
void save(const std::filesystem::path& dir, const Decomposition& d);
Decomposition load(const std::filesystem::path& dir);

}  // namespace decomposition_io

}  // namespace luxsched
