#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "luxsched/imaging.hpp"

namespace luxsched {

/// Ordered set of realizable light fractions. Non-empty, strictly increasing, within [0, 1].
class IntensityGrid {
 public:
  IntensityGrid();  // 0.0, 0.1, ..., 1.0
  explicit IntensityGrid(std::vector<double> levels);

  /// Levels start, start+step, ... up to stop inclusive (within 1e-9).
  static IntensityGrid from_range(double start, double stop, double step);

  std::size_t size() const { return levels_.size(); }
  double operator[](std::size_t i) const { return levels_[i]; }
  const std::vector<double>& levels() const { return levels_; }

  friend bool operator==(const IntensityGrid&, const IntensityGrid&) = default;

 private:
  std::vector<double> levels_;
};

/// Light power draw, linear in the commanded fraction.
struct PowerModel {
  double slope = 21.3636;     // W per unit intensity
  double intercept = 9.5455;  // W

  double operator()(double k) const { return slope * k + intercept; }
};

/// Weights of the per-image utility penalty.
struct PenaltyWeights {
  double saturated = 0.4;
  double dark = 0.4;
  double texture = 0.2;
};

/// Grid-cell saliency matcher.
struct MatcherConfig {
  int cells = 16;                       // G: the image is split into G x G cells
  double gradient_threshold = 0.02;     // minimum luminance gradient of a salient point
  double max_saturated_fraction = 0.5;  // cells above this are unusable
  double max_dark_fraction = 0.5;
};

struct EnergyModel {
  double lambda_d = 1.0;
  double lambda_p = 0.02;
  double lambda_m = 1.0;
  double lambda_s = 0.1;
  PowerModel power;
  IntensityGrid grid;
  PenaltyWeights penalty;
  MatcherConfig matcher;

  /// Throws ValidationError on negative or non-finite weights.
  void validate() const;
};

double power(const EnergyModel& model, double k);

/// Image-utility penalty in [0, 1]: saturation, darkness and missing texture.
double image_utility_penalty(const LuminanceStats& stats, const PenaltyWeights& weights = {});

/// Which of the G x G cells of a frame hold a salient point.
class SaliencyMask {
 public:
  SaliencyMask() = default;
  explicit SaliencyMask(int cells);

  int cells() const { return cells_; }
  void set(int cx, int cy);
  bool test(int cx, int cy) const;
  std::size_t count() const;
  /// Number of cells salient in both masks.
  std::size_t overlap(const SaliencyMask& other) const;

 private:
  int cells_ = 0;
  std::vector<std::uint64_t> bits_;
};

/// 3x3 box filter with edge clamping.
ScalarMap box_blur3(const ScalarMap& src);

/// Salient points are found on the 3x3 box-smoothed luminance: a pixel is
/// salient when its gradient magnitude exceeds the threshold and is not
/// smaller than any of its 8 neighbours. A cell is salient
/// when it holds a salient point and is neither mostly saturated nor mostly dark.
SaliencyMask detect_salient_cells(const LinearImage& frame, const MatcherConfig& config = {});

/// Fraction of the G x G cells salient in both frames; symmetric, in [0, 1].
double matching_score(const LinearImage& frame_a, const LinearImage& frame_b,
                      const MatcherConfig& config = {});

/// Energy terms of a chain: unary U[t][k] and pairwise V[t][k][l], where k is
/// the level at frame t and l the level at frame t + 1.
class CostTensors {
 public:
  CostTensors() = default;
  CostTensors(IntensityGrid grid, std::size_t frames, std::vector<double> unary,
              std::vector<double> pairwise);

  std::size_t frames() const { return frames_; }
  std::size_t levels() const { return grid_.size(); }
  const IntensityGrid& grid() const { return grid_; }

  double unary(std::size_t t, std::size_t k) const { return unary_[t * levels() + k]; }
  double pairwise(std::size_t t, std::size_t k, std::size_t l) const {
    return pairwise_[(t * levels() + k) * levels() + l];
  }
  const std::vector<double>& unary_values() const { return unary_; }
  const std::vector<double>& pairwise_values() const { return pairwise_; }

  /// True when every entry is finite.
  bool finite() const;

  friend bool operator==(const CostTensors&, const CostTensors&) = default;

 private:
  IntensityGrid grid_;
  std::size_t frames_ = 0;
  std::vector<double> unary_;
  std::vector<double> pairwise_;
};

/// Weight-free potentials: D[t][k] and M[t][k][l]. Splitting them from the
/// weights lets callers inject external matcher output or re-weight cheaply.
struct PotentialInputs {
  std::size_t frames = 0;
  std::size_t levels = 0;
  std::vector<double> penalty;  // frames * levels
  std::vector<double> match;    // (frames - 1) * levels * levels
};

/// Observation at frame t under grid level k (relit and clipped). Called
/// concurrently, so it must be thread-safe.
using FrameSource = std::function<LinearImage(std::size_t t, std::size_t k)>;

/// Evaluates D and M for every frame and level pair. Each (t, k) frame is
/// rendered once; its saliency mask is cached so M costs O(G^2) per pair.
PotentialInputs compute_potentials(const EnergyModel& model, std::size_t frames, const FrameSource& source);

CostTensors build_cost_tensors(const EnergyModel& model, const PotentialInputs& potentials);
CostTensors build_cost_tensors(const EnergyModel& model, std::size_t frames, const FrameSource& source);
/// frames[t][k] is the observation at time t under level k; must be rectangular.
CostTensors build_cost_tensors(const EnergyModel& model,
                               const std::vector<std::vector<LinearImage>>& frames);

namespace cost_io {

/// Writes `manifest` plus <stem>.unary.bin and <stem>.pairwise.bin (little-endian float64,
/// t-major then k then l) next to it.
void save(const std::filesystem::path& manifest, const CostTensors& costs);
CostTensors load(const std::filesystem::path& manifest);

}  // namespace cost_io

namespace weights_io {

/// {"lambda_d", "lambda_p", "lambda_m", "lambda_s", "grid"}; missing keys keep
/// the defaults of `base`.
EnergyModel load(const std::filesystem::path& path, const EnergyModel& base = {});
void save(const std::filesystem::path& path, const EnergyModel& model);

}  // namespace weights_io

}  // namespace luxsched
