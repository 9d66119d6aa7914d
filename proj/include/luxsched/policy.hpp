#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "luxsched/energy.hpp"

namespace luxsched {

inline constexpr std::size_t kHistogramBins = 8;
inline constexpr std::size_t kStatFeatures = 4;

/// Policy input: image statistics, a luminance histogram and the previous level.
struct FeatureVector {
  std::array<double, kStatFeatures> stats{};  // mean_luminance, saturated, dark, gradient_energy
  std::array<double, kHistogramBins> histogram{};
  std::vector<double> prev_action;  // one-hot over |K|

  std::vector<double> flatten() const;
};

FeatureVector extract_features(const LinearImage& frame, std::size_t prev_index, std::size_t levels);

inline std::size_t feature_dimension(std::size_t levels) { return kStatFeatures + kHistogramBins + levels; }

/// Which light level the supervision frame at time t is rendered under.
enum class FrameProvenance {
  HoldOver,  // the level the oracle scheduled at t - stride, held across the gap
  Teacher,   // the oracle's own level at t
};

struct SupervisionSample {
  std::size_t sequence = 0;
  std::size_t frame = 0;
  std::size_t stride = 0;
  std::size_t prev_action = 0;
  std::size_t action = 0;
  std::vector<double> features;  // flattened FeatureVector
};

struct SupervisionSet {
  std::size_t levels = 0;
  std::vector<SupervisionSample> samples;

  void append(const SupervisionSet& other);
};

/// One training tuple per stride s and frame t in [s, T): the frame at t seen
/// under the level the oracle used at t - s, labelled with the oracle level at t.
/// Throws ValidationError when a stride is zero or not smaller than T.
SupervisionSet build_supervision(const FrameSource& frames, std::span<const std::size_t> oracle,
                                 std::span<const std::size_t> strides, std::size_t levels,
                                 FrameProvenance provenance = FrameProvenance::HoldOver,
                                 std::size_t sequence_id = 0);

/// Linear softmax classifier, or one tanh hidden layer when `hidden` > 0.
///
/// Parameters are stored layer by layer, each as an (inputs + 1) x outputs
/// row-major block whose last row is the bias.
struct PolicyModel {
  IntensityGrid grid;
  std::vector<std::size_t> feature_index;  // raw dimensions kept after dropping constant ones
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  std::size_t hidden = 0;
  std::vector<double> weights;

  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double loss = 0.0;

  std::size_t inputs() const { return feature_index.size(); }
  std::size_t outputs() const { return grid.size(); }

  friend bool operator==(const PolicyModel&, const PolicyModel&) = default;
};

/// Layer sizes of the classifier network.
struct NetworkShape {
  std::size_t inputs = 0;
  std::size_t hidden = 0;  // 0: no hidden layer
  std::size_t outputs = 0;

  std::size_t parameter_count() const;
};

/// Mean cross-entropy of `labels` under the network, with the gradient with
/// respect to `params` written into `gradient` when it is non-empty.
/// `inputs` holds one normalized row of shape.inputs values per label.
double cross_entropy(const NetworkShape& shape, std::span<const double> params,
                     std::span<const double> inputs, std::span<const std::size_t> labels,
                     std::span<double> gradient);

void network_logits(const NetworkShape& shape, std::span<const double> params, std::span<const double> input,
                    std::span<double> logits);

struct TrainConfig {
  double learning_rate = 0.5;
  std::size_t epochs = 200;
  std::size_t batch = 32;
  std::size_t hidden = 0;
  std::uint64_t seed = 1;
};

struct TrainResult {
  PolicyModel model;
  double loss = 0.0;      // mean cross-entropy over the whole set after training
  double accuracy = 0.0;  // fraction of samples whose argmax matches the label
  std::vector<double> loss_history;     // full-set loss after each epoch
  std::vector<std::size_t> dropped_features;  // zero-variance raw dimensions
};

/// Mini-batch gradient descent on mean cross-entropy. Deterministic given the seed.
TrainResult train(const SupervisionSet& supervision, const IntensityGrid& grid, const TrainConfig& config = {});

std::vector<double> policy_logits(const PolicyModel& model, std::span<const double> raw_features);
std::vector<double> policy_probabilities(const PolicyModel& model, std::span<const double> raw_features);

/// Argmax of the logits, ties to the lowest index.
std::size_t predict_features(const PolicyModel& model, std::span<const double> raw_features);
std::size_t predict(const PolicyModel& model, const LinearImage& frame, std::size_t prev_index);

/// A model that ignores its inputs: all weights zero, so it always picks level 0.
PolicyModel zero_policy(const IntensityGrid& grid);

namespace policy_io {

void save(const std::filesystem::path& path, const PolicyModel& model);
PolicyModel load(const std::filesystem::path& path);

}  // namespace policy_io

}  // namespace luxsched
