#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "luxsched/oracle.hpp"
#include "luxsched/policy.hpp"

namespace luxsched {

/// Axis-aligned region in world pixels with a specular highlight: the lamp
/// response there gains `gain` times the unit-albedo response, whatever the
/// surface albedo.
struct SpecularPatch {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  double gain = 1.0;
};

/// Frames [begin, end) whose ambient light is scaled by `factor`, reached
/// linearly over `ramp` frames at both ends.
struct DarkSegment {
  std::size_t begin = 0;
  std::size_t end = 0;
  double factor = 1.0;
  std::size_t ramp = 0;
};

/// Procedural scene: a camera panning across a textured wall lit by ambient
/// light and a co-located lamp.
struct SceneSpec {
  std::uint64_t seed = 1;
  int width = 128;
  int height = 96;
  std::size_t length = 60;
  double ambient_level = 0.35;
  double texture_contrast = 0.8;  // 0 gives a flat wall
  double texture_scale = 4.0;     // feature size in pixels
  double light_strength = 1.5;
  std::array<double, 3> light_color{0.36, 0.34, 0.30};
  double depth_falloff = 1.0;  // lamp attenuation exponent over depth
  double noise_sigma_dark = 0.02;
  double pan_speed = 2.0;  // pixels per frame
  double meters_per_pixel = 0.05;
  std::vector<SpecularPatch> specular_patches;
  std::vector<DarkSegment> dark_segments;

  void validate() const;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

/// Ground truth of a generated sequence.
struct Sequence {
  SceneSpec spec;
  std::vector<Decomposition> frames;
  std::vector<Pose> poses;

  std::size_t length() const { return frames.size(); }
};

/// Deterministic in spec.seed; frames are generated in parallel.
Sequence generate_sequence(const SceneSpec& spec);

/// Camera output at frame t and light fraction k: relight, add read noise whose
/// sigma is (1 - mean radiance) * noise_sigma_dark, then clip. The noise draw is
/// a pure function of (seed, t, k).
LinearImage render_observation(const Sequence& seq, std::size_t t, double k);

/// Renders frame t at grid level index k.
FrameSource frame_source(const Sequence& seq, const IntensityGrid& grid);

/// Hard-harsh reference scene: a dark stretch and a specular patch. Used by the
/// acceptance suite and as the CLI default.
SceneSpec harsh_scene(std::uint64_t seed);

struct FixedLevel {
  std::size_t index = 0;
};
struct ScheduleReplay {
  std::vector<std::size_t> assignment;
};
struct PolicyController {
  const PolicyModel* model = nullptr;
  std::size_t initial = 0;  // level commanded before the first observation
  std::size_t period = 1;   // frames between decisions; the command is held in between
};
using Controller = std::variant<FixedLevel, ScheduleReplay, PolicyController>;

struct RolloutResult {
  std::vector<std::size_t> executed;
  std::vector<LinearImage> observations;
};

/// Closed loop: frame t is rendered at the current command, and the controller
/// sees that observation when choosing the command for frame t + 1.
RolloutResult rollout(const Controller& controller, const Sequence& seq, const IntensityGrid& grid);

struct TrackingConfig {
  double threshold = 0.15;  // minimum matching score for tracking to survive a transition
  double pose_noise = 0.05;
  std::uint64_t seed = 7;
  MatcherConfig matcher;
};

struct TrackingResult {
  std::size_t pred_length = 0;
  std::vector<Pose> poses;     // estimates for the tracked frames
  std::vector<double> scores;  // matching score of every transition
};

/// SLAM stand-in. Tracking survives transition t -> t+1 while the matching score
/// is at least the threshold; pred_length is the number of frames tracked before
/// the first failure. Tracked frames get the ground-truth pose plus zero-mean
/// noise scaled by (1 - score). The noise draws depend only on the seed and frame.
TrackingResult proxy_tracking(const std::vector<LinearImage>& observations, const std::vector<Pose>& gt,
                              const TrackingConfig& config = {});

/// RMSE of position residuals; columns are points (2-D or 3-D). With `align`
/// the prediction is first mapped by the least-squares rigid motion (no scale).
double ate_rmse(const Eigen::MatrixXd& gt, const Eigen::MatrixXd& pred, bool align = true);
double ate_rmse(const std::vector<Pose>& gt, const std::vector<Pose>& pred, bool align = true);

inline constexpr double kInfiniteWrmse = std::numeric_limits<double>::infinity();

/// C = 1 - |T_pred - T_gt| / T_gt. Throws ValidationError when T_gt == 0.
double trajectory_ratio(std::size_t pred_length, std::size_t gt_length);
/// ATE / C^2, or kInfiniteWrmse when C <= 0.
double weighted_rmse(double ate, double ratio);

struct TrajectoryResult {
  std::size_t gt_length = 0;
  std::size_t pred_length = 0;
  double ate_rmse = 0.0;
  double trajectory_ratio = 0.0;
  double wrmse = 0.0;
};

struct RunScore {
  TrajectoryResult trajectory;
  double mean_intensity = 0.0;
  double mean_power = 0.0;
};

/// Fewer tracked frames than this cannot be rigidly aligned meaningfully.
inline constexpr std::size_t kMinAlignedFrames = 3;

/// Scores a run against the ground truth; runs that tracked fewer than
/// kMinAlignedFrames frames get kInfiniteWrmse.
RunScore score_run(const std::vector<Pose>& gt, const TrackingResult& tracking,
                   std::span<const std::size_t> executed, const IntensityGrid& grid, const PowerModel& power = {});

struct MethodResult {
  std::string name;
  std::vector<std::size_t> executed;
  double energy = 0.0;
  RunScore score;
  std::vector<double> match_scores;
};

struct Comparison {
  CostTensors costs;
  Schedule oracle;
  std::vector<MethodResult> methods;  // fixed_0, fixed_100, [ilc], oracle

  const MethodResult& method(const std::string& name) const;
};

/// Builds the sequence's cost tensors, solves the oracle, and runs the fixed
/// lowest/highest level baselines, the policy (if given) and the oracle replay
/// through the proxy tracker.
Comparison compare_controllers(const Sequence& seq, const EnergyModel& model, const PolicyModel* policy,
                               const TrackingConfig& tracking = {}, std::size_t policy_period = 1);

namespace scene_io {

SceneSpec load(const std::filesystem::path& path);
void save(const std::filesystem::path& path, const SceneSpec& spec);

/// Writes one decomposition directory per frame, poses.csv (frame,x,y,theta),
/// scene.json and a manifest listing them.
void save_sequence(const std::filesystem::path& dir, const Sequence& seq);
/// Reads a sequence manifest written by save_sequence.
Sequence load_sequence(const std::filesystem::path& manifest);

void write_poses(const std::filesystem::path& path, const std::vector<Pose>& poses);
std::vector<Pose> read_poses(const std::filesystem::path& path);

}  // namespace scene_io

}  // namespace luxsched
