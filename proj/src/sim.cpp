#include "luxsched/sim.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numbers>
#include <random>
#include <sstream>

#include "luxsched/parallel.hpp"
#include "luxsched/pfm.hpp"

namespace luxsched {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

double unit_from_bits(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// Box-Muller on mt19937_64 output; portable across standard libraries.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : rng_(seed) {}
  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = unit_from_bits(rng_());
    } while (u1 <= 0.0);
    const double u2 = unit_from_bits(rng_());
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

double lattice(std::uint64_t seed, long ix, long iy) {
  return unit_from_bits(mix(mix(seed, static_cast<std::uint64_t>(ix)), static_cast<std::uint64_t>(iy)));
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Smoothly interpolated lattice noise in [0, 1).
double value_noise(std::uint64_t seed, double u, double v) {
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const auto ix = static_cast<long>(fu);
  const auto iy = static_cast<long>(fv);
  const double tx = smoothstep(u - fu);
  const double ty = smoothstep(v - fv);
  const double a = lattice(seed, ix, iy);
  const double b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1);
  const double d = lattice(seed, ix + 1, iy + 1);
  return (a + (b - a) * tx) + ((c + (d - c) * tx) - (a + (b - a) * tx)) * ty;
}

constexpr std::array<double, 3> kAlbedoTint{1.0, 0.93, 0.86};

}  // namespace

void SceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("scene dimensions must be positive");
  if (length < 2) throw ValidationError("scene length must be at least 2 frames");
  for (double v : {ambient_level, texture_contrast, light_strength, depth_falloff, noise_sigma_dark, pan_speed,
                   meters_per_pixel}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("scene magnitudes must be finite and >= 0");
  }
  if (!(texture_scale > 0.0)) throw ValidationError("texture scale must be positive");
  if (texture_contrast > 1.0) throw ValidationError("texture contrast must be <= 1");
  double sum = 0.0;
  for (double c : light_color) {
    if (!(c >= 0.0)) throw ValidationError("light color must be non-negative");
    sum += c;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("light color must sum to 1");
  for (const auto& p : specular_patches) {
    if (!(p.gain >= 0.0) || !(p.x1 >= p.x0) || !(p.y1 >= p.y0)) throw ValidationError("invalid specular patch");
  }
  for (const auto& s : dark_segments) {
    if (!(s.factor >= 0.0) || s.end < s.begin) throw ValidationError("invalid dark segment");
  }
}

Sequence generate_sequence(const SceneSpec& spec) {
  spec.validate();
  Sequence seq;
  seq.spec = spec;
  seq.frames.resize(spec.length);
  seq.poses.resize(spec.length);
  const std::uint64_t texture_seed = mix(spec.seed, 0x7e47u);
  const int w = spec.width;
  const int h = spec.height;

  parallel_for(spec.length, [&](std::size_t t) {
    double ambient_factor = 1.0;
    for (const auto& s : spec.dark_segments) {
      if (t < s.begin || t >= s.end) continue;
      double weight = 1.0;
      if (s.ramp > 0) {
        const double in = static_cast<double>(t - s.begin + 1) / static_cast<double>(s.ramp + 1);
        const double out = static_cast<double>(s.end - t) / static_cast<double>(s.ramp + 1);
        weight = std::min({1.0, in, out});
      }
      ambient_factor *= 1.0 + (s.factor - 1.0) * weight;
    }
    const double offset = static_cast<double>(t) * spec.pan_speed;
    Decomposition d;
    d.ambient = LinearImage(w, h);
    d.light_map = ScalarMap(w, h);
    d.light_color = spec.light_color;
    for (int y = 0; y < h; ++y) {
      const double depth = 1.0 + (h > 1 ? static_cast<double>(h - 1 - y) / (h - 1) : 0.0);
      const double falloff = std::pow(depth, -spec.depth_falloff);
      for (int x = 0; x < w; ++x) {
        const double wx = x + offset;
        const double wy = y;
        const double u = wx / spec.texture_scale;
        const double v = wy / spec.texture_scale;
        const double n = 0.65 * value_noise(texture_seed, u, v) + 0.35 * value_noise(texture_seed + 1, 2 * u, 2 * v);
        const double albedo = 0.5 + spec.texture_contrast * (n - 0.5);
        double highlight = 0.0;
        for (const auto& p : spec.specular_patches) {
          if (wx >= p.x0 && wx < p.x1 && wy >= p.y0 && wy < p.y1) highlight += p.gain;
        }
        for (int c = 0; c < 3; ++c) {
          d.ambient.at(x, y, c) = spec.ambient_level * ambient_factor * albedo * kAlbedoTint[c];
        }
        d.light_map.at(x, y) = spec.light_strength * falloff * (albedo + highlight);
      }
    }
    seq.frames[t] = std::move(d);

    const double td = static_cast<double>(t);
    const double span = static_cast<double>(spec.length);
    seq.poses[t].x = td * spec.pan_speed * spec.meters_per_pixel;
    seq.poses[t].y = 0.25 * std::sin(2.0 * std::numbers::pi * td / span);
    seq.poses[t].theta = 0.1 * std::cos(2.0 * std::numbers::pi * td / span);
  });
  return seq;
}

LinearImage render_observation(const Sequence& seq, std::size_t t, double k) {
  if (t >= seq.length()) throw ValidationError("frame index out of range");
  LinearImage img = relight(seq.frames[t], k);
  const double sigma_scale = seq.spec.noise_sigma_dark;
  if (sigma_scale > 0.0) {
    const double mean = luminance_stats(clip_sensor(img)).mean_luminance;
    const double sigma = (1.0 - mean) * sigma_scale;
    NormalStream noise(mix(mix(seq.spec.seed, 0x0b5eu + t), std::bit_cast<std::uint64_t>(k)));
    for (double& v : img.values()) v += sigma * noise.next();
  }
  return clip_sensor(img);
}

FrameSource frame_source(const Sequence& seq, const IntensityGrid& grid) {
  return [&seq, grid](std::size_t t, std::size_t k) { return render_observation(seq, t, grid[k]); };
}

SceneSpec harsh_scene(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.length = 60;
  s.dark_segments = {{8, 30, 0.02, 4}};
  s.specular_patches = {{112.0, -1.0, 1000.0, 1000.0, 4.0}};
  return s;
}

RolloutResult rollout(const Controller& controller, const Sequence& seq, const IntensityGrid& grid) {
  const std::size_t length = seq.length();
  RolloutResult out;
  out.executed.reserve(length);
  out.observations.reserve(length);

  std::size_t command = 0;
  if (const auto* fixed = std::get_if<FixedLevel>(&controller)) {
    if (fixed->index >= grid.size()) throw ValidationError("fixed level outside the grid");
    command = fixed->index;
  } else if (const auto* replay = std::get_if<ScheduleReplay>(&controller)) {
    if (replay->assignment.size() != length) throw ValidationError("replayed schedule length mismatch");
    for (std::size_t k : replay->assignment) {
      if (k >= grid.size()) throw ValidationError("replayed schedule index outside the grid");
    }
    command = replay->assignment.front();
  } else {
    const auto& pc = std::get<PolicyController>(controller);
    if (pc.model == nullptr) throw ValidationError("policy controller has no model");
    if (!(pc.model->grid == grid)) throw ValidationError("policy grid does not match the rollout grid");
    if (pc.initial >= grid.size()) throw ValidationError("initial level outside the grid");
    if (pc.period == 0) throw ValidationError("control period must be >= 1");
    command = pc.initial;
  }

  for (std::size_t t = 0; t < length; ++t) {
    out.executed.push_back(command);
    out.observations.push_back(render_observation(seq, t, grid[command]));
    if (t + 1 == length) break;
    if (const auto* replay = std::get_if<ScheduleReplay>(&controller)) {
      command = replay->assignment[t + 1];
    } else if (const auto* pc = std::get_if<PolicyController>(&controller)) {
      if ((t + 1) % pc->period == 0) command = predict(*pc->model, out.observations.back(), command);
    }
  }
  return out;
}

TrackingResult proxy_tracking(const std::vector<LinearImage>& observations, const std::vector<Pose>& gt,
                              const TrackingConfig& config) {
  const std::size_t length = observations.size();
  if (length < 2) throw ValidationError("tracking needs at least two observations");
  if (gt.size() != length) throw ValidationError("ground-truth poses and observations differ in length");

  std::vector<SaliencyMask> masks(length);
  parallel_for(length, [&](std::size_t t) { masks[t] = detect_salient_cells(observations[t], config.matcher); });
  const double cells = static_cast<double>(config.matcher.cells) * config.matcher.cells;

  TrackingResult r;
  r.scores.resize(length - 1);
  for (std::size_t t = 0; t + 1 < length; ++t) {
    r.scores[t] = static_cast<double>(masks[t].overlap(masks[t + 1])) / cells;
  }
  r.pred_length = length;
  for (std::size_t t = 0; t + 1 < length; ++t) {
    if (r.scores[t] < config.threshold) {
      r.pred_length = t + 1;
      break;
    }
  }
  r.poses.resize(r.pred_length);
  for (std::size_t t = 0; t < r.pred_length; ++t) {
    const double quality = t == 0 ? r.scores.front() : r.scores[t - 1];
    const double scale = config.pose_noise * (1.0 - quality);
    NormalStream noise(mix(config.seed, 0x9053u + t));
    r.poses[t].x = gt[t].x + scale * noise.next();
    r.poses[t].y = gt[t].y + scale * noise.next();
    r.poses[t].theta = gt[t].theta + scale * noise.next();
  }
  return r;
}

double ate_rmse(const Eigen::MatrixXd& gt, const Eigen::MatrixXd& pred, bool align) {
  if (gt.cols() == 0) throw ValidationError("ATE needs at least one pose");
  if (gt.rows() != pred.rows() || gt.cols() != pred.cols()) {
    throw DimensionMismatchError("ATE inputs must have the same shape");
  }
  Eigen::MatrixXd aligned = pred;
  if (align) {
    if (gt.cols() == 1) {
      aligned = gt;
    } else {
      const Eigen::MatrixXd transform = Eigen::umeyama(pred, gt, false);
      const auto d = gt.rows();
      const Eigen::VectorXd shift = transform.col(d).head(d);
      aligned = (transform.topLeftCorner(d, d) * pred).colwise() + shift;
    }
  }
  return std::sqrt((aligned - gt).colwise().squaredNorm().mean());
}

double ate_rmse(const std::vector<Pose>& gt, const std::vector<Pose>& pred, bool align) {
  if (gt.size() != pred.size()) throw DimensionMismatchError("ATE inputs must have the same length");
  Eigen::MatrixXd a(2, static_cast<Eigen::Index>(gt.size()));
  Eigen::MatrixXd b(2, static_cast<Eigen::Index>(pred.size()));
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    a(0, c) = gt[i].x;
    a(1, c) = gt[i].y;
    b(0, c) = pred[i].x;
    b(1, c) = pred[i].y;
  }
  return ate_rmse(a, b, align);
}

double trajectory_ratio(std::size_t pred_length, std::size_t gt_length) {
  if (gt_length == 0) throw ValidationError("ground-truth trajectory is empty");
  const double gt = static_cast<double>(gt_length);
  return 1.0 - std::abs(static_cast<double>(pred_length) - gt) / gt;
}

double weighted_rmse(double ate, double ratio) {
  if (!(ratio > 0.0)) return kInfiniteWrmse;
  return ate / (ratio * ratio);
}

RunScore score_run(const std::vector<Pose>& gt, const TrackingResult& tracking,
                   std::span<const std::size_t> executed, const IntensityGrid& grid, const PowerModel& power) {
  if (executed.size() != gt.size()) throw ValidationError("executed schedule and trajectory differ in length");
  if (tracking.poses.size() != tracking.pred_length || tracking.pred_length > gt.size()) {
    throw ValidationError("tracking result is inconsistent with the trajectory");
  }
  RunScore s;
  auto& tr = s.trajectory;
  tr.gt_length = gt.size();
  tr.pred_length = tracking.pred_length;
  tr.trajectory_ratio = trajectory_ratio(tr.pred_length, tr.gt_length);
  if (tr.pred_length == 0) {
    tr.ate_rmse = std::numeric_limits<double>::infinity();
    tr.wrmse = kInfiniteWrmse;
  } else {
    const std::vector<Pose> gt_prefix(gt.begin(), gt.begin() + static_cast<std::ptrdiff_t>(tr.pred_length));
    tr.ate_rmse = ate_rmse(gt_prefix, tracking.poses, true);
    tr.wrmse = tr.pred_length < kMinAlignedFrames ? kInfiniteWrmse : weighted_rmse(tr.ate_rmse, tr.trajectory_ratio);
  }
  double intensity = 0.0;
  double watts = 0.0;
  for (std::size_t k : executed) {
    if (k >= grid.size()) throw ValidationError("executed level outside the grid");
    intensity += grid[k];
    watts += power(grid[k]);
  }
  s.mean_intensity = intensity / static_cast<double>(executed.size());
  s.mean_power = watts / static_cast<double>(executed.size());
  return s;
}

const MethodResult& Comparison::method(const std::string& name) const {
  for (const auto& m : methods) {
    if (m.name == name) return m;
  }
  throw ValidationError("no method named " + name);
}

Comparison compare_controllers(const Sequence& seq, const EnergyModel& model, const PolicyModel* policy,
                               const TrackingConfig& tracking, std::size_t policy_period) {
  Comparison cmp;
  cmp.costs = build_cost_tensors(model, seq.length(), frame_source(seq, model.grid));
  cmp.oracle = solve_ois(cmp.costs, model.power);

  std::vector<std::pair<std::string, Controller>> controllers;
  controllers.emplace_back("fixed_0", FixedLevel{0});
  controllers.emplace_back("fixed_100", FixedLevel{model.grid.size() - 1});
  if (policy != nullptr) controllers.emplace_back("ilc", PolicyController{policy, 0, policy_period});
  controllers.emplace_back("oracle", ScheduleReplay{cmp.oracle.assignment});

  TrackingConfig tc = tracking;
  tc.matcher = model.matcher;
  for (auto& [name, controller] : controllers) {
    RolloutResult run = rollout(controller, seq, model.grid);
    TrackingResult tr = proxy_tracking(run.observations, seq.poses, tc);
    MethodResult m;
    m.name = name;
    m.energy = evaluate_schedule(cmp.costs, run.executed);
    m.score = score_run(seq.poses, tr, run.executed, model.grid, model.power);
    m.match_scores = std::move(tr.scores);
    m.executed = std::move(run.executed);
    cmp.methods.push_back(std::move(m));
  }
  return cmp;
}

namespace scene_io {

namespace {

json to_json(const SceneSpec& s) {
  json patches = json::array();
  for (const auto& p : s.specular_patches) {
    patches.push_back({{"x0", p.x0}, {"y0", p.y0}, {"x1", p.x1}, {"y1", p.y1}, {"gain", p.gain}});
  }
  json segments = json::array();
  for (const auto& d : s.dark_segments) {
    segments.push_back({{"begin", d.begin}, {"end", d.end}, {"factor", d.factor}, {"ramp", d.ramp}});
  }
  return {{"seed", s.seed},
          {"width", s.width},
          {"height", s.height},
          {"length", s.length},
          {"ambient_level", s.ambient_level},
          {"texture_contrast", s.texture_contrast},
          {"texture_scale", s.texture_scale},
          {"light_strength", s.light_strength},
          {"light_color", s.light_color},
          {"depth_falloff", s.depth_falloff},
          {"noise_sigma_dark", s.noise_sigma_dark},
          {"pan_speed", s.pan_speed},
          {"meters_per_pixel", s.meters_per_pixel},
          {"specular_patches", patches},
          {"dark_segments", segments}};
}

SceneSpec from_json(const json& j) {
  SceneSpec s;
  s.seed = j.value("seed", s.seed);
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.length = j.value("length", s.length);
  s.ambient_level = j.value("ambient_level", s.ambient_level);
  s.texture_contrast = j.value("texture_contrast", s.texture_contrast);
  s.texture_scale = j.value("texture_scale", s.texture_scale);
  s.light_strength = j.value("light_strength", s.light_strength);
  if (j.contains("light_color")) s.light_color = j.at("light_color").get<std::array<double, 3>>();
  s.depth_falloff = j.value("depth_falloff", s.depth_falloff);
  s.noise_sigma_dark = j.value("noise_sigma_dark", s.noise_sigma_dark);
  s.pan_speed = j.value("pan_speed", s.pan_speed);
  s.meters_per_pixel = j.value("meters_per_pixel", s.meters_per_pixel);
  if (j.contains("specular_patches")) {
    for (const auto& p : j.at("specular_patches")) {
      s.specular_patches.push_back({p.at("x0").get<double>(), p.at("y0").get<double>(), p.at("x1").get<double>(),
                                    p.at("y1").get<double>(), p.at("gain").get<double>()});
    }
  }
  if (j.contains("dark_segments")) {
    for (const auto& d : j.at("dark_segments")) {
      s.dark_segments.push_back(
          {d.at("begin").get<std::size_t>(), d.at("end").get<std::size_t>(), d.at("factor").get<double>(),
           d.value("ramp", std::size_t{0})});
    }
  }
  s.validate();
  return s;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

SceneSpec load(const std::filesystem::path& path) {
  const json j = read_json(path);
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    throw ValidationError("malformed scene spec " + path.string() + ": " + e.what());
  }
}

void save(const std::filesystem::path& path, const SceneSpec& spec) { write_json(path, to_json(spec)); }

void write_poses(const std::filesystem::path& path, const std::vector<Pose>& poses) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path.string());
  out << "frame,x,y,theta\n" << std::setprecision(17);
  for (std::size_t t = 0; t < poses.size(); ++t) {
    out << t << ',' << poses[t].x << ',' << poses[t].y << ',' << poses[t].theta << '\n';
  }
}

std::vector<Pose> read_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("frame,x,y,theta", 0) != 0) {
    throw IoError(path.string() + " is not a poses CSV");
  }
  std::vector<Pose> poses;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t frame = 0;
    char c1 = 0, c2 = 0, c3 = 0;
    Pose p;
    if (!(ss >> frame >> c1 >> p.x >> c2 >> p.y >> c3 >> p.theta) || frame != poses.size()) {
      throw IoError("malformed pose row in " + path.string() + ": " + line);
    }
    poses.push_back(p);
  }
  return poses;
}

void save_sequence(const std::filesystem::path& dir, const Sequence& seq) {
  std::filesystem::create_directories(dir);
  json frames = json::array();
  for (std::size_t t = 0; t < seq.length(); ++t) {
    std::ostringstream name;
    name << "frame_" << std::setw(4) << std::setfill('0') << t;
    decomposition_io::save(dir / name.str(), seq.frames[t]);
    frames.push_back(name.str());
  }
  write_poses(dir / "poses.csv", seq.poses);
  save(dir / "scene.json", seq.spec);
  write_json(dir / "sequence.json", {{"scene", "scene.json"}, {"poses", "poses.csv"}, {"frames", frames}});
}

Sequence load_sequence(const std::filesystem::path& manifest) {
  const json j = read_json(manifest);
  const auto dir = manifest.has_parent_path() ? manifest.parent_path() : std::filesystem::path(".");
  Sequence seq;
  try {
    seq.spec = j.contains("scene") ? load(dir / j.at("scene").get<std::string>()) : SceneSpec{};
    for (const auto& f : j.at("frames")) seq.frames.push_back(decomposition_io::load(dir / f.get<std::string>()));
    seq.poses = read_poses(dir / j.at("poses").get<std::string>());
  } catch (const json::exception& e) {
    throw IoError("malformed sequence manifest " + manifest.string() + ": " + e.what());
  }
  if (seq.frames.size() != seq.poses.size()) throw ValidationError("sequence frames and poses differ in count");
  if (seq.frames.size() < 2) throw ValidationError("sequence must have at least two frames");
  seq.spec.length = seq.frames.size();
  seq.spec.width = seq.frames.front().width();
  seq.spec.height = seq.frames.front().height();
  return seq;
}

}  // namespace scene_io

}  // namespace luxsched
