#include "luxsched/energy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <string>

#include "luxsched/parallel.hpp"

namespace luxsched {

using nlohmann::json;

IntensityGrid::IntensityGrid() {
  levels_.reserve(11);
  for (int i = 0; i <= 10; ++i) levels_.push_back(i / 10.0);
}

IntensityGrid::IntensityGrid(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw ValidationError("intensity grid must not be empty");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const double k = levels_[i];
    if (!(k >= 0.0 && k <= 1.0)) throw ValidationError("intensity levels must lie in [0, 1]");
    if (i > 0 && !(k > levels_[i - 1])) throw ValidationError("intensity levels must be strictly increasing");
  }
}

IntensityGrid IntensityGrid::from_range(double start, double stop, double step) {
  if (!std::isfinite(start) || !std::isfinite(stop) || !std::isfinite(step)) {
    throw ValidationError("level range must be finite");
  }
  if (stop < start) throw ValidationError("level range stop precedes start");
  if (stop == start) return IntensityGrid({start});
  if (!(step > 0.0)) throw ValidationError("level range step must be positive");
  std::vector<double> levels;
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= count; ++i) {
    double k = start + static_cast<double>(i) * step;
    // snap the last level onto stop when it is within tolerance
    if (std::abs(k - stop) <= 1e-9) k = stop;
    levels.push_back(k);
  }
  return IntensityGrid(std::move(levels));
}

void EnergyModel::validate() const {
  for (double w : {lambda_d, lambda_p, lambda_m, lambda_s}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("energy weights must be finite and >= 0");
  }
  if (!std::isfinite(power.slope) || !std::isfinite(power.intercept)) {
    throw ValidationError("power model coefficients must be finite");
  }
  if (matcher.cells <= 0) throw ValidationError("matcher grid must have at least one cell");
}

double power(const EnergyModel& model, double k) { return model.power(k); }

double image_utility_penalty(const LuminanceStats& stats, const PenaltyWeights& weights) {
  const double d = weights.saturated * stats.saturated_fraction + weights.dark * stats.dark_fraction +
                   weights.texture * (1.0 - stats.gradient_energy);
  return std::clamp(d, 0.0, 1.0);
}

SaliencyMask::SaliencyMask(int cells)
    : cells_(cells), bits_((static_cast<std::size_t>(cells) * cells + 63) / 64, 0) {}

void SaliencyMask::set(int cx, int cy) {
  const auto i = static_cast<std::size_t>(cy) * cells_ + cx;
  bits_[i / 64] |= std::uint64_t{1} << (i % 64);
}

bool SaliencyMask::test(int cx, int cy) const {
  const auto i = static_cast<std::size_t>(cy) * cells_ + cx;
  return (bits_[i / 64] >> (i % 64)) & 1u;
}

std::size_t SaliencyMask::count() const {
  std::size_t n = 0;
  for (auto w : bits_) n += std::popcount(w);
  return n;
}

std::size_t SaliencyMask::overlap(const SaliencyMask& other) const {
  if (other.cells_ != cells_) throw DimensionMismatchError("saliency masks use different grids");
  std::size_t n = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i) n += std::popcount(bits_[i] & other.bits_[i]);
  return n;
}

ScalarMap box_blur3(const ScalarMap& src) {
  const int w = src.width();
  const int h = src.height();
  ScalarMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) sum += src.at(std::clamp(x + dx, 0, w - 1), yy);
      }
      out.at(x, y) = sum / 9.0;
    }
  }
  return out;
}

SaliencyMask detect_salient_cells(const LinearImage& frame, const MatcherConfig& config) {
  const int g = config.cells;
  if (g <= 0) throw ValidationError("matcher grid must have at least one cell");
  SaliencyMask mask(g);
  const int w = frame.width();
  const int h = frame.height();
  if (w == 0 || h == 0) return mask;

  const ScalarMap grad = gradient_magnitude(box_blur3(luminance(frame)));
  auto is_peak = [&](int x, int y) {
    const double v = grad.at(x, y);
    if (!(v > config.gradient_threshold)) return false;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx;
        const int ny = y + dy;
        if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        if (grad.at(nx, ny) > v) return false;
      }
    }
    return true;
  };

  for (int cy = 0; cy < g; ++cy) {
    const int y0 = cy * h / g;
    const int y1 = (cy + 1) * h / g;
    for (int cx = 0; cx < g; ++cx) {
      const int x0 = cx * w / g;
      const int x1 = (cx + 1) * w / g;
      const int area = (x1 - x0) * (y1 - y0);
      if (area <= 0) continue;
      int saturated = 0;
      int dark = 0;
      bool peak = false;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const double r = frame.at(x, y, 0);
          const double gg = frame.at(x, y, 1);
          const double b = frame.at(x, y, 2);
          if (r >= kSaturatedLevel || gg >= kSaturatedLevel || b >= kSaturatedLevel) ++saturated;
          if (r <= kDarkLevel && gg <= kDarkLevel && b <= kDarkLevel) ++dark;
          if (!peak && is_peak(x, y)) peak = true;
        }
      }
      if (!peak) continue;
      if (saturated > config.max_saturated_fraction * area) continue;
      if (dark > config.max_dark_fraction * area) continue;
      mask.set(cx, cy);
    }
  }
  return mask;
}

double matching_score(const LinearImage& frame_a, const LinearImage& frame_b, const MatcherConfig& config) {
  if (!frame_a.same_shape(frame_b)) throw DimensionMismatchError("matching_score: frame dimensions differ");
  const SaliencyMask a = detect_salient_cells(frame_a, config);
  const SaliencyMask b = detect_salient_cells(frame_b, config);
  return static_cast<double>(a.overlap(b)) / (static_cast<double>(config.cells) * config.cells);
}

CostTensors::CostTensors(IntensityGrid grid, std::size_t frames, std::vector<double> unary,
                         std::vector<double> pairwise)
    : grid_(std::move(grid)), frames_(frames), unary_(std::move(unary)), pairwise_(std::move(pairwise)) {
  const std::size_t k = grid_.size();
  if (frames_ == 0) throw ValidationError("cost tensors need at least one frame");
  if (unary_.size() != frames_ * k) throw DimensionMismatchError("unary tensor must hold T*|K| values");
  if (pairwise_.size() != (frames_ - 1) * k * k) {
    throw DimensionMismatchError("pairwise tensor must hold (T-1)*|K|^2 values");
  }
}

bool CostTensors::finite() const {
  auto ok = [](double v) { return std::isfinite(v); };
  return std::all_of(unary_.begin(), unary_.end(), ok) && std::all_of(pairwise_.begin(), pairwise_.end(), ok);
}

PotentialInputs compute_potentials(const EnergyModel& model, std::size_t frames, const FrameSource& source) {
  model.validate();
  if (frames == 0) throw ValidationError("sequence must have at least one frame");
  const std::size_t levels = model.grid.size();
  PotentialInputs out;
  out.frames = frames;
  out.levels = levels;
  out.penalty.assign(frames * levels, 0.0);
  out.match.assign((frames - 1) * levels * levels, 0.0);

  std::vector<SaliencyMask> masks(frames * levels);
  std::vector<int> widths(frames * levels), heights(frames * levels);
  parallel_for(frames * levels, [&](std::size_t i) {
    const LinearImage frame = source(i / levels, i % levels);
    widths[i] = frame.width();
    heights[i] = frame.height();
    out.penalty[i] = image_utility_penalty(luminance_stats(frame), model.penalty);
    masks[i] = detect_salient_cells(frame, model.matcher);
  });
  for (std::size_t i = 1; i < widths.size(); ++i) {
    if (widths[i] != widths[0] || heights[i] != heights[0]) {
      throw DimensionMismatchError("all frames of a sequence must share dimensions");
    }
  }

  const double cells = static_cast<double>(model.matcher.cells) * model.matcher.cells;
  for (std::size_t t = 0; t + 1 < frames; ++t) {
    for (std::size_t k = 0; k < levels; ++k) {
      for (std::size_t l = 0; l < levels; ++l) {
        out.match[(t * levels + k) * levels + l] =
            static_cast<double>(masks[t * levels + k].overlap(masks[(t + 1) * levels + l])) / cells;
      }
    }
  }
  return out;
}

CostTensors build_cost_tensors(const EnergyModel& model, const PotentialInputs& p) {
  model.validate();
  if (p.levels != model.grid.size()) throw DimensionMismatchError("potentials and grid disagree on |K|");
  if (p.frames == 0) throw ValidationError("potentials need at least one frame");
  if (p.penalty.size() != p.frames * p.levels || p.match.size() != (p.frames - 1) * p.levels * p.levels) {
    throw DimensionMismatchError("potential arrays have inconsistent shapes");
  }
  const std::size_t levels = p.levels;
  std::vector<double> unary(p.frames * levels);
  for (std::size_t t = 0; t < p.frames; ++t) {
    for (std::size_t k = 0; k < levels; ++k) {
      unary[t * levels + k] =
          model.lambda_d * p.penalty[t * levels + k] + model.lambda_p * model.power(model.grid[k]);
    }
  }
  std::vector<double> pairwise(p.match.size());
  for (std::size_t t = 0; t + 1 < p.frames; ++t) {
    for (std::size_t k = 0; k < levels; ++k) {
      for (std::size_t l = 0; l < levels; ++l) {
        const std::size_t i = (t * levels + k) * levels + l;
        pairwise[i] = model.lambda_m * (1.0 - p.match[i]) +
                      model.lambda_s * std::abs(model.grid[k] - model.grid[l]);
      }
    }
  }
  CostTensors costs(model.grid, p.frames, std::move(unary), std::move(pairwise));
  if (!costs.finite()) throw NumericalError("cost tensors contain non-finite entries");
  return costs;
}

CostTensors build_cost_tensors(const EnergyModel& model, std::size_t frames, const FrameSource& source) {
  return build_cost_tensors(model, compute_potentials(model, frames, source));
}

CostTensors build_cost_tensors(const EnergyModel& model, const std::vector<std::vector<LinearImage>>& frames) {
  const std::size_t levels = model.grid.size();
  for (const auto& row : frames) {
    if (row.size() != levels) throw ValidationError("ragged frame array: each time step needs |K| frames");
  }
  return build_cost_tensors(model, frames.size(),
                            [&](std::size_t t, std::size_t k) { return frames[t][k]; });
}

namespace {

void write_f64(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<double> read_f64(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<double> values(count);
  for (auto& v : values) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      throw IoError(path.string() + " holds fewer values than the manifest declares");
    }
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v = std::bit_cast<double>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(path.string() + " holds more values than the manifest declares");
  }
  return values;
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

}  // namespace

namespace cost_io {

void save(const std::filesystem::path& manifest, const CostTensors& costs) {
  const auto dir = manifest.has_parent_path() ? manifest.parent_path() : std::filesystem::path(".");
  std::filesystem::create_directories(dir);
  const std::string stem = manifest.stem().string();
  const std::string unary_name = stem + ".unary.bin";
  const std::string pairwise_name = stem + ".pairwise.bin";
  write_f64(dir / unary_name, costs.unary_values());
  write_f64(dir / pairwise_name, costs.pairwise_values());
  json j = {{"frames", costs.frames()},
            {"levels", costs.levels()},
            {"grid", costs.grid().levels()},
            {"unary", unary_name},
            {"pairwise", pairwise_name}};
  std::ofstream out(manifest);
  if (!out) throw IoError("cannot create " + manifest.string());
  out << j.dump(2) << '\n';
}

CostTensors load(const std::filesystem::path& manifest) {
  const json j = read_json(manifest);
  const auto dir = manifest.has_parent_path() ? manifest.parent_path() : std::filesystem::path(".");
  try {
    const auto frames = j.at("frames").get<std::size_t>();
    const auto levels = j.at("levels").get<std::size_t>();
    IntensityGrid grid = j.contains("grid") ? IntensityGrid(j.at("grid").get<std::vector<double>>())
                                            : IntensityGrid::from_range(0.0, 1.0, 1.0 / std::max<double>(1, levels - 1));
    if (grid.size() != levels) throw ValidationError("cost manifest grid does not match its level count");
    if (frames == 0) throw ValidationError("cost manifest declares zero frames");
    auto unary = read_f64(dir / j.at("unary").get<std::string>(), frames * levels);
    auto pairwise = read_f64(dir / j.at("pairwise").get<std::string>(), (frames - 1) * levels * levels);
    CostTensors costs(std::move(grid), frames, std::move(unary), std::move(pairwise));
    if (!costs.finite()) throw NumericalError("precomputed costs contain non-finite entries");
    return costs;
  } catch (const json::exception& e) {
    throw IoError("malformed cost manifest " + manifest.string() + ": " + e.what());
  }
}

}  // namespace cost_io

namespace weights_io {

EnergyModel load(const std::filesystem::path& path, const EnergyModel& base) {
  const json j = read_json(path);
  EnergyModel m = base;
  try {
    if (!j.is_object()) throw ValidationError("weights file must hold a JSON object");
    m.lambda_d = j.value("lambda_d", m.lambda_d);
    m.lambda_p = j.value("lambda_p", m.lambda_p);
    m.lambda_m = j.value("lambda_m", m.lambda_m);
    m.lambda_s = j.value("lambda_s", m.lambda_s);
    m.power.slope = j.value("power_slope", m.power.slope);
    m.power.intercept = j.value("power_intercept", m.power.intercept);
    if (j.contains("grid")) m.grid = IntensityGrid(j.at("grid").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw ValidationError("malformed weights file " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

void save(const std::filesystem::path& path, const EnergyModel& m) {
  json j = {{"lambda_d", m.lambda_d},       {"lambda_p", m.lambda_p},
            {"lambda_m", m.lambda_m},       {"lambda_s", m.lambda_s},
            {"power_slope", m.power.slope}, {"power_intercept", m.power.intercept},
            {"grid", m.grid.levels()}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace weights_io

}  // namespace luxsched
