#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "luxsched/energy.hpp"
#include "luxsched/imaging.hpp"
#include "luxsched/policy.hpp"

namespace testing {

using luxsched::CostTensors;
using luxsched::Decomposition;
using luxsched::IntensityGrid;
using luxsched::LinearImage;
using luxsched::ScalarMap;

inline LinearImage random_image(int w, int h, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  LinearImage img(w, h);
  for (double& v : img.values()) v = u(rng);
  return img;
}

inline Decomposition random_decomposition(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Decomposition d;
  d.ambient = random_image(w, h, rng, 0.0, 0.5);
  d.light_map = ScalarMap(w, h);
  for (double& v : d.light_map.values()) v = u(rng);
  const double r = 0.2 + u(rng), g = 0.2 + u(rng), b = 0.2 + u(rng);
  d.light_color = {r / (r + g + b), g / (r + g + b), b / (r + g + b)};
  return d;
}

inline IntensityGrid uniform_grid(std::size_t levels) {
  if (levels == 1) return IntensityGrid(std::vector<double>{0.0});
  std::vector<double> v(levels);
  for (std::size_t i = 0; i < levels; ++i) v[i] = static_cast<double>(i) / static_cast<double>(levels - 1);
  return IntensityGrid(v);
}

// Small integers make exact ties common, which exercises tie-breaking.
inline CostTensors random_costs(std::size_t frames, std::size_t levels, std::mt19937_64& rng,
                                bool integer_valued = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> small(0, 3);
  auto draw = [&] { return integer_valued ? static_cast<double>(small(rng)) : u(rng); };
  std::vector<double> unary(frames * levels);
  std::vector<double> pairwise((frames - 1) * levels * levels);
  for (double& v : unary) v = draw();
  for (double& v : pairwise) v = draw();
  return CostTensors(uniform_grid(levels), frames, std::move(unary), std::move(pairwise));
}

// Dark frames should get a bright lamp, bright frames none, mid frames a middle level.
inline luxsched::SupervisionSet separable_set(std::size_t levels, std::mt19937_64& rng) {
  luxsched::SupervisionSet set;
  set.levels = levels;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const int kind = i % 3;
    const double lo = kind == 0 ? 0.0 : kind == 1 ? 0.35 : 0.85;
    const LinearImage img = luxsched::clip_sensor(random_image(16, 16, rng, lo, lo + 0.15 + 0.05 * u(rng)));
    luxsched::SupervisionSample s;
    s.prev_action = static_cast<std::size_t>(u(rng) * double(levels));
    s.action = kind == 0 ? levels - 1 : kind == 1 ? levels / 2 : 0;
    s.features = luxsched::extract_features(img, s.prev_action, levels).flatten();
    set.samples.push_back(std::move(s));
  }
  return set;
}

inline double gradient_relative_error(const luxsched::NetworkShape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.5);
  const std::size_t n = 7;
  std::vector<double> params(shape.parameter_count()), inputs(n * shape.inputs);
  for (double& p : params) p = nd(rng);
  for (double& x : inputs) x = nd(rng);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = rng() % shape.outputs;

  std::vector<double> analytic(params.size());
  luxsched::cross_entropy(shape, params, inputs, labels, analytic);
  std::vector<double> numeric(params.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto plus = params, minus = params;
    plus[i] += h;
    minus[i] -= h;
    const double up = luxsched::cross_entropy(shape, plus, inputs, labels, {});
    const double down = luxsched::cross_entropy(shape, minus, inputs, labels, {});
    numeric[i] = (up - down) / (2 * h);
  }
  double num = 0.0, den_a = 0.0, den_n = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    num += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    den_a += analytic[i] * analytic[i];
    den_n += numeric[i] * numeric[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den_a), std::sqrt(den_n));
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("luxsched_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
