#include "luxsched/imaging.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <string>

#include "luxsched/pfm.hpp"

namespace luxsched {

void Decomposition::validate() const {
  if (!ambient.same_extent(light_map)) {
    throw InvalidDecompositionError("ambient and light map dimensions differ");
  }
  if (ambient.empty()) throw InvalidDecompositionError("decomposition is empty");
  for (double v : ambient.values()) {
    if (!std::isfinite(v)) throw InvalidDecompositionError("ambient contains non-finite values");
  }
  for (double s : light_map.values()) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw InvalidDecompositionError("light map must be finite and non-negative");
    }
  }
  double sum = 0.0;
  for (double c : light_color) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw InvalidDecompositionError("light color must be finite and non-negative");
    }
    sum += c;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidDecompositionError("light color must sum to 1");
}

LinearImage relight(const Decomposition& d, double k) {
  if (!(k >= 0.0 && k <= 1.0)) throw ValidationError("light intensity must lie in [0, 1]");
  d.validate();
  if (k == 0.0) return d.ambient;

  LinearImage out = d.ambient;
  const std::size_t n = out.pixel_count();
  const auto s = d.light_map.values();
  for (std::size_t p = 0; p < n; ++p) {
    double* px = out.pixel(p);
    for (int c = 0; c < 3; ++c) px[c] += k * (s[p] * d.light_color[c]);
  }
  return out;
}

LinearImage clip_sensor(const LinearImage& img) {
  LinearImage out = img;
  for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Decomposition decompose_paired(const LinearImage& i1, double k1, const LinearImage& i2, double k2,
                               const DecomposeOptions& options) {
  if (!i1.same_shape(i2)) throw DimensionMismatchError("paired captures differ in size");
  if (i1.empty()) throw ValidationError("paired captures are empty");
  if (!std::isfinite(k1) || !std::isfinite(k2)) throw ValidationError("light levels must be finite");
  if (k1 == k2) throw DegeneratePairError("degenerate pair: both captures use the same light level");

  const std::size_t n = i1.pixel_count();
  const double inv_dk = 1.0 / (k2 - k1);

  std::vector<double> diff(n * 3);
  std::vector<unsigned char> clipped(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    const double* a = i1.pixel(p);
    const double* b = i2.pixel(p);
    for (int c = 0; c < 3; ++c) {
      if (!std::isfinite(a[c]) || !std::isfinite(b[c])) {
        throw ValidationError("paired captures contain non-finite values");
      }
      if (a[c] >= options.saturation_level || b[c] >= options.saturation_level) clipped[p] = 1;
      diff[p * 3 + c] = (b[c] - a[c]) * inv_dk;
    }
  }

  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  for (std::size_t p = 0; p < n; ++p) {
    if (clipped[p]) continue;
    const Eigen::Map<const Eigen::Vector3d> f(&diff[p * 3]);
    gram.noalias() += f * f.transpose();
  }

  Decomposition d;
  d.light_map = ScalarMap(i1.width(), i1.height(), 0.0);
  if (!(gram.trace() > 0.0)) {
    // no light contribution anywhere: the first capture is already ambient
    d.ambient = i1;
    return d;
  }

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition of the light fit failed");
  Eigen::Vector3d v = eig.eigenvectors().col(2);
  if (v.sum() < 0.0) v = -v;
  const double vmax = v.cwiseAbs().maxCoeff();
  for (int c = 0; c < 3; ++c) {
    if (v[c] < -options.negative_tolerance * vmax) {
      throw NonPhysicalLightError("dominant light direction has a negative color channel");
    }
    v[c] = std::max(v[c], 0.0);
  }
  const double vsum = v.sum();
  if (!(vsum > 0.0)) throw NonPhysicalLightError("dominant light direction has no positive energy");

  for (int c = 0; c < 3; ++c) d.light_color[c] = v[c] / vsum;

  auto s = d.light_map.values();
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double proj = diff[p * 3] * v[0] + diff[p * 3 + 1] * v[1] + diff[p * 3 + 2] * v[2];
    if (!clipped[p]) total += proj;
    s[p] = std::max(proj, 0.0) * vsum;
  }
  // brighter capture at the lower level: the light would have to subtract radiance
  if (total < 0.0) throw NonPhysicalLightError("light contribution is negative: captures look swapped");

  d.ambient = LinearImage(i1.width(), i1.height());
  for (std::size_t p = 0; p < n; ++p) {
    const double* a = i1.pixel(p);
    double* out = d.ambient.pixel(p);
    for (int c = 0; c < 3; ++c) {
      const double value = a[c] - k1 * (s[p] * d.light_color[c]);
      out[c] = clipped[p] ? std::max(value, 0.0) : value;
    }
  }
  return d;
}

double psnr(const LinearImage& a, const LinearImage& b) {
  if (!a.same_shape(b)) throw DimensionMismatchError("psnr: image dimensions differ");
  if (a.empty()) throw ValidationError("psnr: empty images");
  const auto va = a.values();
  const auto vb = b.values();
  double sse = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double e = va[i] - vb[i];
    sse += e * e;
  }
  const double mse = sse / static_cast<double>(va.size());
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(1.0 / mse);
}

ScalarMap luminance(const LinearImage& img) {
  ScalarMap out(img.width(), img.height());
  auto v = out.values();
  for (std::size_t p = 0; p < img.pixel_count(); ++p) v[p] = pixel_luminance(img.pixel(p));
  return out;
}

ScalarMap gradient_magnitude(const ScalarMap& lum) {
  const int w = lum.width();
  const int h = lum.height();
  ScalarMap g(w, h, 0.0);
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const double l = lum.at(x, y);
      const double gx = lum.at(x + 1, y) - l;
      const double gy = lum.at(x, y + 1) - l;
      g.at(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return g;
}

namespace {

// Summed-area table with a zero guard row and column.
class IntegralImage {
 public:
  IntegralImage(int w, int h) : w_(w + 1), table_(static_cast<std::size_t>(w + 1) * (h + 1), 0.0) {}

  template <typename F>
  void fill(int w, int h, F&& value) {
    for (int y = 0; y < h; ++y) {
      double row = 0.0;
      for (int x = 0; x < w; ++x) {
        row += value(x, y);
        at(x + 1, y + 1) = at(x + 1, y) + row;
      }
    }
  }

  double box(int x, int y, int size) const {
    return at(x + size, y + size) - at(x, y + size) - at(x + size, y) + at(x, y);
  }

 private:
  double& at(int x, int y) { return table_[static_cast<std::size_t>(y) * w_ + x]; }
  double at(int x, int y) const { return table_[static_cast<std::size_t>(y) * w_ + x]; }

  int w_;
  std::vector<double> table_;
};

}  // namespace

double ssim(const LinearImage& a, const LinearImage& b) {
  if (!a.same_shape(b)) throw DimensionMismatchError("ssim: image dimensions differ");
  const int w = a.width();
  const int h = a.height();
  if (w < kSsimWindow || h < kSsimWindow) throw ValidationError("ssim: image smaller than the 8x8 window");

  const ScalarMap la = luminance(a);
  const ScalarMap lb = luminance(b);
  IntegralImage sa(w, h), sb(w, h), saa(w, h), sbb(w, h), sab(w, h);
  sa.fill(w, h, [&](int x, int y) { return la.at(x, y); });
  sb.fill(w, h, [&](int x, int y) { return lb.at(x, y); });
  saa.fill(w, h, [&](int x, int y) { return la.at(x, y) * la.at(x, y); });
  sbb.fill(w, h, [&](int x, int y) { return lb.at(x, y) * lb.at(x, y); });
  sab.fill(w, h, [&](int x, int y) { return la.at(x, y) * lb.at(x, y); });

  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  constexpr double inv_n = 1.0 / (kSsimWindow * kSsimWindow);

  double total = 0.0;
  std::size_t windows = 0;
  for (int y = 0; y + kSsimWindow <= h; ++y) {
    for (int x = 0; x + kSsimWindow <= w; ++x) {
      const double mu_a = sa.box(x, y, kSsimWindow) * inv_n;
      const double mu_b = sb.box(x, y, kSsimWindow) * inv_n;
      const double var_a = saa.box(x, y, kSsimWindow) * inv_n - mu_a * mu_a;
      const double var_b = sbb.box(x, y, kSsimWindow) * inv_n - mu_b * mu_b;
      const double cov = sab.box(x, y, kSsimWindow) * inv_n - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      total += num / den;
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

FidelityReport fidelity(const LinearImage& predicted, const LinearImage& reference) {
  FidelityReport r;
  r.psnr = psnr(predicted, reference);
  r.ssim = ssim(predicted, reference);
  const double lp = luminance_stats(predicted).mean_luminance;
  const double lr = luminance_stats(reference).mean_luminance;
  if (lr == 0.0) {
    r.delta_luminance_pct = lp == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    r.delta_luminance_pct = std::abs(lp - lr) / lr * 100.0;
  }
  return r;
}

LuminanceStats luminance_stats(const LinearImage& img) {
  LuminanceStats st;
  const std::size_t n = img.pixel_count();
  if (n == 0) return st;
  std::size_t saturated = 0;
  std::size_t dark = 0;
  double lum_sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double* px = img.pixel(p);
    lum_sum += pixel_luminance(px);
    if (px[0] >= kSaturatedLevel || px[1] >= kSaturatedLevel || px[2] >= kSaturatedLevel) ++saturated;
    if (px[0] <= kDarkLevel && px[1] <= kDarkLevel && px[2] <= kDarkLevel) ++dark;
  }
  st.mean_luminance = lum_sum / static_cast<double>(n);
  st.saturated_fraction = static_cast<double>(saturated) / static_cast<double>(n);
  st.dark_fraction = static_cast<double>(dark) / static_cast<double>(n);

  const int w = img.width();
  const int h = img.height();
  if (w >= 2 && h >= 2) {
    const ScalarMap g = gradient_magnitude(luminance(img));
    double sum = 0.0;
    for (int y = 0; y + 1 < h; ++y) {
      for (int x = 0; x + 1 < w; ++x) sum += g.at(x, y);
    }
    const double mean = sum / (static_cast<double>(w - 1) * (h - 1));
    st.gradient_energy = std::clamp(mean / kGradientNormalizer, 0.0, 1.0);
  }
  return st;
}

namespace decomposition_io {

void save(const std::filesystem::path& dir, const Decomposition& d) {
  d.validate();
  std::filesystem::create_directories(dir);
  pfm::write(dir / "ambient.pfm", d.ambient);
  pfm::write(dir / "light_map.pfm", d.light_map);
  std::ofstream out(dir / "light_color.json");
  if (!out) throw IoError("cannot create " + (dir / "light_color.json").string());
  out << nlohmann::json(d.light_color).dump() << '\n';
}

Decomposition load(const std::filesystem::path& dir) {
  Decomposition d;
  d.ambient = pfm::read_color(dir / "ambient.pfm");
  d.light_map = pfm::read_gray(dir / "light_map.pfm");
  std::ifstream in(dir / "light_color.json");
  if (!in) throw IoError("cannot open " + (dir / "light_color.json").string());
  nlohmann::json j;
  try {
    in >> j;
    if (!j.is_array() || j.size() != 3) throw IoError("light_color.json must hold three numbers");
    for (int c = 0; c < 3; ++c) d.light_color[c] = j.at(c).get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed light_color.json: ") + e.what());
  }
  // colors written as float-rounded decimals may drift from unit sum
  const double sum = d.light_color[0] + d.light_color[1] + d.light_color[2];
  if (sum > 0.0 && std::abs(sum - 1.0) <= 1e-6) {
    for (double& c : d.light_color) c /= sum;
  }
  d.validate();
  return d;
}

}  // namespace decomposition_io

}  // namespace luxsched
