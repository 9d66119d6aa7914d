#include <cmath>
#include <random>

#include "doctest.h"
#include "luxsched/imaging.hpp"
#include "support.hpp"

using namespace luxsched;
using testing::random_decomposition;
using testing::random_image;

namespace {

Decomposition constant_decomposition(int w, int h, double a, double s, std::array<double, 3> c) {
  Decomposition d;
  d.ambient = LinearImage(w, h, a);
  d.light_map = ScalarMap(w, h, s);
  d.light_color = c;
  return d;
}

LinearImage product(const Decomposition& d) {
  LinearImage out(d.width(), d.height());
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) out.pixel(p)[c] = d.light_map.values()[p] * d.light_color[c];
  }
  return out;
}

double relative_frobenius(const LinearImage& got, const LinearImage& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got.values()[i] - want.values()[i]) * (got.values()[i] - want.values()[i]);
    den += want.values()[i] * want.values()[i];
  }
  return std::sqrt(num / den);
}

// Straight per-window SSIM, recomputing every window from scratch.
double ssim_reference(const LinearImage& a, const LinearImage& b) {
  const int w = a.width(), h = a.height(), n = 8;
  const double c1 = 1e-4, c2 = 9e-4;
  auto lum = [](const LinearImage& img, int x, int y) {
    return (img.at(x, y, 0) + img.at(x, y, 1) + img.at(x, y, 2)) / 3.0;
  };
  double total = 0.0;
  int windows = 0;
  for (int y0 = 0; y0 + n <= h; ++y0) {
    for (int x0 = 0; x0 + n <= w; ++x0) {
      double ma = 0, mb = 0;
      for (int y = y0; y < y0 + n; ++y)
        for (int x = x0; x < x0 + n; ++x) {
          ma += lum(a, x, y);
          mb += lum(b, x, y);
        }
      ma /= n * n;
      mb /= n * n;
      double va = 0, vb = 0, cov = 0;
      for (int y = y0; y < y0 + n; ++y)
        for (int x = x0; x < x0 + n; ++x) {
          const double da = lum(a, x, y) - ma, db = lum(b, x, y) - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= n * n;
      vb /= n * n;
      cov /= n * n;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  }
  return total / windows;
}

}  // namespace

TEST_CASE("relight at zero is the ambient image bit for bit") {
  std::mt19937_64 rng(3);
  const Decomposition d = random_decomposition(17, 11, rng);
  CHECK(relight(d, 0.0) == d.ambient);
}

TEST_CASE("relight of constant maps") {
  const auto d = constant_decomposition(4, 3, 0.2, 0.6, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  const LinearImage lit = relight(d, 1.0);
  for (double v : lit.values()) CHECK(v == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("relight is linear in k") {
  std::mt19937_64 rng(5);
  const Decomposition d = random_decomposition(13, 9, rng);
  const LinearImage full = relight(d, 1.0);
  const LinearImage mid = relight(d, 0.37);
  for (std::size_t i = 0; i < mid.size(); ++i) {
    const double expect = d.ambient.values()[i] + 0.37 * (full.values()[i] - d.ambient.values()[i]);
    CHECK(std::abs(mid.values()[i] - expect) < 1e-12);
  }

  const double k1 = 0.1, k2 = 0.45, k3 = 0.9;
  const LinearImage a = relight(d, k1), b = relight(d, k2), c = relight(d, k3);
  const double s = (k2 - k1) / (k3 - k1);
  for (std::size_t i = 0; i < b.size(); ++i) {
    CHECK(std::abs(b.values()[i] - (a.values()[i] + s * (c.values()[i] - a.values()[i]))) < 1e-12);
  }
}

TEST_CASE("relight rejects bad input") {
  std::mt19937_64 rng(1);
  Decomposition d = random_decomposition(4, 4, rng);
  CHECK_THROWS_AS(relight(d, 1.5), ValidationError);
  CHECK_THROWS_AS(relight(d, -0.1), ValidationError);
  d.light_map = ScalarMap(3, 4, 0.1);
  CHECK_THROWS_AS(relight(d, 0.5), InvalidDecompositionError);
}

TEST_CASE("clip_sensor clamps and is idempotent") {
  LinearImage img(1, 1);
  img.at(0, 0, 0) = 1.7;
  img.at(0, 0, 1) = 0.5;
  img.at(0, 0, 2) = -0.1;
  const LinearImage c = clip_sensor(img);
  CHECK(c.at(0, 0, 0) == 1.0);
  CHECK(c.at(0, 0, 1) == 0.5);
  CHECK(c.at(0, 0, 2) == 0.0);
  std::mt19937_64 rng(9);
  const LinearImage r = clip_sensor(random_image(8, 8, rng, -1.0, 2.0));
  CHECK(clip_sensor(r) == r);
}

TEST_CASE("paired decomposition round trip") {
  std::mt19937_64 rng(11);
  const Decomposition truth = random_decomposition(32, 24, rng);
  const Decomposition got = decompose_paired(relight(truth, 0.25), 0.25, relight(truth, 0.75), 0.75);
  got.validate();
  CHECK(relative_frobenius(product(got), product(truth)) < 1e-6);
  CHECK(relative_frobenius(got.ambient, truth.ambient) < 1e-6);
  CHECK(psnr(relight(got, 0.25), relight(truth, 0.25)) > 60.0);
}

TEST_CASE("exactly rank-1 difference recovers the color") {
  std::mt19937_64 rng(12);
  Decomposition truth = random_decomposition(10, 10, rng);
  truth.light_color = {0.5, 0.3, 0.2};
  const Decomposition got = decompose_paired(relight(truth, 0.0), 0.0, relight(truth, 1.0), 1.0);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(got.light_color[c] - truth.light_color[c]) < 1e-9);
}

TEST_CASE("identical captures give no light") {
  std::mt19937_64 rng(13);
  const LinearImage img = random_image(6, 5, rng);
  const Decomposition d = decompose_paired(img, 0.2, img, 0.8);
  for (double s : d.light_map.values()) CHECK(s == 0.0);
  for (double c : d.light_color) CHECK(c == doctest::Approx(1.0 / 3.0));
  CHECK(d.ambient == img);
}

TEST_CASE("decompose error contract") {
  std::mt19937_64 rng(14);
  const LinearImage a = random_image(6, 5, rng);
  CHECK_THROWS_AS(decompose_paired(a, 0.5, a, 0.5), DegeneratePairError);
  CHECK_THROWS_AS(decompose_paired(a, 0.1, random_image(5, 5, rng), 0.5), DimensionMismatchError);

  // swapped captures would need negative light
  const Decomposition truth = random_decomposition(6, 5, rng);
  CHECK_THROWS_AS(decompose_paired(relight(truth, 0.8), 0.2, relight(truth, 0.2), 0.8), NonPhysicalLightError);

  // opposite-signed channels cannot come from one lamp
  LinearImage i1(4, 4, 0.5), i2(4, 4, 0.5);
  for (std::size_t p = 0; p < i2.pixel_count(); ++p) {
    i2.pixel(p)[0] += 0.2 * (1 + p % 3);
    i2.pixel(p)[2] -= 0.2 * (1 + p % 3);
  }
  CHECK_THROWS_AS(decompose_paired(i1, 0.0, i2, 1.0), NonPhysicalLightError);
}

TEST_CASE("clipped pixels are masked out of the fit") {
  std::mt19937_64 rng(15);
  Decomposition truth = random_decomposition(20, 20, rng);
  for (int x = 0; x < 5; ++x) truth.light_map.at(x, 0) = 3.0;  // blows out at k = 0.75
  const LinearImage i1 = clip_sensor(relight(truth, 0.25));
  const LinearImage i2 = clip_sensor(relight(truth, 0.75));
  const Decomposition got = decompose_paired(i1, 0.25, i2, 0.75);
  for (int c = 0; c < 3; ++c) CHECK(got.light_color[c] == doctest::Approx(truth.light_color[c]).epsilon(1e-9));
  for (int x = 5; x < 20; ++x) CHECK(got.light_map.at(x, 3) == doctest::Approx(truth.light_map.at(x, 3)));
  for (double v : got.ambient.values()) CHECK(v >= 0.0);
}

TEST_CASE("psnr") {
  LinearImage a(8, 8, 0.3), b(8, 8, 0.4);
  CHECK(std::isinf(psnr(a, a)));
  CHECK(psnr(a, b) == doctest::Approx(20.0));

  std::mt19937_64 rng(21);
  const LinearImage x = random_image(9, 7, rng), y = random_image(9, 7, rng);
  double sse = 0.0;
  for (int yy = 0; yy < 7; ++yy)
    for (int xx = 0; xx < 9; ++xx)
      for (int c = 0; c < 3; ++c) sse += std::pow(x.at(xx, yy, c) - y.at(xx, yy, c), 2);
  CHECK(psnr(x, y) == doctest::Approx(-10.0 * std::log10(sse / (9 * 7 * 3))).epsilon(1e-12));
  CHECK(psnr(x, y) == psnr(y, x));
  CHECK_THROWS_AS(psnr(x, LinearImage(8, 7)), DimensionMismatchError);
}

TEST_CASE("ssim") {
  std::mt19937_64 rng(22);
  const LinearImage x = random_image(20, 14, rng), y = random_image(20, 14, rng);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(x, y) == doctest::Approx(ssim_reference(x, y)).epsilon(1e-10));
  CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));

  LinearImage pattern(16, 16), negative(16, 16);
  for (int yy = 0; yy < 16; ++yy)
    for (int xx = 0; xx < 16; ++xx)
      for (int c = 0; c < 3; ++c) {
        pattern.at(xx, yy, c) = ((xx + yy) % 2) ? 0.8 : 0.2;
        negative.at(xx, yy, c) = 1.0 - pattern.at(xx, yy, c);
      }
  CHECK(ssim(pattern, negative) < 0.0);
  CHECK_THROWS_AS(ssim(LinearImage(7, 20), LinearImage(7, 20)), ValidationError);
}

TEST_CASE("luminance stats") {
  const LuminanceStats white = luminance_stats(LinearImage(10, 10, 1.0));
  CHECK(white.saturated_fraction == 1.0);
  CHECK(white.dark_fraction == 0.0);
  CHECK(white.gradient_energy == 0.0);
  CHECK(luminance_stats(LinearImage(10, 10, 0.0)).dark_fraction == 1.0);

  // vertical step: only the column left of the edge has a nonzero forward difference
  const int w = 12, h = 9;
  LinearImage step(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = w / 2; x < w; ++x)
      for (int c = 0; c < 3; ++c) step.at(x, y, c) = 1.0;
  const double edge_pixels = h - 1;
  const double interior = double(w - 1) * (h - 1);
  const LuminanceStats st = luminance_stats(step);
  CHECK(st.gradient_energy == doctest::Approx(edge_pixels / interior / 0.5));
  CHECK(st.mean_luminance == doctest::Approx(0.5));
  CHECK(st.saturated_fraction == doctest::Approx(0.5));
  CHECK(st.dark_fraction == doctest::Approx(0.5));
}

TEST_CASE("histogram sums to one") {
  std::mt19937_64 rng(23);
  const auto hist = luminance_histogram<8>(random_image(13, 7, rng));
  double sum = 0.0;
  for (double v : hist) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  const auto top = luminance_histogram<8>(LinearImage(3, 3, 1.0));
  CHECK(top[7] == 1.0);
}

TEST_CASE("fidelity report") {
  const FidelityReport r = fidelity(LinearImage(8, 8, 0.55), LinearImage(8, 8, 0.5));
  CHECK(r.psnr == doctest::Approx(20.0 * std::log10(1.0 / 0.05)));
  CHECK(r.delta_luminance_pct == doctest::Approx(10.0));
  CHECK(r.ssim <= 1.0);
}

TEST_CASE("decomposition directory round trip") {
  testing::TempDir dir("decomp");
  std::mt19937_64 rng(24);
  Decomposition d = random_decomposition(7, 5, rng);
  for (double& v : d.ambient.values()) v = static_cast<float>(v);
  for (double& v : d.light_map.values()) v = static_cast<float>(v);
  decomposition_io::save(dir.path(), d);
  const Decomposition back = decomposition_io::load(dir.path());
  CHECK(back.ambient == d.ambient);
  CHECK(back.light_map == d.light_map);
  for (int c = 0; c < 3; ++c) CHECK(back.light_color[c] == doctest::Approx(d.light_color[c]).epsilon(1e-15));
}
