#include <bit>
#include <cstring>
#include <random>
#include <sstream>

#include "doctest.h"
#include "luxsched/pfm.hpp"
#include "support.hpp"

using namespace luxsched;

namespace {

template <int C>
Raster<C> float_raster(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-2.0f, 5.0f);
  Raster<C> r(w, h);
  for (double& v : r.values()) v = u(rng);
  return r;
}

}  // namespace

TEST_CASE("color pfm round trip is bit exact") {
  std::mt19937_64 rng(1);
  const LinearImage img = float_raster<3>(13, 7, rng);
  std::stringstream ss;
  pfm::write(ss, img);
  CHECK(ss.str().rfind("PF\n13 7\n-1", 0) == 0);
  CHECK(pfm::read_color(ss) == img);
}

TEST_CASE("gray pfm round trip through a file") {
  testing::TempDir dir("pfm");
  std::mt19937_64 rng(2);
  const ScalarMap map = float_raster<1>(5, 9, rng);
  pfm::write(dir / "m.pfm", map);
  CHECK(pfm::read_gray(dir / "m.pfm") == map);
  CHECK_THROWS_AS(pfm::read_color(dir / "m.pfm"), IoError);
}

TEST_CASE("rows are stored bottom-up") {
  LinearImage img(1, 2);
  img.at(0, 0, 0) = 1.0;  // top
  img.at(0, 1, 0) = 2.0;  // bottom
  std::stringstream ss;
  pfm::write(ss, img);
  const std::string s = ss.str();
  float first;
  std::memcpy(&first, s.data() + s.size() - 6 * sizeof(float), sizeof(float));
  if constexpr (std::endian::native == std::endian::little) CHECK(first == 2.0f);
}

TEST_CASE("big-endian files are read") {
  const float values[3] = {0.25f, 0.5f, 0.75f};
  std::string body = "PF\n1 1\n1.0\n";
  for (float v : values) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 3; i >= 0; --i) body.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  std::stringstream ss(body);
  const LinearImage img = pfm::read_color(ss);
  CHECK(img.at(0, 0, 0) == 0.25);
  CHECK(img.at(0, 0, 2) == 0.75);
}

TEST_CASE("malformed pfm") {
  std::stringstream truncated("PF\n2 2\n-1.0\nabc");
  CHECK_THROWS_AS(pfm::read_color(truncated), IoError);
  std::stringstream bad_magic("P6\n2 2\n255\n");
  CHECK_THROWS_AS(pfm::read_color(bad_magic), IoError);
  CHECK_THROWS_AS(pfm::read_color(std::filesystem::path("/nonexistent/x.pfm")), IoError);
}
