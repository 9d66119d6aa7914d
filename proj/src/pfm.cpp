#include "luxsched/pfm.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace luxsched::pfm {
namespace {

struct Header {
  int channels = 0;
  int width = 0;
  int height = 0;
  bool little_endian = true;
};

Header read_header(std::istream& in) {
  Header h;
  std::string magic;
  in >> magic;
  if (magic == "PF") {
    h.channels = 3;
  } else if (magic == "Pf") {
    h.channels = 1;
  } else {
    throw IoError("not a PFM stream (bad magic '" + magic + "')");
  }
  double scale = 0.0;
  if (!(in >> h.width >> h.height >> scale)) throw IoError("truncated PFM header");
  if (h.width <= 0 || h.height <= 0) throw IoError("PFM dimensions must be positive");
  if (scale == 0.0 || !std::isfinite(scale)) throw IoError("PFM scale must be finite and non-zero");
  h.little_endian = scale < 0.0;
  // exactly one whitespace byte separates the header from the raster
  if (!std::isspace(in.get())) throw IoError("malformed PFM header terminator");
  return h;
}

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xFF000000u) >> 24) | ((v & 0x00FF0000u) >> 8) | ((v & 0x0000FF00u) << 8) |
         ((v & 0x000000FFu) << 24);
}

template <int C>
Raster<C> read_raster(std::istream& in) {
  const Header h = read_header(in);
  if (h.channels != C) {
    throw IoError(C == 3 ? "expected color PFM (PF), found grayscale (Pf)"
                         : "expected grayscale PFM (Pf), found color (PF)");
  }
  const std::size_t row_len = static_cast<std::size_t>(h.width) * C;
  std::vector<std::uint32_t> raw(row_len * h.height);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
  if (in.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t))) {
    throw IoError("truncated PFM raster");
  }
  const bool swap = h.little_endian != (std::endian::native == std::endian::little);
  Raster<C> out(h.width, h.height);
  auto values = out.values();
  for (int file_row = 0; file_row < h.height; ++file_row) {
    const int y = h.height - 1 - file_row;
    for (std::size_t i = 0; i < row_len; ++i) {
      std::uint32_t bits = raw[file_row * row_len + i];
      if (swap) bits = byteswap32(bits);
      values[static_cast<std::size_t>(y) * row_len + i] = std::bit_cast<float>(bits);
    }
  }
  return out;
}

template <int C>
void write_raster(std::ostream& out, const Raster<C>& r) {
  if (r.empty()) throw ValidationError("cannot write an empty raster as PFM");
  out << (C == 3 ? "PF" : "Pf") << '\n' << r.width() << ' ' << r.height() << '\n' << "-1.0\n";
  const std::size_t row_len = static_cast<std::size_t>(r.width()) * C;
  std::vector<std::uint32_t> row(row_len);
  const auto values = r.values();
  for (int y = r.height() - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < row_len; ++i) {
      std::uint32_t bits =
          std::bit_cast<std::uint32_t>(static_cast<float>(values[static_cast<std::size_t>(y) * row_len + i]));
      if constexpr (std::endian::native != std::endian::little) bits = byteswap32(bits);
      row[i] = bits;
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(std::uint32_t)));
  }
  if (!out) throw IoError("failed writing PFM stream");
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  return out;
}

}  // namespace

LinearImage read_color(std::istream& in) { return read_raster<3>(in); }
ScalarMap read_gray(std::istream& in) { return read_raster<1>(in); }

LinearImage read_color(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_raster<3>(in);
}
ScalarMap read_gray(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_raster<1>(in);
}

void write(std::ostream& out, const LinearImage& img) { write_raster(out, img); }
void write(std::ostream& out, const ScalarMap& map) { write_raster(out, map); }

void write(const std::filesystem::path& path, const LinearImage& img) {
  auto out = open_out(path);
  write_raster(out, img);
}
void write(const std::filesystem::path& path, const ScalarMap& map) {
  auto out = open_out(path);
  write_raster(out, map);
}

}  // namespace luxsched::pfm
