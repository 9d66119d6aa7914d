#pragma once

#include <filesystem>
#include <iosfwd>

#include "luxsched/raster.hpp"

namespace luxsched::pfm {

// Portable Float Map I/O. Color images use the "PF" header, scalar maps "Pf".
// Files are written little-endian (scale -1.0) with rows stored bottom-up;
// both endiannesses are accepted on read. Values are stored as 32-bit floats,
// so a raster survives a write/read cycle bit-exactly only if every value is
// representable as a float.

LinearImage read_color(std::istream& in);
LinearImage read_color(const std::filesystem::path& path);
ScalarMap read_gray(std::istream& in);
ScalarMap read_gray(const std::filesystem::path& path);

void write(std::ostream& out, const LinearImage& img);
void write(const std::filesystem::path& path, const LinearImage& img);
void write(std::ostream& out, const ScalarMap& map);
void write(const std::filesystem::path& path, const ScalarMap& map);

}  // namespace luxsched::pfm
