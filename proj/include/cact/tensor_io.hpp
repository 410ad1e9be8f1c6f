#pragma once

#include <filesystem>

#include "cact/tensor.hpp"

namespace cact {

// CTF1 tensor file layout, all little-endian, no padding or checksum:
//   bytes 0..3   magic "CTF1" (the trailing '1' is the format version)
//   byte  4      ndim as u8
//   then         ndim u32 extents
//   then         product(extents) IEEE-754 binary32 values, row-major
inline constexpr int kCtfVersion = 1;

void write_tensor(const std::filesystem::path& path, const FeatureTensor& t);

// Throws FormatError (with the offending byte offset) on bad magic,
// unsupported version, size mismatch, or non-finite payload values.
FeatureTensor read_tensor(const std::filesystem::path& path);

}  // namespace cact
