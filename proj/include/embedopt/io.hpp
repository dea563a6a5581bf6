#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "embedopt/rewards.hpp"

namespace embedopt {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form ('.' separator, locale independent).
std::string format_double(double v);

/// Writes to "<path>.tmp" and renames over `path`; readers never see a
/// half-written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// Map files: "<stem>.json" header {shape, origin, spacing, dtype, byte_order}
/// and "<stem>.bin" raw little-endian float64 voxels in (x, y, z) row-major order.
void write_map(const std::filesystem::path& stem, const VoxelMap& map);
VoxelMap read_map(const std::filesystem::path& stem);

/// CSV with header "i,j,target,delta".
std::string constraints_to_csv(const std::vector<DistanceConstraint>& constraints);
std::vector<DistanceConstraint> constraints_from_csv(const std::string& text);

}  // namespace embedopt
