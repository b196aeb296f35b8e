#pragma once

#include <string>
#include <vector>

#include "placing/tactile.hpp"

namespace placing {

// Text format, one sample per line, space-separated:
//   object_id  left[256]  right[256]  fx fy fz tx ty tz
//   r_world_gripper[9 row-major]  r_gripper_placing[9 row-major]
//   z_gt_world[3]  seed
// Doubles are shortest round-trip decimals: parsing restores the exact bits,
// and regenerating a dataset from the same seed reproduces the file
// byte-for-byte.
std::string serialize_dataset(const std::vector<Sample>& samples);
void write_dataset(const std::string& path, const std::vector<Sample>& samples);

// Parses and validates: token counts, tactile cells in [0, 1], orthonormal
// rotations, unit z_gt consistent with the pose labels. Violations throw
// IoError naming the line.
std::vector<Sample> parse_dataset(const std::string& text);
std::vector<Sample> read_dataset(const std::string& path);

}  // namespace placing
