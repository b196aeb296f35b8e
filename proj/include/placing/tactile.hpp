#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "placing/rng.hpp"
#include "placing/so3.hpp"

namespace placing {

inline constexpr int kTaxelsPerSide = 16;
inline constexpr int kTaxelCount = kTaxelsPerSide * kTaxelsPerSide;
inline constexpr double kTaxelPitch = 0.005;  // m
inline constexpr int kRawCountMax = 4095;
inline constexpr double kGravity = 9.81;

// One stereo reading of the fingertip arrays. Values are normalized pressure
// in [0, 1]; the image frame is x = col - 7.5, y = row - 7.5 (y grows with
// the row index). Image x maps to gripper +y, image y to gripper +z, and the
// jaw axis is gripper x.
struct TactileFrame {
  using Grid = std::array<double, kTaxelCount>;
  Grid left{};
  Grid right{};

  static int idx(int row, int col) { return row * kTaxelsPerSide + col; }
  bool in_unit_range() const;
};

// Sensor counts as the hardware reports them.
struct RawTactileFrame {
  using Grid = std::array<uint16_t, kTaxelCount>;
  Grid left{};
  Grid right{};
};

RawTactileFrame quantize(const TactileFrame& f);
TactileFrame normalize(const RawTactileFrame& f);

struct Wrench {
  Eigen::Vector3d force{Eigen::Vector3d::Zero()};   // N, gripper frame
  Eigen::Vector3d torque{Eigen::Vector3d::Zero()};  // N*m, gripper frame
};

enum class Shape { Cylinder, Cuboid };

struct ObjectPrimitive {
  std::string id;
  Shape shape = Shape::Cylinder;
  // cylinder: dims = (radius, length, 0); cuboid: extents (x, y, z). z is the
  // long axis carrying the placing normal; for cuboids y spans the jaw
  // contact face.
  Eigen::Vector3d dims{0.0225, 0.15, 0.0};
  double mass = 0.3;                 // kg
  double stiffness_profile = 0.5;    // contact-patch spread, dimensionless
  double com_height_fraction = 0.5;  // COM position along the placing axis

  static ObjectPrimitive cylinder(std::string id, double radius, double length,
                                  double mass, double stiffness = 0.5,
                                  double com_fraction = 0.5);
  static ObjectPrimitive cuboid(std::string id, double ex, double ey, double ez,
                                double mass, double stiffness = 0.5,
                                double com_fraction = 0.5);

  double length() const;  // extent along the placing axis
  // Half-extents of the support polygon: x is the tilt direction used by the
  // stability model, y the direction across it.
  double support_halfwidth_x() const;
  double support_halfwidth_y() const;
  void validate() const;  // throws UsageError
};

struct Sample {
  std::string object_id;
  TactileFrame tactile;
  Wrench wrench;
  Rotation r_world_gripper;
  Rotation r_gripper_placing_gt;
  UnitVector3 z_gt_world;
  uint64_t seed = 0;
};

// Analytic contact footprint sampled at taxel centers, in-plane rotated by
// in_hand_angle and shifted by grasp_offset (meters, image frame). The right
// image is the left mirrored about the vertical taxel axis, then both get
// independent Gaussian noise and are clamped to [0, 1]. Throws
// EmptyContactError when the footprint misses the array entirely.
TactileFrame render_tactile(const ObjectPrimitive& obj, double in_hand_angle,
                            const Eigen::Vector2d& grasp_offset,
                            double noise_std, uint64_t seed);

// Gravity wrench of the grasped object about the sensor origin, expressed in
// the gripper frame, plus a constant end-effector bias roughly 10x larger,
// plus Gaussian noise. com_offset is the COM position in the object frame;
// noise_std is in tactile units and is scaled internally (40x for N, 4x for
// N*m).
Wrench synth_wrench(const ObjectPrimitive& obj, const Rotation& r_world_gripper,
                    const Rotation& r_gripper_object,
                    const Eigen::Vector3d& com_offset, double noise_std,
                    uint64_t seed);

// Pose-sampling constants shared by dataset generation and evaluation grids.
inline constexpr double kMaxArmTilt = 1.0471975511965976;      // 60 deg
inline constexpr double kDefaultInhandRange = 2.792526803190927;  // 160 deg
inline constexpr double kGraspOffsetRange = 0.01;  // m, uniform +-

// Gripper orientation with its z axis within max_tilt of world +z (uniform
// over that solid angle) and a free roll about it.
Rotation sample_arm_pose(Rng& rng, double max_tilt);

std::vector<Sample> generate_dataset(const std::vector<ObjectPrimitive>& objects,
                                     int n_arm_poses, int n_inhand_per_pose,
                                     double inhand_range, double noise_std,
                                     uint64_t seed, int threads = 1);

}  // namespace placing
