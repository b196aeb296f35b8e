#pragma once

#include <Eigen/Dense>

#include "placing/error.hpp"

namespace placing {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Orthonormality / unit-norm acceptance tolerance for all geometric types.
inline constexpr double kOrthoTol = 1e-9;
// Below this a vector no longer defines a usable direction.
inline constexpr double kDegenerateTol = 1e-9;
// dot(zp, zs) <= -1 + this  =>  treat the pair as antiparallel.
inline constexpr double kAntiparallelTol = 1e-12;

double rotation_drift(const Eigen::Matrix3d& m);
Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& m);

// Map an angle to [0, pi); distance helper for axis comparisons mod pi.
double angle_mod_pi(double a);
double angle_dist_mod_pi(double a, double b);

// 3x3 orthonormal matrix with det +1 (validated to kOrthoTol on entry).
class Rotation {
 public:
  Rotation() : m_(Eigen::Matrix3d::Identity()) {}
  explicit Rotation(const Eigen::Matrix3d& m);

  // Gram-Schmidt re-orthonormalization of the columns, then validation.
  static Rotation snapped(const Eigen::Matrix3d& m);

  static Rotation about_x(double angle);
  static Rotation about_y(double angle);
  static Rotation about_z(double angle);
  // Rodrigues formula; axis need not be unit length but must be nonzero.
  static Rotation from_axis_angle(const Eigen::Vector3d& axis, double angle);

  const Eigen::Matrix3d& matrix() const { return m_; }
  Rotation transposed() const { return Rotation(Eigen::Matrix3d(m_.transpose())); }
  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m_ * v; }
  Eigen::Vector3d z_column() const { return m_.col(2); }
  double drift() const { return rotation_drift(m_); }

 private:
  Eigen::Matrix3d m_;
};

// First two columns of a rotation matrix before orthonormalization; this is
// the 6-value network output representation.
struct Rotation6d {
  Eigen::Vector3d a1{Eigen::Vector3d::Zero()};
  Eigen::Vector3d a2{Eigen::Vector3d::Zero()};
};

// Unit-norm 3-vector; normalized on construction.
class UnitVector3 {
 public:
  UnitVector3() : v_(Eigen::Vector3d::UnitZ()) {}
  static UnitVector3 from(const Eigen::Vector3d& v);
  static UnitVector3 unit_x() { return from(Eigen::Vector3d::UnitX()); }
  static UnitVector3 unit_y() { return from(Eigen::Vector3d::UnitY()); }
  static UnitVector3 unit_z() { return from(Eigen::Vector3d::UnitZ()); }

  const Eigen::Vector3d& vec() const { return v_; }
  double dot(const UnitVector3& o) const { return v_.dot(o.v_); }

 private:
  Eigen::Vector3d v_;
};

// a * b, re-orthonormalized when accumulated drift exceeds kOrthoTol.
Rotation compose(const Rotation& a, const Rotation& b);

// World-frame placing normal of the grasped object:
// (R_world_gripper * R_gripper_placing) applied to the canonical +z.
UnitVector3 placing_normal(const Rotation& r_world_gripper,
                           const Rotation& r_gripper_placing);

// World surface normal (+z, the table) expressed in the gripper frame.
UnitVector3 project_surface_normal(const Rotation& r_world_gripper);

// Rotation (gripper frame) that takes zp_gripper onto zs_gripper: axis
// zp x zs, angle acos(zp . zs). Antiparallel inputs get a pi flip about an
// axis chosen so the alignment post-condition still holds exactly.
Rotation corrective_rotation(const UnitVector3& zp_gripper,
                             const UnitVector3& zs_gripper);

// Gram-Schmidt on (a1, a2), third column by cross product.
Rotation sixd_to_rotation(const Rotation6d& p);

// Angle in [0, pi] between the predicted world placing normal
// (r_world_gripper * pred * z) and the ground-truth world normal.
double angular_loss(const Rotation& pred, const Rotation& r_world_gripper,
                    const UnitVector3& z_gt_world);

}  // namespace placing
