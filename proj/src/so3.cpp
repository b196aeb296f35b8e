#include "placing/so3.hpp"

#include <algorithm>
#include <cmath>

namespace placing {
namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& a) {
  Eigen::Matrix3d s;
  s << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
      -a.y(), a.x(), 0.0;
  return s;
}

}  // namespace

double rotation_drift(const Eigen::Matrix3d& m) {
  const Eigen::Matrix3d gram = m.transpose() * m - Eigen::Matrix3d::Identity();
  return std::max(gram.cwiseAbs().maxCoeff(), std::abs(m.determinant() - 1.0));
}

Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& m) {
  Eigen::Vector3d c1 = m.col(0);
  const double n1 = c1.norm();
  if (n1 <= kDegenerateTol)
    throw DegenerateInputError("orthonormalized: first column has near-zero norm");
  c1 /= n1;
  Eigen::Vector3d c2 = m.col(1) - c1.dot(m.col(1)) * c1;
  const double n2 = c2.norm();
  if (n2 <= kDegenerateTol)
    throw DegenerateInputError("orthonormalized: first two columns are near-parallel");
  c2 /= n2;
  Eigen::Matrix3d out;
  out.col(0) = c1;
  out.col(1) = c2;
  out.col(2) = c1.cross(c2);
  return out;
}

double angle_mod_pi(double a) {
  double r = std::fmod(a, kPi);
  if (r < 0.0) r += kPi;
  if (r >= kPi) r = 0.0;  // guard against fmod rounding straight onto pi
  return r;
}

double angle_dist_mod_pi(double a, double b) {
  const double d = std::abs(angle_mod_pi(a) - angle_mod_pi(b));
  return std::min(d, kPi - d);
}

Rotation::Rotation(const Eigen::Matrix3d& m) : m_(m) {
  if (rotation_drift(m_) > kOrthoTol)
    throw DegenerateInputError("Rotation: matrix is not orthonormal with det +1");
}

Rotation Rotation::snapped(const Eigen::Matrix3d& m) {
  return Rotation(orthonormalized(m));
}

Rotation Rotation::about_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3d m;
  m << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return Rotation(m);
}

Rotation Rotation::about_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3d m;
  m << c, 0, s,
       0, 1, 0,
      -s, 0, c;
  return Rotation(m);
}

Rotation Rotation::about_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3d m;
  m << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return Rotation(m);
}

Rotation Rotation::from_axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (n <= kDegenerateTol)
    throw DegenerateInputError("from_axis_angle: axis has near-zero norm");
  const Eigen::Matrix3d k = skew(axis / n);
  const Eigen::Matrix3d m = Eigen::Matrix3d::Identity() + std::sin(angle) * k +
                            (1.0 - std::cos(angle)) * (k * k);
  return Rotation(m);
}

UnitVector3 UnitVector3::from(const Eigen::Vector3d& v) {
  const double n = v.norm();
  if (n <= kDegenerateTol)
    throw DegenerateInputError("UnitVector3: vector has near-zero norm");
  UnitVector3 u;
  u.v_ = v / n;
  return u;
}

Rotation compose(const Rotation& a, const Rotation& b) {
  Eigen::Matrix3d m = a.matrix() * b.matrix();
  if (rotation_drift(m) > kOrthoTol) m = orthonormalized(m);
  return Rotation(m);
}

UnitVector3 placing_normal(const Rotation& r_world_gripper,
                           const Rotation& r_gripper_placing) {
  return UnitVector3::from(r_world_gripper.matrix() *
                           r_gripper_placing.matrix().col(2));
}

UnitVector3 project_surface_normal(const Rotation& r_world_gripper) {
  // R^T * z is the third row of R.
  return UnitVector3::from(r_world_gripper.matrix().row(2).transpose());
}

namespace {

// Rotation taking a onto b along the shorter arc. Only valid away from the
// antiparallel pole; there the axis a x b loses all direction information.
Rotation shorter_arc(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d cross = a.cross(b);
  const double cn = cross.norm();
  if (cn == 0.0) return Rotation();  // identical directions
  const double dot = std::clamp(a.dot(b), -1.0, 1.0);
  // atan2(|a x b|, a.b) is acos(a.b) evaluated without the precision loss
  // acos suffers near +-1, which the 1e-9 alignment post-condition needs.
  return Rotation::from_axis_angle(cross / cn, std::atan2(cn, dot));
}

}  // namespace

Rotation corrective_rotation(const UnitVector3& zp_gripper,
                             const UnitVector3& zs_gripper) {
  const Eigen::Vector3d& p = zp_gripper.vec();
  const Eigen::Vector3d& s = zs_gripper.vec();
  const double dot = std::clamp(p.dot(s), -1.0, 1.0);

  if (dot <= -1.0 + kAntiparallelTol) {
    // The axis p x s is numerically gone. Flip by pi about an axis orthogonal
    // to p (projected world-x, falling back to world-y near the x pole); that
    // maps p onto -p, and a small residual arc -p -> s absorbs whatever
    // perpendicular component s still has. The residual angle is tiny, so the
    // ill-conditioned axis direction cannot hurt the alignment.
    Eigen::Vector3d q = Eigen::Vector3d::UnitX() - p.x() * p;
    if (q.norm() <= kDegenerateTol) q = Eigen::Vector3d::UnitY() - p.y() * p;
    const Rotation flip = Rotation::from_axis_angle(q, kPi);
    return compose(shorter_arc(flip * p, s), flip);
  }

  return shorter_arc(p, s);
}

Rotation sixd_to_rotation(const Rotation6d& p) {
  const double n1 = p.a1.norm();
  if (n1 <= kDegenerateTol)
    throw DegenerateInputError("sixd_to_rotation: a1 has near-zero norm");
  const Eigen::Vector3d c1 = p.a1 / n1;
  const Eigen::Vector3d u2 = p.a2 - c1.dot(p.a2) * c1;
  const double n2 = u2.norm();
  if (n2 <= kDegenerateTol)
    throw DegenerateInputError("sixd_to_rotation: a2 is parallel to a1");
  const Eigen::Vector3d c2 = u2 / n2;
  Eigen::Matrix3d m;
  m.col(0) = c1;
  m.col(1) = c2;
  m.col(2) = c1.cross(c2);
  return Rotation(m);
}

double angular_loss(const Rotation& pred, const Rotation& r_world_gripper,
                    const UnitVector3& z_gt_world) {
  const Eigen::Vector3d n_world = r_world_gripper.matrix() * pred.z_column();
  return std::acos(std::clamp(n_world.dot(z_gt_world.vec()), -1.0, 1.0));
}

}  // namespace placing
