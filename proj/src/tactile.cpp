#include "placing/tactile.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "placing/error.hpp"
#include "placing/parallel.hpp"

namespace placing {
namespace {

constexpr double kCenter = (kTaxelsPerSide - 1) / 2.0;  // 7.5

// Cylinder: the jaw flattens the curved face into a band whose pressure falls
// off parabolically across the axis. Amplitude and width chosen so a train
// cylinder saturates nothing and clears the binarization threshold by a wide
// margin.
constexpr double kCylinderPeak = 0.85;
constexpr double kMinBandHalfwidth = 0.35;  // taxels, guards tiny stiffness

// Cuboid: a flat face carries little pressure in the middle; most load sits
// in two ridges where the face edges bite, concentrated near the grasp line.
// The interior fill is faint but above the binarization threshold, so the
// noiseless footprint reads as a filled rectangle.
constexpr double kCuboidFill = 0.065;
constexpr double kCuboidEdgeAmp = 0.55;
constexpr double kCuboidEdgeWidth = 1.3;   // taxels, decay across the ridge
constexpr double kCuboidLoadSpread = 3.0;   // taxels, ridge decay along axis
constexpr double kCuboidFillSpread = 16.0;  // taxels, fill decay along axis

constexpr uint64_t kNoiseSalt = 0x746e6f69;
constexpr uint64_t kWrenchSalt = 0x77726e63;
constexpr uint64_t kArmPoseSalt = 0x61726d70;
constexpr uint64_t kVariationSalt = 0x76617269;
constexpr uint64_t kSampleSalt = 0x73616d70;
constexpr int kMaxContactRetries = 16;

// Pressure at signed footprint coordinates: s along the object axis, t
// across it, both in taxel units.
double contact_profile(const ObjectPrimitive& obj, double s, double t) {
  if (obj.shape == Shape::Cylinder) {
    const double half_len = 0.5 * obj.dims[1] / kTaxelPitch;
    if (std::abs(s) > half_len) return 0.0;
    const double radius = obj.dims[0] / kTaxelPitch;
    const double w = std::max(kMinBandHalfwidth, obj.stiffness_profile * radius);
    const double q = t / w;
    if (std::abs(q) >= 1.0) return 0.0;
    return kCylinderPeak * (1.0 - q * q);
  }
  const double hl = 0.5 * obj.dims[2] / kTaxelPitch;
  const double hw = 0.5 * obj.dims[1] / kTaxelPitch;
  if (std::abs(s) > hl || std::abs(t) > hw) return 0.0;
  const double d_edge = std::min(hl - std::abs(s), hw - std::abs(t));
  const double ridge_w = std::max(0.3, obj.stiffness_profile * kCuboidEdgeWidth * 2.0);
  const double along = std::exp(-(s * s) / (kCuboidLoadSpread * kCuboidLoadSpread));
  const double fill_along =
      std::exp(-(s * s) / (kCuboidFillSpread * kCuboidFillSpread));
  const double v = kCuboidFill * fill_along +
                   kCuboidEdgeAmp * std::exp(-d_edge / ridge_w) * along;
  return std::min(1.0, v);
}

}  // namespace

bool TactileFrame::in_unit_range() const {
  auto ok = [](const Grid& g) {
    return std::all_of(g.begin(), g.end(), [](double v) {
      return std::isfinite(v) && v >= 0.0 && v <= 1.0;
    });
  };
  return ok(left) && ok(right);
}

RawTactileFrame quantize(const TactileFrame& f) {
  RawTactileFrame raw;
  for (int i = 0; i < kTaxelCount; ++i) {
    const double l = std::clamp(f.left[i], 0.0, 1.0);
    const double r = std::clamp(f.right[i], 0.0, 1.0);
    raw.left[i] = static_cast<uint16_t>(std::lround(l * kRawCountMax));
    raw.right[i] = static_cast<uint16_t>(std::lround(r * kRawCountMax));
  }
  return raw;
}

TactileFrame normalize(const RawTactileFrame& f) {
  TactileFrame out;
  for (int i = 0; i < kTaxelCount; ++i) {
    out.left[i] = std::min(f.left[i], static_cast<uint16_t>(kRawCountMax)) /
                  static_cast<double>(kRawCountMax);
    out.right[i] = std::min(f.right[i], static_cast<uint16_t>(kRawCountMax)) /
                   static_cast<double>(kRawCountMax);
  }
  return out;
}

ObjectPrimitive ObjectPrimitive::cylinder(std::string id, double radius,
                                          double length, double mass,
                                          double stiffness, double com_fraction) {
  ObjectPrimitive o;
  o.id = std::move(id);
  o.shape = Shape::Cylinder;
  o.dims = Eigen::Vector3d(radius, length, 0.0);
  o.mass = mass;
  o.stiffness_profile = stiffness;
  o.com_height_fraction = com_fraction;
  o.validate();
  return o;
}

ObjectPrimitive ObjectPrimitive::cuboid(std::string id, double ex, double ey,
                                        double ez, double mass, double stiffness,
                                        double com_fraction) {
  ObjectPrimitive o;
  o.id = std::move(id);
  o.shape = Shape::Cuboid;
  o.dims = Eigen::Vector3d(ex, ey, ez);
  o.mass = mass;
  o.stiffness_profile = stiffness;
  o.com_height_fraction = com_fraction;
  o.validate();
  return o;
}

double ObjectPrimitive::length() const {
  return shape == Shape::Cylinder ? dims[1] : dims[2];
}

double ObjectPrimitive::support_halfwidth_x() const {
  return shape == Shape::Cylinder ? dims[0] : 0.5 * dims[0];
}

double ObjectPrimitive::support_halfwidth_y() const {
  return shape == Shape::Cylinder ? dims[0] : 0.5 * dims[1];
}

void ObjectPrimitive::validate() const {
  if (id.empty() || id.find_first_of(" \t\n\r") != std::string::npos)
    throw UsageError("object id must be a non-empty token without whitespace");
  const int needed = shape == Shape::Cylinder ? 2 : 3;
  for (int i = 0; i < needed; ++i)
    if (!(dims[i] > 0.0))
      throw UsageError("object '" + id + "' has a non-positive dimension");
  if (!(mass > 0.0)) throw UsageError("object '" + id + "' has non-positive mass");
  if (!(stiffness_profile >= 0.0))
    throw UsageError("object '" + id + "' has negative stiffness_profile");
  if (!(com_height_fraction > 0.0 && com_height_fraction < 1.0))
    throw UsageError("object '" + id + "' needs com_height_fraction in (0, 1)");
}

TactileFrame render_tactile(const ObjectPrimitive& obj, double in_hand_angle,
                            const Eigen::Vector2d& grasp_offset,
                            double noise_std, uint64_t seed) {
  obj.validate();
  if (!(noise_std >= 0.0)) throw UsageError("noise_std must be >= 0");

  // A zero in-hand angle leaves the object axis vertical in the image.
  const double phi = kPi / 2.0 + in_hand_angle;
  const Eigen::Vector2d axis(std::cos(phi), std::sin(phi));
  const Eigen::Vector2d across(-axis.y(), axis.x());
  const Eigen::Vector2d center = grasp_offset / kTaxelPitch;

  TactileFrame f;
  double peak = 0.0;
  for (int row = 0; row < kTaxelsPerSide; ++row) {
    for (int col = 0; col < kTaxelsPerSide; ++col) {
      const Eigen::Vector2d p(col - kCenter - center.x(),
                              row - kCenter - center.y());
      const double v = contact_profile(obj, p.dot(axis), p.dot(across));
      f.left[TactileFrame::idx(row, col)] = v;
      peak = std::max(peak, v);
    }
  }
  if (peak <= 0.0)
    throw EmptyContactError("footprint of '" + obj.id + "' misses the array");

  // The opposing finger sees the jaw-mirrored footprint; sensor noise is
  // per-taxel and independent, so mirror first.
  for (int row = 0; row < kTaxelsPerSide; ++row)
    for (int col = 0; col < kTaxelsPerSide; ++col)
      f.right[TactileFrame::idx(row, col)] =
          f.left[TactileFrame::idx(row, kTaxelsPerSide - 1 - col)];

  if (noise_std > 0.0) {
    Rng rng(mix_seed(seed, kNoiseSalt));
    for (double& v : f.left) v += rng.gaussian(0.0, noise_std);
    for (double& v : f.right) v += rng.gaussian(0.0, noise_std);
  }
  for (double& v : f.left) v = std::clamp(v, 0.0, 1.0);
  for (double& v : f.right) v = std::clamp(v, 0.0, 1.0);
  return f;
}

Wrench synth_wrench(const ObjectPrimitive& obj, const Rotation& r_world_gripper,
                    const Rotation& r_gripper_object,
                    const Eigen::Vector3d& com_offset, double noise_std,
                    uint64_t seed) {
  obj.validate();
  if (!(noise_std >= 0.0)) throw UsageError("noise_std must be >= 0");

  // Constant offsets from the tool flange and cabling, roughly an order of
  // magnitude above the gravity signal.
  const Eigen::Vector3d bias_force(12.0, -8.0, -35.0);
  const Eigen::Vector3d bias_torque(0.6, -0.4, 0.25);

  const Eigen::Vector3d f_world(0.0, 0.0, -obj.mass * kGravity);
  const Eigen::Vector3d f_gravity = r_world_gripper.transposed() * f_world;
  const Eigen::Vector3d lever = r_gripper_object * com_offset;

  Wrench w;
  w.force = bias_force + f_gravity;
  w.torque = bias_torque + lever.cross(f_gravity);
  if (noise_std > 0.0) {
    Rng rng(mix_seed(seed, kWrenchSalt));
    for (int i = 0; i < 3; ++i) w.force[i] += rng.gaussian(0.0, 40.0 * noise_std);
    for (int i = 0; i < 3; ++i) w.torque[i] += rng.gaussian(0.0, 4.0 * noise_std);
  }
  return w;
}

Rotation sample_arm_pose(Rng& rng, double max_tilt) {
  const double azimuth = rng.uniform(0.0, 2.0 * kPi);
  const double cos_tilt = rng.uniform(std::cos(max_tilt), 1.0);
  const double tilt = std::acos(std::clamp(cos_tilt, -1.0, 1.0));
  const double roll = rng.uniform(0.0, 2.0 * kPi);
  return compose(compose(Rotation::about_z(azimuth), Rotation::about_y(tilt)),
                 Rotation::about_z(roll));
}

std::vector<Sample> generate_dataset(const std::vector<ObjectPrimitive>& objects,
                                     int n_arm_poses, int n_inhand_per_pose,
                                     double inhand_range, double noise_std,
                                     uint64_t seed, int threads) {
  if (objects.empty()) throw UsageError("generate_dataset needs objects");
  for (const auto& o : objects) o.validate();
  if (n_arm_poses <= 0 || n_inhand_per_pose <= 0)
    throw UsageError("pose counts must be positive");
  if (!(inhand_range >= 0.0 && inhand_range < 2.0 * kPi))
    throw UsageError("inhand_range must be in [0, 2*pi)");
  if (!(noise_std >= 0.0)) throw UsageError("noise_std must be >= 0");

  const int per_object = n_arm_poses * n_inhand_per_pose;
  const int total = static_cast<int>(objects.size()) * per_object;
  std::vector<Sample> out(static_cast<size_t>(total));

  parallel_for(total, threads, [&](int i) {
    const int obj_idx = i / per_object;
    const int arm_idx = (i % per_object) / n_inhand_per_pose;
    const int inhand_idx = i % n_inhand_per_pose;
    const ObjectPrimitive& obj = objects[static_cast<size_t>(obj_idx)];

    // The arm pose is shared by every in-hand variation under it; everything
    // else draws from per-sample streams so samples are order-independent.
    Rng pose_rng(mix_seed(seed, kArmPoseSalt,
                          static_cast<uint64_t>(obj_idx),
                          static_cast<uint64_t>(arm_idx)));
    const Rotation r_world_gripper = sample_arm_pose(pose_rng, kMaxArmTilt);

    Rng var_rng(mix_seed(seed, kVariationSalt, static_cast<uint64_t>(obj_idx),
                         static_cast<uint64_t>(arm_idx) * 1024 +
                             static_cast<uint64_t>(inhand_idx)));
    const double alpha = var_rng.uniform(-0.5 * inhand_range, 0.5 * inhand_range);
    const Eigen::Vector3d com_offset(var_rng.uniform(-0.005, 0.005),
                                     var_rng.uniform(-0.005, 0.005),
                                     var_rng.uniform(-0.02, 0.02));
    const uint64_t sample_seed = mix_seed(seed, kSampleSalt,
                                          static_cast<uint64_t>(i));

    Sample s;
    s.object_id = obj.id;
    s.seed = sample_seed;
    s.r_world_gripper = r_world_gripper;
    s.r_gripper_placing_gt = Rotation::about_x(alpha);
    s.z_gt_world = placing_normal(r_world_gripper, s.r_gripper_placing_gt);

    // Large offsets can push a short footprint off the array; redraw a few
    // times before giving up.
    for (int attempt = 0;; ++attempt) {
      const Eigen::Vector2d grasp_offset(
          var_rng.uniform(-kGraspOffsetRange, kGraspOffsetRange),
          var_rng.uniform(-kGraspOffsetRange, kGraspOffsetRange));
      try {
        s.tactile = render_tactile(obj, alpha, grasp_offset, noise_std,
                                   mix_seed(sample_seed, static_cast<uint64_t>(attempt)));
        break;
      } catch (const EmptyContactError&) {
        if (attempt + 1 >= kMaxContactRetries) throw;
      }
    }
    s.wrench = synth_wrench(obj, r_world_gripper, s.r_gripper_placing_gt,
                            com_offset, noise_std, mix_seed(sample_seed, 1));
    out[static_cast<size_t>(i)] = std::move(s);
  });
  return out;
}

}  // namespace placing
