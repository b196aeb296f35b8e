#include "placing/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "placing/error.hpp"
#include "placing/io_util.hpp"
#include "placing/rng.hpp"

namespace placing {

namespace {

constexpr uint64_t kGraspSalt = 0x67727370;      // per-trial grasp variation
constexpr uint64_t kSenseSalt = 0x736e7365;      // phase-1 render and wrench
constexpr uint64_t kDescentSalt = 0x64736e74;    // per-step descent renders
constexpr uint64_t kReleaseSalt = 0x72656c73;    // gripper-opening offset
constexpr uint64_t kEvalArmSalt = 0x6561726d;    // evaluation arm poses
constexpr uint64_t kEvalRollSalt = 0x65726f6c;   // evaluation in-hand rolls
constexpr uint64_t kEvalTrialSalt = 0x65747269;  // per-trial sub-seeds

// Increased normal force once the object presses on the table; applied to the
// summed activation so sensor saturation cannot hide the spike.
constexpr double kContactBoost = 2.0;

double frame_sum(const TactileFrame& f) {
  double s = 0.0;
  for (double v : f.left) s += v;
  for (double v : f.right) s += v;
  return s;
}

double tilt_from_world_normal(const UnitVector3& n) {
  return std::acos(std::clamp(n.vec().z(), -1.0, 1.0));
}

struct AngStats {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
};

AngStats ang_stats(const std::vector<double>& errs) {
  AngStats out;
  if (errs.empty()) return out;
  const double n = static_cast<double>(errs.size());
  double sum = 0.0;
  for (double e : errs) sum += e;
  out.mean = sum / n;
  double var = 0.0;
  for (double e : errs) var += (e - out.mean) * (e - out.mean);
  out.std = std::sqrt(var / n);
  return out;
}

}  // namespace

const char* phase_name(PlacingPhase phase) {
  switch (phase) {
    case PlacingPhase::EstimateNormal: return "estimate-normal";
    case PlacingPhase::CorrectiveMotion: return "corrective-motion";
    case PlacingPhase::PlacingMotion: return "placing-motion";
    case PlacingPhase::ReleaseRetract: return "release-retract";
  }
  return "unknown";
}

const char* reason_name(VerdictReason reason) {
  switch (reason) {
    case VerdictReason::Stable: return "stable";
    case VerdictReason::Tipped: return "tipped";
    case VerdictReason::SupportedByGripper: return "supported-by-gripper";
    case VerdictReason::NoEstimate: return "no-estimate";
  }
  return "unknown";
}

void HarnessConfig::validate() const {
  if (!(noise_std >= 0.0)) throw UsageError("noise_std must be non-negative");
  if (!(release_offset_std >= 0.0))
    throw UsageError("release_offset_std must be non-negative");
  if (!(descent_step > 0.0)) throw UsageError("descent_step must be positive");
  if (!(start_clearance > 0.0))
    throw UsageError("start_clearance must be positive");
  if (!(contact_ratio > 1.0))
    throw UsageError("contact_ratio must exceed 1 (the baseline itself)");
  if (!(gripper_block_angle >= 0.0))
    throw UsageError("gripper_block_angle must be non-negative");
  if (!(grasp_offset_range >= 0.0))
    throw UsageError("grasp_offset_range must be non-negative");
  if (!(max_arm_tilt > 0.0 && max_arm_tilt <= 0.5 * kPi))
    throw UsageError("max_arm_tilt must be in (0, pi/2]");
  if (!(inhand_range >= 0.0 && inhand_range <= 2.0 * kPi))
    throw UsageError("inhand_range must be in [0, 2*pi]");
}

double critical_tilt(const ObjectPrimitive& obj) {
  return std::atan(obj.support_halfwidth_x() /
                   (obj.com_height_fraction * obj.length()));
}

StabilityVerdict stability_oracle(const ObjectPrimitive& obj, double tilt,
                                  const Eigen::Vector2d& release_offset,
                                  double gripper_block_angle) {
  obj.validate();
  if (!(tilt >= 0.0 && tilt <= kPi))
    throw UsageError("tilt must be in [0, pi]");

  // Tipping about the support edge: the center of mass leans out by
  // h*sin(tilt) plus the release shift, while the edge sits at
  // halfwidth*cos(tilt). The cross direction has no lean term.
  bool stable = tilt < 0.5 * kPi;
  if (stable) {
    const double h = obj.com_height_fraction * obj.length();
    stable = h * std::sin(tilt) + std::abs(release_offset.x()) <
                 obj.support_halfwidth_x() * std::cos(tilt) &&
             std::abs(release_offset.y()) < obj.support_halfwidth_y();
  }

  StabilityVerdict v;
  if (stable) {
    v.success = true;
    v.tilt_angle = tilt;
    v.reason = VerdictReason::Stable;
  } else if (tilt <= gripper_block_angle) {
    // Near-upright failures topple into the jaws still hovering overhead.
    v.success = false;
    v.tilt_angle = tilt;
    v.reason = VerdictReason::SupportedByGripper;
  } else {
    v.success = false;
    v.tilt_angle = 0.5 * kPi;
    v.reason = VerdictReason::Tipped;
  }
  return v;
}

std::optional<size_t> contact_detector(const std::vector<double>& stream,
                                       double threshold_ratio) {
  if (stream.empty()) throw UsageError("contact stream is empty");
  const double threshold = threshold_ratio * stream[0];
  for (size_t i = 0; i < stream.size(); ++i)
    if (stream[i] > threshold) return i;
  return std::nullopt;
}

PlacingOutcome run_placing(const std::function<Rotation(const Sample&)>& estimate,
                           const ObjectPrimitive& obj,
                           const Rotation& r_world_gripper,
                           const Rotation& r_gripper_placing_gt,
                           const HarnessConfig& cfg, uint64_t seed) {
  obj.validate();
  cfg.validate();

  PlacingOutcome out;
  out.angular_error = std::numeric_limits<double>::quiet_NaN();

  // The grasp as the estimator sees it, drawn like a dataset sample.
  Rng var(mix_seed(seed, kGraspSalt));
  const Eigen::Vector2d grasp_offset(
      var.uniform(-cfg.grasp_offset_range, cfg.grasp_offset_range),
      var.uniform(-cfg.grasp_offset_range, cfg.grasp_offset_range));
  const Eigen::Vector3d com_offset(var.uniform(-0.005, 0.005),
                                   var.uniform(-0.005, 0.005),
                                   var.uniform(-0.02, 0.02));
  const Eigen::Vector3d n_gripper =
      r_gripper_placing_gt.matrix().col(2);  // placing normal, gripper frame
  const double in_hand_angle =
      std::atan2(n_gripper.z(), n_gripper.y()) - 0.5 * kPi;

  Sample s;
  s.object_id = obj.id;
  s.r_world_gripper = r_world_gripper;
  s.r_gripper_placing_gt = r_gripper_placing_gt;
  s.z_gt_world = placing_normal(r_world_gripper, r_gripper_placing_gt);
  s.seed = seed;

  Rotation pred;
  try {
    s.tactile = render_tactile(obj, in_hand_angle, grasp_offset, cfg.noise_std,
                               mix_seed(seed, kSenseSalt, 0));
    s.wrench = synth_wrench(obj, r_world_gripper, r_gripper_placing_gt,
                            com_offset, cfg.noise_std,
                            mix_seed(seed, kSenseSalt, 1));
    pred = estimate(s);
  } catch (const NoLineFoundError&) {
    out.verdict = {false, std::numeric_limits<double>::quiet_NaN(),
                   VerdictReason::NoEstimate};
    return out;
  } catch (const DegenerateInputError&) {
    out.verdict = {false, std::numeric_limits<double>::quiet_NaN(),
                   VerdictReason::NoEstimate};
    return out;
  } catch (const EmptyContactError&) {
    out.verdict = {false, std::numeric_limits<double>::quiet_NaN(),
                   VerdictReason::NoEstimate};
    return out;
  }
  out.estimate = pred;
  out.angular_error = angular_loss(pred, r_world_gripper, s.z_gt_world);
  out.phases.push_back({PlacingPhase::EstimateNormal, r_world_gripper, 0.0});

  // Gripper-frame corrective rotation aligning the predicted normal with the
  // table normal.
  const UnitVector3 zp = UnitVector3::from(pred.matrix().col(2));
  const UnitVector3 zs = project_surface_normal(r_world_gripper);
  const Rotation corrected =
      compose(r_world_gripper, corrective_rotation(zp, zs));
  out.phases.push_back({PlacingPhase::CorrectiveMotion, corrected, 0.0});

  // Residual tilt of the true placing normal, by geometry; equals the
  // estimation error up to rounding.
  const double tilt =
      tilt_from_world_normal(placing_normal(corrected, r_gripper_placing_gt));

  // Descend in fixed steps. The tilted face's rim hangs below its center, so
  // geometric contact arrives after (clearance - dip) of travel; from there
  // the table carries part of the grip load and the summed activation jumps.
  const double dip =
      obj.support_halfwidth_x() * std::sin(std::min(tilt, 0.5 * kPi));
  const int contact_step = std::max(
      1, static_cast<int>(
             std::ceil((cfg.start_clearance - dip) / cfg.descent_step)));
  const int max_steps = contact_step + 8;
  std::vector<double> stream;
  stream.reserve(static_cast<size_t>(max_steps) + 1);
  for (int k = 0; k <= max_steps; ++k) {
    const double sum =
        frame_sum(render_tactile(obj, in_hand_angle, grasp_offset,
                                 cfg.noise_std, mix_seed(seed, kDescentSalt,
                                                         static_cast<uint64_t>(k))));
    stream.push_back(k >= contact_step ? kContactBoost * sum : sum);
  }
  out.contact_index = contact_detector(stream, cfg.contact_ratio);
  if (!out.contact_index) {
    out.verdict = {false, std::numeric_limits<double>::quiet_NaN(),
                   VerdictReason::NoEstimate};
    return out;
  }
  const double descent_height =
      static_cast<double>(*out.contact_index) * cfg.descent_step;
  out.phases.push_back(
      {PlacingPhase::PlacingMotion, corrected, descent_height});

  Rng release(mix_seed(seed, kReleaseSalt));
  const Eigen::Vector2d release_offset(
      release.gaussian(0.0, cfg.release_offset_std),
      release.gaussian(0.0, cfg.release_offset_std));
  out.verdict =
      stability_oracle(obj, tilt, release_offset, cfg.gripper_block_angle);
  out.phases.push_back(
      {PlacingPhase::ReleaseRetract, corrected, descent_height});
  return out;
}

PlacingOutcome run_placing(Estimator& estimator, const ObjectPrimitive& obj,
                           const Rotation& r_world_gripper,
                           const Rotation& r_gripper_placing_gt,
                           const HarnessConfig& cfg, uint64_t seed) {
  return run_placing(
      [&estimator](const Sample& s) { return estimator.estimate(s); }, obj,
      r_world_gripper, r_gripper_placing_gt, cfg, seed);
}

EvalReport run_evaluation(std::vector<Estimator>& methods,
                          const std::vector<ObjectPrimitive>& objects,
                          int n_arm_poses, int n_inhand_poses,
                          const HarnessConfig& cfg, uint64_t seed) {
  if (methods.empty()) throw UsageError("evaluation needs at least one method");
  if (objects.empty()) throw UsageError("evaluation needs at least one object");
  if (n_arm_poses < 1 || n_inhand_poses < 1)
    throw UsageError("evaluation needs a positive pose grid");
  cfg.validate();

  struct TrialSpec {
    Rotation rwg;
    Rotation rgp;
    uint64_t seed;
  };

  // One grid per object, shared verbatim by every method.
  std::vector<std::vector<TrialSpec>> grids(objects.size());
  for (size_t o = 0; o < objects.size(); ++o) {
    objects[o].validate();
    std::vector<double> rolls(static_cast<size_t>(n_inhand_poses));
    for (int j = 0; j < n_inhand_poses; ++j) {
      Rng roll_rng(mix_seed(seed, kEvalRollSalt, o, static_cast<uint64_t>(j)));
      rolls[static_cast<size_t>(j)] =
          roll_rng.uniform(-0.5 * cfg.inhand_range, 0.5 * cfg.inhand_range);
    }
    for (int i = 0; i < n_arm_poses; ++i) {
      Rng arm_rng(mix_seed(seed, kEvalArmSalt, o, static_cast<uint64_t>(i)));
      const Rotation arm = sample_arm_pose(arm_rng, cfg.max_arm_tilt);
      for (int j = 0; j < n_inhand_poses; ++j) {
        TrialSpec t;
        t.rwg = arm;
        t.rgp = Rotation::about_x(rolls[static_cast<size_t>(j)]);
        t.seed = mix_seed(seed, kEvalTrialSalt, o,
                          static_cast<uint64_t>(i) *
                                  static_cast<uint64_t>(n_inhand_poses) +
                              static_cast<uint64_t>(j));
        grids[o].push_back(t);
      }
    }
  }

  EvalReport report;
  report.n_methods = static_cast<int>(methods.size());
  report.n_objects = static_cast<int>(objects.size());
  report.n_arm_poses = n_arm_poses;
  report.n_inhand_poses = n_inhand_poses;

  for (size_t m = 0; m < methods.size(); ++m) {
    for (size_t o = 0; o < objects.size(); ++o) {
      EvalRow row;
      row.method = estimator_name(methods[m].kind());
      row.object = objects[o].id;
      std::vector<double> errs;
      for (size_t t = 0; t < grids[o].size(); ++t) {
        const TrialSpec& spec = grids[o][t];
        TrialRecord rec;
        rec.method = static_cast<int>(m);
        rec.object = static_cast<int>(o);
        rec.arm_pose = static_cast<int>(t) / n_inhand_poses;
        rec.inhand = static_cast<int>(t) % n_inhand_poses;
        rec.seed = spec.seed;
        rec.r_world_gripper = spec.rwg;
        rec.r_gripper_placing_gt = spec.rgp;
        rec.outcome = run_placing(methods[m], objects[o], spec.rwg, spec.rgp,
                                  cfg, spec.seed);
        ++row.trials;
        if (rec.outcome.verdict.success) ++row.successes;
        if (rec.outcome.estimate) errs.push_back(rec.outcome.angular_error);
        report.trials.push_back(std::move(rec));
      }
      row.success_rate =
          static_cast<double>(row.successes) / static_cast<double>(row.trials);
      const AngStats st = ang_stats(errs);
      row.ang_err_mean = st.mean;
      row.ang_err_std = st.std;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

EvalRow method_average(const EvalReport& report, int method_index) {
  if (method_index < 0 || method_index >= report.n_methods)
    throw UsageError("method index out of range");
  EvalRow avg;
  avg.object = "average";
  std::vector<double> errs;
  for (int o = 0; o < report.n_objects; ++o) {
    const EvalRow& row =
        report.rows[static_cast<size_t>(method_index) *
                        static_cast<size_t>(report.n_objects) +
                    static_cast<size_t>(o)];
    avg.method = row.method;
    avg.trials += row.trials;
    avg.successes += row.successes;
  }
  for (const auto& rec : report.trials)
    if (rec.method == method_index && rec.outcome.estimate)
      errs.push_back(rec.outcome.angular_error);
  avg.success_rate =
      static_cast<double>(avg.successes) / static_cast<double>(avg.trials);
  const AngStats st = ang_stats(errs);
  avg.ang_err_mean = st.mean;
  avg.ang_err_std = st.std;
  return avg;
}

std::string format_eval_report(const EvalReport& report) {
  std::string out =
      "method\tobject\ttrials\tsuccesses\tsuccess_rate\tang_err_mean\tang_err_std\n";
  auto emit = [&out](const EvalRow& row) {
    out += row.method;
    out += '\t';
    out += row.object;
    out += '\t';
    append_u64(out, static_cast<unsigned long long>(row.trials));
    out += '\t';
    append_u64(out, static_cast<unsigned long long>(row.successes));
    out += '\t';
    append_double(out, row.success_rate);
    out += '\t';
    append_double(out, row.ang_err_mean);
    out += '\t';
    append_double(out, row.ang_err_std);
    out += '\n';
  };
  for (int m = 0; m < report.n_methods; ++m) {
    for (int o = 0; o < report.n_objects; ++o)
      emit(report.rows[static_cast<size_t>(m) *
                           static_cast<size_t>(report.n_objects) +
                       static_cast<size_t>(o)]);
    emit(method_average(report, m));
  }
  return out;
}

const std::vector<ObjectPrimitive>& object_registry() {
  static const std::vector<ObjectPrimitive> registry = {
      ObjectPrimitive::cylinder("train-cylinder", 0.0225, 0.15, 0.3, 0.5, 0.6),
      ObjectPrimitive::cuboid("train-cuboid", 0.05, 0.05, 0.19, 0.35),
      ObjectPrimitive::cylinder("pringles", 0.037, 0.23, 0.25, 0.45, 0.5),
      ObjectPrimitive::cylinder("glue-bottle", 0.030, 0.17, 0.20, 0.55, 0.45),
      ObjectPrimitive::cuboid("tabasco", 0.06, 0.06, 0.14, 0.30, 0.5, 0.5),
      ObjectPrimitive::cuboid("mallow-pop", 0.045, 0.045, 0.16, 0.15, 0.5, 0.55),
      ObjectPrimitive::cuboid("cheez-it", 0.035, 0.065, 0.17, 0.25, 0.5, 0.5),
      ObjectPrimitive::cylinder("shampoo", 0.032, 0.19, 0.40, 0.5, 0.45),
      ObjectPrimitive::cuboid("lipstick", 0.02, 0.02, 0.07, 0.05, 0.5, 0.5),
  };
  return registry;
}

ObjectPrimitive object_by_id(const std::string& id) {
  for (const auto& obj : object_registry())
    if (obj.id == id) return obj;
  std::string known;
  for (const auto& obj : object_registry()) {
    if (!known.empty()) known += ", ";
    known += obj.id;
  }
  throw UsageError("unknown object '" + id + "'; known objects: " + known);
}

std::vector<ObjectPrimitive> seen_objects() {
  return {object_by_id("train-cylinder"), object_by_id("train-cuboid")};
}

std::vector<ObjectPrimitive> unseen_objects() {
  return {object_by_id("pringles"),  object_by_id("glue-bottle"),
          object_by_id("tabasco"),   object_by_id("mallow-pop"),
          object_by_id("cheez-it"),  object_by_id("shampoo"),
          object_by_id("lipstick")};
}

}  // namespace placing
