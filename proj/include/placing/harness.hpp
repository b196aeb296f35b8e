#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "placing/estimators.hpp"
#include "placing/tactile.hpp"

namespace placing {

enum class PlacingPhase {
  EstimateNormal,
  CorrectiveMotion,
  PlacingMotion,
  ReleaseRetract
};
const char* phase_name(PlacingPhase phase);

enum class VerdictReason { Stable, Tipped, SupportedByGripper, NoEstimate };
const char* reason_name(VerdictReason reason);

// Outcome of releasing the object at a given tilt. success is true exactly
// when reason is Stable; tilt_angle is the settled angle between the placing
// normal and world +z (the release tilt when the object stands or leans on
// the gripper, pi/2 once it has tipped over).
struct StabilityVerdict {
  bool success = false;
  double tilt_angle = 0.0;
  VerdictReason reason = VerdictReason::Tipped;
};

struct HarnessConfig {
  double noise_std = 0.02;            // sensor noise during trials
  double release_offset_std = 0.002;  // m, gripper-opening perturbation
  double descent_step = 0.001;        // m per placing-motion step
  double start_clearance = 0.03;      // m between placing face and table
  double contact_ratio = 1.5;         // spike threshold vs pre-descent baseline
  double gripper_block_angle = 0.30;  // rad; failed placements at or below
                                      // this tilt rest against the gripper
  double grasp_offset_range = kGraspOffsetRange;
  double max_arm_tilt = kMaxArmTilt;
  double inhand_range = kDefaultInhandRange;

  void validate() const;  // throws UsageError
};

// Quasi-static support check: the object stands when the gravity line through
// its center of mass stays inside the placing-face footprint, whose usable
// extent shrinks with tilt. The release offset shifts the center of mass
// relative to the footprint.
StabilityVerdict stability_oracle(const ObjectPrimitive& obj, double tilt,
                                  const Eigen::Vector2d& release_offset,
                                  double gripper_block_angle = 0.30);

// Zero-offset tilt where the center of mass crosses the support edge:
// atan(support halfwidth / center-of-mass height).
double critical_tilt(const ObjectPrimitive& obj);

// First index whose value strictly exceeds threshold_ratio * stream[0];
// nullopt when no sample does. The stream must be non-empty.
std::optional<size_t> contact_detector(const std::vector<double>& stream,
                                       double threshold_ratio);

struct PhaseRecord {
  PlacingPhase phase = PlacingPhase::EstimateNormal;
  Rotation r_world_gripper;     // gripper orientation when the phase finished
  double descent_height = 0.0;  // m travelled; PlacingMotion onward
};

struct PlacingOutcome {
  StabilityVerdict verdict;
  double angular_error = 0.0;           // NaN when no estimate was produced
  std::optional<Rotation> estimate;     // gripper-frame placing rotation
  std::optional<size_t> contact_index;  // descent step where the spike fired
  std::vector<PhaseRecord> phases;      // completed phases, in order
};

// One placing trial: estimate the placing rotation from a freshly rendered
// grasp, rotate the gripper by the corrective rotation, descend until the
// tactile sum spikes, release, and judge stability. An estimator that throws
// NoLineFoundError / DegenerateInputError (or a grasp with no contact at all)
// ends the trial as a failure with reason NoEstimate. The seed fixes every
// sampled quantity, so reruns and method comparisons share identical trials.
PlacingOutcome run_placing(const std::function<Rotation(const Sample&)>& estimate,
                           const ObjectPrimitive& obj,
                           const Rotation& r_world_gripper,
                           const Rotation& r_gripper_placing_gt,
                           const HarnessConfig& cfg, uint64_t seed);
PlacingOutcome run_placing(Estimator& estimator, const ObjectPrimitive& obj,
                           const Rotation& r_world_gripper,
                           const Rotation& r_gripper_placing_gt,
                           const HarnessConfig& cfg, uint64_t seed);

struct EvalRow {
  std::string method;
  std::string object;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  double ang_err_mean = 0.0;  // over trials with an estimate; NaN when none
  double ang_err_std = 0.0;
};

struct TrialRecord {
  int method = 0;
  int object = 0;
  int arm_pose = 0;
  int inhand = 0;
  uint64_t seed = 0;
  Rotation r_world_gripper;
  Rotation r_gripper_placing_gt;
  PlacingOutcome outcome;
};

struct EvalReport {
  int n_methods = 0;
  int n_objects = 0;
  int n_arm_poses = 0;
  int n_inhand_poses = 0;
  std::vector<EvalRow> rows;         // method-major, one per (method, object)
  std::vector<TrialRecord> trials;   // every trial, for cross-checks
};

// Full factorial grid: per object, n_arm_poses sampled gripper orientations
// crossed with n_inhand_poses jaw-axis rolls. Every method sees the same
// grids and the same per-trial seeds (paired comparison).
EvalReport run_evaluation(std::vector<Estimator>& methods,
                          const std::vector<ObjectPrimitive>& objects,
                          int n_arm_poses, int n_inhand_poses,
                          const HarnessConfig& cfg, uint64_t seed);

// Pools one method's rows into its summary row (object column "average").
EvalRow method_average(const EvalReport& report, int method_index);

// Tab-separated table: header, per-method object rows, then that method's
// average row.
std::string format_eval_report(const EvalReport& report);

// Built-in primitives: the two training objects plus seven with dimensions
// outside the training set, used by the generalization preset.
const std::vector<ObjectPrimitive>& object_registry();
ObjectPrimitive object_by_id(const std::string& id);  // throws UsageError
std::vector<ObjectPrimitive> seen_objects();
std::vector<ObjectPrimitive> unseen_objects();

}  // namespace placing
