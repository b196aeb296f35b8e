#pragma once

#include <memory>
#include <string>
#include <vector>

#include "placing/nn.hpp"
#include "placing/so3.hpp"
#include "placing/tactile.hpp"

namespace placing {

struct ClassicalParams {
  double threshold = 0.05;  // pressure cut for both estimators
  int n_theta = 180;        // Hough angle bins over [0, pi)
  int n_rho = 23;           // Hough distance bins, about one taxel each
};

// Averages the left image with the back-mirrored right one, mapping both
// fingers into a single footprint in left-image coordinates.
TactileFrame::Grid fuse_images(const TactileFrame& f);

// Weighted principal axis of the footprint, as an image angle in [0, pi).
// Image coordinates are x = col - 7.5, y = row - 7.5. Fewer than two active
// cells raise NoLineFoundError; an isotropic footprint (no eigenvalue gap)
// raises DegenerateInputError.
double pca_axis(const TactileFrame::Grid& fused, double threshold);

// Hough accumulator over (psi, rho) with rho = x*sin(psi) + y*cos(psi),
// x and y relative to the footprint centroid, so a line at image angle phi
// collects its votes at psi = pi - phi. Cells with a value strictly above
// the threshold each deposit a parabolic kernel of votes onto the rho bins
// nearest their exact distance; fewer than two active cells raise
// NoLineFoundError.
struct HoughAccumulator {
  int n_theta = 0;
  int n_rho = 0;
  std::vector<double> votes;  // n_theta * n_rho, psi-major

  double psi(int k) const { return k * kPi / n_theta; }
};
HoughAccumulator hough_accumulate(const TactileFrame::Grid& fused,
                                  const ClassicalParams& p);

// Flat index of the most-voted cell; equal counts resolve toward the lowest
// (psi, rho) index.
size_t hough_winner(const HoughAccumulator& acc);

// Line direction in [0, pi) from the winning accumulator cell, phi = pi - psi.
double hough_axis(const TactileFrame::Grid& fused, const ClassicalParams& p);

// A vertical footprint (phi = pi/2) comes from an upright object, so the
// gripper-frame placing rotation is a jaw-axis roll by phi - pi/2.
Rotation line_angle_to_rotation(double phi);

enum class EstimatorKind { NnTactile, NnFt, NnTactileFt, Pca, Hough, Oracle };

EstimatorKind estimator_from_string(const std::string& name);  // throws UsageError
const char* estimator_name(EstimatorKind kind);
bool estimator_uses_network(EstimatorKind kind);
Architecture estimator_architecture(EstimatorKind kind);  // network kinds only

// Uniform front end over the estimation methods: every kind maps a grasped
// sample to a gripper-frame placing rotation. Oracle echoes the label and
// serves as the harness upper bound.
class Estimator {
 public:
  static Estimator classical(EstimatorKind kind, ClassicalParams params = {});
  static Estimator neural(NetworkParams params);
  static Estimator oracle();

  Estimator(Estimator&&) noexcept;
  Estimator& operator=(Estimator&&) noexcept;
  ~Estimator();

  EstimatorKind kind() const { return kind_; }
  Rotation estimate(const Sample& s);

 private:
  Estimator() = default;
  EstimatorKind kind_ = EstimatorKind::Oracle;
  ClassicalParams classical_{};
  std::unique_ptr<Network> net_;
};

}  // namespace placing
