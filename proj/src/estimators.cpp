#include "placing/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "placing/error.hpp"

namespace placing {

TactileFrame::Grid fuse_images(const TactileFrame& f) {
  TactileFrame::Grid out{};
  for (int r = 0; r < kTaxelsPerSide; ++r)
    for (int c = 0; c < kTaxelsPerSide; ++c)
      out[TactileFrame::idx(r, c)] =
          0.5 * (f.left[TactileFrame::idx(r, c)] +
                 f.right[TactileFrame::idx(r, kTaxelsPerSide - 1 - c)]);
  return out;
}

double pca_axis(const TactileFrame::Grid& fused, double threshold) {
  double mass = 0.0, cx = 0.0, cy = 0.0;
  int active = 0;
  for (int r = 0; r < kTaxelsPerSide; ++r)
    for (int c = 0; c < kTaxelsPerSide; ++c) {
      const double v = fused[TactileFrame::idx(r, c)];
      if (v < threshold) continue;
      ++active;
      mass += v;
      cx += v * (c - 7.5);
      cy += v * (r - 7.5);
    }
  if (active < 2 || mass <= 0.0)
    throw NoLineFoundError("footprint has fewer than two active cells");
  cx /= mass;
  cy /= mass;

  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int r = 0; r < kTaxelsPerSide; ++r)
    for (int c = 0; c < kTaxelsPerSide; ++c) {
      const double v = fused[TactileFrame::idx(r, c)];
      if (v < threshold) continue;
      const double x = (c - 7.5) - cx;
      const double y = (r - 7.5) - cy;
      sxx += v * x * x;
      syy += v * y * y;
      sxy += v * x * y;
    }
  sxx /= mass;
  syy /= mass;
  sxy /= mass;

  // Eigenvalue gap of the 2x2 covariance; no gap means no principal axis.
  if (std::hypot(sxx - syy, 2.0 * sxy) < 1e-9)
    throw DegenerateInputError("footprint second moments are isotropic");
  double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  if (angle < 0.0) angle += kPi;
  return angle;
}

// Kernel half-width in rho bins, sized so a rendered contact band fits the
// support whole. Whole-bin votes alias badly for bands several taxels wide:
// at the true angle the band splits across bins, while at nearby angles
// whose slope is a lattice rational the cell offsets collapse onto a few
// residues and outscore it. With a parabolic kernel covering the band, the
// most-voted cell is the one minimizing the perpendicular second moment of
// the cells in its window, which is a smooth function of the angle and
// peaks strictly at the band axis; cells outside the window still do not
// drag the fit, which is what separates this estimator from the weighted
// principal axis.
constexpr double kRhoKernel = 4.0;

HoughAccumulator hough_accumulate(const TactileFrame::Grid& fused,
                                  const ClassicalParams& p) {
  if (p.n_theta < 2 || p.n_rho < 2)
    throw UsageError("hough needs at least two bins per dimension");
  const double rho_max = 7.5 * std::sqrt(2.0);
  const double bins_per_rho = p.n_rho / (2.0 * rho_max);

  std::vector<double> sin_t(p.n_theta), cos_t(p.n_theta);
  for (int k = 0; k < p.n_theta; ++k) {
    const double psi = k * kPi / p.n_theta;
    sin_t[k] = std::sin(psi);
    cos_t[k] = std::cos(psi);
  }

  // Distances are measured from the footprint centroid, which projects to
  // the exact middle of the (odd) rho grid at every angle. Measured from the
  // array center instead, a contact band whose center falls between bin
  // centers pays a misalignment penalty at its true angle, and the winner
  // drifts several psi bins to a nearby angle that happens to align.
  int on_cells = 0;
  double cx = 0.0, cy = 0.0;
  for (int r = 0; r < kTaxelsPerSide; ++r)
    for (int c = 0; c < kTaxelsPerSide; ++c) {
      if (!(fused[TactileFrame::idx(r, c)] > p.threshold)) continue;
      ++on_cells;
      cx += c - 7.5;
      cy += r - 7.5;
    }
  if (on_cells < 2)
    throw NoLineFoundError("footprint has fewer than two active cells");
  cx /= on_cells;
  cy /= on_cells;

  HoughAccumulator acc;
  acc.n_theta = p.n_theta;
  acc.n_rho = p.n_rho;
  acc.votes.assign(static_cast<size_t>(p.n_theta) * p.n_rho, 0.0);
  for (int r = 0; r < kTaxelsPerSide; ++r)
    for (int c = 0; c < kTaxelsPerSide; ++c) {
      if (!(fused[TactileFrame::idx(r, c)] > p.threshold)) continue;
      const double x = (c - 7.5) - cx;
      const double y = (r - 7.5) - cy;
      for (int k = 0; k < p.n_theta; ++k) {
        const double rho = x * sin_t[k] + y * cos_t[k];
        const double u = (rho + rho_max) * bins_per_rho - 0.5;
        const int lo = std::max(0, static_cast<int>(std::ceil(u - kRhoKernel)));
        const int hi =
            std::min(p.n_rho - 1, static_cast<int>(std::floor(u + kRhoKernel)));
        double* row = acc.votes.data() + static_cast<size_t>(k) * p.n_rho;
        for (int j = lo; j <= hi; ++j) {
          const double d = (u - j) / kRhoKernel;
          row[j] += 1.0 - d * d;
        }
      }
    }
  return acc;
}

size_t hough_winner(const HoughAccumulator& acc) {
  if (acc.votes.empty()) throw UsageError("empty hough accumulator");
  size_t best = 0;
  for (size_t i = 1; i < acc.votes.size(); ++i)
    if (acc.votes[i] > acc.votes[best]) best = i;  // ties keep the lowest bin
  return best;
}

double hough_axis(const TactileFrame::Grid& fused, const ClassicalParams& p) {
  const HoughAccumulator acc = hough_accumulate(fused, p);
  const int k = static_cast<int>(hough_winner(acc)) / p.n_rho;
  return angle_mod_pi(kPi - acc.psi(k));
}

Rotation line_angle_to_rotation(double phi) {
  return Rotation::about_x(phi - kPi / 2.0);
}

EstimatorKind estimator_from_string(const std::string& name) {
  if (name == "nn-tactile") return EstimatorKind::NnTactile;
  if (name == "nn-ft") return EstimatorKind::NnFt;
  if (name == "nn-tactile-ft") return EstimatorKind::NnTactileFt;
  if (name == "pca") return EstimatorKind::Pca;
  if (name == "hough") return EstimatorKind::Hough;
  if (name == "oracle") return EstimatorKind::Oracle;
  throw UsageError("unknown estimator '" + name + "'");
}

const char* estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::NnTactile: return "nn-tactile";
    case EstimatorKind::NnFt: return "nn-ft";
    case EstimatorKind::NnTactileFt: return "nn-tactile-ft";
    case EstimatorKind::Pca: return "pca";
    case EstimatorKind::Hough: return "hough";
    case EstimatorKind::Oracle: return "oracle";
  }
  throw UsageError("unknown estimator kind");
}

bool estimator_uses_network(EstimatorKind kind) {
  return kind == EstimatorKind::NnTactile || kind == EstimatorKind::NnFt ||
         kind == EstimatorKind::NnTactileFt;
}

Architecture estimator_architecture(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::NnTactile: return Architecture::Tactile;
    case EstimatorKind::NnFt: return Architecture::Ft;
    case EstimatorKind::NnTactileFt: return Architecture::TactileFt;
    default:
      throw UsageError(std::string(estimator_name(kind)) +
                       " does not use a network");
  }
}

Estimator::Estimator(Estimator&&) noexcept = default;
Estimator& Estimator::operator=(Estimator&&) noexcept = default;
Estimator::~Estimator() = default;

Estimator Estimator::classical(EstimatorKind kind, ClassicalParams params) {
  if (kind != EstimatorKind::Pca && kind != EstimatorKind::Hough)
    throw UsageError(std::string(estimator_name(kind)) +
                     " is not a classical estimator");
  Estimator e;
  e.kind_ = kind;
  e.classical_ = params;
  return e;
}

Estimator Estimator::neural(NetworkParams params) {
  Estimator e;
  switch (params.arch) {
    case Architecture::Tactile: e.kind_ = EstimatorKind::NnTactile; break;
    case Architecture::Ft: e.kind_ = EstimatorKind::NnFt; break;
    case Architecture::TactileFt: e.kind_ = EstimatorKind::NnTactileFt; break;
  }
  e.net_ = std::make_unique<Network>(std::move(params));
  return e;
}

Estimator Estimator::oracle() {
  Estimator e;
  e.kind_ = EstimatorKind::Oracle;
  return e;
}

Rotation Estimator::estimate(const Sample& s) {
  switch (kind_) {
    case EstimatorKind::Pca:
      return line_angle_to_rotation(
          pca_axis(fuse_images(s.tactile), classical_.threshold));
    case EstimatorKind::Hough:
      return line_angle_to_rotation(hough_axis(fuse_images(s.tactile), classical_));
    case EstimatorKind::Oracle:
      return s.r_gripper_placing_gt;
    default:
      return net_->predict(s);
  }
}

}  // namespace placing
