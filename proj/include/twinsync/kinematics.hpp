#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <utility>
#include <vector>

namespace twinsync {

/// Joint angles in radians, one entry per joint of a chain.
using JointVector = Eigen::VectorXd;

/// Standard Denavit-Hartenberg link: Rz(theta) * Tz(d) * Tx(a) * Rx(alpha),
/// with theta = q + theta_offset.
struct LinkParam {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
};

struct JointLimit {
  double min = 0.0;
  double max = 0.0;
};

/// Serial chain of revolute joints.
class KinematicChain {
 public:
  /// Throws ContractError when empty, sizes differ, or any limit has min >= max.
  KinematicChain(std::vector<LinkParam> links, std::vector<JointLimit> limits);

  std::size_t joint_count() const noexcept { return links_.size(); }
  const std::vector<LinkParam>& links() const noexcept { return links_; }
  const std::vector<JointLimit>& limits() const noexcept { return limits_; }

  bool within_limits(const JointVector& q) const;
  JointVector clamp(JointVector q) const;

 private:
  std::vector<LinkParam> links_;
  std::vector<JointLimit> limits_;
};

/// End-effector pose. Angles are Z-Y-X roll/pitch/yaw wrapped to (-pi, pi].
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Eigen::Vector3d position() const { return {x, y, z}; }
  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Wraps an angle to (-pi, pi]. Throws DomainError on non-finite input.
double wrap_angle(double theta);

/// 7-DOF Panda-like chain (see docs/panda_dh.md).
KinematicChain panda_chain();

/// Joint configuration used as the default initial state for the Panda chain.
JointVector panda_ready_pose();

Eigen::Matrix4d link_transform(const LinkParam& link, double q);

/// Homogeneous transform of the last link frame.
Eigen::Matrix4d forward_transform(const KinematicChain& chain, const JointVector& q);

Pose pose_from_transform(const Eigen::Matrix4d& t);
Eigen::Matrix3d rotation_from_rpy(double roll, double pitch, double yaw);

Pose forward_kinematics(const KinematicChain& chain, const JointVector& q);

/// 6xN geometric Jacobian; rows 0-2 linear, rows 3-5 angular, base frame.
Eigen::MatrixXd geometric_jacobian(const KinematicChain& chain, const JointVector& q);

struct IkOptions {
  double tolerance = 1e-4;
  int max_iterations = 500;
  double damping = 0.05;
  /// Largest Cartesian error fed to one damped step (m).
  double max_step_error = 0.1;
  bool track_orientation = false;
};

struct IkResult {
  JointVector q;
  double residual = 0.0;
  int iterations = 0;
};

/// Damped least squares, joints clamped to limits after every iteration.
/// Throws UnreachableTarget (carrying the best residual) when the position error
/// stays above tolerance after max_iterations.
IkResult solve_ik(const KinematicChain& chain, const Pose& target, const JointVector& seed,
                  const IkOptions& options = {});

}  // namespace twinsync
