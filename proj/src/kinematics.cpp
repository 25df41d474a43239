#include "twinsync/kinematics.hpp"

#include "twinsync/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace twinsync {

namespace {

constexpr double kPi = std::numbers::pi;

void require_dims(const KinematicChain& chain, const JointVector& q) {
  if (static_cast<std::size_t>(q.size()) != chain.joint_count()) {
    throw ContractError("joint vector has " + std::to_string(q.size()) +
                        " entries, chain has " + std::to_string(chain.joint_count()) +
                        " joints");
  }
}

// Orientation error as the rotation vector taking `current` to `desired`.
Eigen::Vector3d orientation_error(const Eigen::Matrix3d& current, const Eigen::Matrix3d& desired) {
  const Eigen::AngleAxisd aa(desired * current.transpose());
  return aa.angle() * aa.axis();
}

}  // namespace

KinematicChain::KinematicChain(std::vector<LinkParam> links, std::vector<JointLimit> limits)
    : links_(std::move(links)), limits_(std::move(limits)) {
  if (links_.empty()) throw ContractError("kinematic chain needs at least one link");
  if (limits_.size() != links_.size()) {
    throw ContractError("joint limit count does not match link count");
  }
  for (std::size_t i = 0; i < links_.size(); ++i) {
    const auto& l = links_[i];
    if (!std::isfinite(l.a) || !std::isfinite(l.alpha) || !std::isfinite(l.d) ||
        !std::isfinite(l.theta_offset)) {
      throw ContractError("link " + std::to_string(i) + " has a non-finite parameter");
    }
    if (!(limits_[i].min < limits_[i].max)) {
      throw ContractError("joint " + std::to_string(i) + " limit requires min < max");
    }
  }
}

bool KinematicChain::within_limits(const JointVector& q) const {
  if (static_cast<std::size_t>(q.size()) != joint_count()) return false;
  for (std::size_t i = 0; i < joint_count(); ++i) {
    const double v = q[static_cast<Eigen::Index>(i)];
    if (!std::isfinite(v) || v < limits_[i].min || v > limits_[i].max) return false;
  }
  return true;
}

JointVector KinematicChain::clamp(JointVector q) const {
  for (std::size_t i = 0; i < joint_count(); ++i) {
    auto& v = q[static_cast<Eigen::Index>(i)];
    v = std::clamp(v, limits_[i].min, limits_[i].max);
  }
  return q;
}

double wrap_angle(double theta) {
  if (!std::isfinite(theta)) throw DomainError("wrap_angle: non-finite angle");
  double r = std::remainder(theta, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

KinematicChain panda_chain() {
  // Craig-convention Panda table regrouped into standard DH; the 0.107 m
  // flange offset is folded into the last link.
  std::vector<LinkParam> links = {
      {0.0, -kPi / 2, 0.333, 0.0},   {0.0, kPi / 2, 0.0, 0.0},
      {0.0825, kPi / 2, 0.316, 0.0}, {-0.0825, -kPi / 2, 0.0, 0.0},
      {0.0, kPi / 2, 0.384, 0.0},    {0.088, kPi / 2, 0.0, 0.0},
      {0.0, 0.0, 0.107, 0.0},
  };
  std::vector<JointLimit> limits = {
      {-2.8973, 2.8973}, {-1.7628, 1.7628}, {-2.8973, 2.8973}, {-3.0718, -0.0698},
      {-2.8973, 2.8973}, {-0.0175, 3.7525}, {-2.8973, 2.8973},
  };
  return KinematicChain(std::move(links), std::move(limits));
}

JointVector panda_ready_pose() {
  JointVector q(7);
  q << 0.0, -kPi / 4, 0.0, -3 * kPi / 4, 0.0, kPi / 2, kPi / 4;
  return q;
}

Eigen::Matrix4d link_transform(const LinkParam& link, double q) {
  const double theta = q + link.theta_offset;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(link.alpha), sa = std::sin(link.alpha);
  Eigen::Matrix4d t;
  t << ct, -st * ca, st * sa, link.a * ct,
       st, ct * ca, -ct * sa, link.a * st,
       0.0, sa, ca, link.d,
       0.0, 0.0, 0.0, 1.0;
  return t;
}

Eigen::Matrix4d forward_transform(const KinematicChain& chain, const JointVector& q) {
  require_dims(chain, q);
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  for (std::size_t i = 0; i < chain.joint_count(); ++i) {
    t = t * link_transform(chain.links()[i], q[static_cast<Eigen::Index>(i)]);
  }
  return t;
}

Pose pose_from_transform(const Eigen::Matrix4d& t) {
  const Eigen::Matrix3d r = t.topLeftCorner<3, 3>();
  Pose p;
  p.x = t(0, 3);
  p.y = t(1, 3);
  p.z = t(2, 3);
  p.yaw = wrap_angle(std::atan2(r(1, 0), r(0, 0)));
  p.pitch = wrap_angle(std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0))));
  p.roll = wrap_angle(std::atan2(r(2, 1), r(2, 2)));
  return p;
}

Eigen::Matrix3d rotation_from_rpy(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Pose forward_kinematics(const KinematicChain& chain, const JointVector& q) {
  return pose_from_transform(forward_transform(chain, q));
}

Eigen::MatrixXd geometric_jacobian(const KinematicChain& chain, const JointVector& q) {
  require_dims(chain, q);
  const auto n = static_cast<Eigen::Index>(chain.joint_count());
  std::vector<Eigen::Matrix4d> frames;
  frames.reserve(chain.joint_count() + 1);
  frames.push_back(Eigen::Matrix4d::Identity());
  for (Eigen::Index i = 0; i < n; ++i) {
    frames.push_back(frames.back() * link_transform(chain.links()[static_cast<std::size_t>(i)], q[i]));
  }
  const Eigen::Vector3d tip = frames.back().topRightCorner<3, 1>();
  Eigen::MatrixXd j(6, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // Joint i turns about z of frame i-1.
    const auto& f = frames[static_cast<std::size_t>(i)];
    const Eigen::Vector3d axis = f.block<3, 1>(0, 2);
    const Eigen::Vector3d origin = f.topRightCorner<3, 1>();
    j.block<3, 1>(0, i) = axis.cross(tip - origin);
    j.block<3, 1>(3, i) = axis;
  }
  return j;
}

IkResult solve_ik(const KinematicChain& chain, const Pose& target, const JointVector& seed,
                  const IkOptions& options) {
  require_dims(chain, seed);
  if (!(options.tolerance > 0.0)) throw ContractError("solve_ik: tolerance must be > 0");
  if (!chain.within_limits(seed)) throw ContractError("solve_ik: seed outside joint limits");

  const Eigen::Vector3d goal = target.position();
  const Eigen::Matrix3d goal_rot = rotation_from_rpy(target.roll, target.pitch, target.yaw);
  const double lambda2 = options.damping * options.damping;
  const Eigen::Index rows = options.track_orientation ? 6 : 3;

  JointVector q = seed;
  double best = std::numeric_limits<double>::infinity();

  for (int iter = 0;; ++iter) {
    const Eigen::Matrix4d t = forward_transform(chain, q);
    Eigen::VectorXd err(rows);
    err.head<3>() = goal - t.topRightCorner<3, 1>();
    if (options.track_orientation) {
      err.tail<3>() = orientation_error(t.topLeftCorner<3, 3>(), goal_rot);
    }
    const double pos_residual = err.head<3>().norm();
    const double residual = options.track_orientation ? std::max(pos_residual, err.tail<3>().norm())
                                                      : pos_residual;
    best = std::min(best, residual);
    if (residual <= options.tolerance) return {q, pos_residual, iter};
    if (iter >= options.max_iterations) break;

    const double n = err.head<3>().norm();
    if (n > options.max_step_error) err.head<3>() *= options.max_step_error / n;

    const Eigen::MatrixXd jac = geometric_jacobian(chain, q).topRows(rows);
    const Eigen::MatrixXd jjt =
        jac * jac.transpose() + lambda2 * Eigen::MatrixXd::Identity(rows, rows);
    const Eigen::VectorXd dq = jac.transpose() * jjt.ldlt().solve(err);
    q = chain.clamp(q + dq);
  }
  throw UnreachableTarget("solve_ik: no convergence, best residual " + std::to_string(best) + " m",
                          best);
}

}  // namespace twinsync
