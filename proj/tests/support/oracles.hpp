#pragma once

// Independent reference implementations used by the tests. They deliberately
// avoid the library's own math (no Eigen, explicit loops) so agreement means
// something.

#include "twinsync/kinematics.hpp"
#include "twinsync/monitor.hpp"
#include "twinsync/runlog.hpp"
#include "twinsync/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using Mat4 = std::array<std::array<double, 4>, 4>;

inline Mat4 identity() {
  Mat4 m{};
  for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
  return m;
}

inline Mat4 mul(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Standard DH written out element by element.
inline Mat4 dh(double a, double alpha, double d, double theta) {
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  Mat4 m{};
  m[0] = {ct, -st * ca, st * sa, a * ct};
  m[1] = {st, ct * ca, -ct * sa, a * st};
  m[2] = {0.0, sa, ca, d};
  m[3] = {0.0, 0.0, 0.0, 1.0};
  return m;
}

inline Mat4 fk_matrix(const twinsync::KinematicChain& chain, const std::vector<double>& q) {
  Mat4 t = identity();
  const auto& links = chain.links();
  for (std::size_t i = 0; i < links.size(); ++i) {
    t = mul(t, dh(links[i].a, links[i].alpha, links[i].d, q[i] + links[i].theta_offset));
  }
  return t;
}

struct PoseRef {
  double x, y, z, roll, pitch, yaw;
};

// Z-Y-X extraction: R = Rz(yaw) Ry(pitch) Rx(roll).
inline PoseRef fk(const twinsync::KinematicChain& chain, const std::vector<double>& q) {
  const Mat4 t = fk_matrix(chain, q);
  PoseRef p{};
  p.x = t[0][3];
  p.y = t[1][3];
  p.z = t[2][3];
  p.yaw = std::atan2(t[1][0], t[0][0]);
  p.pitch = std::atan2(-t[2][0], std::sqrt(t[0][0] * t[0][0] + t[1][0] * t[1][0]));
  p.roll = std::atan2(t[2][1], t[2][2]);
  return p;
}

inline double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 2.0 * M_PI);
  if (d > M_PI) d -= 2.0 * M_PI;
  if (d <= -M_PI) d += 2.0 * M_PI;
  return std::abs(d);
}

// Central differences of position and of the rotation (via dR R^T).
inline std::array<std::vector<double>, 6> fd_jacobian(const twinsync::KinematicChain& chain,
                                                      const std::vector<double>& q, double h = 1e-6) {
  std::array<std::vector<double>, 6> j;
  for (auto& row : j) row.assign(q.size(), 0.0);
  const Mat4 t0 = fk_matrix(chain, q);
  for (std::size_t i = 0; i < q.size(); ++i) {
    auto qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    const Mat4 a = fk_matrix(chain, qp), b = fk_matrix(chain, qm);
    for (int r = 0; r < 3; ++r) j[r][i] = (a[r][3] - b[r][3]) / (2.0 * h);
    double omega[3][3]{};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k) omega[r][c] += (a[r][k] - b[r][k]) / (2.0 * h) * t0[c][k];
    j[3][i] = omega[2][1];
    j[4][i] = omega[0][2];
    j[5][i] = omega[1][0];
  }
  return j;
}

inline std::vector<double> random_joints(const twinsync::KinematicChain& chain, std::mt19937_64& rng,
                                         double shrink = 0.0) {
  std::vector<double> q;
  for (const auto& l : chain.limits()) {
    const double span = l.max - l.min;
    std::uniform_real_distribution<double> u(l.min + shrink * span, l.max - shrink * span);
    q.push_back(u(rng));
  }
  return q;
}

inline twinsync::JointVector to_eigen(const std::vector<double>& q) {
  twinsync::JointVector v(static_cast<Eigen::Index>(q.size()));
  for (std::size_t i = 0; i < q.size(); ++i) v[static_cast<Eigen::Index>(i)] = q[i];
  return v;
}

// Box distance by dense sampling of the six faces (upper bound on the true
// distance, converging from above as n grows).
inline double box_distance_sampled(double px, double py, double pz, const twinsync::Obstacle& o, int n) {
  const double x0 = o.center_x - o.size_x / 2, x1 = o.center_x + o.size_x / 2;
  const double y0 = o.center_y - o.size_y / 2, y1 = o.center_y + o.size_y / 2;
  const double z0 = 0.0, z1 = o.height;
  if (px >= x0 && px <= x1 && py >= y0 && py <= y1 && pz >= z0 && pz <= z1) return 0.0;
  double best = INFINITY;
  auto lerp = [n](double a, double b, int i) { return a + (b - a) * i / n; };
  for (int i = 0; i <= n; ++i) {
    for (int k = 0; k <= n; ++k) {
      const double fx[6][3] = {
          {x0, lerp(y0, y1, i), lerp(z0, z1, k)}, {x1, lerp(y0, y1, i), lerp(z0, z1, k)},
          {lerp(x0, x1, i), y0, lerp(z0, z1, k)}, {lerp(x0, x1, i), y1, lerp(z0, z1, k)},
          {lerp(x0, x1, i), lerp(y0, y1, k), z0}, {lerp(x0, x1, i), lerp(y0, y1, k), z1}};
      for (const auto& s : fx) {
        best = std::min(best, std::hypot(px - s[0], py - s[1], pz - s[2]));
      }
    }
  }
  return best;
}

// Closed-form box distance, written independently of the library.
inline double box_distance(double px, double py, double pz, const twinsync::Obstacle& o) {
  auto gap = [](double v, double lo, double hi) { return v < lo ? lo - v : (v > hi ? v - hi : 0.0); };
  const double dx = gap(px, o.center_x - o.size_x / 2, o.center_x + o.size_x / 2);
  const double dy = gap(py, o.center_y - o.size_y / 2, o.center_y + o.size_y / 2);
  const double dz = gap(pz, 0.0, o.height);
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Offline re-derivation of the per-row incident mask from logged columns.
inline std::uint8_t offline_flags(const twinsync::LogRow& r, const twinsync::Bounds& b,
                                  const std::vector<twinsync::Obstacle>& obstacles) {
  using twinsync::IncidentKind;
  std::uint8_t m = 0;
  const auto& p = r.physical.pose;
  const auto& v = r.virtual_twin.pose;
  const double dx = p.x - v.x, dy = p.y - v.y, dz = p.z - v.z;
  bool pose_hit = std::sqrt(dx * dx + dy * dy + dz * dz) >= b.delta_q_m;
  if (b.delta_orientation_rad) {
    const double worst = std::max({angle_diff(p.roll, v.roll), angle_diff(p.pitch, v.pitch),
                                   angle_diff(p.yaw, v.yaw)});
    pose_hit = pose_hit || worst >= *b.delta_orientation_rad;
  }
  if (pose_hit) m |= twinsync::bit(IncidentKind::pose_deviation);
  if (std::abs(r.physical.timestamp_ms - r.virtual_twin.timestamp_ms) >= b.delta_alpha_ms) {
    m |= twinsync::bit(IncidentKind::timing_deviation);
  }
  for (const auto& o : obstacles) {
    const double c = std::min(box_distance(p.x, p.y, p.z, o), box_distance(v.x, v.y, v.z, o));
    if (c <= b.delta_b_m) {
      m |= twinsync::bit(IncidentKind::obstacle_proximity);
      break;
    }
  }
  return m;
}

// Normal approximation of a binomial count: mean and standard deviation.
struct Binomial {
  double mean;
  double sd;
};
inline Binomial binomial(std::uint64_t n, double p) {
  return {static_cast<double>(n) * p, std::sqrt(static_cast<double>(n) * p * (1.0 - p))};
}

}  // namespace oracle
