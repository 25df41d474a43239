#include "twinsync/errors.hpp"
#include "twinsync/robotsim.hpp"

#include <doctest.h>

#include <cmath>

using namespace twinsync;

namespace {

RobotConfig single(double gain = 10.0, double latency = 0.0) {
  RobotConfig c;
  c.chain = KinematicChain({{1.0, 0.0, 0.0, 0.0}}, {{-3.0, 3.0}});
  c.gain = gain;
  c.actuation_latency_ms = latency;
  return c;
}

JointVector one(double v) { return JointVector::Constant(1, v); }

CommandMsg cmd(double target, std::uint64_t seq, std::uint64_t id = 1) {
  return {one(target), 0.0, seq, id};
}

}  // namespace

TEST_CASE("one Euler step toward the target") {
  RobotTwin r(TwinId::physical, single(), one(0.0));
  r.apply_command(cmd(1.0, 1), 0.0);
  r.step(1.0);
  CHECK(r.joints()[0] == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("a robot at its target stays put") {
  RobotTwin r(TwinId::physical, single(), one(0.4));
  for (int i = 0; i < 100; ++i) r.step(1.0);
  CHECK(r.joints()[0] == 0.4);
}

TEST_CASE("lag matches the closed form and never overshoots") {
  RobotTwin r(TwinId::virtual_twin, single(), one(0.0));
  r.apply_command(cmd(1.0, 1), 0.0);
  double prev_err = 1.0;
  for (int n = 1; n <= 1000; ++n) {
    r.step(1.0);
    const double err = 1.0 - r.joints()[0];
    REQUIRE(std::abs(err - std::pow(0.99, n)) <= 1e-12);
    REQUIRE(err <= prev_err);
    REQUIRE(err >= 0.0);
    prev_err = err;
  }
  CHECK(prev_err <= std::exp(-10.0));
}

TEST_CASE("dt must equal the configured tick") {
  RobotTwin r(TwinId::physical, single(), one(0.0));
  CHECK_THROWS_AS(r.step(2.0), ContractError);
}

TEST_CASE("zero actuation latency takes effect at once") {
  RobotTwin r(TwinId::physical, single(), one(0.0));
  r.apply_command(cmd(0.5, 1, 9), 0.0);
  CHECK(r.target()[0] == 0.5);
  CHECK(r.active_command() == 9);
}

TEST_CASE("actuation latency delays motion by exactly that many ticks") {
  RobotTwin r(TwinId::physical, single(10.0, 16.0), one(0.0));
  r.apply_command(cmd(1.0, 1), 0.0);
  for (int i = 0; i < 16; ++i) {
    r.step(1.0);
    REQUIRE(r.joints()[0] == 0.0);
    REQUIRE(r.active_command() == 0);
  }
  r.step(1.0);
  CHECK(r.joints()[0] > 0.0);
  CHECK(r.active_command() == 1);
}

TEST_CASE("highest sequence wins among commands due together") {
  RobotTwin fast(TwinId::physical, single(), one(0.0));
  fast.apply_command(cmd(0.5, 5), 0.0);
  fast.apply_command(cmd(0.4, 4), 0.0);
  CHECK(fast.target()[0] == 0.5);
  CHECK(fast.active_sequence() == 5);

  RobotTwin slow(TwinId::physical, single(10.0, 3.0), one(0.0));
  slow.apply_command(cmd(0.5, 5), 0.0);
  slow.apply_command(cmd(0.4, 4), 0.0);
  for (int i = 0; i < 4; ++i) slow.step(1.0);
  CHECK(slow.target()[0] == 0.5);
  CHECK(slow.queued() == 0);
}

TEST_CASE("out-of-limit commands are rejected and counted") {
  RobotTwin r(TwinId::physical, single(), one(0.2));
  CHECK_THROWS_AS(r.apply_command(cmd(3.5, 1), 0.0), RejectedCommand);
  CHECK(r.rejected_count() == 1);
  CHECK(r.target()[0] == 0.2);
  r.step(1.0);
  CHECK(r.joints()[0] == 0.2);
}

TEST_CASE("snapshot timestamps include the clock offset") {
  RobotConfig c = single();
  RobotTwin plain(TwinId::physical, c, one(0.0));
  c.clock_offset_ms = 3.0;
  RobotTwin shifted(TwinId::virtual_twin, c, one(0.0));
  for (int i = 0; i < 100; ++i) {
    plain.step(1.0);
    shifted.step(1.0);
  }
  CHECK(plain.snapshot().timestamp_ms == 100.0);
  CHECK(shifted.snapshot().timestamp_ms == 103.0);
}

TEST_CASE("snapshot pose is the forward kinematics of its joints") {
  RobotConfig c;
  RobotTwin r(TwinId::physical, c, panda_ready_pose());
  JointVector target = panda_ready_pose();
  target[0] += 0.3;
  target[3] += 0.2;
  r.apply_command({target, 0.0, 1, 1}, 0.0);
  for (int i = 0; i < 300; ++i) {
    r.step(1.0);
    const auto s = r.snapshot();
    REQUIRE(s.pose == forward_kinematics(c.chain, s.joints));
  }
}

TEST_CASE("identical inputs give identical trajectories") {
  RobotTwin a(TwinId::physical, single(8.0, 5.0), one(0.0));
  RobotTwin b(TwinId::physical, single(8.0, 5.0), one(0.0));
  for (int i = 0; i < 500; ++i) {
    if (i % 50 == 0) {
      const auto c = cmd(std::sin(i * 0.1), static_cast<std::uint64_t>(i + 1));
      a.apply_command(c, i);
      b.apply_command(c, i);
    }
    a.step(1.0);
    b.step(1.0);
    REQUIRE(a.joints()[0] == b.joints()[0]);
  }
}

TEST_CASE("robot configuration validation") {
  CHECK_THROWS_AS(RobotTwin(TwinId::physical, single(0.0), one(0.0)), ContractError);
  CHECK_THROWS_AS(RobotTwin(TwinId::physical, single(-1.0), one(0.0)), ContractError);
  CHECK_THROWS_AS(RobotTwin(TwinId::physical, single(1000.0), one(0.0)), ContractError);
  CHECK_THROWS_AS(RobotTwin(TwinId::physical, single(10.0, -1.0), one(0.0)), ContractError);
  CHECK_THROWS_AS(RobotTwin(TwinId::physical, single(), one(5.0)), ContractError);
}
