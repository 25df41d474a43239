#include "twinsync/scenario_config.hpp"

#include "twinsync/errors.hpp"

#include <nlohmann/json.hpp>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace twinsync {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::string type_name(const json& j) { return j.type_name(); }

// Typed accessors that report failures against a JSON pointer.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return j_; }

  Node object(std::string_view key) const {
    const json& v = at(key);
    Node n(v, child(key));
    n.require_object();
    return n;
  }
  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  void require_object() const {
    if (!j_.is_object()) fail(path_, "expected an object, got " + type_name(j_));
  }

  void only_keys(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [k, _] : j_.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || a == k;
      if (!ok) fail(child(k), "unknown key");
    }
  }

  double number(std::string_view key) const { return as_number(at(key), child(key)); }
  double number_or(std::string_view key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::uint64_t unsigned_int(std::string_view key) const {
    const json& v = at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
    fail(child(key), "expected a non-negative integer");
  }
  std::int64_t integer_or(std::string_view key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer()) fail(child(key), "expected an integer");
    return v.get<std::int64_t>();
  }

  bool boolean_or(std::string_view key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean()) fail(child(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string_or(std::string_view key, std::string fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_string()) fail(child(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<Node> array(std::string_view key) const {
    const json& v = at(key);
    if (!v.is_array()) fail(child(key), "expected an array, got " + type_name(v));
    std::vector<Node> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(v[i], child(key) + "/" + std::to_string(i));
    return out;
  }

  double as_number() const { return as_number(j_, path_); }

  std::string child(std::string_view key) const {
    std::string escaped;
    for (char c : key) {
      if (c == '~') escaped += "~0";
      else if (c == '/') escaped += "~1";
      else escaped += c;
    }
    return path_ + "/" + escaped;
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path.empty() ? "/" : path, msg);
  }

 private:
  const json& at(std::string_view key) const {
    const auto it = j_.find(std::string(key));
    if (it == j_.end()) fail(child(key), "required field missing");
    return *it;
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number, got " + type_name(v));
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "must be finite");
    return d;
  }

  const json& j_;
  std::string path_;
};

Pose read_pose(const Node& n) {
  n.require_object();
  n.only_keys({"x", "y", "z", "roll", "pitch", "yaw"});
  Pose p;
  p.x = n.number("x");
  p.y = n.number("y");
  p.z = n.number("z");
  p.roll = n.number_or("roll", 0.0);
  p.pitch = n.number_or("pitch", 0.0);
  p.yaw = n.number_or("yaw", 0.0);
  for (double* a : {&p.roll, &p.pitch, &p.yaw}) *a = wrap_angle(*a);
  return p;
}

JointVector read_joints(const Node& parent, std::string_view key) {
  const auto items = parent.array(key);
  JointVector q(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) q[static_cast<Eigen::Index>(i)] = items[i].as_number();
  return q;
}

KinematicChain read_chain(const Node& n) {
  n.only_keys({"dh", "joint_limits"});
  std::vector<LinkParam> links;
  for (const auto& l : n.array("dh")) {
    l.require_object();
    l.only_keys({"a", "alpha", "d", "theta_offset"});
    links.push_back({l.number("a"), l.number("alpha"), l.number("d"), l.number_or("theta_offset", 0.0)});
  }
  std::vector<JointLimit> limits;
  for (const auto& l : n.array("joint_limits")) {
    const auto& raw = l.raw();
    if (!raw.is_array() || raw.size() != 2) Node::fail(l.path(), "expected [min, max]");
    const double lo = Node(raw[0], l.path() + "/0").as_number();
    const double hi = Node(raw[1], l.path() + "/1").as_number();
    if (!(lo < hi)) Node::fail(l.path(), "min must be < max");
    limits.push_back({lo, hi});
  }
  if (links.empty()) Node::fail(n.child("dh"), "at least one link required");
  if (limits.size() != links.size()) {
    Node::fail(n.child("joint_limits"), "expected " + std::to_string(links.size()) + " entries");
  }
  return KinematicChain(std::move(links), std::move(limits));
}

void read_robot(const Node& n, RobotConfig& r) {
  n.only_keys({"gain", "clock_offset_ms", "clock_drift_ppm", "actuation_latency_ms"});
  r.gain = n.number_or("gain", r.gain);
  r.clock_offset_ms = n.number_or("clock_offset_ms", r.clock_offset_ms);
  r.clock_drift_ppm = n.number_or("clock_drift_ppm", r.clock_drift_ppm);
  r.actuation_latency_ms = n.number_or("actuation_latency_ms", r.actuation_latency_ms);
  if (!(r.gain > 0.0)) Node::fail(n.child("gain"), "must be > 0");
  if (r.actuation_latency_ms < 0.0) Node::fail(n.child("actuation_latency_ms"), "must be >= 0");
}

LinkMode read_mode(const Node& n) {
  const auto s = n.string_or("mode", "synchronous");
  if (s == "synchronous") return LinkMode::synchronous;
  if (s == "asynchronous") return LinkMode::asynchronous;
  Node::fail(n.child("mode"), "expected \"synchronous\" or \"asynchronous\"");
}

void read_channel(const Node& n, ChannelConfig& c) {
  n.only_keys({"latency_ms", "jitter_ms", "drop_prob", "mode", "seed"});
  c.latency_ms = n.number_or("latency_ms", c.latency_ms);
  c.jitter_ms = n.number_or("jitter_ms", c.jitter_ms);
  c.drop_prob = n.number_or("drop_prob", c.drop_prob);
  c.mode = read_mode(n);
  if (n.has("seed")) c.seed = n.unsigned_int("seed");
  if (c.latency_ms < 0.0) Node::fail(n.child("latency_ms"), "must be >= 0");
  if (c.jitter_ms < 0.0 || c.jitter_ms > c.latency_ms) Node::fail(n.child("jitter_ms"), "must lie in [0, latency_ms]");
  if (c.drop_prob < 0.0 || c.drop_prob > 1.0) Node::fail(n.child("drop_prob"), "must lie in [0, 1]");
}

IncidentKind read_kind(const Node& n) {
  const auto& raw = n.raw();
  if (!raw.is_string()) Node::fail(n.path(), "expected an incident kind name");
  for (auto k : kAllIncidentKinds) {
    if (to_string(k) == raw.get<std::string>()) return k;
  }
  Node::fail(n.path(), "unknown incident kind '" + raw.get<std::string>() + "'");
}

void read_control(const Node& n, ControlOptions& c) {
  n.only_keys({"advance_radius_m", "goal_tolerance_m", "avoidance_margin_m", "link_timeout_ms",
               "retransmit_ms", "watchdog_factor", "ik_tolerance_m", "ik_max_iterations",
               "ik_damping", "orientation_tracking", "gate_on"});
  c.advance_radius_m = n.number_or("advance_radius_m", c.advance_radius_m);
  c.goal_tolerance_m = n.number_or("goal_tolerance_m", c.goal_tolerance_m);
  c.avoidance_margin_m = n.number_or("avoidance_margin_m", c.avoidance_margin_m);
  c.link_timeout_ms = n.number_or("link_timeout_ms", c.link_timeout_ms);
  c.retransmit_ms = n.number_or("retransmit_ms", c.retransmit_ms);
  c.watchdog_factor = n.number_or("watchdog_factor", c.watchdog_factor);
  c.ik.tolerance = n.number_or("ik_tolerance_m", c.ik.tolerance);
  c.ik.max_iterations = static_cast<int>(n.integer_or("ik_max_iterations", c.ik.max_iterations));
  c.ik.damping = n.number_or("ik_damping", c.ik.damping);
  c.ik.track_orientation = n.boolean_or("orientation_tracking", c.ik.track_orientation);
  if (n.has("gate_on")) {
    c.gate_on = 0;
    for (const auto& k : n.array("gate_on")) c.gate_on |= bit(read_kind(k));
  }
}

// Runs a component validator and reports its failure against `path`.
template <class F>
void checked(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ContractError& e) {
    throw ConfigError(path, e.what());
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  }
}

std::string line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

json pose_json(const Pose& p) {
  return {{"x", p.x}, {"y", p.y}, {"z", p.z}, {"roll", p.roll}, {"pitch", p.pitch}, {"yaw", p.yaw}};
}

json joints_json(const JointVector& q) {
  json a = json::array();
  for (Eigen::Index i = 0; i < q.size(); ++i) a.push_back(q[i]);
  return a;
}

}  // namespace

std::string_view to_string(HitlMode m) { return m == HitlMode::gate ? "gate" : "auto-approve"; }

std::string_view to_string(ObstacleDetection d) {
  return d == ObstacleDetection::a_priori ? "a-priori" : "runtime";
}

ScenarioConfig::ScenarioConfig() {
  physical.gain = 8.0;
  virtual_twin.gain = 10.0;
}

void ScenarioConfig::validate() const {
  if (!(tick_ms > 0.0) || !std::isfinite(tick_ms)) throw ConfigError("/tick_ms", "must be > 0");
  if (physical.tick_ms != tick_ms || virtual_twin.tick_ms != tick_ms) {
    throw ConfigError("/tick_ms", "robot ticks must equal the scenario tick");
  }
  checked("/robots/physical", [&] { physical.validate(); });
  checked("/robots/virtual", [&] { virtual_twin.validate(); });
  if (physical.chain.joint_count() != chain.joint_count() ||
      virtual_twin.chain.joint_count() != chain.joint_count()) {
    throw ConfigError("/chain", "robots must share the scenario chain");
  }
  for (std::size_t i = 0; i < channels.size(); ++i) {
    checked("/channels/" + std::string(kChannelNames[i]), [&] { channels[i].validate(); });
  }
  checked("/bounds", [&] { bounds.validate(); });
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    checked("/obstacles/" + std::to_string(i), [&] { obstacles[i].validate(); });
  }
  if (!(goal.max_step > 0.0) || !std::isfinite(goal.max_step)) {
    throw ConfigError("/goal/max_step", "must be > 0");
  }
  if (initial_joints) {
    if (static_cast<std::size_t>(initial_joints->size()) != chain.joint_count()) {
      throw ConfigError("/initial_joints", "expected " + std::to_string(chain.joint_count()) + " angles");
    }
    if (!chain.within_limits(*initial_joints)) {
      throw ConfigError("/initial_joints", "outside joint limits");
    }
  }
  if (max_ticks <= 0) throw ConfigError("/max_ticks", "must be > 0");
  const auto& c = control;
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(c.advance_radius_m)) throw ConfigError("/control/advance_radius_m", "must be > 0");
  if (!positive(c.goal_tolerance_m)) throw ConfigError("/control/goal_tolerance_m", "must be > 0");
  if (!std::isfinite(c.avoidance_margin_m) || c.avoidance_margin_m < 0.0) {
    throw ConfigError("/control/avoidance_margin_m", "must be >= 0");
  }
  if (!positive(c.link_timeout_ms)) throw ConfigError("/control/link_timeout_ms", "must be > 0");
  if (!positive(c.retransmit_ms)) throw ConfigError("/control/retransmit_ms", "must be > 0");
  if (!positive(c.watchdog_factor)) throw ConfigError("/control/watchdog_factor", "must be > 0");
  if (!positive(c.ik.tolerance)) throw ConfigError("/control/ik_tolerance_m", "must be > 0");
  if (c.ik.max_iterations <= 0) throw ConfigError("/control/ik_max_iterations", "must be > 0");
  if (!positive(c.ik.damping)) throw ConfigError("/control/ik_damping", "must be > 0");
}

std::uint64_t effective_channel_seed(std::uint64_t scenario_seed, ChannelIndex index,
                                     std::uint64_t channel_seed) {
  std::uint64_t x = splitmix64(scenario_seed);
  x = splitmix64(x ^ (static_cast<std::uint64_t>(index) + 1));
  return splitmix64(x ^ channel_seed);
}

ScenarioConfig parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(line_column(text, e.byte), "syntax error");
  }
  const Node root(doc, "");
  root.require_object();
  root.only_keys({"v", "name", "seed", "tick_ms", "chain", "initial_joints", "start", "goal", "robots",
                  "channels", "bounds", "obstacles", "obstacle_detection", "hitl_mode", "max_ticks",
                  "control"});

  if (root.unsigned_int("v") != 1) Node::fail("/v", "unsupported schema version");

  ScenarioConfig cfg;
  cfg.name = root.string_or("name", "");
  cfg.seed = root.unsigned_int("seed");
  cfg.tick_ms = root.number_or("tick_ms", cfg.tick_ms);
  if (root.has("chain")) {
    const auto n = root.object("chain");
    try {
      cfg.chain = read_chain(n);
    } catch (const ContractError& e) {
      throw ConfigError("/chain", e.what());
    }
  }
  cfg.physical.chain = cfg.chain;
  cfg.virtual_twin.chain = cfg.chain;
  cfg.physical.tick_ms = cfg.tick_ms;
  cfg.virtual_twin.tick_ms = cfg.tick_ms;

  if (root.has("initial_joints")) cfg.initial_joints = read_joints(root, "initial_joints");
  if (root.has("start")) cfg.start = read_pose(root.object("start"));
  if (cfg.initial_joints && cfg.start) {
    Node::fail("/start", "give either start or initial_joints, not both");
  }

  {
    const auto g = root.object("goal");
    g.only_keys({"target", "max_step"});
    cfg.goal.target = read_pose(g.object("target"));
    cfg.goal.max_step = g.number_or("max_step", cfg.goal.max_step);
  }
  if (root.has("robots")) {
    const auto r = root.object("robots");
    r.only_keys({"physical", "virtual"});
    if (r.has("physical")) read_robot(r.object("physical"), cfg.physical);
    if (r.has("virtual")) read_robot(r.object("virtual"), cfg.virtual_twin);
  }
  if (root.has("channels")) {
    const auto c = root.object("channels");
    c.only_keys({kChannelNames[0], kChannelNames[1], kChannelNames[2], kChannelNames[3]});
    for (std::size_t i = 0; i < 4; ++i) {
      if (c.has(kChannelNames[i])) read_channel(c.object(kChannelNames[i]), cfg.channels[i]);
    }
  }
  if (root.has("bounds")) {
    const auto b = root.object("bounds");
    b.only_keys({"delta_q_m", "delta_alpha_ms", "delta_b_m", "delta_orientation_rad"});
    cfg.bounds.delta_q_m = b.number_or("delta_q_m", cfg.bounds.delta_q_m);
    cfg.bounds.delta_alpha_ms = b.number_or("delta_alpha_ms", cfg.bounds.delta_alpha_ms);
    cfg.bounds.delta_b_m = b.number_or("delta_b_m", cfg.bounds.delta_b_m);
    if (b.has("delta_orientation_rad")) cfg.bounds.delta_orientation_rad = b.number("delta_orientation_rad");
  }
  if (root.has("obstacles")) {
    for (const auto& o : root.array("obstacles")) {
      o.require_object();
      o.only_keys({"cx", "cy", "sx", "sy", "h"});
      cfg.obstacles.push_back({o.number("cx"), o.number("cy"), o.number("sx"), o.number("sy"), o.number("h")});
    }
  }
  {
    const auto d = root.string_or("obstacle_detection", "runtime");
    if (d == "runtime") cfg.obstacle_detection = ObstacleDetection::runtime;
    else if (d == "a-priori") cfg.obstacle_detection = ObstacleDetection::a_priori;
    else Node::fail("/obstacle_detection", "expected \"runtime\" or \"a-priori\"");
  }
  {
    const auto m = root.string_or("hitl_mode", "gate");
    if (m == "gate") cfg.hitl_mode = HitlMode::gate;
    else if (m == "auto-approve") cfg.hitl_mode = HitlMode::auto_approve;
    else Node::fail("/hitl_mode", "expected \"gate\" or \"auto-approve\"");
  }
  cfg.max_ticks = root.integer_or("max_ticks", cfg.max_ticks);
  if (root.has("control")) read_control(root.object("control"), cfg.control);

  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

void apply_seed_override(ScenarioConfig& config, const char* env_value) {
  if (env_value == nullptr) return;
  const std::string_view s(env_value);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError("TWINSYNC_SEED", "expected a non-negative integer, got '" + std::string(s) + "'");
  }
  config.seed = v;
}

std::string canonical_json(const ScenarioConfig& c) {
  json j;
  j["v"] = 1;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["tick_ms"] = c.tick_ms;
  json dh = json::array(), lim = json::array();
  for (const auto& l : c.chain.links()) {
    dh.push_back({{"a", l.a}, {"alpha", l.alpha}, {"d", l.d}, {"theta_offset", l.theta_offset}});
  }
  for (const auto& l : c.chain.limits()) lim.push_back({l.min, l.max});
  j["chain"] = {{"dh", dh}, {"joint_limits", lim}};
  if (c.initial_joints) j["initial_joints"] = joints_json(*c.initial_joints);
  if (c.start) j["start"] = pose_json(*c.start);
  j["goal"] = {{"target", pose_json(c.goal.target)}, {"max_step", c.goal.max_step}};
  auto robot = [](const RobotConfig& r) {
    return json{{"gain", r.gain},
                {"clock_offset_ms", r.clock_offset_ms},
                {"clock_drift_ppm", r.clock_drift_ppm},
                {"actuation_latency_ms", r.actuation_latency_ms}};
  };
  j["robots"] = {{"physical", robot(c.physical)}, {"virtual", robot(c.virtual_twin)}};
  json ch;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& x = c.channels[i];
    ch[std::string(kChannelNames[i])] = {{"latency_ms", x.latency_ms},
                                         {"jitter_ms", x.jitter_ms},
                                         {"drop_prob", x.drop_prob},
                                         {"mode", std::string(to_string(x.mode))},
                                         {"seed", x.seed}};
  }
  j["channels"] = ch;
  j["bounds"] = {{"delta_q_m", c.bounds.delta_q_m},
                 {"delta_alpha_ms", c.bounds.delta_alpha_ms},
                 {"delta_b_m", c.bounds.delta_b_m}};
  if (c.bounds.delta_orientation_rad) j["bounds"]["delta_orientation_rad"] = *c.bounds.delta_orientation_rad;
  json obs = json::array();
  for (const auto& o : c.obstacles) {
    obs.push_back({{"cx", o.center_x}, {"cy", o.center_y}, {"sx", o.size_x}, {"sy", o.size_y}, {"h", o.height}});
  }
  j["obstacles"] = obs;
  j["obstacle_detection"] = std::string(to_string(c.obstacle_detection));
  j["hitl_mode"] = std::string(to_string(c.hitl_mode));
  j["max_ticks"] = c.max_ticks;
  json gate = json::array();
  for (auto k : kAllIncidentKinds) {
    if (c.control.gate_on & bit(k)) gate.push_back(std::string(to_string(k)));
  }
  j["control"] = {{"advance_radius_m", c.control.advance_radius_m},
                  {"goal_tolerance_m", c.control.goal_tolerance_m},
                  {"avoidance_margin_m", c.control.avoidance_margin_m},
                  {"link_timeout_ms", c.control.link_timeout_ms},
                  {"retransmit_ms", c.control.retransmit_ms},
                  {"watchdog_factor", c.control.watchdog_factor},
                  {"ik_tolerance_m", c.control.ik.tolerance},
                  {"ik_max_iterations", c.control.ik.max_iterations},
                  {"ik_damping", c.control.ik.damping},
                  {"orientation_tracking", c.control.ik.track_orientation},
                  {"gate_on", gate}};
  return j.dump();
}

std::string fingerprint(const ScenarioConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical_json(config)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace twinsync
