// twinsync command-line front end: run, report, serve, decide.

#include "twinsync/controller.hpp"
#include "twinsync/errors.hpp"
#include "twinsync/metrics.hpp"
#include "twinsync/runlog.hpp"
#include "twinsync/scenario_config.hpp"
#include "twinsync/service.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace twinsync;

namespace {

constexpr int kExitCompleted = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitBlocked = 2;
constexpr int kExitTimeout = 3;
constexpr int kExitNotFound = 4;
constexpr int kExitConflict = 5;

constexpr const char* kSessionPointer = ".twinsync-session";

int exit_code(TerminalState s) {
  switch (s) {
    case TerminalState::completed: return kExitCompleted;
    case TerminalState::blocked: return kExitBlocked;
    case TerminalState::watchdog_timeout: return kExitTimeout;
    default: return kExitInvalid;
  }
}

// Everything needed to replay a run exactly, decisions included.
struct Session {
  fs::path config;
  fs::path out;
  bool auto_approve = false;
  std::uint64_t seed = 0;
  std::vector<ScriptedDecision> decisions;
};

fs::path session_path_for(const fs::path& out) { return fs::path(out.string() + ".session.json"); }

void save_session(const Session& s) {
  json d = json::array();
  for (const auto& x : s.decisions) {
    d.push_back({{"plan_id", x.plan_id}, {"verdict", std::string(to_string(x.verdict))}, {"actor", x.actor}});
  }
  const json j = {{"v", 1},
                  {"config", s.config.string()},
                  {"out", s.out.string()},
                  {"auto_approve", s.auto_approve},
                  {"seed", s.seed},
                  {"decisions", d}};
  const fs::path path = session_path_for(s.out);
  std::ofstream(path) << j.dump(2) << '\n';
  std::ofstream(kSessionPointer) << path.string() << '\n';
}

Session load_session(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open session file");
  json j;
  try {
    j = json::parse(in);
    Session s;
    s.config = j.at("config").get<std::string>();
    s.out = j.at("out").get<std::string>();
    s.auto_approve = j.at("auto_approve").get<bool>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& d : j.at("decisions")) {
      s.decisions.push_back({d.at("plan_id").get<std::string>(),
                             verdict_from_string(d.at("verdict").get<std::string>()),
                             d.at("actor").get<std::string>()});
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(path.string(), std::string("malformed session: ") + e.what());
  }
}

ScenarioConfig load_config(const fs::path& path, bool auto_approve) {
  ScenarioConfig cfg = load_scenario(path);
  apply_seed_override(cfg, std::getenv("TWINSYNC_SEED"));
  if (auto_approve) cfg.hitl_mode = HitlMode::auto_approve;
  return cfg;
}

void write_outputs(const TwinController& ctl, const fs::path& out) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  {
    std::ofstream csv(out);
    if (!csv) throw CsvError("cannot write " + out.string());
    write_csv(ctl.log(), csv);
  }
  const std::string report = to_json(compute_metrics(ctl.log()));
  std::ofstream(out.string() + ".report.json") << report << '\n';
  std::cout << report << '\n';
  if (ctl.blocked()) {
    const auto& p = ctl.gate().find(ctl.blocking_plan());
    std::cerr << "blocked: " << p.id << " (" << to_string(p.trigger.kind) << " at tick " << p.raised_tick
              << ") is " << to_string(p.status) << "\n";
    if (p.status == PlanStatus::awaiting_decision) {
      std::cerr << "  decide with: twinsync decide " << p.id << " approve|reject --actor <name>\n";
    }
  }
}

int cmd_run(const fs::path& config_path, const fs::path& out, bool auto_approve) {
  const ScenarioConfig cfg = load_config(config_path, auto_approve);
  TwinController ctl(cfg);
  ctl.run();
  write_outputs(ctl, out);
  save_session({fs::absolute(config_path), fs::absolute(out), auto_approve, cfg.seed, {}});
  return exit_code(ctl.state());
}

int cmd_report(const fs::path& log_path) {
  std::ifstream in(log_path);
  if (!in) {
    std::cerr << "twinsync: cannot open " << log_path << "\n";
    return kExitInvalid;
  }
  const RunLog log = read_csv(in);
  std::cout << to_json(compute_metrics(log)) << '\n';
  return 0;
}

int cmd_decide(const std::string& plan_id, const std::string& verdict_text, const std::string& actor,
               fs::path session_path) {
  if (session_path.empty()) {
    std::ifstream ptr(kSessionPointer);
    std::string line;
    if (!ptr || !std::getline(ptr, line) || line.empty()) {
      std::cerr << "twinsync: no session; run a scenario first or pass --session\n";
      return kExitInvalid;
    }
    session_path = line;
  }
  Session s = load_session(session_path);
  ScenarioConfig cfg = load_scenario(s.config);
  cfg.seed = s.seed;
  if (s.auto_approve) cfg.hitl_mode = HitlMode::auto_approve;

  TwinController ctl(cfg);
  ctl.run(s.decisions);
  const Verdict verdict = verdict_from_string(verdict_text);
  try {
    ctl.decide(plan_id, verdict, actor);
  } catch (const NotFound& e) {
    std::cerr << "twinsync: " << e.what() << "\n";
    return kExitNotFound;
  } catch (const Conflict& e) {
    std::cerr << "twinsync: " << e.what() << "\n";
    return kExitConflict;
  }
  s.decisions.push_back({plan_id, verdict, actor});
  ctl.run(s.decisions);
  write_outputs(ctl, s.out);
  save_session(s);
  return exit_code(ctl.state());
}

std::atomic<bool> g_stop{false};

int cmd_serve(const fs::path& config_path, std::uint16_t port, double rate) {
  const ScenarioConfig cfg = load_config(config_path, false);
  ServiceOptions opt;
  opt.port = port;
  opt.ticks_per_second = rate;
  Service svc(cfg, opt);
  const auto bound = svc.listen();
  std::cout << "serving on http://127.0.0.1:" << bound << std::endl;
  svc.start_run();
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  svc.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital-twin synchronization engine"};
  app.require_subcommand(1);

  fs::path config, out, log_path, session;
  bool auto_approve = false;
  auto* run = app.add_subcommand("run", "Run a scenario and write its CSV log and metrics report");
  run->add_option("--config", config, "Scenario JSON")->required();
  run->add_option("--out", out, "CSV log path")->required();
  run->add_flag("--auto-approve", auto_approve, "Approve replans whose rehearsal completed");

  auto* report = app.add_subcommand("report", "Recompute metrics from a CSV log");
  report->add_option("log", log_path, "CSV log")->required();

  std::uint16_t port = 8080;
  double rate = 1000.0;
  auto* serve = app.add_subcommand("serve", "Run a scenario behind the HTTP/WebSocket service");
  serve->add_option("--config", config, "Scenario JSON")->required();
  serve->add_option("--port", port, "TCP port (0 picks one)");
  serve->add_option("--rate", rate, "Simulated ticks per second, 0 = unpaced");

  std::string plan_id, verdict, actor;
  auto* decide = app.add_subcommand("decide", "Approve or reject a pending plan of the last run");
  decide->add_option("plan-id", plan_id, "Pending plan id")->required();
  decide->add_option("verdict", verdict, "approve or reject")
      ->required()
      ->check(CLI::IsMember({"approve", "reject"}));
  decide->add_option("--actor", actor, "Operator name")->required();
  decide->add_option("--session", session, "Session file (default: the last run in this directory)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, out, auto_approve);
    if (*report) return cmd_report(log_path);
    if (*serve) return cmd_serve(config, port, rate);
    if (*decide) return cmd_decide(plan_id, verdict, actor, session);
  } catch (const ConfigError& e) {
    std::cerr << "twinsync: invalid config: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const Error& e) {
    std::cerr << "twinsync: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "twinsync: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
