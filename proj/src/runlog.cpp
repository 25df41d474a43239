#include "twinsync/runlog.hpp"

#include "twinsync/errors.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace twinsync {

namespace {

constexpr std::size_t kColumnCount = std::size(kCsvColumns);

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <class T>
T parse_number(std::string_view field, std::size_t line_no, std::string_view column) {
  T v{};
  const auto* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw CsvError("line " + std::to_string(line_no) + ": column " + std::string(column) +
                   ": cannot parse '" + std::string(field) + "'");
  }
  return v;
}

void put_pose(std::ostream& out, const Pose& p) {
  out << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.z) << ','
      << format_double(p.roll) << ',' << format_double(p.pitch) << ',' << format_double(p.yaw);
}

std::string incident_field(std::uint8_t mask) {
  std::string s;
  for (auto k : kAllIncidentKinds) {
    if (mask & bit(k)) {
      if (!s.empty()) s += '|';
      s += to_string(k);
    }
  }
  return s;
}

}  // namespace

std::string_view to_string(TerminalState s) {
  switch (s) {
    case TerminalState::idle: return "idle";
    case TerminalState::running: return "running";
    case TerminalState::blocked: return "blocked";
    case TerminalState::completed: return "completed";
    case TerminalState::watchdog_timeout: return "watchdog-timeout";
  }
  return "unknown";
}

TerminalState terminal_state_from_string(std::string_view s) {
  for (auto t : {TerminalState::idle, TerminalState::running, TerminalState::blocked,
                 TerminalState::completed, TerminalState::watchdog_timeout}) {
    if (to_string(t) == s) return t;
  }
  throw CsvError("unknown terminal state '" + std::string(s) + "'");
}

std::string_view to_string(CommandEvent e) {
  switch (e) {
    case CommandEvent::sent: return "sent";
    case CommandEvent::applied: return "applied";
    case CommandEvent::rejected: return "rejected";
  }
  return "unknown";
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_csv(const RunLog& log, std::ostream& out) {
  for (std::size_t i = 0; i < kColumnCount; ++i) {
    out << (i ? "," : "") << kCsvColumns[i];
  }
  out << '\n';
  for (const auto& r : log.rows) {
    out << r.tick << ',' << format_double(r.physical.timestamp_ms) << ','
        << format_double(r.virtual_twin.timestamp_ms) << ',';
    put_pose(out, r.physical.pose);
    out << ',';
    put_pose(out, r.virtual_twin.pose);
    out << ',' << format_double(r.dev_pos_m) << ',' << format_double(r.dev_ts_ms) << ','
        << (r.clearance_min_m ? format_double(*r.clearance_min_m) : std::string()) << ','
        << incident_field(r.incidents) << ',' << r.physical.active_command << ','
        << r.virtual_twin.active_command << '\n';
  }
  out << "# tick_ms=" << format_double(log.tick_ms) << '\n';
  out << "# terminal_state=" << to_string(log.terminal) << '\n';
  out << "# config_fingerprint=" << log.config_fingerprint << '\n';
  for (const auto& a : log.audit) {
    const nlohmann::json j = {{"tick", a.tick},
                              {"order", a.order},
                              {"event", a.event},
                              {"plan_id", a.plan_id},
                              {"detail", nlohmann::json::parse(a.detail)}};
    out << "# audit " << j.dump() << '\n';
  }
}

std::string to_csv(const RunLog& log) {
  std::ostringstream os;
  write_csv(log, os);
  return os.str();
}

RunLog read_csv(std::istream& in) {
  RunLog log;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw CsvError("empty log: missing header row");
  ++line_no;
  {
    const auto cols = split(line, ',');
    if (cols.size() != kColumnCount) {
      throw CsvError("line 1: expected " + std::to_string(kColumnCount) + " columns, got " +
                     std::to_string(cols.size()));
    }
    for (std::size_t i = 0; i < kColumnCount; ++i) {
      if (cols[i] != kCsvColumns[i]) {
        throw CsvError("line 1: column " + std::to_string(i + 1) + " must be '" +
                       std::string(kCsvColumns[i]) + "', got '" + std::string(cols[i]) + "'");
      }
    }
  }
  bool seen_terminal = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string_view meta(line);
      meta.remove_prefix(1);
      while (!meta.empty() && meta.front() == ' ') meta.remove_prefix(1);
      if (meta.starts_with("tick_ms=")) {
        log.tick_ms = parse_number<double>(meta.substr(8), line_no, "tick_ms");
      } else if (meta.starts_with("terminal_state=")) {
        log.terminal = terminal_state_from_string(meta.substr(15));
        seen_terminal = true;
      } else if (meta.starts_with("config_fingerprint=")) {
        log.config_fingerprint = std::string(meta.substr(19));
      } else if (meta.starts_with("audit ")) {
        AuditEntry a;
        try {
          const auto j = nlohmann::json::parse(meta.substr(6));
          a.tick = j.at("tick").get<std::int64_t>();
          a.order = j.value("order", std::uint64_t{0});
          a.event = j.at("event").get<std::string>();
          a.plan_id = j.at("plan_id").get<std::string>();
          a.detail = j.at("detail").dump();
        } catch (const nlohmann::json::exception& e) {
          throw CsvError("line " + std::to_string(line_no) + ": bad audit entry: " + e.what());
        }
        log.audit.push_back(std::move(a));
      }
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != kColumnCount) {
      throw CsvError("line " + std::to_string(line_no) + ": expected " +
                     std::to_string(kColumnCount) + " fields, got " + std::to_string(f.size()));
    }
    LogRow r;
    auto num = [&](std::size_t idx) { return parse_number<double>(f[idx], line_no, kCsvColumns[idx]); };
    r.tick = parse_number<std::int64_t>(f[0], line_no, kCsvColumns[0]);
    r.physical.twin = TwinId::physical;
    r.virtual_twin.twin = TwinId::virtual_twin;
    r.physical.timestamp_ms = num(1);
    r.virtual_twin.timestamp_ms = num(2);
    auto read_pose = [&](std::size_t base, Pose& p) {
      p.x = num(base);
      p.y = num(base + 1);
      p.z = num(base + 2);
      p.roll = num(base + 3);
      p.pitch = num(base + 4);
      p.yaw = num(base + 5);
    };
    read_pose(3, r.physical.pose);
    read_pose(9, r.virtual_twin.pose);
    r.dev_pos_m = num(15);
    r.dev_ts_ms = num(16);
    if (!f[17].empty()) r.clearance_min_m = num(17);
    if (!f[18].empty()) {
      for (auto k : split(f[18], '|')) r.incidents |= bit(incident_kind_from_string(k));
    }
    r.physical.active_command = parse_number<std::uint64_t>(f[19], line_no, kCsvColumns[19]);
    r.virtual_twin.active_command = parse_number<std::uint64_t>(f[20], line_no, kCsvColumns[20]);
    if (!log.rows.empty() && r.tick <= log.rows.back().tick) {
      throw CsvError("line " + std::to_string(line_no) + ": ticks must be strictly increasing");
    }
    log.rows.push_back(std::move(r));
  }
  if (!seen_terminal) log.terminal = TerminalState::idle;
  return log;
}

}  // namespace twinsync
