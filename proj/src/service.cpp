#include "twinsync/service.hpp"

#include "twinsync/controller.hpp"
#include "twinsync/errors.hpp"
#include "twinsync/wire.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

namespace twinsync {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

class WsSession;

}  // namespace

struct Service::Impl {
  Impl(ScenarioConfig cfg, ServiceOptions opt) : options(opt), controller(std::move(cfg)) {
    controller.set_frame_listener([this](const TickFrame& f) { on_frame(f); });
    controller.set_gate_listener([this](const GateEvent& e) { on_gate_event(e); });
  }

  void on_frame(const TickFrame& f);
  void on_gate_event(const GateEvent& e);
  void broadcast(std::string text);
  void sim_loop();
  http::response<http::string_body> handle(const http::request<http::string_body>& req);
  void do_accept();

  ServiceOptions options;

  // Simulation side. `sim_mu` serializes every touch of the controller.
  std::mutex sim_mu;
  TwinController controller;
  std::thread sim_thread;
  std::condition_variable sim_cv;
  bool stopping = false;
  bool wake = false;
  bool idle = true;  ///< sim thread has nothing to do
  std::condition_variable idle_cv;

  // Published snapshots read by the HTTP handlers.
  std::mutex pub_mu;
  json latest = nullptr;
  json pending = json::array();
  TerminalState pub_state = TerminalState::idle;
  std::int64_t pub_tick = 0;
  std::int64_t last_streamed_tick = -1;

  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::thread io_thread;
  std::vector<std::weak_ptr<WsSession>> sessions;  // io thread only

  // Stream messages in publication order. Posts from different threads are
  // not ordered by the io_context, so the order is fixed here instead.
  std::mutex out_mu;
  std::deque<std::string> outbox;
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, Service::Impl& impl) : ws_(std::move(socket)), impl_(impl) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->impl_.sessions.push_back(self);
      json hello;
      {
        std::lock_guard lk(self->impl_.pub_mu);
        hello = {{"v", wire::kVersion},
                 {"type", "hello"},
                 {"terminal_state", std::string(to_string(self->impl_.pub_state))},
                 {"tick", self->impl_.pub_tick}};
      }
      self->send(hello.dump());
      self->do_read();
    });
  }

  void send(std::string text) {
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) do_write();
  }

 private:
  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->buffer_.consume(self->buffer_.size());
      self->do_read();
    });
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->do_write();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  Service::Impl& impl_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Service::Impl& impl) : stream_(std::move(socket)), impl_(impl) {}

  void run() { do_read(); }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/api/stream") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), impl_)->run(std::move(req_));
        return;
      }
    }
    auto res = std::make_shared<http::response<http::string_body>>(impl_.handle(req_));
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (!ec && res->keep_alive()) {
        self->do_read();
      } else {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      }
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  Service::Impl& impl_;
};

http::response<http::string_body> reply(const http::request<http::string_body>& req, http::status status,
                                        const json& body) {
  http::response<http::string_body> res{status, req.version()};
  res.set(http::field::content_type, "application/json");
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = body.dump();
  res.prepare_payload();
  return res;
}

http::response<http::string_body> fail(const http::request<http::string_body>& req, http::status status,
                                       const std::string& message) {
  return reply(req, status, wire::error(static_cast<int>(status), message));
}

}  // namespace

void Service::Impl::on_frame(const TickFrame& f) {
  json doc = wire::frame(f);
  bool stream = false;
  {
    std::lock_guard lk(pub_mu);
    pub_state = f.state;
    pub_tick = f.row->tick;
    // One frame per frame_every ticks, plus every state change away from
    // running; a tick is never streamed twice.
    if (f.row->tick > last_streamed_tick &&
        (f.row->tick % options.frame_every == 0 || f.state != TerminalState::running)) {
      last_streamed_tick = f.row->tick;
      stream = true;
    }
    latest = doc;
  }
  if (stream) broadcast(doc.dump());
}

void Service::Impl::on_gate_event(const GateEvent& e) {
  json list = json::array();
  for (const auto& p : controller.gate().plans()) list.push_back(wire::plan(p));
  {
    std::lock_guard lk(pub_mu);
    pending = std::move(list);
    if (e.type == "deployed") pub_state = TerminalState::running;
  }
  broadcast(wire::gate_event(e).dump());
}

void Service::Impl::broadcast(std::string text) {
  {
    std::lock_guard lk(out_mu);
    outbox.push_back(std::move(text));
  }
  net::post(ioc, [this] {
    std::deque<std::string> batch;
    {
      std::lock_guard lk(out_mu);
      batch.swap(outbox);
    }
    std::erase_if(sessions, [](const auto& w) { return w.expired(); });
    for (auto& text : batch) {
      for (auto& w : sessions) {
        if (auto s = w.lock()) s->send(text);
      }
    }
  });
}

void Service::Impl::sim_loop() {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  std::int64_t steps = 0;
  while (true) {
    bool progressed = false;
    {
      std::lock_guard lk(sim_mu);
      if (stopping) return;
      progressed = controller.step();
      wake = false;
    }
    if (!progressed) {
      std::unique_lock lk(sim_mu);
      idle = true;
      idle_cv.notify_all();
      sim_cv.wait(lk, [&] { return stopping || wake; });
      idle = false;
      continue;
    }
    ++steps;
    if (options.ticks_per_second > 0.0) {
      std::this_thread::sleep_until(
          t0 + std::chrono::duration_cast<clock::duration>(
                   std::chrono::duration<double>(static_cast<double>(steps) / options.ticks_per_second)));
    }
  }
}

http::response<http::string_body> Service::Impl::handle(const http::request<http::string_body>& req) {
  const std::string target(req.target());
  const std::string prefix = "/api/pending/";
  const std::string suffix = "/decision";

  if (target == "/api/state") {
    if (req.method() != http::verb::get) return fail(req, http::status::method_not_allowed, "use GET");
    std::lock_guard lk(pub_mu);
    return reply(req, http::status::ok, wire::state(pub_state, pub_tick, latest));
  }
  if (target == "/api/pending") {
    if (req.method() != http::verb::get) return fail(req, http::status::method_not_allowed, "use GET");
    std::lock_guard lk(pub_mu);
    return reply(req, http::status::ok, json{{"v", wire::kVersion}, {"plans", pending}});
  }
  if (target == "/api/metrics") {
    if (req.method() != http::verb::get) return fail(req, http::status::method_not_allowed, "use GET");
    std::lock_guard lk(sim_mu);
    if (controller.log().rows.empty()) {
      return reply(req, http::status::ok, json{{"v", wire::kVersion}, {"available", false}});
    }
    json m = wire::metrics(compute_metrics(controller.log()));
    m["available"] = true;
    return reply(req, http::status::ok, m);
  }
  if (target.starts_with(prefix) && target.ends_with(suffix) &&
      target.size() > prefix.size() + suffix.size()) {
    if (req.method() != http::verb::post) return fail(req, http::status::method_not_allowed, "use POST");
    const std::string id = target.substr(prefix.size(), target.size() - prefix.size() - suffix.size());
    json body;
    try {
      body = json::parse(req.body());
    } catch (const json::parse_error&) {
      return fail(req, http::status::bad_request, "body is not valid JSON");
    }
    if (!body.is_object() || !body.contains("verdict") || !body["verdict"].is_string() ||
        !body.contains("actor") || !body["actor"].is_string() || body["actor"].get<std::string>().empty()) {
      return fail(req, http::status::bad_request, "body must be {\"verdict\": string, \"actor\": string}");
    }
    Verdict verdict;
    try {
      verdict = verdict_from_string(body["verdict"].get<std::string>());
    } catch (const ContractError& e) {
      return fail(req, http::status::bad_request, e.what());
    }
    try {
      std::lock_guard lk(sim_mu);
      const PendingPlan& p = controller.decide(id, verdict, body["actor"].get<std::string>());
      json out = {{"v", wire::kVersion}, {"plan", wire::plan(p)}};
      wake = true;
      idle = false;
      sim_cv.notify_all();
      return reply(req, http::status::ok, out);
    } catch (const NotFound& e) {
      return fail(req, http::status::not_found, e.what());
    } catch (const Conflict& e) {
      return fail(req, http::status::conflict, e.what());
    }
  }
  return fail(req, http::status::not_found, "no route for " + target);
}

void Service::Impl::do_accept() {
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<HttpSession>(std::move(socket), *this)->run();
    do_accept();
  });
}

Service::Service(ScenarioConfig config, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(config), options)) {
  if (options.frame_every <= 0) throw ContractError("frame_every must be > 0");
}

Service::~Service() { stop(); }

std::uint16_t Service::listen() {
  auto& im = *impl_;
  const tcp::endpoint ep(net::ip::make_address("127.0.0.1"), im.options.port);
  im.acceptor.open(ep.protocol());
  im.acceptor.set_option(net::socket_base::reuse_address(true));
  im.acceptor.bind(ep);
  im.acceptor.listen(net::socket_base::max_listen_connections);
  im.do_accept();
  im.io_thread = std::thread([&im] { im.ioc.run(); });
  return port();
}

void Service::start_run() {
  auto& im = *impl_;
  if (im.sim_thread.joinable()) throw Conflict("run already started");
  {
    std::lock_guard lk(im.sim_mu);
    im.idle = false;
  }
  im.sim_thread = std::thread([&im] { im.sim_loop(); });
}

void Service::wait_idle() {
  auto& im = *impl_;
  std::unique_lock lk(im.sim_mu);
  im.idle_cv.wait(lk, [&] { return im.idle || im.stopping; });
}

void Service::stop() {
  if (!impl_) return;
  auto& im = *impl_;
  {
    std::lock_guard lk(im.sim_mu);
    im.stopping = true;
    im.sim_cv.notify_all();
    im.idle_cv.notify_all();
  }
  if (im.sim_thread.joinable()) im.sim_thread.join();
  im.ioc.stop();
  if (im.io_thread.joinable()) im.io_thread.join();
}

std::uint16_t Service::port() const {
  beast::error_code ec;
  const auto ep = impl_->acceptor.local_endpoint(ec);
  return ec ? 0 : ep.port();
}

}  // namespace twinsync
