// Copyright 2026 The apfsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <apf/common.hpp>
#include <apf/protocol.hpp>
#include <apf/simulator.hpp>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

// Real-time endpoint: a paced simulation loop that broadcasts one state frame
// per tick and takes hand input from any connected client.
namespace apf::bridge {

inline constexpr unsigned short kDefaultPort = 8090;

inline protocol::StateMessage make_state_message(const sim::TickRecord& r, const Vec3& hand) {
  protocol::StateMessage m;
  m.t = r.t;
  for (int i = 0; i < 6; ++i) m.q[i] = r.q[i];
  for (int i = 0; i < 3; ++i) {
    m.tcp[i] = r.tcp[i];
    m.v[i] = r.v_cmd[i];
    m.hand[i] = hand[i];
  }
  m.mode = std::string(to_string(r.mode));
  m.d_ro = r.d_ro;
  m.forces = {r.f1, r.f2, r.f3};
  return m;
}

/// Simulation state driven tick by tick from a live hand source. Input that
/// arrives before a tick starts is used by that tick; later input waits for
/// the next one.
class LiveSession {
 public:
  explicit LiveSession(sim::Scenario scenario) : scenario_(std::move(scenario)) {
    scenario_.validate();
    auto* live = std::get_if<sim::LiveTrack>(&scenario_.track.source);
    if (!live) throw ValidationError("track", "serving requires a live hand source");
    inbound_ = std::make_shared<sim::LiveHandCell>(live->initial);
    tick_cell_ = std::make_shared<sim::LiveHandCell>(live->initial);
    live->cell = tick_cell_;
    state_ = sim::initial_state(scenario_.config, scenario_.track);
  }

  /// Thread-safe. Last writer wins; a rejected message leaves the hand as is.
  void apply_hand_input(const protocol::HandMessage& msg) {
    protocol::validate(msg);
    inbound_->set(msg.position(), msg.drag_vector());
  }

  /// Loop-owner only. Drag is consumed by the tick whether or not the
  /// supervisor is in free drive.
  protocol::StateMessage tick() {
    const auto hand = inbound_->take();
    tick_cell_->set(hand.position, hand.drag);
    auto out = sim::sim_step(state_, scenario_.config, scenario_.track, scenario_.plan);
    state_ = out.state;
    return make_state_message(out.record, hand.position);
  }

  const sim::SimState& state() const { return state_; }
  const sim::Scenario& scenario() const { return scenario_; }
  double dt() const { return scenario_.config.dt; }

 private:
  sim::Scenario scenario_;
  std::shared_ptr<sim::LiveHandCell> inbound_;
  std::shared_ptr<sim::LiveHandCell> tick_cell_;
  sim::SimState state_;
};

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = kDefaultPort;  // 0 picks a free port
  std::size_t queue_capacity = 8;      // per client, oldest frame dropped when full
  bool paced = true;                   // sleep so each tick lasts dt of wall time
  std::optional<std::filesystem::path> static_root;  // plain HTTP GETs served from here
};

namespace detail {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct Counters {
  std::atomic<std::uint64_t> malformed{0};
  std::atomic<std::uint64_t> dropped{0};
  std::atomic<std::uint64_t> hands{0};
};

inline const char* mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

struct HttpConn {
  explicit HttpConn(tcp::socket&& s) : stream(std::move(s)) {}
  beast::tcp_stream stream;
  beast::flat_buffer buffer;
  http::request<http::string_body> req;
  http::response<http::string_body> res;
};

class WsClient : public std::enable_shared_from_this<WsClient> {
 public:
  WsClient(tcp::socket&& socket, LiveSession& session, Counters& counters, std::size_t capacity,
           std::function<void(const std::shared_ptr<WsClient>&)> on_close)
      : ws_(std::move(socket)),
        session_(session),
        counters_(counters),
        capacity_(std::max<std::size_t>(capacity, 2)),
        on_close_(std::move(on_close)) {}

  void accept(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->close();
      self->open_ = true;
      self->read();
      if (!self->queue_.empty()) self->write();
    });
  }

  // io thread only
  void send(const std::shared_ptr<const std::string>& frame) {
    if (queue_.size() >= capacity_) {
      // The front frame may be mid-write; drop the oldest one still waiting.
      queue_.erase(writing_ ? queue_.begin() + 1 : queue_.begin());
      ++counters_.dropped;
    }
    queue_.push_back(frame);
    if (open_ && !writing_) write();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      const auto text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      try {
        self->session_.apply_hand_input(protocol::parse_hand(text));
        ++self->counters_.hands;
      } catch (const Error&) {
        ++self->counters_.malformed;
      }
      self->read();
    });
  }

  void write() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->queue_.pop_front();
                      if (ec) return self->close();
                      if (self->queue_.empty())
                        self->writing_ = false;
                      else
                        self->write();
                    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    open_ = false;
    on_close_(shared_from_this());
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  LiveSession& session_;
  Counters& counters_;
  std::size_t capacity_;
  std::function<void(const std::shared_ptr<WsClient>&)> on_close_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool writing_ = false;
  bool open_ = false;
  bool closed_ = false;
};

}  // namespace detail

/// Websocket server around a LiveSession. One io thread serves all clients;
/// one loop thread owns the simulation and never waits on a client.
class Server {
 public:
  Server(LiveSession& session, ServerOptions opts)
      : session_(session), opts_(std::move(opts)), acceptor_(ioc_) {
    namespace net = detail::net;
    const detail::tcp::endpoint ep(net::ip::make_address(opts_.address), opts_.port);
    boost::system::error_code ec;
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (ec == net::error::address_in_use) throw PortInUse(opts_.port);
    if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
    if (ec == net::error::address_in_use) throw PortInUse(opts_.port);
    if (ec) throw IoError("cannot listen on " + opts_.address + ":" + std::to_string(opts_.port) + ": " + ec.message());
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;
  ~Server() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() {
    accept();
    io_thread_ = std::thread([this] { ioc_.run(); });
    loop_thread_ = std::thread([this] { loop(); });
  }

  void stop() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    if (loop_thread_.joinable()) loop_thread_.join();
    ioc_.stop();
    if (io_thread_.joinable()) io_thread_.join();
    clients_.clear();
  }

  /// Blocks until stop() is called or the simulation halts.
  void wait() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return stopping_ || halted_; });
  }

  /// Like wait() with a timeout; true once the loop has ended.
  template <typename Rep, typename Period>
  bool wait_for(std::chrono::duration<Rep, Period> d) {
    std::unique_lock lock(mutex_);
    return cv_.wait_for(lock, d, [this] { return stopping_ || halted_; });
  }

  /// Blocks until `n` ticks have run (or the loop ends).
  void wait_ticks(std::uint64_t n) {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return ticks_ >= n || stopping_ || halted_; });
  }

  std::uint64_t ticks() const {
    std::lock_guard lock(mutex_);
    return ticks_;
  }
  std::vector<double> tick_intervals() const {
    std::lock_guard lock(mutex_);
    return intervals_;
  }
  std::optional<std::string> halt_reason() const {
    std::lock_guard lock(mutex_);
    return halt_;
  }
  std::uint64_t malformed_frames() const { return counters_.malformed; }
  std::uint64_t dropped_frames() const { return counters_.dropped; }
  std::uint64_t hand_messages() const { return counters_.hands; }
  std::size_t client_count() const { return client_count_; }

 private:
  void accept() {
    acceptor_.async_accept(ioc_,
                           [this](boost::system::error_code ec, detail::tcp::socket socket) {
                             if (ec) return;
                             handle_connection(std::move(socket));
                             accept();
                           });
  }

  // Reads one HTTP request; upgrades to a websocket or serves a static file.
  void handle_connection(detail::tcp::socket socket) {
    auto c = std::make_shared<detail::HttpConn>(std::move(socket));
    c->stream.expires_after(std::chrono::seconds(10));
    detail::http::async_read(c->stream, c->buffer, c->req, [this, c](boost::system::error_code ec, std::size_t) {
      if (ec) return;
      if (detail::websocket::is_upgrade(c->req)) {
        c->stream.expires_never();
        auto client = std::make_shared<detail::WsClient>(
            c->stream.release_socket(), session_, counters_, opts_.queue_capacity,
            [this](const std::shared_ptr<detail::WsClient>& w) {
              clients_.erase(w);
              client_count_ = clients_.size();
            });
        clients_.insert(client);
        client_count_ = clients_.size();
        client->accept(std::move(c->req));
        return;
      }
      serve_file(c);
    });
  }

  void serve_file(const std::shared_ptr<detail::HttpConn>& c) {
    namespace http = detail::http;
    auto& res = c->res;
    res.version(c->req.version());
    res.keep_alive(false);
    std::string target(c->req.target());
    if (const auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (target.empty() || target.back() == '/') target += "index.html";
    const bool safe = target.find("..") == std::string::npos && target.front() == '/';
    res.result(http::status::not_found);
    if (opts_.static_root && safe && c->req.method() == http::verb::get) {
      const auto path = *opts_.static_root / target.substr(1);
      std::ifstream in(path, std::ios::binary);
      if (in) {
        std::ostringstream ss;
        ss << in.rdbuf();
        res.body() = ss.str();
        res.result(http::status::ok);
        res.set(http::field::content_type, detail::mime_type(path));
      }
    }
    if (res.result() != http::status::ok) {
      res.set(http::field::content_type, "text/plain");
      res.body() = "not found\n";
    }
    res.prepare_payload();
    http::async_write(c->stream, res, [c](boost::system::error_code, std::size_t) {
      boost::system::error_code ignored;
      c->stream.socket().shutdown(detail::tcp::socket::shutdown_send, ignored);
    });
  }

  void broadcast(std::string text) {
    auto frame = std::make_shared<const std::string>(std::move(text));
    detail::net::post(ioc_, [this, frame] {
      for (const auto& c : clients_) c->send(frame);
    });
  }

  void loop() {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(session_.dt()));
    auto next = clock::now();
    std::optional<clock::time_point> last;
    for (;;) {
      const auto start = clock::now();
      std::string frame;
      try {
        frame = protocol::serialize(session_.tick());
      } catch (const Error& e) {
        std::lock_guard lock(mutex_);
        halt_ = e.what();
        halted_ = true;
        cv_.notify_all();
        return;
      }
      broadcast(std::move(frame));
      {
        std::lock_guard lock(mutex_);
        if (last) intervals_.push_back(std::chrono::duration<double>(start - *last).count());
        ++ticks_;
      }
      last = start;
      cv_.notify_all();

      std::unique_lock lock(mutex_);
      if (opts_.paced) {
        next += period;
        cv_.wait_until(lock, next, [this] { return stopping_; });
      }
      if (stopping_) return;
    }
  }

  LiveSession& session_;
  ServerOptions opts_;
  detail::net::io_context ioc_;
  detail::tcp::acceptor acceptor_;
  std::set<std::shared_ptr<detail::WsClient>> clients_;  // io thread only
  std::atomic<std::size_t> client_count_{0};
  detail::Counters counters_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  bool stopping_ = false;
  bool halted_ = false;
  std::uint64_t ticks_ = 0;
  std::vector<double> intervals_;
  std::optional<std::string> halt_;
  std::thread io_thread_;
  std::thread loop_thread_;
};

}  // namespace apf::bridge
