#pragma once

// Network front ends for a SessionManager:
//   GameServer   persistent TCP connections carrying length-prefixed JSON
//                frames (see protocol.hpp), one seat per connection
//   AdminServer  request/response HTTP with JSON bodies for creating,
//                listing, starting and exporting sessions
//   GameClient   blocking client for the frame protocol

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <list>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "karma/agents.hpp"
#include "karma/config.hpp"
#include "karma/error.hpp"
#include "karma/server/protocol.hpp"
#include "karma/server/session.hpp"
#include "karma/simulator.hpp"
#include "karma/trace.hpp"

namespace karma::server {

namespace detail {

inline bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

// Waits up to timeout_ms for readable data; returns bytes read, 0 on EOF,
// -1 on timeout, -2 on error.
inline ssize_t recv_some(int fd, char* buf, std::size_t len, int timeout_ms) {
  pollfd p{fd, POLLIN, 0};
  int r = ::poll(&p, 1, timeout_ms);
  if (r == 0) return -1;
  if (r < 0) return -2;
  ssize_t n = ::recv(fd, buf, len, 0);
  return n < 0 ? -2 : n;
}

}  // namespace detail

class GameServer {
 public:
  explicit GameServer(SessionManager& manager) : manager_(manager) {}
  ~GameServer() { stop(); }

  // Binds 127.0.0.1-or-any:port (0 picks a free port) and starts accepting.
  void start(int port, bool loopback_only = false, int tick_ms = 50) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw IoError("socket() failed");
    int yes = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(loopback_only ? INADDR_LOOPBACK : INADDR_ANY);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw IoError("cannot bind port " + std::to_string(port) + ": " + std::strerror(errno));
    }
    ::listen(listen_fd_, 64);
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    timer_thread_ = std::thread([this, tick_ms] {
      while (running_) {
        manager_.tick_all();
        std::this_thread::sleep_for(std::chrono::milliseconds(tick_ms));
      }
    });
  }

  int port() const { return port_; }

  void stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    if (timer_thread_.joinable()) timer_thread_.join();
    std::list<std::shared_ptr<Connection>> conns;
    {
      std::lock_guard lock(conn_mutex_);
      conns.swap(connections_);
    }
    for (auto& c : conns) c->close();
    for (auto& c : conns) c->join();
  }

 private:
  class Connection : public std::enable_shared_from_this<Connection> {
   public:
    Connection(int fd, SessionManager& manager) : fd_(fd), manager_(manager) {}
    ~Connection() {
      if (fd_ >= 0) ::close(fd_);
    }

    void run() {
      auto self = shared_from_this();
      reader_ = std::thread([self] { self->read_loop(); });
      writer_ = std::thread([self] { self->write_loop(); });
    }

    void close() {
      {
        std::lock_guard lock(mutex_);
        closed_ = true;
      }
      cv_.notify_all();
      ::shutdown(fd_, SHUT_RDWR);
    }

    void join() {
      if (reader_.joinable()) reader_.join();
      if (writer_.joinable()) writer_.join();
    }

    bool closed() {
      std::lock_guard lock(mutex_);
      return closed_;
    }

   private:
    void push(const Message& m) {
      {
        std::lock_guard lock(mutex_);
        if (closed_) return;
        queue_.push_back(encode_frame(m));
      }
      cv_.notify_one();
    }

    void write_loop() {
      for (;;) {
        std::string frame;
        {
          std::unique_lock lock(mutex_);
          cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
          if (queue_.empty()) return;
          frame = std::move(queue_.front());
          queue_.pop_front();
        }
        if (!detail::send_all(fd_, frame)) {
          close();
          return;
        }
      }
    }

    void read_loop() {
      FrameDecoder decoder;
      char buf[4096];
      std::shared_ptr<Session> session;
      std::string token;
      while (!closed()) {
        ssize_t n = detail::recv_some(fd_, buf, sizeof buf, 200);
        if (n == -1) continue;
        if (n <= 0) break;
        decoder.feed({buf, static_cast<std::size_t>(n)});
        try {
          while (auto m = decoder.next()) {
            if (auto* join = std::get_if<Join>(&*m)) {
              session = manager_.by_token(join->token);
              if (!session) {
                push(ErrorMessage{"unknown token"});
                continue;
              }
              token = join->token;
              auto weak = std::weak_ptr<Connection>(shared_from_this());
              auto initial = session->attach(token, [weak](const Message& msg) {
                if (auto c = weak.lock()) c->push(msg);
              });
              for (auto& msg : initial) push(msg);
            } else if (auto* bid = std::get_if<BidSubmit>(&*m)) {
              if (!session) {
                push(ErrorMessage{"join first"});
                continue;
              }
              session->submit_bid(token, bid->round, bid->bid);  // ack arrives via the sink
            } else {
              push(ErrorMessage{"unexpected message from client"});
            }
          }
        } catch (const Error& e) {
          push(ErrorMessage{e.what()});
          break;
        }
      }
      if (session) session->detach(token);
      close();
    }

    int fd_;
    SessionManager& manager_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::string> queue_;
    bool closed_ = false;
    std::thread reader_, writer_;
  };

  void accept_loop() {
    while (running_) {
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (!running_) return;
        continue;
      }
      int yes = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
      auto conn = std::make_shared<Connection>(fd, manager_);
      {
        std::lock_guard lock(conn_mutex_);
        connections_.remove_if([](const std::shared_ptr<Connection>& c) {
          if (!c->closed()) return false;
          c->join();
          return true;
        });
        connections_.push_back(conn);
      }
      conn->run();
    }
  }

  SessionManager& manager_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_, timer_thread_;
  std::mutex conn_mutex_;
  std::list<std::shared_ptr<Connection>> connections_;
};

// Blocking client for the frame protocol.
class GameClient {
 public:
  GameClient(const std::string& host, int port) {
    addrinfo hints{}, *res = nullptr;
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
      throw IoError("cannot resolve " + host);
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    int rc = fd_ < 0 ? -1 : ::connect(fd_, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc < 0) {
      if (fd_ >= 0) ::close(fd_);
      throw IoError("cannot connect to " + host + ":" + std::to_string(port));
    }
  }
  ~GameClient() {
    if (fd_ >= 0) ::close(fd_);
  }
  GameClient(const GameClient&) = delete;
  GameClient& operator=(const GameClient&) = delete;

  void send(const Message& m) {
    if (!detail::send_all(fd_, encode_frame(m))) throw IoError("send failed");
  }

  // Next message, or nullopt after timeout_ms without one. Throws IoError
  // when the server closes the connection.
  std::optional<Message> receive(int timeout_ms) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
      if (auto m = decoder_.next()) return m;
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline -
                                                                        std::chrono::steady_clock::now())
                      .count();
      if (left <= 0) return std::nullopt;
      char buf[4096];
      ssize_t n = detail::recv_some(fd_, buf, sizeof buf, static_cast<int>(left));
      if (n == -1) return std::nullopt;
      if (n <= 0) throw IoError("connection closed");
      decoder_.feed({buf, static_cast<std::size_t>(n)});
    }
  }

 private:
  int fd_ = -1;
  FrameDecoder decoder_;
};

// Builds a SessionSpec from an admin request body:
//   {"config": "<preset>" | {...}, "humans": 1, "bots": "policy:19",
//    "seed": 7, "alpha": 0.98, "lobby_timeout_ms": 600000}
inline SessionSpec spec_from_request(const nlohmann::json& body, const GameConfig& fallback) {
  SessionSpec spec;
  spec.config = fallback;
  if (body.contains("config")) {
    const auto& c = body.at("config");
    spec.config = c.is_string() ? preset(c.get<std::string>()) : c.get<GameConfig>();
  }
  validate(spec.config);
  spec.humans = body.value("humans", 1);
  spec.default_alpha = body.value("alpha", 0.98);
  spec.lobby_timeout_ms = body.value("lobby_timeout_ms", spec.lobby_timeout_ms);
  const int bot_seats = spec.config.n_participants - spec.humans;
  if (body.contains("bots")) {
    const auto& b = body.at("bots");
    spec.bots = b.is_string() ? parse_population(b.get<std::string>()) : population_from_json(b);
  } else if (bot_seats > 0) {
    spec.bots = {AgentSpec{AgentKind::Policy, bot_seats, -1.0, nullptr, {}}};
  }
  return spec;
}

class AdminServer {
 public:
  AdminServer(SessionManager& manager, GameConfig default_config, std::string default_bots,
              std::uint64_t base_seed)
      : manager_(manager),
        default_config_(std::move(default_config)),
        default_bots_(std::move(default_bots)),
        next_seed_(base_seed) {
    routes();
  }
  ~AdminServer() { stop(); }

  // Starts serving on port (0 picks a free port); returns the bound port.
  int start(int port, const std::string& host = "0.0.0.0") {
    port_ = port == 0 ? http_.bind_to_any_port(host) : (http_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw IoError("cannot bind admin port " + std::to_string(port));
    thread_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
    return port_;
  }

  void stop() {
    if (thread_.joinable()) {
      http_.stop();
      thread_.join();
    }
  }

  int port() const { return port_; }

 private:
  static void json_reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void routes() {
    http_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        nlohmann::json body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
        if (!body.contains("bots") && !default_bots_.empty()) body["bots"] = default_bots_;
        SessionSpec spec = spec_from_request(body, default_config_);
        std::uint64_t seed = body.contains("seed") ? body.at("seed").get<std::uint64_t>() : next_seed_++;
        auto session = manager_.create(std::move(spec), seed);
        if (session->tokens().empty()) session->start();
        json_reply(res, 201, {{"id", session->id()}, {"tokens", session->tokens()}, {"seed", seed}});
      } catch (const std::exception& e) {
        json_reply(res, 400, {{"error", e.what()}});
      }
    });
    http_.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& s : manager_.all()) out.push_back(s->summary());
      json_reply(res, 200, out);
    });
    http_.Get(R"(/sessions/([A-Za-z0-9]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = manager_.get(req.matches[1]);
      if (!s) return json_reply(res, 404, {{"error", "no such session"}});
      json_reply(res, 200, s->summary());
    });
    http_.Post(R"(/sessions/([A-Za-z0-9]+)/start)", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = manager_.get(req.matches[1]);
      if (!s) return json_reply(res, 404, {{"error", "no such session"}});
      s->start();
      json_reply(res, 200, s->summary());
    });
    http_.Get(R"(/sessions/([A-Za-z0-9]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = manager_.get(req.matches[1]);
      if (!s) return json_reply(res, 404, {{"error", "no such session"}});
      if (!s->finished()) return json_reply(res, 409, {{"error", "session not finished"}});
      std::ostringstream out;
      write_dataset(out, s->export_dataset());
      res.set_content(out.str(), "text/csv");
    });
    http_.Get(R"(/sessions/([A-Za-z0-9]+)/trace)", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = manager_.get(req.matches[1]);
      if (!s) return json_reply(res, 404, {{"error", "no such session"}});
      std::ostringstream out;
      auto trace = s->trace();
      write_trace(out, s->config(), trace, s->id());
      res.set_content(out.str(), "application/x-ndjson");
    });
  }

  SessionManager& manager_;
  GameConfig default_config_;
  std::string default_bots_;
  std::atomic<std::uint64_t> next_seed_;
  httplib::Server http_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace karma::server
