/*
 * Copyright 2026 The flapesc Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "flapesc/bridge.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <csignal>
#include <deque>
#include <mutex>
#include <thread>
#include <vector>

#include "flapesc/errors.hpp"
#include "flapesc/telemetry_io.hpp"

namespace flapesc::bridge
{
namespace
{

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;

std::filesystem::path segment_path(const std::filesystem::path & base, int segment)
{
  if (segment == 0) {
    return base;
  }
  auto p = base;
  p.replace_filename(fmt::format("{}.reset{}{}", base.stem().string(), segment, base.extension().string()));
  return p;
}

}  // namespace

class Session;

struct Server::Impl
{
  Impl(engine::SimConfig c, ServeOptions o) : config(std::move(c)), options(std::move(o)), acceptor(ioc) {}

  void do_accept();
  void on_open(const std::shared_ptr<Session> & s);
  void handle(const std::shared_ptr<Session> & s, const std::string & text);
  void broadcast(std::shared_ptr<const std::string> msg, bool droppable);
  void post_broadcast(std::string msg, bool droppable);
  void engine_loop();
  void write_segment(const engine::TelemetryLog & log, int segment);

  engine::SimConfig config;
  ServeOptions options;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::optional<net::executor_work_guard<net::io_context::executor_type>> work;
  std::vector<std::weak_ptr<Session>> sessions;  // io thread only
  engine::CommandQueue commands;
  std::thread io_thread;
  std::thread engine_thread;
  std::atomic<bool> stopping{false};
  std::atomic<bool> running{false};
  std::atomic<double> sim_time{0.0};
  std::atomic<std::uint64_t> frames_broadcast{0};
  std::atomic<std::uint64_t> frames_dropped{0};
  std::atomic<std::uint64_t> clients_accepted{0};
  std::uint16_t bound_port{0};
  bool started{false};
  bool stopped{false};
  std::mutex stop_mutex;
};

class Session : public std::enable_shared_from_this<Session>
{
public:
  Session(tcp::socket socket, Server::Impl & server) : ws_(std::move(socket)), server_(server) {}

  void run()
  {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.text(true);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (!ec) {
        self->server_.on_open(self);
        self->do_read();
      }
    });
  }

  void send(std::shared_ptr<const std::string> msg, bool droppable)
  {
    if (closing_) {
      return;
    }
    if (droppable) {
      std::size_t frames = 0;
      for (const auto & q : queue_) {
        frames += q.droppable ? 1 : 0;
      }
      if (frames >= server_.options.client_queue_limit) {
        // Oldest frame that is not already on the wire.
        for (auto it = queue_.begin() + (writing_ ? 1 : 0); it != queue_.end(); ++it) {
          if (it->droppable) {
            queue_.erase(it);
            ++server_.frames_dropped;
            break;
          }
        }
      }
    }
    queue_.push_back({std::move(msg), droppable});
    if (!writing_) {
      do_write();
    }
  }

  void close()
  {
    if (closing_) {
      return;
    }
    closing_ = true;
    auto self = shared_from_this();
    if (writing_) {
      beast::error_code ignored;
      beast::get_lowest_layer(ws_).socket().close(ignored);
      return;
    }
    ws_.async_close(websocket::close_code::going_away, [self](beast::error_code) {});
    auto timer = std::make_shared<net::steady_timer>(ws_.get_executor(), std::chrono::milliseconds(300));
    timer->async_wait([self, timer](beast::error_code) {
      beast::error_code ignored;
      beast::get_lowest_layer(self->ws_).socket().close(ignored);
    });
  }

private:
  struct Outgoing
  {
    std::shared_ptr<const std::string> msg;
    bool droppable;
  };

  void do_read()
  {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->server_.handle(self, text);
      self->do_read();
    });
  }

  void do_write()
  {
    writing_ = true;
    ws_.async_write(net::buffer(*queue_.front().msg), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->queue_.pop_front();
      self->writing_ = false;
      if (ec) {
        self->queue_.clear();
        return;
      }
      if (!self->queue_.empty() && !self->closing_) {
        self->do_write();
      }
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  Server::Impl & server_;
  std::deque<Outgoing> queue_;
  bool writing_{false};
  bool closing_{false};
};

void Server::Impl::do_accept()
{
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      return;
    }
    if (options.send_buffer_bytes > 0) {
      beast::error_code ignored;
      socket.set_option(net::socket_base::send_buffer_size(options.send_buffer_bytes), ignored);
    }
    ++clients_accepted;
    std::make_shared<Session>(std::move(socket), *this)->run();
    do_accept();
  });
}

void Server::Impl::on_open(const std::shared_ptr<Session> & s)
{
  sessions.push_back(s);
  s->send(std::make_shared<const std::string>(status_message(running.load(), config.name)), false);
}

void Server::Impl::handle(const std::shared_ptr<Session> & s, const std::string & text)
{
  const ClientMessage msg = parse_client_message(text);
  const double now = sim_time.load();
  std::visit(
    [&](const auto & m) {
      using T = std::decay_t<decltype(m)>;
      if constexpr (std::is_same_v<T, WireError>) {
        s->send(std::make_shared<const std::string>(error_message(m.reason)), false);
      } else if constexpr (std::is_same_v<T, SetSource>) {
        if (!std::holds_alternative<objective::LightField>(config.objective)) {
          s->send(std::make_shared<const std::string>(error_message("set_source needs a light-field objective")), false);
        } else {
          commands.push({now, engine::CommandKind::set_source, m.z});
        }
      } else if constexpr (std::is_same_v<T, Pause>) {
        commands.push({now, engine::CommandKind::pause, 0.0});
      } else if constexpr (std::is_same_v<T, Resume>) {
        commands.push({now, engine::CommandKind::resume, 0.0});
      } else {
        commands.push({now, engine::CommandKind::reset, 0.0});
      }
    },
    msg);
}

void Server::Impl::broadcast(std::shared_ptr<const std::string> msg, bool droppable)
{
  std::erase_if(sessions, [](const std::weak_ptr<Session> & w) { return w.expired(); });
  for (const auto & w : sessions) {
    if (auto s = w.lock()) {
      s->send(msg, droppable);
    }
  }
}

void Server::Impl::post_broadcast(std::string msg, bool droppable)
{
  auto shared = std::make_shared<const std::string>(std::move(msg));
  net::post(ioc, [this, shared, droppable] { broadcast(shared, droppable); });
}

void Server::Impl::write_segment(const engine::TelemetryLog & log, int segment)
{
  const auto path = segment_path(options.log_path, segment);
  try {
    tio::write_log(path, log);
  } catch (const std::exception & e) {
    spdlog::error("live log {}: {}", path.string(), e.what());
  }
}

void Server::Impl::engine_loop()
{
  engine::Simulation sim(config);
  engine::TelemetryLog log;
  int segment = 0;
  bool paused = false;
  bool finished = false;
  const double frame_every = options.speed / options.rate_hz;
  double next_frame = 0.0;
  auto anchor_wall = Clock::now();
  double anchor_sim = 0.0;

  auto publish_status = [&] {
    running = !paused && !finished;
    post_broadcast(status_message(running.load(), config.name), false);
  };
  auto record = [&] {
    const auto & f = sim.sense();
    log.push_back(f);
    if (f.t >= next_frame) {
      post_broadcast(frame_message(f), true);
      ++frames_broadcast;
      while (next_frame <= f.t) {
        next_frame += frame_every;
      }
    }
  };

  running = true;
  publish_status();
  while (!stopping) {
    const auto cmds = (paused || finished) ? commands.wait_drain(0.05) : commands.drain();
    bool status_changed = false;
    for (const auto & c : cmds) {
      switch (c.kind) {
        case engine::CommandKind::pause:
          paused = true;
          status_changed = true;
          break;
        case engine::CommandKind::resume:
          if (paused) {
            paused = false;
            anchor_wall = Clock::now();
            anchor_sim = sim.time();
          }
          status_changed = true;
          break;
        case engine::CommandKind::reset:
          write_segment(log, segment++);
          log.clear();
          sim.apply(c);
          finished = false;
          next_frame = 0.0;
          anchor_wall = Clock::now();
          anchor_sim = 0.0;
          status_changed = true;
          break;
        case engine::CommandKind::set_source:
          try {
            sim.apply(c);
          } catch (const ConfigError & e) {
            post_broadcast(error_message(e.what()), false);
          }
          break;
      }
    }
    if (status_changed) {
      publish_status();
    }
    sim_time = sim.time();
    if (paused || finished) {
      continue;
    }

    const double elapsed = std::chrono::duration<double>(Clock::now() - anchor_wall).count();
    const double target = anchor_sim + elapsed * options.speed;
    try {
      int budget = 0;
      while (!sim.done() && sim.time() <= target && budget < 5000 && !stopping) {
        record();
        sim.integrate();
        sim_time = sim.time();
        ++budget;
      }
      if (sim.done()) {
        record();
        finished = true;
        publish_status();
        continue;
      }
    } catch (const DivergenceError & e) {
      post_broadcast(error_message(e.what()), false);
      finished = true;
      publish_status();
      continue;
    }
    const double ahead = (sim.time() - anchor_sim) / options.speed - elapsed;
    std::this_thread::sleep_for(std::chrono::duration<double>(std::clamp(ahead, 0.0005, 0.005)));
  }
  running = false;
  write_segment(log, segment);
}

Server::Server(engine::SimConfig config, ServeOptions options)
: impl_(std::make_unique<Impl>(std::move(config), std::move(options)))
{
  engine::validate(impl_->config);
  if (!(impl_->options.rate_hz > 0.0) || !(impl_->options.speed > 0.0)) {
    throw ConfigError("serve: rate and speed must be > 0");
  }
  if (impl_->options.client_queue_limit == 0) {
    throw ConfigError("serve: client queue limit must be > 0");
  }
}

Server::~Server() { stop(); }

void Server::start()
{
  auto & d = *impl_;
  if (d.started) {
    return;
  }
  beast::error_code ec;
  const tcp::endpoint ep(net::ip::make_address(d.options.bind_address, ec), d.options.port);
  if (ec) {
    throw ConfigError(fmt::format("serve: bad bind address '{}'", d.options.bind_address));
  }
  d.acceptor.open(ep.protocol(), ec);
  if (!ec) {
    d.acceptor.set_option(net::socket_base::reuse_address(true), ec);
  }
  if (!ec) {
    d.acceptor.bind(ep, ec);
  }
  if (!ec) {
    d.acceptor.listen(net::socket_base::max_listen_connections, ec);
  }
  if (ec) {
    throw IoError(fmt::format("serve: cannot listen on {}:{}: {}", d.options.bind_address, d.options.port, ec.message()));
  }
  d.bound_port = d.acceptor.local_endpoint().port();
  d.work.emplace(net::make_work_guard(d.ioc));
  d.do_accept();
  d.io_thread = std::thread([&d] { d.ioc.run(); });
  d.engine_thread = std::thread([&d] { d.engine_loop(); });
  d.started = true;
}

void Server::stop()
{
  auto & d = *impl_;
  std::lock_guard lock(d.stop_mutex);
  if (!d.started || d.stopped) {
    return;
  }
  d.stopped = true;
  d.stopping = true;
  if (d.engine_thread.joinable()) {
    d.engine_thread.join();
  }
  net::post(d.ioc, [&d] {
    beast::error_code ignored;
    d.acceptor.close(ignored);
    for (const auto & w : d.sessions) {
      if (auto s = w.lock()) {
        s->close();
      }
    }
  });
  d.work.reset();
  if (d.io_thread.joinable()) {
    d.io_thread.join();
  }
}

std::uint16_t Server::port() const { return impl_->bound_port; }

ServerStats Server::stats() const
{
  return {impl_->frames_broadcast.load(), impl_->frames_dropped.load(), impl_->clients_accepted.load()};
}

double Server::sim_time() const { return impl_->sim_time.load(); }

namespace
{
volatile std::sig_atomic_t interrupted = 0;
void on_signal(int) { interrupted = 1; }
}  // namespace

void serve(const engine::SimConfig & config, const ServeOptions & options)
{
  Server server(config, options);
  server.start();
  spdlog::info("serving '{}' on ws://{}:{} at {} Hz", config.name, options.bind_address, server.port(), options.rate_hz);
  interrupted = 0;
  auto old_int = std::signal(SIGINT, on_signal);
  auto old_term = std::signal(SIGTERM, on_signal);
  while (!interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  server.stop();
  std::signal(SIGINT, old_int);
  std::signal(SIGTERM, old_term);
  spdlog::info("stopped; log written to {}", options.log_path.string());
}

}  // namespace flapesc::bridge
