#include "vhsim/server.hpp"

#include <chrono>
#include <deque>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "vhsim/errors.hpp"
#include "vhsim/protocol.hpp"
#include "vhsim/trace.hpp"

namespace vhsim {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

using Message = std::shared_ptr<const std::string>;

/// Commands accepted by the network side, drained by the simulation loop.
class CommandQueue {
 public:
  void push(Command c) {
    std::lock_guard<std::mutex> lock(mutex_);
    queue_.push_back(std::move(c));
  }
  std::vector<Command> drain() {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<Command> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
    queue_.clear();
    return out;
  }

 private:
  std::mutex mutex_;
  std::deque<Command> queue_;
};

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, const Scenario& scenario, CommandQueue& commands, Message hello)
      : ws_(std::move(socket)), scenario_(scenario), commands_(commands), hello_(std::move(hello)) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(beast::bind_front_handler(&Session::on_accept, shared_from_this()));
  }

  /// Thread-safe: hands the frame to the session's strand.
  void publish(Message frame) {
    net::post(ws_.get_executor(), [self = shared_from_this(), frame = std::move(frame)]() mutable {
      self->frame_ = std::move(frame);
      self->flush();
    });
  }

  void close() {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      self->open_ = false;
      beast::error_code ec;
      beast::get_lowest_layer(self->ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
      beast::get_lowest_layer(self->ws_).close();
    });
  }

  bool open() const { return open_; }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    open_ = true;
    control_.push_back(hello_);
    flush();
    read();
  }

  void read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&Session::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      open_ = false;
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    try {
      Command c = parse_command(text, scenario_);
      control_.push_back(std::make_shared<const std::string>(ack_json(c)));
      commands_.push(std::move(c));
    } catch (const Error& e) {
      control_.push_back(std::make_shared<const std::string>(error_json(e.what())));
    }
    flush();
    read();
  }

  /// Control messages go out in order; of the frames only the newest is kept.
  void flush() {
    if (!open_ || writing_) return;
    Message next;
    if (!control_.empty()) {
      next = control_.front();
      control_.pop_front();
    } else if (frame_) {
      next = std::move(frame_);
      frame_.reset();
    } else {
      return;
    }
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(*next), [self = shared_from_this(), next](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) {
        self->open_ = false;
        return;
      }
      self->flush();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  const Scenario& scenario_;
  CommandQueue& commands_;
  Message hello_;
  beast::flat_buffer buffer_;
  std::deque<Message> control_;
  Message frame_;
  bool writing_ = false;
  std::atomic<bool> open_{false};
};

class Hub {
 public:
  void add(const std::shared_ptr<Session>& s) {
    std::lock_guard<std::mutex> lock(mutex_);
    sessions_.push_back(s);
  }

  void broadcast(const Message& frame) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::erase_if(sessions_, [](const std::weak_ptr<Session>& w) { return w.expired(); });
    for (const auto& w : sessions_) {
      if (auto s = w.lock()) s->publish(frame);
    }
  }

  void close_all() {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& w : sessions_) {
      if (auto s = w.lock()) s->close();
    }
  }

 private:
  std::mutex mutex_;
  std::vector<std::weak_ptr<Session>> sessions_;
};

class Listener : public std::enable_shared_from_this<Listener> {
 public:
  Listener(net::io_context& ioc, tcp::endpoint endpoint, const Scenario& scenario, CommandQueue& commands,
           Hub& hub, Message hello)
      : ioc_(ioc), acceptor_(net::make_strand(ioc)), scenario_(scenario), commands_(commands), hub_(hub),
        hello_(std::move(hello)) {
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen(net::socket_base::max_listen_connections);
  }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), beast::bind_front_handler(&Listener::on_accept, shared_from_this()));
  }

  void stop() {
    net::post(acceptor_.get_executor(), [self = shared_from_this()] {
      beast::error_code ec;
      self->acceptor_.close(ec);
    });
  }

 private:
  void on_accept(beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    auto session = std::make_shared<Session>(std::move(socket), scenario_, commands_, hello_);
    hub_.add(session);
    session->start();
    accept();
  }

  net::io_context& ioc_;
  tcp::acceptor acceptor_;
  const Scenario& scenario_;
  CommandQueue& commands_;
  Hub& hub_;
  Message hello_;
};

}  // namespace

std::pair<std::string, std::uint16_t> parse_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw ConfigurationError("address must be host:port, got '" + text + "'");
  const std::string host = text.substr(0, colon);
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) port = -1;
  } catch (const std::exception&) {
    port = -1;
  }
  if (host.empty() || port < 0 || port > 65535) throw ConfigurationError("invalid address '" + text + "'");
  return {host, static_cast<std::uint16_t>(port)};
}

RunSummary serve(const Scenario& scenario, const ServeOptions& options) {
  if (!(options.speed > 0.0)) throw ConfigurationError("speed must be positive");
  World world(scenario);
  CommandQueue commands;
  Hub hub;

  std::optional<std::ofstream> trace_out;
  std::optional<TraceWriter> trace;
  auto restart_trace = [&] {
    if (!options.trace) return;
    trace.reset();
    trace_out.emplace(*options.trace, std::ios::trunc);
    if (!*trace_out) throw ConfigurationError("cannot write trace " + options.trace->string());
    trace.emplace(*trace_out, world);
    trace->write_header();
  };
  restart_trace();
  std::optional<CommandRecorder> recorder;
  if (options.record) recorder.emplace(*options.record);

  net::io_context ioc;
  const tcp::endpoint endpoint(net::ip::make_address(options.host), options.port);
  auto listener = std::make_shared<Listener>(ioc, endpoint, scenario, commands, hub,
                                             std::make_shared<const std::string>(hello_json(world)));
  listener->accept();
  auto guard = net::make_work_guard(ioc);
  std::thread network([&ioc] { ioc.run(); });
  if (options.on_listen) options.on_listen(listener->port());

  SummaryAccumulator acc(world);
  const auto wall_start = std::chrono::steady_clock::now();
  bool paused = options.start_paused;
  std::size_t tick = 0;
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(scenario.dt / options.speed));
  auto deadline = std::chrono::steady_clock::now();

  auto publish = [&] { hub.broadcast(std::make_shared<const std::string>(frame_json(world, paused))); };

  try {
    for (;;) {
      if (options.stop && options.stop->load()) break;
      if (options.max_steps && tick >= *options.max_steps) break;
      if (options.exit_when_finished && world.finished()) break;

      bool changed = false;
      for (const Command& c : commands.drain()) {
        if (recorder) recorder->record(tick, c);
        if (apply_command(world, c, paused)) {
          restart_trace();
          acc.restart(world);
        }
        changed = true;
      }

      if (!paused && !world.finished()) {
        const auto t0 = std::chrono::steady_clock::now();
        world.step();
        const auto t1 = std::chrono::steady_clock::now();
        ++tick;
        acc.observe(world, std::chrono::duration<double>(t1 - t0).count());
        if (trace) trace->write_row();
        publish();
      } else if (changed) {
        publish();
      }

      if (options.realtime || paused || world.finished()) {
        deadline += period;
        const auto now = std::chrono::steady_clock::now();
        if (deadline < now) deadline = now;
        std::this_thread::sleep_until(deadline);
      }
    }
  } catch (...) {
    if (recorder) recorder->finish(tick);
    hub.close_all();
    listener->stop();
    guard.reset();
    network.join();
    throw;
  }

  if (recorder) recorder->finish(tick);
  if (trace_out) trace_out->flush();
  hub.close_all();
  listener->stop();
  guard.reset();
  network.join();

  RunSummary summary = acc.summary(world);
  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return summary;
}

}  // namespace vhsim
