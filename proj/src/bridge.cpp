// WebSocket bridge between a live session and the browser console. Each
// connection runs on a single io_context thread: the session timeline is
// paced by a steady timer, reads and writes are chained asynchronously.

#include <chrono>
#include <cmath>
#include <deque>
#include <memory>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "telesim/live_session.hpp"

namespace telesim::harness {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

nlohmann::json record_json(const TrialRecord& r) {
  return {{"trial_id", r.trial_id},
          {"tier", r.tier},
          {"operator", "human"},
          {"completion_time_s", r.completion_time_s},
          {"success", r.success},
          {"psnr_db", number_or_null(r.psnr_db)},
          {"ssim", number_or_null(r.ssim)},
          {"measured_plr_pct", r.measured_plr_pct},
          {"mean_latency_ms", number_or_null(r.mean_latency_ms)}};
}

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, SessionConfig config)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), config_(std::move(config)) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

 private:
  struct Outgoing {
    bool binary;
    std::string data;
  };

  void on_accept(beast::error_code ec) {
    if (ec) return;
    origin_ = std::chrono::steady_clock::now();
    session_ = std::make_unique<LiveSession>(config_, netem::ClockMode::RealTime);
    send_text(handshake_message(config_).dump());
    read();
    schedule();
  }

  Micros wall_now() const {
    return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - origin_).count();
  }

  void read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      // Console gone: drop the trial.
      if (session_->state() == SessionState::Running) session_->abort();
      timer_.cancel();
      return;
    }
    const auto text = beast::buffers_to_string(in_.data());
    in_.consume(in_.size());
    try {
      session_->on_control(parse_control(text), std::max(session_->now(), wall_now()));
    } catch (const std::invalid_argument& e) {
      send_text(nlohmann::json{{"type", "error"}, {"message", e.what()}}.dump());
    }
    read();
  }

  void schedule() {
    const auto next = session_->next_event();
    if (!next) {
      finish();
      return;
    }
    timer_.expires_at(origin_ + std::chrono::microseconds(*next));
    timer_.async_wait([self = shared_from_this(), t = *next](beast::error_code ec) { self->on_timer(ec, t); });
  }

  void on_timer(beast::error_code ec, Micros t) {
    if (ec || session_->state() != SessionState::Running) return;
    auto out = session_->run_until(t);
    for (auto& f : out.frames) {
      if (queue_.size() > kMaxQueued) continue;  // console is not keeping up
      const auto bytes = encode_frame_message(f);
      queue_.push_back({true, std::string(bytes.begin(), bytes.end())});
    }
    for (auto& m : out.metrics) queue_.push_back({false, m.dump()});
    write();
    schedule();
  }

  void finish() {
    nlohmann::json end{{"type", "end"}};
    if (session_->record()) end["record"] = record_json(*session_->record());
    send_text(end.dump());
    closing_ = true;
    write();
  }

  void send_text(std::string s) {
    queue_.push_back({false, std::move(s)});
    write();
  }

  void write() {
    if (writing_) return;
    if (queue_.empty()) {
      if (closing_) {
        ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
        closing_ = false;
      }
      return;
    }
    writing_ = true;
    ws_.binary(queue_.front().binary);
    ws_.async_write(net::buffer(queue_.front().data), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      self->queue_.pop_front();
      if (ec) {
        self->queue_.clear();
        if (self->session_->state() == SessionState::Running) self->session_->abort();
        self->timer_.cancel();
        return;
      }
      self->write();
    });
  }

  static constexpr std::size_t kMaxQueued = 90;

  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  SessionConfig config_;
  std::unique_ptr<LiveSession> session_;
  std::chrono::steady_clock::time_point origin_;
  beast::flat_buffer in_;
  std::deque<Outgoing> queue_;
  bool writing_ = false;
  bool closing_ = false;
};

}  // namespace

void serve(const BridgeConfig& config, const std::function<void(std::uint16_t)>& on_listening) {
  net::io_context ioc;
  tcp::acceptor acceptor(ioc, {net::ip::make_address(config.address), config.port});
  if (on_listening) on_listening(acceptor.local_endpoint().port());

  // Continue numbering after human trials already on disk.
  std::size_t first_index = 0;
  if (config.session.out_dir && std::filesystem::exists(*config.session.out_dir / kHumanDatasetFile))
    first_index = read_dataset(*config.session.out_dir / kHumanDatasetFile).size();

  for (std::size_t n = 0; config.max_sessions == 0 || n < config.max_sessions; ++n) {
    tcp::socket socket(ioc);
    acceptor.accept(socket);
    SessionConfig sc = config.session;
    sc.trial_id = trial_id("human-" + sc.tier.name, static_cast<std::uint32_t>(first_index));
    std::make_shared<Connection>(std::move(socket), std::move(sc))->start();
    ioc.run();
    ioc.restart();
    if (config.session.out_dir && std::filesystem::exists(*config.session.out_dir / kHumanDatasetFile))
      first_index = read_dataset(*config.session.out_dir / kHumanDatasetFile).size();
  }
}

}  // namespace telesim::harness
