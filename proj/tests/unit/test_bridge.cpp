#include <doctest.h>

#include <chrono>
#include <fstream>
#include <future>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "telesim/live_session.hpp"
#include "telesim/png_io.hpp"

using namespace telesim;
using namespace telesim::harness;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(d);
  return d;
}

Control move(double vx, double vy) { return parse_control(nlohmann::json{{"type", "move"}, {"vx", vx}, {"vy", vy}}.dump()); }
Control grip(const char* action) { return parse_control(nlohmann::json{{"type", "grip"}, {"action", action}}.dump()); }

struct Driven {
  std::size_t frames = 0;
  std::size_t metrics = 0;
};

// Scripted human: 20 cm right onto the block, grab, diagonal to the
// receptacle centre, release. Controls are sent at the given instants.
Driven drive_to_completion(LiveSession& s) {
  const Micros ms = kMicrosPerMs;
  const std::vector<std::pair<Micros, Control>> script{
      {0, move(8, 0)},          {2520 * ms, move(0, 0)},   {2600 * ms, grip("close")},
      {2620 * ms, move(4, -4)}, {6620 * ms, move(0, 0)},   {6700 * ms, grip("toggle")}};
  Driven d;
  for (const auto& [t, c] : script) {
    auto out = s.run_until(t);
    d.frames += out.frames.size();
    d.metrics += out.metrics.size();
    s.on_control(c, t);
  }
  auto out = s.run_until(20 * kMicrosPerSecond);
  d.frames += out.frames.size();
  d.metrics += out.metrics.size();
  return d;
}

}  // namespace

TEST_CASE("handshake carries tier, geometry and fps") {
  SessionConfig c;
  c.tier = TierSpec::preset(netem::TierName::Medium);
  const auto h = handshake_message(c);
  CHECK(h["type"] == "hello");
  CHECK(h["tier"] == "medium");
  CHECK(h["fps"] == 30);
  CHECK(h["link"]["latency_ms"] == 400.0);
  CHECK(h["geometry"]["block"]["w"] == 3.7);
  CHECK(h["geometry"]["receptacle"]["h"] == 5.0);
  CHECK(h["frame"]["width"] == 640);
}

TEST_CASE("frame message layout") {
  FrameMessage m{0x01020304u, 0x1122334455667788ull, {9, 8, 7}};
  const auto b = encode_frame_message(m);
  REQUIRE(b.size() == 15);
  CHECK(b[0] == 0x04);
  CHECK(b[4] == 0x88);
  CHECK(b[11] == 0x11);
  const auto back = decode_frame_message(b);
  CHECK(back.frame_id == m.frame_id);
  CHECK(back.display_time == m.display_time);
  CHECK(back.png == m.png);
  CHECK_THROWS_AS(decode_frame_message(std::span<const std::uint8_t>(b).first(5)), std::invalid_argument);
}

TEST_CASE("control parsing") {
  const auto m = move(1.5, -2);
  CHECK(m.kind == Control::Kind::Move);
  CHECK(m.velocity == task::Vec2{1.5, -2});
  CHECK(grip("open").grip == Control::Grip::Open);
  CHECK(grip("close").grip == Control::Grip::Close);
  CHECK(grip("toggle").grip == Control::Grip::Toggle);
  CHECK_THROWS_AS(parse_control("not json"), std::invalid_argument);
  CHECK_THROWS_AS(parse_control(R"({"type":"move","vx":1})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_control(R"({"type":"grip","action":"squeeze"})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_control(R"({"type":"jump"})"), std::invalid_argument);
}

TEST_CASE("human session completes and writes a tagged record") {
  SessionConfig c;
  c.trial_id = "human-high-0000";
  c.out_dir = fresh_dir("telesim_live_ok");
  LiveSession s(c, netem::ClockMode::DiscreteEvent);
  const auto d = drive_to_completion(s);
  REQUIRE(s.state() == SessionState::Completed);
  REQUIRE(s.record());
  const auto& r = *s.record();
  CHECK(r.success);
  CHECK(r.completion_time_s == doctest::Approx(6.75));
  CHECK(r.bandwidth_mbps == 1000);
  CHECK(d.frames >= 190);
  CHECK(d.metrics >= 6);

  REQUIRE(s.record_path());
  const auto rows = read_dataset(*s.record_path());
  REQUIRE(rows.size() == 1);
  CHECK(to_csv_row(rows[0]) == to_csv_row(r));
  std::ifstream tags(*c.out_dir / kHumanTagFile);
  std::string line;
  REQUIRE(std::getline(tags, line));
  CHECK(nlohmann::json::parse(line)["operator"] == "human");
  CHECK_FALSE(std::filesystem::exists(*c.out_dir / kDatasetFile));
}

TEST_CASE("aborted session writes nothing") {
  SessionConfig c;
  c.out_dir = fresh_dir("telesim_live_abort");
  LiveSession s(c, netem::ClockMode::DiscreteEvent);
  s.run_until(kMicrosPerSecond);
  s.on_control(move(8, 0), s.now());
  s.abort();
  CHECK(s.state() == SessionState::Aborted);
  CHECK_FALSE(s.next_event());
  CHECK(s.run_until(5 * kMicrosPerSecond).frames.empty());
  CHECK_FALSE(std::filesystem::exists(*c.out_dir));
}

namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;

struct Server {
  std::thread thread;
  std::uint16_t port = 0;

  explicit Server(BridgeConfig cfg) {
    std::promise<std::uint16_t> bound;
    auto f = bound.get_future();
    thread = std::thread([cfg, &bound] { serve(cfg, [&](std::uint16_t p) { bound.set_value(p); }); });
    port = f.get();
  }
  ~Server() {
    if (thread.joinable()) thread.join();
  }
};

}  // namespace

TEST_CASE("bridge streams frames, metrics and aborts on disconnect") {
  BridgeConfig cfg;
  cfg.port = 0;
  cfg.max_sessions = 1;
  cfg.session.out_dir = fresh_dir("telesim_bridge");
  Server server(cfg);

  net::io_context ioc;
  websocket::stream<beast::tcp_stream> ws(ioc);
  beast::get_lowest_layer(ws).connect({net::ip::make_address("127.0.0.1"), server.port});
  ws.handshake("127.0.0.1", "/");

  beast::flat_buffer buf;
  ws.read(buf);
  CHECK_FALSE(ws.got_binary());
  const auto hello = nlohmann::json::parse(beast::buffers_to_string(buf.data()));
  buf.consume(buf.size());
  CHECK(hello["type"] == "hello");
  CHECK(hello["tier"] == "high");

  ws.write(net::buffer(std::string(R"({"type":"move","vx":2,"vy":0})")));
  ws.write(net::buffer(std::string(R"({"type":"bogus"})")));

  std::size_t frames = 0, metrics = 0, errors = 0;
  std::optional<std::chrono::steady_clock::time_point> first;
  std::uint64_t last_display = 0;
  const auto window = std::chrono::seconds(3);
  for (;;) {
    ws.read(buf);
    const auto now = std::chrono::steady_clock::now();
    if (ws.got_binary()) {
      const auto bytes = static_cast<const std::uint8_t*>(buf.data().data());
      const auto m = decode_frame_message({bytes, buf.size()});
      if (frames == 0) {
        CHECK(video::decode_png(m.png).width == 640);
        first = now;
      }
      CHECK(m.display_time >= last_display);
      last_display = m.display_time;
      ++frames;
    } else {
      const auto j = nlohmann::json::parse(beast::buffers_to_string(buf.data()));
      if (j["type"] == "metrics") {
        ++metrics;
        CHECK(j.contains("plr_pct"));
        CHECK(j.contains("latency_ms"));
        CHECK(j.contains("ssim"));
      }
      if (j["type"] == "error") ++errors;
    }
    buf.consume(buf.size());
    if (first && now - *first >= window) break;
  }
  const double fps = static_cast<double>(frames - 1) / std::chrono::duration<double>(window).count();
  MESSAGE("live frame rate " << fps << " fps");
  CHECK(fps >= 25.0);
  CHECK(metrics >= 2);
  CHECK(errors == 1);

  // Drop the connection mid-trial.
  beast::get_lowest_layer(ws).socket().close();
  server.thread.join();
  CHECK_FALSE(std::filesystem::exists(*cfg.session.out_dir / kHumanDatasetFile));
}
