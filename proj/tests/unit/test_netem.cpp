#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "oracles.hpp"
#include "telesim/netem.hpp"

using namespace telesim;
using namespace telesim::netem;

TEST_CASE("tier presets are the table values") {
  CHECK(tier_preset(TierName::High) == LinkConfig{1000, 100, 25, 0.1});
  CHECK(tier_preset(TierName::Medium) == LinkConfig{100, 400, 50, 1.0});
  CHECK(tier_preset(TierName::Low) == LinkConfig{10, 1000, 200, 3.0});
  CHECK_THROWS_AS(tier_preset(TierName::Custom), std::invalid_argument);
  CHECK(parse_tier("LOW") == TierName::Low);
  CHECK_THROWS(parse_tier("ultra"));
}

TEST_CASE("link config validation and json") {
  CHECK_THROWS(LinkConfig{0, 1, 1, 1}.validate());
  CHECK_THROWS(LinkConfig{10, -1, 1, 1}.validate());
  CHECK_THROWS(LinkConfig{10, 1, 1, 101}.validate());
  const auto low = tier_preset(TierName::Low);
  CHECK(link_config_from_json(to_json(low)) == low);
  CHECK_THROWS(link_config_from_json(nlohmann::json{{"bandwidth_mbps", 0}, {"latency_ms", 1}, {"jitter_ms", 0},
                                                    {"loss_pct", 0}}));

  const auto path = std::filesystem::temp_directory_path() / "telesim_link.json";
  std::ofstream(path) << R"({"bandwidth_mbps": 50, "latency_ms": 20, "jitter_ms": 5, "loss_pct": 0.5})";
  CHECK(load_link_config(path) == LinkConfig{50, 20, 5, 0.5});
  std::filesystem::remove(path);
}

TEST_CASE("serialization delay") {
  CHECK(serialization_delay(1250, 10) == 1000);
  CHECK(serialization_delay(1250, 1000) == 10);
  CHECK(serialization_delay(1200, 100) == 96);
  CHECK(serialization_delay(1, 16) == 1);  // 0.5 us rounds up
  CHECK_THROWS(serialization_delay(100, 0));
}

TEST_CASE("added delay law") {
  Rng rng(7);
  const LinkConfig flat{100, 100, 0, 0};
  for (int i = 0; i < 100; ++i) CHECK(sample_added_delay(flat, rng) == 100000);

  const auto low = tier_preset(TierName::Low);
  double sum = 0;
  Micros lo = 1 << 30, hi = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto d = sample_added_delay(low, rng);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    sum += static_cast<double>(d);
  }
  CHECK(lo >= 1000000);
  CHECK(hi <= 1200000);
  CHECK(sum / n / 1000.0 == doctest::Approx(1100.0).epsilon(0).scale(1).epsilon(5.0 / 1100.0));
}

namespace {

std::vector<PacketEvent> send_stream(const LinkConfig& cfg, std::uint64_t seed, int count, Micros gap,
                                     std::size_t size = 1200) {
  Link link(cfg, seed);
  EmulatorClock clock;
  std::vector<PacketEvent> out;
  for (int i = 0; i < count; ++i) {
    clock.advance_to(i * gap);
    PacketEvent p;
    p.packet_id = static_cast<std::uint64_t>(i);
    p.size = size;
    p.enqueue_time = i * gap;
    out.push_back(link.transmit(p, clock));
  }
  return out;
}

}  // namespace

TEST_CASE("loss extremes and binomial interval") {
  auto none = send_stream({100, 1, 0, 0}, 1, 1000, 100);
  CHECK(std::none_of(none.begin(), none.end(), [](auto& p) { return p.dropped(); }));
  auto all = send_stream({100, 1, 0, 100}, 1, 1000, 100);
  CHECK(std::all_of(all.begin(), all.end(), [](auto& p) { return p.dropped(); }));

  const auto ci = oracle::binomial_ci_pct(0.03, 1e5);
  auto packets = send_stream({10, 1000, 200, 3.0}, 99, 100000, 1000);
  const auto drops = std::count_if(packets.begin(), packets.end(), [](auto& p) { return p.dropped(); });
  const double pct = 100.0 * static_cast<double>(drops) / 1e5;
  CHECK(pct >= 2.83);
  CHECK(pct <= 3.17);
  CHECK(pct >= ci.first);
  CHECK(pct <= ci.second);
}

TEST_CASE("transmit invariants") {
  const LinkConfig cfg{10, 50, 20, 2};
  // Back-to-back enqueues build a serialization backlog.
  auto packets = send_stream(cfg, 5, 2000, 500);
  const Micros ser = serialization_delay(1200, 10);
  std::optional<Micros> prev_departure;
  for (const auto& p : packets) {
    CHECK(p.departure_time >= p.enqueue_time);
    if (p.dropped()) continue;
    if (prev_departure) CHECK(p.departure_time >= *prev_departure + ser);
    prev_departure = p.departure_time;
    const Micros total = *p.delivery_time - p.enqueue_time;
    CHECK(total >= ser + 50000);
    CHECK(*p.delivery_time - p.departure_time <= ser + 50000 + 20000);
  }
}

TEST_CASE("same seed gives the same packet events") {
  const auto a = send_stream(tier_preset(TierName::Medium), 1234, 5000, 200);
  const auto b = send_stream(tier_preset(TierName::Medium), 1234, 5000, 200);
  const auto c = send_stream(tier_preset(TierName::Medium), 1235, 5000, 200);
  REQUIRE(a.size() == b.size());
  bool same = true, differ = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same &= a[i].departure_time == b[i].departure_time && a[i].delivery_time == b[i].delivery_time;
    differ |= a[i].delivery_time != c[i].delivery_time;
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("transmit rejects future and decreasing enqueue times") {
  Link link({10, 1, 0, 0}, 1);
  EmulatorClock clock;
  PacketEvent p;
  p.size = 100;
  p.enqueue_time = 10;
  CHECK_THROWS_AS(link.transmit(p, clock), std::logic_error);
  clock.advance_to(20);
  link.transmit(p, clock);
  p.enqueue_time = 5;
  CHECK_THROWS_AS(link.transmit(p, clock), std::logic_error);
}

TEST_CASE("event queue ordering and idle") {
  EmulatorClock clock;
  EventQueue<int> q;
  CHECK(std::holds_alternative<Idle>(advance(clock, q)));
  q.push(5, 0, 5);
  q.push(3, 1, 3);
  q.push(7, 2, 7);
  std::vector<int> order;
  while (true) {
    auto r = advance(clock, q);
    if (std::holds_alternative<Idle>(r)) break;
    for (auto& e : std::get<1>(r)) order.push_back(e.payload);
  }
  CHECK(order == std::vector<int>{3, 5, 7});
  CHECK(clock.now() == 7);
}

TEST_CASE("ties release in packet id order for every insertion order") {
  std::vector<std::uint64_t> ids{0, 1, 2, 3};
  do {
    EmulatorClock clock;
    EventQueue<std::uint64_t> q;
    for (auto id : ids) q.push(100, id, id);
    auto r = advance(clock, q);
    auto& batch = std::get<1>(r);
    REQUIRE(batch.size() == 4);
    for (std::uint64_t i = 0; i < 4; ++i) CHECK(batch[i].id == i);
  } while (std::next_permutation(ids.begin(), ids.end()));
}

TEST_CASE("clock never runs backwards") {
  EmulatorClock clock;
  clock.advance_to(100);
  clock.advance_to(50);
  CHECK(clock.now() == 100);
}
