#include <doctest.h>

#include "oracles.hpp"
#include "telesim/harness.hpp"
#include "telesim/png_io.hpp"
#include "telesim/quality.hpp"
#include "telesim/video.hpp"

using namespace telesim;
using namespace telesim::video;

namespace {

SceneState scene_at(double block_x) {
  SceneState s;
  s.block_x = block_x;
  s.block_y = 30;
  s.receptacle_x = 50;
  s.receptacle_y = 14;
  s.gripper_x = 14;
  s.gripper_y = 30;
  return s;
}

RenderConfig clean() {
  RenderConfig c;
  c.row_noise_amplitude = 0;
  return c;
}

SliceArrivals arrivals(const EncodedFrame& e, std::span<const SlicePayload> slices) {
  return {e.frame_id, e.capture_time, e.capture_time, e.slice_count, slices};
}

}  // namespace

TEST_CASE("frame capture grid") {
  CHECK(frame_capture_time(0) == 0);
  CHECK(frame_capture_time(1) == 33333);
  CHECK(frame_capture_time(30) == 1000000);
}

TEST_CASE("render is deterministic in state and frame id") {
  const auto s = scene_at(34);
  CHECK(render_scene(s, {}, 5).same_pixels(render_scene(s, {}, 5)));
  CHECK_FALSE(render_scene(s, {}, 5).same_pixels(render_scene(s, {}, 6)));
  CHECK(render_scene(s, clean(), 5).same_pixels(render_scene(s, clean(), 6)));
}

TEST_CASE("block moved 1 cm shifts 10 px") {
  const auto a = oracle::centroid(render_scene(scene_at(30), clean()), palette::kBlock);
  const auto b = oracle::centroid(render_scene(scene_at(31), clean()), palette::kBlock);
  CHECK(b.first - a.first == doctest::Approx(10.0));
  CHECK(b.second == doctest::Approx(a.second));
}

TEST_CASE("block centroid is monotone along a sweep") {
  double prev = -1;
  for (double x = 4; x <= 40; x += 0.37) {
    const auto c = oracle::centroid(render_scene(scene_at(x), clean()), palette::kBlock);
    CHECK(c.first >= prev);
    prev = c.first;
  }
}

TEST_CASE("row noise keeps rows flat and bounded") {
  RenderConfig noisy;
  const auto f = render_scene(SceneState{}, noisy, 3);
  const auto ref = render_scene(SceneState{}, clean(), 3);
  for (int y = 0; y < f.height; y += 37) {
    const int d0 = f.row(y)[0] - ref.row(y)[0];
    CHECK(std::abs(d0) <= noisy.row_noise_amplitude);
    // Far from the scene objects the row is one colour.
    CHECK(f.pixel(639, y) == f.pixel(630, y));
  }
}

TEST_CASE("quantizer error is below q for every channel value") {
  for (int q = 1; q <= 32; ++q) {
    for (int v = 0; v < 256; ++v) {
      const int r = quantize_value(static_cast<std::uint8_t>(v), q);
      CHECK_MESSAGE(std::abs(r - v) < q, "q=" << q << " v=" << v);
      if (q == 1) CHECK(r == v);
    }
  }
}

TEST_CASE("codec round trip") {
  std::mt19937_64 rng(1);
  const auto scene = render_scene(scene_at(20), {}, 1);
  const auto noise = oracle::random_frame(rng);
  for (const auto* f : {&scene, &noise}) {
    for (int q : {1, 4, 13}) {
      SliceCodecConfig cfg;
      cfg.quantizer = q;
      if (f == &noise) cfg.slice_height = 4;
      const auto e = encode(*f, cfg);
      CHECK(e.slice_count == 480 / cfg.slice_height);
      CHECK(e.slices.size() == e.slice_count);
      const auto d = decode(arrivals(e, e.slices), DecodedFrame::gray());
      CHECK(d.corruption_ratio == 0.0);
      CHECK_FALSE(d.frozen);
      for (std::size_t i = 0; i < f->rgb.size(); ++i) {
        if (d.image.rgb[i] != quantize_value(f->rgb[i], q)) {
          FAIL("pixel " << i << " differs");
          break;
        }
      }
    }
  }
  SliceCodecConfig def;
  CHECK(encode(scene, def).slices.size() == 30);
}

TEST_CASE("codec config validation") {
  SliceCodecConfig c;
  c.slice_height = 7;
  CHECK_THROWS(c.validate());
  c.slice_height = 16;
  c.quantizer = 0;
  CHECK_THROWS(c.validate());
  c.quantizer = 33;
  CHECK_THROWS(c.validate());
}

TEST_CASE("malformed slices are rejected") {
  const auto e = encode(render_scene(scene_at(20), {}, 1), {});
  Frame target(640, 480);
  const auto before = target;
  auto bytes = *e.slices[0].bytes;
  bytes.resize(bytes.size() / 2);
  CHECK_FALSE(decode_slice(bytes, target));
  CHECK(target.same_pixels(before));
  CHECK(decode_slice(*e.slices[0].bytes, target));
}

TEST_CASE("three missing slices conceal exactly their rows") {
  const auto prev_frame = render_scene(scene_at(10), {}, 0);
  const auto cur_frame = render_scene(scene_at(20), {}, 1);
  const auto pe = encode(prev_frame, {});
  const auto previous = decode(arrivals(pe, pe.slices), DecodedFrame::gray());

  const auto e = encode(cur_frame, {});
  std::vector<SlicePayload> some;
  for (const auto& s : e.slices)
    if (s.slice_id != 2 && s.slice_id != 17 && s.slice_id != 29) some.push_back(s);
  const auto d = decode(arrivals(e, some), previous);
  CHECK(d.corruption_ratio == doctest::Approx(0.1));
  CHECK_FALSE(d.frozen);

  int concealed_rows = 0;
  for (int y = 0; y < 480; ++y) {
    const int slice = y / 16;
    const bool missing = slice == 2 || slice == 17 || slice == 29;
    const auto got = d.image.row(y);
    const bool eq_prev = std::equal(got.begin(), got.end(), previous.image.row(y).begin());
    const bool eq_cur = std::equal(got.begin(), got.end(), cur_frame.row(y).begin());
    if (missing) {
      CHECK(eq_prev);
      ++concealed_rows;
    } else {
      CHECK(eq_cur);
    }
  }
  CHECK(concealed_rows == 48);
  CHECK(std::count(d.concealed.begin(), d.concealed.end(), true) == 3);
}

TEST_CASE("no slices freezes the previous frame") {
  const auto f = render_scene(scene_at(10), {}, 0);
  const auto e = encode(f, {});
  auto previous = decode(arrivals(e, e.slices), DecodedFrame::gray());
  const auto e2 = encode(render_scene(scene_at(12), {}, 1), {});
  const auto d = decode(arrivals(e2, {}), previous);
  CHECK(d.frozen);
  CHECK(d.corruption_ratio == 1.0);
  CHECK(d.image.rgb == previous.image.rgb);
  CHECK(d.content_frame_id == previous.content_frame_id);

  const auto g = DecodedFrame::gray();
  CHECK(g.image.pixel(0, 0) == g.image.pixel(639, 479));
  CHECK_FALSE(g.content_frame_id);
}

TEST_CASE("scoring pairs by slot") {
  std::vector<Frame> sent;
  std::vector<DecodedFrame> lossless, frozen;
  DecodedFrame prev = DecodedFrame::gray();
  for (std::uint32_t i = 0; i < 20; ++i) {
    auto s = scene_at(10);
    s.gripper_x = 5 + i;
    sent.push_back(render_scene(s, {}, i));
    const auto e = encode(sent.back(), {});
    prev = decode(arrivals(e, e.slices), prev);
    lossless.push_back(prev);
    frozen.push_back(i == 0 ? prev : frozen.back());
  }
  const auto a = score_trial(sent, lossless);
  CHECK(a.mean_psnr_db == 100.0);
  CHECK(a.mean_ssim == 1.0);
  const auto b = score_trial(sent, frozen);
  CHECK(b.mean_ssim < a.mean_ssim);
  CHECK(b.psnr_db.size() == 20);
  CHECK_THROWS(score_trial({}, {}));
  CHECK_THROWS(score_trial(sent, std::span<const DecodedFrame>(frozen).first(3)));

  QualityAccumulator acc;
  for (std::size_t i = 0; i < sent.size(); ++i) acc.add(sent[i], frozen[i].image);
  CHECK(acc.report().mean_ssim == doctest::Approx(b.mean_ssim).epsilon(1e-12));
  CHECK_THROWS_AS(QualityAccumulator{}.report(), std::logic_error);
}

TEST_CASE("rate control steps") {
  SliceCodecConfig c;
  CHECK(rate_control(c, 10, 50, false).quantizer == 1);
  CHECK(rate_control(c, 10, 9, true).quantizer == 2);
  c.quantizer = 8;
  CHECK(rate_control(c, 1000, 1, true).quantizer == 4);
  CHECK(rate_control(c, 10, 5, true).quantizer == 8);
  c.quantizer = 32;
  CHECK(rate_control(c, 10, 50, true).quantizer == 32);
}

TEST_CASE("abundant bandwidth settles at quantizer 1") {
  harness::CaptureConfig cc;
  cc.pipeline.link = netem::tier_preset(netem::TierName::High);
  cc.pipeline.rate_control = true;
  cc.pipeline.codec.quantizer = 16;
  cc.duration = 6 * kMicrosPerSecond;
  CHECK(harness::run_capture(cc).final_quantizer == 1);
}

TEST_CASE("rate controller converges under a 10 Mbps cap") {
  harness::CaptureConfig cc;
  cc.pipeline.link = netem::tier_preset(netem::TierName::Low);
  cc.pipeline.rate_control = true;
  cc.pipeline.codec.slice_height = 4;
  cc.render.row_noise_amplitude = 0;
  cc.render.noise_amplitude = 3;  // raw rate far above the cap at q = 1
  cc.duration = 12 * kMicrosPerSecond;
  const auto r = harness::run_capture(cc);
  REQUIRE(r.frame_bytes.size() == 360);
  std::size_t first_second = 0, last_second = 0;
  for (const auto& [id, b] : r.frame_bytes) {
    if (id < 30) first_second += b;
    if (id >= 330) last_second += b;
  }
  CHECK(first_second * 8.0 / 1e6 > 10.0);
  CHECK(last_second * 8.0 / 1e6 <= 8.0);
  CHECK(r.final_quantizer > 1);
}

TEST_CASE("png round trip") {
  const auto f = render_scene(scene_at(20), {}, 4);
  const auto png = encode_png(f);
  CHECK(png.size() > 8);
  CHECK(decode_png(png).same_pixels(f));
}
