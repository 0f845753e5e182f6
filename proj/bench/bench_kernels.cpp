// Frame metric kernels: OpenMP versions against the serial reference.
#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "telesim/metrics.hpp"
#include "telesim/video.hpp"

using namespace telesim;
using namespace telesim::video;

namespace {

struct Pair {
  Frame a{640, 480}, b{640, 480};
  Pair() {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> px(0, 255), d(-12, 12);
    for (std::size_t i = 0; i < a.rgb.size(); ++i) {
      a.rgb[i] = static_cast<std::uint8_t>(px(rng));
      b.rgb[i] = static_cast<std::uint8_t>(std::clamp(a.rgb[i] + d(rng), 0, 255));
    }
  }
};

const Pair& pair() {
  static const Pair p;
  return p;
}

template <double (*Fn)(const Frame&, const Frame&)>
void bm_metric(benchmark::State& state) {
  const auto& p = pair();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(p.a, p.b));
  state.SetItemsProcessed(state.iterations());
}

void bm_encode(benchmark::State& state) {
  SceneState s;
  const auto f = render_scene(s, {}, 1);
  SliceCodecConfig cfg;
  cfg.quantizer = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(encode(f, cfg));
}

}  // namespace

BENCHMARK(bm_metric<psnr>)->Name("psnr/omp")->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_metric<serial::psnr>)->Name("psnr/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_metric<ssim>)->Name("ssim/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_metric<serial::ssim>)->Name("ssim/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_encode)->Arg(1)->Arg(8)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
