#include <doctest.h>

#include "oracles.hpp"
#include "telesim/metrics.hpp"

using namespace telesim::video;

namespace {

Frame constant(std::uint8_t v, int w = 640, int h = 480) { return Frame(w, h, Rgb{v, v, v}); }

}  // namespace

TEST_CASE("identical frames hit the cap") {
  std::mt19937_64 rng(2);
  const auto f = oracle::random_frame(rng);
  CHECK(psnr(f, f) == kPsnrCapDb);
  CHECK(ssim(f, f) == 1.0);
  CHECK(serial::ssim(f, f) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("+16 offset is 24.05 dB") {
  auto a = constant(100), b = constant(116);
  const double expected = 10.0 * std::log10(255.0 * 255.0 / 256.0);
  CHECK(psnr(a, b) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(psnr(a, b) - 24.05) < 0.005);
  CHECK(psnr(b, a) == psnr(a, b));
}

TEST_CASE("constant frames reduce ssim to the luminance term") {
  for (auto [u, v] : {std::pair{10, 200}, std::pair{100, 116}, std::pair{0, 255}, std::pair{128, 127}}) {
    const auto a = constant(static_cast<std::uint8_t>(u)), b = constant(static_cast<std::uint8_t>(v));
    // BT.601 weights sum to 1, so the luminance equals the grey level.
    const double expected = oracle::ssim_constant(u, v);
    CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(serial::ssim(a, b) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("metrics agree with the oracles on random pairs") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 6; ++i) {
    const auto a = oracle::random_frame(rng, 96, 64);
    const auto b = i % 2 ? oracle::random_frame(rng, 96, 64) : oracle::perturbed(a, rng, 20, 0.3);
    const double ps = oracle::psnr(a, b), ss = oracle::ssim(a, b);
    CHECK(std::abs(psnr(a, b) - ps) <= 1e-6);
    CHECK(std::abs(serial::psnr(a, b) - ps) <= 1e-6);
    CHECK(std::abs(ssim(a, b) - ss) <= 1e-4);
    CHECK(std::abs(serial::ssim(a, b) - ss) <= 1e-4);
  }
}

TEST_CASE("symmetry and bounds") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 4; ++i) {
    const auto a = oracle::random_frame(rng, 64, 48);
    const auto b = oracle::perturbed(a, rng, 60, 0.5);
    CHECK(psnr(a, b) == psnr(b, a));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(std::abs(ssim(a, b)) <= 1.0);
  }
}

TEST_CASE("parallel kernels equal the serial reference") {
  std::mt19937_64 rng(9);
  const auto a = oracle::random_frame(rng);
  const auto b = oracle::perturbed(a, rng, 40, 0.2);
  CHECK(psnr(a, b) == serial::psnr(a, b));
  CHECK(ssim(a, b) == doctest::Approx(serial::ssim(a, b)).epsilon(1e-10));
}

TEST_CASE("dimension mismatch throws") {
  CHECK_THROWS_AS(psnr(constant(1, 64, 48), constant(1, 64, 40)), std::invalid_argument);
  CHECK_THROWS_AS(ssim(constant(1, 64, 48), constant(1, 48, 48)), std::invalid_argument);
  CHECK_THROWS_AS(serial::ssim(constant(1, 64, 48), constant(1, 48, 48)), std::invalid_argument);
}

TEST_CASE("psnr from sse") {
  CHECK(psnr_from_sse(0, 100) == kPsnrCapDb);
  CHECK(psnr_from_sse(256 * 300, 300) == doctest::Approx(10.0 * std::log10(65025.0 / 256.0)));
  CHECK(squared_error(constant(0, 8, 8), constant(2, 8, 8)) == 4 * 8 * 8 * 3);
}
