#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "iscsc/scene.hpp"

#include <cmath>
#include <set>

using namespace iscsc;

TEST_CASE("steering vector has unit-modulus elements and the right phases") {
  const int n = 8;
  for (double deg : {-60.0, -35.0, 0.0, 5.0, 25.0, 89.0}) {
    const VecC a = steering(deg2rad(deg), n);
    REQUIRE(a.size() == n);
    for (int m = 0; m < n; ++m) {
      CHECK(std::abs(std::abs(a[m]) - 1.0) < 1e-14);
      const cd expect = std::polar(1.0, kPi * m * std::sin(deg2rad(deg)));
      CHECK(std::abs(a[m] - expect) < 1e-14);
    }
  }
  // Broadside: all elements in phase.
  const VecC a0 = steering(0.0, n);
  for (int m = 0; m < n; ++m) CHECK(std::abs(a0[m] - cd(1.0, 0.0)) < 1e-15);
  // theta = 30 deg puts successive elements a quarter turn apart.
  const VecC a30 = steering(deg2rad(30.0), 4);
  CHECK(std::abs(a30[1] - cd(0.0, 1.0)) < 1e-12);
  CHECK(std::abs(a30[2] - cd(-1.0, 0.0)) < 1e-12);
  CHECK(std::abs(a30[3] - cd(0.0, -1.0)) < 1e-12);
}

TEST_CASE("steering derivative matches the closed form and finite differences") {
  const VecC d2 = steering_derivative(0.0, 2);
  CHECK(std::abs(d2[0]) < 1e-15);
  CHECK(std::abs(d2[1] - cd(0.0, kPi)) < 1e-14);

  const int n = 8;
  const double h = 1e-6;
  for (double deg : {-50.0, -10.0, 0.0, 12.0, 40.0}) {
    const double th = deg2rad(deg);
    const VecC num = (steering(th + h, n) - steering(th - h, n)) / (2.0 * h);
    const VecC ana = steering_derivative(th, n);
    CHECK((num - ana).norm() < 1e-6);
  }
}

TEST_CASE("rng streams are deterministic and independent") {
  RngStream a(42, "channels"), b(42, "channels"), c(42, "noise"), d(7, "channels");
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());  // different stream labels diverge
    CHECK(x != d.next_u64());  // different seeds diverge
  }
}

TEST_CASE("rng moments look sane") {
  RngStream r(123, "moments");
  const int n = 200000;
  double su = 0, su2 = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    su2 += u * u;
    const double g = r.normal();
    sn += g;
    sn2 += g * g;
  }
  CHECK(std::abs(su / n - 0.5) < 0.005);
  CHECK(std::abs(su2 / n - 1.0 / 3.0) < 0.005);
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(std::abs(sn2 / n - 1.0) < 0.02);
  // complex normal: unit total variance split across Re/Im
  double c2 = 0;
  for (int i = 0; i < n; ++i) c2 += std::norm(r.cnormal());
  CHECK(std::abs(c2 / n - 1.0) < 0.02);
}

TEST_CASE("path loss follows the configured power law") {
  SceneConfig sc = example_scene();
  CHECK(pathloss_alpha(sc, 2.0) == doctest::Approx(0.5));
  CHECK(pathloss_beta(sc, 2.0) == doctest::Approx(0.5));
  CHECK(pathloss_alpha(sc, 8.0) == doctest::Approx(0.125));
  sc.pathloss_exponent = 2.0;
  CHECK(pathloss_alpha(sc, 2.0) == doctest::Approx(0.25));
  sc.reference_gain = 2.0;
  CHECK(pathloss_alpha(sc, 2.0) == doctest::Approx(0.5));
  CHECK(pathloss_beta(sc, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("channel synthesis is reproducible and hits the power budget") {
  const SceneConfig sc = example_scene();
  RngStream r1(sc.seed, "channels"), r2(sc.seed, "channels");
  const SceneChannels c1 = make_channels(sc, r1);
  const SceneChannels c2 = make_channels(sc, r2);
  REQUIRE(c1.devices.size() == 2);
  REQUIRE(c1.patients.size() == 3);
  for (std::size_t k = 0; k < c1.devices.size(); ++k)
    CHECK(c1.devices[k].h == c2.devices[k].h);  // bitwise identical

  // E||h||^2 = alpha^2 N for devices (Rician normalization).
  RngStream r(99, "channel-stats");
  const int trials = 20000;
  double acc = 0;
  for (int t = 0; t < trials; ++t) {
    const SceneChannels ch = make_channels(sc, r);
    acc += ch.devices[0].h.squaredNorm();
  }
  const double alpha = pathloss_alpha(sc, sc.devices[0].distance);
  const double expect = alpha * alpha * sc.n_antennas;
  CHECK(std::abs(acc / trials - expect) / expect < 0.05);
}

TEST_CASE("patient channels decompose into LoS plus recorded NLoS") {
  const SceneConfig sc = example_scene();
  RngStream r(5, "channels");
  const SceneChannels ch = make_channels(sc, r);
  for (std::size_t l = 0; l < ch.patients.size(); ++l) {
    const auto& p = ch.patients[l];
    const VecC los = p.alpha * steering(sc.patients[l].angle, sc.n_antennas);
    CHECK(std::abs((p.h - los).norm() - p.nlos_norm) < 1e-12);
    CHECK(p.alpha == doctest::Approx(1.0 / sc.patients[l].distance));
  }
}

TEST_CASE("uncertainty samples stay inside the ball with ball-uniform radius") {
  RngStream r(11, "uncertainty");
  const double eps = 0.01;
  const int n = 8, trials = 20000;
  double r2 = 0;
  for (int t = 0; t < trials; ++t) {
    const VecC d = sample_uncertainty(eps, n, r);
    REQUIRE(d.norm() <= eps * (1 + 1e-12));
    r2 += d.squaredNorm();
  }
  // Uniform on a 2n-dimensional ball: E[r^2] = eps^2 * 2n / (2n + 2).
  const double expect = eps * eps * (2.0 * n) / (2.0 * n + 2.0);
  CHECK(std::abs(r2 / trials - expect) / expect < 0.05);
}

TEST_CASE("scene json round trip preserves the configuration") {
  SceneConfig sc = example_scene();
  sc.semantic.rho_lb = {0.1, 0.2};
  const std::string text = scene_to_json_text(sc);
  const SceneConfig back = scene_from_json_text(text);
  CHECK(back.n_antennas == sc.n_antennas);
  CHECK(back.wavelength == doctest::Approx(sc.wavelength));
  CHECK(back.power_budget == doctest::Approx(sc.power_budget));
  REQUIRE(back.devices.size() == sc.devices.size());
  REQUIRE(back.patients.size() == sc.patients.size());
  for (std::size_t k = 0; k < sc.devices.size(); ++k) {
    CHECK(back.devices[k].angle == doctest::Approx(sc.devices[k].angle));
    CHECK(back.devices[k].distance == doctest::Approx(sc.devices[k].distance));
  }
  for (std::size_t l = 0; l < sc.patients.size(); ++l) {
    CHECK(back.patients[l].angle == doctest::Approx(sc.patients[l].angle));
    CHECK(back.patients[l].resp_hz == doctest::Approx(sc.patients[l].resp_hz));
  }
  CHECK(back.semantic.rho_lb == sc.semantic.rho_lb);
  CHECK(validate_scene(back).empty());
}

TEST_CASE("scene json boundary uses degrees") {
  const std::string text = R"({
    "n_antennas": 4,
    "devices": [{"angle_deg": -30.0, "distance_m": 8.0}],
    "patients": [{"angle_deg": 45.0, "distance_m": 2.0}]
  })";
  const SceneConfig sc = scene_from_json_text(text);
  CHECK(sc.devices[0].angle == doctest::Approx(-kPi / 6.0));
  CHECK(sc.patients[0].angle == doctest::Approx(kPi / 4.0));
  CHECK(sc.epsilon.size() == 2);  // defaulted, one per receiver
}

TEST_CASE("scene json rejects unknown keys by name") {
  CHECK_THROWS_WITH_AS(scene_from_json_text(R"({"n_antenas": 8})"),
                       doctest::Contains("n_antenas"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      scene_from_json_text(R"({"noise": {"com_dbm": -60}})"),
      doctest::Contains("noise.com_dbm"), std::invalid_argument);
  CHECK_THROWS_AS(scene_from_json_text(
                      R"({"carrier_frequency_hz": 77e9, "wavelength_m": 0.004})"),
                  std::invalid_argument);
}

TEST_CASE("scene validation reports all problems") {
  SceneConfig sc = example_scene();
  sc.devices[0].angle = deg2rad(95.0);
  sc.patients[0].distance = -1.0;
  sc.patients[1].resp_hz = 2.0;  // above the heart frequency
  const auto bad = validate_scene(sc);
  CHECK(bad.size() >= 3);
  CHECK_THROWS_AS(ensure_valid(sc), std::invalid_argument);
  CHECK(validate_scene(example_scene()).empty());
}
