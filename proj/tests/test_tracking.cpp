#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "iscsc/linalg.hpp"
#include "iscsc/tracking.hpp"

#include <cmath>

using namespace iscsc;

namespace {

MotionModel model_of(MotionKind kind, double dt = 0.1) {
  MotionModel m;
  m.kind = kind;
  m.dt = dt;
  return m;
}

VecD state_of(double theta, double d, double v, double beta) {
  return (VecD(4) << theta, d, v, beta).finished();
}

}  // namespace

TEST_CASE("kinematic maps match hand-computed updates") {
  const VecD q = state_of(0.0, 2.0, 1.0, 0.8);

  const VecD st = propagate(model_of(MotionKind::stationary), q);
  CHECK((st - q).norm() == 0.0);

  const VecD left = propagate(model_of(MotionKind::left), q);
  CHECK(left[0] == doctest::Approx(0.0));
  CHECK(left[1] == doctest::Approx(1.9));
  CHECK(left[2] == doctest::Approx(1.0));
  CHECK(left[3] == doctest::Approx(0.8 * 1.05));

  const VecD right = propagate(model_of(MotionKind::right), q);
  CHECK(right[1] == doctest::Approx(2.1));
  CHECK(right[3] == doctest::Approx(0.8 * 1.05));

  const VecD up = propagate(model_of(MotionKind::up), q);
  CHECK(up[0] == doctest::Approx(0.05));
  CHECK(up[1] == doctest::Approx(2.0));
  CHECK(up[3] == doctest::Approx(0.8).epsilon(1e-12));

  const VecD down = propagate(model_of(MotionKind::down), q);
  CHECK(down[0] == doctest::Approx(-0.05));
  CHECK(down[1] == doctest::Approx(2.0));

  // Distance floor clamps and reports.
  bool clamped = false;
  const VecD q2 = state_of(0.0, 0.15, 1.0, 0.8);
  const VecD near = propagate(model_of(MotionKind::left), q2, nullptr, &clamped);
  CHECK(near[1] == doctest::Approx(0.1));
  CHECK(clamped);
}

TEST_CASE("process noise draws are reproducible and zero-mean") {
  const VecD q = state_of(0.3, 3.0, 0.5, 1.0);
  const MotionModel m = model_of(MotionKind::stationary);
  RngStream a(5, "prop"), b(5, "prop");
  CHECK((propagate(m, q, &a) - propagate(m, q, &b)).norm() == 0.0);

  RngStream rng(6, "prop-stats");
  VecD mean = VecD::Zero(4);
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += propagate(m, q, &rng) - q;
  mean /= n;
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(mean[i]) < 4.0 * std::sqrt(m.q1[i] / n));
}

TEST_CASE("transition jacobians match central finite differences") {
  RngStream rng(7, "jac");
  for (MotionKind kind : {MotionKind::left, MotionKind::right, MotionKind::up,
                          MotionKind::down, MotionKind::stationary}) {
    const MotionModel m = model_of(kind);
    for (int trial = 0; trial < 5; ++trial) {
      const VecD q = state_of(rng.uniform(-1.2, 1.2), rng.uniform(1.0, 8.0),
                              rng.uniform(-1.0, 1.0), rng.uniform(0.2, 2.0));
      const MatD g = transition_jacobian(m, q);
      const double h = 1e-6;
      for (int j = 0; j < 4; ++j) {
        VecD qp = q, qm = q;
        qp[j] += h;
        qm[j] -= h;
        const VecD col = (propagate(m, qp) - propagate(m, qm)) / (2.0 * h);
        for (int i = 0; i < 4; ++i) {
          const double scale = std::max(1.0, std::abs(g(i, j)));
          CHECK(std::abs(col[i] - g(i, j)) / scale < 1e-5);
        }
      }
    }
  }
  CHECK((transition_jacobian(model_of(MotionKind::stationary),
                             state_of(0.1, 2.0, 1.0, 1.0)) -
         MatD::Identity(4, 4)).norm() == 0.0);
}

TEST_CASE("measurement model picks off angle, distance and speed") {
  const VecD q = state_of(0.2, 3.0, 0.4, 1.7);
  const VecD z = measure_state(q);
  CHECK(z.size() == 3);
  CHECK(z[0] == 0.2);
  CHECK(z[1] == 3.0);
  CHECK(z[2] == 0.4);
  MatD expect = MatD::Zero(3, 4);
  expect(0, 0) = expect(1, 1) = expect(2, 2) = 1.0;
  CHECK((measurement_jacobian() - expect).norm() == 0.0);
}

TEST_CASE("synthesized measurements have the configured noise statistics") {
  const VecD truth = state_of(0.5, 2.0, 0.1, 1.0);
  const VecD c = (VecD(3) << 1e-2, 33.0, 1e-2).finished();

  RngStream a(8, "meas"), b(8, "meas");
  const Measurement za = synthesize_measurement(truth, 100.0, c, a);
  const Measurement zb = synthesize_measurement(truth, 100.0, c, b);
  CHECK(za.theta == zb.theta);
  CHECK(za.d == zb.d);
  CHECK(za.v == zb.v);

  RngStream hi(8, "meas-hi");
  const Measurement ze = synthesize_measurement(truth, 1e18, c, hi);
  CHECK(std::abs(ze.theta - truth[0]) < 1e-7);
  CHECK(std::abs(ze.d - truth[1]) < 1e-6);

  RngStream rng(9, "meas-var");
  const double snr = 270.0;
  const int n = 100000;
  VecD ss = VecD::Zero(3);
  for (int i = 0; i < n; ++i) {
    const Measurement z = synthesize_measurement(truth, snr, c, rng);
    const VecD e = z.vec() - truth.head(3);
    ss += e.cwiseProduct(e);
  }
  for (int i = 0; i < 3; ++i)
    CHECK(ss[i] / n == doctest::Approx(c[i] / snr).epsilon(0.05));

  RngStream r2(10, "meas-bad");
  CHECK_THROWS_AS(synthesize_measurement(truth, 0.0, c, r2),
                  std::invalid_argument);
}

TEST_CASE("ekf limit cases: uninformative and exact measurements") {
  const VecD q = state_of(0.4, 3.0, 0.2, 1.1);
  const MatD cov = MatD::Identity(4, 4);

  MotionModel blind = model_of(MotionKind::stationary);
  blind.q2.setConstant(1e12);
  const Measurement z{1.0, 9.0, 5.0};
  const EkfResult r1 = ekf_step(blind, q, cov, z);
  CHECK((r1.state - r1.predicted).norm() < 1e-9);

  MotionModel sharp = model_of(MotionKind::stationary);
  sharp.q1.setZero();
  sharp.q2.setConstant(1e-15);
  const Measurement z2{0.41, 3.02, 0.19};
  const EkfResult r2 = ekf_step(sharp, q, cov, z2);
  CHECK(r2.state[0] == doctest::Approx(0.41).epsilon(1e-10));
  CHECK(r2.state[1] == doctest::Approx(3.02).epsilon(1e-10));
  CHECK(r2.state[2] == doctest::Approx(0.19).epsilon(1e-10));
  CHECK(r2.state[3] == doctest::Approx(1.1));  // unmeasured component kept
}

TEST_CASE("ekf on the linear stationary model equals a plain kalman filter") {
  MotionModel m = model_of(MotionKind::stationary);
  const MatD h = measurement_jacobian();
  const MatD q1 = m.q1.asDiagonal();
  const MatD r = m.q2.asDiagonal();

  RngStream rng(11, "kf");
  VecD x = state_of(0.1, 2.0, 0.0, 1.0);
  MatD p = MatD::Identity(4, 4);
  VecD xe = x;
  MatD pe = p;
  for (int t = 0; t < 20; ++t) {
    const Measurement z{0.1 + 0.05 * rng.normal(), 2.0 + 0.05 * rng.normal(),
                        0.02 * rng.normal()};
    // Hand-rolled linear filter.
    const MatD pp = p + q1;
    const MatD s = h * pp * h.transpose() + r;
    const MatD k = pp * h.transpose() * s.inverse();
    x = x + k * (z.vec() - h * x);
    p = (MatD::Identity(4, 4) - k * h) * pp;
    // Library EKF.
    const EkfResult er = ekf_step(m, xe, pe, z);
    xe = er.state;
    pe = er.cov;
    CHECK((x - xe).norm() < 1e-10);
    CHECK((p - pe).norm() < 1e-10);
  }
}

TEST_CASE("imm mixing reduces to identity and matches hand arithmetic") {
  const TrackingConfig cfg;
  const VecD q0 = state_of(0.2, 2.0, 0.1, 1.0);

  ImmState one = make_single_model(q0, MotionKind::stationary, cfg);
  const MixResult m1 = imm_interact(one);
  CHECK((m1.means[0] - q0).norm() == 0.0);
  CHECK((m1.covs[0] - one.covs[0]).norm() == 0.0);

  // Identity transition matrix leaves each model's own estimate untouched.
  ImmState s = make_imm(q0, cfg);
  s.pi = MatD::Identity(5, 5);
  for (int i = 0; i < 5; ++i) s.means[i][0] = 0.1 * i;
  s.probs = (VecD(5) << 0.1, 0.2, 0.3, 0.25, 0.15).finished();
  const MixResult mi = imm_interact(s);
  for (int i = 0; i < 5; ++i) CHECK((mi.means[i] - s.means[i]).norm() == 0.0);

  // Two-model hand case.
  ImmState two = make_single_model(q0, MotionKind::stationary, cfg);
  two.models.push_back(two.models[0]);
  two.means = {state_of(0.1, 2.0, 0.0, 1.0), state_of(0.3, 2.4, 0.1, 0.9)};
  two.covs = {0.5 * MatD::Identity(4, 4), 2.0 * MatD::Identity(4, 4)};
  two.probs = (VecD(2) << 0.3, 0.7).finished();
  two.pi = (MatD(2, 2) << 0.9, 0.1, 0.1, 0.9).finished();
  const MixResult mr = imm_interact(two);

  const double c0 = 0.9 * 0.3 + 0.1 * 0.7;  // incoming mass of model 0
  const double w00 = 0.9 * 0.3 / c0, w10 = 0.1 * 0.7 / c0;
  const VecD mean0 = w00 * two.means[0] + w10 * two.means[1];
  CHECK((mr.means[0] - mean0).norm() < 1e-12);
  MatD cov0 = MatD::Zero(4, 4);
  cov0 += w00 * (two.covs[0] +
                 (mean0 - two.means[0]) * (mean0 - two.means[0]).transpose());
  cov0 += w10 * (two.covs[1] +
                 (mean0 - two.means[1]) * (mean0 - two.means[1]).transpose());
  CHECK((mr.covs[0] - cov0).norm() < 1e-12);

  // Zero probability mass triggers the uniform fallback.
  two.probs = (VecD(2) << 0.0, 0.0).finished();
  CHECK(imm_interact(two).degenerate);
}

TEST_CASE("model probabilities follow the likelihoods") {
  const TrackingConfig cfg;
  const VecD q0 = state_of(0.0, 2.0, 0.1, 1.0);

  // Identity mixing and five literally identical models: probabilities
  // cannot move, uniform or not.
  ImmState s = make_imm(q0, cfg);
  for (int i = 0; i < 5; ++i) s.models[i].kind = MotionKind::stationary;
  s.pi = MatD::Identity(5, 5);
  s.probs = (VecD(5) << 0.1, 0.15, 0.2, 0.25, 0.3).finished();
  const Measurement z{0.01, 2.01, 0.09};
  imm_step(s, z);
  const VecD expect = (VecD(5) << 0.1, 0.15, 0.2, 0.25, 0.3).finished();
  CHECK((s.probs - expect).norm() < 1e-12);

  // A measurement that matches one model's prediction far better wins.
  TrackingConfig tight = cfg;
  tight.q1.setConstant(1e-8);
  tight.sigma2_e = 1e-3;
  ImmState s2 = make_imm(state_of(0.0, 2.0, 0.5, 1.0), tight);
  // Left model predicts d' = 1.95; feed that exact value many times.
  for (int t = 0; t < 6; ++t) {
    const VecD pred =
        propagate(s2.models[0], s2.means[0]);
    const Measurement hit{pred[0], pred[1], pred[2]};
    imm_step(s2, hit);
  }
  CHECK(s2.probs[0] > 0.999);
}

TEST_CASE("two-model fusion matches hand computation") {
  TrackingConfig cfg;
  const VecD q0 = state_of(0.1, 2.0, 0.0, 1.0);
  ImmState s = make_single_model(q0, MotionKind::stationary, cfg);
  s.models.push_back(s.models[0]);
  s.means = {q0, state_of(0.12, 2.1, 0.01, 1.0)};
  s.covs = {0.3 * MatD::Identity(4, 4), 0.6 * MatD::Identity(4, 4)};
  s.probs = (VecD(2) << 0.4, 0.6).finished();
  s.pi = (MatD(2, 2) << 0.8, 0.2, 0.3, 0.7).finished();

  const Measurement z{0.11, 2.05, 0.0};
  // Oracle: replicate the recursion with explicit scalar arithmetic.
  const MixResult mix = imm_interact(s);
  const VecD prior = s.pi.transpose() * s.probs;
  VecD lik(2);
  std::vector<EkfResult> er(2);
  for (int i = 0; i < 2; ++i) {
    er[i] = ekf_step(s.models[i], mix.means[i], mix.covs[i], z);
    const MatD si = er[i].innovation_cov;
    lik[i] = std::exp(-0.5 * er[i].innovation.dot(
                 si.inverse() * er[i].innovation)) /
             std::sqrt(std::pow(2.0 * kPi, 3) * si.determinant());
  }
  VecD p = lik.cwiseProduct(prior);
  p /= p.sum();
  const VecD fused = p[0] * er[0].state + p[1] * er[1].state;
  MatD fcov = MatD::Zero(4, 4);
  for (int i = 0; i < 2; ++i) {
    const VecD d = er[i].state - fused;
    fcov += p[i] * (er[i].cov + d * d.transpose());
  }

  const ImmStepLog log = imm_step(s, z);
  CHECK((log.probs - p).norm() < 1e-12);
  CHECK((log.fused - fused).norm() < 1e-12);
  CHECK((log.fused_cov - fcov).norm() < 1e-12);
}

TEST_CASE("single-model imm reproduces the plain ekf trajectory") {
  TrackingConfig cfg;
  const VecD q0 = state_of(-0.3, 2.5, 0.1, 0.9);
  ImmState imm = make_single_model(q0, MotionKind::left, cfg);

  MotionModel m = imm.models[0];
  VecD x = q0;
  MatD p = imm.covs[0];
  RngStream rng(12, "m1");
  for (int t = 0; t < 25; ++t) {
    const Measurement z{x[0] + 0.01 * rng.normal(), x[1] + 0.01 * rng.normal(),
                        x[2] + 0.01 * rng.normal()};
    const EkfResult er = ekf_step(m, x, p, z);
    x = er.state;
    p = er.cov;
    const ImmStepLog log = imm_step(imm, z);
    CHECK((log.fused - x).norm() < 1e-10);
    CHECK((log.fused_cov - p).norm() < 1e-10);
    CHECK(log.probs[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("imm invariants hold along a simulated track") {
  TrackingConfig cfg;
  cfg.n_slots = 60;
  const VecD q0 = state_of(deg2rad(-35.0), 2.0, cfg.speed, 1.0);
  TruthSim truth(q0, cfg);
  ImmState imm = make_imm(q0, cfg);
  const VecD c = (VecD(3) << cfg.c_theta, cfg.c_d, cfg.c_v).finished();
  RngStream rng(13, "invariants");
  for (int t = 0; t < cfg.n_slots; ++t) {
    truth.step(cfg, rng);
    const Measurement z =
        synthesize_measurement(truth.state, cfg.meas_snr(), c, rng);
    const ImmStepLog log = imm_step(imm, z);
    CHECK(std::abs(log.probs.sum() - 1.0) < 1e-12);
    for (const MatD& cov : imm.covs) {
      CHECK((cov - cov.transpose()).norm() < 1e-12);
      CHECK(min_eigenvalue(cov.cast<cd>()) > -1e-9);
    }
    CHECK(min_eigenvalue(log.fused_cov.cast<cd>()) > -1e-9);
  }
}

TEST_CASE("truth simulation stays inside the movement box") {
  TrackingConfig cfg;
  cfg.move_prob = 0.24;  // mostly moving
  cfg.region_half = 0.3;
  cfg.n_slots = 400;
  const VecD q0 = state_of(deg2rad(25.0), 1.0, cfg.speed, 1.0);
  TruthSim truth(q0, cfg);
  RngStream rng(14, "box");
  for (int t = 0; t < cfg.n_slots; ++t) {
    truth.step(cfg, rng);
    const double x = truth.state[1] * std::sin(truth.state[0]);
    const double y = truth.state[1] * std::cos(truth.state[0]);
    CHECK(std::abs(x - truth.x0) <= cfg.region_half + 1e-9);
    CHECK(std::abs(y - truth.y0) <= cfg.region_half + 1e-9);
  }
}

TEST_CASE("direction draws share randomness across move probabilities") {
  // The same uniform maps to a superset of moves as the probability grows.
  RngStream rng(15, "dirs");
  for (int i = 0; i < 2000; ++i) {
    const double u = rng.uniform();
    if (draw_direction(u, 0.05) != MotionKind::stationary)
      CHECK(draw_direction(u, 0.15) != MotionKind::stationary);
    if (draw_direction(u, 0.15) != MotionKind::stationary)
      CHECK(draw_direction(u, 0.24) != MotionKind::stationary);
  }
  CHECK(draw_direction(0.01, 0.15) == MotionKind::left);
  CHECK(draw_direction(0.16, 0.15) == MotionKind::right);
  CHECK(draw_direction(0.31, 0.15) == MotionKind::up);
  CHECK(draw_direction(0.46, 0.15) == MotionKind::down);
  CHECK(draw_direction(0.61, 0.15) == MotionKind::stationary);
}

TEST_CASE("tracking errors sit in the reference bands and scale with noise") {
  TrackingConfig cfg;  // sigma2_e = 1e-3, speed 0.1, move prob 0.15
  cfg.n_slots = 50;
  const VecD q0 = state_of(deg2rad(-35.0), 2.0, cfg.speed, 1.0);
  const TrackingRmse low = tracking_rmse(q0, cfg, 20, 1234);
  CHECK(rad2deg(low.theta) >= 0.004);
  CHECK(rad2deg(low.theta) <= 0.04);
  CHECK(low.d >= 0.004);
  CHECK(low.d <= 0.04);

  TrackingConfig noisy = cfg;
  noisy.sigma2_e = 1.0;
  const TrackingRmse high = tracking_rmse(q0, noisy, 20, 1234);
  CHECK(rad2deg(high.theta) >= 0.09);
  CHECK(rad2deg(high.theta) <= 0.8);
  CHECK(high.theta > low.theta);
  CHECK(high.d > low.d);
}

TEST_CASE("angle error grows weakly with movement probability") {
  TrackingConfig cfg;
  cfg.n_slots = 50;
  const VecD q0 = state_of(deg2rad(5.0), 5.0, cfg.speed, 1.0);
  double prev = -1.0;
  for (double p : {0.05, 0.15, 0.24}) {
    TrackingConfig c = cfg;
    c.move_prob = p;
    const TrackingRmse r = tracking_rmse(q0, c, 40, 777);
    if (prev >= 0.0) CHECK(r.theta >= prev * 0.95);
    prev = r.theta;
  }
}

TEST_CASE("track logs serialize as csv") {
  TrackingConfig cfg;
  cfg.n_slots = 5;
  RngStream rng(16, "csv");
  const auto log =
      run_tracking(state_of(0.1, 2.0, cfg.speed, 1.0), cfg, rng);
  const std::string csv = track_csv(log);
  CHECK(csv.rfind("slot,direction,theta_true", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  CHECK(csv.find("p4") != std::string::npos);
  RngStream rng2(16, "csv");
  const auto log2 =
      run_tracking(state_of(0.1, 2.0, cfg.speed, 1.0), cfg, rng2);
  CHECK(track_csv(log2) == csv);
}
