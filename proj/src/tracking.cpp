#include "iscsc/tracking.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "iscsc/linalg.hpp"

namespace iscsc {

namespace {

// Sign of the displacement and offset of the trig argument per family.
// Left/up take the + branch of their family, right/down the - branch.
void family_params(MotionKind kind, double* sign, double* phase) {
  switch (kind) {
    case MotionKind::left: *sign = 1.0; *phase = 0.0; break;
    case MotionKind::right: *sign = -1.0; *phase = 0.0; break;
    case MotionKind::up: *sign = 1.0; *phase = kPi / 2.0; break;
    case MotionKind::down: *sign = -1.0; *phase = kPi / 2.0; break;
    case MotionKind::stationary: *sign = 0.0; *phase = 0.0; break;
  }
}

void check_state(const VecD& q) {
  if (q.size() != kStateDim) throw std::invalid_argument("state must have 4 entries");
}

}  // namespace

const char* motion_name(MotionKind kind) {
  switch (kind) {
    case MotionKind::left: return "left";
    case MotionKind::right: return "right";
    case MotionKind::up: return "up";
    case MotionKind::down: return "down";
    case MotionKind::stationary: return "stationary";
  }
  return "?";
}

VecD TrackingConfig::meas_variances() const {
  const double snr = meas_snr();
  return (VecD(3) << c_theta / snr, c_d / snr, c_v / snr).finished();
}

VecD propagate(const MotionModel& m, const VecD& q, RngStream* rng,
               bool* clamped) {
  check_state(q);
  VecD out = q;
  if (m.kind != MotionKind::stationary) {
    const double theta = q[0], d = q[1], v = q[2], beta = q[3];
    double sign = 0.0, phase = 0.0;
    family_params(m.kind, &sign, &phase);
    const double psi = theta + phase;
    const double step = v * m.dt;
    out[0] = theta + sign * step / d * std::sin(psi);
    out[1] = d - sign * step * std::cos(psi);
    out[2] = v;
    out[3] = beta * (1.0 + step / d * std::cos(psi));
  }
  if (rng) {
    for (int i = 0; i < kStateDim; ++i)
      out[i] += std::sqrt(m.q1[i]) * rng->normal();
  }
  if (clamped) *clamped = false;
  if (out[1] < m.d_floor) {
    out[1] = m.d_floor;
    if (clamped) *clamped = true;
  }
  return out;
}

MatD transition_jacobian(const MotionModel& m, const VecD& q) {
  check_state(q);
  MatD g = MatD::Identity(kStateDim, kStateDim);
  if (m.kind == MotionKind::stationary) return g;
  const double theta = q[0], d = q[1], v = q[2], beta = q[3];
  double sign = 0.0, phase = 0.0;
  family_params(m.kind, &sign, &phase);
  const double psi = theta + phase;
  const double s = std::sin(psi), c = std::cos(psi);
  const double step = v * m.dt;
  // theta' = theta + sign * (v dt / d) sin(psi)
  g(0, 0) = 1.0 + sign * step / d * c;
  g(0, 1) = -sign * step / (d * d) * s;
  g(0, 2) = sign * m.dt / d * s;
  // d' = d - sign * v dt cos(psi)
  g(1, 0) = sign * step * s;
  g(1, 2) = -sign * m.dt * c;
  // beta' = beta (1 + (v dt / d) cos(psi))
  g(3, 0) = -beta * step / d * s;
  g(3, 1) = -beta * step / (d * d) * c;
  g(3, 2) = beta * m.dt / d * c;
  g(3, 3) = 1.0 + step / d * c;
  return g;
}

VecD measure_state(const VecD& q) {
  check_state(q);
  return q.head(kMeasDim);
}

MatD measurement_jacobian() {
  MatD g = MatD::Zero(kMeasDim, kStateDim);
  g(0, 0) = 1.0;
  g(1, 1) = 1.0;
  g(2, 2) = 1.0;
  return g;
}

Measurement synthesize_measurement(const VecD& truth, double snr, const VecD& c,
                                   RngStream& rng) {
  check_state(truth);
  if (!(snr > 0.0)) throw std::invalid_argument("snr must be positive");
  Measurement z;
  z.theta = truth[0] + std::sqrt(c[0] / snr) * rng.normal();
  z.d = truth[1] + std::sqrt(c[1] / snr) * rng.normal();
  z.v = truth[2] + std::sqrt(c[2] / snr) * rng.normal();
  return z;
}

EkfResult ekf_step(const MotionModel& m, const VecD& q, const MatD& cov,
                   const Measurement& z) {
  EkfResult r;
  r.predicted = propagate(m, q);
  const MatD g1 = transition_jacobian(m, q);
  const MatD g2 = measurement_jacobian();
  MatD m_pred = g1 * cov * g1.transpose();
  m_pred.diagonal() += m.q1;
  m_pred = 0.5 * (m_pred + m_pred.transpose());

  MatD s = g2 * m_pred * g2.transpose();
  s.diagonal() += m.q2;
  Eigen::SelfAdjointEigenSolver<MatD> es(s);
  if (es.eigenvalues().minCoeff() < 1e-12) {
    s.diagonal().array() += 1e-9;
    r.regularized = true;
  }
  const MatD k = m_pred * g2.transpose() * s.inverse();
  r.innovation = z.vec() - measure_state(r.predicted);
  r.state = r.predicted + k * r.innovation;
  r.cov = (MatD::Identity(kStateDim, kStateDim) - k * g2) * m_pred;
  r.cov = 0.5 * (r.cov + r.cov.transpose());
  r.innovation_cov = s;
  return r;
}

MixResult imm_interact(const ImmState& s) {
  const int m = static_cast<int>(s.models.size());
  MixResult out;
  out.means.resize(m);
  out.covs.resize(m);
  for (int i = 0; i < m; ++i) {
    VecD w(m);
    double denom = 0.0;
    for (int j = 0; j < m; ++j) {
      w[j] = s.pi(j, i) * s.probs[j];
      denom += w[j];
    }
    if (denom <= 0.0) {
      w.setConstant(1.0 / m);
      out.degenerate = true;
    } else {
      w /= denom;
    }
    VecD mean = VecD::Zero(kStateDim);
    for (int j = 0; j < m; ++j) mean += w[j] * s.means[j];
    MatD cov = MatD::Zero(kStateDim, kStateDim);
    for (int j = 0; j < m; ++j) {
      const VecD diff = mean - s.means[j];
      cov += w[j] * (s.covs[j] + diff * diff.transpose());
    }
    out.means[i] = mean;
    out.covs[i] = 0.5 * (cov + cov.transpose());
  }
  return out;
}

VecD imm_predict(const ImmState& s) {
  const int m = static_cast<int>(s.models.size());
  const MixResult mix = imm_interact(s);
  const VecD prior = s.pi.transpose() * s.probs;
  VecD pred = VecD::Zero(kStateDim);
  for (int i = 0; i < m; ++i)
    pred += prior[i] * propagate(s.models[i], mix.means[i]);
  return pred;
}

ImmStepLog imm_step(ImmState& s, const Measurement& z) {
  const int m = static_cast<int>(s.models.size());
  ImmStepLog log;
  const MixResult mix = imm_interact(s);
  log.degenerate_mixing = mix.degenerate;

  const VecD prior = s.pi.transpose() * s.probs;
  VecD loglik(m);
  VecD predicted = VecD::Zero(kStateDim);
  std::vector<EkfResult> ekf(m);
  for (int i = 0; i < m; ++i) {
    ekf[i] = ekf_step(s.models[i], mix.means[i], mix.covs[i], z);
    log.regularized = log.regularized || ekf[i].regularized;
    predicted += prior[i] * ekf[i].predicted;
    const MatD& si = ekf[i].innovation_cov;
    const VecD& inn = ekf[i].innovation;
    const double quad = inn.dot(si.llt().solve(inn));
    const double logdet = std::log(si.determinant());
    loglik[i] = -0.5 * quad - 0.5 * (kMeasDim * std::log(2.0 * kPi) + logdet);
  }

  // Probability update in the log domain to survive likelihood underflow.
  VecD logp(m);
  for (int i = 0; i < m; ++i)
    logp[i] = loglik[i] + std::log(std::max(prior[i], 1e-300));
  const double top = logp.maxCoeff();
  if (!std::isfinite(top)) {
    logp.setZero();  // every likelihood underflowed; fall back to uniform
  } else {
    logp.array() -= top;
  }
  VecD p = logp.array().exp();
  p /= p.sum();

  VecD fused = VecD::Zero(kStateDim);
  for (int i = 0; i < m; ++i) fused += p[i] * ekf[i].state;
  MatD fused_cov = MatD::Zero(kStateDim, kStateDim);
  for (int i = 0; i < m; ++i) {
    const VecD diff = ekf[i].state - fused;
    fused_cov += p[i] * (ekf[i].cov + diff * diff.transpose());
  }

  for (int i = 0; i < m; ++i) {
    s.means[i] = ekf[i].state;
    s.covs[i] = ekf[i].cov;
  }
  s.probs = p;
  s.fused_mean = fused;
  s.fused_cov = 0.5 * (fused_cov + fused_cov.transpose());

  log.predicted = predicted;
  log.fused = fused;
  log.fused_cov = s.fused_cov;
  log.probs = p;
  return log;
}

namespace {

MotionModel make_model(MotionKind kind, const TrackingConfig& cfg) {
  MotionModel m;
  m.kind = kind;
  m.dt = cfg.dt;
  m.d_floor = cfg.d_floor;
  m.q1 = cfg.q1;
  m.q2 = cfg.meas_variances();
  return m;
}

ImmState init_state(std::vector<MotionModel> models, const VecD& q0,
                    double pi_self) {
  const int m = static_cast<int>(models.size());
  ImmState s;
  s.models = std::move(models);
  s.pi = MatD::Constant(m, m, m > 1 ? (1.0 - pi_self) / (m - 1) : 0.0);
  s.pi.diagonal().setConstant(m > 1 ? pi_self : 1.0);
  s.means.assign(m, q0);
  s.covs.assign(m, static_cast<MatD>(s.models[0].q1.asDiagonal()));
  s.probs = VecD::Constant(m, 1.0 / m);
  s.fused_mean = q0;
  s.fused_cov = s.covs[0];
  return s;
}

}  // namespace

ImmState make_imm(const VecD& q0, const TrackingConfig& cfg) {
  std::vector<MotionModel> models;
  for (MotionKind k : {MotionKind::left, MotionKind::right, MotionKind::up,
                       MotionKind::down, MotionKind::stationary})
    models.push_back(make_model(k, cfg));
  return init_state(std::move(models), q0, cfg.pi_self);
}

ImmState make_single_model(const VecD& q0, MotionKind kind,
                           const TrackingConfig& cfg) {
  return init_state({make_model(kind, cfg)}, q0, cfg.pi_self);
}

MotionKind draw_direction(double u, double move_prob) {
  // Inverse CDF over [left, right, up, down, stationary]: the same uniform
  // maps to a superset of moves as move_prob grows.
  if (u < move_prob) return MotionKind::left;
  if (u < 2.0 * move_prob) return MotionKind::right;
  if (u < 3.0 * move_prob) return MotionKind::up;
  if (u < 4.0 * move_prob) return MotionKind::down;
  return MotionKind::stationary;
}

TruthSim::TruthSim(const VecD& q0, const TrackingConfig& cfg) : state(q0) {
  (void)cfg;
  x0 = q0[1] * std::sin(q0[0]);
  y0 = q0[1] * std::cos(q0[0]);
}

MotionKind TruthSim::step(const TrackingConfig& cfg, RngStream& rng) {
  MotionKind dir = draw_direction(rng.uniform(), cfg.move_prob);
  if (dir != MotionKind::stationary) {
    MotionModel m = {};
    m.kind = dir;
    m.dt = cfg.dt;
    m.d_floor = cfg.d_floor;
    const VecD cand = propagate(m, state);
    const double x = cand[1] * std::sin(cand[0]);
    const double y = cand[1] * std::cos(cand[0]);
    if (std::abs(x - x0) > cfg.region_half || std::abs(y - y0) > cfg.region_half)
      dir = MotionKind::stationary;  // confined to the movement box
    else
      state = cand;
  }
  return dir;
}

std::vector<TrackRecord> run_tracking(const VecD& q0, const TrackingConfig& cfg,
                                      RngStream& rng) {
  TruthSim truth(q0, cfg);
  ImmState imm = make_imm(q0, cfg);
  const VecD c = (VecD(3) << cfg.c_theta, cfg.c_d, cfg.c_v).finished();
  const double snr = cfg.meas_snr();
  std::vector<TrackRecord> out;
  out.reserve(cfg.n_slots);
  for (int t = 0; t < cfg.n_slots; ++t) {
    TrackRecord rec;
    rec.slot = t;
    rec.direction = truth.step(cfg, rng);
    rec.truth = truth.state;
    const Measurement z = synthesize_measurement(truth.state, snr, c, rng);
    const ImmStepLog log = imm_step(imm, z);
    rec.predicted = log.predicted;
    rec.fused = log.fused;
    rec.probs = log.probs;
    out.push_back(std::move(rec));
  }
  return out;
}

std::string track_csv(const std::vector<TrackRecord>& records) {
  std::ostringstream os;
  os << "slot,direction,theta_true,d_true,v_true,beta_true,"
        "theta_pred,d_pred,theta_est,d_est,v_est,beta_est";
  const int m = records.empty() ? 0 : static_cast<int>(records[0].probs.size());
  for (int i = 0; i < m; ++i) os << ",p" << i;
  os << "\n";
  char buf[64];
  auto put = [&](double x) {
    std::snprintf(buf, sizeof(buf), ",%.17g", x);
    os << buf;
  };
  for (const auto& r : records) {
    os << r.slot << "," << motion_name(r.direction);
    put(r.truth[0]); put(r.truth[1]); put(r.truth[2]); put(r.truth[3]);
    put(r.predicted[0]); put(r.predicted[1]);
    put(r.fused[0]); put(r.fused[1]); put(r.fused[2]); put(r.fused[3]);
    for (int i = 0; i < m; ++i) put(r.probs[i]);
    os << "\n";
  }
  return os.str();
}

TrackingRmse tracking_rmse(const VecD& q0, const TrackingConfig& cfg,
                           int n_trials, std::uint64_t seed) {
  // Per-slot RMSE across trials, then averaged over slots.
  VecD se_theta = VecD::Zero(cfg.n_slots);
  VecD se_d = VecD::Zero(cfg.n_slots);
  for (int trial = 0; trial < n_trials; ++trial) {
    RngStream rng(seed, "track-trial-" + std::to_string(trial));
    const auto log = run_tracking(q0, cfg, rng);
    for (int t = 0; t < cfg.n_slots; ++t) {
      const double et = log[t].fused[0] - log[t].truth[0];
      const double ed = log[t].fused[1] - log[t].truth[1];
      se_theta[t] += et * et;
      se_d[t] += ed * ed;
    }
  }
  TrackingRmse r;
  r.theta = (se_theta / n_trials).cwiseSqrt().mean();
  r.d = (se_d / n_trials).cwiseSqrt().mean();
  return r;
}

}  // namespace iscsc
