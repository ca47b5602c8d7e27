#include "iscsc/waveform.hpp"

#include <cmath>
#include <sstream>

#include "iscsc/linalg.hpp"

namespace iscsc {

MatC transmit_covariance(const BeamformerSet& bf) {
  int n = 0;
  if (!bf.W.empty()) n = static_cast<int>(bf.W.front().rows());
  else if (!bf.R.empty()) n = static_cast<int>(bf.R.front().rows());
  MatC rx = MatC::Zero(n, n);
  for (const auto& w : bf.W) rx += w;
  for (const auto& r : bf.R) rx += r;
  return rx;
}

double transmit_power(const BeamformerSet& bf) {
  return transmit_covariance(bf).trace().real();
}

BeamformerSet uniform_beams(const SceneConfig& sc) {
  BeamformerSet bf;
  const int n = sc.n_antennas;
  const int k = sc.num_devices();
  const int l = sc.num_patients();
  const int nb = k + l;
  const double p = nb > 0 ? sc.power_budget / nb : 0.0;
  for (const auto& d : sc.devices) {
    const VecC h = nominal_channel(sc, d.angle, d.distance);
    const double h2 = h.squaredNorm();
    bf.W.push_back(p * (h * h.adjoint()) / h2);
  }
  for (const auto& pt : sc.patients) {
    const VecC a = steering(pt.angle, n);
    bf.R.push_back(p * (a * a.adjoint()) / static_cast<double>(n));
  }
  return bf;
}

BeamformerSet sensing_only_beams(const SceneConfig& sc) {
  BeamformerSet bf;
  const int n = sc.n_antennas;
  const int l = sc.num_patients();
  const double p = l > 0 ? sc.power_budget / l : 0.0;
  for (int k = 0; k < sc.num_devices(); ++k)
    bf.W.push_back(MatC::Zero(n, n));
  for (const auto& pt : sc.patients) {
    const VecC a = steering(pt.angle, n);
    bf.R.push_back(p * (a * a.adjoint()) / static_cast<double>(n));
  }
  return bf;
}

BeamformerSet isotropic_beams(const SceneConfig& sc) {
  BeamformerSet bf;
  const int n = sc.n_antennas;
  for (int k = 0; k < sc.num_devices(); ++k)
    bf.W.push_back(MatC::Zero(n, n));
  bf.R.push_back(sc.power_budget / n * MatC::Identity(n, n));
  return bf;
}

MatC sample_waveform(const BeamformerSet& bf, int t, RngStream& rng) {
  int n = 0;
  if (!bf.W.empty()) n = static_cast<int>(bf.W.front().rows());
  else if (!bf.R.empty()) n = static_cast<int>(bf.R.front().rows());
  MatC x = MatC::Zero(n, t);

  const bool rank_one = !bf.w.empty();
  std::vector<MatC> factors;
  if (!rank_one)
    for (const auto& wk : bf.W) factors.push_back(psd_factor(wk));
  std::vector<MatC> rfactors;
  for (const auto& rl : bf.R) rfactors.push_back(psd_factor(rl));

  for (int s = 0; s < t; ++s) {
    if (rank_one) {
      for (const auto& wk : bf.w) x.col(s) += wk * rng.cnormal();
    } else {
      for (const auto& f : factors) {
        VecC xi(f.cols());
        for (int i = 0; i < xi.size(); ++i) xi[i] = rng.cnormal();
        x.col(s) += f * xi;
      }
    }
    for (const auto& f : rfactors) {
      VecC xi(f.cols());
      for (int i = 0; i < xi.size(); ++i) xi[i] = rng.cnormal();
      x.col(s) += f * xi;
    }
  }
  return x;
}

double chest_motion(const VitalGroundTruth& vt, double t) {
  return vt.baseline + vt.drift_rate * t +
         vt.resp_amp * std::sin(2.0 * kPi * vt.resp_hz * t) +
         vt.heart_amp * std::sin(2.0 * kPi * vt.heart_hz * t);
}

VitalGroundTruth vitals_of(const PatientSpec& p) {
  VitalGroundTruth vt;
  vt.resp_hz = p.resp_hz;
  vt.heart_hz = p.heart_hz;
  vt.resp_amp = p.resp_amp;
  vt.heart_amp = p.heart_amp;
  return vt;
}

namespace {

int window_samples(const EchoWindow& win) {
  return std::max(1, static_cast<int>(std::lround(win.duration * win.fs_slow)));
}

// Noiseless echo of one patient for a given transmit block.
MatC patient_echo(const SceneConfig& sc, const MatC& tx,
                  const PatientEchoState& st, const VitalGroundTruth& vt,
                  const EchoWindow& win) {
  const int n = sc.n_antennas;
  const int t = static_cast<int>(tx.cols());
  const double tau = 2.0 * st.distance / kSpeedOfLight;
  const VecC a = steering(st.theta, n);
  MatC y(n, t);
  for (int s = 0; s < t; ++s) {
    const double ts = win.t0 + s / win.fs_slow;
    const double phi = 4.0 * kPi / sc.wavelength * chest_motion(vt, ts - tau);
    const cd g = a.dot(tx.col(s));  // a^H x
    y.col(s) = st.beta * std::polar(1.0, phi) * g * a;
  }
  return y;
}

}  // namespace

EchoFrame synthesize_echo(const SceneConfig& sc, const BeamformerSet& bf,
                          const PatientEchoState& st,
                          const VitalGroundTruth& vt, const EchoWindow& win,
                          RngStream& rng, int patient_index) {
  const int n = sc.n_antennas;
  const int t = window_samples(win);
  EchoFrame f;
  f.tx = sample_waveform(bf, t, rng);
  f.samples = patient_echo(sc, f.tx, st, vt, win);
  const double sd = std::sqrt(sc.sigma2_e);
  for (int s = 0; s < t; ++s)
    for (int i = 0; i < n; ++i) f.samples(i, s) += sd * rng.cnormal();
  f.fs_slow = win.fs_slow;
  f.t0 = win.t0;
  f.steer_angle = st.theta;
  f.delay = 2.0 * st.distance / kSpeedOfLight;
  f.truth = vt;
  f.patient_index = patient_index;
  return f;
}

EchoFrameSet synthesize_echo_multi(const SceneConfig& sc,
                                   const BeamformerSet& bf,
                                   const std::vector<PatientEchoState>& states,
                                   const std::vector<VitalGroundTruth>& truths,
                                   const EchoWindow& win, RngStream& rng) {
  if (states.size() != truths.size())
    throw std::invalid_argument("one vital ground truth per patient state required");
  const int n = sc.n_antennas;
  const int t = window_samples(win);
  EchoFrameSet fs;
  fs.tx = sample_waveform(bf, t, rng);
  fs.samples = MatC::Zero(n, t);
  for (std::size_t l = 0; l < states.size(); ++l)
    fs.samples += patient_echo(sc, fs.tx, states[l], truths[l], win);
  const double sd = std::sqrt(sc.sigma2_e);
  for (int s = 0; s < t; ++s)
    for (int i = 0; i < n; ++i) fs.samples(i, s) += sd * rng.cnormal();
  fs.fs_slow = win.fs_slow;
  fs.t0 = win.t0;
  fs.states = states;
  fs.truths = truths;
  return fs;
}

double received_power(const VecC& h, const BeamformerSet& bf, double sigma2) {
  const MatC rx = transmit_covariance(bf);
  return (h.adjoint() * rx * h)(0, 0).real() + sigma2;
}

std::string echo_frame_csv(const EchoFrame& f) {
  std::ostringstream os;
  os << "t,antenna,re,im\n";
  char buf[96];
  for (int s = 0; s < f.samples.cols(); ++s) {
    const double ts = f.t0 + s / f.fs_slow;
    for (int i = 0; i < f.samples.rows(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.9g,%d,%.17g,%.17g\n", ts, i,
                    f.samples(i, s).real(), f.samples(i, s).imag());
      os << buf;
    }
  }
  return os.str();
}

}  // namespace iscsc
