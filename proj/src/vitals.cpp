#include "iscsc/vitals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iscsc/fftutil.hpp"

namespace iscsc {

// --------------------------- delay -----------------------------------------

DelayEstimate estimate_delay(const MatC& samples, const VecC& reference,
                             double fs, int max_lag) {
  const int n = static_cast<int>(samples.rows());
  const int t = static_cast<int>(samples.cols());
  if (reference.size() != t)
    throw std::invalid_argument("reference must match the frame length");
  if (max_lag < 0) max_lag = t / 4;
  max_lag = std::min(max_lag, t - 1);

  DelayEstimate best;
  best.peak = -1.0;
  for (int lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (int a = 0; a < n; ++a) {
      cd c = 0.0;
      for (int s = lag; s < t; ++s)
        c += samples(a, s) * std::conj(reference[s - lag]);
      acc += std::norm(c);
    }
    if (acc > best.peak) {
      best.peak = acc;
      best.lag = lag;
    }
  }
  best.delay_s = best.lag / fs;
  return best;
}

// --------------------------- phase -----------------------------------------

VecD unwrap_phase(const VecD& wrapped) {
  VecD out = wrapped;
  double offset = 0.0;
  for (int i = 1; i < out.size(); ++i) {
    const double d = wrapped[i] - wrapped[i - 1];
    if (d > kPi) offset -= 2.0 * kPi;
    else if (d < -kPi) offset += 2.0 * kPi;
    out[i] = wrapped[i] + offset;
  }
  return out;
}

PhaseSeries extract_phase(const EchoFrame& f) {
  const int n = static_cast<int>(f.samples.rows());
  const int t = static_cast<int>(f.samples.cols());
  const VecC a = steering(f.steer_angle, n);
  PhaseSeries out;
  out.fs = f.fs_slow;
  out.t0 = f.t0;
  VecD avg(t);
  VecD prev = VecD::Zero(n);
  for (int s = 0; s < t; ++s) {
    // Known transmit-symbol phase toward the patient.
    const cd g = a.dot(f.tx.col(s));
    const double gphase = std::arg(g);
    double acc = 0.0;
    bool any_zero = false;
    for (int i = 0; i < n; ++i) {
      // Strip the symbol phase and the per-antenna steering offset so every
      // antenna nominally carries the same chest-motion angle.
      const cd z = f.samples(i, s) *
                   std::polar(1.0, -gphase - std::arg(a[i]));
      double ang;
      if (std::abs(z) == 0.0) {
        any_zero = true;
        ang = prev[i];
      } else {
        ang = std::arg(z);
      }
      prev[i] = ang;
      acc += ang;
    }
    if (any_zero) out.flagged.push_back(s);
    avg[s] = acc / n;
  }
  out.phase = unwrap_phase(avg);
  return out;
}

PhaseSeries extract_phase_beam(const MatC& samples, const MatC& tx,
                               double theta, double fs, double t0) {
  const int n = static_cast<int>(samples.rows());
  const int t = static_cast<int>(samples.cols());
  const VecC a = steering(theta, n);
  PhaseSeries out;
  out.fs = fs;
  out.t0 = t0;
  VecD ang(t);
  double prev = 0.0;
  for (int s = 0; s < t; ++s) {
    const cd g = a.dot(tx.col(s));
    const cd y = a.dot(samples.col(s));
    const cd z = y * std::polar(1.0, -std::arg(g));
    if (std::abs(z) == 0.0) {
      out.flagged.push_back(s);
      ang[s] = prev;
    } else {
      ang[s] = std::arg(z);
    }
    prev = ang[s];
  }
  out.phase = unwrap_phase(ang);
  return out;
}

// --------------------------- VMD -------------------------------------------

namespace {

// Largest local maxima of the smoothed one-sided magnitude spectrum.
std::vector<double> spectral_peaks(const VecC& xhat, int half, int count) {
  VecD mag(half + 1);
  for (int k = 0; k <= half; ++k) mag[k] = std::abs(xhat[k]);
  VecD sm = mag;
  for (int k = 1; k < half; ++k)
    sm[k] = (mag[k - 1] + mag[k] + mag[k + 1]) / 3.0;
  std::vector<std::pair<double, int>> peaks;
  for (int k = 2; k < half - 1; ++k)
    if (sm[k] > sm[k - 1] && sm[k] >= sm[k + 1]) peaks.push_back({sm[k], k});
  std::sort(peaks.rbegin(), peaks.rend());
  std::vector<double> out;
  for (int i = 0; i < std::min<int>(count, peaks.size()); ++i)
    out.push_back(static_cast<double>(peaks[i].second));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

VmdResult vmd(const VecD& x, double fs, const VmdParams& p) {
  const int t = static_cast<int>(x.size());
  VmdResult out;
  out.modes = MatD::Zero(p.n_modes, t);
  out.center_hz = VecD::Zero(p.n_modes);
  if (t < 4) {
    out.converged = true;
    return out;
  }
  const double x_norm = x.norm();
  if (x_norm == 0.0) {
    out.converged = true;
    return out;
  }

  // Work on the demeaned signal; the mean is credited to the lowest mode at
  // the end so the modes still sum to the input.
  const double mean = x.mean();
  VecD xc = x.array() - mean;

  // Mirror extension halves the boundary discontinuity seen by the spectrum.
  const int half0 = t / 2;
  const int tm = t + 2 * half0;
  VecC ext = VecC::Zero(tm);
  for (int i = 0; i < half0; ++i) ext[i] = xc[half0 - 1 - i];
  for (int i = 0; i < t; ++i) ext[half0 + i] = xc[i];
  for (int i = 0; i < half0; ++i) ext[half0 + t + i] = xc[t - 1 - i];

  const VecC fhat_full = fft(ext);
  const int nyq = tm / 2;
  // One-sided spectrum: algorithm state only over bins 0..nyq.
  VecC fplus = VecC::Zero(tm);
  for (int k = 0; k <= nyq; ++k) fplus[k] = fhat_full[k];

  // Normalized frequency grid in cycles/sample.
  VecD omega(nyq + 1);
  for (int k = 0; k <= nyq; ++k) omega[k] = static_cast<double>(k) / tm;

  // Center-frequency initialization.
  VecD wk(p.n_modes);
  if (p.init == VmdParams::Init::peaks) {
    const auto peaks = spectral_peaks(fhat_full, nyq, p.n_modes);
    for (int m = 0; m < p.n_modes; ++m) {
      if (m < static_cast<int>(peaks.size()))
        wk[m] = peaks[m] / tm;
      else
        wk[m] = 0.5 * (m + 0.5) / p.n_modes;
    }
    std::sort(wk.data(), wk.data() + wk.size());
  } else {
    for (int m = 0; m < p.n_modes; ++m) wk[m] = 0.5 * (m + 0.5) / p.n_modes;
  }

  MatC uhat = MatC::Zero(p.n_modes, nyq + 1);
  VecC lambda = VecC::Zero(nyq + 1);
  double diff = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < p.max_iters && diff > p.tol; ++iter) {
    diff = 0.0;
    VecC sum_all = uhat.colwise().sum().transpose();
    for (int m = 0; m < p.n_modes; ++m) {
      sum_all -= uhat.row(m).transpose();
      VecC unew(nyq + 1);
      double num = 0.0, den = 0.0;
      for (int k = 0; k <= nyq; ++k) {
        const double w = omega[k] - wk[m];
        unew[k] = (fplus[k] - sum_all[k] + 0.5 * lambda[k]) /
                  (1.0 + 2.0 * p.alpha * w * w);
        const double e = std::norm(unew[k]);
        num += omega[k] * e;
        den += e;
      }
      if (den > 0) wk[m] = num / den;
      const double un = uhat.row(m).squaredNorm();
      if (un > 0)
        diff += (unew.transpose() - uhat.row(m)).squaredNorm() / un;
      else
        diff += (unew.transpose() - uhat.row(m)).squaredNorm();
      uhat.row(m) = unew.transpose();
      sum_all += unew;
    }
    if (p.tau > 0) lambda += p.tau * (fplus - sum_all);
  }
  out.iterations = iter;
  out.converged = diff <= p.tol;

  // Back to the time domain via conjugate-symmetric completion, then crop the
  // mirror margins.
  std::vector<std::pair<double, int>> order(p.n_modes);
  for (int m = 0; m < p.n_modes; ++m) order[m] = {wk[m], m};
  std::sort(order.begin(), order.end());
  MatD modes(p.n_modes, t);
  for (int mi = 0; mi < p.n_modes; ++mi) {
    const int m = order[mi].second;
    VecC full = VecC::Zero(tm);
    for (int k = 0; k <= nyq; ++k) full[k] = uhat(m, k);
    for (int k = 1; k < tm - nyq; ++k) full[tm - k] = std::conj(uhat(m, k));
    const VecC ut = ifft(full);
    for (int i = 0; i < t; ++i) modes(mi, i) = ut[half0 + i].real();
    out.center_hz[mi] = order[mi].first * fs;
  }
  // Lowest mode absorbs the mean so the decomposition sums to the input.
  modes.row(0).array() += mean;
  out.modes = modes;

  VecD recon = out.modes.colwise().sum().transpose();
  out.residual = (x - recon).norm() / x_norm;
  return out;
}

ImfGroups group_imfs(const VecD& center_hz, const BandSpec& resp_band,
                     const BandSpec& heart_band) {
  ImfGroups g;
  for (int m = 0; m < center_hz.size(); ++m) {
    const double f = center_hz[m];
    if (f >= resp_band.lo && f <= resp_band.hi)
      g.resp.push_back(m);
    else if (f >= heart_band.lo && f <= heart_band.hi)
      g.heart.push_back(m);
    else
      g.dropped.push_back(m);
  }
  return g;
}

VecD bandpass(const VecD& x, double fs, double lo, double hi) {
  const int t = static_cast<int>(x.size());
  if (t == 0) return x;
  VecC xc = x.cast<cd>();
  VecC xhat = fft(xc);
  for (int k = 0; k < t; ++k) {
    const double f = std::abs(bin_frequency(k, t, fs));
    if (f < lo || f > hi) xhat[k] = 0.0;
  }
  return ifft(xhat).real();
}

// --------------------------- rate estimation -------------------------------

RateEstimate estimate_rate(const VecD& x, double fs, const BandSpec& band,
                           int zero_pad, bool hann) {
  const int t = static_cast<int>(x.size());
  RateEstimate out;
  if (t < 4) return out;
  VecD w = VecD::Ones(t);
  if (hann)
    for (int i = 0; i < t; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (t - 1));
  const double wsum = w.sum();

  const int nfft = next_pow2(t * std::max(1, zero_pad));
  VecC padded = VecC::Zero(nfft);
  for (int i = 0; i < t; ++i) padded[i] = x[i] * w[i];
  const VecC spec = fft(padded);

  const int half = nfft / 2;
  int best = -1;
  double bestmag = 0.0;
  for (int k = 1; k <= half; ++k) {
    const double f = fs * k / nfft;
    if (f < band.lo || f > band.hi) continue;
    const double m = std::abs(spec[k]);
    if (m > bestmag) {
      bestmag = m;
      best = k;
    }
  }
  if (best < 0) return out;

  // Three-point parabolic interpolation on the log magnitude.
  double delta = 0.0;
  if (best > 0 && best < half) {
    const double eps = 1e-300;
    const double lm = std::log(std::abs(spec[best - 1]) + eps);
    const double l0 = std::log(bestmag + eps);
    const double lp = std::log(std::abs(spec[best + 1]) + eps);
    const double denom = lm - 2.0 * l0 + lp;
    if (denom < 0) delta = 0.5 * (lm - lp) / denom;
    delta = std::clamp(delta, -0.5, 0.5);
  }
  out.freq_hz = fs * (best + delta) / nfft;
  // Window-corrected amplitude of a sine at the peak.
  out.amplitude = 2.0 * bestmag / wsum;
  return out;
}

// --------------------------- end-to-end ------------------------------------

VitalEstimate estimate_vitals_from_phase(const PhaseSeries& ph,
                                         const VitalsParams& p) {
  VitalEstimate out;
  out.flagged_samples = ph.flagged;
  VecD sig = ph.phase;
  const int t = static_cast<int>(sig.size());
  if (p.detrend && t >= 2) {
    // Least-squares line fit removes baseline drift from the phase.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < t; ++i) {
      sx += i;
      sy += sig[i];
      sxx += static_cast<double>(i) * i;
      sxy += i * sig[i];
    }
    const double det = t * sxx - sx * sx;
    const double slope = det != 0 ? (t * sxy - sx * sy) / det : 0.0;
    const double icept = (sy - slope * sx) / t;
    for (int i = 0; i < t; ++i) sig[i] -= icept + slope * i;
  }

  VecD resp_sig, heart_sig;
  if (p.mode == VitalsParams::Mode::vmd) {
    out.used_vmd = true;
    const VmdResult vr = vmd(sig, ph.fs, p.vmd);
    const ImfGroups g = group_imfs(vr.center_hz, p.resp_band, p.heart_band);
    out.dropped_modes = g.dropped;
    resp_sig = VecD::Zero(t);
    heart_sig = VecD::Zero(t);
    for (int m : g.resp) resp_sig += vr.modes.row(m).transpose();
    for (int m : g.heart) heart_sig += vr.modes.row(m).transpose();
    // If a band caught no mode, fall back to the raw signal for that band;
    // the brick-wall filter below still limits the search range.
    if (g.resp.empty()) resp_sig = sig;
    if (g.heart.empty()) heart_sig = sig;
  } else {
    resp_sig = sig;
    heart_sig = sig;
  }
  resp_sig = bandpass(resp_sig, ph.fs, p.resp_band.lo, p.resp_band.hi);
  heart_sig = bandpass(heart_sig, ph.fs, p.heart_band.lo, p.heart_band.hi);

  const RateEstimate rr = estimate_rate(resp_sig, ph.fs, p.resp_band, p.zero_pad);
  const RateEstimate hr = estimate_rate(heart_sig, ph.fs, p.heart_band, p.zero_pad);
  out.resp_hz = rr.freq_hz;
  out.heart_hz = hr.freq_hz;
  out.resp_rpm = rr.freq_hz * 60.0;
  out.heart_bpm = hr.freq_hz * 60.0;
  out.resp_amp = rr.amplitude;
  out.heart_amp = hr.amplitude;
  return out;
}

VitalEstimate estimate_vitals(const EchoFrame& f, const VitalsParams& p) {
  return estimate_vitals_from_phase(extract_phase(f), p);
}

VitalEstimate estimate_vitals_beam(const EchoFrameSet& fs, double theta,
                                   const VitalsParams& p) {
  return estimate_vitals_from_phase(
      extract_phase_beam(fs.samples, fs.tx, theta, fs.fs_slow, fs.t0), p);
}

}  // namespace iscsc
