#pragma once

// Vital-sign extraction from slow-time echo frames: matched-filter delay,
// phase demodulation of the chest motion, variational mode decomposition,
// band grouping and spectral rate estimation.

#include <vector>

#include "iscsc/waveform.hpp"

namespace iscsc {

// ---------------------------------------------------------------------------
// Delay and phase
// ---------------------------------------------------------------------------

struct DelayEstimate {
  int lag = 0;         // samples on the slow-time grid
  double delay_s = 0;  // lag / fs
  double peak = 0;     // correlation peak value
};

// Arg-max of |cross-correlation|^2 between each antenna stream and the known
// scalar reference sequence, coherently per antenna and summed across
// antennas.  Lags are searched on [0, max_lag] (default T/4).
DelayEstimate estimate_delay(const MatC& samples, const VecC& reference,
                             double fs, int max_lag = -1);

struct PhaseSeries {
  VecD phase;                 // rad, unwrapped
  double fs = 20.0;
  double t0 = 0.0;
  std::vector<int> flagged;   // sample indices with zero magnitude
};

// Per-sample four-quadrant angle per antenna (after removing the known
// transmit-symbol phase and the per-antenna steering offset), averaged over
// antennas, then unwrapped.  Zero-magnitude samples reuse the previous
// antenna angle and are flagged.
PhaseSeries extract_phase(const EchoFrame& f);

// Beam-matched variant for multi-patient frames: spatial filter a(theta)^H
// first, then angle and unwrap.
PhaseSeries extract_phase_beam(const MatC& samples, const MatC& tx,
                               double theta, double fs, double t0 = 0.0);

VecD unwrap_phase(const VecD& wrapped);

// ---------------------------------------------------------------------------
// Variational mode decomposition
// ---------------------------------------------------------------------------

struct VmdParams {
  int n_modes = 5;
  double alpha = 2000.0;   // bandwidth penalty (normalized-frequency units)
  double tau = 1.0;        // dual ascent step; 0 disables the equality dual
  double tol = 1e-7;
  int max_iters = 500;
  enum class Init { peaks, uniform } init = Init::peaks;
};

struct VmdResult {
  MatD modes;        // n_modes x T, sums approximately to the input
  VecD center_hz;    // per-mode spectral centroid
  int iterations = 0;
  bool converged = false;
  double residual = 0;  // ||input - sum(modes)|| / ||input||
};

// Decomposes x into narrowband modes by Wiener-filter updates on a mirrored,
// one-sided spectrum with spectral-centroid frequency re-estimation and dual
// ascent on the reconstruction constraint.
VmdResult vmd(const VecD& x, double fs, const VmdParams& p = {});

struct BandSpec {
  double lo = 0.0;
  double hi = 0.0;
};

struct ImfGroups {
  std::vector<int> resp;
  std::vector<int> heart;
  std::vector<int> dropped;  // centroids outside both bands
};

ImfGroups group_imfs(const VecD& center_hz, const BandSpec& resp_band,
                     const BandSpec& heart_band);

// Brick-wall FFT band-pass: bins with lo <= |f| <= hi pass untouched, all
// others (including DC when lo > 0) are zeroed.  Linear and idempotent.
VecD bandpass(const VecD& x, double fs, double lo, double hi);

// ---------------------------------------------------------------------------
// Rate estimation
// ---------------------------------------------------------------------------

struct RateEstimate {
  double freq_hz = 0;
  double amplitude = 0;  // window-corrected sine amplitude at the peak
};

// Hann window, zero-padding, restriction to the band, then a three-point
// parabolic interpolation of the log-magnitude around the peak bin.
RateEstimate estimate_rate(const VecD& x, double fs, const BandSpec& band,
                           int zero_pad = 8, bool hann = true);

// ---------------------------------------------------------------------------
// End-to-end pipeline
// ---------------------------------------------------------------------------

struct VitalsParams {
  enum class Mode { vmd, fft_only } mode = Mode::vmd;
  BandSpec resp_band{0.1, 0.5};
  BandSpec heart_band{1.0, 2.5};
  VmdParams vmd;
  int zero_pad = 8;
  bool detrend = true;  // remove the linear trend of the phase first
};

struct VitalEstimate {
  double resp_hz = 0;
  double heart_hz = 0;
  double resp_rpm = 0;   // resp_hz * 60
  double heart_bpm = 0;  // heart_hz * 60
  double resp_amp = 0;   // spectral amplitude, phase units (rad)
  double heart_amp = 0;
  bool used_vmd = false;
  std::vector<int> dropped_modes;
  std::vector<int> flagged_samples;
};

VitalEstimate estimate_vitals(const EchoFrame& f, const VitalsParams& p = {});

// Multi-patient entry point: beam-matched phase at the predicted angle.
VitalEstimate estimate_vitals_beam(const EchoFrameSet& fs, double theta,
                                   const VitalsParams& p = {});

// Shared tail of both entry points, exposed for tests on synthetic phase.
VitalEstimate estimate_vitals_from_phase(const PhaseSeries& ph,
                                         const VitalsParams& p);

}  // namespace iscsc
