#pragma once

// Transmit waveform synthesis and the slow-time echo frames the vitals
// estimator consumes.  The robot transmits x(t) = sum_k w_k c_k(t) +
// sum_l r_l z_l(t); a patient's chest reflects it back with a phase
// proportional to the chest displacement m(t), sampled at the slow-time rate.

#include <vector>

#include "iscsc/scene.hpp"

namespace iscsc {

struct BeamformerSet {
  std::vector<MatC> W;  // communication covariances, N x N Hermitian PSD
  std::vector<MatC> R;  // sensing covariances, N x N Hermitian PSD
  // Optional rank-one communication beams (set after randomization); when
  // present, w[k] w[k]^H replaces W[k] in waveform draws.
  std::vector<VecC> w;
};

// sum_k W_k + sum_l R_l.
MatC transmit_covariance(const BeamformerSet& bf);
double transmit_power(const BeamformerSet& bf);  // Tr of the above, real part

// Uniform power split: each device gets a matched rank-one beam toward its
// nominal channel, each patient a steered rank-one sensing beam.
BeamformerSet uniform_beams(const SceneConfig& sc);
// All power in sensing beams steered at the patients (no communication).
BeamformerSet sensing_only_beams(const SceneConfig& sc);
// Isotropic radiation: R_x = P/N * I carried by a single sensing covariance.
BeamformerSet isotropic_beams(const SceneConfig& sc);

// N x T block of transmitted symbols with unit-power independent streams;
// the sample covariance converges to transmit_covariance(bf).
MatC sample_waveform(const BeamformerSet& bf, int t, RngStream& rng);

// ---------------------------------------------------------------------------
// Chest motion and echo frames
// ---------------------------------------------------------------------------

struct VitalGroundTruth {
  double resp_hz = 0.25;
  double heart_hz = 1.2;
  double resp_amp = 5e-3;   // m
  double heart_amp = 1e-3;  // m
  double baseline = 0.0;    // m, constant chest offset
  double drift_rate = 0.0;  // m/s, slow baseline drift
};

// m(t) = baseline + drift_rate * t + A_r sin(2 pi f_r t) + A_h sin(2 pi f_h t)
double chest_motion(const VitalGroundTruth& vt, double t);

VitalGroundTruth vitals_of(const PatientSpec& p);

struct EchoWindow {
  double fs_slow = 20.0;  // Hz
  double duration = 20.0; // s
  double t0 = 0.0;        // s, absolute start time
};

struct PatientEchoState {
  double theta = 0.0;     // rad
  double distance = 1.0;  // m
  double beta = 1.0;      // round-trip amplitude
};

// Slow-time snapshots for one patient.  `tx` holds the transmitted symbols
// (known at the robot and needed to strip the random symbol phase from the
// echo); `samples` is the raw received frame including that symbol phase.
struct EchoFrame {
  MatC samples;           // N x T
  MatC tx;                // N x T
  double fs_slow = 20.0;
  double t0 = 0.0;
  double steer_angle = 0.0;  // rad, patient angle used at synthesis
  double delay = 0.0;        // s, round-trip delay tau = 2 d / c
  VitalGroundTruth truth;
  int patient_index = 0;
};

// Superposition of several patient echoes sharing one transmit block.
struct EchoFrameSet {
  MatC samples;  // N x T, sum of patient echoes plus one noise realization
  MatC tx;       // N x T
  double fs_slow = 20.0;
  double t0 = 0.0;
  std::vector<PatientEchoState> states;
  std::vector<VitalGroundTruth> truths;
};

// y(t_n) = beta e^{j (4 pi / lambda) m(t_n - tau)} a(theta) a(theta)^H x(t_n)
//          + noise,   tau = 2 d / c.
EchoFrame synthesize_echo(const SceneConfig& sc, const BeamformerSet& bf,
                          const PatientEchoState& st,
                          const VitalGroundTruth& vt, const EchoWindow& win,
                          RngStream& rng, int patient_index = 0);

EchoFrameSet synthesize_echo_multi(const SceneConfig& sc,
                                   const BeamformerSet& bf,
                                   const std::vector<PatientEchoState>& states,
                                   const std::vector<VitalGroundTruth>& truths,
                                   const EchoWindow& win, RngStream& rng);

// Expected received power h^H R_x h + sigma2 at a receiver with channel h.
double received_power(const VecC& h, const BeamformerSet& bf, double sigma2);

// CSV dump of a frame: columns t,antenna,re,im (comma, LF, one header line).
std::string echo_frame_csv(const EchoFrame& f);

}  // namespace iscsc
