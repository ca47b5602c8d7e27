#pragma once

// Scene description, deterministic RNG streams, array manifold and channel
// synthesis for a service robot with an N-element half-wavelength ULA serving
// K medical devices (communication) and L patients (sensing targets that also
// act as potential eavesdroppers).

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace iscsc {

using cd = std::complex<double>;
using VecC = Eigen::VectorXcd;
using MatC = Eigen::MatrixXcd;
using VecD = Eigen::VectorXd;
using MatD = Eigen::MatrixXd;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }
inline double dbm2watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double watt2dbm(double w) { return 10.0 * std::log10(w / 1e-3); }
inline double db2lin(double db) { return std::pow(10.0, db / 10.0); }

// ---------------------------------------------------------------------------
// Deterministic counter-based RNG: xoshiro256++ seeded from (seed, stream_id)
// via SplitMix64.  Identical (seed, stream_id) gives an identical draw
// sequence regardless of call site or thread, which is what makes multi-trial
// experiments reproducible under any scheduling.
// ---------------------------------------------------------------------------
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view stream_id);

  std::uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double normal();                         // N(0, 1)
  cd cnormal();                            // CN(0, 1): Re,Im ~ N(0, 1/2)
  int uniform_int(int n);                  // {0, ..., n-1}

 private:
  std::uint64_t s_[4];
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// ---------------------------------------------------------------------------
// Scene configuration.  Angles are radians internally; JSON I/O uses degrees.
// Powers are watts internally; JSON I/O uses dBm where noted.
// ---------------------------------------------------------------------------
struct DeviceSpec {
  double angle = 0.0;     // rad, in (-pi/2, pi/2)
  double distance = 1.0;  // m
};

struct PatientSpec {
  double angle = 0.0;       // rad
  double distance = 1.0;    // m
  double speed = 0.1;       // m/s, candidate movement speed
  double resp_hz = 0.25;    // ground-truth respiration frequency
  double heart_hz = 1.2;    // ground-truth heartbeat frequency
  double resp_amp = 5e-3;   // m, chest displacement amplitude (respiration)
  double heart_amp = 1e-3;  // m, chest displacement amplitude (heartbeat)
};

struct SemanticConfig {
  double iota = 1.1;          // average semantic symbols per word
  double extraction_coeff = 0.01;  // F in P_comp = sum_k -F ln(rho_k), watts
  bool log2_precisions = false;    // base of the n-gram precision log in rho_LB
  // Lower bounds of the extraction ratios; empty means "sample from the
  // configured dataset-like distribution" (see sample_rho_lower_bounds).
  std::vector<double> rho_lb;
};

struct SceneConfig {
  int n_antennas = 8;
  double wavelength = kSpeedOfLight / 77e9;  // m (77 GHz carrier)
  double power_budget = 0.1;                 // W (20 dBm)
  double sigma2_c = 1e-9;                    // W, device receiver noise (-60 dBm)
  double sigma2_r = 1e-9;                    // W, patient receiver noise (-60 dBm)
  double sigma2_e = 1e-3;                    // echo noise variance at the robot
  double slot_duration = 0.1;                // s
  int snapshots_per_slot = 1000;             // symbols entering the sensing FIM
  double reference_gain = 1.0;               // g0, amplitude gain at 1 m
  double pathloss_exponent = 1.0;            // alpha = g0/d^e, beta = g0^2/d^e
  double rician_k_device_db = 10.0;
  double rician_k_patient_db = 10.0;
  // Channel uncertainty radii, devices first then patients (size K+L).
  std::vector<double> epsilon;
  std::vector<DeviceSpec> devices;
  std::vector<PatientSpec> patients;
  SemanticConfig semantic;
  std::uint64_t seed = 1234;

  int num_devices() const { return static_cast<int>(devices.size()); }
  int num_patients() const { return static_cast<int>(patients.size()); }
  double eps_device(int k) const { return epsilon.at(k); }
  double eps_patient(int l) const { return epsilon.at(devices.size() + l); }
};

// Returns a list of human-readable problems; empty means the scene is valid.
std::vector<std::string> validate_scene(const SceneConfig& sc);
// Throws std::invalid_argument with the first problem if the scene is invalid.
void ensure_valid(const SceneConfig& sc);

// JSON round trip.  Angles in degrees and powers in dBm at the boundary.
// Unknown keys are rejected (the exception message names the offending key).
SceneConfig scene_from_json_text(const std::string& text);
SceneConfig load_scene(const std::string& path);
std::string scene_to_json_text(const SceneConfig& sc);
void save_scene(const SceneConfig& sc, const std::string& path);

// ---------------------------------------------------------------------------
// Array manifold (half-wavelength ULA, phase reference at element 0):
//   a_m(theta)    = exp(j pi m sin theta),            m = 0..N-1
//   da_m/dtheta   = j pi m cos(theta) a_m(theta)
// ---------------------------------------------------------------------------
VecC steering(double theta, int n);
VecC steering_derivative(double theta, int n);

// One-way amplitude gain alpha and round-trip echo amplitude beta at range d.
// beta follows the same 1/d law as the tracking state model so that the
// propagated state stays consistent with the synthesized echo.
double pathloss_alpha(const SceneConfig& sc, double d);
double pathloss_beta(const SceneConfig& sc, double d);

struct Channel {
  VecC h;            // realized channel
  double alpha = 0;  // LoS amplitude
  double nlos_norm = 0;  // norm of the realized NLoS component
};

struct SceneChannels {
  std::vector<Channel> devices;
  std::vector<Channel> patients;
};

// Devices: Rician with the configured K-factor, E||h||^2 = alpha^2 N.
// Patients: h = alpha a(theta) + alpha/sqrt(K_p) g with g ~ CN(0, I); the
// realized NLoS norm is recorded so robustness radii can be sanity-checked.
SceneChannels make_channels(const SceneConfig& sc, RngStream& rng);

// Estimated (robot-side) channel at a predicted patient/device state: pure
// LoS at the predicted angle and range.  The uncertainty radius covers both
// the NLoS part and the prediction error.
VecC nominal_channel(const SceneConfig& sc, double theta, double distance);

// Uniform draw from the complex epsilon-ball { delta : ||delta|| <= eps }.
VecC sample_uncertainty(double eps, int n, RngStream& rng);

// Stock demonstration scene: 8-antenna robot, two devices at (-30 deg, 8 m)
// and (20 deg, 4 m), three patients at (-35 deg, 2 m), (5 deg, 5 m),
// (25 deg, 1 m); 20 dBm budget, -60 dBm receiver noise.
SceneConfig example_scene();

}  // namespace iscsc
