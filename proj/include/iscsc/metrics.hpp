#pragma once

// Semantic-communication and sensing performance metrics: extraction-ratio
// lower bounds, SINRs, semantic rates, secrecy rates, power accounting, and
// the angle-estimation Fisher information / CRB.

#include <vector>

#include "iscsc/scene.hpp"
#include "iscsc/waveform.hpp"

namespace iscsc {

// ---------------------------------------------------------------------------
// Semantic extraction ratio
// ---------------------------------------------------------------------------

// BLEU-style quality triple: a lower bound Q on the achievable score,
// n-gram weights w (sum 1) and per-n-gram precisions p in (0, 1].
struct SemanticQuality {
  double bleu = 0.5;
  VecD weights;
  VecD precisions;
};

// rho_LB = 1 / (1 - ln Q + sum_g w_g ln p_g).  With log2_precisions the
// precision term uses log base 2 instead of the natural log.
double rho_lower_bound(const SemanticQuality& q, bool log2_precisions = false);

// Dataset-like draws whose implied rho_LB population has mean ~0.084 and
// standard deviation ~0.089.
SemanticQuality sample_semantic_quality(RngStream& rng);

// One lower bound per device: configured values if present, sampled otherwise.
std::vector<double> device_rho_lower_bounds(const SceneConfig& sc, RngStream& rng);

// Semantic rate S = (iota / rho) log2(1 + gamma).
double semantic_rate(double rho, double iota, double gamma);

// Computing power sum_k -F ln(rho_k).
double computing_power(const std::vector<double>& rho, double f_coeff);

// ---------------------------------------------------------------------------
// SINRs and secrecy rates
// ---------------------------------------------------------------------------

// Device k:  gamma_k = h_k^H W_k h_k /
//            (sum_{k' != k} h_k^H W_k' h_k + h_k^H (sum_l R_l) h_k + sigma2)
VecD device_sinrs(const std::vector<VecC>& h_devices, const BeamformerSet& bf,
                  double sigma2_c);

// Patient l overhearing device k's stream; rows l, columns k.
MatD patient_sinrs(const std::vector<VecC>& h_patients, const BeamformerSet& bf,
                   double sigma2_r);

// SSR_k = max(min_l (S_k - S_{l|k}), 0); with no patients the min is empty
// and the secrecy rate equals the device rate itself.
double ssr_from_rates(double s_device, const VecD& s_eavesdroppers);

struct SecrecySummary {
  VecD device_rates;  // S_k
  MatD eaves_rates;   // S_{l|k}
  VecD ssr;           // per device
  double min_ssr = 0;
};

SecrecySummary secrecy_rates(const std::vector<VecC>& h_devices,
                             const std::vector<VecC>& h_patients,
                             const BeamformerSet& bf,
                             const std::vector<double>& rho,
                             const SceneConfig& sc);

// ---------------------------------------------------------------------------
// Fisher information and CRB for angle estimation from patient echoes
// ---------------------------------------------------------------------------

// Real 3x3 information matrix over (theta, Re beta, Im beta) with
//   B = a a^H,  Bd = da a^H + a da^H,  t = Tr(B R_x Bd^H):
//   J_tt = (2 T |beta|^2 / sigma2_e) Tr(Bd R_x Bd^H)
//   J_tb = (2 T / sigma2_e) [Re(conj(beta) t), -Im(conj(beta) t)]
//   J_bb = (2 T / sigma2_e) Tr(B R_x B^H) I_2
struct FimResult {
  MatD j = MatD::Zero(3, 3);
  double crb_theta = 0;  // [J^-1]_11 via the Schur complement
  bool valid = false;    // false when the information in theta is zero
};

FimResult fim_crb(const MatC& rx, double theta, cd beta, int snapshots,
                  double sigma2_e);

// Linear-in-R_x coefficients of the entries of J (used by the optimizer to
// write the sensing-accuracy constraint as an LMI).  Coefficient vectors are
// over the Hermitian parametrization of R_x: N diagonal entries, then for
// each column-major upper pair (i < j) the real and imaginary parts.
struct FimCoeffs {
  VecD j_tt;       // coefficients of J_tt
  MatD j_tb;       // 2 rows: coefficients of J_tb[0], J_tb[1]
  VecD j_bb;       // coefficients of the scalar multiplying I_2
};

FimCoeffs fim_coeffs(int n, double theta, cd beta, int snapshots,
                     double sigma2_e);

// Value of a coefficient vector at a concrete Hermitian matrix.
double eval_hermitian_form(const VecD& coeffs, const MatC& m);

// ---------------------------------------------------------------------------
// Error aggregation
// ---------------------------------------------------------------------------

double rmse(const std::vector<double>& errors);

// Squared errors laid out slots x trials: per-slot RMSE across trials,
// then averaged over slots.
double time_averaged_rmse(const MatD& squared_errors);

}  // namespace iscsc
