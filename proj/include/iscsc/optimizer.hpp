#pragma once

// Joint beamforming and semantic-extraction design.  The nonconvex
// secrecy/sensing trade-off is solved per slot by successive convex
// approximation: robust quadratic-form bounds turn the rates into
// exponential-cone rows, the sensing accuracy enters as a Fisher-information
// LMI, and the resulting conic program alternates with a water-filling style
// update of the extraction ratios.  Gaussian randomization recovers rank-one
// transmit beams, and an episode driver couples the whole thing to the IMM
// tracker for predictive beamforming.

#include <cstdint>
#include <string>
#include <vector>

#include "iscsc/conic.hpp"
#include "iscsc/metrics.hpp"
#include "iscsc/scene.hpp"
#include "iscsc/tracking.hpp"
#include "iscsc/waveform.hpp"

namespace iscsc {

// ---------------------------------------------------------------------------
// Robust bounds of the quadratic forms h^H M h over the channel ball
// ||h - h_hat|| <= eps
// ---------------------------------------------------------------------------

struct TermBound {
  double lower = 0.0;  // h_hat^H M h_hat - 2 eps ||M h_hat||
  double upper = 0.0;  // h_hat^H M h_hat + 2 eps ||M h_hat||
};

TermBound quad_form_bounds(const VecC& h_hat, double eps, const MatC& m);

// Bounds for every aggregate the secrecy terms need at one receiver: the full
// communication sum, the sum excluding each device's own beam, and the
// sensing sum.
struct TermBounds {
  TermBound w_all;
  TermBound r_all;
  std::vector<TermBound> w_excl;  // index k: sum over k' != k
};

TermBounds term_bounds(const VecC& h_hat, double eps,
                       const std::vector<MatC>& w_list,
                       const std::vector<MatC>& r_list);

// ---------------------------------------------------------------------------
// Design-time channel view: estimated channels plus uncertainty radii, with
// patient angles/amplitudes taken from the tracker's predictions.
// ---------------------------------------------------------------------------

struct DesignChannels {
  std::vector<VecC> h_dev;  // K estimated device channels
  std::vector<VecC> h_pat;  // L estimated patient channels
  VecD eps_dev;             // K uncertainty radii
  VecD eps_pat;             // L
  VecD theta_pat;           // rad, angles the sensing LMI points at
  VecD beta_pat;            // echo amplitudes at those angles

  int num_devices() const { return static_cast<int>(h_dev.size()); }
  int num_patients() const { return static_cast<int>(h_pat.size()); }
};

// Nominal line-of-sight channels at the configured device positions and the
// given patient states (defaults: configured positions and path-loss betas).
DesignChannels design_channels(const SceneConfig& sc);
DesignChannels design_channels(const SceneConfig& sc, const VecD& theta_pat,
                               const VecD& dist_pat, const VecD& beta_pat);

// ---------------------------------------------------------------------------
// SCA state and configuration
// ---------------------------------------------------------------------------

struct ScaConfig {
  double kappa1 = 0.5;          // weight of the worst-case secrecy rate
  double kappa2 = 0.5;          // weight of the (normalized) sensing term
  double anchor_tol_b = 1e-3;   // inner-loop stop on |b_hat change|
  double anchor_tol_c = 1e-3;   // inner-loop stop on |c_hat change|
  double beam_tol_w = 1e-3;     // outer-loop stop on ||W change||_F
  double beam_tol_r = 1e-3;     // outer-loop stop on ||R change||_F
  int max_sca_iters = 6;        // inner (anchor) iteration cap
  int max_outer_iters = 30;     // beam/extraction alternation cap
  double crb_norm = 0.0;        // 0: use the initial-point sum of CRBs
  double solver_tol = 1e-5;
  int solver_max_iters = 200000;
  // Total conic iterations one inner chain may spend.  The climb toward the
  // fixed point re-anchors the subproblem many times; once the budget runs
  // out the chain stops and keeps its incumbent, which stays fully feasible.
  int solver_iter_budget = 150000;
  // First-solve metric ratio; pushing primal feasibility hard early pays off
  // on these instances.  Warm-started solves resume at the settled value.
  double solver_scale0 = 3000.0;
  // The alternation cannot move power between transmission and computing
  // once the power row binds, so the initial extraction ratios fix the
  // split.  They are set to max(rho_LB, exp(-share P_t / (K F))).
  double compute_budget_share = 0.5;
  int n_randomization = 100;
  bool semantic = true;         // false pins rho = 1 (conventional link)
};

struct ScaState {
  std::vector<MatC> w;      // communication covariances
  std::vector<MatC> r;      // sensing covariances
  VecD rho;                 // extraction ratios, in [rho_LB, 1]
  VecD rho_lb;
  VecD b_hat;               // K anchors, ln of the interference upper bound
  MatD c_hat;               // L x K anchors, ln of the leakage upper bound
  double lambda = 0.0;      // worst-case secrecy rate variable
  VecD u;                   // L, lower bounds on the inverse CRBs
  VecD t;                   // L, epigraph variables t_l >= 1 / u_l
  VecD a, b;                // K each, log-rate auxiliaries
  MatD c, d;                // L x K log-leakage auxiliaries
  VecD fim_scale;           // per-patient scaling of the angle-information block
  VecD fim_scale_b;         // per-patient scaling of the amplitude block
  double crb_norm = 1.0;    // objective normalization of the sensing term
  double objective = 0.0;   // kappa1 lambda - kappa2 sum t / crb_norm
  int sca_iterations = 0;
  int outer_iterations = 0;
  int solver_iterations = 0;  // accumulated conic iterations
  // Cleared when an inner chain ends with no usable solve at all; a chain
  // that accepted iterates and then ran out of budget keeps it set.
  bool solver_ok = true;
  ScaConfig cfg;
  // Last conic solution, reused to warm-start the next solve (the problems
  // along the iteration chain differ only in coefficients).
  WarmStart warm;
  bool have_warm = false;
};

// Starting point: matched rank-one W, steered rank-one R, half the budget in
// each family, extraction ratios at their feasible floor.
ScaState init_state(const SceneConfig& sc, const DesignChannels& ch,
                    const ScaConfig& cfg, RngStream* rho_rng = nullptr);

// ---------------------------------------------------------------------------
// Subproblem 1: beamforming with fixed extraction ratios, as a cone program
// ---------------------------------------------------------------------------

// Variable offsets into the flattened conic vector, plus the block inventory
// the structural tests count.
struct Sp1Layout {
  int n = 0, k = 0, l = 0;   // antennas, devices, patients
  int nn = 0;                // Hermitian parameter count per matrix (n^2)
  int off_w = 0, off_r = 0;
  int off_lambda = 0, off_u = 0, off_t = 0;
  int off_a = 0, off_b = 0, off_c = 0, off_d = 0;
  // SOC norm variables: ||sum W h_k||, ||sum_excl W h_k||, ||sum R h_k|| per
  // device, then ||sum W h_l||, ||sum R h_l|| per patient, then the per-pair
  // ||sum_excl W h_l||.
  int off_nw_all = 0, off_nw_excl = 0, off_nr = 0;
  int off_mw_all = 0, off_mr = 0, off_mw_excl = 0;
  int num_vars = 0;
  int nonneg_rows = 0, soc_blocks = 0, psd_blocks = 0, exp_blocks = 0;

  int pair(int l_idx, int k_idx) const { return k_idx * l + l_idx; }
};

struct Sp1Problem {
  ConeProblem problem;
  Sp1Layout layout;
};

// Throws std::domain_error when P_t + F sum ln rho < 0 (the configured
// extraction ratios alone exceed the power budget).
Sp1Problem build_subproblem1(const ScaState& st, const SceneConfig& sc,
                             const DesignChannels& ch);

// Copies a solver point back into the state (beams, auxiliaries, objective).
void extract_solution(const SolveReport& rep, const Sp1Layout& lay,
                      ScaState* st);

// Inner SCA loop: solve, repair the solver point to exact feasibility
// (covariances clipped onto the semidefinite cone, power rescaled into the
// budget, auxiliaries recomputed from the repaired beams), refresh the
// anchors, and repeat until the anchors settle or the iteration budget runs
// out.  Accepts an iterate only if the objective does not decrease (1e-8
// slack).  A chain that accepted nothing clears solver_ok; otherwise the
// incumbent is returned as-is.  Solves reuse the state's last solution as a
// warm start while the anchors move slowly.
ScaState sca_iterate(const ScaState& st, const SceneConfig& sc,
                     const DesignChannels& ch);

// ---------------------------------------------------------------------------
// Subproblem 2: extraction ratios by bisection on the budget multiplier
// ---------------------------------------------------------------------------

struct RhoUpdate {
  VecD rho;
  double eta = 0.0;        // budget multiplier (0 when the budget is slack)
  bool saturated = false;  // true when the budget did not bind
};

// rho_k(eta) = clamp(iota D_k / (eta F), rho_lb_k, rho_ub_k), with eta
// bisected until the computing power sum -F ln rho matches p_rem to 1e-9 W.
// F = 0 or D_k = 0 spend nothing: the ratio drops to its lower bound only
// when that costs no budget, and a zero-rate device keeps rho = 1.
RhoUpdate update_rho(const VecD& d_k, double p_rem, double f_coeff,
                     double iota, const VecD& rho_lb, const VecD& rho_ub);

// Secrecy exponents D_k = (a_k - b_k + min_l (d - c)_{l|k}) log2 e from the
// current auxiliaries; the worst eavesdropper counts.
VecD secrecy_exponents(const ScaState& st);

// ---------------------------------------------------------------------------
// Objective evaluation and feasibility replay at a concrete design
// ---------------------------------------------------------------------------

struct DesignEval {
  VecD ssr;            // per device, worst-case secrecy rate, floored at 0
  double min_ssr = 0.0;
  VecD crb;            // per patient, from the Fisher information at theta_pat
  double sum_crb = 0.0;
  double objective = 0.0;  // kappa1 min_ssr - kappa2 sum_crb / crb_norm
};

DesignEval evaluate_design(const std::vector<MatC>& w,
                           const std::vector<MatC>& r, const VecD& rho,
                           const SceneConfig& sc, const DesignChannels& ch,
                           double crb_norm, double kappa1, double kappa2);

// Worst violation of the original constraints at the state: extraction-ratio
// bounds, power budget, matrix positivity, the sensing LMI at u, and the
// secrecy chain with the true (not linearized) term values.  All entries are
// relative to their natural scales; feasible states stay below ~1e-6.
struct ReplayReport {
  double rho_bounds = 0.0;
  double power = 0.0;
  double psd = 0.0;      // most negative eigenvalue across W and R, negated
  double fim = 0.0;      // most negative eigenvalue of the LMI at u
  double secrecy = 0.0;  // lambda minus the true secrecy bound, positive part
  double exp_rows = 0.0; // worst violation of the term/exponential links
  double max_violation = 0.0;
};

ReplayReport replay_constraints(const ScaState& st, const SceneConfig& sc,
                                const DesignChannels& ch);

// ---------------------------------------------------------------------------
// Subproblem 3: rank-one recovery
// ---------------------------------------------------------------------------

struct RandomizationResult {
  std::vector<VecC> w;     // rank-one beams, ||w_k||^2 summing to the W power
  BeamformerSet beams;     // w_k w_k^H plus the sensing covariances
  DesignEval eval;         // objective of the returned beams
  DesignEval relaxed;      // objective of the matrix design it started from
  int n_candidates = 0;
};

// Draws candidate beams from the covariances, rescales each set to the
// relaxed communication power, and keeps the best under evaluate_design.
// The dominant eigenvectors are always candidate zero, so the result never
// falls below the one-beam truncation.
RandomizationResult gaussian_randomization(const ScaState& st,
                                           const SceneConfig& sc,
                                           const DesignChannels& ch,
                                           int n_samples, RngStream& rng);

// ---------------------------------------------------------------------------
// Whole-slot driver: SCA + rho alternation + randomization
// ---------------------------------------------------------------------------

struct OptimizeResult {
  ScaState state;
  RandomizationResult rankone;
  int outer_iterations = 0;
};

OptimizeResult optimize_beams(const SceneConfig& sc, const DesignChannels& ch,
                              const ScaConfig& cfg, RngStream& rng);

// ---------------------------------------------------------------------------
// Episode: predictive beamforming against the IMM tracker
// ---------------------------------------------------------------------------

struct SlotRecord {
  int slot = 0;
  VecD theta_true, d_true;      // per patient
  VecD theta_pred, d_pred;      // fused one-step predictions
  VecD theta_est, d_est;        // fused posteriors after the echo
  VecD rho;                     // per device
  VecD ssr;                     // per device, worst-case
  double min_ssr = 0.0;
  double sum_crb = 0.0;
  double lambda = 0.0;
  double objective = 0.0;
  double power_tx = 0.0;        // Tr(sum W + sum R) of the relaxed design
  double power_comp = 0.0;      // -F sum ln rho
  int solver_iterations = 0;
  bool solver_ok = true;
};

struct Episode {
  SceneConfig scene;
  TrackingConfig track;
  ScaConfig cfg;
  std::vector<TruthSim> truths;     // per patient
  std::vector<ImmState> trackers;   // per patient
  BeamformerSet beams;              // last applied (rank-one) design
  ScaState state;                   // last accepted SCA state
  std::vector<SlotRecord> log;
  std::uint64_t seed = 0;
  int slot = 0;
  bool initialized = false;
};

Episode make_episode(const SceneConfig& sc, const TrackingConfig& track,
                     const ScaConfig& cfg, std::uint64_t seed);

// One slot: predict every tracker, design beams at the predictions, apply
// them, then measure each patient at the true state with an SNR scaled by
// the sensing power the design actually puts on that patient, and update the
// trackers.  On solver failure the previous beams are reused for the slot.
SlotRecord algorithm1_step(Episode* ep);

std::vector<SlotRecord> run_episode(Episode* ep, int n_slots);

std::string episode_csv(const Episode& ep);

}  // namespace iscsc
