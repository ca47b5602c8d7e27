#pragma once

// Dense conic-program solver for problems of the form
//
//   minimize    c' x
//   subject to  A x + s = b,   s in K,
//
// where K is an ordered product of zero, nonnegative, second-order,
// semidefinite (scaled lower-triangle storage) and exponential cones.
// The method is operator splitting on the homogeneous self-dual embedding:
// each iteration alternates a cached linear solve with a Euclidean
// projection onto the cone product, so the only per-cone code needed is
// the projection.

#include <string>
#include <vector>

#include "iscsc/scene.hpp"

namespace iscsc {

enum class ConeKind { zero, nonneg, soc, psd, exp_primal };

struct ConeBlock {
  ConeKind kind = ConeKind::zero;
  // Rows occupied by the block: the cone dimension for zero/nonneg/soc,
  // side*(side+1)/2 for psd (side stored here), always 3 for exp.
  int dim = 0;

  int rows() const;
};

// Scaled lower-triangle vectorization of a symmetric matrix: column-major
// lower triangle with off-diagonal entries multiplied by sqrt(2), so that
// svec(S)' svec(T) equals the Frobenius inner product <S, T>.
int svec_dim(int side);
VecD svec(const MatD& s);
MatD unsvec(const VecD& v, int side);

struct ConeProblem {
  VecD c;
  MatD a;
  VecD b;
  std::vector<ConeBlock> cones;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_rows() const { return static_cast<int>(b.size()); }
  void validate() const;  // throws std::invalid_argument on bad layout
};

// Blockwise Euclidean projection onto K and onto its dual cone.
VecD project_cones(const VecD& s, const std::vector<ConeBlock>& cones);
VecD project_dual_cones(const VecD& y, const std::vector<ConeBlock>& cones);

// Single-block projections, exposed for tests.
void project_soc(Eigen::Ref<VecD> v);
void project_psd(Eigen::Ref<VecD> v, int side);
void project_exp(Eigen::Ref<VecD> v);
bool in_exp_cone(double x, double y, double z, double slack = 0.0);
bool in_exp_dual_cone(double u, double v, double w, double slack = 0.0);

struct SolverSettings {
  double tol = 1e-6;
  int max_iters = 50000;
  double alpha = 1.5;      // over-relaxation
  bool equilibrate = true; // Ruiz row/column scaling
  int check_every = 25;    // termination-check cadence
  // Metric weights of the splitting: the linear step solves with
  // diag(rho_x I_n, I_m / scale, 1).  With adaptive_scale on, scale follows
  // the primal/dual residual ratio (with hysteresis and a refactorization),
  // which rescues problems where one residual stalls far above the other.
  double rho_x = 0.01;
  double scale = 1.0;
  bool adaptive_scale = true;
  // Anderson-acceleration memory for the fixed-point iteration (0 disables).
  int aa_memory = 10;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iters };

const char* status_name(SolveStatus s);

struct SolveReport {
  SolveStatus status = SolveStatus::max_iters;
  VecD x, y, s;
  double obj = 0.0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double gap = 0.0;
  int iterations = 0;
  double final_scale = 1.0;  // metric scale after adaptation, for reuse
};

struct WarmStart {
  VecD x, y, s;
  // Metric scale to resume under; 0 defers to SolverSettings.scale.  Passing
  // the previous report's final_scale skips re-discovering it.
  double scale = 0.0;
};

SolveReport solve(const ConeProblem& p, const SolverSettings& settings = {},
                  const WarmStart* warm = nullptr);

// Plain-text sparse-triplet dump for offline cross-checking.
std::string problem_to_text(const ConeProblem& p);

}  // namespace iscsc
