#pragma once

// Small shared linear-algebra helpers for Hermitian matrices.

#include <Eigen/Dense>

#include "iscsc/scene.hpp"

namespace iscsc {

// Force exact Hermitian symmetry: (M + M^H)/2.
inline MatC hermitize(const MatC& m) { return 0.5 * (m + m.adjoint()); }

// Smallest eigenvalue of the Hermitian part.
double min_eigenvalue(const MatC& m);

bool is_hermitian(const MatC& m, double tol = 1e-10);
bool is_hermitian_psd(const MatC& m, double tol = 1e-10);

// Factor F with F F^H = M for Hermitian PSD M (eigenvalue clipping at 0).
MatC psd_factor(const MatC& m);

// Realification of a complex Hermitian matrix:
//   [ Re(M)  -Im(M) ]
//   [ Im(M)   Re(M) ]
// is real symmetric, and is PSD exactly when M is PSD.
MatD realify(const MatC& m);

// Canonical real parametrization of an N x N Hermitian matrix: N diagonal
// entries first, then for each column j > i (column-major pair order) the
// real and imaginary part of M_ij.  Total n*n parameters.
inline int herm_param_count(int n) { return n * n; }
VecD herm_to_params(const MatC& m);
MatC params_to_herm(const VecD& p, int n);

// Coefficients of the real-linear functionals M -> Re Tr(A M) and
// M -> Im Tr(A M) over the parametrization above.
VecD trace_form_coeffs(const MatC& a);
std::pair<VecD, VecD> trace_form_coeffs_complex(const MatC& a);

}  // namespace iscsc
