#include "iscsc/linalg.hpp"

namespace iscsc {

double min_eigenvalue(const MatC& m) {
  Eigen::SelfAdjointEigenSolver<MatC> es(hermitize(m));
  return es.eigenvalues().minCoeff();
}

bool is_hermitian(const MatC& m, double tol) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool is_hermitian_psd(const MatC& m, double tol) {
  if (!is_hermitian(m, tol)) return false;
  return min_eigenvalue(m) >= -tol;
}

MatC psd_factor(const MatC& m) {
  Eigen::SelfAdjointEigenSolver<MatC> es(hermitize(m));
  VecD lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

MatD realify(const MatC& m) {
  const int n = static_cast<int>(m.rows());
  MatD r(2 * n, 2 * n);
  r.topLeftCorner(n, n) = m.real();
  r.topRightCorner(n, n) = -m.imag();
  r.bottomLeftCorner(n, n) = m.imag();
  r.bottomRightCorner(n, n) = m.real();
  return r;
}

VecD herm_to_params(const MatC& m) {
  const int n = static_cast<int>(m.rows());
  VecD p(herm_param_count(n));
  int idx = 0;
  for (int i = 0; i < n; ++i) p[idx++] = m(i, i).real();
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i) {
      p[idx++] = m(i, j).real();
      p[idx++] = m(i, j).imag();
    }
  return p;
}

MatC params_to_herm(const VecD& p, int n) {
  MatC m(n, n);
  int idx = 0;
  for (int i = 0; i < n; ++i) m(i, i) = p[idx++];
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i) {
      const double re = p[idx++];
      const double im = p[idx++];
      m(i, j) = cd(re, im);
      m(j, i) = cd(re, -im);
    }
  return m;
}

std::pair<VecD, VecD> trace_form_coeffs_complex(const MatC& a) {
  const int n = static_cast<int>(a.rows());
  VecD re(herm_param_count(n)), im(herm_param_count(n));
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    re[idx] = a(i, i).real();
    im[idx] = a(i, i).imag();
    ++idx;
  }
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i) {
      // Tr(A M) collects A_ji M_ij + A_ij M_ji with M_ij = x + iy, M_ji = x - iy.
      const cd sum = a(i, j) + a(j, i);
      const cd dif = cd(0, 1) * (a(j, i) - a(i, j));
      re[idx] = sum.real();
      im[idx] = sum.imag();
      ++idx;
      re[idx] = dif.real();
      im[idx] = dif.imag();
      ++idx;
    }
  return {re, im};
}

VecD trace_form_coeffs(const MatC& a) {
  return trace_form_coeffs_complex(a).first;
}

}  // namespace iscsc
