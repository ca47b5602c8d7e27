#include "iscsc/conic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace iscsc {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

int ConeBlock::rows() const {
  switch (kind) {
    case ConeKind::zero:
    case ConeKind::nonneg:
    case ConeKind::soc:
      return dim;
    case ConeKind::psd:
      return svec_dim(dim);
    case ConeKind::exp_primal:
      return 3;
  }
  return 0;
}

int svec_dim(int side) { return side * (side + 1) / 2; }

VecD svec(const MatD& s) {
  const int n = static_cast<int>(s.rows());
  VecD v(svec_dim(n));
  int k = 0;
  for (int j = 0; j < n; ++j) {
    v[k++] = s(j, j);
    for (int i = j + 1; i < n; ++i) v[k++] = kSqrt2 * s(i, j);
  }
  return v;
}

MatD unsvec(const VecD& v, int side) {
  MatD s(side, side);
  int k = 0;
  for (int j = 0; j < side; ++j) {
    s(j, j) = v[k++];
    for (int i = j + 1; i < side; ++i) {
      s(i, j) = v[k] / kSqrt2;
      s(j, i) = s(i, j);
      ++k;
    }
  }
  return s;
}

void ConeProblem::validate() const {
  if (a.rows() != b.size() || a.cols() != c.size())
    throw std::invalid_argument("constraint matrix shape does not match b/c");
  int rows = 0;
  for (const auto& blk : cones) {
    if (blk.dim <= 0) throw std::invalid_argument("cone block with nonpositive size");
    rows += blk.rows();
  }
  if (rows != b.size())
    throw std::invalid_argument("cone block sizes do not sum to the row count");
}

void project_soc(Eigen::Ref<VecD> v) {
  const int d = static_cast<int>(v.size());
  const double t = v[0];
  const double nz = d > 1 ? v.tail(d - 1).norm() : 0.0;
  if (nz <= t) return;
  if (nz <= -t) {
    v.setZero();
    return;
  }
  const double coef = 0.5 * (1.0 + t / nz);
  v[0] = coef * nz;
  v.tail(d - 1) *= coef;
}

void project_psd(Eigen::Ref<VecD> v, int side) {
  if (side == 1) {
    v[0] = std::max(v[0], 0.0);
    return;
  }
  // Hot path inside the solver loop: reuse workspaces across calls and try a
  // Cholesky first, which certifies an already-definite block at a fraction
  // of the eigensolver cost.
  thread_local MatD s, tmp;
  thread_local VecD lam;
  thread_local Eigen::LLT<MatD> llt;
  thread_local Eigen::SelfAdjointEigenSolver<MatD> es;
  s.resize(side, side);
  int k = 0;
  for (int j = 0; j < side; ++j) {
    s(j, j) = v[k++];
    for (int i = j + 1; i < side; ++i) {
      s(i, j) = v[k] / kSqrt2;
      s(j, i) = s(i, j);
      ++k;
    }
  }
  if (side > 3) {
    llt.compute(s);
    if (llt.info() == Eigen::Success) return;
  }
  if (side <= 3)
    es.computeDirect(s);
  else
    es.compute(s);
  if (es.eigenvalues().minCoeff() >= 0.0) return;
  lam = es.eigenvalues().cwiseMax(0.0);
  tmp.noalias() = es.eigenvectors() * lam.asDiagonal();
  s.noalias() = tmp * es.eigenvectors().transpose();
  k = 0;
  for (int j = 0; j < side; ++j) {
    v[k++] = s(j, j);
    for (int i = j + 1; i < side; ++i) v[k++] = kSqrt2 * s(i, j);
  }
}

bool in_exp_cone(double x, double y, double z, double slack) {
  if (y > 0.0)
    return z > 0.0 && std::log(z) + slack >= std::log(y) + x / y;
  if (y == 0.0) return x <= slack && z >= -slack;
  return false;
}

bool in_exp_dual_cone(double u, double v, double w, double slack) {
  // dual cone: {u < 0, w >= -u e^{v/u - 1}} plus the face {u = 0, v,w >= 0}
  if (u < 0.0)
    return w > 0.0 ? std::log(w) + slack >= std::log(-u) + v / u - 1.0
                   : w >= -slack && std::log(-u) + v / u - 1.0 <= slack;
  if (u <= slack) return v >= -slack && w >= -slack;
  return false;
}

namespace {

// Projection onto the curved part of the exponential-cone boundary. The
// optimality system for projecting (r, s, t) reduces to a root-find in
// alpha = x/y:
//   y(alpha) = (s - r + r*alpha) / (alpha^2 - alpha + 1)
//   F(alpha) = y e^alpha - t - (r - alpha y) e^{-alpha}
// The projected point is (alpha*y, y, y e^alpha).
struct ExpRoot {
  double x = 0, y = 0, z = 0;
  bool valid = false;
};

double exp_f(double alpha, double r, double s, double t, double* y_out) {
  const double denom = alpha * alpha - alpha + 1.0;
  const double y = (s - r + r * alpha) / denom;
  *y_out = y;
  const double ea = std::exp(alpha);
  return y * ea - t - (r - alpha * y) / ea;
}

ExpRoot solve_exp_boundary(double r, double s, double t, double lo, double hi) {
  ExpRoot out;
  double ylo, yhi;
  double flo = exp_f(lo, r, s, t, &ylo);
  double fhi = exp_f(hi, r, s, t, &yhi);
  if (!(flo * fhi <= 0.0)) return out;
  // Illinois-damped regula falsi with a bisection safety net.
  double side = 0.0;
  for (int it = 0; it < 200; ++it) {
    double mid = (std::abs(fhi - flo) > 1e-300)
                     ? (lo * fhi - hi * flo) / (fhi - flo)
                     : 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
    double ym;
    const double fm = exp_f(mid, r, s, t, &ym);
    if (fm == 0.0 || hi - lo < 1e-15 * (1.0 + std::abs(lo))) {
      lo = hi = mid;
      flo = fhi = fm;
      break;
    }
    if (flo * fm < 0.0) {
      hi = mid;
      fhi = fm;
      if (side == -1.0) flo *= 0.5;
      side = -1.0;
    } else {
      lo = mid;
      flo = fm;
      if (side == 1.0) fhi *= 0.5;
      side = 1.0;
    }
  }
  const double alpha = 0.5 * (lo + hi);
  double y;
  exp_f(alpha, r, s, t, &y);
  if (!(y > 0.0) || !std::isfinite(y)) return out;
  out.x = alpha * y;
  out.y = y;
  out.z = y * std::exp(alpha);
  out.valid = std::isfinite(out.z);
  return out;
}

}  // namespace

void project_exp(Eigen::Ref<VecD> v) {
  const double scale = v.norm();
  if (scale == 0.0) return;
  // The cone is scale invariant; normalizing keeps the exponentials tame.
  double r = v[0] / scale, s = v[1] / scale, t = v[2] / scale;
  if (in_exp_cone(r, s, t)) return;
  if (in_exp_dual_cone(-r, -s, -t)) {
    v.setZero();
    return;
  }
  if (r <= 0.0 && s <= 0.0) {
    // Projection lands on the face {x <= 0, y = 0, z >= 0}.
    v[1] = 0.0;
    v[2] = std::max(v[2], 0.0);
    return;
  }
  // Scan for sign changes of the boundary condition, refine each bracket
  // and keep the closest valid candidate (plus the face point fallback).
  double best_x = std::min(r, 0.0), best_y = 0.0, best_z = std::max(t, 0.0);
  double best_d = (best_x - r) * (best_x - r) + s * s + (best_z - t) * (best_z - t);
  const double lim = 60.0;
  const int grid = 241;
  double prev_a = -lim, prev_y;
  double prev_f = exp_f(prev_a, r, s, t, &prev_y);
  for (int i = 1; i < grid; ++i) {
    const double a = -lim + 2.0 * lim * i / (grid - 1);
    double ya;
    const double fa = exp_f(a, r, s, t, &ya);
    if (std::isfinite(prev_f) && std::isfinite(fa) && prev_f * fa <= 0.0) {
      const ExpRoot root = solve_exp_boundary(r, s, t, prev_a, a);
      if (root.valid) {
        const double d = (root.x - r) * (root.x - r) + (root.y - s) * (root.y - s) +
                         (root.z - t) * (root.z - t);
        if (d < best_d) {
          best_d = d;
          best_x = root.x;
          best_y = root.y;
          best_z = root.z;
        }
      }
    }
    prev_a = a;
    prev_f = fa;
  }
  v[0] = scale * best_x;
  v[1] = scale * best_y;
  v[2] = scale * best_z;
}

VecD project_cones(const VecD& s, const std::vector<ConeBlock>& cones) {
  VecD out = s;
  int at = 0;
  for (const auto& blk : cones) {
    const int rows = blk.rows();
    auto seg = out.segment(at, rows);
    switch (blk.kind) {
      case ConeKind::zero:
        seg.setZero();
        break;
      case ConeKind::nonneg:
        seg = seg.cwiseMax(0.0);
        break;
      case ConeKind::soc:
        project_soc(seg);
        break;
      case ConeKind::psd:
        project_psd(seg, blk.dim);
        break;
      case ConeKind::exp_primal:
        project_exp(seg);
        break;
    }
    at += rows;
  }
  return out;
}

namespace {

void project_dual_cones_inplace(Eigen::Ref<VecD> out,
                                const std::vector<ConeBlock>& cones) {
  int at = 0;
  for (const auto& blk : cones) {
    const int rows = blk.rows();
    auto seg = out.segment(at, rows);
    switch (blk.kind) {
      case ConeKind::zero:
        break;  // dual of {0} is everything
      case ConeKind::nonneg:
        seg = seg.cwiseMax(0.0);
        break;
      case ConeKind::soc:
        project_soc(seg);
        break;
      case ConeKind::psd:
        project_psd(seg, blk.dim);
        break;
      case ConeKind::exp_primal: {
        // Moreau: proj onto K* of v equals v + proj onto K of -v.
        Eigen::Vector3d neg = -seg;
        project_exp(neg);
        seg += neg;
        break;
      }
    }
    at += rows;
  }
}

}  // namespace

VecD project_dual_cones(const VecD& y, const std::vector<ConeBlock>& cones) {
  VecD out = y;
  project_dual_cones_inplace(out, cones);
  return out;
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iters: return "max_iters";
  }
  return "?";
}

namespace {

// Row/column equilibration. Rows belonging to a multi-row cone block share
// one scale factor so membership in the block's cone is preserved.
struct Scaling {
  VecD d;  // row scales
  VecD e;  // column scales
  double sb = 1.0, sc = 1.0;
};

Scaling equilibrate(MatD& a, VecD& b, VecD& c,
                    const std::vector<ConeBlock>& cones) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  Scaling sc;
  sc.d = VecD::Ones(m);
  sc.e = VecD::Ones(n);
  for (int pass = 0; pass < 10; ++pass) {
    VecD row = a.cwiseAbs().rowwise().maxCoeff();
    int at = 0;
    for (const auto& blk : cones) {
      const int rows = blk.rows();
      if (blk.kind == ConeKind::soc || blk.kind == ConeKind::psd ||
          blk.kind == ConeKind::exp_primal)
        row.segment(at, rows).setConstant(row.segment(at, rows).maxCoeff());
      at += rows;
    }
    VecD col = a.cwiseAbs().colwise().maxCoeff().transpose();
    for (int i = 0; i < m; ++i) {
      const double f = row[i] > 1e-12 ? 1.0 / std::sqrt(row[i]) : 1.0;
      a.row(i) *= f;
      sc.d[i] *= f;
    }
    for (int j = 0; j < n; ++j) {
      const double f = col[j] > 1e-12 ? 1.0 / std::sqrt(col[j]) : 1.0;
      a.col(j) *= f;
      sc.e[j] *= f;
    }
  }
  b = sc.d.asDiagonal() * b;
  c = sc.e.asDiagonal() * c;
  sc.sb = 1.0 / std::max(1.0, b.norm());
  sc.sc = 1.0 / std::max(1.0, c.norm());
  b *= sc.sb;
  c *= sc.sc;
  return sc;
}

}  // namespace

SolveReport solve(const ConeProblem& problem, const SolverSettings& settings,
                  const WarmStart* warm) {
  problem.validate();
  const int n = problem.num_vars();
  const int m = problem.num_rows();

  MatD a = problem.a;
  VecD b = problem.b;
  VecD c = problem.c;
  Scaling scal;
  if (settings.equilibrate) {
    scal = equilibrate(a, b, c, problem.cones);
  } else {
    scal.d = VecD::Ones(m);
    scal.e = VecD::Ones(n);
  }

  // Large systems coming out of the beamforming builder are very sparse
  // (PSD blocks touch one variable per row); iterating with sparse products
  // cuts the per-iteration cost by an order of magnitude there.
  const bool sparse_iter = static_cast<double>(m) * n >= 1e6;
  Eigen::SparseMatrix<double> asp, asp_t, asp0, asp0_t;
  if (sparse_iter) {
    asp = a.sparseView();
    asp_t = asp.transpose();
    asp0 = problem.a.sparseView();
    asp0_t = asp0.transpose();
  }
  const auto amul = [&](const VecD& v) -> VecD {
    return sparse_iter ? VecD(asp * v) : VecD(a * v);
  };
  const auto atmul = [&](const VecD& v) -> VecD {
    return sparse_iter ? VecD(asp_t * v) : VecD(a.transpose() * v);
  };
  const auto amul_to = [&](const VecD& v, VecD& out) {
    if (sparse_iter)
      out.noalias() = asp * v;
    else
      out.noalias() = a * v;
  };
  const auto atmul_to = [&](const VecD& v, VecD& out) {
    if (sparse_iter)
      out.noalias() = asp_t * v;
    else
      out.noalias() = a.transpose() * v;
  };
  const auto amul0 = [&](const VecD& v) -> VecD {
    return sparse_iter ? VecD(asp0 * v) : VecD(problem.a * v);
  };
  const auto atmul0 = [&](const VecD& v) -> VecD {
    return sparse_iter ? VecD(asp0_t * v) : VecD(problem.a.transpose() * v);
  };

  // Cached factorization for the splitting step: applying (M + Q)^{-1} with
  // M = diag(rho_x I, I/scale, 1) reduces to one solve with
  // rho_x I + scale A'A plus a rank-one correction for the tau column.
  const double rho_x = std::max(settings.rho_x, 1e-9);
  double scale = settings.scale;
  if (warm && warm->scale > 0.0) scale = warm->scale;
  scale = std::min(std::max(scale, 1e-6), 1e6);
  const MatD gram = sparse_iter ? MatD(asp_t * asp) : MatD(a.transpose() * a);
  Eigen::LLT<MatD> llt;
  VecD mh_x, mh_y;
  double gamma = 1.0;
  const auto apply_m_inv = [&](const VecD& wx, const VecD& wy, VecD* zx, VecD* zy) {
    // [[rho_x I, A'], [-A, I/scale]] [zx; zy] = [wx; wy]
    *zx = llt.solve(wx - scale * atmul(wy));
    *zy = scale * (wy + amul(*zx));
  };
  const auto factorize = [&]() {
    MatD h = scale * gram;
    h.diagonal().array() += rho_x + 1e-10;
    llt.compute(h);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("factorization of the splitting system failed");
    apply_m_inv(c, b, &mh_x, &mh_y);
    gamma = 1.0 + c.dot(mh_x) + b.dot(mh_y);
  };
  factorize();

  // The splitting is run as a fixed-point iteration in the pre-projection
  // point y = (x, y, tau) with u = Pi(y) and v = u - y; the slack candidate
  // is recovered from the y-block of v.  Layout: [x (n) | y (m) | tau].
  VecD yv = VecD::Zero(n + m + 1);
  yv[n + m] = 1.0;
  if (warm) {
    yv.head(n) = scal.sb * (warm->x.array() / scal.e.array()).matrix();
    const VecD uyw = scal.sc * (warm->y.array() / scal.d.array()).matrix();
    const VecD vsw = scale * scal.sb * (scal.d.asDiagonal() * warm->s);
    yv.segment(n, m) = uyw - vsw;
  }

  SolveReport rep;
  const double bnorm_un = problem.b.norm();
  const double cnorm_un = problem.c.norm();

  const auto unscale_x = [&](const VecD& xs) -> VecD {
    return (scal.e.asDiagonal() * xs) / scal.sb;
  };
  const auto unscale_y = [&](const VecD& ys) -> VecD {
    return (scal.d.asDiagonal() * ys) / scal.sc;
  };
  const auto unscale_s = [&](const VecD& ss) -> VecD {
    return (ss.array() / scal.d.array()).matrix() / scal.sb;
  };

  // One pass of the splitting at the point y: project, solve the linear
  // system at w = 2u - y, and report the displacement g so that the plain
  // update is y + g.  Returns u through the output arguments.  All buffers
  // live outside the lambda so the hot loop never touches the allocator.
  VecD ux = VecD::Zero(n), uy = VecD::Zero(m), vs = VecD::Zero(m);
  VecD wx(n), wy(m), zx(n), zy(m);
  double utau = 0.0;
  const auto fixed_point_step = [&](const VecD& y, VecD* g) {
    ux = y.head(n);
    uy = y.segment(n, m);
    project_dual_cones_inplace(uy, problem.cones);
    utau = std::max(y[n + m], 0.0);
    vs = uy - y.segment(n, m);

    const double wtau = 2.0 * utau - y[n + m];
    wx = 2.0 * rho_x * ux - rho_x * y.head(n) - wtau * c;
    wy = (2.0 / scale) * uy - (1.0 / scale) * y.segment(n, m) - wtau * b;
    // (M + Q)^{-1} applied to (wx, wy): one Cholesky solve plus the rank-one
    // tau correction, as in apply_m_inv but free of temporaries.
    atmul_to(wy, zx);
    zx *= -scale;
    zx += wx;
    llt.solveInPlace(zx);
    amul_to(zx, zy);
    zy += wy;
    zy *= scale;
    const double corr = (c.dot(zx) + b.dot(zy)) / gamma;
    zx -= corr * mh_x;
    zy -= corr * mh_y;
    const double ztau = wtau + c.dot(zx) + b.dot(zy);

    g->head(n) = settings.alpha * (zx - ux);
    g->segment(n, m) = settings.alpha * (zy - uy);
    (*g)[n + m] = settings.alpha * (ztau - utau);
  };

  // Anderson acceleration (type II) over the fixed-point map, with a
  // residual-based safeguard: an accelerated point whose displacement grows
  // past the safeguard is rolled back to the plain update it replaced.  The
  // difference history lives in ring buffers; the normal-equation Gram matrix
  // is patched one row/column at a time as columns are replaced.
  const int aa_mem = std::max(settings.aa_memory, 0);
  const int dim = n + m + 1;
  MatD dy_hist, dg_hist, gram_aa;
  VecD aa_rhs;
  if (aa_mem > 0) {
    dy_hist.resize(dim, aa_mem);
    dg_hist.resize(dim, aa_mem);
    gram_aa.resize(aa_mem, aa_mem);
    aa_rhs.resize(aa_mem);
  }
  int aa_count = 0, aa_next = 0;
  VecD prev_y(dim), prev_g(dim), fallback_y(dim);
  double fallback_gnorm = std::numeric_limits<double>::infinity();
  bool have_prev = false, last_was_aa = false;
  const auto aa_reset = [&]() {
    aa_count = 0;
    aa_next = 0;
    have_prev = false;
    last_was_aa = false;
    fallback_gnorm = std::numeric_limits<double>::infinity();
  };

  int iter = 0;
  int next_rescale = 250;
  // Doubling the gap between rescalings keeps a hard instance from cycling
  // through metric changes forever (each one resets the acceleration state).
  int rescale_gap = 250;
  // Convergence trace for troubleshooting hard instances, enabled by the
  // ISCSC_SOLVER_DEBUG environment variable.
  const bool trace = std::getenv("ISCSC_SOLVER_DEBUG") != nullptr;
  int aa_steps = 0, aa_rollbacks = 0, rescales = 0;
  VecD g(dim);
  for (; iter < settings.max_iters; ++iter) {
    fixed_point_step(yv, &g);
    double gnorm = g.norm();

    if (last_was_aa && gnorm > 2.0 * fallback_gnorm) {
      ++aa_rollbacks;
      yv = fallback_y;
      aa_reset();
      fixed_point_step(yv, &g);
      gnorm = g.norm();
    }

    if (aa_mem > 0) {
      if (have_prev) {
        const int col = aa_next;
        dy_hist.col(col) = yv - prev_y;
        dg_hist.col(col) = g - prev_g;
        aa_next = (aa_next + 1) % aa_mem;
        aa_count = std::min(aa_count + 1, aa_mem);
        for (int j = 0; j < aa_count; ++j) {
          const double dot = dg_hist.col(col).dot(dg_hist.col(j));
          gram_aa(col, j) = dot;
          gram_aa(j, col) = dot;
        }
      }
      prev_y = yv;
      prev_g = g;
      have_prev = true;
    }

    fallback_y = yv;
    fallback_y += g;
    fallback_gnorm = gnorm;
    last_was_aa = false;
    if (aa_count > 0) {
      for (int j = 0; j < aa_count; ++j) aa_rhs[j] = dg_hist.col(j).dot(g);
      MatD gsub = gram_aa.topLeftCorner(aa_count, aa_count);
      gsub.diagonal().array() += 1e-10 * (1.0 + gsub.trace());
      const VecD coef = gsub.ldlt().solve(aa_rhs.head(aa_count));
      if (coef.allFinite()) {
        yv += g;
        for (int j = 0; j < aa_count; ++j)
          yv -= coef[j] * (dy_hist.col(j) + dg_hist.col(j));
        last_was_aa = true;
        ++aa_steps;
      } else {
        yv = fallback_y;
      }
    } else {
      yv = fallback_y;
    }

    if ((iter + 1) % settings.check_every != 0 && iter + 1 != settings.max_iters)
      continue;

    if (utau > 1e-12) {
      const VecD x = unscale_x(ux / utau);
      const VecD y = unscale_y(uy / utau);
      const VecD s = unscale_s(vs / (scale * utau));
      const double pres = (amul0(x) + s - problem.b).norm() / (1.0 + bnorm_un);
      const double dres = (atmul0(y) + problem.c).norm() / (1.0 + cnorm_un);
      const double pobj = problem.c.dot(x);
      const double dobj = -problem.b.dot(y);
      const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      if (std::max({pres, dres, gap}) <= settings.tol) {
        if (trace)
          std::fprintf(stderr,
                       "[conic] optimal: iters=%d aa=%d rollbacks=%d "
                       "rescales=%d scale=%g\n",
                       iter + 1, aa_steps, aa_rollbacks, rescales, scale);
        rep.status = SolveStatus::optimal;
        rep.x = x;
        rep.y = y;
        rep.s = s;
        rep.obj = pobj;
        rep.primal_res = pres;
        rep.dual_res = dres;
        rep.gap = gap;
        rep.iterations = iter + 1;
        rep.final_scale = scale;
        return rep;
      }
      rep.x = x;
      rep.y = y;
      rep.s = s;
      rep.obj = pobj;
      rep.primal_res = pres;
      rep.dual_res = dres;
      rep.gap = gap;

      // Rebalance the metric when the residuals drift far apart.  The fixed
      // point lives in (u, M v) space, so carrying M v across the change
      // (v scales with the new weight) preserves any progress made.
      if (settings.adaptive_scale && iter + 1 >= next_rescale &&
          (pres > 10.0 * dres || dres > 10.0 * pres)) {
        const double ns = std::min(
            std::max(scale * std::sqrt(pres / std::max(dres, 1e-300)), 1e-6),
            1e6);
        if (ns != scale) {
          yv.segment(n, m) = uy - (ns / scale) * vs;
          scale = ns;
          ++rescales;
          factorize();
          aa_reset();
          next_rescale = iter + 1 + rescale_gap;
          rescale_gap *= 2;
        }
      }
    }

    // Certificate checks, scale-free on the equilibrated data so a norm
    // imbalance between A and b/c cannot produce spurious certificates.
    const double by = b.dot(uy);
    if (by < -1e-12 && atmul(uy).norm() * b.norm() <= -settings.tol * by) {
      const VecD yun = scal.d.asDiagonal() * uy;
      rep.status = SolveStatus::infeasible;
      rep.y = yun / (-problem.b.dot(yun));
      rep.iterations = iter + 1;
      return rep;
    }
    const double cx = c.dot(ux);
    if (cx < -1e-12) {
      const VecD au = amul(ux);
      const VecD scand = project_cones(-au, problem.cones);
      if ((au + scand).norm() * c.norm() <= -settings.tol * cx) {
        const VecD xun = scal.e.asDiagonal() * ux;
        const double scale = -problem.c.dot(xun);
        rep.status = SolveStatus::unbounded;
        rep.x = xun / scale;
        rep.s = project_cones(-problem.a * rep.x, problem.cones);
        rep.iterations = iter + 1;
        return rep;
      }
    }
  }

  if (trace)
    std::fprintf(stderr,
                 "[conic] max_iters: iters=%d aa=%d rollbacks=%d rescales=%d "
                 "scale=%g res=(%.2e %.2e %.2e)\n",
                 iter, aa_steps, aa_rollbacks, rescales, scale, rep.primal_res,
                 rep.dual_res, rep.gap);
  rep.status = SolveStatus::max_iters;
  rep.iterations = iter;
  rep.final_scale = scale;
  if (rep.x.size() == 0) {
    rep.x = VecD::Zero(n);
    rep.y = VecD::Zero(m);
    rep.s = VecD::Zero(m);
  }
  return rep;
}

std::string problem_to_text(const ConeProblem& p) {
  std::ostringstream os;
  os << "conic problem: " << p.num_vars() << " vars, " << p.num_rows()
     << " rows\n";
  os << "cones:";
  for (const auto& blk : p.cones) {
    switch (blk.kind) {
      case ConeKind::zero: os << " zero:" << blk.dim; break;
      case ConeKind::nonneg: os << " nonneg:" << blk.dim; break;
      case ConeKind::soc: os << " soc:" << blk.dim; break;
      case ConeKind::psd: os << " psd:" << blk.dim; break;
      case ConeKind::exp_primal: os << " exp"; break;
    }
  }
  os << "\n";
  char buf[96];
  for (int j = 0; j < p.num_vars(); ++j)
    if (p.c[j] != 0.0) {
      std::snprintf(buf, sizeof(buf), "c %d %.17g\n", j, p.c[j]);
      os << buf;
    }
  for (int i = 0; i < p.num_rows(); ++i)
    if (p.b[i] != 0.0) {
      std::snprintf(buf, sizeof(buf), "b %d %.17g\n", i, p.b[i]);
      os << buf;
    }
  for (int i = 0; i < p.num_rows(); ++i)
    for (int j = 0; j < p.num_vars(); ++j)
      if (p.a(i, j) != 0.0) {
        std::snprintf(buf, sizeof(buf), "A %d %d %.17g\n", i, j, p.a(i, j));
        os << buf;
      }
  return os.str();
}

}  // namespace iscsc
