#include "iscsc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "iscsc/linalg.hpp"

namespace iscsc {

namespace {

constexpr double kLog2e = 1.4426950408889634;  // log2(e)
constexpr double kSqrt2 = 1.4142135623730951;

// Coefficients of params(M) -> h^H M h over the Hermitian parametrization.
VecD qform_coeffs(const VecC& h) {
  return trace_form_coeffs(h * h.adjoint());
}

// (2n) x n^2 coefficients of params(M) -> [Re(M h); Im(M h)].  Parameter
// order matches herm_to_params: n diagonal entries, then (re, im) for each
// column-major upper pair.
MatD mh_coeffs(const VecC& h, int n) {
  MatD m = MatD::Zero(2 * n, n * n);
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    m(i, idx) = h[i].real();
    m(n + i, idx) = h[i].imag();
    ++idx;
  }
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i) {
      // re part: M_ij = M_ji = 1 contributes h_j to row i and h_i to row j.
      m(i, idx) = h[j].real();
      m(n + i, idx) = h[j].imag();
      m(j, idx) = h[i].real();
      m(n + j, idx) = h[i].imag();
      ++idx;
      // im part: M_ij = i, M_ji = -i.
      m(i, idx) = -h[j].imag();
      m(n + i, idx) = h[j].real();
      m(j, idx) = h[i].imag();
      m(n + j, idx) = -h[i].real();
      ++idx;
    }
  return m;
}

// Sparse columns of params(M) -> svec(realify(M)), built by pushing each
// basis matrix through the exact maps the PSD cone rows use.
struct SvecMap {
  int rows = 0;
  std::vector<std::vector<std::pair<int, double>>> cols;  // per parameter
};

SvecMap svec_realify_map(int n) {
  SvecMap map;
  map.rows = svec_dim(2 * n);
  map.cols.resize(n * n);
  VecD unit = VecD::Zero(n * n);
  for (int t = 0; t < n * n; ++t) {
    unit[t] = 1.0;
    const VecD col = svec(realify(params_to_herm(unit, n)));
    unit[t] = 0.0;
    for (int r = 0; r < map.rows; ++r)
      if (col[r] != 0.0) map.cols[t].emplace_back(r, col[r]);
  }
  return map;
}

// True term values at a concrete design: per-device total/interference
// bounds and per-patient leakage bounds.
struct TermSet {
  VecD t1, t2;  // K: received lower bound, interference upper bound
  VecD t3;      // L: leakage upper bound (independent of the stream)
  MatD t4;      // L x K: leakage interference lower bound
};

TermSet term_set(const std::vector<MatC>& w, const std::vector<MatC>& r,
                 const SceneConfig& sc, const DesignChannels& ch) {
  const int K = ch.num_devices(), L = ch.num_patients();
  TermSet ts;
  ts.t1.resize(K);
  ts.t2.resize(K);
  ts.t3.resize(L);
  ts.t4.resize(L, K);
  for (int k = 0; k < K; ++k) {
    const TermBounds tb = term_bounds(ch.h_dev[k], ch.eps_dev[k], w, r);
    ts.t1[k] = tb.w_all.lower + tb.r_all.lower + sc.sigma2_c;
    ts.t2[k] = tb.w_excl[k].upper + tb.r_all.upper + sc.sigma2_c;
  }
  for (int l = 0; l < L; ++l) {
    const TermBounds tb = term_bounds(ch.h_pat[l], ch.eps_pat[l], w, r);
    ts.t3[l] = tb.w_all.upper + tb.r_all.upper + sc.sigma2_r;
    for (int k = 0; k < K; ++k)
      ts.t4(l, k) = tb.w_excl[k].lower + tb.r_all.lower + sc.sigma2_r;
  }
  return ts;
}

double safe_log2_ratio(double num, double den) {
  return std::log2(std::max(num, 1e-300) / std::max(den, 1e-300));
}

void refresh_anchors(ScaState* st, const SceneConfig& sc,
                     const DesignChannels& ch, double* delta_b,
                     double* delta_c) {
  const TermSet ts = term_set(st->w, st->r, sc, ch);
  const int K = ch.num_devices(), L = ch.num_patients();
  double db = 0.0, dc = 0.0;
  for (int k = 0; k < K; ++k) {
    const double nb = std::log(std::max(ts.t2[k], 1e-300));
    db = std::max(db, std::abs(nb - st->b_hat[k]));
    st->b_hat[k] = nb;
    for (int l = 0; l < L; ++l) {
      const double nc = std::log(std::max(ts.t3[l], 1e-300));
      dc = std::max(dc, std::abs(nc - st->c_hat(l, k)));
      st->c_hat(l, k) = nc;
    }
  }
  if (delta_b) *delta_b = db;
  if (delta_c) *delta_c = dc;
}

MatC sum_cov(const std::vector<MatC>& w, const std::vector<MatC>& r, int n) {
  MatC rx = MatC::Zero(n, n);
  for (const auto& m : w) rx += m;
  for (const auto& m : r) rx += m;
  return rx;
}

double total_trace(const std::vector<MatC>& w, const std::vector<MatC>& r) {
  double p = 0.0;
  for (const auto& m : w) p += m.trace().real();
  for (const auto& m : r) p += m.trace().real();
  return p;
}

MatC clip_psd(const MatC& m) {
  Eigen::SelfAdjointEigenSolver<MatC> es(hermitize(m));
  if (es.eigenvalues().minCoeff() >= 0.0) return hermitize(m);
  return es.eigenvectors() *
         es.eigenvalues().cwiseMax(0.0).asDiagonal() *
         es.eigenvectors().adjoint();
}

// Projects a solver point onto the original feasible set and rebuilds the
// auxiliaries from the repaired beams, so the state satisfies every
// constraint exactly rather than up to the solver residual.
void repair_state(ScaState* st, const SceneConfig& sc,
                  const DesignChannels& ch) {
  const int K = ch.num_devices(), L = ch.num_patients();
  for (auto& m : st->w) m = clip_psd(m);
  for (auto& m : st->r) m = clip_psd(m);
  const double budget =
      sc.power_budget +
      sc.semantic.extraction_coeff * st->rho.array().log().sum();
  const double total = total_trace(st->w, st->r);
  if (total > budget) {
    const double f = std::max(budget, 0.0) / total;
    for (auto& m : st->w) m *= f;
    for (auto& m : st->r) m *= f;
  }

  const TermSet ts = term_set(st->w, st->r, sc, ch);
  st->lambda = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    st->a[k] = std::log(std::max(ts.t1[k], 1e-300));
    st->b[k] = std::log(std::max(ts.t2[k], 1e-300));
    for (int l = 0; l < L; ++l) {
      st->c(l, k) = std::log(std::max(ts.t3[l], 1e-300));
      st->d(l, k) = std::log(std::max(ts.t4(l, k), 1e-300));
      const double rate = sc.semantic.iota / st->rho[k] * kLog2e *
                          (st->a[k] - st->b[k] + st->d(l, k) - st->c(l, k));
      st->lambda = std::min(st->lambda, rate);
    }
  }

  const MatC rx = sum_cov(st->w, st->r, sc.n_antennas);
  double t_sum = 0.0;
  for (int l = 0; l < L; ++l) {
    const FimResult fr = fim_crb(rx, ch.theta_pat[l], cd(ch.beta_pat[l], 0.0),
                                 sc.snapshots_per_slot, sc.sigma2_e);
    const double crb = fr.valid ? fr.crb_theta : 1e12;
    st->u[l] = 1.0 / std::max(crb, 1e-300);
    st->t[l] = crb;
    t_sum += crb;
  }
  st->objective =
      st->cfg.kappa1 * st->lambda - st->cfg.kappa2 * t_sum / st->crb_norm;
}

}  // namespace

TermBound quad_form_bounds(const VecC& h_hat, double eps, const MatC& m) {
  const double q = std::real(h_hat.dot(m * h_hat));  // h^H M h
  const double norm = (m * h_hat).norm();
  return {q - 2.0 * eps * norm, q + 2.0 * eps * norm};
}

TermBounds term_bounds(const VecC& h_hat, double eps,
                       const std::vector<MatC>& w_list,
                       const std::vector<MatC>& r_list) {
  const int n = static_cast<int>(h_hat.size());
  const int K = static_cast<int>(w_list.size());
  MatC w_sum = MatC::Zero(n, n), r_sum = MatC::Zero(n, n);
  for (const auto& w : w_list) w_sum += w;
  for (const auto& r : r_list) r_sum += r;
  TermBounds tb;
  tb.w_all = quad_form_bounds(h_hat, eps, w_sum);
  tb.r_all = quad_form_bounds(h_hat, eps, r_sum);
  tb.w_excl.resize(K);
  for (int k = 0; k < K; ++k)
    tb.w_excl[k] = quad_form_bounds(h_hat, eps, w_sum - w_list[k]);
  return tb;
}

DesignChannels design_channels(const SceneConfig& sc) {
  const int L = sc.num_patients();
  VecD theta(L), dist(L), beta(L);
  for (int l = 0; l < L; ++l) {
    theta[l] = sc.patients[l].angle;
    dist[l] = sc.patients[l].distance;
    beta[l] = pathloss_beta(sc, dist[l]);
  }
  return design_channels(sc, theta, dist, beta);
}

DesignChannels design_channels(const SceneConfig& sc, const VecD& theta_pat,
                               const VecD& dist_pat, const VecD& beta_pat) {
  const int K = sc.num_devices();
  const int L = static_cast<int>(theta_pat.size());
  DesignChannels ch;
  ch.h_dev.reserve(K);
  ch.h_pat.reserve(L);
  ch.eps_dev.resize(K);
  ch.eps_pat.resize(L);
  for (int k = 0; k < K; ++k) {
    ch.h_dev.push_back(
        nominal_channel(sc, sc.devices[k].angle, sc.devices[k].distance));
    ch.eps_dev[k] = sc.eps_device(k);
  }
  for (int l = 0; l < L; ++l) {
    ch.h_pat.push_back(nominal_channel(sc, theta_pat[l], dist_pat[l]));
    ch.eps_pat[l] = sc.eps_patient(l);
  }
  ch.theta_pat = theta_pat;
  ch.beta_pat = beta_pat;
  return ch;
}

ScaState init_state(const SceneConfig& sc, const DesignChannels& ch,
                    const ScaConfig& cfg, RngStream* rho_rng) {
  const int n = sc.n_antennas;
  const int K = ch.num_devices(), L = ch.num_patients();
  if (K < 1 || L < 1)
    throw std::invalid_argument("the design needs at least one device and one patient");
  ScaState st;
  st.cfg = cfg;
  st.w.reserve(K);
  st.r.reserve(L);
  for (int k = 0; k < K; ++k) {
    const VecC& h = ch.h_dev[k];
    st.w.push_back(sc.power_budget / (2.0 * K) * (h * h.adjoint()) /
                   h.squaredNorm());
  }
  for (int l = 0; l < L; ++l) {
    const VecC a = steering(ch.theta_pat[l], n);
    st.r.push_back(sc.power_budget / (2.0 * L) * (a * a.adjoint()) /
                   static_cast<double>(n));
  }

  if (rho_rng) {
    const auto lb = device_rho_lower_bounds(sc, *rho_rng);
    st.rho_lb = Eigen::Map<const VecD>(lb.data(), lb.size());
  } else {
    RngStream local(sc.seed, "rho-lb");
    const auto lb = device_rho_lower_bounds(sc, local);
    st.rho_lb = Eigen::Map<const VecD>(lb.data(), lb.size());
  }
  const double f = sc.semantic.extraction_coeff;
  st.rho.resize(K);
  if (cfg.semantic) {
    // The largest compute spend the initial split allows; with F = 0 the
    // ratios drop straight to their lower bounds.
    const double cap =
        f > 0.0
            ? std::exp(-cfg.compute_budget_share * sc.power_budget / (K * f))
            : 0.0;
    for (int k = 0; k < K; ++k) st.rho[k] = std::max(st.rho_lb[k], cap);
  } else {
    st.rho.setOnes();
  }

  st.b_hat.resize(K);
  st.c_hat.resize(L, K);
  refresh_anchors(&st, sc, ch, nullptr, nullptr);

  const MatC rx0 = sum_cov(st.w, st.r, n);
  st.fim_scale.resize(L);
  st.fim_scale_b.resize(L);
  st.u.resize(L);
  st.t.resize(L);
  double crb_sum = 0.0;
  for (int l = 0; l < L; ++l) {
    const FimResult fr = fim_crb(rx0, ch.theta_pat[l], cd(ch.beta_pat[l], 0.0),
                                 sc.snapshots_per_slot, sc.sigma2_e);
    st.fim_scale[l] = std::max(fr.j(0, 0), 1e-12);
    st.fim_scale_b[l] = std::max(fr.j(1, 1), 1e-12);
    const double crb = fr.valid ? fr.crb_theta : 1e12;
    st.u[l] = 1.0 / std::max(crb, 1e-300);
    st.t[l] = crb;
    crb_sum += crb;
  }
  st.crb_norm = cfg.crb_norm > 0.0 ? cfg.crb_norm : std::max(crb_sum, 1e-12);

  // Log-domain auxiliaries and the secrecy level at the starting point.
  const TermSet ts = term_set(st.w, st.r, sc, ch);
  st.a.resize(K);
  st.b.resize(K);
  st.c.resize(L, K);
  st.d.resize(L, K);
  st.lambda = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    st.a[k] = std::log(std::max(ts.t1[k], 1e-300));
    st.b[k] = std::log(std::max(ts.t2[k], 1e-300));
    for (int l = 0; l < L; ++l) {
      st.c(l, k) = std::log(std::max(ts.t3[l], 1e-300));
      st.d(l, k) = std::log(std::max(ts.t4(l, k), 1e-300));
      const double rate = sc.semantic.iota / st.rho[k] * kLog2e *
                          (st.a[k] - st.b[k] + st.d(l, k) - st.c(l, k));
      st.lambda = std::min(st.lambda, rate);
    }
  }
  st.objective = cfg.kappa1 * st.lambda -
                 cfg.kappa2 * st.t.sum() / st.crb_norm;
  return st;
}

Sp1Problem build_subproblem1(const ScaState& st, const SceneConfig& sc,
                             const DesignChannels& ch) {
  const int n = sc.n_antennas;
  const int K = ch.num_devices(), L = ch.num_patients();
  if (K < 1 || L < 1)
    throw std::invalid_argument("the design needs at least one device and one patient");
  const int nn = n * n;

  Sp1Layout lay;
  lay.n = n;
  lay.k = K;
  lay.l = L;
  lay.nn = nn;
  int off = 0;
  lay.off_w = off;
  off += K * nn;
  lay.off_r = off;
  off += L * nn;
  lay.off_lambda = off++;
  lay.off_u = off;
  off += L;
  lay.off_t = off;
  off += L;
  lay.off_a = off;
  off += K;
  lay.off_b = off;
  off += K;
  lay.off_c = off;
  off += L * K;
  lay.off_d = off;
  off += L * K;
  lay.off_nw_all = off;
  off += K;
  lay.off_nw_excl = off;
  off += K;
  lay.off_nr = off;
  off += K;
  lay.off_mw_all = off;
  off += L;
  lay.off_mr = off;
  off += L;
  lay.off_mw_excl = off;
  off += L * K;
  lay.num_vars = off;

  const int soc_rows = 1 + 2 * n;
  const int psd_big = svec_dim(2 * n);
  lay.nonneg_rows = K * L + K + K * L + 1;
  lay.soc_blocks = 3 * K + 2 * L + L * K;
  lay.psd_blocks = K + L + 2 * L;
  lay.exp_blocks = K + L * K;
  const int m = lay.nonneg_rows + lay.soc_blocks * soc_rows +
                (K + L) * psd_big + L * 6 + L * 3 + lay.exp_blocks * 3;

  const double f = sc.semantic.extraction_coeff;
  const double budget = sc.power_budget + f * st.rho.array().log().sum();
  if (budget < 0.0)
    throw std::domain_error(
        "power budget exhausted: the extraction ratios alone need more "
        "computing power than the transmit budget provides");

  ConeProblem p;
  p.a = MatD::Zero(m, lay.num_vars);
  p.b = VecD::Zero(m);
  p.c = VecD::Zero(lay.num_vars);
  MatD& A = p.a;

  // Everything below is written with slack semantics: row slack s = b - A x,
  // so adding "v * x_col" to the slack subtracts from A and constants add to
  // b directly.
  const auto s_var = [&](int row, int col, double v) { A(row, col) -= v; };
  const auto s_all = [&](int row, const VecD& coef, double scale,
                         int excl_w = -1) {
    for (int k2 = 0; k2 < K; ++k2)
      if (k2 != excl_w)
        A.block(row, lay.off_w + k2 * nn, 1, nn) -=
            scale * coef.transpose();
    for (int l2 = 0; l2 < L; ++l2)
      A.block(row, lay.off_r + l2 * nn, 1, nn) -= scale * coef.transpose();
  };

  std::vector<VecD> qdev(K), qpat(L);
  std::vector<MatD> mdev(K), mpat(L);
  for (int k = 0; k < K; ++k) {
    qdev[k] = qform_coeffs(ch.h_dev[k]);
    mdev[k] = mh_coeffs(ch.h_dev[k], n);
  }
  for (int l = 0; l < L; ++l) {
    qpat[l] = qform_coeffs(ch.h_pat[l]);
    mpat[l] = mh_coeffs(ch.h_pat[l], n);
  }
  const VecD trace_coef = trace_form_coeffs(MatC::Identity(n, n));

  int row = 0;
  p.cones.push_back({ConeKind::nonneg, lay.nonneg_rows});

  // Worst-case secrecy rate per (device, eavesdropper) pair.
  for (int k = 0; k < K; ++k) {
    const double coef = sc.semantic.iota / st.rho[k] * kLog2e;
    for (int l = 0; l < L; ++l) {
      s_var(row, lay.off_a + k, coef);
      s_var(row, lay.off_b + k, -coef);
      s_var(row, lay.off_d + lay.pair(l, k), coef);
      s_var(row, lay.off_c + lay.pair(l, k), -coef);
      s_var(row, lay.off_lambda, -1.0);
      ++row;
    }
  }
  // Received powers sit many orders of magnitude below the O(1) logs and
  // epigraph variables, which first-order splitting tolerates poorly, so the
  // power-valued rows are divided by the anchor value of their expression.
  // That is an exact reformulation (the multiplier moves into b and A), and
  // it leaves every cone block with data near unit size.
  const auto clamp_anchor = [](double log_anchor) {
    return std::min(std::max(log_anchor, -250.0), 250.0);
  };
  const auto anchor_scale = [&](double log_anchor) {
    return std::exp(-clamp_anchor(log_anchor));
  };

  // Tangent surrogate of the interference bound, divided by its slope e^bh:
  // Term2 / e^bh <= b - bh + 1.
  for (int k = 0; k < K; ++k) {
    const double inv = anchor_scale(st.b_hat[k]);
    s_var(row, lay.off_b + k, 1.0);
    s_all(row, qdev[k], -inv, k);
    s_var(row, lay.off_nw_excl + k, -2.0 * ch.eps_dev[k] * inv);
    s_var(row, lay.off_nr + k, -2.0 * ch.eps_dev[k] * inv);
    p.b[row] = 1.0 - st.b_hat[k] - sc.sigma2_c * inv;
    ++row;
  }
  // Tangent surrogate of the leakage bound: Term3 / e^ch <= c - ch + 1.
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const double inv = anchor_scale(st.c_hat(l, k));
      s_var(row, lay.off_c + lay.pair(l, k), 1.0);
      s_all(row, qpat[l], -inv);
      s_var(row, lay.off_mw_all + l, -2.0 * ch.eps_pat[l] * inv);
      s_var(row, lay.off_mr + l, -2.0 * ch.eps_pat[l] * inv);
      p.b[row] = 1.0 - st.c_hat(l, k) - sc.sigma2_r * inv;
      ++row;
    }
  // Transmit power plus the (fixed) computing power inside the budget.
  s_all(row, trace_coef, -1.0);
  p.b[row] = budget;
  ++row;

  // Epigraphs of the channel-vector norms.  Each block reads
  // (u, Re(sum M h), Im(sum M h)) with u the bounding variable.
  const auto soc_block = [&](int uvar, const MatD& mh, bool with_w, int excl_w,
                             bool with_r) {
    p.cones.push_back({ConeKind::soc, soc_rows});
    s_var(row, uvar, 1.0);
    ++row;
    if (with_w)
      for (int k2 = 0; k2 < K; ++k2)
        if (k2 != excl_w) A.block(row, lay.off_w + k2 * nn, 2 * n, nn) -= mh;
    if (with_r)
      for (int l2 = 0; l2 < L; ++l2)
        A.block(row, lay.off_r + l2 * nn, 2 * n, nn) -= mh;
    row += 2 * n;
  };
  for (int k = 0; k < K; ++k) {
    soc_block(lay.off_nw_all + k, mdev[k], true, -1, false);
    soc_block(lay.off_nw_excl + k, mdev[k], true, k, false);
    soc_block(lay.off_nr + k, mdev[k], false, -1, true);
  }
  for (int l = 0; l < L; ++l) {
    soc_block(lay.off_mw_all + l, mpat[l], true, -1, false);
    soc_block(lay.off_mr + l, mpat[l], false, -1, true);
  }
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l)
      soc_block(lay.off_mw_excl + lay.pair(l, k), mpat[l], true, k, false);

  // Positive semidefiniteness of every covariance via its realification.
  const SvecMap smap = svec_realify_map(n);
  const auto psd_block = [&](int var_off) {
    p.cones.push_back({ConeKind::psd, 2 * n});
    for (int t = 0; t < nn; ++t)
      for (const auto& [r, v] : smap.cols[t]) A(row + r, var_off + t) -= v;
    row += psd_big;
  };
  for (int k = 0; k < K; ++k) psd_block(lay.off_w + k * nn);
  for (int l = 0; l < L; ++l) psd_block(lay.off_r + l * nn);

  // Sensing accuracy: the 3x3 information LMI with u_l carving out the
  // angle block.  A diagonal congruence with the per-block information at
  // the reference design keeps every row of the block near unit size.
  for (int l = 0; l < L; ++l) {
    const FimCoeffs fc = fim_coeffs(n, ch.theta_pat[l], cd(ch.beta_pat[l], 0.0),
                                    sc.snapshots_per_slot, sc.sigma2_e);
    const double inv_t = 1.0 / st.fim_scale[l];
    const double inv_b = 1.0 / st.fim_scale_b[l];
    const double inv_tb = std::sqrt(inv_t * inv_b);
    p.cones.push_back({ConeKind::psd, 3});
    s_all(row, fc.j_tt, inv_t);
    s_var(row, lay.off_u + l, -1.0);
    s_all(row + 1, fc.j_tb.row(0).transpose(), kSqrt2 * inv_tb);
    s_all(row + 2, fc.j_tb.row(1).transpose(), kSqrt2 * inv_tb);
    s_all(row + 3, fc.j_bb, inv_b);
    s_all(row + 5, fc.j_bb, inv_b);
    row += 6;
  }
  // t_l >= 1/u_l through [[t, 1], [1, u]] >= 0.
  for (int l = 0; l < L; ++l) {
    p.cones.push_back({ConeKind::psd, 2});
    s_var(row, lay.off_t + l, 1.0);
    p.b[row + 1] = kSqrt2;
    s_var(row + 2, lay.off_u + l, 1.0);
    row += 3;
  }

  // Exponential-cone links: received power above e^a, leakage interference
  // above e^d.  Written relative to the anchor, e^(a - ah) <= Term1 / e^ah,
  // which is the same constraint with both cone coordinates near one.
  const auto exp_rows = [&](int log_var, double log_anchor) {
    p.cones.push_back({ConeKind::exp_primal, 3});
    s_var(row, log_var, 1.0);
    p.b[row] = -log_anchor;
    p.b[row + 1] = 1.0;
  };
  for (int k = 0; k < K; ++k) {
    const double inv = anchor_scale(st.a[k]);
    exp_rows(lay.off_a + k, clamp_anchor(st.a[k]));
    s_all(row + 2, qdev[k], inv);
    s_var(row + 2, lay.off_nw_all + k, -2.0 * ch.eps_dev[k] * inv);
    s_var(row + 2, lay.off_nr + k, -2.0 * ch.eps_dev[k] * inv);
    p.b[row + 2] = sc.sigma2_c * inv;
    row += 3;
  }
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const double inv = anchor_scale(st.d(l, k));
      exp_rows(lay.off_d + lay.pair(l, k), clamp_anchor(st.d(l, k)));
      s_all(row + 2, qpat[l], inv, k);
      s_var(row + 2, lay.off_mw_excl + lay.pair(l, k),
            -2.0 * ch.eps_pat[l] * inv);
      s_var(row + 2, lay.off_mr + l, -2.0 * ch.eps_pat[l] * inv);
      p.b[row + 2] = sc.sigma2_r * inv;
      row += 3;
    }

  if (row != m) throw std::logic_error("conic row layout mismatch");

  p.c[lay.off_lambda] = -st.cfg.kappa1;
  for (int l = 0; l < L; ++l)
    p.c[lay.off_t + l] =
        st.cfg.kappa2 / (st.crb_norm * st.fim_scale[l]);

  return {std::move(p), lay};
}

void extract_solution(const SolveReport& rep, const Sp1Layout& lay,
                      ScaState* st) {
  const int nn = lay.nn, K = lay.k, L = lay.l;
  for (int k = 0; k < K; ++k)
    st->w[k] = params_to_herm(rep.x.segment(lay.off_w + k * nn, nn), lay.n);
  for (int l = 0; l < L; ++l)
    st->r[l] = params_to_herm(rep.x.segment(lay.off_r + l * nn, nn), lay.n);
  st->lambda = rep.x[lay.off_lambda];
  for (int l = 0; l < L; ++l) {
    st->u[l] = rep.x[lay.off_u + l] * st->fim_scale[l];
    st->t[l] = rep.x[lay.off_t + l] / st->fim_scale[l];
  }
  st->a = rep.x.segment(lay.off_a, K);
  st->b = rep.x.segment(lay.off_b, K);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      st->c(l, k) = rep.x[lay.off_c + lay.pair(l, k)];
      st->d(l, k) = rep.x[lay.off_d + lay.pair(l, k)];
    }
  st->objective = -rep.obj;
}

ScaState sca_iterate(const ScaState& st, const SceneConfig& sc,
                     const DesignChannels& ch) {
  ScaState cur = st;
  bool have_accepted = false;
  int spent = 0;
  // A large anchor move means the next subproblem barely resembles the one
  // the stored solution came from; a cold start converges faster there.
  double last_move = 0.0;
  for (int it = 0; it < cur.cfg.max_sca_iters; ++it) {
    const int remaining = cur.cfg.solver_iter_budget - spent;
    if (remaining < 10000) break;
    Sp1Problem sp = build_subproblem1(cur, sc, ch);
    SolverSettings ss;
    ss.tol = cur.cfg.solver_tol;
    ss.max_iters = std::min(cur.cfg.solver_max_iters, remaining);
    ss.scale = cur.cfg.solver_scale0;
    const bool use_warm = cur.have_warm && last_move <= 1.0;
    const SolveReport rep =
        solve(sp.problem, ss, use_warm ? &cur.warm : nullptr);
    spent += rep.iterations;
    const double worst =
        std::max({rep.primal_res, rep.dual_res, rep.gap});
    const bool usable =
        rep.status == SolveStatus::optimal ||
        (rep.status == SolveStatus::max_iters && rep.x.size() > 0 &&
         worst <= 10.0 * cur.cfg.solver_tol);
    if (!usable) {
      if (!have_accepted) cur.solver_ok = false;
      cur.solver_iterations += rep.iterations;
      break;
    }
    ScaState cand = cur;
    extract_solution(rep, sp.layout, &cand);
    repair_state(&cand, sc, ch);
    cand.solver_iterations += rep.iterations;
    cand.sca_iterations += 1;
    // Monotone acceptance: the subproblem keeps the previous accepted point
    // feasible, so an exact solve cannot lower the objective; once the
    // repaired candidate does (beyond a tiny slack), the chain has converged
    // to solver precision and we keep the incumbent.
    if (have_accepted && cand.objective < cur.objective - 1e-8) {
      cur.solver_iterations = cand.solver_iterations;
      break;
    }
    cur = std::move(cand);
    have_accepted = true;
    cur.warm = {rep.x, rep.y, rep.s, rep.final_scale};
    cur.have_warm = true;
    double db = 0.0, dcv = 0.0;
    refresh_anchors(&cur, sc, ch, &db, &dcv);
    if (db <= cur.cfg.anchor_tol_b && dcv <= cur.cfg.anchor_tol_c) break;
    last_move = std::max(db, dcv);
  }
  return cur;
}

VecD secrecy_exponents(const ScaState& st) {
  const int K = static_cast<int>(st.a.size());
  const int L = static_cast<int>(st.c.rows());
  VecD d(K);
  for (int k = 0; k < K; ++k) {
    double worst = std::numeric_limits<double>::infinity();
    for (int l = 0; l < L; ++l)
      worst = std::min(worst, st.d(l, k) - st.c(l, k));
    d[k] = (st.a[k] - st.b[k] + worst) * kLog2e;
  }
  return d;
}

RhoUpdate update_rho(const VecD& d_k, double p_rem, double f_coeff,
                     double iota, const VecD& rho_lb, const VecD& rho_ub) {
  const int K = static_cast<int>(d_k.size());
  if (p_rem < -1e-12)
    throw std::domain_error("no computing power left for the extraction update");
  p_rem = std::max(p_rem, 0.0);
  VecD lb = rho_lb, ub = rho_ub;
  for (int k = 0; k < K; ++k) {
    ub[k] = std::min(ub[k], 1.0);
    lb[k] = std::min(lb[k], ub[k]);
  }

  RhoUpdate out;
  out.rho.resize(K);
  const auto fill = [&](double eta) {
    for (int k = 0; k < K; ++k) {
      if (d_k[k] <= 0.0) {
        // Nothing to gain, so spend nothing on this device.
        out.rho[k] = ub[k];
      } else if (f_coeff <= 0.0) {
        // Free computing: the ratio drops straight to its floor.
        out.rho[k] = lb[k];
      } else {
        const double raw =
            eta > 0.0 ? iota * d_k[k] / (eta * f_coeff) : ub[k];
        out.rho[k] = std::clamp(raw, lb[k], ub[k]);
      }
    }
  };
  const auto spend = [&]() {
    double s = 0.0;
    for (int k = 0; k < K; ++k) s -= f_coeff * std::log(out.rho[k]);
    return s;
  };

  if (f_coeff <= 0.0) {
    fill(0.0);
    out.saturated = true;
    return out;
  }

  // Cheapest packing: everything at its floor.
  for (int k = 0; k < K; ++k) out.rho[k] = d_k[k] > 0.0 ? lb[k] : ub[k];
  if (spend() <= p_rem + 1e-12) {
    out.saturated = true;
    return out;
  }
  // Budget binds: bisect the multiplier until the computing power matches.
  fill(1e-12);
  if (spend() > p_rem + 1e-9)
    throw std::domain_error(
        "extraction upper bounds already exceed the computing budget");
  double lo = 1e-12, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    fill(hi);
    if (spend() >= p_rem) break;
    hi *= 2.0;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    fill(mid);
    const double s = spend();
    if (std::abs(s - p_rem) <= 1e-9) {
      out.eta = mid;
      return out;
    }
    (s > p_rem ? hi : lo) = mid;
  }
  out.eta = 0.5 * (lo + hi);
  fill(out.eta);
  return out;
}

DesignEval evaluate_design(const std::vector<MatC>& w,
                           const std::vector<MatC>& r, const VecD& rho,
                           const SceneConfig& sc, const DesignChannels& ch,
                           double crb_norm, double kappa1, double kappa2) {
  const int K = ch.num_devices(), L = ch.num_patients();
  const TermSet ts = term_set(w, r, sc, ch);
  DesignEval ev;
  ev.ssr.resize(K);
  for (int k = 0; k < K; ++k) {
    const double ik = sc.semantic.iota / rho[k];
    const double s_dev = ik * safe_log2_ratio(ts.t1[k], ts.t2[k]);
    double worst = std::numeric_limits<double>::infinity();
    for (int l = 0; l < L; ++l)
      worst = std::min(worst,
                       s_dev - ik * safe_log2_ratio(ts.t3[l], ts.t4(l, k)));
    ev.ssr[k] = std::max(L > 0 ? worst : s_dev, 0.0);
  }
  ev.min_ssr = ev.ssr.minCoeff();
  const MatC rx = sum_cov(w, r, sc.n_antennas);
  ev.crb.resize(L);
  for (int l = 0; l < L; ++l) {
    const FimResult fr = fim_crb(rx, ch.theta_pat[l], cd(ch.beta_pat[l], 0.0),
                                 sc.snapshots_per_slot, sc.sigma2_e);
    ev.crb[l] = fr.valid ? fr.crb_theta : 1e12;
  }
  ev.sum_crb = ev.crb.sum();
  ev.objective = kappa1 * ev.min_ssr - kappa2 * ev.sum_crb / crb_norm;
  return ev;
}

ReplayReport replay_constraints(const ScaState& st, const SceneConfig& sc,
                                const DesignChannels& ch) {
  const int K = ch.num_devices(), L = ch.num_patients();
  ReplayReport rr;
  for (int k = 0; k < K; ++k)
    rr.rho_bounds =
        std::max({rr.rho_bounds, st.rho_lb[k] - st.rho[k], st.rho[k] - 1.0});

  const double f = sc.semantic.extraction_coeff;
  const double comp = -f * st.rho.array().log().sum();
  rr.power = std::max(0.0, (total_trace(st.w, st.r) + comp - sc.power_budget) /
                               std::max(sc.power_budget, 1e-12));

  for (const auto& m : st.w)
    rr.psd = std::max(rr.psd, -min_eigenvalue(m) /
                                  std::max(1.0, m.trace().real()));
  for (const auto& m : st.r)
    rr.psd = std::max(rr.psd, -min_eigenvalue(m) /
                                  std::max(1.0, m.trace().real()));

  const MatC rx = sum_cov(st.w, st.r, sc.n_antennas);
  for (int l = 0; l < L; ++l) {
    const FimResult fr = fim_crb(rx, ch.theta_pat[l], cd(ch.beta_pat[l], 0.0),
                                 sc.snapshots_per_slot, sc.sigma2_e);
    MatD lmi = fr.j;
    lmi(0, 0) -= st.u[l];
    const Eigen::SelfAdjointEigenSolver<MatD> es(lmi);
    rr.fim = std::max(rr.fim,
                      -es.eigenvalues().minCoeff() / st.fim_scale[l]);
  }

  const TermSet ts = term_set(st.w, st.r, sc, ch);
  for (int k = 0; k < K; ++k) {
    const double ik = sc.semantic.iota / st.rho[k];
    for (int l = 0; l < L; ++l) {
      const double bound = ik * (safe_log2_ratio(ts.t1[k], ts.t2[k]) -
                                 safe_log2_ratio(ts.t3[l], ts.t4(l, k)));
      rr.secrecy = std::max(
          rr.secrecy, (st.lambda - bound) / std::max(1.0, std::abs(st.lambda)));
    }
    const auto rel = [](double lhs, double rhs) {
      // lhs <= rhs expected; violation relative to the larger natural scale
      return (lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
    };
    rr.exp_rows = std::max(rr.exp_rows, rel(std::exp(st.a[k]), ts.t1[k]));
    rr.exp_rows = std::max(rr.exp_rows, rel(ts.t2[k], std::exp(st.b[k])));
    for (int l = 0; l < L; ++l) {
      rr.exp_rows =
          std::max(rr.exp_rows, rel(ts.t3[l], std::exp(st.c(l, k))));
      rr.exp_rows =
          std::max(rr.exp_rows, rel(std::exp(st.d(l, k)), ts.t4(l, k)));
    }
  }
  rr.secrecy = std::max(rr.secrecy, 0.0);
  rr.exp_rows = std::max(rr.exp_rows, 0.0);
  rr.rho_bounds = std::max(rr.rho_bounds, 0.0);
  rr.max_violation = std::max({rr.rho_bounds, rr.power, rr.psd, rr.fim,
                               rr.secrecy, rr.exp_rows});
  return rr;
}

RandomizationResult gaussian_randomization(const ScaState& st,
                                           const SceneConfig& sc,
                                           const DesignChannels& ch,
                                           int n_samples, RngStream& rng) {
  const int n = sc.n_antennas;
  const int K = ch.num_devices();
  RandomizationResult res;
  res.relaxed = evaluate_design(st.w, st.r, st.rho, sc, ch, st.crb_norm,
                                st.cfg.kappa1, st.cfg.kappa2);

  std::vector<double> target(K);
  std::vector<MatC> factors(K);
  std::vector<VecC> eig(K);
  for (int k = 0; k < K; ++k) {
    target[k] = std::max(st.w[k].trace().real(), 0.0);
    factors[k] = psd_factor(st.w[k]);
    Eigen::SelfAdjointEigenSolver<MatC> es(hermitize(st.w[k]));
    int top = 0;
    es.eigenvalues().maxCoeff(&top);
    eig[k] = std::sqrt(target[k]) * es.eigenvectors().col(top);
  }

  const auto rescale = [&](std::vector<VecC>& cand) {
    // Each beam keeps its device's relaxed power share.
    for (int k = 0; k < K; ++k) {
      const double nrm = cand[k].norm();
      cand[k] = nrm > 1e-15 ? VecC(std::sqrt(target[k]) / nrm * cand[k])
                            : VecC(VecC::Zero(n));
    }
  };
  const auto eval_cand = [&](const std::vector<VecC>& cand) {
    std::vector<MatC> wlist(K);
    for (int k = 0; k < K; ++k) wlist[k] = cand[k] * cand[k].adjoint();
    return evaluate_design(wlist, st.r, st.rho, sc, ch, st.crb_norm,
                           st.cfg.kappa1, st.cfg.kappa2);
  };

  res.w = eig;
  rescale(res.w);
  res.eval = eval_cand(res.w);
  res.n_candidates = 1;
  for (int s = 0; s < n_samples; ++s) {
    std::vector<VecC> cand(K);
    for (int k = 0; k < K; ++k) {
      VecC g(n);
      for (int i = 0; i < n; ++i) g[i] = rng.cnormal();
      cand[k] = factors[k] * g;
    }
    rescale(cand);
    const DesignEval ev = eval_cand(cand);
    ++res.n_candidates;
    if (ev.objective > res.eval.objective) {
      res.eval = ev;
      res.w = std::move(cand);
    }
  }

  res.beams.R = st.r;
  res.beams.w = res.w;
  res.beams.W.resize(K);
  for (int k = 0; k < K; ++k)
    res.beams.W[k] = res.w[k] * res.w[k].adjoint();
  return res;
}

namespace {

// Rebuilds the rate variable and the objective from the stored log
// auxiliaries; needed whenever the extraction ratios move under fixed beams.
void refresh_rate_objective(ScaState* st, const SceneConfig& sc) {
  const int K = static_cast<int>(st->a.size());
  const int L = static_cast<int>(st->c.rows());
  st->lambda = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < L; ++l) {
      const double rate = sc.semantic.iota / st->rho[k] * kLog2e *
                          (st->a[k] - st->b[k] + st->d(l, k) - st->c(l, k));
      st->lambda = std::min(st->lambda, rate);
    }
  st->objective = st->cfg.kappa1 * st->lambda -
                  st->cfg.kappa2 * st->t.sum() / st->crb_norm;
}

OptimizeResult optimize_impl(const SceneConfig& sc, const DesignChannels& ch,
                             const ScaConfig& cfg, RngStream& rng,
                             const ScaState* start) {
  OptimizeResult out;
  ScaState st = start ? *start : init_state(sc, ch, cfg, &rng);
  double last_obj = -std::numeric_limits<double>::infinity();
  bool have_last = false;
  bool any_round_ok = false;
  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    const std::vector<MatC> prev_w = st.w, prev_r = st.r;
    st = sca_iterate(st, sc, ch);
    if (!st.solver_ok) {
      // A failed refinement round leaves the incumbent from the earlier
      // rounds intact; only a failure with nothing to fall back on counts.
      st.solver_ok = any_round_ok;
      break;
    }
    any_round_ok = true;
    if (cfg.semantic) {
      const VecD d = secrecy_exponents(st);
      const double p_rem =
          std::max(0.0, sc.power_budget - total_trace(st.w, st.r));
      VecD ub = VecD::Ones(d.size());
      if (st.lambda > 1e-9)
        for (int k = 0; k < d.size(); ++k)
          if (d[k] > 0.0)
            ub[k] = std::min(1.0, sc.semantic.iota * d[k] / st.lambda);
      const RhoUpdate ru = update_rho(d, p_rem, sc.semantic.extraction_coeff,
                                      sc.semantic.iota, st.rho_lb, ub);
      st.rho = ru.rho;
      refresh_rate_objective(&st, sc);
    }
    st.outer_iterations = outer + 1;
    double dw = 0.0, dr = 0.0;
    for (size_t k = 0; k < prev_w.size(); ++k)
      dw = std::max(dw, (st.w[k] - prev_w[k]).norm());
    for (size_t l = 0; l < prev_r.size(); ++l)
      dr = std::max(dr, (st.r[l] - prev_r[l]).norm());
    if (dw <= cfg.beam_tol_w && dr <= cfg.beam_tol_r) break;
    // The alternation has no useful progress left once a whole round barely
    // moves the objective, even if the beams still drift.
    if (have_last &&
        st.objective - last_obj <= 1e-4 * (1.0 + std::abs(last_obj)))
      break;
    last_obj = st.objective;
    have_last = true;
  }
  out.state = st;
  out.outer_iterations = st.outer_iterations;
  out.rankone = gaussian_randomization(st, sc, ch, cfg.n_randomization, rng);
  return out;
}

}  // namespace

OptimizeResult optimize_beams(const SceneConfig& sc, const DesignChannels& ch,
                              const ScaConfig& cfg, RngStream& rng) {
  return optimize_impl(sc, ch, cfg, rng, nullptr);
}

Episode make_episode(const SceneConfig& sc, const TrackingConfig& track,
                     const ScaConfig& cfg, std::uint64_t seed) {
  ensure_valid(sc);
  Episode ep;
  ep.scene = sc;
  ep.track = track;
  ep.cfg = cfg;
  ep.seed = seed;
  for (const auto& p : sc.patients) {
    VecD q0(4);
    q0 << p.angle, p.distance, p.speed, pathloss_beta(sc, p.distance);
    ep.truths.emplace_back(q0, track);
    ep.trackers.push_back(make_imm(q0, track));
  }
  ep.beams = uniform_beams(sc);
  return ep;
}

SlotRecord algorithm1_step(Episode* ep) {
  const SceneConfig& sc = ep->scene;
  const int L = static_cast<int>(ep->truths.size());
  const int t = ep->slot;
  SlotRecord rec;
  rec.slot = t;

  // Fused one-step predictions drive the design before the echo exists.
  VecD th_pred(L), d_pred(L), beta_pred(L);
  for (int l = 0; l < L; ++l) {
    const VecD qp = imm_predict(ep->trackers[l]);
    th_pred[l] = qp[0];
    d_pred[l] = std::max(qp[1], ep->track.d_floor);
    beta_pred[l] = qp[3];
  }
  const DesignChannels ch = design_channels(sc, th_pred, d_pred, beta_pred);

  RngStream rand_rng(ep->seed, "slot-" + std::to_string(t) + "-rand");
  ScaState carry;
  const ScaState* start = nullptr;
  if (ep->initialized) {
    carry = ep->state;
    carry.solver_ok = true;
    carry.sca_iterations = 0;
    carry.solver_iterations = 0;
    refresh_anchors(&carry, sc, ch, nullptr, nullptr);
    const MatC rx = sum_cov(carry.w, carry.r, sc.n_antennas);
    for (int l = 0; l < L; ++l) {
      const FimResult fr =
          fim_crb(rx, ch.theta_pat[l], cd(ch.beta_pat[l], 0.0),
                  sc.snapshots_per_slot, sc.sigma2_e);
      carry.fim_scale[l] = std::max(fr.j(0, 0), 1e-12);
      carry.fim_scale_b[l] = std::max(fr.j(1, 1), 1e-12);
    }
    start = &carry;
  }
  const OptimizeResult opt = optimize_impl(sc, ch, ep->cfg, rand_rng, start);
  rec.solver_ok = opt.state.solver_ok;
  rec.solver_iterations = opt.state.solver_iterations;
  if (opt.state.solver_ok || !ep->initialized) {
    ep->state = opt.state;
    ep->beams = opt.rankone.beams;
  }
  ep->initialized = true;

  rec.rho = ep->state.rho;
  rec.lambda = ep->state.lambda;
  rec.objective = opt.rankone.eval.objective;
  rec.ssr = opt.rankone.eval.ssr;
  rec.min_ssr = opt.rankone.eval.min_ssr;
  rec.sum_crb = opt.rankone.eval.sum_crb;
  rec.power_tx = total_trace(ep->state.w, ep->state.r);
  rec.power_comp =
      -sc.semantic.extraction_coeff * ep->state.rho.array().log().sum();

  // The echo happens at the true states; measurement quality scales with the
  // sensing power the design actually parks on each patient.
  RngStream truth_rng(ep->seed, "slot-" + std::to_string(t) + "-truth");
  RngStream meas_rng(ep->seed, "slot-" + std::to_string(t) + "-meas");
  const MatC rx = transmit_covariance(ep->beams);
  const VecD cvec = (VecD(3) << ep->track.c_theta, ep->track.c_d,
                     ep->track.c_v)
                        .finished();
  rec.theta_true.resize(L);
  rec.d_true.resize(L);
  rec.theta_pred = th_pred;
  rec.d_pred = d_pred;
  rec.theta_est.resize(L);
  rec.d_est.resize(L);
  for (int l = 0; l < L; ++l) {
    ep->truths[l].step(ep->track, truth_rng);
    const VecD& q = ep->truths[l].state;
    rec.theta_true[l] = q[0];
    rec.d_true[l] = q[1];
    const VecC a = steering(q[0], sc.n_antennas);
    const double sense = std::real(a.dot(rx * a));
    const double factor =
        std::max(sense / std::max(sc.power_budget, 1e-12), 1e-6);
    const Measurement z = synthesize_measurement(
        q, ep->track.meas_snr() * factor, cvec, meas_rng);
    const ImmStepLog log = imm_step(ep->trackers[l], z);
    rec.theta_est[l] = log.fused[0];
    rec.d_est[l] = log.fused[1];
  }

  ep->log.push_back(rec);
  ep->slot += 1;
  return rec;
}

std::vector<SlotRecord> run_episode(Episode* ep, int n_slots) {
  std::vector<SlotRecord> out;
  out.reserve(n_slots);
  for (int i = 0; i < n_slots; ++i) out.push_back(algorithm1_step(ep));
  return out;
}

std::string episode_csv(const Episode& ep) {
  std::ostringstream os;
  const int L = static_cast<int>(ep.truths.size());
  const int K = ep.scene.num_devices();
  os << "slot";
  for (int l = 0; l < L; ++l)
    os << ",theta_true_" << l << ",d_true_" << l << ",theta_pred_" << l
       << ",d_pred_" << l << ",theta_est_" << l << ",d_est_" << l;
  for (int k = 0; k < K; ++k) os << ",rho_" << k << ",ssr_" << k;
  os << ",min_ssr,sum_crb,lambda,objective,power_tx,power_comp,"
        "solver_iterations,solver_ok\n";
  char buf[64];
  const auto put = [&](double x) {
    std::snprintf(buf, sizeof(buf), ",%.17g", x);
    os << buf;
  };
  for (const auto& r : ep.log) {
    os << r.slot;
    for (int l = 0; l < L; ++l) {
      put(r.theta_true[l]);
      put(r.d_true[l]);
      put(r.theta_pred[l]);
      put(r.d_pred[l]);
      put(r.theta_est[l]);
      put(r.d_est[l]);
    }
    for (int k = 0; k < K; ++k) {
      put(r.rho[k]);
      put(r.ssr[k]);
    }
    put(r.min_ssr);
    put(r.sum_crb);
    put(r.lambda);
    put(r.objective);
    put(r.power_tx);
    put(r.power_comp);
    os << "," << r.solver_iterations << "," << (r.solver_ok ? 1 : 0) << "\n";
  }
  return os.str();
}

}  // namespace iscsc
