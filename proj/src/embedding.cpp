#include "qlm/embedding.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace qlm {

using std::numbers::pi;

namespace {

// real orthonormal spherical-harmonic basis tables at the grid nodes
struct Basis {
  int M, N;
  // value / d_theta / d_phi, layout [n * N + node]
  std::vector<double> v, dt, dp;
};

Basis build_basis(const SphereGrid& g) {
  Basis b;
  b.M = (g.L + 1) * (g.L + 1);
  b.N = g.nodes();
  b.v.assign((size_t)b.M * b.N, 0.0);
  b.dt.assign((size_t)b.M * b.N, 0.0);
  b.dp.assign((size_t)b.M * b.N, 0.0);
  const double n0 = 1.0 / std::sqrt(2.0 * pi);
  int n = 0;
  for (int l = 0; l <= g.L; ++l)
    for (int m = -l; m <= l; ++m, ++n) {
      const int am = std::abs(m);
      const double fac = (m == 0) ? n0 : std::sqrt(2.0) * n0;
      for (int i = 0; i < g.n_theta; ++i) {
        const double P = g.pbar(l, am, i), dP = g.dpbar(l, am, i);
        for (int j = 0; j < g.n_phi; ++j) {
          const size_t idx = (size_t)n * b.N + i * g.n_phi + j;
          const double c = std::cos(am * g.phi[j]), s = std::sin(am * g.phi[j]);
          if (m >= 0) {
            b.v[idx] = fac * P * c;
            b.dt[idx] = fac * dP * c;
            b.dp[idx] = -fac * P * am * s;
          } else {
            b.v[idx] = fac * P * s;
            b.dt[idx] = fac * dP * s;
            b.dp[idx] = fac * P * am * c;
          }
        }
      }
    }
  return b;
}

struct NodalSurface {
  // per component c: values and first derivatives at nodes
  std::array<std::vector<double>, 3> X, Xt, Xp;
};

NodalSurface eval_surface(const Basis& b, const Eigen::VectorXd& coef) {
  NodalSurface s;
  for (int c = 0; c < 3; ++c) {
    s.X[c].assign(b.N, 0.0);
    s.Xt[c].assign(b.N, 0.0);
    s.Xp[c].assign(b.N, 0.0);
    for (int n = 0; n < b.M; ++n) {
      const double a = coef[c * b.M + n];
      if (a == 0.0) continue;
      const double* v = &b.v[(size_t)n * b.N];
      const double* dt = &b.dt[(size_t)n * b.N];
      const double* dp = &b.dp[(size_t)n * b.N];
      for (int k = 0; k < b.N; ++k) {
        s.X[c][k] += a * v[k];
        s.Xt[c][k] += a * dt[k];
        s.Xp[c][k] += a * dp[k];
      }
    }
  }
  return s;
}

// weighted isometry defect residual; also reports max unweighted defect
void residual(const SphereGrid& g, const NodalSurface& s,
              const SphereField& target, const std::vector<double>& sqw,
              Eigen::VectorXd& r, double& max_defect) {
  const int N = g.nodes();
  max_defect = 0.0;
  for (int k = 0; k < N; ++k) {
    double E = 0, F = 0, G = 0;
    for (int c = 0; c < 3; ++c) {
      E += s.Xt[c][k] * s.Xt[c][k];
      F += s.Xt[c][k] * s.Xp[c][k];
      G += s.Xp[c][k] * s.Xp[c][k];
    }
    const double d0 = E - target.comp[0][k];
    const double d1 = F - target.comp[1][k];
    const double d2 = G - target.comp[2][k];
    r[3 * k] = sqw[k] * d0;
    r[3 * k + 1] = sqw[k] * std::sqrt(2.0) * d1;
    r[3 * k + 2] = sqw[k] * d2;
    max_defect = std::max({max_defect, std::abs(d0), std::abs(d1), std::abs(d2)});
  }
}

bool gauss_newton(const SphereGrid& g, const Basis& b,
                  const SphereField& target, Eigen::VectorXd& coef, double tol,
                  int max_iter, std::vector<double>& defect_hist,
                  std::vector<double>& step_hist) {
  const int N = g.nodes(), M = b.M;
  std::vector<double> sqw(N);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j)
      sqw[i * g.n_phi + j] = std::sqrt(g.w[i] * g.dphi_weight());

  Eigen::VectorXd r(3 * N);
  Eigen::MatrixXd J(3 * N, 3 * M);
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    NodalSurface s = eval_surface(b, coef);
    double max_defect;
    residual(g, s, target, sqw, r, max_defect);
    defect_hist.push_back(max_defect);
    if (max_defect <= tol) return true;

    J.setZero();
    const double s2 = std::sqrt(2.0);
    for (int c = 0; c < 3; ++c)
      for (int n = 0; n < M; ++n) {
        const double* dt = &b.dt[(size_t)n * b.N];
        const double* dp = &b.dp[(size_t)n * b.N];
        const int col = c * M + n;
        for (int k = 0; k < N; ++k) {
          J(3 * k, col) = sqw[k] * 2.0 * s.Xt[c][k] * dt[k];
          J(3 * k + 1, col) =
              sqw[k] * s2 * (s.Xt[c][k] * dp[k] + s.Xp[c][k] * dt[k]);
          J(3 * k + 2, col) = sqw[k] * 2.0 * s.Xp[c][k] * dp[k];
        }
      }
    Eigen::MatrixXd H = J.transpose() * J;
    Eigen::VectorXd gvec = J.transpose() * r;
    const double scale = H.diagonal().maxCoeff();
    const double r2 = r.squaredNorm();
    bool accepted = false;
    for (int tries = 0; tries < 8 && !accepted; ++tries) {
      Eigen::MatrixXd Hl = H;
      Hl.diagonal().array() += std::max(lambda, 1e-13) * scale;
      Eigen::VectorXd step = Hl.ldlt().solve(-gvec);
      double alpha = 1.0;
      for (int ls = 0; ls < 10; ++ls) {
        Eigen::VectorXd trial = coef + alpha * step;
        NodalSurface st = eval_surface(b, trial);
        double md;
        Eigen::VectorXd rt(3 * N);
        residual(g, st, target, sqw, rt, md);
        if (rt.squaredNorm() < r2) {
          coef = trial;
          step_hist.push_back(alpha);
          accepted = true;
          lambda = std::max(lambda * 0.3, 0.0);
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) lambda = (lambda == 0.0) ? 1e-8 : lambda * 10.0;
    }
    if (!accepted) return false;  // stall
  }
  // final convergence check
  NodalSurface s = eval_surface(b, coef);
  double max_defect;
  residual(g, s, target, sqw, r, max_defect);
  defect_hist.push_back(max_defect);
  return max_defect <= tol;
}

// engine-based geometry of a nodal surface (X band-limited by construction)
void finalize(Embedding3& emb, const SphereField& target) {
  const auto& g = emb.grid;
  const int N = g->nodes();
  std::array<std::vector<double>, 3> Xt, Xp, Xtt, Xtp, Xpp;
  for (int c = 0; c < 3; ++c) {
    Xt[c] = g->d_theta(emb.X[c].comp[0], 0);
    Xp[c] = g->d_phi(emb.X[c].comp[0]);
    Xtt[c] = g->d_theta(Xt[c], 1);
    Xtp[c] = g->d_theta(Xp[c], 0);
    Xpp[c] = g->d_phi(Xp[c]);
  }
  emb.induced = SphereField(g, 2, "induced");
  emb.defect = SphereField(g, 2, "defect");
  for (int k = 0; k < N; ++k) {
    double E = 0, F = 0, G = 0;
    for (int c = 0; c < 3; ++c) {
      E += Xt[c][k] * Xt[c][k];
      F += Xt[c][k] * Xp[c][k];
      G += Xp[c][k] * Xp[c][k];
    }
    emb.induced.comp[0][k] = E;
    emb.induced.comp[1][k] = F;
    emb.induced.comp[2][k] = G;
    emb.defect.comp[0][k] = E - target.comp[0][k];
    emb.defect.comp[1][k] = F - target.comp[1][k];
    emb.defect.comp[2][k] = G - target.comp[2][k];
  }
  emb.defect_norm = 0;
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < N; ++k)
      emb.defect_norm = std::max(emb.defect_norm, std::abs(emb.defect.comp[c][k]));

  Christoffel ch = christoffel(emb.induced);
  Metric2Inv inv = invert_metric(emb.induced);
  for (int c = 0; c < 3; ++c) emb.normal[c] = SphereField(g, 0, "n");
  emb.II = SphereField(g, 2, "II");
  emb.k0 = SphereField(g, 0, "k0");
  for (int k = 0; k < N; ++k) {
    // outward normal = normalized Xt x Xp
    double nx = Xt[1][k] * Xp[2][k] - Xt[2][k] * Xp[1][k];
    double ny = Xt[2][k] * Xp[0][k] - Xt[0][k] * Xp[2][k];
    double nz = Xt[0][k] * Xp[1][k] - Xt[1][k] * Xp[0][k];
    double nn = std::sqrt(nx * nx + ny * ny + nz * nz);
    nx /= nn;
    ny /= nn;
    nz /= nn;
    emb.normal[0].comp[0][k] = nx;
    emb.normal[1].comp[0][k] = ny;
    emb.normal[2].comp[0][k] = nz;
    double II_tt = 0, II_tp = 0, II_pp = 0;
    const double nvec[3] = {nx, ny, nz};
    for (int c = 0; c < 3; ++c) {
      const double ctt = Xtt[c][k] - ch.c[0][k] * Xt[c][k] - ch.c[3][k] * Xp[c][k];
      const double ctp = Xtp[c][k] - ch.c[1][k] * Xt[c][k] - ch.c[4][k] * Xp[c][k];
      const double cpp = Xpp[c][k] - ch.c[2][k] * Xt[c][k] - ch.c[5][k] * Xp[c][k];
      II_tt -= ctt * nvec[c];
      II_tp -= ctp * nvec[c];
      II_pp -= cpp * nvec[c];
    }
    emb.II.comp[0][k] = II_tt;
    emb.II.comp[1][k] = II_tp;
    emb.II.comp[2][k] = II_pp;
    emb.k0.comp[0][k] =
        inv.itt[k] * II_tt + 2 * inv.itp[k] * II_tp + inv.ipp[k] * II_pp;
  }
}

void gauge_fix(const SphereGrid& g, const Basis& b, Eigen::VectorXd& coef,
               const SphereField& mu) {
  NodalSurface s = eval_surface(b, coef);
  const int N = g.nodes();
  // centroid removal (area-weighted)
  std::vector<double> wmu(N);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j)
      wmu[i * g.n_phi + j] =
          g.w[i] * g.dphi_weight() * mu.comp[0][i * g.n_phi + j];
  double area = 0;
  for (int k = 0; k < N; ++k) area += wmu[k];
  double cen[3] = {0, 0, 0};
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < N; ++k) cen[c] += wmu[k] * s.X[c][k];
    cen[c] /= area;
    for (int k = 0; k < N; ++k) s.X[c][k] -= cen[c];
  }
  // principal axes of the quadrupole
  Eigen::Matrix3d Q = Eigen::Matrix3d::Zero();
  for (int k = 0; k < N; ++k)
    for (int a = 0; a < 3; ++a)
      for (int c = 0; c < 3; ++c) Q(a, c) += wmu[k] * s.X[a][k] * s.X[c][k];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(Q);
  Eigen::Matrix3d R = es.eigenvectors().transpose();  // rows = axes, ascending
  // deterministic signs: largest-|entry| of each row positive; det = +1
  for (int a = 0; a < 3; ++a) {
    int imax = 0;
    for (int c = 1; c < 3; ++c)
      if (std::abs(R(a, c)) > std::abs(R(a, imax))) imax = c;
    if (R(a, imax) < 0) R.row(a) *= -1.0;
  }
  if (R.determinant() < 0) R.row(2) *= -1.0;
  // rotate nodal values, reproject to coefficients (basis orthonormal on the
  // round sphere, so projection = quadrature)
  std::array<std::vector<double>, 3> Xr;
  for (int a = 0; a < 3; ++a) {
    Xr[a].assign(N, 0.0);
    for (int k = 0; k < N; ++k)
      Xr[a][k] =
          R(a, 0) * s.X[0][k] + R(a, 1) * s.X[1][k] + R(a, 2) * s.X[2][k];
  }
  std::vector<double> wq(N);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j)
      wq[i * g.n_phi + j] = g.w[i] * g.dphi_weight();
  for (int c = 0; c < 3; ++c)
    for (int n = 0; n < b.M; ++n) {
      const double* v = &b.v[(size_t)n * b.N];
      double acc = 0;
      for (int k = 0; k < N; ++k) acc += wq[k] * v[k] * Xr[c][k];
      coef[c * b.M + n] = acc;
    }
}

Embedding3 embed_core(const SphereField& target, const SphereField& Ktarget,
                      const WeylOptions& opts) {
  const auto& g = target.grid;
  double minK = 1e300;
  for (double v : Ktarget.comp[0]) minK = std::min(minK, v);
  if (minK <= 0)
    throw GeometryError(
        "embed_weyl: target metric is not convex (min Gauss curvature " +
        std::to_string(minK) + ")");

  Basis b = build_basis(*g);
  SphereField mu = area_density(target);
  SphereField one = SphereField::scalar(g, [](double, double) { return 1.0; });
  const double area = integrate(one, mu);
  const double a0 = std::sqrt(area / (4 * pi));

  // round initial guess, projected onto the basis
  Eigen::VectorXd coef = Eigen::VectorXd::Zero(3 * b.M);
  {
    std::vector<double> wq(g->nodes());
    for (int i = 0; i < g->n_theta; ++i)
      for (int j = 0; j < g->n_phi; ++j)
        wq[i * g->n_phi + j] = g->w[i] * g->dphi_weight();
    for (int c = 0; c < 3; ++c) {
      std::vector<double> Xc(g->nodes());
      for (int i = 0; i < g->n_theta; ++i)
        for (int j = 0; j < g->n_phi; ++j) {
          double t = g->theta[i], p = g->phi[j];
          double n3[3] = {std::sin(t) * std::cos(p), std::sin(t) * std::sin(p),
                          std::cos(t)};
          Xc[i * g->n_phi + j] = a0 * n3[c];
        }
      for (int n = 0; n < b.M; ++n) {
        const double* v = &b.v[(size_t)n * b.N];
        double acc = 0;
        for (int k = 0; k < g->nodes(); ++k) acc += wq[k] * v[k] * Xc[k];
        coef[c * b.M + n] = acc;
      }
    }
  }

  Embedding3 emb;
  emb.grid = g;
  bool ok = gauss_newton(*g, b, target, coef, opts.tol, opts.max_iter,
                         emb.defect_history, emb.step_history);
  if (!ok && opts.allow_homotopy) {
    // continuation from the round metric of matched area to the target
    SphereField round_t(g, 2, "round");
    for (int i = 0; i < g->n_theta; ++i)
      for (int j = 0; j < g->n_phi; ++j) {
        int k = i * g->n_phi + j;
        double st = std::sin(g->theta[i]);
        round_t.comp[0][k] = a0 * a0;
        round_t.comp[1][k] = 0;
        round_t.comp[2][k] = a0 * a0 * st * st;
      }
    for (double t : {0.25, 0.5, 0.75, 1.0}) {
      SphereField blend(g, 2, "blend");
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < g->nodes(); ++k)
          blend.comp[c][k] = (1 - t) * round_t.comp[c][k] + t * target.comp[c][k];
      double tol_t = (t < 1.0) ? std::max(opts.tol, 1e-7) : opts.tol;
      ok = gauss_newton(*g, b, blend, coef, tol_t, opts.max_iter,
                        emb.defect_history, emb.step_history);
      if (!ok && t == 1.0) break;
    }
  }
  emb.iterations = (int)emb.defect_history.size();
  if (!ok) {
    std::string hist;
    for (double d : emb.defect_history) hist += std::to_string(d) + " ";
    throw ConvergenceError("embed_weyl: Gauss-Newton stagnation; defect history: " +
                           hist);
  }

  gauge_fix(*g, b, coef, mu);
  NodalSurface s = eval_surface(b, coef);
  for (int c = 0; c < 3; ++c) {
    emb.X[c] = SphereField(g, 0, std::string("X") + char('x' + c));
    emb.X[c].comp[0] = s.X[c];
  }
  finalize(emb, target);
  if (emb.defect_norm > 10 * opts.tol && opts.tol >= 1e-12) {
    // the gauge projection must not disturb the solution
    throw ConvergenceError("embed_weyl: defect degraded after gauge fixing: " +
                           std::to_string(emb.defect_norm));
  }
  return emb;
}

}  // namespace

Embedding3 embed_weyl(const SurfaceMetricBundle& bundle,
                      const WeylOptions& opts) {
  auto cr = convexity_check(bundle);
  if (!cr.admissible_a)
    throw GeometryError("embed_weyl: convexity check failed, min " +
                        std::to_string(cr.min_value));
  return embed_core(bundle.sigma_hat, bundle.K_hat, opts);
}

Embedding3 embed_weyl_metric(const SphereField& metric,
                             const WeylOptions& opts) {
  SphereField K = gauss_curvature(metric);
  return embed_core(metric, K, opts);
}

ExtrinsicData extrinsic_data_r3(const Embedding3& emb) {
  Embedding3 copy = emb;
  finalize(copy, emb.induced);  // recompute against own induced metric
  return {copy.k0, copy.II};
}

MinkowskiEmbedding lift_and_frames(const Embedding3& emb,
                                   const SphereField& tau) {
  if (emb.grid != tau.grid)
    throw DimensionError("lift_and_frames: grid mismatch");
  const auto& g = emb.grid;
  const int N = g->nodes();
  MinkowskiEmbedding m;
  m.grid = g;
  m.X0 = tau;
  m.Xi = emb.X;

  auto tau_t = g->d_theta(tau.comp[0], 0);
  auto tau_p = g->d_phi(tau.comp[0]);
  std::array<std::vector<double>, 3> Xt, Xp;
  for (int c = 0; c < 3; ++c) {
    Xt[c] = g->d_theta(emb.X[c].comp[0], 0);
    Xp[c] = g->d_phi(emb.X[c].comp[0]);
  }
  // induced Lorentzian metric sigma = induced_R3 - dtau (x) dtau
  m.sigma = SphereField(g, 2, "sigma");
  for (int k = 0; k < N; ++k) {
    m.sigma.comp[0][k] = emb.induced.comp[0][k] - tau_t[k] * tau_t[k];
    m.sigma.comp[1][k] = emb.induced.comp[1][k] - tau_t[k] * tau_p[k];
    m.sigma.comp[2][k] = emb.induced.comp[2][k] - tau_p[k] * tau_p[k];
  }
  Metric2Inv inv = invert_metric(m.sigma);

  for (int c = 0; c < 4; ++c) {
    m.e30[c] = SphereField(g, 0, "e30");
    m.e40[c] = SphereField(g, 0, "e40");
    m.H0[c] = SphereField(g, 0, "H0");
  }
  m.H0_norm_sq = SphereField(g, 0, "H0_norm_sq");
  m.alpha_e30 = SphereField(g, 1, "alpha_e30");

  // frames
  std::vector<double> den(N);
  for (int k = 0; k < N; ++k) {
    const double gt = inv.itt[k] * tau_t[k] + inv.itp[k] * tau_p[k];
    const double gp = inv.itp[k] * tau_t[k] + inv.ipp[k] * tau_p[k];
    const double gsq = gt * tau_t[k] + gp * tau_p[k];  // |grad tau|^2_sigma
    den[k] = std::sqrt(1.0 + gsq);
    // e40 = (T0 + grad tau^a t_a)/den with t_a = (tau_a, d_a X)
    m.e40[0].comp[0][k] = den[k];  // (1 + gsq)/den
    for (int c = 0; c < 3; ++c)
      m.e40[c + 1].comp[0][k] = (gt * Xt[c][k] + gp * Xp[c][k]) / den[k];
    m.e30[0].comp[0][k] = 0.0;
    for (int c = 0; c < 3; ++c)
      m.e30[c + 1].comp[0][k] = emb.normal[c].comp[0][k];
  }

  // mean curvature vector of i0 = (tau, X) w.r.t. sigma
  {
    Christoffel ch = christoffel(m.sigma);
    std::array<const std::vector<double>*, 4> comp_t{&tau_t, &Xt[0], &Xt[1],
                                                     &Xt[2]};
    std::array<const std::vector<double>*, 4> comp_p{&tau_p, &Xp[0], &Xp[1],
                                                     &Xp[2]};
    for (int c = 0; c < 4; ++c) {
      auto tt = g->d_theta(*comp_t[c], 1);
      auto tp = g->d_theta(*comp_p[c], 0);
      auto pp = g->d_phi(*comp_p[c]);
      for (int k = 0; k < N; ++k) {
        const double ft = (*comp_t[c])[k], fp = (*comp_p[c])[k];
        const double htt = tt[k] - ch.c[0][k] * ft - ch.c[3][k] * fp;
        const double htp = tp[k] - ch.c[1][k] * ft - ch.c[4][k] * fp;
        const double hpp = pp[k] - ch.c[2][k] * ft - ch.c[5][k] * fp;
        m.H0[c].comp[0][k] =
            inv.itt[k] * htt + 2 * inv.itp[k] * htp + inv.ipp[k] * hpp;
      }
    }
    for (int k = 0; k < N; ++k) {
      double s = -m.H0[0].comp[0][k] * m.H0[0].comp[0][k];
      for (int c = 1; c < 4; ++c) s += m.H0[c].comp[0][k] * m.H0[c].comp[0][k];
      m.H0_norm_sq.comp[0][k] = s;
    }
  }

  // connection 1-form alpha_a = <d_a e30, e40>_eta (e30 has no time part)
  {
    std::array<std::vector<double>, 3> nt, np;
    for (int c = 0; c < 3; ++c) {
      nt[c] = g->d_theta(emb.normal[c].comp[0], 0);
      np[c] = g->d_phi(emb.normal[c].comp[0]);
    }
    for (int k = 0; k < N; ++k) {
      double at = 0, ap = 0;
      for (int c = 0; c < 3; ++c) {
        at += nt[c][k] * m.e40[c + 1].comp[0][k];
        ap += np[c][k] * m.e40[c + 1].comp[0][k];
      }
      m.alpha_e30.comp[0][k] = at;
      m.alpha_e30.comp[1][k] = ap;
    }
  }
  return m;
}

Mean1Report verify_mean1(const Embedding3& emb, const MinkowskiEmbedding& memb,
                         const SurfaceMetricBundle& bundle) {
  const auto& g = emb.grid;
  const int N = g->nodes();
  Mean1Report rep;
  rep.lhs = integrate(emb.k0, bundle.mu_sigma_hat);

  Metric2Inv inv = invert_metric(memb.sigma);
  auto tau_t = g->d_theta(bundle.tau.comp[0], 0);
  auto tau_p = g->d_phi(bundle.tau.comp[0]);
  SphereField integrand(g, 0);
  for (int k = 0; k < N; ++k) {
    double H_dot_e3 = 0;
    for (int c = 1; c < 4; ++c)
      H_dot_e3 += memb.H0[c].comp[0][k] * memb.e30[c].comp[0][k];
    const double gt = inv.itt[k] * tau_t[k] + inv.itp[k] * tau_p[k];
    const double gp = inv.itp[k] * tau_t[k] + inv.ipp[k] * tau_p[k];
    const double gsq = gt * tau_t[k] + gp * tau_p[k];
    const double alpha_gradtau =
        memb.alpha_e30.comp[0][k] * gt + memb.alpha_e30.comp[1][k] * gp;
    integrand.comp[0][k] =
        -std::sqrt(1.0 + gsq) * H_dot_e3 - alpha_gradtau;
  }
  SphereField mu_sigma = area_density(memb.sigma);
  rep.rhs = integrate(integrand, mu_sigma);
  rep.residual = std::abs(rep.lhs - rep.rhs);
  return rep;
}

void dump_embedding(const Embedding3& emb, const std::string& path_prefix) {
  nlohmann::json j;
  for (int c = 0; c < 3; ++c) {
    auto coeffs = sh_analyze(emb.X[c]);
    std::vector<double> re, im;
    for (auto& z : coeffs) {
      re.push_back(z.real());
      im.push_back(z.imag());
    }
    j["coefficients"][std::string(1, char('x' + c))] = {{"re", re}, {"im", im}};
  }
  j["L"] = emb.grid->L;
  j["defect_norm"] = emb.defect_norm;
  std::ofstream(path_prefix + "_coefficients.json") << j.dump(2) << "\n";
  std::ofstream os(path_prefix + "_history.csv");
  os << "iter,defect_norm,step_size\n";
  for (size_t i = 0; i < emb.defect_history.size(); ++i) {
    os << i << "," << emb.defect_history[i] << ","
       << (i < emb.step_history.size() ? emb.step_history[i] : 0.0) << "\n";
  }
}

}  // namespace qlm
