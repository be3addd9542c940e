#include "qlm/ball.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace qlm {

using std::numbers::pi;

namespace {

// Gauss-Legendre rule on [0,1], used once to compute radial moments
void gl01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 0; k < n; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2 * k + 1) * t * p1 - k * p2) / (k + 1);
      }
      double dp = n * (t * p0 - p1) / (t * t - 1.0);
      double dt = p0 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1.0, p1 = 0.0;
    for (int k = 0; k < n; ++k) {
      double p2 = p1;
      p1 = p0;
      p0 = ((2 * k + 1) * t * p1 - k * p2) / (k + 1);
    }
    double dp = n * (t * p0 - p1) / (t * t - 1.0);
    x[i] = 0.5 * (1.0 - t);  // map to [0,1], ascending in i
    w[i] = 1.0 / ((1.0 - t * t) * dp * dp);
  }
}

}  // namespace

void BallGrid::build() {
  const int N = n_r - 1;
  r.resize(n_r);
  for (int a = 0; a < n_r; ++a) r[a] = 0.5 * (1.0 - std::cos(a * pi / N));
  r[0] = 0.0;
  r[n_r - 1] = 1.0;

  // barycentric differentiation matrix for the radial nodes
  std::vector<double> bw(n_r, 1.0);
  for (int a = 0; a < n_r; ++a)
    for (int b = 0; b < n_r; ++b)
      if (b != a) bw[a] /= (r[a] - r[b]);
  Dr.assign((size_t)n_r * n_r, 0.0);
  for (int a = 0; a < n_r; ++a) {
    double diag = 0.0;
    for (int b = 0; b < n_r; ++b)
      if (b != a) {
        double v = (bw[b] / bw[a]) / (r[a] - r[b]);
        Dr[a * n_r + b] = v;
        diag -= v;
      }
    Dr[a * n_r + a] = diag;
  }

  // radial weights: exact for polynomials of degree < n_r against r^2 dr,
  // solved in the shifted-Chebyshev basis (perfectly conditioned here)
  std::vector<double> gx, gw;
  gl01(64, gx, gw);
  Eigen::MatrixXd V(n_r, n_r);
  Eigen::VectorXd m(n_r);
  for (int k = 0; k < n_r; ++k) {
    double mk = 0;
    for (size_t q = 0; q < gx.size(); ++q)
      mk += gw[q] * std::cos(k * std::acos(2 * gx[q] - 1)) * gx[q] * gx[q];
    m[k] = mk;
    for (int a = 0; a < n_r; ++a)
      V(k, a) = std::cos(k * std::acos(std::clamp(2 * r[a] - 1, -1.0, 1.0)));
  }
  Eigen::VectorXd wv = V.fullPivLu().solve(m);
  wr.assign(wv.data(), wv.data() + n_r);
}

BallPtr BallGrid::make(GridPtr sph, int nr) {
  if (nr < 4) throw ConfigError("BallGrid: n_r must be at least 4");
  auto b = std::make_shared<BallGrid>();
  b->n_r = nr;
  b->sphere = std::move(sph);
  b->build();
  return b;
}

BallPtr make_ball(int L, int n_r) { return BallGrid::make(make_grid(L), n_r); }

double BallGrid::quad(const std::vector<double>& v) const {
  if ((int)v.size() != nodes()) throw DimensionError("BallGrid::quad: size");
  const int N = sphere->nodes();
  double s = 0;
  std::vector<double> shell(N);
  for (int a = 0; a < n_r; ++a) {
    std::copy(v.begin() + (size_t)a * N, v.begin() + (size_t)(a + 1) * N,
              shell.begin());
    s += wr[a] * sphere->quad(shell);
  }
  return s;
}

std::vector<double> BallGrid::d_r(const std::vector<double>& u) const {
  if ((int)u.size() != nodes()) throw DimensionError("BallGrid::d_r: size");
  const int N = sphere->nodes();
  std::vector<double> out((size_t)nodes(), 0.0);
  for (int a = 0; a < n_r; ++a)
    for (int b = 0; b < n_r; ++b) {
      const double d = Dr[a * n_r + b];
      if (d == 0.0) continue;
      const double* src = &u[(size_t)b * N];
      double* dst = &out[(size_t)a * N];
      for (int k = 0; k < N; ++k) dst[k] += d * src[k];
    }
  return out;
}

std::array<std::vector<double>, 3> BallGrid::grad(
    const std::vector<double>& u) const {
  const int N = sphere->nodes();
  std::array<std::vector<double>, 3> out;
  for (auto& o : out) o.assign(nodes(), 0.0);
  std::vector<double> ur = d_r(u);
  std::vector<double> shell(N);
  for (int a = 0; a < n_r; ++a) {
    std::copy(u.begin() + (size_t)a * N, u.begin() + (size_t)(a + 1) * N,
              shell.begin());
    auto ut = sphere->d_theta(shell, 0);
    auto up = sphere->d_phi(shell);
    if (a == 0) {
      // center: project directional derivatives d_r u(0, n) = n . grad u(0)
      // onto the l=1 harmonics
      double v[3] = {0, 0, 0};
      for (int c = 0; c < 3; ++c) {
        std::vector<double> tmp(N);
        for (int i = 0; i < sphere->n_theta; ++i)
          for (int j = 0; j < sphere->n_phi; ++j) {
            const double t = sphere->theta[i], p = sphere->phi[j];
            const double n3[3] = {std::sin(t) * std::cos(p),
                                  std::sin(t) * std::sin(p), std::cos(t)};
            tmp[i * sphere->n_phi + j] =
                n3[c] * ur[idx(0, i * sphere->n_phi + j)];
          }
        v[c] = 3.0 / (4.0 * pi) * sphere->quad(tmp);
      }
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < N; ++k) out[c][idx(0, k)] = v[c];
      continue;
    }
    const double rinv = 1.0 / r[a];
    for (int i = 0; i < sphere->n_theta; ++i) {
      const double t = sphere->theta[i];
      const double st = std::sin(t), ct = std::cos(t);
      for (int j = 0; j < sphere->n_phi; ++j) {
        const double p = sphere->phi[j];
        const double sp = std::sin(p), cp = std::cos(p);
        const int k = i * sphere->n_phi + j;
        const int q = idx(a, k);
        const double n3[3] = {st * cp, st * sp, ct};
        const double et[3] = {ct * cp, ct * sp, -st};
        const double ep[3] = {-sp, cp, 0.0};
        for (int c = 0; c < 3; ++c)
          out[c][q] = n3[c] * ur[q] + rinv * (et[c] * ut[k] + ep[c] * up[k] / st);
      }
    }
  }
  return out;
}

SphereField BallGrid::trace(const std::vector<double>& u,
                            const std::string& name) const {
  const int N = sphere->nodes();
  SphereField f(sphere, 0, name);
  std::copy(u.begin() + (size_t)(n_r - 1) * N, u.end(), f.comp[0].begin());
  return f;
}

void BallDataSet::validate() const {
  const int n = grid->nodes();
  for (auto& c : g)
    if ((int)c.size() != n) throw DimensionError("BallDataSet: g size");
  for (auto& c : P)
    if ((int)c.size() != n) throw DimensionError("BallDataSet: P size");
  if ((int)mu.size() != n) throw DimensionError("BallDataSet: mu size");
  for (auto& c : J)
    if ((int)c.size() != n) throw DimensionError("BallDataSet: J size");
  for (int q = 0; q < n; ++q) {
    const double a = g[0][q], b = g[1][q], c = g[2][q];
    const double d = g[3][q], e = g[4][q], f = g[5][q];
    const double det2 = a * d - b * b;
    const double det3 = a * (d * f - e * e) - b * (b * f - c * e) +
                        c * (b * e - c * d);
    if (!(a > 0 && det2 > 0 && det3 > 0))
      throw GeometryError("BallDataSet: metric not positive definite at node " +
                          std::to_string(q));
  }
}

Metric3Inv invert_metric3(const BallDataSet& d) {
  const int n = d.grid->nodes();
  Metric3Inv out;
  for (auto& c : out.inv) c.resize(n);
  out.det.resize(n);
  for (int q = 0; q < n; ++q) {
    const double a = d.g[0][q], b = d.g[1][q], c = d.g[2][q];
    const double e = d.g[3][q], f = d.g[4][q], h = d.g[5][q];
    const double det = a * (e * h - f * f) - b * (b * h - c * f) +
                       c * (b * f - c * e);
    out.det[q] = det;
    out.inv[0][q] = (e * h - f * f) / det;
    out.inv[1][q] = (c * f - b * h) / det;
    out.inv[2][q] = (b * f - c * e) / det;
    out.inv[3][q] = (a * h - c * c) / det;
    out.inv[4][q] = (b * c - a * f) / det;
    out.inv[5][q] = (a * e - b * b) / det;
  }
  return out;
}

Christoffel3 christoffel3(const BallDataSet& d, const Metric3Inv& inv) {
  const int n = d.grid->nodes();
  std::array<std::array<std::vector<double>, 6>, 3> dg;  // dg[l][ij]
  if (d.has_dg) {
    dg = d.dg;
  } else {
    for (int s = 0; s < 6; ++s) {
      auto gr = d.grid->grad(d.g[s]);
      for (int l = 0; l < 3; ++l) dg[l][s] = std::move(gr[l]);
    }
  }
  Christoffel3 G;
  for (int k = 0; k < 3; ++k)
    for (int s = 0; s < 6; ++s) G[k][s].assign(n, 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      const int s = sym3(i, j);
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          const auto& ikl = inv.inv[sym3(k, l)];
          const auto& t1 = dg[i][sym3(j, l)];
          const auto& t2 = dg[j][sym3(i, l)];
          const auto& t3 = dg[l][s];
          auto& out = G[k][s];
          for (int q = 0; q < n; ++q)
            out[q] += 0.5 * ikl[q] * (t1[q] + t2[q] - t3[q]);
        }
    }
  return G;
}

std::vector<double> scalar_curvature3(const BallDataSet& d) {
  const int n = d.grid->nodes();
  Metric3Inv inv = invert_metric3(d);
  Christoffel3 G = christoffel3(d, inv);
  // dG[l][k][ij] = d_l Gamma^k_{ij}
  std::array<std::array<std::array<std::vector<double>, 6>, 3>, 3> dG;
  for (int k = 0; k < 3; ++k)
    for (int s = 0; s < 6; ++s) {
      auto gr = d.grid->grad(G[k][s]);
      for (int l = 0; l < 3; ++l) dG[l][k][s] = std::move(gr[l]);
    }
  std::vector<double> R(n, 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const auto& gij = inv.inv[sym3(i, j)];
      for (int q = 0; q < n; ++q) {
        double rij = 0;
        for (int k = 0; k < 3; ++k) {
          rij += dG[k][k][sym3(i, j)][q] - dG[i][k][sym3(k, j)][q];
          for (int l = 0; l < 3; ++l)
            rij += G[k][sym3(k, l)][q] * G[l][sym3(i, j)][q] -
                   G[k][sym3(i, l)][q] * G[l][sym3(k, j)][q];
        }
        R[q] += gij[q] * rij;
      }
    }
  return R;
}

ConstraintReport constraint_report(const BallDataSet& d) {
  d.validate();
  const int n = d.grid->nodes();
  Metric3Inv inv = invert_metric3(d);
  Christoffel3 G = christoffel3(d, inv);
  std::vector<double> R = scalar_curvature3(d);

  // tr P and |P|^2
  std::vector<double> trP(n, 0.0), P2(n, 0.0);
  for (int q = 0; q < n; ++q) {
    double pu[3][3];  // P with first index raised
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k)
          s += inv.inv[sym3(i, k)][q] * d.P[sym3(k, j)][q];
        pu[i][j] = s;
      }
    for (int i = 0; i < 3; ++i) trP[q] += pu[i][i];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) P2[q] += pu[i][j] * pu[j][i];
  }

  ConstraintReport rep;
  rep.hamiltonian.resize(n);
  for (int q = 0; q < n; ++q)
    rep.hamiltonian[q] = R[q] - P2[q] + trP[q] * trP[q] - 2.0 * d.mu[q];

  // momentum constraint: g^{jk} nabla_k P_{ij} - d_i tr P - J_i
  std::array<std::array<std::vector<double>, 6>, 3> dP;
  for (int s = 0; s < 6; ++s) {
    auto gr = d.grid->grad(d.P[s]);
    for (int l = 0; l < 3; ++l) dP[l][s] = std::move(gr[l]);
  }
  auto dtrP = d.grid->grad(trP);
  for (int i = 0; i < 3; ++i) rep.momentum[i].assign(n, 0.0);
  for (int q = 0; q < n; ++q)
    for (int i = 0; i < 3; ++i) {
      double s = 0;
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
          double cov = dP[k][sym3(i, j)][q];
          for (int l = 0; l < 3; ++l)
            cov -= G[l][sym3(k, i)][q] * d.P[sym3(l, j)][q] +
                   G[l][sym3(k, j)][q] * d.P[sym3(i, l)][q];
          s += inv.inv[sym3(j, k)][q] * cov;
        }
      rep.momentum[i][q] = s - dtrP[i][q] - d.J[i][q];
    }

  rep.hamiltonian_max = 0;
  rep.momentum_max = 0;
  rep.dec_min = 1e300;
  for (int q = 0; q < n; ++q) {
    rep.hamiltonian_max = std::max(rep.hamiltonian_max,
                                   std::abs(rep.hamiltonian[q]));
    double j2 = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        j2 += inv.inv[sym3(i, j)][q] * d.J[i][q] * d.J[j][q];
    rep.dec_min = std::min(rep.dec_min, d.mu[q] - std::sqrt(std::max(j2, 0.0)));
    for (int i = 0; i < 3; ++i)
      rep.momentum_max = std::max(rep.momentum_max,
                                  std::abs(rep.momentum[i][q]));
  }
  rep.dominant_energy_ok = rep.dec_min >= -1e-10;
  return rep;
}

}  // namespace qlm
