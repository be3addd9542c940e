#include "qlm/catalog.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace qlm {
namespace {

SphereField round_metric(const GridPtr& g, double r2) {
  SphereField m(g, 2, "round");
  const int N = g->nodes();
  m[0].assign(N, r2);
  m[1].assign(N, 0.0);
  m[2].resize(N);
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j)
      m[2][i * g->n_phi + j] = r2 * std::pow(std::sin(g->theta[i]), 2);
  return m;
}

SphereField const_scalar(const GridPtr& g, double v, const std::string& n) {
  SphereField f(g, 0, n);
  f[0].assign(g->nodes(), v);
  return f;
}

// Boundary sphere |x| = r of a slice t = u(x), u = c1 x3 + c2 x3^2, in
// Minkowski space.  The surface is X = (tau(theta), r n), tau = u(r cos
// theta); sigma, |H|, alpha_H and the in-slice mean curvature all follow
// from the flat ambient geometry.
BoundaryCase minkowski_height_sphere(const std::string& name, double c1,
                                     double c2, double r, const GridPtr& g) {
  const int N = g->nodes();
  const int np = g->n_phi;

  // slope of the slice along the surface; spacelike requires |u'| < 1
  const double wmax = std::max(std::abs(c1 + 2 * c2 * r),
                               std::abs(c1 - 2 * c2 * r));
  if (wmax >= 1.0)
    throw GeometryError(name + ": slice not spacelike (|u'| = " +
                        std::to_string(wmax) + " >= 1)");

  BoundaryCase out;
  out.data.grid = g;
  out.data.provenance = name;

  SphereField tau(g, 0, "tau");
  tau[0].resize(N);
  SphereField sigma(g, 2, "sigma");
  for (auto& c : sigma.comp) c.assign(N, 0.0);

  std::vector<double> wbar(N), ct(N), stv(N);
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < np; ++j) {
      const int k = i * np + j;
      const double t = g->theta[i];
      ct[k] = std::cos(t);
      stv[k] = std::sin(t);
      const double z = r * ct[k];
      tau[0][k] = c1 * z + c2 * z * z;
      wbar[k] = c1 + 2 * c2 * z;
      sigma[0][k] = r * r * (1.0 - stv[k] * stv[k] * wbar[k] * wbar[k]);
      sigma[2][k] = r * r * stv[k] * stv[k];
    }
  out.tau_suggested = tau;
  out.data.sigma = sigma;

  // mean curvature vector H = Lap_sigma X in the flat ambient
  std::array<SphereField, 4> X;
  std::array<std::vector<double>, 4> H;
  for (int mu = 0; mu < 4; ++mu) {
    X[mu] = SphereField(g, 0, "X");
    X[mu][0].resize(N);
  }
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < np; ++j) {
      const int k = i * np + j;
      const double p = g->phi[j];
      X[0][0][k] = tau[0][k];
      X[1][0][k] = r * stv[k] * std::cos(p);
      X[2][0][k] = r * stv[k] * std::sin(p);
      X[3][0][k] = r * ct[k];
    }
  for (int mu = 0; mu < 4; ++mu)
    H[mu] = covariant_calculus(sigma, X[mu]).laplacian[0];

  out.data.H_norm = SphereField(g, 0, "H_norm");
  out.data.H_norm[0].resize(N);
  out.data.k_physical = SphereField(g, 0, "k");
  out.data.k_physical[0].resize(N);
  out.data.alpha_H = SphereField(g, 1, "alpha_H");
  out.data.alpha_H[0].assign(N, 0.0);
  out.data.alpha_H[1].assign(N, 0.0);

  // Minkowski product <A,B> = -A0 B0 + A.B
  auto mink = [](const double* A, const double* B) {
    return -A[0] * B[0] + A[1] * B[1] + A[2] * B[2] + A[3] * B[3];
  };

  std::array<std::vector<double>, 4> e3bar;  // -H/|H|
  for (auto& c : e3bar) c.resize(N);
  std::vector<double> sinh_b(N);

  for (int k = 0; k < N; ++k) {
    const double Hk[4] = {H[0][k], H[1][k], H[2][k], H[3][k]};
    const double s = std::sqrt(1.0 - wbar[k] * wbar[k]);
    const double e4[4] = {1.0 / s, 0.0, 0.0, wbar[k] / s};
    const double H2 = mink(Hk, Hk);
    if (H2 <= 0)
      throw GeometryError(name + ": mean curvature vector not spacelike");
    const double Hn = std::sqrt(H2);
    out.data.H_norm[0][k] = Hn;
    const double He4 = mink(Hk, e4);
    // in-slice part of H and the mean curvature of Sigma in Omega
    double Hs[4];
    for (int mu = 0; mu < 4; ++mu) Hs[mu] = Hk[mu] + He4 * e4[mu];
    out.data.k_physical[0][k] = std::sqrt(mink(Hs, Hs));
    for (int mu = 0; mu < 4; ++mu) e3bar[mu][k] = -Hk[mu] / Hn;
    sinh_b[k] = He4 / Hn;
  }

  // alpha_H(d_a) = <d_a e3bar, e4bar>, e4bar the boosted timelike partner
  std::array<std::vector<double>, 4> dth, dph;
  for (int mu = 0; mu < 4; ++mu) {
    dth[mu] = g->d_theta(e3bar[mu], 0);
    dph[mu] = g->d_phi(e3bar[mu]);
  }
  for (int k = 0; k < N; ++k) {
    const double s = std::sqrt(1.0 - wbar[k] * wbar[k]);
    const double e4[4] = {1.0 / s, 0.0, 0.0, wbar[k] / s};
    const double ch = std::sqrt(1.0 + sinh_b[k] * sinh_b[k]);
    // e3 (in-slice outward) = (e3bar - sinh_b e4bar-part): recover from
    // e3bar = cosh_b e3 + sinh_b e4  =>  e3 = (e3bar - sinh_b e4)/cosh_b
    double e3[4], e4bar[4];
    for (int mu = 0; mu < 4; ++mu) e3[mu] = (e3bar[mu][k] - sinh_b[k] * e4[mu]) / ch;
    for (int mu = 0; mu < 4; ++mu) e4bar[mu] = sinh_b[k] * e3[mu] + ch * e4[mu];
    const double dt[4] = {dth[0][k], dth[1][k], dth[2][k], dth[3][k]};
    const double dp[4] = {dph[0][k], dph[1][k], dph[2][k], dph[3][k]};
    out.data.alpha_H[0][k] = mink(dt, e4bar);
    out.data.alpha_H[1][k] = mink(dp, e4bar);
  }

  // closed-form reference mean curvature: the shadow embeds as a surface of
  // revolution rho = r sin(theta), zeta' = -r sin(theta) sqrt(1 - wbar^2)
  {
    SphereField k0(g, 0, "k0_oracle");
    k0[0].resize(N);
    for (int k = 0; k < N; ++k) {
      const double G1 = std::sqrt(1.0 - wbar[k] * wbar[k]);
      const double E = sigma[0][k];
      const double rho_p = r * ct[k];
      const double rho_pp = -r * stv[k];
      const double wb_p = -2 * c2 * r * stv[k];
      const double G1_p = -wbar[k] * wb_p / G1;
      const double z_p = -r * stv[k] * G1;
      const double z_pp = -r * ct[k] * G1 - r * stv[k] * G1_p;
      const double km = (rho_p * z_pp - z_p * rho_pp) / std::pow(E, 1.5);
      const double kp = -G1 / std::sqrt(E);
      k0[0][k] = -(km + kp);
    }
    out.oracle_k0 = k0;
  }

  out.oracle_M_WY = 0.0;
  // the slice metric delta - u'(x3)^2 dx3^2 is flat (graph over a plane),
  // so Sigma sits in flat space and the reference/physical curvatures agree
  out.oracle_M_BY = 0.0;
  if (c2 == 0.0) {
    out.oracle_M_LY = 0.0;
  } else {
    SphereField mu_s = area_density(sigma);
    SphereField ily(g, 0, "");
    ily[0].resize(N);
    for (int k = 0; k < N; ++k)
      ily[0][k] = (*out.oracle_k0)[0][k] - out.data.H_norm[0][k];
    out.oracle_M_LY = integrate(ily, mu_s) / (8 * std::numbers::pi);
  }

  // companion slice data: pullback of the slice geometry to the unit ball
  out.slice_data = [name, c1, c2, r](const BallPtr& B) {
    BallDataSet d;
    d.grid = B;
    const int n = B->nodes();
    for (int s = 0; s < 6; ++s) {
      d.g[s].assign(n, 0.0);
      d.P[s].assign(n, 0.0);
    }
    d.mu.assign(n, 0.0);
    for (auto& c : d.J) c.assign(n, 0.0);
    d.has_dg = true;
    for (int l = 0; l < 3; ++l)
      for (int s = 0; s < 6; ++s) d.dg[l][s].assign(n, 0.0);
    const auto S = B->sphere;
    for (int a = 0; a < B->n_r; ++a)
      for (int i = 0; i < S->n_theta; ++i)
        for (int j = 0; j < S->n_phi; ++j) {
          const int q = B->idx(a, i * S->n_phi + j);
          const double y3 = B->r[a] * std::cos(S->theta[i]);
          const double w = c1 + 2 * c2 * r * y3;
          const double s2 = 1.0 - w * w;
          d.g[0][q] = r * r;
          d.g[3][q] = r * r;
          d.g[5][q] = r * r * s2;
          d.dg[2][5][q] = -2 * r * r * w * (2 * c2 * r);
          d.P[5][q] = 2 * c2 * r * r / std::sqrt(s2);
        }
    d.name = name;
    return d;
  };
  out.exact_height = [c1, c2, r](const BallPtr& B) {
    std::vector<double> f(B->nodes());
    const auto S = B->sphere;
    for (int a = 0; a < B->n_r; ++a)
      for (int i = 0; i < S->n_theta; ++i)
        for (int j = 0; j < S->n_phi; ++j) {
          const double z = r * B->r[a] * std::cos(S->theta[i]);
          f[B->idx(a, i * S->n_phi + j)] = c1 * z + c2 * z * z;
        }
    return f;
  };
  return out;
}

BallDataSet flat_ball(const BallPtr& B, const std::string& name) {
  BallDataSet d;
  d.grid = B;
  const int n = B->nodes();
  for (int s = 0; s < 6; ++s) {
    d.g[s].assign(n, (s == 0 || s == 3 || s == 5) ? 1.0 : 0.0);
    d.P[s].assign(n, 0.0);
  }
  d.mu.assign(n, 0.0);
  for (auto& c : d.J) c.assign(n, 0.0);
  d.has_dg = true;
  for (int l = 0; l < 3; ++l)
    for (int s = 0; s < 6; ++s) d.dg[l][s].assign(n, 0.0);
  d.name = name;
  return d;
}

}  // namespace

BoundaryCase get_boundary_dataset(const std::string& name,
                                  const CatalogParams& p, const GridPtr& g) {
  if (name == "minkowski_round")
    return minkowski_height_sphere(name, 0.0, 0.0, p.r, g);
  if (name == "minkowski_graph")
    return minkowski_height_sphere(name, p.a, 0.0, p.r, g);
  if (name == "minkowski_boosted")
    return minkowski_height_sphere(name, p.v, p.v * p.v / (2 * p.r), p.r, g);
  if (name == "schwarzschild_round") {
    if (p.r <= 2 * p.M)
      throw ConfigError("schwarzschild_round: need r > 2M (r=" +
                        std::to_string(p.r) + ", M=" + std::to_string(p.M) +
                        ")");
    BoundaryCase out;
    out.data.grid = g;
    out.data.provenance = name;
    out.data.sigma = round_metric(g, p.r * p.r);
    const double k = (2.0 / p.r) * std::sqrt(1.0 - 2 * p.M / p.r);
    out.data.H_norm = const_scalar(g, k, "H_norm");
    out.data.k_physical = const_scalar(g, k, "k");
    out.data.alpha_H = SphereField(g, 1, "alpha_H");
    out.data.alpha_H[0].assign(g->nodes(), 0.0);
    out.data.alpha_H[1].assign(g->nodes(), 0.0);
    out.tau_suggested = const_scalar(g, 0.0, "tau");
    out.oracle_k0 = const_scalar(g, 2.0 / p.r, "k0_oracle");
    const double mass = p.r * (1.0 - std::sqrt(1.0 - 2 * p.M / p.r));
    out.oracle_M_BY = mass;
    out.oracle_M_LY = mass;
    out.oracle_M_WY = mass;
    return out;
  }
  throw ConfigError("unknown boundary catalog entry: " + name);
}

BallDataSet get_ball_dataset(const std::string& name, const CatalogParams& p,
                             const BallPtr& B) {
  if (name == "flat") return flat_ball(B, name);
  if (name == "flat_with_P") {
    auto d = flat_ball(B, name);
    const double lam = p.lambda;
    for (int s : {0, 3, 5}) d.P[s].assign(B->nodes(), lam);
    d.mu.assign(B->nodes(), 3 * lam * lam);
    return d;
  }
  if (name == "conformally_flat") {
    // psi = 1 + m / (2 sqrt(|x|^2 + d^2)): smooth regularization of the
    // conformal profile; mu = 6 m d^2 / (s^5 psi^5) >= 0, J = 0.
    auto d = flat_ball(B, name);
    const auto S = B->sphere;
    for (int a = 0; a < B->n_r; ++a) {
      const double r = B->r[a];
      const double s = std::sqrt(r * r + p.d * p.d);
      const double psi = 1.0 + p.m / (2 * s);
      const double p4 = std::pow(psi, 4);
      // d_l psi = -(m/2) x_l / s^3
      const double dpsi_over_x = -0.5 * p.m / (s * s * s);
      for (int i = 0; i < S->n_theta; ++i)
        for (int j = 0; j < S->n_phi; ++j) {
          const int q = B->idx(a, i * S->n_phi + j);
          const double t = S->theta[i], ph = S->phi[j];
          const double x[3] = {r * std::sin(t) * std::cos(ph),
                               r * std::sin(t) * std::sin(ph),
                               r * std::cos(t)};
          for (int c : {0, 3, 5}) d.g[c][q] = p4;
          for (int l = 0; l < 3; ++l) {
            const double dl = 4 * std::pow(psi, 3) * dpsi_over_x * x[l];
            for (int c : {0, 3, 5}) d.dg[l][c][q] = dl;
          }
          d.mu[q] = 6.0 * p.m * p.d * p.d /
                    (std::pow(s, 5) * std::pow(psi, 5));
        }
    }
    return d;
  }
  if (name == "bad_energy") {
    auto d = flat_ball(B, name);
    d.J[2].assign(B->nodes(), p.j);  // mu = 0 < |J|: dominant energy violated
    return d;
  }
  throw ConfigError("unknown ball catalog entry: " + name);
}

std::vector<CatalogEntryInfo> catalog_index() {
  return {
      {"minkowski_round", "boundary", "r"},
      {"minkowski_graph", "boundary", "a, r"},
      {"minkowski_boosted", "boundary", "v, r"},
      {"schwarzschild_round", "boundary", "M, r (r > 2M)"},
      {"flat", "ball", ""},
      {"flat_with_P", "ball", "lambda"},
      {"conformally_flat", "ball", "m, d"},
      {"bad_energy", "ball", "j"},
  };
}

std::string catalog_index_json() {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : catalog_index())
    j.push_back({{"name", e.name}, {"kind", e.kind}, {"params", e.params}});
  return j.dump(2);
}

void dump_catalog_entry(const std::string& name, const CatalogParams& p,
                        const std::string& dir, int L, int n_r) {
  std::filesystem::create_directories(dir);
  bool found = false;
  for (const auto& e : catalog_index())
    if (e.name == name) {
      found = true;
      if (e.kind == "boundary") {
        auto g = make_grid(L);
        auto c = get_boundary_dataset(name, p, g);
        dump_field_csv(c.data.sigma, dir + "/sigma.csv");
        dump_field_csv(c.data.H_norm, dir + "/H_norm.csv");
        dump_field_csv(c.data.k_physical, dir + "/k.csv");
        dump_field_csv(c.data.alpha_H, dir + "/alpha_H.csv");
        dump_field_csv(c.tau_suggested, dir + "/tau.csv");
      } else {
        auto B = make_ball(L, n_r);
        auto d = get_ball_dataset(name, p, B);
        std::ofstream os(dir + "/ball.csv");
        os << "r,theta,phi,gxx,gxy,gxz,gyy,gyz,gzz,Pxx,Pxy,Pxz,Pyy,Pyz,Pzz,"
              "mu,Jx,Jy,Jz\n";
        const auto S = B->sphere;
        for (int a = 0; a < B->n_r; ++a)
          for (int i = 0; i < S->n_theta; ++i)
            for (int j = 0; j < S->n_phi; ++j) {
              const int q = B->idx(a, i * S->n_phi + j);
              os << B->r[a] << "," << S->theta[i] << "," << S->phi[j];
              for (int s = 0; s < 6; ++s) os << "," << d.g[s][q];
              for (int s = 0; s < 6; ++s) os << "," << d.P[s][q];
              os << "," << d.mu[q];
              for (int s = 0; s < 3; ++s) os << "," << d.J[s][q];
              os << "\n";
            }
      }
    }
  if (!found) throw ConfigError("unknown catalog entry: " + name);
}

}  // namespace qlm
