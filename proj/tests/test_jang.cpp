#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "qlm/ball.hpp"

using namespace qlm;
using std::numbers::pi;

namespace {

std::vector<double> volume_field(const BallPtr& B,
                                 const std::function<double(double, double,
                                                            double)>& f) {
  std::vector<double> v(B->nodes());
  const auto& s = B->sphere;
  for (int a = 0; a < B->n_r; ++a)
    for (int i = 0; i < s->n_theta; ++i)
      for (int j = 0; j < s->n_phi; ++j) {
        double t = s->theta[i], p = s->phi[j], r = B->r[a];
        v[B->idx(a, i * s->n_phi + j)] =
            f(r * std::sin(t) * std::cos(p), r * std::sin(t) * std::sin(p),
              r * std::cos(t));
      }
  return v;
}

BallDataSet flat_data(const BallPtr& B) {
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
  d.name = "flat";
  return d;
}

double maxdiff(const std::vector<double>& a, const std::vector<double>& b) {
  double e = 0;
  for (size_t k = 0; k < a.size(); ++k) e = std::max(e, std::abs(a[k] - b[k]));
  return e;
}

}  // namespace

TEST_CASE("ball quadrature: volume and polynomial moments") {
  auto B = make_ball(8, 12);
  std::vector<double> one(B->nodes(), 1.0);
  CHECK(std::abs(B->quad(one) - 4 * pi / 3) < 1e-12);
  // int z^2 over unit ball = 4 pi / 15
  auto z2 = volume_field(B, [](double, double, double z) { return z * z; });
  CHECK(std::abs(B->quad(z2) - 4 * pi / 15) < 1e-12);
  // int r^4 = 4 pi / 7
  auto r4 = volume_field(B, [](double x, double y, double z) {
    double r2 = x * x + y * y + z * z;
    return r2 * r2;
  });
  CHECK(std::abs(B->quad(r4) - 4 * pi / 7) < 1e-12);
}

TEST_CASE("Cartesian gradient: polynomial exactness including the center") {
  auto B = make_ball(8, 10);
  auto u = volume_field(B, [](double x, double y, double) { return x * x * y; });
  auto g = B->grad(u);
  auto gx = volume_field(B, [](double x, double y, double) { return 2 * x * y; });
  auto gy = volume_field(B, [](double x, double, double) { return x * x; });
  std::vector<double> gz(B->nodes(), 0.0);
  CHECK(maxdiff(g[0], gx) < 1e-12);
  CHECK(maxdiff(g[1], gy) < 1e-12);
  CHECK(maxdiff(g[2], gz) < 1e-12);
  // affine field: gradient constant everywhere, in particular at r=0
  auto v = volume_field(B, [](double x, double y, double z) {
    return 0.3 + 2 * x - y + 0.5 * z;
  });
  auto gv = B->grad(v);
  for (int k = 0; k < B->sphere->nodes(); ++k) {
    CHECK(std::abs(gv[0][B->idx(0, k)] - 2.0) < 1e-12);
    CHECK(std::abs(gv[1][B->idx(0, k)] + 1.0) < 1e-12);
    CHECK(std::abs(gv[2][B->idx(0, k)] - 0.5) < 1e-12);
  }
}

TEST_CASE("Cartesian gradient: spectral accuracy on a smooth field") {
  auto B = make_ball(12, 18);
  auto u = volume_field(B, [](double x, double y, double z) {
    return std::sin(x) * std::exp(0.5 * y) + std::cos(z);
  });
  auto g = B->grad(u);
  auto gx = volume_field(B, [](double x, double y, double) {
    return std::cos(x) * std::exp(0.5 * y);
  });
  auto gz = volume_field(B, [](double, double, double z) { return -std::sin(z); });
  CHECK(maxdiff(g[0], gx) < 1e-8);
  CHECK(maxdiff(g[2], gz) < 1e-8);
}

TEST_CASE("second derivatives: Laplacian of r^4 via repeated gradient") {
  auto B = make_ball(8, 12);
  auto u = volume_field(B, [](double x, double y, double z) {
    double r2 = x * x + y * y + z * z;
    return r2 * r2;
  });
  auto g = B->grad(u);
  std::vector<double> lap(B->nodes(), 0.0);
  for (int c = 0; c < 3; ++c) {
    auto gc = B->grad(g[c]);
    for (int q = 0; q < B->nodes(); ++q) lap[q] += gc[c][q];
  }
  auto oracle = volume_field(B, [](double x, double y, double z) {
    return 20.0 * (x * x + y * y + z * z);
  });
  CHECK(maxdiff(lap, oracle) < 1e-10);
}

TEST_CASE("flat data: all constraint residuals vanish") {
  auto B = make_ball(8, 10);
  auto d = flat_data(B);
  // engine-differentiated path: roundoff amplified by the radial operators
  d.has_dg = false;
  auto rep = constraint_report(d);
  CHECK(rep.hamiltonian_max < 1e-8);
  CHECK(rep.momentum_max < 1e-10);
  CHECK(rep.dominant_energy_ok);
  // with analytic metric derivatives the residual is exactly zero
  d.has_dg = true;
  for (int l = 0; l < 3; ++l)
    for (int s = 0; s < 6; ++s) d.dg[l][s].assign(B->nodes(), 0.0);
  auto rep2 = constraint_report(d);
  CHECK(rep2.hamiltonian_max == 0.0);
  CHECK(rep2.momentum_max == 0.0);
}

TEST_CASE("P = x delta: exact constraint closure with matched sources") {
  auto B = make_ball(8, 10);
  auto d = flat_data(B);
  auto xf = volume_field(B, [](double x, double, double) { return x; });
  for (int s : {0, 3, 5}) d.P[s] = xf;
  // R=0: hamiltonian = -3x^2 + 9x^2 - 2 mu  => mu = 3x^2
  d.mu = volume_field(B, [](double x, double, double) { return 3 * x * x; });
  // div P - d trP = (1-3) e_x  => J = -2 e_x
  d.J[0].assign(B->nodes(), -2.0);
  auto rep = constraint_report(d);
  CHECK(rep.hamiltonian_max < 1e-8);
  CHECK(rep.momentum_max < 1e-10);
}

TEST_CASE("scalar curvature of a conformally flat metric") {
  auto B = make_ball(10, 14);
  auto d = flat_data(B);
  auto psi = volume_field(B, [](double x, double y, double z) {
    return 1.0 + 0.05 * (x * x + y * y + 2 * z * z);
  });
  for (int q = 0; q < B->nodes(); ++q) {
    double p4 = std::pow(psi[q], 4);
    for (int s : {0, 3, 5}) d.g[s][q] = p4;
  }
  d.has_dg = false;  // exercise the engine-differentiated metric path
  auto R = scalar_curvature3(d);
  // R = -8 psi^-5 lap(psi), lap(psi) = 0.4
  double e = 0;
  for (int q = 0; q < B->nodes(); ++q)
    e = std::max(e, std::abs(R[q] + 8.0 * 0.4 / std::pow(psi[q], 5)));
  CHECK(e < 1e-7);
}

TEST_CASE("dominant energy violation is flagged") {
  auto B = make_ball(6, 8);
  auto d = flat_data(B);
  d.J[2].assign(B->nodes(), 0.1);
  auto rep = constraint_report(d);
  CHECK_FALSE(rep.dominant_energy_ok);
  CHECK(rep.dec_min < -0.09);
}

TEST_CASE("non-positive metric rejected") {
  auto B = make_ball(6, 8);
  auto d = flat_data(B);
  d.g[0][5] = -1.0;
  CHECK_THROWS_AS(d.validate(), GeometryError);
}

// ---------------------------------------------------------------------------
// graph-equation solver
// ---------------------------------------------------------------------------
#include "qlm/jang.hpp"

namespace {

BallDataSet flat_with_p(const BallPtr& B, double lam) {
  auto d = flat_data(B);
  const int n = B->nodes();
  for (int s : {0, 3, 5}) d.P[s].assign(n, lam);
  d.mu.assign(n, 3 * lam * lam);
  d.name = "flat_with_P";
  return d;
}

// radial profile u = f' for P = lambda * delta on the flat ball:
//   u' = W^3 lambda (2 + 1/W^2) - 2 u W^2 / r,  W^2 = 1 + u^2, u(0) = 0.
// Returns u(r) and F(r) = int_0^r u at the requested ascending radii.
void radial_ode(double lam, const std::vector<double>& targets,
                std::vector<double>& u_out, std::vector<double>& F_out) {
  auto rhs = [lam](double r, double u) {
    const double W2 = 1.0 + u * u;
    const double W = std::sqrt(W2);
    return W2 * W * lam * (2.0 + 1.0 / W2) - 2.0 * u * W2 / std::max(r, 1e-12);
  };
  double r = 1e-10, u = lam * 1e-10, F = 0;
  u_out.clear();
  F_out.clear();
  for (double rt : targets) {
    while (r < rt - 1e-15) {
      double h = std::min(1e-5, rt - r);
      double k1u = rhs(r, u), k1F = u;
      double k2u = rhs(r + h / 2, u + h / 2 * k1u), k2F = u + h / 2 * k1u;
      double k3u = rhs(r + h / 2, u + h / 2 * k2u), k3F = u + h / 2 * k2u;
      double k4u = rhs(r + h, u + h * k3u), k4F = u + h * k3u;
      u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
      F += h / 6 * (k1F + 2 * k2F + 2 * k3F + k4F);
      r += h;
    }
    u_out.push_back(u);
    F_out.push_back(F);
  }
}

}  // namespace

TEST_CASE("trivial data: zero boundary height gives the zero solution") {
  auto B = make_ball(6, 8);
  auto d = flat_data(B);
  SphereField tau(B->sphere, 0, "tau");
  tau[0].assign(B->sphere->nodes(), 0.0);
  auto out = solve_jang(d, tau);
  REQUIRE_FALSE(out.blew_up);
  double fmax = 0;
  for (double v : out.sol.f) fmax = std::max(fmax, std::abs(v));
  CHECK(fmax == 0.0);
  CHECK(out.sol.residual_max == 0.0);
  // boundary package: flat round sphere
  for (int k = 0; k < B->sphere->nodes(); ++k) {
    CHECK(std::abs(out.sol.boundary.ktilde[0][k] - 2.0) < 1e-10);
    CHECK(std::abs(out.sol.boundary.accel_term[0][k]) < 1e-12);
    CHECK(std::abs(out.sol.boundary.momentum_term[0][k]) < 1e-12);
    CHECK(std::abs(out.sol.boundary.f3[0][k]) < 1e-12);
    CHECK(std::abs(out.sol.boundary.phi[0][k]) < 1e-12);
  }
  auto rep = x_field_and_energy_report(out.sol, d);
  CHECK(rep.dominant_energy_ok);
  CHECK(std::abs(rep.min_mean_condition - 2.0) < 1e-10);
  CHECK(std::abs(rep.min_curvature_condition) < 1e-8);
}

TEST_CASE("constant boundary height gives the constant solution") {
  auto B = make_ball(6, 8);
  auto d = flat_data(B);
  SphereField tau(B->sphere, 0, "tau");
  tau[0].assign(B->sphere->nodes(), 0.7);
  auto out = solve_jang(d, tau);
  REQUIRE_FALSE(out.blew_up);
  for (double v : out.sol.f) CHECK(std::abs(v - 0.7) < 1e-12);
}

TEST_CASE("P = lambda g on the flat ball: radial profile oracle") {
  const double lam = 0.05;
  auto B = make_ball(6, 14);
  auto d = flat_with_p(B, lam);
  SphereField tau(B->sphere, 0, "tau");
  tau[0].assign(B->sphere->nodes(), 0.0);
  JangOptions opt;
  opt.tol = 1e-10;
  auto out = solve_jang(d, tau, opt);
  REQUIRE_FALSE(out.blew_up);

  std::vector<double> u_or, F_or;
  radial_ode(lam, B->r, u_or, F_or);
  double err = 0;
  for (int a = 0; a < B->n_r; ++a) {
    const double f_or = F_or[a] - F_or[B->n_r - 1];
    for (int k = 0; k < B->sphere->nodes(); ++k)
      err = std::max(err, std::abs(out.sol.f[B->idx(a, k)] - f_or));
  }
  CHECK(err < 1e-7);

  // independent residual routine
  auto res = jang_residual(d, out.sol.f);
  double rmax = 0;
  for (int a = 0; a <= B->n_r - 2; ++a)
    for (int k = 0; k < B->sphere->nodes(); ++k)
      rmax = std::max(rmax, std::abs(res[B->idx(a, k)]));
  CHECK(rmax < 1e-8);

  // boundary package against the radial closed forms
  const double u1 = u_or.back();
  const double W1 = std::sqrt(1.0 + u1 * u1);
  const double kt_or = 2.0 / W1;
  const double mom_or = lam * u1 / (W1 * W1);
  // reduction identity: kt - accel + mom = W k - f3 * trP_Sigma (tau = 0)
  const double combo_or = 2.0 * W1 - 2.0 * lam * u1;
  const double acc_or = kt_or + mom_or - combo_or;
  for (int k = 0; k < B->sphere->nodes(); ++k) {
    CHECK(std::abs(out.sol.boundary.ktilde[0][k] - kt_or) < 1e-7);
    CHECK(std::abs(out.sol.boundary.momentum_term[0][k] - mom_or) < 1e-7);
    CHECK(std::abs(out.sol.boundary.accel_term[0][k] - acc_or) < 1e-6);
    CHECK(std::abs(out.sol.boundary.f3[0][k] - u1) < 1e-7);
    CHECK(std::abs(std::sinh(out.sol.boundary.phi[0][k]) + u1) < 1e-7);
  }
  auto rep = x_field_and_energy_report(out.sol, d);
  CHECK(rep.dominant_energy_ok);
  CHECK(rep.min_mean_condition > 0.0);
}

TEST_CASE("conformally round metric: boundary mean curvature closed form") {
  auto B = make_ball(8, 12);
  auto d = flat_data(B);
  auto psi = volume_field(B, [](double x, double y, double z) {
    return 1.0 + 0.1 * (x * x + y * y + z * z);
  });
  for (int q = 0; q < B->nodes(); ++q)
    for (int s : {0, 3, 5}) d.g[s][q] = std::pow(psi[q], 4);
  d.has_dg = false;
  SphereField tau(B->sphere, 0, "tau");
  tau[0].assign(B->sphere->nodes(), 0.0);
  auto out = solve_jang(d, tau);
  REQUIRE_FALSE(out.blew_up);
  // k = (4 psi'/psi + 2/r) / psi^2 at r=1
  const double p1 = 1.1, dp1 = 0.2;
  const double kt_or = (4 * dp1 / p1 + 2.0) / (p1 * p1);
  for (int k = 0; k < B->sphere->nodes(); ++k)
    CHECK(std::abs(out.sol.boundary.ktilde[0][k] - kt_or) < 1e-8);
}

TEST_CASE("tilted constant metric: linear exact solution and round shadow") {
  const double a = 0.3;
  auto B = make_ball(6, 10);
  auto d = flat_data(B);
  d.g[5].assign(B->nodes(), 1.0 - a * a);
  d.name = "tilted";
  SphereField tau(B->sphere, 0, "tau");
  tau[0].resize(B->sphere->nodes());
  const auto S = B->sphere;
  for (int i = 0; i < S->n_theta; ++i)
    for (int j = 0; j < S->n_phi; ++j)
      tau[0][i * S->n_phi + j] = a * std::cos(S->theta[i]);
  auto out = solve_jang(d, tau);
  REQUIRE_FALSE(out.blew_up);
  // exact solution f = a z
  auto fz = volume_field(B, [a](double, double, double z) { return a * z; });
  CHECK(maxdiff(out.sol.f, fz) < 1e-9);
  // graph shadow metric is exactly round
  for (int i = 0; i < S->n_theta; ++i)
    for (int j = 0; j < S->n_phi; ++j) {
      const int k = i * S->n_phi + j;
      const double s2 = std::pow(std::sin(S->theta[i]), 2);
      CHECK(std::abs(out.sol.boundary.sigma_hat[0][k] - 1.0) < 1e-10);
      CHECK(std::abs(out.sol.boundary.sigma_hat[1][k]) < 1e-10);
      CHECK(std::abs(out.sol.boundary.sigma_hat[2][k] - s2) < 1e-10);
    }
  // boost angle consistency: sinh(phi) = -f3 / sqrt(1 + |dtau|^2_sigma)
  std::vector<double> dttau = S->d_theta(tau[0], 0), dptau = S->d_phi(tau[0]);
  for (int k = 0; k < S->nodes(); ++k) {
    const double stt = out.sol.boundary.sigma[0][k];
    const double stp = out.sol.boundary.sigma[1][k];
    const double spp = out.sol.boundary.sigma[2][k];
    const double det = stt * spp - stp * stp;
    const double dt2 = (spp * dttau[k] * dttau[k] -
                        2 * stp * dttau[k] * dptau[k] +
                        stt * dptau[k] * dptau[k]) / det;
    const double sh = -out.sol.boundary.f3[0][k] / std::sqrt(1.0 + dt2);
    CHECK(std::abs(std::sinh(out.sol.boundary.phi[0][k]) - sh) < 1e-10);
  }
}

TEST_CASE("vertical translation invariance") {
  const double lam = 0.05, c = 0.4;
  auto B = make_ball(6, 10);
  auto d = flat_with_p(B, lam);
  SphereField tau0(B->sphere, 0, "tau"), tauc(B->sphere, 0, "tau");
  tau0[0].assign(B->sphere->nodes(), 0.0);
  tauc[0].assign(B->sphere->nodes(), c);
  JangOptions opt;
  opt.tol = 1e-10;
  auto o0 = solve_jang(d, tau0, opt);
  auto oc = solve_jang(d, tauc, opt);
  REQUIRE_FALSE(o0.blew_up);
  REQUIRE_FALSE(oc.blew_up);
  double e = 0;
  for (int q = 0; q < B->nodes(); ++q)
    e = std::max(e, std::abs(oc.sol.f[q] - o0.sol.f[q] - c));
  CHECK(e < 1e-9);
}

TEST_CASE("marginally trapped interior sphere obstructs the solve") {
  // P = lambda g with |lambda| > 2: the expansion 2/r - 2 lambda changes sign
  // inside the ball and the height function develops a cylinder
  const double lam = -2.0;
  auto B = make_ball(4, 12);
  auto d = flat_with_p(B, lam);
  SphereField tau(B->sphere, 0, "tau");
  tau[0].assign(B->sphere->nodes(), 0.0);
  JangOptions opt;
  opt.max_iter = 80;
  auto out = solve_jang(d, tau, opt);
  CHECK(out.blew_up);
  if (out.blew_up) CHECK(out.obstruction.max_gradient > 1e6);
}
