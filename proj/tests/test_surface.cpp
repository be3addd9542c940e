#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qlm/sphere.hpp"
#include "qlm/surface.hpp"

using namespace qlm;
using std::numbers::pi;

namespace {

SphereField round_metric(const GridPtr& g, double r = 1.0) {
  SphereField m(g, 2, "round");
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j) {
      int k = i * g->n_phi + j;
      double st = std::sin(g->theta[i]);
      m.comp[0][k] = r * r;
      m.comp[1][k] = 0.0;
      m.comp[2][k] = r * r * st * st;
    }
  return m;
}

double field_max_err(const SphereField& f, double val) {
  double e = 0;
  for (double v : f.comp[0]) e = std::max(e, std::abs(v - val));
  return e;
}

// Brioschi determinant formula for K, used as an independent oracle.
// Uses only first/second partials of the components E, F, G.
SphereField brioschi(const SphereField& met) {
  const auto& g = met.grid;
  const auto& E = met.comp[0];
  const auto& F = met.comp[1];
  const auto& G = met.comp[2];
  auto Et = g->d_theta(E, 0), Ep = g->d_phi(E);
  auto Ft = g->d_theta(F, 1), Fp = g->d_phi(F);
  auto Gt = g->d_theta(G, 0), Gp = g->d_phi(G);
  auto Epp = g->d_phi(Ep);
  auto Gtt = g->d_theta(Gt, 1);
  auto Ftp = g->d_phi(Ft);
  SphereField K(g, 0, "K_brioschi");
  for (int k = 0; k < g->nodes(); ++k) {
    double det = E[k] * G[k] - F[k] * F[k];
    double m1[3][3] = {
        {-0.5 * Epp[k] + Ftp[k] - 0.5 * Gtt[k], 0.5 * Et[k],
         Ft[k] - 0.5 * Ep[k]},
        {Fp[k] - 0.5 * Gt[k], E[k], F[k]},
        {0.5 * Gp[k], F[k], G[k]}};
    double m2[3][3] = {{0.0, 0.5 * Ep[k], 0.5 * Gt[k]},
                       {0.5 * Ep[k], E[k], F[k]},
                       {0.5 * Gt[k], F[k], G[k]}};
    auto det3 = [](double m[3][3]) {
      return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
             m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
             m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    K.comp[0][k] = (det3(m1) - det3(m2)) / (det * det);
  }
  return K;
}

}  // namespace

TEST_CASE("round spheres have constant curvature") {
  auto g = make_grid(12);
  CHECK(field_max_err(gauss_curvature(round_metric(g, 1.0)), 1.0) < 1e-10);
  CHECK(field_max_err(gauss_curvature(round_metric(g, 2.0)), 0.25) < 1e-10);
}

TEST_CASE("Christoffel-route curvature matches Brioschi oracle") {
  auto g = make_grid(24);
  SphereField met = round_metric(g);
  // conformal perturbation e^{2u} round, u low band-limited
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j) {
      int k = i * g->n_phi + j;
      double u = 0.15 * std::sin(g->theta[i]) * std::cos(g->phi[j]) +
                 0.1 * std::cos(g->theta[i]);
      double e2u = std::exp(2 * u);
      met.comp[0][k] *= e2u;
      met.comp[2][k] *= e2u;
    }
  SphereField K1 = gauss_curvature(met);
  SphereField K2 = brioschi(met);
  double err = 0;
  for (int k = 0; k < g->nodes(); ++k)
    err = std::max(err, std::abs(K1.comp[0][k] - K2.comp[0][k]));
  CHECK(err < 1e-7);
}

TEST_CASE("bundle with tau = 0 and tau = const") {
  auto g = make_grid(12);
  SphereField sig = round_metric(g);
  SphereField tau0 = SphereField::scalar(g, [](double, double) { return 0.0; });
  SphereField tauc = SphereField::scalar(g, [](double, double) { return 1.7; });
  auto b0 = build_bundle(sig, tau0);
  auto bc = build_bundle(sig, tauc);
  CHECK(field_max_err(b0.area_ratio, 1.0) < 1e-12);
  for (int c = 0; c < 3; ++c) {
    double e = 0;
    for (int k = 0; k < g->nodes(); ++k) {
      e = std::max(e, std::abs(b0.sigma_hat.comp[c][k] - sig.comp[c][k]));
      e = std::max(e, std::abs(bc.sigma_hat.comp[c][k] - sig.comp[c][k]));
    }
    CHECK(e < 1e-12);
  }
  double e = 0;
  for (int k = 0; k < g->nodes(); ++k)
    e = std::max(e, std::abs(b0.K_hat.comp[0][k] - b0.K.comp[0][k]));
  CHECK(e < 1e-12);
}

TEST_CASE("sigma_hat - sigma = dtau x dtau nodewise") {
  auto g = make_grid(16);
  SphereField sig = round_metric(g);
  SphereField tau = SphereField::scalar(g, [](double t, double p) {
    return 0.3 * std::sin(t) * std::cos(p) + 0.1 * std::cos(t);
  });
  auto b = build_bundle(sig, tau);
  auto dt = g->d_theta(tau.comp[0], 0);
  auto dp = g->d_phi(tau.comp[0]);
  double e = 0;
  for (int k = 0; k < g->nodes(); ++k) {
    e = std::max(e, std::abs(b.sigma_hat.comp[0][k] - sig.comp[0][k] -
                             dt[k] * dt[k]));
    e = std::max(e, std::abs(b.sigma_hat.comp[1][k] - sig.comp[1][k] -
                             dt[k] * dp[k]));
    e = std::max(e, std::abs(b.sigma_hat.comp[2][k] - sig.comp[2][k] -
                             dp[k] * dp[k]));
  }
  CHECK(e < 1e-12);
}

TEST_CASE("projection formula for K_hat matches direct computation") {
  auto g = make_grid(24);
  SphereField sig = round_metric(g);
  SUBCASE("tau = 0.2 cos theta") {
    SphereField tau = SphereField::scalar(
        g, [](double t, double) { return 0.2 * std::cos(t); });
    auto b = build_bundle(sig, tau);
    double e = 0;
    for (int k = 0; k < g->nodes(); ++k)
      e = std::max(e, std::abs(b.K_hat.comp[0][k] - b.K_hat_direct.comp[0][k]));
    CHECK(e < 1e-7);
  }
  SUBCASE("tau = 0.3 sin theta cos phi") {
    SphereField tau = SphereField::scalar(
        g, [](double t, double p) { return 0.3 * std::sin(t) * std::cos(p); });
    auto b = build_bundle(sig, tau);
    double e = 0;
    for (int k = 0; k < g->nodes(); ++k)
      e = std::max(e, std::abs(b.K_hat.comp[0][k] - b.K_hat_direct.comp[0][k]));
    CHECK(e < 1e-7);
  }
}

TEST_CASE("Gauss-Bonnet for sigma and sigma_hat") {
  auto g = make_grid(24);
  SphereField sig = round_metric(g);
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j) {
      int k = i * g->n_phi + j;
      double u = 0.2 * std::cos(g->theta[i]) +
                 0.1 * std::sin(g->theta[i]) * std::sin(g->phi[j]);
      double e2u = std::exp(2 * u);
      sig.comp[0][k] *= e2u;
      sig.comp[2][k] *= e2u;
    }
  SphereField tau = SphereField::scalar(g, [](double t, double p) {
    return 0.25 * std::sin(t) * std::cos(p);
  });
  auto b = build_bundle(sig, tau);
  CHECK(std::abs(integrate(b.K, b.mu_sigma) - 4 * pi) < 1e-8);
  CHECK(std::abs(integrate(b.K_hat, b.mu_sigma_hat) - 4 * pi) < 1e-8);
  CHECK(std::abs(integrate(b.K_hat_direct, b.mu_sigma_hat) - 4 * pi) < 1e-8);
  // mu_sigma_hat = area_ratio * mu_sigma nodewise
  double e = 0;
  for (int k = 0; k < g->nodes(); ++k)
    e = std::max(e, std::abs(b.mu_sigma_hat.comp[0][k] -
                             b.area_ratio.comp[0][k] * b.mu_sigma.comp[0][k]));
  CHECK(e < 1e-10);
}

TEST_CASE("bundle invariant under tau -> tau + const") {
  auto g = make_grid(12);
  SphereField sig = round_metric(g);
  SphereField tau = SphereField::scalar(
      g, [](double t, double p) { return 0.2 * std::sin(t) * std::sin(p); });
  SphereField tau_c = tau;
  for (auto& v : tau_c.comp[0]) v += 3.25;
  auto b1 = build_bundle(sig, tau);
  auto b2 = build_bundle(sig, tau_c);
  double e = 0;
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < g->nodes(); ++k)
      e = std::max(e, std::abs(b1.sigma_hat.comp[c][k] - b2.sigma_hat.comp[c][k]));
  for (int k = 0; k < g->nodes(); ++k) {
    e = std::max(e, std::abs(b1.K_hat.comp[0][k] - b2.K_hat.comp[0][k]));
    e = std::max(e, std::abs(b1.area_ratio.comp[0][k] - b2.area_ratio.comp[0][k]));
  }
  CHECK(e < 1e-10);
}

TEST_CASE("convexity check") {
  auto g = make_grid(16);
  SphereField sig = round_metric(g);
  SUBCASE("tau = 0") {
    auto b = build_bundle(
        sig, SphereField::scalar(g, [](double, double) { return 0.0; }));
    auto r = convexity_check(b);
    CHECK(std::abs(r.min_value - 1.0) < 1e-10);
    CHECK(r.admissible_a);
  }
  SUBCASE("small perturbation stays admissible (refined-grid stable)") {
    for (int L : {16, 32}) {
      auto gg = make_grid(L);
      auto b = build_bundle(round_metric(gg),
                            SphereField::scalar(gg, [](double t, double) {
                              return 0.1 * std::cos(t);
                            }));
      auto r = convexity_check(b);
      CHECK(r.admissible_a);
      CHECK(r.min_value > 0.5);
    }
  }
  SUBCASE("creased tau reported non-admissible with located minimum") {
    SphereField tau = SphereField::scalar(g, [](double t, double) {
      double x = std::cos(t);
      return 2.5 * (4 * x * x * x - 3 * x);  // cos(3 theta)
    });
    auto b = build_bundle(sig, tau);
    auto r = convexity_check(b);
    CHECK_FALSE(r.admissible_a);
    CHECK(r.min_value < 0.0);
    CHECK(r.argmin_node >= 0);
  }
}

TEST_CASE("bundle dump writes summary") {
  auto g = make_grid(6);
  auto b = build_bundle(round_metric(g), SphereField::scalar(g, [](double t, double) {
                          return 0.1 * std::cos(t);
                        }));
  dump_bundle(b, "/tmp/qlm_bundle_test");
  std::ifstream is("/tmp/qlm_bundle_test/summary.json");
  CHECK(is.good());
}
