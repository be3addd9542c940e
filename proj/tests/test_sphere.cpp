#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qlm/sphere.hpp"

using namespace qlm;
using std::numbers::pi;

namespace {

// Independent orthonormal associated Legendre (CS phase), plain recurrence.
// Normalized so that \int_{-1}^{1} Pbar^2 dx = 1.
double pbar_ind(int l, int m, double x) {
  double st = std::sqrt(1.0 - x * x);
  double pmm = 1.0 / std::sqrt(2.0);
  for (int k = 1; k <= m; ++k)
    pmm *= -std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * st;
  if (l == m) return pmm;
  double p1 = std::sqrt(2.0 * m + 3.0) * x * pmm, p0 = pmm;
  for (int ll = m + 2; ll <= l; ++ll) {
    double a = std::sqrt((4.0 * ll * ll - 1.0) / (double(ll) * ll - double(m) * m));
    double b = std::sqrt(((ll - 1.0) * (ll - 1.0) - double(m) * m) /
                         (4.0 * (ll - 1.0) * (ll - 1.0) - 1.0));
    double p2 = a * (x * p1 - b * p0);
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double a : v) m = std::max(m, std::abs(a));
  return m;
}

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

}  // namespace

TEST_CASE("make_grid basics and quadrature exactness") {
  auto g = make_grid(4);
  CHECK(g->n_theta == 5);
  CHECK(g->n_phi == 10);
  double s = 0;
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j) s += g->w[i] * g->dphi_weight();
  CHECK(std::abs(s - 4 * pi) < 1e-13);

  auto g16 = make_grid(16);
  CHECK(g16->n_theta == 17);
  CHECK(g16->n_phi == 34);

  CHECK_THROWS_AS(make_grid(3), ConfigError);
  CHECK_THROWS_AS(make_grid(257), ConfigError);
}

TEST_CASE("analyze picks out single harmonics") {
  auto g = make_grid(8);
  // real field Y_{2,1} - Y_{2,-1} = 2 Re(Y_{2,1}); closed form with CS phase:
  // Y_{2,1} = -sqrt(15/(8 pi)) sin t cos t e^{i phi}
  SphereField f = SphereField::scalar(g, [](double t, double p) {
    return 2.0 * (-std::sqrt(15.0 / (8.0 * pi))) * std::sin(t) * std::cos(t) *
           std::cos(p);
  });
  auto c = sh_analyze(f);
  for (int l = 0; l <= g->L; ++l)
    for (int m = -l; m <= l; ++m) {
      std::complex<double> expect{0.0, 0.0};
      if (l == 2 && m == 1) expect = 1.0;
      if (l == 2 && m == -1) expect = -1.0;
      CHECK(std::abs(c[SphereGrid::cidx(l, m)] - expect) < 1e-12);
    }
}

TEST_CASE("round trip synthesize(analyze(f)) for random band-limited f") {
  auto g = make_grid(12);
  std::mt19937 rng(7);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<std::complex<double>> c(g->n_coeff(), 0.0);
  for (int l = 0; l <= g->L; ++l) {
    c[SphereGrid::cidx(l, 0)] = N(rng);
    for (int m = 1; m <= l; ++m) {
      std::complex<double> v{N(rng), N(rng)};
      c[SphereGrid::cidx(l, m)] = v;
      c[SphereGrid::cidx(l, -m)] = ((m % 2) ? -1.0 : 1.0) * std::conj(v);
    }
  }
  SphereField f = sh_synthesize(g, c);
  auto c2 = sh_analyze(f);
  double err = 0;
  for (int k = 0; k < g->n_coeff(); ++k) err = std::max(err, std::abs(c2[k] - c[k]));
  CHECK(err < 1e-12);
  SphereField f2 = sh_synthesize(g, c2);
  double nerr = 0;
  for (int k = 0; k < g->nodes(); ++k)
    nerr = std::max(nerr, std::abs(f2.comp[0][k] - f.comp[0][k]));
  CHECK(nerr < 1e-12);
}

TEST_CASE("aliased above-band input matches dense projection quadrature") {
  // field = Y_{L+3,0}; analyze must return exactly the grid-quadrature
  // projections (aliasing is a property of the quadrature, not a bug).
  const int L = 8;
  auto g = make_grid(L);
  SphereField f = SphereField::scalar(g, [&](double t, double) {
    return pbar_ind(L + 3, 0, std::cos(t)) / std::sqrt(2.0 * pi);
  });
  auto c = sh_analyze(f);
  for (int l = 0; l <= L; ++l) {
    // independent dense-sum oracle for the same projection integral
    double s = 0;
    for (int i = 0; i < g->n_theta; ++i) {
      double row = 0;
      for (int j = 0; j < g->n_phi; ++j) row += f.comp[0][i * g->n_phi + j];
      s += g->w[i] * pbar_ind(l, 0, g->x[i]) * row;
    }
    s *= g->dphi_weight() / std::sqrt(2.0 * pi);
    CHECK(std::abs(c[SphereGrid::cidx(l, 0)] - s) < 1e-12);
    for (int m = 1; m <= l; ++m)
      CHECK(std::abs(c[SphereGrid::cidx(l, m)]) < 1e-12);
  }
}

TEST_CASE("laplacian eigenvalue on the round sphere") {
  auto g = make_grid(10);
  SphereField met = round_metric(g);
  std::vector<std::complex<double>> c(g->n_coeff(), 0.0);
  c[SphereGrid::cidx(3, 2)] = 1.0;
  c[SphereGrid::cidx(3, -2)] = 1.0;  // real combination
  SphereField f = sh_synthesize(g, c);
  auto out = covariant_calculus(met, f);
  double err = 0;
  for (int k = 0; k < g->nodes(); ++k)
    err = std::max(err, std::abs(out.laplacian.comp[0][k] + 12.0 * f.comp[0][k]));
  CHECK(err < 1e-10);
}

TEST_CASE("constant field has vanishing gradient and hessian") {
  auto g = make_grid(6);
  // non-trivial metric: round + d tau (x) d tau, tau = 0.3 sin t cos p
  SphereField met = round_metric(g);
  SphereField tau = SphereField::scalar(
      g, [](double t, double p) { return 0.3 * std::sin(t) * std::cos(p); });
  auto tt = g->d_theta(tau.comp[0], 0);
  auto tp = g->d_phi(tau.comp[0]);
  for (int k = 0; k < g->nodes(); ++k) {
    met.comp[0][k] += tt[k] * tt[k];
    met.comp[1][k] += tt[k] * tp[k];
    met.comp[2][k] += tp[k] * tp[k];
  }
  SphereField f = SphereField::scalar(g, [](double, double) { return 2.5; });
  auto out = covariant_calculus(met, f);
  CHECK(max_abs(out.grad.comp[0]) < 1e-13);
  CHECK(max_abs(out.grad.comp[1]) < 1e-13);
  CHECK(max_abs(out.hessian.comp[0]) < 1e-12);
  CHECK(max_abs(out.hessian.comp[1]) < 1e-12);
  CHECK(max_abs(out.hessian.comp[2]) < 1e-12);
}

TEST_CASE("conformal-metric laplacian against finite-difference oracle") {
  // metric e^{2u} round with u = 0.1 Y_{1,0}, f = Y_{2,0}; oracle:
  // second-order centered finite differences of the closed-form integrand on
  // an analytic (grid-free) evaluation, h refined.
  auto g = make_grid(16);
  auto uf = [](double t) { return 0.1 * std::sqrt(3.0 / (4.0 * pi)) * std::cos(t); };
  auto ff = [](double t) {
    double x = std::cos(t);
    return std::sqrt(5.0 / (16.0 * pi)) * (3.0 * x * x - 1.0);
  };
  SphereField met = round_metric(g);
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j) {
      int k = i * g->n_phi + j;
      double e2u = std::exp(2.0 * uf(g->theta[i]));
      met.comp[0][k] *= e2u;
      met.comp[2][k] *= e2u;
    }
  SphereField f = SphereField::scalar(g, [&](double t, double) { return ff(t); });
  auto out = covariant_calculus(met, f);

  // axisymmetric FD oracle: lap f = e^{-2u} (1/sin t) d/dt (sin t f'(t))
  const double h = 1e-4;
  for (int i = 2; i < g->n_theta - 2; i += 3) {
    double t = g->theta[i];
    auto flux = [&](double tt) {
      return std::sin(tt) * (ff(tt + h) - ff(tt - h)) / (2 * h);
    };
    double lap_round = (flux(t + h) - flux(t - h)) / (2 * h) / std::sin(t);
    double oracle = std::exp(-2.0 * uf(t)) * lap_round;
    CHECK(std::abs(out.laplacian.comp[0][i * g->n_phi] - oracle) < 1e-6);
  }
}

TEST_CASE("integrate basics and symbolic-oracle value") {
  auto g = make_grid(10);
  SphereField one = SphereField::scalar(g, [](double, double) { return 1.0; });
  CHECK(std::abs(integrate(one, one) - 4 * pi) < 1e-13);

  SphereField y10 = SphereField::scalar(g, [](double t, double) {
    return std::sqrt(3.0 / (4.0 * pi)) * std::cos(t);
  });
  CHECK(std::abs(integrate(y10, one)) < 1e-13);

  // (1 + 0.3 cos t)^2 integrates to 4 pi (1 + 0.09/3) = 4 pi * 1.03
  SphereField f = SphereField::scalar(g, [](double t, double) {
    double v = 1.0 + 0.3 * std::cos(t);
    return v * v;
  });
  CHECK(std::abs(integrate(f, one) - 4 * pi * 1.03) < 1e-12);

  auto g2 = make_grid(6);
  SphereField other = SphereField::scalar(g2, [](double, double) { return 1.0; });
  CHECK_THROWS_AS(integrate(f, other), DimensionError);
}

TEST_CASE("quadrature integrates harmonic products exactly") {
  auto g = make_grid(8);
  SphereField one = SphereField::scalar(g, [](double, double) { return 1.0; });
  // pairs with l+l' <= 2L-1
  int cases[][4] = {{8, 3, 8, 3}, {7, 2, 8, 2}, {5, 0, 6, 0}, {8, 8, 7, 7}};
  for (auto& cs : cases) {
    std::vector<std::complex<double>> ca(g->n_coeff(), 0.0), cb(g->n_coeff(), 0.0);
    ca[SphereGrid::cidx(cs[0], cs[1])] = 1.0;
    ca[SphereGrid::cidx(cs[0], -cs[1])] = ((cs[1] % 2) ? -1.0 : 1.0);
    cb[SphereGrid::cidx(cs[2], cs[3])] = 1.0;
    cb[SphereGrid::cidx(cs[2], -cs[3])] = ((cs[3] % 2) ? -1.0 : 1.0);
    SphereField a = sh_synthesize(g, ca), b = sh_synthesize(g, cb);
    SphereField prod(g, 0);
    for (int k = 0; k < g->nodes(); ++k)
      prod.comp[0][k] = a.comp[0][k] * b.comp[0][k];
    double got = integrate(prod, one);
    double expect = 0.0;
    if (cs[0] == cs[2] && cs[1] == cs[3]) expect = (cs[1] == 0) ? 1.0 : 2.0;
    CHECK(std::abs(got - expect) < 1e-12);
  }
}

TEST_CASE("gradient Leibniz rule at nodes") {
  auto g = make_grid(12);
  std::vector<std::complex<double>> ca(g->n_coeff(), 0.0), cb(g->n_coeff(), 0.0);
  ca[SphereGrid::cidx(2, 1)] = {0.7, 0.2};
  ca[SphereGrid::cidx(2, -1)] = std::conj(std::complex<double>{0.7, 0.2}) * -1.0;
  ca[SphereGrid::cidx(0, 0)] = 1.1;
  cb[SphereGrid::cidx(3, 0)] = 0.5;
  cb[SphereGrid::cidx(1, 1)] = {0.0, 0.4};
  cb[SphereGrid::cidx(1, -1)] = std::conj(std::complex<double>{0.0, 0.4}) * -1.0;
  SphereField a = sh_synthesize(g, ca), b = sh_synthesize(g, cb);
  SphereField ab(g, 0);
  for (int k = 0; k < g->nodes(); ++k)
    ab.comp[0][k] = a.comp[0][k] * b.comp[0][k];
  auto da_t = g->d_theta(a.comp[0], 0), db_t = g->d_theta(b.comp[0], 0);
  auto dab_t = g->d_theta(ab.comp[0], 0);
  auto da_p = g->d_phi(a.comp[0]), db_p = g->d_phi(b.comp[0]);
  auto dab_p = g->d_phi(ab.comp[0]);
  double err = 0;
  for (int k = 0; k < g->nodes(); ++k) {
    err = std::max(err, std::abs(dab_t[k] - a.comp[0][k] * db_t[k] -
                                 b.comp[0][k] * da_t[k]));
    err = std::max(err, std::abs(dab_p[k] - a.comp[0][k] * db_p[k] -
                                 b.comp[0][k] * da_p[k]));
  }
  CHECK(err < 1e-10);
}

TEST_CASE("integrate invariant under longitude rotation") {
  auto g = make_grid(10);
  SphereField f = SphereField::scalar(g, [](double t, double p) {
    return 1.0 + 0.4 * std::sin(t) * std::cos(p) + 0.2 * std::cos(t);
  });
  SphereField af = SphereField::scalar(g, [](double t, double p) {
    return 1.0 + 0.1 * std::sin(t) * std::sin(p);
  });
  double v0 = integrate(f, af);
  // rotate both by one phi step
  SphereField fr(g, 0), ar(g, 0);
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j) {
      int js = (j + 1) % g->n_phi;
      fr.comp[0][i * g->n_phi + j] = f.comp[0][i * g->n_phi + js];
      ar.comp[0][i * g->n_phi + j] = af.comp[0][i * g->n_phi + js];
    }
  CHECK(std::abs(integrate(fr, ar) - v0) < 1e-12);
}

TEST_CASE("derivative engine handles odd-parity tensor components") {
  auto g = make_grid(8);
  // a_theta-type component: tau_theta for tau = sin t cos p is cos t cos p
  std::vector<double> tau(g->nodes());
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j)
      tau[i * g->n_phi + j] = std::sin(g->theta[i]) * std::cos(g->phi[j]);
  auto dt = g->d_theta(tau, 0);
  double err = 0;
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j)
      err = std::max(err, std::abs(dt[i * g->n_phi + j] -
                                   std::cos(g->theta[i]) * std::cos(g->phi[j])));
  CHECK(err < 1e-13);
  // differentiate the odd-parity component again: d/dt (cos t cos p)
  auto dtt = g->d_theta(dt, 1);
  err = 0;
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j)
      err = std::max(err, std::abs(dtt[i * g->n_phi + j] +
                                   std::sin(g->theta[i]) * std::cos(g->phi[j])));
  CHECK(err < 1e-12);
  // and a pure sin t profile at m=0 (odd parity): d/dt sin t = cos t
  std::vector<double> st(g->nodes());
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j) st[i * g->n_phi + j] = std::sin(g->theta[i]);
  auto dst = g->d_theta(st, 1);
  err = 0;
  for (int i = 0; i < g->n_theta; ++i)
    err = std::max(err, std::abs(dst[i * g->n_phi] - std::cos(g->theta[i])));
  CHECK(err < 1e-13);
}

TEST_CASE("non-positive metric rejected with located node") {
  auto g = make_grid(6);
  SphereField met = round_metric(g);
  met.comp[0][5] = -1.0;
  CHECK_THROWS_AS(invert_metric(met), GeometryError);
}

TEST_CASE("csv dump smoke") {
  auto g = make_grid(4);
  SphereField f = SphereField::scalar(g, [](double t, double) { return std::cos(t); },
                                      "costheta");
  dump_field_csv(f, "/tmp/qlm_test_field.csv");
  std::ifstream is("/tmp/qlm_test_field.csv");
  std::string header;
  std::getline(is, header);
  CHECK(header == "theta,phi,value");
}
