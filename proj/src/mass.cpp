#include "qlm/mass.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "qlm/errors.hpp"

namespace qlm {

namespace {

constexpr double kPi = std::numbers::pi;

// Independent re-evaluation of a surface integral: project the densitized
// integrand onto Y_00 instead of summing the collocation quadrature.
double integral_via_y00(const SphereField& f, const SphereField& area) {
  SphereField dens(f.grid, 0, "dens");
  const int N = f.grid->nodes();
  dens[0].assign(N, 0.0);
  for (int k = 0; k < N; ++k) dens[0][k] = f[0][k] * area[0][k];
  auto c = sh_analyze(dens);
  return std::sqrt(4.0 * kPi) * c[0].real();
}

SphereField ones_field(const GridPtr& g) {
  SphereField f(g, 0, "one");
  f[0].assign(g->nodes(), 1.0);
  return f;
}

// grids are value-identical whenever the band limits agree
bool same_grid(const GridPtr& a, const GridPtr& b) {
  return a == b || (a && b && a->L == b->L);
}

void require_scalar(const SphereField& f, const char* what) {
  if (f.rank != 0 || f[0].empty())
    throw DimensionError(std::string(what) + " must be a scalar field");
}

}  // namespace

void WangYauBoundaryData::validate() const {
  if (!grid) throw DimensionError("boundary data: missing grid");
  if (sigma.rank != 2) throw DimensionError("boundary data: sigma must be rank 2");
  if (alpha_H.rank != 1)
    throw DimensionError("boundary data: alpha_H must be rank 1");
  require_scalar(H_norm, "boundary data: |H|");
  require_scalar(k_physical, "boundary data: k");
  const int N = grid->nodes();
  for (int k = 0; k < N; ++k) {
    if (!std::isfinite(H_norm[0][k]) || H_norm[0][k] <= 0.0)
      throw GeometryError(
          "boundary data: |H| must be positive everywhere (node " +
          std::to_string(k) + ", provenance " + provenance + ")");
  }
}

SphereField generalized_mean_curvature(const WangYauBoundaryData& data,
                                       const SphereField& tau,
                                       const SphereField* phi) {
  data.validate();
  require_scalar(tau, "generalized_mean_curvature: tau");
  if (phi) require_scalar(*phi, "generalized_mean_curvature: phi");
  const auto S = data.grid;
  const int N = S->nodes();

  auto dt = S->d_theta(tau[0], 0);
  auto dp = S->d_phi(tau[0]);
  std::vector<double> pt, pp;
  if (phi) {
    pt = S->d_theta((*phi)[0], 0);
    pp = S->d_phi((*phi)[0]);
  }

  SphereField h(S, 0, "h");
  h[0].assign(N, 0.0);
  for (int k = 0; k < N; ++k) {
    const double s_tt = data.sigma[0][k], s_tp = data.sigma[1][k],
                 s_pp = data.sigma[2][k];
    const double det = s_tt * s_pp - s_tp * s_tp;
    if (det <= 0.0)
      throw GeometryError("generalized_mean_curvature: sigma degenerate");
    const double si[3] = {s_pp / det, -s_tp / det, s_tt / det};
    const double dt2 =
        si[0] * dt[k] * dt[k] + 2 * si[1] * dt[k] * dp[k] + si[2] * dp[k] * dp[k];
    const double a_grad = si[0] * data.alpha_H[0][k] * dt[k] +
                          si[1] * (data.alpha_H[0][k] * dp[k] +
                                   data.alpha_H[1][k] * dt[k]) +
                          si[2] * data.alpha_H[1][k] * dp[k];
    double v = std::sqrt(1.0 + dt2) * data.H_norm[0][k] *
                   (phi ? std::cosh((*phi)[0][k]) : 1.0) -
               a_grad;
    if (phi)
      v += si[0] * dt[k] * pt[k] + si[1] * (dt[k] * pp[k] + dp[k] * pt[k]) +
           si[2] * dp[k] * pp[k];
    h[0][k] = v;
  }
  return h;
}

namespace {

MassReport difference_report(const SphereField& k0, const SphereField& other,
                             const SphereField& area, const char* label) {
  require_scalar(k0, "mass functional: reference curvature");
  require_scalar(other, "mass functional: physical term");
  require_scalar(area, "mass functional: area density");
  if (!same_grid(k0.grid, other.grid) || !same_grid(k0.grid, area.grid))
    throw DimensionError("mass functional: fields live on different grids");
  const auto S = k0.grid;
  const int N = S->nodes();

  MassReport r;
  r.label = label;
  r.L = S->L;
  r.integrand = SphereField(S, 0, "integrand");
  r.integrand[0].assign(N, 0.0);
  for (int k = 0; k < N; ++k) r.integrand[0][k] = k0[0][k] - other[0][k];
  r.reference_term = integrate(k0, area);
  r.physical_term = integrate(other, area);
  r.value = integrate(r.integrand, area) / (8.0 * kPi);
  const double indep = integral_via_y00(r.integrand, area) / (8.0 * kPi);
  r.residual = std::abs(r.value - indep);
  return r;
}

}  // namespace

MassReport brown_york(const SphereField& k0, const SphereField& k,
                      const SphereField& area) {
  return difference_report(k0, k, area, "brown_york");
}

MassReport liu_yau(const SphereField& k0, const SphereField& H_norm,
                   const SphereField& area) {
  for (double v : H_norm[0])
    if (!(v > 0.0))
      throw GeometryError("liu_yau: |H| must be positive everywhere");
  return difference_report(k0, H_norm, area, "liu_yau");
}

MassReport wang_yau_reduced(const JangBoundaryPackage& jang_boundary,
                            const Embedding3& emb,
                            const WangYauBoundaryData* phys,
                            const SphereField* tau) {
  const auto S = emb.grid;
  if (!S || !same_grid(jang_boundary.ktilde.grid, S))
    throw DimensionError(
        "wang_yau_reduced: boundary package and embedding use different grids");
  const int N = S->nodes();

  // isometry gate: the embedding must realize the graph boundary metric
  double iso = 0;
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < N; ++k)
      iso = std::max(iso, std::abs(emb.induced[c][k] -
                                   jang_boundary.sigma_hat[c][k]));
  if (iso > 1e-8)
    throw GeometryError(
        "wang_yau_reduced: embedding does not realize the boundary metric "
        "(isometry residual " +
        std::to_string(iso) + ")");

  SphereField mu_hat = area_density(jang_boundary.sigma_hat);
  SphereField mu = area_density(jang_boundary.sigma);

  SphereField q(S, 0, "q");
  q[0].assign(N, 0.0);
  for (int k = 0; k < N; ++k)
    q[0][k] = jang_boundary.ktilde[0][k] - jang_boundary.accel_term[0][k] +
              jang_boundary.momentum_term[0][k];

  MassReport r = difference_report(emb.k0, q, mu_hat, "wang_yau_reduced");

  // cross-check the physical term against the surface-side mean-curvature
  // route; both equal int h mu_sigma for the boosted frame of the graph.
  const double phys_alt = integrate(jang_boundary.h_physical, mu);
  double resid = std::abs(r.physical_term - phys_alt);

  if (phys && tau) {
    // second, fully independent route through (|H|, alpha_H): boost the
    // mean-curvature frame into the graph frame and integrate h directly
    phys->validate();
    if (!same_grid(phys->grid, S))
      throw DimensionError("wang_yau_reduced: physical data on a different grid");
    SphereField phi_rel(S, 0, "phi_rel");
    phi_rel[0].assign(N, 0.0);
    for (int k = 0; k < N; ++k) {
      const double beta =
          std::asinh(-jang_boundary.trP_sigma[0][k] / phys->H_norm[0][k]);
      phi_rel[0][k] = jang_boundary.phi[0][k] - beta;
    }
    SphereField h = generalized_mean_curvature(*phys, *tau, &phi_rel);
    resid = std::max(resid, std::abs(r.physical_term - integrate(h, mu)));
  }
  r.residual = std::max(r.residual, resid);
  return r;
}

JangBoundaryPackage time_symmetric_package(const WangYauBoundaryData& data) {
  data.validate();
  const auto S = data.grid;
  const int N = S->nodes();
  JangBoundaryPackage p;
  p.ktilde = data.k_physical;
  p.ktilde.name = "ktilde";
  for (auto* f : {&p.accel_term, &p.momentum_term, &p.f3, &p.phi,
                  &p.trP_sigma}) {
    *f = SphereField(S, 0, "zero");
    (*f)[0].assign(N, 0.0);
  }
  p.sigma = data.sigma;
  p.sigma_hat = data.sigma;
  p.k_sigma = data.k_physical;
  p.h_physical = data.k_physical;
  p.h_physical.name = "h_physical";
  return p;
}

MassReport spinor_weighted_mass(const SphereField& integrand,
                                const SphereField& weight_sq) {
  require_scalar(integrand, "spinor_weighted_mass: integrand");
  require_scalar(weight_sq, "spinor_weighted_mass: weight");
  if (!same_grid(integrand.grid, weight_sq.grid))
    throw DimensionError("spinor_weighted_mass: grids differ");
  const auto S = integrand.grid;
  const int N = S->nodes();
  for (int k = 0; k < N; ++k)
    if (weight_sq[0][k] < -1e-12)
      throw GeometryError("spinor_weighted_mass: |psi|^2 must be nonnegative");

  // the integrand is densitized (already multiplied by the area density)
  MassReport r;
  r.label = "spinor_weighted";
  r.L = S->L;
  r.integrand = SphereField(S, 0, "integrand");
  r.integrand[0].assign(N, 0.0);
  for (int k = 0; k < N; ++k)
    r.integrand[0][k] = integrand[0][k] * weight_sq[0][k];
  SphereField one = ones_field(S);
  r.value = integrate(r.integrand, one) / (8.0 * kPi);
  r.reference_term = 0;
  r.physical_term = 0;
  const double indep = integral_via_y00(r.integrand, one) / (8.0 * kPi);
  r.residual = std::abs(r.value - indep);
  return r;
}

AdmissibilityReport admissibility_report(const SurfaceMetricBundle& bundle,
                                         bool jang_solved,
                                         const SphereField& h_field) {
  require_scalar(h_field, "admissibility: h");
  AdmissibilityReport a;
  auto cvx = convexity_check(bundle);
  a.cond_a = cvx.admissible_a;
  a.min_convexity = cvx.min_value;
  a.argmin_convexity = cvx.argmin_node;
  a.cond_b = jang_solved;
  a.min_h = h_field[0][0];
  a.argmin_h = 0;
  for (int k = 1; k < (int)h_field[0].size(); ++k)
    if (h_field[0][k] < a.min_h) {
      a.min_h = h_field[0][k];
      a.argmin_h = k;
    }
  a.cond_c = a.min_h > 0.0;
  a.admissible = a.cond_a && a.cond_b && a.cond_c;
  return a;
}

std::string mass_report_json(const MassReport& r) {
  nlohmann::json j;
  j["label"] = r.label;
  j["value"] = r.value;
  j["reference_term"] = r.reference_term;
  j["physical_term"] = r.physical_term;
  j["L"] = r.L;
  j["residual"] = r.residual;
  j["admissibility"] = {
      {"cond_a", r.admissibility.cond_a},
      {"cond_b", r.admissibility.cond_b},
      {"cond_c", r.admissibility.cond_c},
      {"admissible", r.admissibility.admissible},
      {"min_convexity", r.admissibility.min_convexity},
      {"min_h", r.admissibility.min_h},
  };
  return j.dump(2);
}

std::string mass_csv_row(const std::string& name, int L,
                         std::optional<double> by, std::optional<double> ly,
                         std::optional<double> wy, bool admissible) {
  std::ostringstream os;
  os.precision(17);
  os << name << "," << L << ",";
  if (by) os << *by;
  os << ",";
  if (ly) os << *ly;
  os << ",";
  if (wy) os << *wy;
  os << "," << (admissible ? 1 : 0);
  return os.str();
}

}  // namespace qlm
