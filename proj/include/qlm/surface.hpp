#pragma once
#include "qlm/sphere.hpp"

namespace qlm {

// Intrinsic geometry of (Sigma, sigma) and of the projected surface
// (Sigma_hat, sigma_hat = sigma + dtau (x) dtau).
//
// Area forms are stored as densities relative to the unit round sphere
// measure (so `integrate(f, mu_sigma)` is the honest surface integral).
struct SurfaceMetricBundle {
  GridPtr grid;
  SphereField sigma;      // rank 2
  SphereField tau;        // rank 0
  SphereField sigma_hat;  // rank 2, = sigma + dtau (x) dtau
  SphereField area_ratio; // rank 0, sqrt(1+|grad tau|^2_sigma)
  SphereField K;          // Gauss curvature of sigma
  SphereField K_hat;      // Gauss curvature of sigma_hat via projection formula
  SphereField K_hat_direct;  // direct curvature of sigma_hat (cross-check)
  SphereField mu_sigma, mu_sigma_hat;  // area densities (relative to round)
  SphereField grad_tau;   // rank 1 (covariant components)
  SphereField hess_tau;   // rank 2 (covariant Hessian w.r.t. sigma)
  std::vector<double> grad_tau_sq;  // |grad tau|^2_sigma at nodes
};

// Gauss curvature via spectral Christoffel/Riemann contraction.
SphereField gauss_curvature(const SphereField& metric);

SurfaceMetricBundle build_bundle(const SphereField& sigma,
                                 const SphereField& tau);

struct ConvexityReport {
  double min_value = 0.0;   // min over nodes of K + det(hess tau)/(1+|dtau|^2)
  int argmin_node = -1;
  bool admissible_a = false;
  static constexpr double margin = 1e-8;  // strict-positivity margin
};
ConvexityReport convexity_check(const SurfaceMetricBundle& b);

// Per-field CSVs (<dir>/<name>.csv) plus <dir>/summary.json with
// {min K, min K_hat, admissible_a}.
void dump_bundle(const SurfaceMetricBundle& b, const std::string& dir);

// area density of a rank-2 metric relative to the unit round sphere
SphereField area_density(const SphereField& metric);

}  // namespace qlm
