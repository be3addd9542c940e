#pragma once
#include <array>

#include "qlm/surface.hpp"

namespace qlm {

// Isometric embedding of a convex S^2 metric into flat R^3 (Weyl problem),
// Gauss-Newton in spherical-harmonic coefficients of the Cartesian
// components, and the Minkowski lift i0 = i0_hat + tau T0 with its adapted
// normal frames.

struct WeylOptions {
  double tol = 1e-9;     // max nodal |induced - target|
  int max_iter = 200;
  bool allow_homotopy = true;
};

struct Embedding3 {
  GridPtr grid;
  std::array<SphereField, 3> X;  // Cartesian components (gauge-fixed)
  SphereField induced;           // rank 2
  SphereField defect;            // rank 2, induced - target
  SphereField k0;                // mean curvature, >0 for convex images
  SphereField II;                // rank 2 second fundamental form (k0 = tr)
  std::array<SphereField, 3> normal;  // outward unit normal
  double defect_norm = 0.0;
  int iterations = 0;
  std::vector<double> defect_history;
  std::vector<double> step_history;
};

// Embed bundle.sigma_hat (precondition: convexity_check passes).
Embedding3 embed_weyl(const SurfaceMetricBundle& bundle,
                      const WeylOptions& opts = {});
// Embed an arbitrary positive-curvature metric (used for sigma itself).
Embedding3 embed_weyl_metric(const SphereField& metric,
                             const WeylOptions& opts = {});

// Recompute (k0, II) from the stored embedding; sign convention: round
// sphere of radius r gives k0 = +2/r.
struct ExtrinsicData {
  SphereField k0;
  SphereField II;
};
ExtrinsicData extrinsic_data_r3(const Embedding3& emb);

struct MinkowskiEmbedding {
  GridPtr grid;
  SphereField X0;                     // = tau
  std::array<SphereField, 3> Xi;      // = i0_hat
  std::array<SphereField, 4> H0;      // mean curvature vector (t,x,y,z)
  SphereField H0_norm_sq;             // Lorentzian <H0,H0>
  std::array<SphereField, 4> e30;     // spacelike unit normal
  std::array<SphereField, 4> e40;     // future timelike unit normal
  SphereField alpha_e30;              // rank 1 connection 1-form
  std::array<double, 4> T0{1, 0, 0, 0};
  SphereField sigma;                  // induced (Lorentzian) metric, rank 2
};

MinkowskiEmbedding lift_and_frames(const Embedding3& emb,
                                   const SphereField& tau);

struct Mean1Report {
  double lhs = 0, rhs = 0, residual = 0;
};
// lhs = int k0_hat mu_sigma_hat, rhs = Minkowski-side integral
// int (-<H0,e30> sqrt(1+|dtau|^2) - alpha_{e30}(grad tau)) mu_sigma.
Mean1Report verify_mean1(const Embedding3& emb, const MinkowskiEmbedding& memb,
                         const SurfaceMetricBundle& bundle);

// IO: coefficients as JSON, convergence history CSV `iter,defect_norm,step_size`
void dump_embedding(const Embedding3& emb, const std::string& path_prefix);

}  // namespace qlm
