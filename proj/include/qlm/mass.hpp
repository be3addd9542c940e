#pragma once
#include <optional>

#include "qlm/embedding.hpp"
#include "qlm/jang.hpp"
#include "qlm/surface.hpp"

namespace qlm {

// Boundary triple (sigma, |H|, alpha_H) plus the in-slice mean curvature.
// Geometric units with 8 pi G = 1.
struct WangYauBoundaryData {
  GridPtr grid;
  SphereField sigma;       // rank 2
  SphereField H_norm;      // |H| (Lorentzian norm, must be positive)
  SphereField alpha_H;     // rank 1, connection form in the mean-curvature frame
  SphereField k_physical;  // mean curvature of Sigma in Omega
  std::string provenance;

  void validate() const;  // H_norm > 0 everywhere (GeometryError)
};

struct AdmissibilityReport {
  bool cond_a = false;  // shadow convexity
  bool cond_b = false;  // height solve succeeded
  bool cond_c = false;  // generalized mean curvature > 0
  bool admissible = false;
  double min_convexity = 0, min_h = 0;
  int argmin_convexity = -1, argmin_h = -1;
};

struct MassReport {
  double value = 0;          // = (reference_term - physical_term)/(8 pi)
  SphereField integrand;     // nodal integrand (density against mu)
  double reference_term = 0;
  double physical_term = 0;
  AdmissibilityReport admissibility;
  int L = 0;
  double residual = 0;  // independent re-evaluation / cross-check residual
  std::string label;
};

// h = -sqrt(1+|grad tau|^2) <H, e3> - alpha_{e3}(grad tau) for the frame
// boosted by phi off the mean-curvature frame; phi = nullptr selects the
// mean-curvature frame itself (tau = 0 then gives h = |H|).
SphereField generalized_mean_curvature(const WangYauBoundaryData& data,
                                       const SphereField& tau,
                                       const SphereField* phi = nullptr);

MassReport brown_york(const SphereField& k0, const SphereField& k,
                      const SphereField& area);
MassReport liu_yau(const SphereField& k0, const SphereField& H_norm,
                   const SphereField& area);

// 8 pi M = int k0 mu_hat - int (ktilde - accel + momentum) mu_hat, with the
// physical side cross-checked against the generalized-mean-curvature form.
MassReport wang_yau_reduced(const JangBoundaryPackage& jang_boundary,
                            const Embedding3& emb,
                            const WangYauBoundaryData* phys = nullptr,
                            const SphereField* tau = nullptr);

// Boundary-only reduction for tau = 0, P = 0: the graph coincides with the
// slice, so the package is k_physical with vanishing boost data and the
// reduced energy collapses to Brown-York / Liu-Yau.
JangBoundaryPackage time_symmetric_package(const WangYauBoundaryData& data);

MassReport spinor_weighted_mass(const SphereField& integrand,
                                const SphereField& weight_sq);

AdmissibilityReport admissibility_report(const SurfaceMetricBundle& bundle,
                                         bool jang_solved,
                                         const SphereField& h_field);

std::string mass_report_json(const MassReport& r);
// CSV row `case,L,M_BY,M_LY,M_WY,admissible`
std::string mass_csv_row(const std::string& name, int L,
                         std::optional<double> by, std::optional<double> ly,
                         std::optional<double> wy, bool admissible);

}  // namespace qlm
