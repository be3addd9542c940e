#pragma once
#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qlm/errors.hpp"

namespace qlm {

// Band-limited fields on S^2, sampled on a Gauss-Legendre (colatitude) x
// equispaced (longitude) grid.  Node ordering: row-major over (theta_i,
// phi_j), theta ascending, phi ascending, flat index i*n_phi + j.
//
// All differential operators act on nodal values and are exact for data whose
// per-mode trigonometric degree fits the grid; above-band content is silently
// projected (catalog data is analytic, see module notes).
class SphereGrid;
using GridPtr = std::shared_ptr<const SphereGrid>;

class SphereGrid {
 public:
  int L;        // band limit
  int n_theta;  // = L+1 Gauss-Legendre colatitudes
  int n_phi;    // = 2L+2 equispaced longitudes

  std::vector<double> theta;  // ascending, size n_theta
  std::vector<double> x;      // cos(theta), descending
  std::vector<double> w;      // GL weights in x (sum = 2)
  std::vector<double> phi;    // ascending, size n_phi

  int nodes() const { return n_theta * n_phi; }
  double dphi_weight() const;  // 2*pi/n_phi

  // ---- scalar spherical-harmonic machinery -------------------------------
  // Orthonormal complex harmonics Y_lm = Pbar_l^m(cos theta) e^{im phi} /
  // sqrt(2 pi) with Condon-Shortley phase; coefficient index l*(l+1)+m.
  int n_coeff() const { return (L + 1) * (L + 1); }
  static int cidx(int l, int m) { return l * (l + 1) + m; }

  // Pbar and d(Pbar)/d(theta) tables for 0<=m<=l<=L at the theta nodes.
  double pbar(int l, int m, int i) const { return ptab_[poff(l, m) + i]; }
  double dpbar(int l, int m, int i) const { return dptab_[poff(l, m) + i]; }

  // ---- nodal derivative engine -------------------------------------------
  // theta_parity = number of theta-ish indices of the component (mod 2);
  // the glide reflection (theta,phi)->(-theta,phi+pi) multiplies the
  // component by (-1)^(m + theta_parity) per azimuthal mode m, which selects
  // the cos/sin fit in theta.
  std::vector<double> d_theta(const std::vector<double>& comp,
                              int theta_parity) const;
  std::vector<double> d_phi(const std::vector<double>& comp) const;

  // Deterministic quadrature sum: (2pi/n_phi) * sum_i w_i sum_j v_ij.
  double quad(const std::vector<double>& v) const;

  static GridPtr make(int L);

 private:
  // Legendre tables, flattened by (m, l) blocks.
  std::vector<double> ptab_, dptab_;
  std::vector<int> poffsets_;
  int poff(int l, int m) const { return poffsets_[m] + (l - m) * n_theta; }

  // Precomputed dense inverses of the theta-fit Vandermonde systems
  // C_{ik} = cos(k theta_i), k=0..n_theta-1 and S_{ik} = sin(k theta_i),
  // k=1..n_theta, together with derivative evaluation tables.
  std::vector<double> cos_inv_, sin_inv_;    // n_theta x n_theta, row-major
  std::vector<double> cos_fwd_, sin_fwd_;    // forward evaluation (refinement)
  std::vector<double> dcos_tab_, dsin_tab_;  // derivative evaluation
  friend GridPtr make_grid(int L);
  void build();
};

GridPtr make_grid(int L);

struct SphereField {
  GridPtr grid;
  int rank = 0;  // 0: scalar; 1: (a_theta, a_phi); 2: (g_tt, g_tp, g_pp)
  std::array<std::vector<double>, 3> comp;
  std::string name;

  SphereField() = default;
  SphereField(GridPtr g, int r, std::string n = "");
  static SphereField scalar(GridPtr g,
                            const std::function<double(double, double)>& f,
                            std::string n = "");

  int ncomp() const { return rank == 0 ? 1 : (rank == 1 ? 2 : 3); }
  std::vector<double>& operator[](int c) { return comp[c]; }
  const std::vector<double>& operator[](int c) const { return comp[c]; }
  // glide parity (#theta indices) of component c for this rank
  static int theta_parity(int rank, int c);
  void check_grid(const SphereField& other) const;
};

// ---- transforms -----------------------------------------------------------
std::vector<std::complex<double>> sh_analyze(const SphereField& f);
SphereField sh_synthesize(const GridPtr& g,
                          const std::vector<std::complex<double>>& c);

// ---- calculus -------------------------------------------------------------
struct Christoffel {
  // index order: [ ^t_tt, ^t_tp, ^t_pp, ^p_tt, ^p_tp, ^p_pp ]
  std::array<std::vector<double>, 6> c;
  GridPtr grid;
  static int parity(int k);  // #theta indices mod 2 of component k
};

struct Metric2Inv {
  std::vector<double> itt, itp, ipp, det;
};

Metric2Inv invert_metric(const SphereField& metric);  // throws GeometryError
Christoffel christoffel(const SphereField& metric);

struct CovariantOut {
  SphereField grad;       // rank 1
  SphereField hessian;    // rank 2 (covariant d^2 f)
  SphereField laplacian;  // rank 0
};
CovariantOut covariant_calculus(const SphereField& metric,
                                const SphereField& f);

double integrate(const SphereField& f, const SphereField& area_form);

// ---- IO -------------------------------------------------------------------
// CSV dump `theta,phi,value[,component]` in node order plus a JSON metadata
// sidecar (<path>.json) with L, rank and the field name.
void dump_field_csv(const SphereField& f, const std::string& path);

}  // namespace qlm
