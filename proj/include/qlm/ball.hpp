#pragma once
#include <array>

#include "qlm/sphere.hpp"

namespace qlm {

// Spectral discretization of the unit 3-ball: Chebyshev-Gauss-Lobatto nodes
// in r on [0,1] (r[0]=0 is the center shell, r[n_r-1]=1 the boundary) times
// a SphereGrid.  Volume fields are stored shell-major, idx = a*N_sphere + k.
//
// Center regularity: every smooth field is angle-independent on the r=0
// shell; Cartesian derivatives there are recovered by projecting the radial
// (directional) derivatives onto the l=1 harmonics instead of using the
// 1/r tangential formula.
class BallGrid;
using BallPtr = std::shared_ptr<const BallGrid>;

class BallGrid {
 public:
  int n_r;
  GridPtr sphere;
  std::vector<double> r;   // ascending, r.front()=0, r.back()=1
  std::vector<double> wr;  // radial weights carrying the r^2 Jacobian
  std::vector<double> Dr;  // radial differentiation matrix, row-major n_r^2

  int nodes() const { return n_r * sphere->nodes(); }
  int idx(int a, int k) const { return a * sphere->nodes() + k; }
  int boundary_shell() const { return n_r - 1; }

  // integral over the flat unit ball (constant 1 -> 4 pi / 3)
  double quad(const std::vector<double>& v) const;
  // d/dr along radial lines
  std::vector<double> d_r(const std::vector<double>& u) const;
  // Cartesian partial derivatives (d_x, d_y, d_z) of a smooth scalar field
  std::array<std::vector<double>, 3> grad(const std::vector<double>& u) const;
  // boundary trace as a SphereField
  SphereField trace(const std::vector<double>& u, const std::string& name = "") const;

  static BallPtr make(GridPtr sphere, int n_r);

 private:
  void build();
};

BallPtr make_ball(int L, int n_r);

// symmetric 3x3 component index, order xx,xy,xz,yy,yz,zz
inline int sym3(int i, int j) {
  static const int t[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  return t[i][j];
}

// Initial data (Omega, g, P) with sources (mu, J), Cartesian components.
struct BallDataSet {
  BallPtr grid;
  std::array<std::vector<double>, 6> g;  // metric
  std::array<std::vector<double>, 6> P;  // extrinsic curvature of Omega
  std::vector<double> mu;                // energy density
  std::array<std::vector<double>, 3> J;  // momentum density (covector)
  std::string name;

  // Optional analytic first derivatives of g (dg[l][sym3(i,j)] = d_l g_ij),
  // supplied by closed-form generators; the spectral engine is the fallback.
  bool has_dg = false;
  std::array<std::array<std::vector<double>, 6>, 3> dg;

  void validate() const;  // shapes + g positive definite (GeometryError)
};

// nodal inverse metric and determinant
struct Metric3Inv {
  std::array<std::vector<double>, 6> inv;
  std::vector<double> det;
};
Metric3Inv invert_metric3(const BallDataSet& d);

// Christoffel symbols Gamma^k_{ij}, outer index k, inner sym3(i,j)
using Christoffel3 = std::array<std::array<std::vector<double>, 6>, 3>;
Christoffel3 christoffel3(const BallDataSet& d, const Metric3Inv& inv);

// scalar curvature of g
std::vector<double> scalar_curvature3(const BallDataSet& d);

struct ConstraintReport {
  std::vector<double> hamiltonian;               // R - |P|^2 + (tr P)^2 - 2 mu
  std::array<std::vector<double>, 3> momentum;   // div P - d tr P - J
  double hamiltonian_max = 0, momentum_max = 0;
  double dec_min = 0;                            // min(mu - |J|_g)
  bool dominant_energy_ok = false;
};
ConstraintReport constraint_report(const BallDataSet& d);

}  // namespace qlm
