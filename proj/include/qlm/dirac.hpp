#pragma once
#include <complex>
#include <memory>

#include <Eigen/Dense>

#include "qlm/sphere.hpp"

namespace qlm {

// Spinor analysis on the boundary sphere and the flat ball.
//
// Convention table (all spinor sign choices live here):
//   - spinors: two complex components in the constant Cartesian frame of R^3;
//   - Clifford action rho(e_j) = -i sigma_j, so rho(X)rho(Y)+rho(Y)rho(X)
//     = -2 <X,Y> and rho(X) is skew-Hermitian;
//   - nu = interior pointing unit normal of the boundary sphere, nu = -xhat,
//     hence rho(nu) = i sigma.xhat;
//   - chirality projections Pi_pm = (1 -/+ sigma.xhat)/2 (= (1 pm i rho(nu))/2);
//   - bulk operator Dhat = sum_j rho(e_j) d_j = -i sigma.grad; boundary
//     operator on the unit round sphere D psi = i sigma.(grad_S psi x xhat)
//     + psi (restriction of a constant spinor has D psi = psi);
//   - conformal metric e^{2u}.round: D_u psi = e^{-3u/2} D_0 (e^{u/2} psi),
//     so a constant u = c scales the spectrum by e^{-c};
//   - a degree-k monogenic polynomial spinor restricts to an eigenspinor
//     with eigenvalue k+1 and the spectrum is +-(k+1) with multiplicity
//     2(k+1).

using Cplx = std::complex<double>;

struct BoundarySpinor {
  GridPtr grid;
  int L = 0;  // logical band limit of the content (<= grid->L)
  std::array<std::vector<Cplx>, 2> comp;
  SphereField conformal_u;  // metric handle, sigma_hat = e^{2u}.round

  BoundarySpinor() = default;
  BoundarySpinor(GridPtr g, int band);
  // pointwise Hermitian norm |psi|^2 >= 0
  std::vector<double> norm_sq() const;
};

// L^2(mu_sigma_hat) inner product (conformal weight from a's handle)
Cplx spinor_inner(const BoundarySpinor& a, const BoundarySpinor& b);

// rho(nu) psi = i (sigma.xhat) psi, nodal
BoundarySpinor clifford_normal(const BoundarySpinor& psi);
// MIT chirality projections Pi_pm psi = (psi pm i rho(nu) psi)/2
BoundarySpinor chiral_project(const BoundarySpinor& psi, int sign);

struct DiracOperator {
  GridPtr grid;  // evaluation grid with aliasing margin
  int L = 0;     // coefficient band limit (matrix dimension 2(L+1)^2)
  SphereField u; // conformal factor resampled onto the evaluation grid
  Eigen::MatrixXcd A;  // <b_i, D b_j> in L^2(mu_sigma_hat)
  Eigen::MatrixXcd G;  // Gram matrix <b_i, b_j> in L^2(mu_sigma_hat)
  double self_adjoint_residual = 0;  // max |A - A^H| before symmetrization
};

// Assemble the boundary Dirac operator for sigma_hat = e^{2u}.round in the
// basis {Y_lm (x) e_s, l <= L}.  Throws ConfigError when u carries content
// beyond the operator band (aliasing gate).
DiracOperator boundary_dirac(const SphereField& conformal_u, int L);

// nodal application of the operator to a spinor on op.grid
BoundarySpinor apply_boundary_dirac(const DiracOperator& op,
                                    const BoundarySpinor& psi);

struct DiracSpectrum {
  std::vector<double> lambda;  // ascending
  Eigen::MatrixXcd vectors;    // G-orthonormal columns (coefficient basis)
  int L = 0;
  double symmetry_residual = 0;  // pairing around zero, |lambda| <= L/2
  double gram_residual = 0;      // max |V^H G V - I|
};

// dense Hermitian eigensolve; spectral (APS) projections are taken against
// this decomposition
DiracSpectrum spectrum_and_projections(const DiracOperator& op);

// APS half-space projections P_{>=0} (nonneg = true) / P_{<0}
BoundarySpinor spectral_project(const DiracOperator& op,
                                const DiracSpectrum& spec,
                                const BoundarySpinor& psi, bool nonneg);

// index,lambda,multiplicity_group rows (groups within 1e-8)
std::string spectrum_csv(const DiracSpectrum& spec);

// ---- flat-ball spinors ----------------------------------------------------

// Exactly monogenic homogeneous polynomial spinors (sigma.grad psi = 0),
// 2(k+1) modes per degree k, traces orthonormal in L^2 of the unit sphere.
struct MonogenicBasis {
  struct Mode {
    int degree;
    // coefficients over the monomial list of the degree, per component
    std::array<Eigen::VectorXcd, 2> poly;
  };
  int degree_max = 0;
  std::vector<Mode> modes;                           // ordered by degree
  std::vector<std::array<int, 3>> monomials;         // shared list, all degrees
  std::vector<int> monomial_offset;                  // per degree start index
};
std::shared_ptr<const MonogenicBasis> monogenic_basis(int degree_max);

struct FlatBallSpinor {
  std::shared_ptr<const MonogenicBasis> basis;
  Eigen::VectorXcd coeff;  // over basis->modes
};

std::array<Cplx, 2> eval_spinor(const FlatBallSpinor& psi, const double x[3]);
// Cartesian-frame covariant derivative (flat connection): d_i psi
std::array<std::array<Cplx, 2>, 3> eval_spinor_gradient(
    const FlatBallSpinor& psi, const double x[3]);
// residual of sigma.grad psi at a point (basis exactness spot check)
double monogenic_residual(const FlatBallSpinor& psi, const double x[3]);

BoundarySpinor spinor_trace(const FlatBallSpinor& psi, const GridPtr& grid);

enum class BallBC { MIT, APS };

struct FlatBallSolve {
  FlatBallSpinor psi;
  double condition_number = 0;  // of the matching system
  double match_residual = 0;    // boundary-condition residual, max norm
};

// Solve Dhat psi = 0 on the flat unit ball with Pi_+ psi = Pi_+ alpha (MIT)
// or P_{>=0} psi = P_{>=0} alpha (APS) by matching in the monogenic basis of
// degree <= alpha.L.  Throws GeometryError when the matching system is
// numerically singular (condition number beyond 1e12).
FlatBallSolve flat_ball_solve(const BoundarySpinor& alpha, BallBC cond);

struct IdentityReport {
  double max_residual = 0;
};
// D psi = -rho(nu) Dhat psi - nabla_nu psi + (H/2) psi on the unit boundary
IdentityReport verify_hypersurface_identity(const FlatBallSpinor& psi);

struct LichnerowiczReport {
  double lhs = 0, rhs = 0, residual = 0;
};
// int_S (<D psi,psi> - (H/2)|psi|^2) = int_B |nabla psi|^2 (flat, monogenic);
// n_r = 0 selects 2*degree_max + 2 radial nodes (exact quadrature)
LichnerowiczReport verify_lichnerowicz(const FlatBallSpinor& psi, int n_r = 0);

struct SpinInequalityReport {
  double mit_gap = 0;            // int <D psi,psi> - (1/2) int H |psi|^2
  double aps_gap = 0;            // same for P_{>=0} psi
  bool aps_condition_ok = false; // pointwise |P_{>=0} psi| <= |psi|
  double chirality_residual = 0; // |int H |psi_+|^2 - int H |psi_-|^2|
};
SpinInequalityReport verify_spin_inequalities(const FlatBallSpinor& psi,
                                              const DiracOperator& op,
                                              const DiracSpectrum& spec);

std::string spin_report_json(const SpinInequalityReport& r);

}  // namespace qlm
