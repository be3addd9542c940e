#pragma once
#include "qlm/ball.hpp"
#include "qlm/surface.hpp"

namespace qlm {

// Graph reduction on the product Omega x R: solve the quasilinear graph
// equation for the height f with Dirichlet data f = tau, and extract the
// boundary package entering the reduced energy integrand
//   ktilde - <acc, e3~> + P(e4~, e3~).

struct JangOptions {
  double tol = 1e-9;            // residual max-norm target
  int max_iter = 40;            // Newton iterations per continuation step
  double damping = 0.5;         // backtracking factor for the line search
  int continuation_steps = 1;   // initial boundary-data schedule (adaptive)
  double blowup_threshold = 1e6;
};

struct HorizonObstruction {
  double max_gradient = 0;  // g-norm of grad f at the worst node
  int locus_node = -1;      // ball node index of near-blow-up
  std::vector<double> f;    // offending iterate
};

struct JangBoundaryPackage {
  SphereField ktilde;         // mean curvature of the graph boundary
  SphereField accel_term;     // <nabla~_{e4~} e4~, e3~>
  SphereField momentum_term;  // P(e4~, e3~)
  SphereField f3;             // normal derivative of f at the boundary
  SphereField phi;            // boost angle, sinh(phi) = -f3/sqrt(1+|dtau|^2)
  SphereField sigma;          // induced boundary metric of (Omega, g), rank 2
  SphereField sigma_hat;      // induced metric of the graph boundary, rank 2
  SphereField k_sigma;        // mean curvature of Sigma in (Omega, g)
  SphereField trP_sigma;      // trace of P over the tangent space of Sigma
  // physical-route integrand W k - f3 trP_Sigma + P(e3, grad tau)
  // + grad tau . grad phi; equals sqrt(1+|dtau|^2) (ktilde - accel + momentum)
  SphereField h_physical;
};

struct JangSolution {
  BallPtr grid;
  std::vector<double> f;
  std::vector<double> W;               // sqrt(1 + |grad f|^2_g)
  std::array<std::vector<double>, 6> g_tilde;  // g + df (x) df
  std::vector<double> residual_field;
  double residual_max = 0;
  JangBoundaryPackage boundary;
  // X-flat restricted to the graph, in graph coordinates, plus derived scalars
  std::array<std::vector<double>, 3> xi;
  std::vector<double> divX, X2;
  int newton_iterations = 0;
  std::vector<double> residual_history;
  std::vector<double> damping_history;
};

struct JangOutcome {
  bool blew_up = false;
  JangSolution sol;                // valid when !blew_up
  HorizonObstruction obstruction;  // valid when blew_up
};

JangOutcome solve_jang(const BallDataSet& data, const SphereField& tau,
                       const JangOptions& opts = {});

// Independent residual evaluation (fresh geometry, no solver state).
std::vector<double> jang_residual(const BallDataSet& data,
                                  const std::vector<double>& f);

JangBoundaryPackage graph_boundary_data(const JangSolution& sol,
                                        const BallDataSet& data);

struct EnergyReport {
  double min_curvature_condition = 0;  // min(R~ + 2 div X - 2 |X|^2)
  double min_mean_condition = 0;       // min(ktilde - <X, nu>)
  bool dominant_energy_ok = false;
};
EnergyReport x_field_and_energy_report(const JangSolution& sol,
                                       const BallDataSet& data);

// radial-slice CSVs plus a JSON boundary package
void dump_jang(const JangSolution& sol, const std::string& prefix);

}  // namespace qlm
