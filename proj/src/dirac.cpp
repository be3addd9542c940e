#include "qlm/dirac.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "json.hpp"
#include "qlm/ball.hpp"
#include "qlm/errors.hpp"

namespace qlm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Cplx kI{0.0, 1.0};

int band_coeffs(int L) { return (L + 1) * (L + 1); }
int lidx(int l, int m) { return l * (l + 1) + m; }

// nodal values of the basis harmonic B_lm matching sh_analyze/sh_synthesize:
// B_lm = sgn * Pbar_l^{|m|}(cos theta) e^{i m phi} / sqrt(2 pi), with
// sgn = (-1)^m for negative odd m.
void harmonic_nodal(const SphereGrid& g, int l, int m, std::vector<Cplx>& out) {
  const int am = std::abs(m);
  const double sgn = (m < 0 && (am % 2)) ? -1.0 : 1.0;
  const double norm = sgn / std::sqrt(2.0 * kPi);
  out.resize(g.nodes());
  for (int i = 0; i < g.n_theta; ++i) {
    const double p = g.pbar(l, am, i) * norm;
    for (int j = 0; j < g.n_phi; ++j) {
      const double a = m * g.phi[j];
      out[i * g.n_phi + j] = p * Cplx(std::cos(a), std::sin(a));
    }
  }
}

// complex analysis truncated to band L (coefficients indexed by lidx)
Eigen::VectorXcd canalyze(const GridPtr& g, int L,
                          const std::vector<Cplx>& f) {
  SphereField re(g, 0), im(g, 0);
  const int N = g->nodes();
  re[0].resize(N);
  im[0].resize(N);
  for (int k = 0; k < N; ++k) {
    re[0][k] = f[k].real();
    im[0][k] = f[k].imag();
  }
  auto cr = sh_analyze(re);
  auto ci = sh_analyze(im);
  Eigen::VectorXcd c(band_coeffs(L));
  for (int l = 0; l <= L; ++l)
    for (int m = -l; m <= l; ++m)
      c[lidx(l, m)] =
          cr[SphereGrid::cidx(l, m)] + kI * ci[SphereGrid::cidx(l, m)];
  return c;
}

std::vector<Cplx> csynth(const GridPtr& g, int L, const Eigen::VectorXcd& c) {
  std::vector<Cplx> out(g->nodes(), Cplx{0.0, 0.0});
  std::vector<Cplx> y;
  for (int l = 0; l <= L; ++l)
    for (int m = -l; m <= l; ++m) {
      const Cplx a = c[lidx(l, m)];
      if (a == Cplx{0.0, 0.0}) continue;
      harmonic_nodal(*g, l, m, y);
      for (int k = 0; k < (int)out.size(); ++k) out[k] += a * y[k];
    }
  return out;
}

// Cartesian unit vectors of the node directions
void node_frame(const SphereGrid& g, std::vector<std::array<double, 3>>& xhat,
                std::vector<std::array<double, 3>>& that,
                std::vector<std::array<double, 3>>& phat) {
  const int N = g.nodes();
  xhat.resize(N);
  that.resize(N);
  phat.resize(N);
  for (int i = 0; i < g.n_theta; ++i)
    for (int j = 0; j < g.n_phi; ++j) {
      const int k = i * g.n_phi + j;
      const double st = std::sin(g.theta[i]), ct = std::cos(g.theta[i]);
      const double cp = std::cos(g.phi[j]), sp = std::sin(g.phi[j]);
      xhat[k] = {st * cp, st * sp, ct};
      that[k] = {ct * cp, ct * sp, -st};
      phat[k] = {-sp, cp, 0.0};
    }
}

// surface gradient of a complex scalar on the unit sphere, Cartesian comps
void surface_gradient(const GridPtr& g, const std::vector<Cplx>& f,
                      std::array<std::vector<Cplx>, 3>& grad) {
  const int N = g->nodes();
  std::vector<double> re(N), im(N);
  for (int k = 0; k < N; ++k) {
    re[k] = f[k].real();
    im[k] = f[k].imag();
  }
  auto rt = g->d_theta(re, 0), it = g->d_theta(im, 0);
  auto rp = g->d_phi(re), ip = g->d_phi(im);
  std::vector<std::array<double, 3>> xh, th, ph;
  node_frame(*g, xh, th, ph);
  for (auto& c : grad) c.assign(N, Cplx{0.0, 0.0});
  for (int i = 0; i < g->n_theta; ++i) {
    const double ist = 1.0 / std::sin(g->theta[i]);
    for (int j = 0; j < g->n_phi; ++j) {
      const int k = i * g->n_phi + j;
      const Cplx ft(rt[k], it[k]);
      const Cplx fp = Cplx(rp[k], ip[k]) * ist;
      for (int c = 0; c < 3; ++c) grad[c][k] = ft * th[k][c] + fp * ph[k][c];
    }
  }
}

// sigma.v acting on a 2-spinor, v real 3-vector
inline std::array<Cplx, 2> sigma_dot(const std::array<double, 3>& v,
                                     const std::array<Cplx, 2>& s) {
  return {v[2] * s[0] + Cplx(v[0], -v[1]) * s[1],
          Cplx(v[0], v[1]) * s[0] - v[2] * s[1]};
}

using SpinorNodal = std::array<std::vector<Cplx>, 2>;

// round-sphere boundary Dirac: D psi = i sigma.(grad_S psi x xhat) + psi
SpinorNodal round_dirac(const GridPtr& g, const SpinorNodal& psi) {
  const int N = g->nodes();
  std::array<std::array<std::vector<Cplx>, 3>, 2> gr;
  surface_gradient(g, psi[0], gr[0]);
  surface_gradient(g, psi[1], gr[1]);
  std::vector<std::array<double, 3>> xh, th, ph;
  node_frame(*g, xh, th, ph);
  SpinorNodal out;
  out[0].assign(N, Cplx{0.0, 0.0});
  out[1].assign(N, Cplx{0.0, 0.0});
  for (int k = 0; k < N; ++k) {
    // w_i = (grad psi x xhat)_i, spinor-valued
    std::array<std::array<Cplx, 2>, 3> w;
    for (int s = 0; s < 2; ++s) {
      const Cplx gx = gr[s][0][k], gy = gr[s][1][k], gz = gr[s][2][k];
      const auto& x = xh[k];
      w[0][s] = gy * x[2] - gz * x[1];
      w[1][s] = gz * x[0] - gx * x[2];
      w[2][s] = gx * x[1] - gy * x[0];
    }
    // i sum_i sigma_i w_i + psi
    out[0][k] = kI * (w[0][1] - kI * w[1][1] + w[2][0]) + psi[0][k];
    out[1][k] = kI * (w[0][0] + kI * w[1][0] - w[2][1]) + psi[1][k];
  }
  return out;
}

SphereField resample_scalar(const SphereField& f, const GridPtr& g) {
  if (f.grid == g || f.grid->L == g->L) {
    SphereField out = f;
    out.grid = g;
    return out;
  }
  auto c = sh_analyze(f);
  std::vector<Cplx> cg(g->n_coeff(), Cplx{0.0, 0.0});
  const int L = std::min(f.grid->L, g->L);
  for (int l = 0; l <= L; ++l)
    for (int m = -l; m <= l; ++m)
      cg[SphereGrid::cidx(l, m)] = c[SphereGrid::cidx(l, m)];
  return sh_synthesize(g, cg);
}

int triangle(int k) { return (k + 1) * (k + 2) / 2; }

}  // namespace

BoundarySpinor::BoundarySpinor(GridPtr g, int band) {
  grid = g;
  L = band;
  comp[0].assign(g->nodes(), Cplx{0.0, 0.0});
  comp[1].assign(g->nodes(), Cplx{0.0, 0.0});
  conformal_u = SphereField(g, 0, "u");
  conformal_u[0].assign(g->nodes(), 0.0);
}

std::vector<double> BoundarySpinor::norm_sq() const {
  std::vector<double> n(comp[0].size());
  for (size_t k = 0; k < n.size(); ++k)
    n[k] = std::norm(comp[0][k]) + std::norm(comp[1][k]);
  return n;
}

Cplx spinor_inner(const BoundarySpinor& a, const BoundarySpinor& b) {
  if (a.grid->L != b.grid->L)
    throw DimensionError("spinor_inner: grids differ");
  const int N = a.grid->nodes();
  std::vector<double> re(N), im(N);
  for (int k = 0; k < N; ++k) {
    const Cplx v = std::conj(a.comp[0][k]) * b.comp[0][k] +
                   std::conj(a.comp[1][k]) * b.comp[1][k];
    const double w = a.conformal_u[0].empty()
                         ? 1.0
                         : std::exp(2.0 * a.conformal_u[0][k]);
    re[k] = v.real() * w;
    im[k] = v.imag() * w;
  }
  return {a.grid->quad(re), a.grid->quad(im)};
}

BoundarySpinor clifford_normal(const BoundarySpinor& psi) {
  std::vector<std::array<double, 3>> xh, th, ph;
  node_frame(*psi.grid, xh, th, ph);
  BoundarySpinor out = psi;
  for (int k = 0; k < (int)psi.comp[0].size(); ++k) {
    auto v = sigma_dot(xh[k], {psi.comp[0][k], psi.comp[1][k]});
    out.comp[0][k] = kI * v[0];
    out.comp[1][k] = kI * v[1];
  }
  return out;
}

BoundarySpinor chiral_project(const BoundarySpinor& psi, int sign) {
  if (sign != 1 && sign != -1)
    throw ConfigError("chiral_project: sign must be +-1");
  BoundarySpinor rn = clifford_normal(psi);
  BoundarySpinor out = psi;
  const double s = sign;
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < (int)psi.comp[c].size(); ++k)
      out.comp[c][k] = 0.5 * (psi.comp[c][k] + s * kI * rn.comp[c][k]);
  return out;
}

DiracOperator boundary_dirac(const SphereField& conformal_u, int L) {
  if (L < 1 || L > 64) throw ConfigError("boundary_dirac: band limit out of range");
  if (conformal_u.rank != 0)
    throw DimensionError("boundary_dirac: conformal factor must be scalar");
  // aliasing gate: the factor must be resolved within the operator band
  {
    auto c = sh_analyze(conformal_u);
    double total = 1e-300, high = 0.0;
    for (int l = 0; l <= conformal_u.grid->L; ++l)
      for (int m = -l; m <= l; ++m) {
        const double a = std::abs(c[SphereGrid::cidx(l, m)]);
        total = std::max(total, a);
        if (l > L) high = std::max(high, a);
      }
    if (high > 1e-12 * std::max(total, 1.0))
      throw ConfigError(
          "boundary_dirac: conformal factor has content above the band limit");
  }

  DiracOperator op;
  op.L = L;
  op.grid = make_grid(L + 8);
  op.u = resample_scalar(conformal_u, op.grid);
  const GridPtr& g = op.grid;
  const int N = g->nodes();
  const int nc = band_coeffs(L), dim = 2 * nc;

  std::vector<double> eh(N), e2(N);  // e^{u/2}, e^{2u}
  for (int k = 0; k < N; ++k) {
    eh[k] = std::exp(0.5 * op.u[0][k]);
    e2[k] = std::exp(2.0 * op.u[0][k]);
  }

  // weighted projection matrix: canalyze(f) = Yw^H f on the evaluation grid
  Eigen::MatrixXcd Yw(N, nc);
  {
    std::vector<Cplx> y;
    Eigen::VectorXd wt(N);
    for (int i = 0; i < g->n_theta; ++i)
      for (int j = 0; j < g->n_phi; ++j)
        wt[i * g->n_phi + j] = g->w[i] * g->dphi_weight();
    for (int l = 0; l <= L; ++l)
      for (int m = -l; m <= l; ++m) {
        harmonic_nodal(*g, l, m, y);
        for (int k = 0; k < N; ++k) Yw(k, lidx(l, m)) = wt[k] * y[k];
      }
  }

  std::vector<std::array<double, 3>> xh, th, ph;
  node_frame(*g, xh, th, ph);

  op.A.resize(dim, dim);
  op.G.setZero(dim, dim);
  std::vector<Cplx> y;
  std::array<std::vector<Cplx>, 3> gr;
  Eigen::VectorXcd f(N), gcol(N), d0(N), d1(N);
  for (int l = 0; l <= L; ++l)
    for (int m = -l; m <= l; ++m) {
      harmonic_nodal(*g, l, m, y);
      // Gram column: <b_i, e^{2u} Y_lm>, block-diagonal in the spinor slot
      for (int k = 0; k < N; ++k) gcol[k] = e2[k] * y[k];
      Eigen::VectorXcd gc = Yw.adjoint() * gcol;
      for (int s = 0; s < 2; ++s)
        op.G.block(s * nc, s * nc + lidx(l, m), nc, 1) = gc;
      // operator columns: <b_i, e^{u/2} D_0(e^{u/2} b_j)>; the scalar
      // gradient of e^{u/2} Y_lm is shared between the two spinor slots
      std::vector<Cplx> fv(N);
      for (int k = 0; k < N; ++k) fv[k] = eh[k] * y[k];
      surface_gradient(g, fv, gr);
      for (int s = 0; s < 2; ++s) {
        for (int k = 0; k < N; ++k) {
          const auto& x = xh[k];
          // c = grad f x xhat (scalar 3-vector sitting in spinor slot s)
          const Cplx c1 = gr[1][k] * x[2] - gr[2][k] * x[1];
          const Cplx c2 = gr[2][k] * x[0] - gr[0][k] * x[2];
          const Cplx c3 = gr[0][k] * x[1] - gr[1][k] * x[0];
          Cplx o0, o1;  // sigma.w for the slot-s embedding of c
          if (s == 0) {
            o0 = c3;
            o1 = c1 + kI * c2;
          } else {
            o0 = c1 - kI * c2;
            o1 = -c3;
          }
          d0[k] = eh[k] * (kI * o0 + (s == 0 ? fv[k] : Cplx{0, 0}));
          d1[k] = eh[k] * (kI * o1 + (s == 1 ? fv[k] : Cplx{0, 0}));
        }
        const int col = s * nc + lidx(l, m);
        op.A.block(0, col, nc, 1) = Yw.adjoint() * d0;
        op.A.block(nc, col, nc, 1) = Yw.adjoint() * d1;
      }
    }
  op.self_adjoint_residual =
      (op.A - op.A.adjoint()).cwiseAbs().maxCoeff();
  op.A = 0.5 * (op.A + op.A.adjoint()).eval();
  return op;
}

BoundarySpinor apply_boundary_dirac(const DiracOperator& op,
                                    const BoundarySpinor& psi) {
  if (psi.grid->L != op.grid->L)
    throw DimensionError("apply_boundary_dirac: spinor not on operator grid");
  const int N = op.grid->nodes();
  SpinorNodal phi;
  for (int s = 0; s < 2; ++s) {
    phi[s].resize(N);
    for (int k = 0; k < N; ++k)
      phi[s][k] = std::exp(0.5 * op.u[0][k]) * psi.comp[s][k];
  }
  SpinorNodal d = round_dirac(op.grid, phi);
  BoundarySpinor out = psi;
  for (int s = 0; s < 2; ++s)
    for (int k = 0; k < N; ++k)
      out.comp[s][k] = std::exp(-1.5 * op.u[0][k]) * d[s][k];
  return out;
}

DiracSpectrum spectrum_and_projections(const DiracOperator& op) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      op.A, op.G, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success)
    throw ConvergenceError("spectrum_and_projections: eigensolver failed");
  DiracSpectrum sp;
  sp.L = op.L;
  const int dim = op.A.rows();
  sp.lambda.assign(es.eigenvalues().data(), es.eigenvalues().data() + dim);
  sp.vectors = es.eigenvectors();
  sp.gram_residual = (sp.vectors.adjoint() * op.G * sp.vectors -
                      Eigen::MatrixXcd::Identity(dim, dim))
                         .cwiseAbs()
                         .maxCoeff();
  // symmetry about zero over the well-resolved half band; modes nearer the
  // truncation edge are corrupted for non-constant conformal factors
  double sym = 0.0;
  for (double l : sp.lambda) {
    if (std::abs(l) > 0.5 * op.L) continue;
    double best = 1e300;
    for (double m : sp.lambda) best = std::min(best, std::abs(m + l));
    sym = std::max(sym, best);
  }
  sp.symmetry_residual = sym;
  return sp;
}

BoundarySpinor spectral_project(const DiracOperator& op,
                                const DiracSpectrum& spec,
                                const BoundarySpinor& psi, bool nonneg) {
  const int nc = band_coeffs(op.L);
  Eigen::VectorXcd p(2 * nc);
  p.segment(0, nc) = canalyze(op.grid, op.L, psi.comp[0]);
  p.segment(nc, nc) = canalyze(op.grid, op.L, psi.comp[1]);
  Eigen::VectorXcd a = spec.vectors.adjoint() * (op.G * p);
  for (int i = 0; i < a.size(); ++i) {
    const bool keep = nonneg ? (spec.lambda[i] >= 0.0) : (spec.lambda[i] < 0.0);
    if (!keep) a[i] = Cplx{0.0, 0.0};
  }
  Eigen::VectorXcd q = spec.vectors * a;
  BoundarySpinor out(op.grid, op.L);
  out.conformal_u = psi.conformal_u;
  out.comp[0] = csynth(op.grid, op.L, q.segment(0, nc));
  out.comp[1] = csynth(op.grid, op.L, q.segment(nc, nc));
  return out;
}

std::string spectrum_csv(const DiracSpectrum& spec) {
  std::ostringstream os;
  os.precision(15);
  os << "index,lambda,multiplicity_group\n";
  int group = 0;
  for (size_t i = 0; i < spec.lambda.size(); ++i) {
    if (i > 0 && std::abs(spec.lambda[i] - spec.lambda[i - 1]) > 1e-8) ++group;
    os << i << "," << spec.lambda[i] << "," << group << "\n";
  }
  return os.str();
}

// ---- monogenic basis ------------------------------------------------------

namespace {

// monomial exponent list of homogeneous degree k, lexicographic
std::vector<std::array<int, 3>> degree_monomials(int k) {
  std::vector<std::array<int, 3>> v;
  for (int a = k; a >= 0; --a)
    for (int b = k - a; b >= 0; --b) v.push_back({a, b, k - a - b});
  return v;
}

int monomial_index(const std::vector<std::array<int, 3>>& list, int a, int b,
                   int c) {
  for (int i = 0; i < (int)list.size(); ++i)
    if (list[i][0] == a && list[i][1] == b && list[i][2] == c) return i;
  throw DimensionError("monomial_index: exponent not found");
}

}  // namespace

std::shared_ptr<const MonogenicBasis> monogenic_basis(int degree_max) {
  if (degree_max < 0 || degree_max > 64)
    throw ConfigError("monogenic_basis: degree out of range");
  auto basis = std::make_shared<MonogenicBasis>();
  basis->degree_max = degree_max;
  for (int k = 0; k <= degree_max; ++k) {
    basis->monomial_offset.push_back((int)basis->monomials.size());
    auto mono = degree_monomials(k);
    basis->monomials.insert(basis->monomials.end(), mono.begin(), mono.end());
  }

  // quadrature grid for trace Gram matrices (products of degree <= 2k)
  auto g = make_grid(std::max(4, degree_max + 1));
  std::vector<std::array<double, 3>> xh, th, ph;
  node_frame(*g, xh, th, ph);
  const int N = g->nodes();

  for (int k = 0; k <= degree_max; ++k) {
    const auto mono = degree_monomials(k);
    const int T = (int)mono.size();
    Eigen::MatrixXcd nullV;
    if (k == 0) {
      nullV = Eigen::MatrixXcd::Identity(2, 2);
    } else {
      const auto lower = degree_monomials(k - 1);
      const int Tl = (int)lower.size();
      // sigma.grad : degree-k spinors -> degree-(k-1) spinors
      Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(2 * Tl, 2 * T);
      for (int j = 0; j < T; ++j) {
        const auto [a, b, c] = mono[j];
        auto put = [&](int row_block, int col_block, int da, int db, int dc,
                       Cplx w) {
          const int i = monomial_index(lower, da, db, dc);
          M(row_block * Tl + i, col_block * T + j) += w;
        };
        // row0 = dz psi0 + (dx - i dy) psi1; row1 = (dx + i dy) psi0 - dz psi1
        if (c > 0) put(0, 0, a, b, c - 1, (double)c);
        if (a > 0) put(0, 1, a - 1, b, c, (double)a);
        if (b > 0) put(0, 1, a, b - 1, c, -kI * (double)b);
        if (a > 0) put(1, 0, a - 1, b, c, (double)a);
        if (b > 0) put(1, 0, a, b - 1, c, kI * (double)b);
        if (c > 0) put(1, 1, a, b, c - 1, -(double)c);
      }
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeFullV);
      const int nullity = 2 * (k + 1);
      const auto& sv = svd.singularValues();
      // the divergence map is surjective, so the nullspace is exactly the
      // co-kernel: all 2 T_{k-1} singular values stay away from zero
      if (2 * T - (int)sv.size() != nullity ||
          sv[sv.size() - 1] <= 1e-10 * sv[0])
        throw ConvergenceError("monogenic_basis: unexpected nullspace rank");
      nullV = svd.matrixV().rightCols(nullity);
    }

    // orthonormalize the traces in L^2 of the unit sphere
    const int nm = nullV.cols();
    Eigen::MatrixXcd traces(2 * N, nm);
    for (int j = 0; j < nm; ++j)
      for (int s = 0; s < 2; ++s)
        for (int q = 0; q < N; ++q) {
          Cplx v{0.0, 0.0};
          for (int t = 0; t < T; ++t) {
            const auto [a, b, c] = mono[t];
            v += nullV(s * T + t, j) * std::pow(xh[q][0], a) *
                 std::pow(xh[q][1], b) * std::pow(xh[q][2], c);
          }
          traces(s * N + q, j) = v;
        }
    Eigen::MatrixXcd G(nm, nm);
    for (int i = 0; i < nm; ++i)
      for (int j = 0; j < nm; ++j) {
        std::vector<double> re(N), im(N);
        for (int q = 0; q < N; ++q) {
          const Cplx v = std::conj(traces(q, i)) * traces(q, j) +
                         std::conj(traces(N + q, i)) * traces(N + q, j);
          re[q] = v.real();
          im[q] = v.imag();
        }
        G(i, j) = Cplx(g->quad(re), g->quad(im));
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ge(G);
    Eigen::MatrixXcd W =
        ge.eigenvectors() * ge.eigenvalues()
                                .cwiseSqrt()
                                .cwiseInverse()
                                .cast<Cplx>()
                                .asDiagonal();
    Eigen::MatrixXcd B = nullV * W;  // orthonormal trace combinations

    for (int j = 0; j < nm; ++j) {
      MonogenicBasis::Mode mode;
      mode.degree = k;
      for (int s = 0; s < 2; ++s) {
        mode.poly[s] = Eigen::VectorXcd(T);
        for (int t = 0; t < T; ++t) mode.poly[s][t] = B(s * T + t, j);
      }
      basis->modes.push_back(std::move(mode));
    }
  }
  return basis;
}

std::array<Cplx, 2> eval_spinor(const FlatBallSpinor& psi, const double x[3]) {
  std::array<Cplx, 2> out{Cplx{0, 0}, Cplx{0, 0}};
  const auto& B = *psi.basis;
  for (int j = 0; j < (int)B.modes.size(); ++j) {
    const Cplx c = psi.coeff[j];
    if (c == Cplx{0.0, 0.0}) continue;
    const auto& mode = B.modes[j];
    const int off = B.monomial_offset[mode.degree];
    const int T = triangle(mode.degree);
    for (int t = 0; t < T; ++t) {
      const auto [a, b, cc] = B.monomials[off + t];
      const double m = std::pow(x[0], a) * std::pow(x[1], b) *
                       std::pow(x[2], cc);
      out[0] += c * mode.poly[0][t] * m;
      out[1] += c * mode.poly[1][t] * m;
    }
  }
  return out;
}

std::array<std::array<Cplx, 2>, 3> eval_spinor_gradient(
    const FlatBallSpinor& psi, const double x[3]) {
  std::array<std::array<Cplx, 2>, 3> out{};
  const auto& B = *psi.basis;
  for (int j = 0; j < (int)B.modes.size(); ++j) {
    const Cplx c = psi.coeff[j];
    if (c == Cplx{0.0, 0.0}) continue;
    const auto& mode = B.modes[j];
    const int off = B.monomial_offset[mode.degree];
    const int T = triangle(mode.degree);
    for (int t = 0; t < T; ++t) {
      const auto [a, b, cc] = B.monomials[off + t];
      const double pa = a ? std::pow(x[0], a - 1) : 0.0;
      const double pb = b ? std::pow(x[1], b - 1) : 0.0;
      const double pc = cc ? std::pow(x[2], cc - 1) : 0.0;
      const double xa = std::pow(x[0], a), xb = std::pow(x[1], b),
                   xc = std::pow(x[2], cc);
      const double d[3] = {a * pa * xb * xc, b * xa * pb * xc,
                           cc * xa * xb * pc};
      for (int i = 0; i < 3; ++i)
        for (int s = 0; s < 2; ++s) out[i][s] += c * mode.poly[s][t] * d[i];
    }
  }
  return out;
}

double monogenic_residual(const FlatBallSpinor& psi, const double x[3]) {
  auto g = eval_spinor_gradient(psi, x);
  // sigma.grad psi rows
  const Cplx r0 = g[2][0] + g[0][1] - kI * g[1][1];
  const Cplx r1 = g[0][0] + kI * g[1][0] - g[2][1];
  return std::sqrt(std::norm(r0) + std::norm(r1));
}

BoundarySpinor spinor_trace(const FlatBallSpinor& psi, const GridPtr& grid) {
  BoundarySpinor out(grid, psi.basis->degree_max);
  std::vector<std::array<double, 3>> xh, th, ph;
  node_frame(*grid, xh, th, ph);
  for (int k = 0; k < grid->nodes(); ++k) {
    const double x[3] = {xh[k][0], xh[k][1], xh[k][2]};
    auto v = eval_spinor(psi, x);
    out.comp[0][k] = v[0];
    out.comp[1][k] = v[1];
  }
  return out;
}

FlatBallSolve flat_ball_solve(const BoundarySpinor& alpha, BallBC cond) {
  for (double u : alpha.conformal_u[0])
    if (std::abs(u) > 1e-12)
      throw GeometryError("flat_ball_solve: boundary must be the round sphere");
  const int L = alpha.L;
  auto basis = monogenic_basis(L);
  const int nm = (int)basis->modes.size();

  FlatBallSolve out;
  out.psi.basis = basis;

  if (cond == BallBC::MIT) {
    const GridPtr g = make_grid(L + 8);
    const int N = g->nodes();
    std::vector<std::array<double, 3>> xh, th, ph;
    node_frame(*g, xh, th, ph);
    // resample alpha onto the matching grid
    BoundarySpinor a(g, L);
    for (int s = 0; s < 2; ++s)
      a.comp[s] = csynth(g, L, canalyze(alpha.grid, L, alpha.comp[s]));
    // rows: sqrt(w) Pi_+(T c - alpha) = 0 at every node
    Eigen::MatrixXcd M(2 * N, nm);
    Eigen::VectorXcd rhs(2 * N);
    std::vector<double> sw(N);
    for (int i = 0; i < g->n_theta; ++i)
      for (int j = 0; j < g->n_phi; ++j)
        sw[i * g->n_phi + j] = std::sqrt(g->w[i] * g->dphi_weight());
    auto plus = [&](int k, const std::array<Cplx, 2>& v) {
      // Pi_+ = (1 - sigma.xhat)/2
      auto sv = sigma_dot(xh[k], v);
      return std::array<Cplx, 2>{0.5 * (v[0] - sv[0]), 0.5 * (v[1] - sv[1])};
    };
    for (int j = 0; j < nm; ++j) {
      FlatBallSpinor unit{basis, Eigen::VectorXcd::Zero(nm)};
      unit.coeff[j] = 1.0;
      auto tr = spinor_trace(unit, g);
      for (int k = 0; k < N; ++k) {
        auto v = plus(k, {tr.comp[0][k], tr.comp[1][k]});
        M(k, j) = sw[k] * v[0];
        M(N + k, j) = sw[k] * v[1];
      }
    }
    for (int k = 0; k < N; ++k) {
      auto v = plus(k, {a.comp[0][k], a.comp[1][k]});
      rhs[k] = sw[k] * v[0];
      rhs[N + k] = sw[k] * v[1];
    }
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(
        M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    out.condition_number = sv[0] / sv[sv.size() - 1];
    if (!(out.condition_number < 1e12))
      throw GeometryError(
          "flat_ball_solve: matching system singular (condition number " +
          std::to_string(out.condition_number) + "), raise the band limit");
    out.psi.coeff = svd.solve(rhs);
    // boundary-condition residual, max over nodes
    auto tr = spinor_trace(out.psi, g);
    double r = 0;
    for (int k = 0; k < N; ++k) {
      auto v = plus(k, {tr.comp[0][k] - a.comp[0][k],
                        tr.comp[1][k] - a.comp[1][k]});
      r = std::max(r, std::sqrt(std::norm(v[0]) + std::norm(v[1])));
    }
    out.match_residual = r;
  } else {
    // APS: P_{>=0}(T c) = P_{>=0} alpha in the eigenbasis of the boundary
    // operator (monogenic traces are nonnegative-frequency)
    SphereField u0(alpha.grid, 0, "u");
    u0[0].assign(alpha.grid->nodes(), 0.0);
    DiracOperator op = boundary_dirac(u0, L + 2);
    DiracSpectrum sp = spectrum_and_projections(op);
    const int nc = band_coeffs(op.L);
    auto coeffs = [&](const BoundarySpinor& s) {
      Eigen::VectorXcd p(2 * nc);
      p.segment(0, nc) = canalyze(s.grid, op.L, s.comp[0]);
      p.segment(nc, nc) = canalyze(s.grid, op.L, s.comp[1]);
      return p;
    };
    std::vector<int> keep;
    for (int i = 0; i < (int)sp.lambda.size(); ++i)
      if (sp.lambda[i] >= 0.0) keep.push_back(i);
    Eigen::MatrixXcd M((int)keep.size(), nm);
    for (int j = 0; j < nm; ++j) {
      FlatBallSpinor unit{basis, Eigen::VectorXcd::Zero(nm)};
      unit.coeff[j] = 1.0;
      Eigen::VectorXcd t = op.G * coeffs(spinor_trace(unit, op.grid));
      for (int r = 0; r < (int)keep.size(); ++r)
        M(r, j) = sp.vectors.col(keep[r]).dot(t);
    }
    BoundarySpinor a(op.grid, op.L);
    for (int s = 0; s < 2; ++s)
      a.comp[s] = csynth(op.grid, L, canalyze(alpha.grid, L, alpha.comp[s]));
    Eigen::VectorXcd pa = op.G * coeffs(a);
    Eigen::VectorXcd rhs((int)keep.size());
    for (int r = 0; r < (int)keep.size(); ++r)
      rhs[r] = sp.vectors.col(keep[r]).dot(pa);
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(
        M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    out.condition_number = sv[0] / sv[sv.size() - 1];
    if (!(out.condition_number < 1e12))
      throw GeometryError(
          "flat_ball_solve: matching system singular (condition number " +
          std::to_string(out.condition_number) + "), raise the band limit");
    out.psi.coeff = svd.solve(rhs);
    auto diff = spinor_trace(out.psi, op.grid);
    for (int s = 0; s < 2; ++s)
      for (int k = 0; k < op.grid->nodes(); ++k)
        diff.comp[s][k] -= a.comp[s][k];
    auto proj = spectral_project(op, sp, diff, true);
    double r = 0;
    for (double v : proj.norm_sq()) r = std::max(r, std::sqrt(v));
    out.match_residual = r;
  }
  return out;
}

IdentityReport verify_hypersurface_identity(const FlatBallSpinor& psi) {
  const int L = psi.basis->degree_max;
  const GridPtr g = make_grid(L + 4);
  auto tr = spinor_trace(psi, g);
  SpinorNodal d = round_dirac(g, {tr.comp[0], tr.comp[1]});
  std::vector<std::array<double, 3>> xh, th, ph;
  node_frame(*g, xh, th, ph);
  IdentityReport rep;
  for (int k = 0; k < g->nodes(); ++k) {
    const double x[3] = {xh[k][0], xh[k][1], xh[k][2]};
    auto gr = eval_spinor_gradient(psi, x);
    for (int s = 0; s < 2; ++s) {
      // nabla_nu psi = -x.grad psi (nu interior); Dhat psi = 0 by the basis
      const Cplx nder =
          -(x[0] * gr[0][s] + x[1] * gr[1][s] + x[2] * gr[2][s]);
      const Cplx res = d[s][k] - (-nder + tr.comp[s][k]);
      rep.max_residual = std::max(rep.max_residual, std::abs(res));
    }
  }
  return rep;
}

LichnerowiczReport verify_lichnerowicz(const FlatBallSpinor& psi, int n_r) {
  const int L = psi.basis->degree_max;
  if (n_r <= 0) n_r = 2 * L + 2;  // exact for the polynomial radial profiles
  const GridPtr g = make_grid(std::max(4, L + 1));
  const int N = g->nodes();
  auto tr = spinor_trace(psi, g);
  SpinorNodal d = round_dirac(g, {tr.comp[0], tr.comp[1]});
  std::vector<double> lhsf(N);
  for (int k = 0; k < N; ++k) {
    const Cplx ip = std::conj(tr.comp[0][k]) * d[0][k] +
                    std::conj(tr.comp[1][k]) * d[1][k];
    const double n2 = std::norm(tr.comp[0][k]) + std::norm(tr.comp[1][k]);
    lhsf[k] = ip.real() - n2;  // H/2 = 1 on the unit sphere
  }
  LichnerowiczReport rep;
  rep.lhs = g->quad(lhsf);

  // |nabla psi|^2 over the ball; gradients are homogeneous of degree k-1,
  // so evaluate the per-degree angular profiles once and scale radially
  auto B = make_ball(std::max(4, L + 1), n_r);
  const auto S = B->sphere;
  std::vector<std::array<double, 3>> xh, th, ph;
  node_frame(*S, xh, th, ph);
  const int Ns = S->nodes();
  const int K = psi.basis->degree_max;
  // grad profile per degree: [deg][i][s][node]
  std::vector<std::array<std::array<std::vector<Cplx>, 2>, 3>> prof(K + 1);
  for (int kdeg = 0; kdeg <= K; ++kdeg)
    for (int i = 0; i < 3; ++i)
      for (int s = 0; s < 2; ++s) prof[kdeg][i][s].assign(Ns, Cplx{0, 0});
  for (int j = 0; j < (int)psi.basis->modes.size(); ++j) {
    if (psi.coeff[j] == Cplx{0.0, 0.0}) continue;
    FlatBallSpinor unit{psi.basis, Eigen::VectorXcd::Zero(psi.coeff.size())};
    unit.coeff[j] = psi.coeff[j];
    const int kdeg = psi.basis->modes[j].degree;
    for (int q = 0; q < Ns; ++q) {
      const double x[3] = {xh[q][0], xh[q][1], xh[q][2]};
      auto gr = eval_spinor_gradient(unit, x);
      for (int i = 0; i < 3; ++i)
        for (int s = 0; s < 2; ++s) prof[kdeg][i][s][q] += gr[i][s];
    }
  }
  std::vector<double> dens(B->nodes(), 0.0);
  for (int a = 0; a < B->n_r; ++a) {
    const double r = B->r[a];
    std::vector<double> rp(K + 1);
    for (int kdeg = 0; kdeg <= K; ++kdeg)
      rp[kdeg] = kdeg == 0 ? 0.0 : std::pow(r, kdeg - 1);
    for (int q = 0; q < Ns; ++q) {
      double v = 0;
      for (int i = 0; i < 3; ++i)
        for (int s = 0; s < 2; ++s) {
          Cplx sum{0, 0};
          for (int kdeg = 1; kdeg <= K; ++kdeg)
            sum += rp[kdeg] * prof[kdeg][i][s][q];
          v += std::norm(sum);
        }
      dens[B->idx(a, q)] = v;
    }
  }
  rep.rhs = B->quad(dens);
  rep.residual = std::abs(rep.lhs - rep.rhs);
  return rep;
}

SpinInequalityReport verify_spin_inequalities(const FlatBallSpinor& psi,
                                              const DiracOperator& op,
                                              const DiracSpectrum& spec) {
  const GridPtr g = op.grid;
  const int N = g->nodes();
  auto tr = spinor_trace(psi, g);
  auto integrate_pair = [&](const BoundarySpinor& a, const BoundarySpinor& b) {
    std::vector<double> f(N);
    for (int k = 0; k < N; ++k)
      f[k] = (std::conj(a.comp[0][k]) * b.comp[0][k] +
              std::conj(a.comp[1][k]) * b.comp[1][k])
                 .real();
    return g->quad(f);
  };
  auto gap = [&](const BoundarySpinor& s) {
    BoundarySpinor ds = apply_boundary_dirac(op, s);
    // H = 2 on the unit sphere, X = 0
    return integrate_pair(s, ds) - integrate_pair(s, s);
  };
  SpinInequalityReport rep;
  rep.mit_gap = gap(tr);
  BoundarySpinor p = spectral_project(op, spec, tr, true);
  rep.aps_gap = gap(p);
  rep.aps_condition_ok = true;
  auto np = p.norm_sq();
  auto nt = tr.norm_sq();
  for (int k = 0; k < N; ++k)
    if (np[k] > nt[k] + 1e-10) rep.aps_condition_ok = false;
  auto plusn = chiral_project(tr, +1).norm_sq();
  auto minusn = chiral_project(tr, -1).norm_sq();
  std::vector<double> diff(N);
  for (int k = 0; k < N; ++k) diff[k] = 2.0 * (plusn[k] - minusn[k]);
  rep.chirality_residual = std::abs(g->quad(diff));
  return rep;
}

std::string spin_report_json(const SpinInequalityReport& r) {
  nlohmann::json j;
  j["mit_gap"] = r.mit_gap;
  j["aps_gap"] = r.aps_gap;
  j["aps_condition_ok"] = r.aps_condition_ok;
  j["chirality_residual"] = r.chirality_residual;
  return j.dump(2);
}

}  // namespace qlm
