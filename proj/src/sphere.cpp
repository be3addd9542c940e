#include "qlm/sphere.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace qlm {

using std::numbers::pi;

double SphereGrid::dphi_weight() const { return 2.0 * pi / n_phi; }

namespace {

// Legendre P_n and derivative at x (monic-free, standard normalization).
void legendre_pair(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

void SphereGrid::build() {
  n_theta = L + 1;
  n_phi = 2 * L + 2;
  const int n = n_theta;
  x.resize(n);
  w.resize(n);
  theta.resize(n);
  for (int i = 0; i < n; ++i) {
    // descending roots of P_n <=> ascending theta
    double xi = std::cos(pi * (i + 0.75) / (n + 0.5));
    double p, dp;
    for (int it = 0; it < 100; ++it) {
      legendre_pair(n, xi, p, dp);
      double dx = -p / dp;
      xi += dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre_pair(n, xi, p, dp);
    x[i] = xi;
    w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
    theta[i] = std::acos(xi);
  }
  phi.resize(n_phi);
  for (int j = 0; j < n_phi; ++j) phi[j] = 2.0 * pi * j / n_phi;

  // ---- associated Legendre tables (orthonormal on [-1,1], CS phase) ----
  poffsets_.resize(L + 1);
  int total = 0;
  for (int m = 0; m <= L; ++m) {
    poffsets_[m] = total;
    total += (L - m + 1) * n_theta;
  }
  ptab_.assign(total, 0.0);
  dptab_.assign(total, 0.0);
  for (int i = 0; i < n_theta; ++i) {
    const double xi = x[i];
    const double st = std::sin(theta[i]);  // > 0 at all GL nodes
    const double ct = xi;
    // seed P^m_m along m
    double pmm = 1.0 / std::sqrt(2.0), dpmm = 0.0;
    for (int m = 0; m <= L; ++m) {
      if (m > 0) {
        const double f = -std::sqrt((2.0 * m + 1.0) / (2.0 * m));
        dpmm = f * (ct * pmm + st * dpmm);
        pmm = f * st * pmm;
      }
      ptab_[poff(m, m) + i] = pmm;
      dptab_[poff(m, m) + i] = dpmm;
      if (m + 1 <= L) {
        const double f = std::sqrt(2.0 * m + 3.0);
        double p1 = f * xi * pmm;
        double dp1 = f * (-st * pmm + xi * dpmm);
        ptab_[poff(m + 1, m) + i] = p1;
        dptab_[poff(m + 1, m) + i] = dp1;
        double pl2 = pmm, dpl2 = dpmm, pl1 = p1, dpl1 = dp1;
        for (int l = m + 2; l <= L; ++l) {
          const double a =
              std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
          const double b = std::sqrt(
              ((l - 1.0) * (l - 1.0) - double(m) * m) /
              (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
          double pl = a * (xi * pl1 - b * pl2);
          double dpl = a * (-st * pl1 + xi * dpl1 - b * dpl2);
          ptab_[poff(l, m) + i] = pl;
          dptab_[poff(l, m) + i] = dpl;
          pl2 = pl1;
          dpl2 = dpl1;
          pl1 = pl;
          dpl1 = dpl;
        }
      }
    }
  }

  // ---- theta-fit systems ----
  const int nt = n_theta;
  Eigen::MatrixXd C(nt, nt), S(nt, nt);
  for (int i = 0; i < nt; ++i)
    for (int k = 0; k < nt; ++k) {
      C(i, k) = std::cos(k * theta[i]);
      S(i, k) = std::sin((k + 1) * theta[i]);
    }
  Eigen::MatrixXd Ci = C.inverse();
  Eigen::MatrixXd Si = S.inverse();
  cos_inv_.assign(Ci.data(), Ci.data() + nt * nt);
  sin_inv_.assign(Si.data(), Si.data() + nt * nt);
  cos_fwd_.resize(nt * nt);
  sin_fwd_.resize(nt * nt);
  for (int i = 0; i < nt; ++i)
    for (int k = 0; k < nt; ++k) {
      cos_fwd_[i * nt + k] = C(i, k);
      sin_fwd_[i * nt + k] = S(i, k);
    }
  dcos_tab_.resize(nt * nt);
  dsin_tab_.resize(nt * nt);
  for (int i = 0; i < nt; ++i)
    for (int k = 0; k < nt; ++k) {
      dcos_tab_[i * nt + k] = -k * std::sin(k * theta[i]);
      dsin_tab_[i * nt + k] = (k + 1) * std::cos((k + 1) * theta[i]);
    }
}

GridPtr make_grid(int L) {
  if (L < 4 || L > 256)
    throw ConfigError("make_grid: band limit L=" + std::to_string(L) +
                      " outside [4,256]");
  auto g = std::make_shared<SphereGrid>();
  g->L = L;
  g->build();
  return g;
}

GridPtr SphereGrid::make(int L) { return make_grid(L); }

double SphereGrid::quad(const std::vector<double>& v) const {
  double s = 0.0;
  for (int i = 0; i < n_theta; ++i) {
    double row = 0.0;
    for (int j = 0; j < n_phi; ++j) row += v[i * n_phi + j];
    s += w[i] * row;
  }
  return s * dphi_weight();
}

namespace {

// forward DFT over phi: u_m(i) = sum_j v_ij e^{-i m phi_j}, m = 0..L
void phi_dft(const SphereGrid& g, const std::vector<double>& v,
             std::vector<std::complex<double>>& u) {
  const int nt = g.n_theta, np = g.n_phi, M = g.L;
  u.assign(nt * (M + 1), {0.0, 0.0});
  for (int i = 0; i < nt; ++i)
    for (int m = 0; m <= M; ++m) {
      std::complex<double> s{0.0, 0.0};
      for (int j = 0; j < np; ++j) {
        double a = -m * g.phi[j];
        s += v[i * np + j] * std::complex<double>(std::cos(a), std::sin(a));
      }
      u[i * (M + 1) + m] = s;
    }
}

// inverse with negative modes implied by real symmetry (Nyquist dropped)
void phi_idft(const SphereGrid& g, const std::vector<std::complex<double>>& u,
              std::vector<double>& v) {
  const int nt = g.n_theta, np = g.n_phi, M = g.L;
  v.assign(nt * np, 0.0);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < np; ++j) {
      double s = u[i * (M + 1)].real();
      for (int m = 1; m <= M; ++m) {
        double a = m * g.phi[j];
        const auto& um = u[i * (M + 1) + m];
        s += 2.0 * (um.real() * std::cos(a) - um.imag() * std::sin(a));
      }
      v[i * np + j] = s / np;
    }
}

}  // namespace

std::vector<double> SphereGrid::d_theta(const std::vector<double>& comp,
                                        int theta_parity) const {
  const int nt = n_theta, M = L;
  std::vector<std::complex<double>> u, du(nt * (M + 1));
  phi_dft(*this, comp, u);
  std::vector<std::complex<double>> coef(nt), tmp(nt);
  for (int m = 0; m <= M; ++m) {
    const bool even = ((m + theta_parity) % 2) == 0;
    const double* inv = even ? cos_inv_.data() : sin_inv_.data();
    const double* fwd = even ? cos_fwd_.data() : sin_fwd_.data();
    const double* dtab = even ? dcos_tab_.data() : dsin_tab_.data();
    for (int k = 0; k < nt; ++k) {
      std::complex<double> s{0.0, 0.0};
      for (int i = 0; i < nt; ++i) s += inv[i * nt + k] * u[i * (M + 1) + m];
      coef[k] = s;
    }
    // one step of iterative refinement keeps the fit residual at the
    // roundoff floor (the raw inverse leaves ~1e-12 noise that the 3-ball
    // operators would amplify)
    for (int i = 0; i < nt; ++i) {
      std::complex<double> s{0.0, 0.0};
      for (int k = 0; k < nt; ++k) s += fwd[i * nt + k] * coef[k];
      tmp[i] = u[i * (M + 1) + m] - s;
    }
    for (int k = 0; k < nt; ++k) {
      std::complex<double> s{0.0, 0.0};
      for (int i = 0; i < nt; ++i) s += inv[i * nt + k] * tmp[i];
      coef[k] += s;
    }
    for (int i = 0; i < nt; ++i) {
      std::complex<double> s{0.0, 0.0};
      for (int k = 0; k < nt; ++k) s += dtab[i * nt + k] * coef[k];
      du[i * (M + 1) + m] = s;
    }
  }
  std::vector<double> out;
  phi_idft(*this, du, out);
  return out;
}

std::vector<double> SphereGrid::d_phi(const std::vector<double>& comp) const {
  const int nt = n_theta, M = L;
  std::vector<std::complex<double>> u;
  phi_dft(*this, comp, u);
  for (int i = 0; i < nt; ++i)
    for (int m = 0; m <= M; ++m)
      u[i * (M + 1) + m] *= std::complex<double>(0.0, m);
  std::vector<double> out;
  phi_idft(*this, u, out);
  return out;
}

SphereField::SphereField(GridPtr g, int r, std::string n)
    : grid(std::move(g)), rank(r), name(std::move(n)) {
  for (int c = 0; c < ncomp(); ++c) comp[c].assign(grid->nodes(), 0.0);
}

SphereField SphereField::scalar(GridPtr g,
                                const std::function<double(double, double)>& f,
                                std::string n) {
  SphereField out(g, 0, std::move(n));
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j)
      out.comp[0][i * g->n_phi + j] = f(g->theta[i], g->phi[j]);
  return out;
}

int SphereField::theta_parity(int rank, int c) {
  if (rank == 0) return 0;
  if (rank == 1) return c == 0 ? 1 : 0;  // (a_theta, a_phi)
  return c == 1 ? 1 : 0;                 // (g_tt, g_tp, g_pp)
}

void SphereField::check_grid(const SphereField& other) const {
  // grids at equal band limit are value-identical by construction
  if (grid != other.grid && (!grid || !other.grid || grid->L != other.grid->L))
    throw DimensionError("fields live on different grids");
}

std::vector<std::complex<double>> sh_analyze(const SphereField& f) {
  if (f.rank != 0) throw DimensionError("sh_analyze: rank-0 field required");
  const SphereGrid& g = *f.grid;
  std::vector<std::complex<double>> u;
  phi_dft(g, f.comp[0], u);
  std::vector<std::complex<double>> c(g.n_coeff(), {0.0, 0.0});
  const double norm = g.dphi_weight() / std::sqrt(2.0 * pi);
  for (int m = 0; m <= g.L; ++m)
    for (int l = m; l <= g.L; ++l) {
      std::complex<double> s{0.0, 0.0};
      for (int i = 0; i < g.n_theta; ++i)
        s += g.w[i] * g.pbar(l, m, i) * u[i * (g.L + 1) + m];
      s *= norm;
      c[SphereGrid::cidx(l, m)] = s;
      if (m > 0)
        c[SphereGrid::cidx(l, -m)] =
            ((m % 2) ? -1.0 : 1.0) * std::conj(s);
    }
  return c;
}

SphereField sh_synthesize(const GridPtr& g,
                          const std::vector<std::complex<double>>& c) {
  if ((int)c.size() != g->n_coeff())
    throw DimensionError("sh_synthesize: coefficient vector size mismatch");
  SphereField out(g, 0);
  const double norm = 1.0 / std::sqrt(2.0 * pi);
  // g_m(i) = sum_l c_lm Pbar_l^{|m|} * (CS sign for m<0)
  const int M = g->L;
  std::vector<std::complex<double>> gm(g->n_theta * (2 * M + 1));
  for (int m = -M; m <= M; ++m) {
    int am = std::abs(m);
    double sgn = (m < 0 && (am % 2)) ? -1.0 : 1.0;
    for (int i = 0; i < g->n_theta; ++i) {
      std::complex<double> s{0.0, 0.0};
      for (int l = am; l <= M; ++l)
        s += c[SphereGrid::cidx(l, m)] * g->pbar(l, am, i);
      gm[i * (2 * M + 1) + (m + M)] = s * sgn * norm;
    }
  }
  for (int i = 0; i < g->n_theta; ++i)
    for (int j = 0; j < g->n_phi; ++j) {
      std::complex<double> s{0.0, 0.0};
      for (int m = -M; m <= M; ++m) {
        double a = m * g->phi[j];
        s += gm[i * (2 * M + 1) + (m + M)] *
             std::complex<double>(std::cos(a), std::sin(a));
      }
      out.comp[0][i * g->n_phi + j] = s.real();
    }
  return out;
}

Metric2Inv invert_metric(const SphereField& metric) {
  if (metric.rank != 2)
    throw DimensionError("invert_metric: rank-2 field required");
  const int n = metric.grid->nodes();
  Metric2Inv inv;
  inv.itt.resize(n);
  inv.itp.resize(n);
  inv.ipp.resize(n);
  inv.det.resize(n);
  double worst = 1e300;
  int worst_node = -1;
  for (int k = 0; k < n; ++k) {
    const double tt = metric.comp[0][k], tp = metric.comp[1][k],
                 pp = metric.comp[2][k];
    const double det = tt * pp - tp * tp;
    const double mineig =
        0.5 * (tt + pp - std::sqrt((tt - pp) * (tt - pp) + 4 * tp * tp));
    if (mineig < worst) {
      worst = mineig;
      worst_node = k;
    }
    inv.det[k] = det;
    inv.itt[k] = pp / det;
    inv.itp[k] = -tp / det;
    inv.ipp[k] = tt / det;
  }
  if (worst <= 0.0)
    throw GeometryError("metric not positive definite; worst node " +
                        std::to_string(worst_node) + " min eigenvalue " +
                        std::to_string(worst));
  return inv;
}

int Christoffel::parity(int k) {
  // index order [^t_tt, ^t_tp, ^t_pp, ^p_tt, ^p_tp, ^p_pp]
  static const int p[6] = {1, 0, 1, 0, 1, 0};
  return p[k];
}

Christoffel christoffel(const SphereField& metric) {
  const auto& g = metric.grid;
  Metric2Inv inv = invert_metric(metric);
  // partials of the metric components
  std::array<std::vector<double>, 3> dt, dp;
  for (int c = 0; c < 3; ++c) {
    dt[c] = g->d_theta(metric.comp[c], SphereField::theta_parity(2, c));
    dp[c] = g->d_phi(metric.comp[c]);
  }
  Christoffel ch;
  ch.grid = g;
  const int n = g->nodes();
  for (auto& v : ch.c) v.resize(n);
  for (int k = 0; k < n; ++k) {
    // lowered symbols G_{l,ij} = (d_i g_jl + d_j g_il - d_l g_ij)/2
    const double g_tt_t = dt[0][k], g_tt_p = dp[0][k];
    const double g_tp_t = dt[1][k], g_tp_p = dp[1][k];
    const double g_pp_t = dt[2][k], g_pp_p = dp[2][k];
    const double G_t_tt = 0.5 * g_tt_t;
    const double G_t_tp = 0.5 * g_tt_p;
    const double G_t_pp = g_tp_p - 0.5 * g_pp_t;
    const double G_p_tt = g_tp_t - 0.5 * g_tt_p;
    const double G_p_tp = 0.5 * g_pp_t;
    const double G_p_pp = 0.5 * g_pp_p;
    ch.c[0][k] = inv.itt[k] * G_t_tt + inv.itp[k] * G_p_tt;
    ch.c[1][k] = inv.itt[k] * G_t_tp + inv.itp[k] * G_p_tp;
    ch.c[2][k] = inv.itt[k] * G_t_pp + inv.itp[k] * G_p_pp;
    ch.c[3][k] = inv.itp[k] * G_t_tt + inv.ipp[k] * G_p_tt;
    ch.c[4][k] = inv.itp[k] * G_t_tp + inv.ipp[k] * G_p_tp;
    ch.c[5][k] = inv.itp[k] * G_t_pp + inv.ipp[k] * G_p_pp;
  }
  return ch;
}

CovariantOut covariant_calculus(const SphereField& metric,
                                const SphereField& f) {
  metric.check_grid(f);
  if (metric.rank != 2 || f.rank != 0)
    throw DimensionError("covariant_calculus: expects (rank2, rank0)");
  const auto& g = metric.grid;
  Metric2Inv inv = invert_metric(metric);
  Christoffel ch = christoffel(metric);

  CovariantOut out{SphereField(g, 1, f.name + "_grad"),
                   SphereField(g, 2, f.name + "_hess"),
                   SphereField(g, 0, f.name + "_lap")};
  auto ft = g->d_theta(f.comp[0], 0);
  auto fp = g->d_phi(f.comp[0]);
  auto ftt = g->d_theta(ft, 1);
  auto ftp = g->d_theta(fp, 0);  // = d_theta d_phi f
  auto fpp = g->d_phi(fp);
  const int n = g->nodes();
  for (int k = 0; k < n; ++k) {
    out.grad.comp[0][k] = ft[k];
    out.grad.comp[1][k] = fp[k];
    const double htt = ftt[k] - ch.c[0][k] * ft[k] - ch.c[3][k] * fp[k];
    const double htp = ftp[k] - ch.c[1][k] * ft[k] - ch.c[4][k] * fp[k];
    const double hpp = fpp[k] - ch.c[2][k] * ft[k] - ch.c[5][k] * fp[k];
    out.hessian.comp[0][k] = htt;
    out.hessian.comp[1][k] = htp;
    out.hessian.comp[2][k] = hpp;
    out.laplacian.comp[0][k] =
        inv.itt[k] * htt + 2.0 * inv.itp[k] * htp + inv.ipp[k] * hpp;
  }
  return out;
}

double integrate(const SphereField& f, const SphereField& area_form) {
  f.check_grid(area_form);
  if (f.rank != 0 || area_form.rank != 0)
    throw DimensionError("integrate: rank-0 fields required");
  const auto& g = *f.grid;
  std::vector<double> prod(g.nodes());
  for (int k = 0; k < g.nodes(); ++k)
    prod[k] = f.comp[0][k] * area_form.comp[0][k];
  return g.quad(prod);
}

void dump_field_csv(const SphereField& f, const std::string& path) {
  std::ofstream os(path);
  const auto& g = *f.grid;
  if (f.rank == 0) {
    os << "theta,phi,value\n";
    for (int i = 0; i < g.n_theta; ++i)
      for (int j = 0; j < g.n_phi; ++j) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", g.theta[i],
                      g.phi[j], f.comp[0][i * g.n_phi + j]);
        os << buf;
      }
  } else {
    os << "theta,phi,value,component\n";
    static const char* names1[] = {"theta", "phi"};
    static const char* names2[] = {"tt", "tp", "pp"};
    for (int c = 0; c < f.ncomp(); ++c)
      for (int i = 0; i < g.n_theta; ++i)
        for (int j = 0; j < g.n_phi; ++j) {
          char buf[112];
          std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s\n", g.theta[i],
                        g.phi[j], f.comp[c][i * g.n_phi + j],
                        f.rank == 1 ? names1[c] : names2[c]);
          os << buf;
        }
  }
  nlohmann::json meta{{"L", g.L},
                      {"rank", f.rank},
                      {"name", f.name},
                      {"n_theta", g.n_theta},
                      {"n_phi", g.n_phi},
                      {"node_order", "theta ascending, phi ascending"}};
  std::ofstream(path + ".json") << meta.dump(2) << "\n";
}

}  // namespace qlm
