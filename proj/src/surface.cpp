#include "qlm/surface.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace qlm {

SphereField area_density(const SphereField& metric) {
  if (metric.rank != 2) throw DimensionError("area_density: rank-2 required");
  const auto& g = metric.grid;
  SphereField mu(g, 0, metric.name + "_mu");
  for (int i = 0; i < g->n_theta; ++i) {
    const double st = std::sin(g->theta[i]);
    for (int j = 0; j < g->n_phi; ++j) {
      const int k = i * g->n_phi + j;
      const double det = metric.comp[0][k] * metric.comp[2][k] -
                         metric.comp[1][k] * metric.comp[1][k];
      mu.comp[0][k] = std::sqrt(det) / st;
    }
  }
  return mu;
}

SphereField gauss_curvature(const SphereField& metric) {
  if (metric.rank != 2)
    throw DimensionError("gauss_curvature: rank-2 required");
  const auto& g = metric.grid;
  Metric2Inv inv = invert_metric(metric);
  Christoffel ch = christoffel(metric);
  // derivatives of the Christoffel components entering R^a_{phi theta phi}
  auto d_t_Gt_pp = g->d_theta(ch.c[2], Christoffel::parity(2));
  auto d_p_Gt_tp = g->d_phi(ch.c[1]);
  auto d_t_Gp_pp = g->d_theta(ch.c[5], Christoffel::parity(5));
  auto d_p_Gp_tp = g->d_phi(ch.c[4]);
  SphereField K(g, 0, "K");
  const int n = g->nodes();
  for (int k = 0; k < n; ++k) {
    const double Gt_tt = ch.c[0][k], Gt_tp = ch.c[1][k], Gt_pp = ch.c[2][k];
    const double Gp_tt = ch.c[3][k], Gp_tp = ch.c[4][k], Gp_pp = ch.c[5][k];
    // R^t_{p t p} and R^p_{p t p}
    const double Rt = d_t_Gt_pp[k] - d_p_Gt_tp[k] +
                      (Gt_tt * Gt_pp + Gt_tp * Gp_pp) -
                      (Gt_tp * Gt_tp + Gt_pp * Gp_tp);
    const double Rp = d_t_Gp_pp[k] - d_p_Gp_tp[k] +
                      (Gp_tt * Gt_pp + Gp_tp * Gp_pp) -
                      (Gp_tp * Gt_tp + Gp_pp * Gp_tp);
    const double R_lower = metric.comp[0][k] * Rt + metric.comp[1][k] * Rp;
    K.comp[0][k] = R_lower / inv.det[k];
  }
  return K;
}

SurfaceMetricBundle build_bundle(const SphereField& sigma,
                                 const SphereField& tau) {
  sigma.check_grid(tau);
  if (sigma.rank != 2 || tau.rank != 0)
    throw DimensionError("build_bundle: expects (rank2 sigma, rank0 tau)");
  const auto& g = sigma.grid;
  SurfaceMetricBundle b;
  b.grid = g;
  b.sigma = sigma;
  b.tau = tau;

  Metric2Inv inv = invert_metric(sigma);
  auto cov = covariant_calculus(sigma, tau);
  b.grad_tau = cov.grad;
  b.hess_tau = cov.hessian;

  const int n = g->nodes();
  b.sigma_hat = SphereField(g, 2, "sigma_hat");
  b.area_ratio = SphereField(g, 0, "area_ratio");
  b.grad_tau_sq.resize(n);
  for (int k = 0; k < n; ++k) {
    const double tt = cov.grad.comp[0][k], tp = cov.grad.comp[1][k];
    const double gsq = inv.itt[k] * tt * tt + 2 * inv.itp[k] * tt * tp +
                       inv.ipp[k] * tp * tp;
    b.grad_tau_sq[k] = gsq;
    b.area_ratio.comp[0][k] = std::sqrt(1.0 + gsq);
    b.sigma_hat.comp[0][k] = sigma.comp[0][k] + tt * tt;
    b.sigma_hat.comp[1][k] = sigma.comp[1][k] + tt * tp;
    b.sigma_hat.comp[2][k] = sigma.comp[2][k] + tp * tp;
  }
  b.K = gauss_curvature(sigma);
  b.K.name = "K";
  b.K_hat = SphereField(g, 0, "K_hat");
  for (int k = 0; k < n; ++k) {
    const double det_hess = b.hess_tau.comp[0][k] * b.hess_tau.comp[2][k] -
                            b.hess_tau.comp[1][k] * b.hess_tau.comp[1][k];
    const double w = 1.0 + b.grad_tau_sq[k];
    b.K_hat.comp[0][k] =
        (b.K.comp[0][k] + det_hess / inv.det[k] / w) / w;
  }
  b.K_hat_direct = gauss_curvature(b.sigma_hat);
  b.K_hat_direct.name = "K_hat_direct";
  b.mu_sigma = area_density(sigma);
  b.mu_sigma.name = "mu_sigma";
  b.mu_sigma_hat = area_density(b.sigma_hat);
  b.mu_sigma_hat.name = "mu_sigma_hat";
  return b;
}

ConvexityReport convexity_check(const SurfaceMetricBundle& b) {
  ConvexityReport r;
  const int n = b.grid->nodes();
  Metric2Inv inv = invert_metric(b.sigma);
  r.min_value = 1e300;
  for (int k = 0; k < n; ++k) {
    const double det_hess = b.hess_tau.comp[0][k] * b.hess_tau.comp[2][k] -
                            b.hess_tau.comp[1][k] * b.hess_tau.comp[1][k];
    const double v = b.K.comp[0][k] +
                     det_hess / inv.det[k] / (1.0 + b.grad_tau_sq[k]);
    if (v < r.min_value) {
      r.min_value = v;
      r.argmin_node = k;
    }
  }
  r.admissible_a = r.min_value > ConvexityReport::margin;
  return r;
}

void dump_bundle(const SurfaceMetricBundle& b, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const SphereField& f, const std::string& nm) {
    dump_field_csv(f, dir + "/" + nm + ".csv");
  };
  put(b.sigma, "sigma");
  put(b.sigma_hat, "sigma_hat");
  put(b.tau, "tau");
  put(b.area_ratio, "area_ratio");
  put(b.K, "K");
  put(b.K_hat, "K_hat");
  ConvexityReport cr = convexity_check(b);
  double minK = 1e300, minKh = 1e300;
  for (int k = 0; k < b.grid->nodes(); ++k) {
    minK = std::min(minK, b.K.comp[0][k]);
    minKh = std::min(minKh, b.K_hat.comp[0][k]);
  }
  nlohmann::json j{{"min_K", minK},
                   {"min_K_hat", minKh},
                   {"admissible_a", cr.admissible_a},
                   {"convexity_min", cr.min_value}};
  std::ofstream(dir + "/summary.json") << j.dump(2) << "\n";
}

}  // namespace qlm
