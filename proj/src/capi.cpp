#include "qlm.h"

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qlm/catalog.hpp"
#include "qlm/dirac.hpp"
#include "qlm/embedding.hpp"
#include "qlm/errors.hpp"
#include "qlm/jang.hpp"
#include "qlm/mass.hpp"
#include "qlm/verify.hpp"

using nlohmann::json;
using namespace qlm;

struct qlm_ctx {
  std::string error;
};

struct qlm_result {
  std::vector<std::pair<std::string, std::string>> artifacts;
};

namespace {

const std::vector<std::string> kBoundaryCases = {
    "minkowski_round", "minkowski_graph", "minkowski_boosted",
    "schwarzschild_round"};
const std::vector<std::string> kBallCases = {"flat", "flat_with_P",
                                             "conformally_flat", "bad_energy"};

bool is_boundary_case(const std::string& name) {
  for (const auto& n : kBoundaryCases)
    if (n == name) return true;
  return false;
}

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const auto& a : allowed)
      if (a == key) ok = true;
    if (!ok)
      throw ConfigError("request: unknown key '" + key + "' in " + where);
  }
}

CatalogParams parse_params(const json& req) {
  CatalogParams p;
  if (!req.contains("params")) return p;
  const json& j = req.at("params");
  if (!j.is_object()) throw ConfigError("request: params must be an object");
  check_keys(j, {"M", "r", "a", "v", "lambda", "m", "d", "j"}, "params");
  auto get = [&](const char* k, double& slot) {
    if (j.contains(k)) {
      if (!j.at(k).is_number())
        throw ConfigError(std::string("request: params.") + k +
                          " must be a number");
      slot = j.at(k).get<double>();
    }
  };
  get("M", p.M);
  get("r", p.r);
  get("a", p.a);
  get("v", p.v);
  get("lambda", p.lambda);
  get("m", p.m);
  get("d", p.d);
  get("j", p.j);
  return p;
}

int get_int(const json& req, const char* key, int fallback, int lo, int hi) {
  int v = fallback;
  if (req.contains(key)) {
    if (!req.at(key).is_number_integer())
      throw ConfigError(std::string("request: ") + key +
                        " must be an integer");
    v = req.at(key).get<int>();
  }
  if (v < lo || v > hi)
    throw ConfigError(std::string("request: ") + key + " out of range [" +
                      std::to_string(lo) + "," + std::to_string(hi) + "]");
  return v;
}

std::string get_string(const json& req, const char* key) {
  if (!req.contains(key) || !req.at(key).is_string())
    throw ConfigError(std::string("request: missing string key '") + key +
                      "'");
  return req.at(key).get<std::string>();
}

void add_artifact(qlm_result* res, std::string name, std::string text) {
  res->artifacts.emplace_back(std::move(name), std::move(text));
}

// ---- command implementations ---------------------------------------------

void cmd_catalog_list(const json& req, qlm_result* res) {
  check_keys(req, {"command"}, "request");
  add_artifact(res, "index.json", catalog_index_json());
}

void cmd_catalog_dump(const json& req, qlm_result* res) {
  check_keys(req, {"command", "case", "params", "L", "n_r", "dir"}, "request");
  const auto name = get_string(req, "case");
  const int L = get_int(req, "L", 8, 4, 64);
  const int n_r = get_int(req, "n_r", L + 2, 4, 128);
  const auto dir = get_string(req, "dir");
  dump_catalog_entry(name, parse_params(req), dir, L, n_r);
  json j;
  j["written"] = dir;
  j["case"] = name;
  add_artifact(res, "report.json", j.dump(2));
}

struct WyOutcome {
  MassReport report;
  bool admissible = true;
};

WyOutcome run_wang_yau(const std::string& name, const CatalogParams& p, int L,
                       int n_r) {
  auto B = make_ball(L, n_r);
  if (is_boundary_case(name)) {
    auto c = get_boundary_dataset(name, p, B->sphere);
    if (name == "schwarzschild_round") {
      // time-symmetric data: the reduction is boundary-only
      auto emb = embed_weyl_metric(c.data.sigma);
      WyOutcome out{wang_yau_reduced(time_symmetric_package(c.data), emb)};
      return out;
    }
    auto sol = solve_jang(c.slice_data(B), c.tau_suggested);
    if (sol.blew_up)
      throw AdmissibilityError(
          "wang_yau: height solve blew up (max gradient " +
          std::to_string(sol.obstruction.max_gradient) + " at node " +
          std::to_string(sol.obstruction.locus_node) + ")");
    const auto& pkg = sol.sol.boundary;
    auto bundle = build_bundle(pkg.sigma, c.tau_suggested);
    auto emb = embed_weyl(bundle);
    WyOutcome out{wang_yau_reduced(pkg, emb, &c.data, &c.tau_suggested)};
    out.report.admissibility =
        admissibility_report(bundle, true, pkg.h_physical);
    out.admissible = out.report.admissibility.admissible;
    return out;
  }
  auto d = get_ball_dataset(name, p, B);
  auto cr = constraint_report(d);
  if (!cr.dominant_energy_ok)
    throw AdmissibilityError(
        "wang_yau: dominant energy condition violated (min(mu - |J|) = " +
        std::to_string(cr.dec_min) + ")");
  SphereField tau(B->sphere, 0, "tau");
  tau[0].assign(B->sphere->nodes(), 0.0);
  auto sol = solve_jang(d, tau);
  if (sol.blew_up)
    throw AdmissibilityError(
        "wang_yau: height solve blew up (max gradient " +
        std::to_string(sol.obstruction.max_gradient) + ")");
  auto emb = embed_weyl_metric(sol.sol.boundary.sigma_hat);
  WyOutcome out{wang_yau_reduced(sol.sol.boundary, emb)};
  return out;
}

void cmd_mass(const json& req, qlm_result* res) {
  check_keys(req, {"command", "functional", "case", "params", "L", "n_r"},
             "request");
  const auto functional = get_string(req, "functional");
  const auto name = get_string(req, "case");
  const int L = get_int(req, "L", 16, 4, 48);
  const int n_r = get_int(req, "n_r", L + 2, 4, 128);
  const auto p = parse_params(req);

  MassReport r;
  bool admissible = true;
  if (functional == "by" || functional == "ly") {
    if (!is_boundary_case(name))
      throw ConfigError("mass " + functional +
                        ": requires a boundary catalog case");
    auto c = get_boundary_dataset(name, p, make_grid(L));
    auto emb = embed_weyl_metric(c.data.sigma);
    auto mu = area_density(c.data.sigma);
    r = (functional == "by") ? brown_york(emb.k0, c.data.k_physical, mu)
                             : liu_yau(emb.k0, c.data.H_norm, mu);
  } else if (functional == "wy") {
    auto out = run_wang_yau(name, p, L, n_r);
    r = out.report;
    admissible = out.admissible;
  } else {
    throw ConfigError("mass: functional must be by, ly or wy");
  }
  add_artifact(res, "report.json", mass_report_json(r));
  std::optional<double> by, ly, wy;
  (functional == "by" ? by : functional == "ly" ? ly : wy) = r.value;
  add_artifact(res, "row.csv",
               mass_csv_row(name, L, by, ly, wy, admissible) + "\n");
}

void cmd_embed(const json& req, qlm_result* res) {
  check_keys(req, {"command", "case", "params", "L"}, "request");
  const auto name = get_string(req, "case");
  const int L = get_int(req, "L", 16, 4, 48);
  if (!is_boundary_case(name))
    throw ConfigError("embed: requires a boundary catalog case");
  auto c = get_boundary_dataset(name, parse_params(req), make_grid(L));
  auto emb = embed_weyl_metric(c.data.sigma);
  json j;
  j["case"] = name;
  j["L"] = L;
  j["defect_norm"] = emb.defect_norm;
  j["iterations"] = emb.iterations;
  double min_k0 = emb.k0[0][0];
  for (double v : emb.k0[0]) min_k0 = std::min(min_k0, v);
  j["min_k0"] = min_k0;
  add_artifact(res, "report.json", j.dump(2));
  std::ostringstream hist;
  hist << "iter,defect_norm,step_size\n";
  hist.precision(15);
  for (size_t i = 0; i < emb.defect_history.size(); ++i)
    hist << i << "," << emb.defect_history[i] << ","
         << (i < emb.step_history.size() ? emb.step_history[i] : 0.0) << "\n";
  add_artifact(res, "history.csv", hist.str());
}

void cmd_jang(const json& req, qlm_result* res) {
  check_keys(req, {"command", "case", "params", "L", "n_r"}, "request");
  const auto name = get_string(req, "case");
  const int L = get_int(req, "L", 12, 4, 48);
  const int n_r = get_int(req, "n_r", L + 2, 4, 128);
  const auto p = parse_params(req);
  auto B = make_ball(L, n_r);

  BallDataSet data;
  SphereField tau(B->sphere, 0, "tau");
  tau[0].assign(B->sphere->nodes(), 0.0);
  if (is_boundary_case(name)) {
    auto c = get_boundary_dataset(name, p, B->sphere);
    if (!c.slice_data)
      throw ConfigError("jang: case '" + name + "' carries no slice data");
    data = c.slice_data(B);
    tau = c.tau_suggested;
  } else {
    data = get_ball_dataset(name, p, B);
  }
  auto out = solve_jang(data, tau);
  if (out.blew_up)
    throw AdmissibilityError("jang: blow-up detected (max gradient " +
                             std::to_string(out.obstruction.max_gradient) +
                             " at node " +
                             std::to_string(out.obstruction.locus_node) + ")");
  json j;
  j["case"] = name;
  j["L"] = L;
  j["n_r"] = n_r;
  j["residual_max"] = out.sol.residual_max;
  j["newton_iterations"] = out.sol.newton_iterations;
  auto rep = x_field_and_energy_report(out.sol, data);
  j["min_curvature_condition"] = rep.min_curvature_condition;
  j["min_mean_condition"] = rep.min_mean_condition;
  j["dominant_energy_ok"] = rep.dominant_energy_ok;
  add_artifact(res, "report.json", j.dump(2));
  std::ostringstream hist;
  hist << "iter,residual,damping\n";
  hist.precision(15);
  for (size_t i = 0; i < out.sol.residual_history.size(); ++i)
    hist << i << "," << out.sol.residual_history[i] << ","
         << (i < out.sol.damping_history.size() ? out.sol.damping_history[i]
                                                : 1.0)
         << "\n";
  add_artifact(res, "history.csv", hist.str());
}

void cmd_dirac_spectrum(const json& req, qlm_result* res) {
  check_keys(req, {"command", "u", "L"}, "request");
  const int L = get_int(req, "L", 8, 1, 32);
  double uval = 0.0;
  if (req.contains("u")) {
    if (!req.at("u").is_number())
      throw ConfigError("request: u must be a number");
    uval = req.at("u").get<double>();
  }
  auto g = make_grid(L);
  SphereField u(g, 0, "u");
  u[0].assign(g->nodes(), uval);
  auto op = boundary_dirac(u, L);
  auto sp = spectrum_and_projections(op);
  add_artifact(res, "spectrum.csv", spectrum_csv(sp));
  json j;
  j["L"] = L;
  j["u"] = uval;
  j["self_adjoint_residual"] = op.self_adjoint_residual;
  j["gram_residual"] = sp.gram_residual;
  j["symmetry_residual"] = sp.symmetry_residual;
  add_artifact(res, "report.json", j.dump(2));
}

BoundarySpinor random_alpha(const GridPtr& g, int band, unsigned seed) {
  BoundarySpinor alpha(g, band);
  std::mt19937 rng(seed);
  std::normal_distribution<double> N01;
  for (int s = 0; s < 2; ++s)
    for (auto& v : alpha.comp[s]) v = Cplx(N01(rng), N01(rng));
  return alpha;
}

void cmd_dirac_solve(const json& req, qlm_result* res) {
  check_keys(req, {"command", "bc", "L", "seed"}, "request");
  const auto bc = get_string(req, "bc");
  if (bc != "mit" && bc != "aps")
    throw ConfigError("dirac solve: bc must be mit or aps");
  const int L = get_int(req, "L", 8, 1, 16);
  const int seed = get_int(req, "seed", 1, 0, 1 << 30);
  auto alpha = random_alpha(make_grid(L), L, (unsigned)seed);
  auto sol = flat_ball_solve(alpha, bc == "mit" ? BallBC::MIT : BallBC::APS);
  json j;
  j["bc"] = bc;
  j["L"] = L;
  j["seed"] = seed;
  j["condition_number"] = sol.condition_number;
  j["match_residual"] = sol.match_residual;
  j["modes"] = (int)sol.psi.basis->modes.size();
  add_artifact(res, "report.json", j.dump(2));
}

void cmd_dirac_verify(const json& req, qlm_result* res) {
  check_keys(req, {"command", "L", "seed"}, "request");
  const int L = get_int(req, "L", 8, 2, 16);
  const int seed = get_int(req, "seed", 1, 0, 1 << 30);
  auto g = make_grid(L);
  SphereField u(g, 0, "u");
  u[0].assign(g->nodes(), 0.0);
  auto op = boundary_dirac(u, L);
  auto sp = spectrum_and_projections(op);
  const int deg = std::min(L, 6);
  auto alpha = random_alpha(g, deg, (unsigned)seed);
  auto sol = flat_ball_solve(alpha, BallBC::MIT);
  auto spin = verify_spin_inequalities(sol.psi, op, sp);
  auto lich = verify_lichnerowicz(sol.psi);
  auto hyp = verify_hypersurface_identity(sol.psi);
  json j = json::parse(spin_report_json(spin));
  j["L"] = L;
  j["seed"] = seed;
  j["lichnerowicz_residual"] = lich.residual;
  j["hypersurface_residual"] = hyp.max_residual;
  add_artifact(res, "report.json", j.dump(2));
}

void cmd_verify(const json& req, qlm_result* res) {
  check_keys(req, {"command", "suite", "L", "seed"}, "request");
  const auto suite =
      req.contains("suite") ? get_string(req, "suite") : std::string("all");
  const int L = get_int(req, "L", 16, 4, 48);
  const int seed = get_int(req, "seed", 1, 0, 1 << 30);
  auto rep = verify_identities(suite, L, (unsigned)seed);
  add_artifact(res, "report.json", identity_report_json(rep));
}

void dispatch(const json& req, qlm_result* res) {
  if (!req.is_object()) throw ConfigError("request must be a JSON object");
  const auto cmd = get_string(req, "command");
  if (cmd == "catalog_list")
    cmd_catalog_list(req, res);
  else if (cmd == "catalog_dump")
    cmd_catalog_dump(req, res);
  else if (cmd == "mass")
    cmd_mass(req, res);
  else if (cmd == "embed")
    cmd_embed(req, res);
  else if (cmd == "jang")
    cmd_jang(req, res);
  else if (cmd == "dirac_spectrum")
    cmd_dirac_spectrum(req, res);
  else if (cmd == "dirac_solve")
    cmd_dirac_solve(req, res);
  else if (cmd == "dirac_verify")
    cmd_dirac_verify(req, res);
  else if (cmd == "verify")
    cmd_verify(req, res);
  else
    throw ConfigError("request: unknown command '" + cmd + "'");
}

}  // namespace

extern "C" {

qlm_ctx* qlm_ctx_new(void) { return new qlm_ctx(); }
void qlm_ctx_free(qlm_ctx* ctx) { delete ctx; }

const char* qlm_error_message(const qlm_ctx* ctx) {
  return ctx ? ctx->error.c_str() : "";
}

int qlm_run(qlm_ctx* ctx, const char* request_json, qlm_result** out) {
  if (!ctx || !request_json || !out) return QLM_E_CONFIG;
  *out = nullptr;
  ctx->error.clear();
  auto res = std::make_unique<qlm_result>();
  try {
    json req = json::parse(request_json, nullptr, false);
    if (req.is_discarded()) throw ConfigError("request: malformed JSON");
    dispatch(req, res.get());
  } catch (const ConfigError& e) {
    ctx->error = e.what();
    return QLM_E_CONFIG;
  } catch (const DimensionError& e) {
    ctx->error = e.what();
    return QLM_E_DIMENSION;
  } catch (const GeometryError& e) {
    ctx->error = e.what();
    return QLM_E_GEOMETRY;
  } catch (const ConvergenceError& e) {
    ctx->error = e.what();
    return QLM_E_CONVERGENCE;
  } catch (const AdmissibilityError& e) {
    ctx->error = e.what();
    return QLM_E_ADMISSIBILITY;
  } catch (const std::exception& e) {
    ctx->error = e.what();
    return QLM_E_CONFIG;
  }
  *out = res.release();
  return QLM_OK;
}

int qlm_result_count(const qlm_result* res) {
  return res ? (int)res->artifacts.size() : 0;
}

const char* qlm_result_name(const qlm_result* res, int i) {
  if (!res || i < 0 || i >= (int)res->artifacts.size()) return nullptr;
  return res->artifacts[i].first.c_str();
}

const char* qlm_result_text(const qlm_result* res, int i) {
  if (!res || i < 0 || i >= (int)res->artifacts.size()) return nullptr;
  return res->artifacts[i].second.c_str();
}

void qlm_result_free(qlm_result* res) { delete res; }

const char* qlm_version(void) { return "1.0.0"; }

}  // extern "C"
