#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "qlm/catalog.hpp"
#include "qlm/embedding.hpp"
#include "qlm/jang.hpp"

using namespace qlm;

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace

TEST_CASE("index lists every entry with its kind") {
  auto idx = catalog_index();
  REQUIRE(idx.size() == 8);
  int nb = 0, nv = 0;
  for (const auto& e : idx) {
    if (e.kind == "boundary") ++nb;
    if (e.kind == "ball") ++nv;
  }
  CHECK(nb == 4);
  CHECK(nv == 4);
  auto j = nlohmann::json::parse(catalog_index_json());
  REQUIRE(j.is_array());
  CHECK(j.size() == 8);
  CHECK(j[0]["name"] == "minkowski_round");
}

TEST_CASE("unknown names are rejected") {
  CatalogParams p;
  CHECK_THROWS_AS(get_boundary_dataset("nope", p, make_grid(4)), ConfigError);
  CHECK_THROWS_AS(get_ball_dataset("nope", p, make_ball(4, 6)), ConfigError);
  CHECK_THROWS_AS(dump_catalog_entry("nope", p, "/tmp/qlm_cat_x", 4, 6),
                  ConfigError);
}

TEST_CASE("schwarzschild sphere: closed forms and the horizon gate") {
  CatalogParams p;
  p.M = 1.0;
  p.r = 4.0;
  auto g = make_grid(8);
  auto c = get_boundary_dataset("schwarzschild_round", p, g);
  const double k = 0.5 * std::sqrt(0.5);  // (2/r) sqrt(1 - 2M/r)
  for (double v : c.data.H_norm[0]) CHECK(v == doctest::Approx(k).epsilon(1e-14));
  for (double v : c.data.k_physical[0])
    CHECK(v == doctest::Approx(k).epsilon(1e-14));
  CHECK(max_abs(c.data.alpha_H[0]) == 0.0);
  CHECK(max_abs(c.data.alpha_H[1]) == 0.0);
  REQUIRE(c.oracle_M_BY.has_value());
  CHECK(*c.oracle_M_BY ==
        doctest::Approx(4.0 - 2.0 * std::sqrt(2.0)).epsilon(1e-14));
  CHECK(*c.oracle_M_LY == *c.oracle_M_BY);
  CHECK(*c.oracle_M_WY == *c.oracle_M_BY);

  p.r = 2.0;  // horizon radius: no admissible outer sphere
  CHECK_THROWS_AS(get_boundary_dataset("schwarzschild_round", p, g),
                  ConfigError);
}

TEST_CASE("minkowski spheres: shadow metric is exactly round") {
  CatalogParams p;
  auto g = make_grid(16);
  for (const char* name :
       {"minkowski_round", "minkowski_graph", "minkowski_boosted"}) {
    CAPTURE(name);
    auto c = get_boundary_dataset(name, p, g);
    auto b = build_bundle(c.data.sigma, c.tau_suggested);
    double e = 0;
    for (int i = 0; i < g->n_theta; ++i)
      for (int j = 0; j < g->n_phi; ++j) {
        int k = i * g->n_phi + j;
        double st = std::sin(g->theta[i]);
        e = std::max(e, std::abs(b.sigma_hat[0][k] - p.r * p.r));
        e = std::max(e, std::abs(b.sigma_hat[1][k]));
        e = std::max(e, std::abs(b.sigma_hat[2][k] - p.r * p.r * st * st));
      }
    CHECK(e <= 1e-11);
  }
}

TEST_CASE("minkowski spheres: rigidity oracles and the positive boosted LY") {
  CatalogParams p;
  auto g = make_grid(16);
  for (const char* name : {"minkowski_round", "minkowski_graph"}) {
    auto c = get_boundary_dataset(name, p, g);
    CHECK(*c.oracle_M_BY == 0.0);
    CHECK(*c.oracle_M_LY == 0.0);
    CHECK(*c.oracle_M_WY == 0.0);
  }
  auto c = get_boundary_dataset("minkowski_boosted", p, g);
  CHECK(*c.oracle_M_BY == 0.0);
  CHECK(*c.oracle_M_WY == 0.0);
  // frozen quadrature value; stable to ~1e-13 between L=12 and L=24
  CHECK(*c.oracle_M_LY == doctest::Approx(0.0075819033233853).epsilon(1e-10));
  CHECK(*c.oracle_M_LY > 0.0);
}

TEST_CASE("minkowski spheres: reference curvature oracle matches the "
          "embedding of sigma") {
  CatalogParams p;
  auto g = make_grid(16);
  for (const char* name : {"minkowski_graph", "minkowski_boosted"}) {
    CAPTURE(name);
    auto c = get_boundary_dataset(name, p, g);
    REQUIRE(c.oracle_k0.has_value());
    auto emb = embed_weyl_metric(c.data.sigma);
    CHECK(emb.defect_norm <= 1e-9);
    CHECK(max_diff(emb.k0[0], (*c.oracle_k0)[0]) <= 1e-8);
  }
}

TEST_CASE("non-spacelike tilt is rejected") {
  CatalogParams p;
  p.a = 1.2;
  CHECK_THROWS_AS(get_boundary_dataset("minkowski_graph", p, make_grid(8)),
                  GeometryError);
}

TEST_CASE("slice companions satisfy the vacuum constraints") {
  CatalogParams p;
  auto g = make_grid(16);
  auto B = make_ball(16, 18);

  for (const char* name : {"minkowski_round", "minkowski_graph"}) {
    CAPTURE(name);
    auto d = get_boundary_dataset(name, p, g).slice_data(B);
    auto cr = constraint_report(d);
    CHECK(cr.hamiltonian_max == 0.0);
    CHECK(cr.momentum_max == 0.0);
    CHECK(cr.dominant_energy_ok);
  }
  // quadratic tilt: momentum residual is pure angular truncation
  {
    CatalogParams q;
    q.v = 0.4;
    auto d = get_boundary_dataset("minkowski_boosted", q, g).slice_data(B);
    auto cr = constraint_report(d);
    CHECK(cr.hamiltonian_max == 0.0);
    CHECK(cr.momentum_max <= 1e-9);
  }
  {
    auto d = get_boundary_dataset("minkowski_boosted", p, g).slice_data(B);
    auto cr = constraint_report(d);
    CHECK(cr.hamiltonian_max == 0.0);
    CHECK(cr.momentum_max <= 1e-7);
    CHECK(cr.dominant_energy_ok);
  }
}

TEST_CASE("exact heights annihilate the graph equation") {
  CatalogParams p;
  auto g = make_grid(16);
  auto B = make_ball(16, 18);
  for (const char* name :
       {"minkowski_round", "minkowski_graph", "minkowski_boosted"}) {
    CAPTURE(name);
    auto c = get_boundary_dataset(name, p, g);
    auto d = c.slice_data(B);
    auto f = c.exact_height(B);
    CHECK(max_abs(jang_residual(d, f)) <= 1e-8);
    // boundary trace of the height is the suggested Dirichlet datum
    auto tr = B->trace(f);
    CHECK(max_diff(tr[0], c.tau_suggested[0]) <= 1e-13);
  }
}

TEST_CASE("height solve reproduces the exact graph and the in-slice mean "
          "curvature oracle") {
  CatalogParams p;
  auto g = make_grid(12);
  auto B = make_ball(12, 14);
  auto c = get_boundary_dataset("minkowski_graph", p, g);
  auto d = c.slice_data(B);
  auto out = solve_jang(d, c.tau_suggested);
  REQUIRE(!out.blew_up);
  CHECK(max_diff(out.sol.f, c.exact_height(B)) <= 1e-8);
  const auto& pkg = out.sol.boundary;
  // independently generated boundary fields close the loop
  CHECK(max_diff(pkg.k_sigma[0], c.data.k_physical[0]) <= 1e-7);
  for (int comp = 0; comp < 3; ++comp)
    CHECK(max_diff(pkg.sigma[comp], c.data.sigma[comp]) <= 1e-10);
}

TEST_CASE("flat ball and its lambda g perturbation close the constraints") {
  CatalogParams p;
  auto B = make_ball(16, 18);
  {
    auto d = get_ball_dataset("flat", p, B);
    auto cr = constraint_report(d);
    CHECK(cr.hamiltonian_max == 0.0);
    CHECK(cr.momentum_max == 0.0);
    CHECK(cr.dominant_energy_ok);
  }
  {
    auto d = get_ball_dataset("flat_with_P", p, B);
    for (double v : d.mu)
      CHECK(v == doctest::Approx(3 * p.lambda * p.lambda).epsilon(1e-14));
    auto cr = constraint_report(d);
    CHECK(cr.hamiltonian_max <= 1e-12);
    CHECK(cr.momentum_max <= 1e-9);
    CHECK(cr.dec_min == doctest::Approx(3 * p.lambda * p.lambda).epsilon(1e-12));
  }
}

TEST_CASE("conformally flat ball: nonnegative sources, closed constraints") {
  CatalogParams p;
  auto B = make_ball(16, 18);
  auto d = get_ball_dataset("conformally_flat", p, B);
  for (double v : d.mu) CHECK(v >= 0.0);
  CHECK(max_abs(d.J[0]) == 0.0);
  auto cr = constraint_report(d);
  CHECK(cr.hamiltonian_max <= 1e-8);
  CHECK(cr.momentum_max == 0.0);
  CHECK(cr.dominant_energy_ok);
}

TEST_CASE("bad_energy violates dominant energy and says so") {
  CatalogParams p;
  auto B = make_ball(8, 10);
  auto d = get_ball_dataset("bad_energy", p, B);
  auto cr = constraint_report(d);
  CHECK(!cr.dominant_energy_ok);
  CHECK(cr.dec_min == doctest::Approx(-p.j).epsilon(1e-12));
}

TEST_CASE("dump writes per-field files for both kinds") {
  CatalogParams p;
  namespace fs = std::filesystem;
  const std::string dir = "/tmp/qlm_cat_dump";
  fs::remove_all(dir);
  dump_catalog_entry("minkowski_graph", p, dir, 6, 8);
  CHECK(fs::exists(dir + "/sigma.csv"));
  CHECK(fs::exists(dir + "/H_norm.csv"));
  CHECK(fs::exists(dir + "/tau.csv"));
  fs::remove_all(dir);
  dump_catalog_entry("flat_with_P", p, dir, 6, 8);
  CHECK(fs::exists(dir + "/ball.csv"));
  std::ifstream is(dir + "/ball.csv");
  std::string header;
  std::getline(is, header);
  CHECK(header.substr(0, 11) == "r,theta,phi");
  fs::remove_all(dir);
}
