#pragma once
#include <functional>
#include <optional>

#include "qlm/ball.hpp"
#include "qlm/mass.hpp"

namespace qlm {

// Analytic test geometries with closed-form oracles.  Boundary entries feed
// the mass functionals; ball entries feed the height-function and spinor
// pipelines.  All generators are stateless and deterministic.

struct CatalogParams {
  double M = 1.0;     // Schwarzschild mass
  double r = 1.0;     // areal / coordinate radius of the boundary sphere
  double a = 0.3;     // tilt of the graph sphere
  double v = 0.5;     // boost-profile strength
  double lambda = 0.05;  // P = lambda g strength
  double m = 0.1;     // conformal mass parameter
  double d = 1.0;     // conformal regulator
  double j = 0.1;     // deliberate momentum excess for bad_energy
};

struct BoundaryCase {
  WangYauBoundaryData data;
  SphereField tau_suggested;
  std::optional<double> oracle_M_BY, oracle_M_LY, oracle_M_WY;
  // Closed-form reference mean curvature of the shadow's embedding (surface
  // of revolution), where available; used as an embedding-free oracle.
  std::optional<SphereField> oracle_k0;
  // For surfaces bounding an explicit slice: the slice initial data on a
  // requested ball grid, plus the exact height function it induces.
  std::function<BallDataSet(const BallPtr&)> slice_data;
  std::function<std::vector<double>(const BallPtr&)> exact_height;
};

// names: minkowski_round, minkowski_graph, minkowski_boosted,
//        schwarzschild_round (requires r > 2M)
BoundaryCase get_boundary_dataset(const std::string& name,
                                  const CatalogParams& p, const GridPtr& grid);

// names: flat, flat_with_P, conformally_flat, bad_energy
BallDataSet get_ball_dataset(const std::string& name, const CatalogParams& p,
                             const BallPtr& grid);

struct CatalogEntryInfo {
  std::string name;
  std::string kind;    // "boundary" | "ball"
  std::string params;  // human-readable parameter list
};
std::vector<CatalogEntryInfo> catalog_index();
std::string catalog_index_json();

// field CSVs for `catalog dump <name>` under dir/
void dump_catalog_entry(const std::string& name, const CatalogParams& p,
                        const std::string& dir, int L, int n_r);

}  // namespace qlm
