// Batch front-end for the quasi-local mass pipeline.  Builds a JSON request
// from flags, optionally overlays a JSON config file (config values win over
// flags, flags win over defaults), submits it through the C API, writes the
// returned artifacts and prints the primary report to stdout.
//
// Exit codes: 0 success, 2 invalid request/config, 3 convergence or identity
// failure, 4 geometry/admissibility failure.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qlm.h"

using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::string out_dir;
  bool plot = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path,
                  "JSON config file; its values override flags");
  cmd->add_option("--out", c.out_dir,
                  "artifact directory (default: $QLM_OUT_DIR or none)");
  cmd->add_flag("--plot", c.plot, "emit SVG plots for CSV artifacts");
}

// minimal SVG polyline of the second column of a CSV (log10 when positive)
std::string csv_to_svg(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);  // header
  std::vector<double> ys;
  while (std::getline(is, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    if (a == std::string::npos) continue;
    ys.push_back(std::stod(line.substr(a + 1, b - a - 1)));
  }
  const double W = 480, H = 300, m = 40;
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W
     << "' height='" << H << "'>\n<rect width='100%' height='100%' "
     << "fill='white'/>\n<polyline fill='none' stroke='black' points='";
  if (!ys.empty()) {
    double lo = ys[0], hi = ys[0];
    for (double y : ys) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    if (hi == lo) hi = lo + 1;
    for (size_t i = 0; i < ys.size(); ++i) {
      const double x = m + (W - 2 * m) * (ys.size() == 1 ? 0.5 : double(i) / (ys.size() - 1));
      const double y = H - m - (H - 2 * m) * (ys[i] - lo) / (hi - lo);
      os << x << "," << y << " ";
    }
  }
  os << "'/>\n</svg>\n";
  return os.str();
}

int run_request(json req, const Common& c) {
  if (!c.config_path.empty()) {
    std::ifstream f(c.config_path);
    if (!f) {
      std::cerr << "error: cannot open config file " << c.config_path << "\n";
      return 2;
    }
    json cfg = json::parse(f, nullptr, false);
    if (cfg.is_discarded() || !cfg.is_object()) {
      std::cerr << "error: config file is not a JSON object\n";
      return 2;
    }
    for (auto& [k, v] : cfg.items()) {
      if (k == "params" && req.contains("params") && v.is_object()) {
        for (auto& [pk, pv] : v.items()) req["params"][pk] = pv;
      } else {
        req[k] = v;
      }
    }
  }

  qlm_ctx* ctx = qlm_ctx_new();
  qlm_result* res = nullptr;
  const int status = qlm_run(ctx, req.dump().c_str(), &res);
  if (status != QLM_OK) {
    std::cerr << "error: " << qlm_error_message(ctx) << "\n";
    qlm_ctx_free(ctx);
    switch (status) {
      case QLM_E_CONFIG:
      case QLM_E_DIMENSION:
        return 2;
      case QLM_E_CONVERGENCE:
        return 3;
      default:
        return 4;  // geometry / admissibility
    }
  }

  std::string out_dir = c.out_dir;
  if (out_dir.empty())
    if (const char* env = std::getenv("QLM_OUT_DIR")) out_dir = env;

  int exit_code = 0;
  for (int i = 0; i < qlm_result_count(res); ++i) {
    const std::string name = qlm_result_name(res, i);
    const std::string text = qlm_result_text(res, i);
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      std::ofstream(out_dir + "/" + name) << text;
      if (c.plot && name.size() > 4 &&
          name.substr(name.size() - 4) == ".csv")
        std::ofstream(out_dir + "/" + name.substr(0, name.size() - 4) +
                      ".svg")
            << csv_to_svg(text);
    }
    if (i == 0) std::cout << text << (text.ends_with("\n") ? "" : "\n");
    // identity suites report pass/fail through the exit code
    if (name == "report.json" && req.value("command", "") == "verify") {
      auto j = json::parse(text);
      if (!j.value("all_pass", true)) exit_code = 3;
    }
  }
  qlm_result_free(res);
  qlm_ctx_free(ctx);
  return exit_code;
}

void add_params(CLI::App* cmd, json& req) {
  static const char* keys[] = {"M", "r", "a", "v", "lambda", "m", "d", "j"};
  for (const char* k : keys) {
    cmd->add_option_function<double>(
        std::string("--") + k,
        [&req, k](double val) { req["params"][k] = val; },
        std::string("catalog parameter ") + k);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quasi-local mass pipeline"};
  app.require_subcommand(1);
  static int rc = -1;
  static Common common;

  // mass {by|ly|wy}
  auto* mass = app.add_subcommand("mass", "quasi-local mass functionals");
  mass->require_subcommand(1);
  static json mass_req;
  for (const char* f : {"by", "ly", "wy"}) {
    auto* sub = mass->add_subcommand(f, std::string("compute M_") + f);
    mass_req = json{{"command", "mass"}};
    sub->add_option_function<std::string>(
        "--case", [](const std::string& v) { mass_req["case"] = v; },
        "catalog case name")->required();
    sub->add_option_function<int>(
        "--L", [](int v) { mass_req["L"] = v; }, "band limit");
    sub->add_option_function<int>(
        "--n_r", [](int v) { mass_req["n_r"] = v; }, "radial resolution");
    add_params(sub, mass_req);
    add_common(sub, common);
    sub->callback([f] {
      mass_req["functional"] = f;
      rc = run_request(mass_req, common);
    });
  }

  // embed
  auto* embed = app.add_subcommand("embed", "isometric embedding of sigma");
  static json embed_req{{"command", "embed"}};
  embed->add_option_function<std::string>(
      "--case", [](const std::string& v) { embed_req["case"] = v; },
      "catalog case name")->required();
  embed->add_option_function<int>(
      "--L", [](int v) { embed_req["L"] = v; }, "band limit");
  add_params(embed, embed_req);
  add_common(embed, common);
  embed->callback([] { rc = run_request(embed_req, common); });

  // jang
  auto* jang = app.add_subcommand("jang", "height-function solve");
  static json jang_req{{"command", "jang"}};
  jang->add_option_function<std::string>(
      "--case", [](const std::string& v) { jang_req["case"] = v; },
      "catalog case name")->required();
  jang->add_option_function<int>(
      "--L", [](int v) { jang_req["L"] = v; }, "band limit");
  jang->add_option_function<int>(
      "--n_r", [](int v) { jang_req["n_r"] = v; }, "radial resolution");
  add_params(jang, jang_req);
  add_common(jang, common);
  jang->callback([] { rc = run_request(jang_req, common); });

  // dirac {spectrum|solve|verify}
  auto* dirac = app.add_subcommand("dirac", "boundary spinor analysis");
  dirac->require_subcommand(1);
  {
    auto* sub = dirac->add_subcommand("spectrum", "boundary operator spectrum");
    static json req{{"command", "dirac_spectrum"}};
    sub->add_option_function<double>(
        "--u", [](double v) { req["u"] = v; }, "constant conformal factor");
    sub->add_option_function<int>(
        "--L", [](int v) { req["L"] = v; }, "band limit");
    add_common(sub, common);
    sub->callback([] { rc = run_request(req, common); });
  }
  {
    auto* sub = dirac->add_subcommand("solve", "flat-ball boundary value solve");
    static json req{{"command", "dirac_solve"}};
    sub->add_option_function<std::string>(
        "--bc", [](const std::string& v) { req["bc"] = v; },
        "boundary condition: mit | aps")->required();
    sub->add_option_function<int>(
        "--L", [](int v) { req["L"] = v; }, "band limit");
    sub->add_option_function<int>(
        "--seed", [](int v) { req["seed"] = v; }, "boundary data seed");
    add_common(sub, common);
    sub->callback([] { rc = run_request(req, common); });
  }
  {
    auto* sub = dirac->add_subcommand("verify", "spinor identity checks");
    static json req{{"command", "dirac_verify"}};
    sub->add_option_function<int>(
        "--L", [](int v) { req["L"] = v; }, "band limit");
    sub->add_option_function<int>(
        "--seed", [](int v) { req["seed"] = v; }, "boundary data seed");
    add_common(sub, common);
    sub->callback([] { rc = run_request(req, common); });
  }

  // catalog {list|dump}
  auto* cat = app.add_subcommand("catalog", "analytic test geometries");
  cat->require_subcommand(1);
  {
    auto* sub = cat->add_subcommand("list", "list catalog entries");
    static json req{{"command", "catalog_list"}};
    add_common(sub, common);
    sub->callback([] { rc = run_request(req, common); });
  }
  {
    auto* sub = cat->add_subcommand("dump", "write per-field CSVs");
    static json req{{"command", "catalog_dump"}};
    sub->add_option_function<std::string>(
        "--case", [](const std::string& v) { req["case"] = v; },
        "catalog case name")->required();
    sub->add_option_function<std::string>(
        "--dir", [](const std::string& v) { req["dir"] = v; },
        "destination directory")->required();
    sub->add_option_function<int>(
        "--L", [](int v) { req["L"] = v; }, "band limit");
    sub->add_option_function<int>(
        "--n_r", [](int v) { req["n_r"] = v; }, "radial resolution");
    add_params(sub, req);
    add_common(sub, common);
    sub->callback([] { rc = run_request(req, common); });
  }

  // verify identities
  auto* verify = app.add_subcommand("verify", "cross-module identity suite");
  verify->require_subcommand(1);
  {
    auto* sub = verify->add_subcommand("identities", "run identity checks");
    static json req{{"command", "verify"}};
    sub->add_option_function<std::string>(
        "--suite", [](const std::string& v) { req["suite"] = v; },
        "suite name or 'all'");
    sub->add_option_function<int>(
        "--L", [](int v) { req["L"] = v; }, "band limit");
    sub->add_option_function<int>(
        "--seed", [](int v) { req["seed"] = v; }, "randomization seed");
    add_common(sub, common);
    sub->callback([] { rc = run_request(req, common); });
  }

  CLI11_PARSE(app, argc, argv);
  return rc < 0 ? 2 : rc;
}
