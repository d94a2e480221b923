#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "bimc/config.hpp"
#include "bimc/harness.hpp"
#include "bimc/report.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bimc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("bimc_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BIMC_CLI_PATH) + " " + args + " > /dev/null 2> " +
                          (scratch_dir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_error_field(const json& j) {
  try {
    parse_run_config(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("configuration round trips through JSON for every catalog default") {
  for (const auto& name : catalog_names()) {
    const RunConfig cfg = default_config(name);
    CHECK(parse_run_config(to_json(cfg)) == cfg);
    CHECK(parse_run_config(json::parse(to_json(cfg).dump())) == cfg);
  }
}

TEST_CASE("mixture, dense and diagonal covariances round trip") {
  json j = to_json(default_config("affine"));
  j["nominal"] = json::parse(R"({"mixture": {"components": [
      {"weight": 0.25, "mean": [1, 1], "cov": {"dense": [[0.1, 0.02], [0.02, 0.1]]}},
      {"weight": 0.75, "mean": [1.1], "cov": {"diagonal": [0.1, 0.2]}}]}})");
  j["overrides"] = {{"y", 1.3}, {"sigma_sq", 1e-3}};
  const RunConfig cfg = parse_run_config(j);
  CHECK(cfg.nominal.mixture);
  REQUIRE(cfg.nominal.components.size() == 2);
  CHECK(cfg.nominal.components[0].cov.kind == CovarianceSpec::Kind::Dense);
  CHECK(cfg.nominal.components[1].cov.kind == CovarianceSpec::Kind::Diagonal);
  CHECK(parse_run_config(to_json(cfg)) == cfg);
  const Nominal nominal = build_nominal(cfg.nominal, 2);
  const auto& mix = std::get<GaussianMixture>(nominal);
  CHECK(mix.component(1).mean()(1) == 1.1);
  CHECK(mix.component(0).cov()(0, 1) == 0.02);
}

TEST_CASE("configuration errors name the offending field") {
  json j = to_json(default_config("affine"));
  j["Y"] = {1.5, 1.2};
  CHECK(config_error_field(j) == "Y");

  j = to_json(default_config("affine"));
  j["mystery"] = 1;
  CHECK(config_error_field(j) == "mystery");

  j = to_json(default_config("affine"));
  j["model"]["colour"] = "red";
  CHECK(config_error_field(j).find("model") != std::string::npos);

  j = to_json(default_config("affine"));
  j["schema_version"] = 7;
  CHECK(config_error_field(j) == "schema_version");

  j = to_json(default_config("affine"));
  j["n_samples"] = 0;
  CHECK(config_error_field(j) == "n_samples");

  j = to_json(default_config("affine"));
  j["method"] = "XX";
  CHECK(config_error_field(j) == "method");
}

TEST_CASE("report JSON round trip preserves every field bit for bit") {
  RunConfig cfg = default_config("affine");
  cfg.seed = 77;
  const EstimateReport r = run_estimate(cfg);
  const EstimateReport back = report_from_json(json::parse(to_json(r).dump()));
  CHECK(identical(r, back));
  const json j = to_json(r);
  REQUIRE(j["tuning"].size() == 1);
  for (const char* key : {"y_star", "sigma_star_sq", "mu_lin", "nu", "gamma_sq", "nu_T", "gamma_T_sq"}) {
    CHECK(j["tuning"][0]["tuned"].contains(key));
  }
  CHECK(j["tuning"][0]["tuned"]["mid_report"]["converged"] == true);

  EstimateReport zero;
  zero.mu_hat = 0.0;
  zero.ess = std::nan("");
  const EstimateReport zb = report_from_json(json::parse(to_json(zero).dump()));
  CHECK(identical(zero, zb));
}

TEST_CASE("a long Monte Carlo run on the affine model matches the exact probability") {
  RunConfig cfg = default_config("affine");
  cfg.method = Method::MC;
  cfg.n_samples = 1000000;
  cfg.seed = 3;
  const EstimateReport r = run_estimate(cfg);
  const long double g = std::sqrt(0.03125L);
  const double exact = static_cast<double>(oracle::normal_mass((1.2803L - 0.75L) / g, (1.4571L - 0.75L) / g));
  CHECK(std::abs(r.mu_hat - exact) <= 3.0 * r.std_error);
  REQUIRE(analytic_reference(cfg));
  CHECK(*analytic_reference(cfg) == doctest::Approx(exact).epsilon(1e-10));
}

TEST_CASE("sweeps") {
  SweepSpec spec;
  spec.base = default_config("affine");
  spec.ensemble = 4;

  SUBCASE("a single-point grid gives one row") {
    spec.axis = SweepAxis::NSamples;
    spec.grid = {200};
    const auto rows = run_sweep(spec, 1);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].ok);
    CHECK(rows[0].summary.runs == 4);
    CHECK(rows[0].summary.reference_source == "analytic");
    std::ostringstream os;
    write_sweep_csv(os, rows);
    const std::string csv = os.str();
    CHECK(csv.rfind("grid_index,axis,value,status", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  }
  SUBCASE("a failing cell becomes an error row and the sweep continues") {
    spec.axis = SweepAxis::SigmaSq;
    spec.grid = {-1.0, 1e-3};
    const auto rows = run_sweep(spec, 1);
    REQUIRE(rows.size() == 2);
    CHECK_FALSE(rows[0].ok);
    CHECK_FALSE(rows[0].error.empty());
    CHECK(rows[1].ok);
  }
  SUBCASE("the error is smallest near the tuned sigma^2") {
    const auto model = affine_model(2);
    const TunedParams t = tune_affine(model->v(), 0.0, GaussianDensity::isotropic(Vector::Ones(2), 0.1),
                                      target_interval(spec.base));
    spec.axis = SweepAxis::SigmaSq;
    spec.ensemble = 40;
    spec.base.n_samples = 400;
    for (double f : {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2}) spec.grid.push_back(f * t.sigma_star_sq);
    const auto rows = run_sweep(spec, 1);
    double best = INFINITY;
    for (const auto& row : rows) {
      REQUIRE(row.ok);
      best = std::min(best, row.summary.ensemble_rel_rmse);
    }
    CHECK(rows[3].summary.ensemble_rel_rmse <= 2.0 * best);
    CHECK(rows[0].summary.ensemble_rel_rmse > rows[3].summary.ensemble_rel_rmse);
  }
  SUBCASE("sweep specifications round trip") {
    spec.axis = SweepAxis::ProbabilityLevel;
    spec.grid = {1e-3, 1e-6};
    CHECK(parse_sweep_spec(to_json(spec)) == spec);
  }
}

TEST_CASE("command-line exit codes") {
  RunConfig ok = default_config("affine");
  ok.n_samples = 200;
  const fs::path good = write_file("good.json", to_json(ok).dump());
  const fs::path out = scratch_dir() / "report.json";
  CHECK(run_cli("estimate --config " + good.string() + " --out " + out.string()) == 0);
  const json report = json::parse(slurp(out));
  CHECK(report["method"] == "BIMC");
  CHECK(report["n_samples"] == 200);

  json bad = to_json(ok);
  bad["Y"] = {2.0, 1.0};
  const fs::path bad_path = write_file("bad.json", bad.dump());
  CHECK(run_cli("estimate --config " + bad_path.string()) == 2);
  const json err = json::parse(slurp(scratch_dir() / "stderr.txt"));
  CHECK(err["error"] == "config");
  CHECK(err["field"] == "Y");

  CHECK(run_cli("estimate --config " + (scratch_dir() / "missing.json").string()) == 2);
  CHECK(run_cli("frobnicate") == 2);

  RunConfig stuck = default_config("rank1");
  stuck.map_max_iterations = 1;
  CHECK(run_cli("estimate --config " + write_file("stuck.json", to_json(stuck).dump()).string()) == 3);

  RunConfig miss = default_config("affine");
  miss.method = Method::MC;
  miss.n_samples = 100;
  miss.y_min = 10.0;
  miss.y_max = 11.0;
  CHECK(run_cli("estimate --config " + write_file("miss.json", to_json(miss).dump()).string()) == 4);

  CHECK(run_cli("models") == 0);
  CHECK(run_cli("models --emit affine") == 0);
  CHECK(run_cli("models --emit nope") == 2);

  const fs::path a = scratch_dir() / "a.json", b = scratch_dir() / "b.json";
  CHECK(run_cli("estimate --config " + good.string() + " --seed 5 --out " + a.string()) == 0);
  CHECK(run_cli("estimate --config " + good.string() + " --seed 5 --out " + b.string()) == 0);
  CHECK(slurp(a) == slurp(b));

  fs::remove_all(scratch_dir());
}
