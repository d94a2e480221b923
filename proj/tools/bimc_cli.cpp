#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bimc/config.hpp"
#include "bimc/harness.hpp"
#include "bimc/report.hpp"

namespace {

enum Exit { kOk = 0, kConfigError = 2, kSolverError = 3, kZeroHits = 4, kOtherError = 1 };

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw bimc::ConfigError("--out", "cannot open '" + path + "' for writing");
  f << text;
}

int fail(int code, const std::string& kind, const std::string& message, const std::string& field = "") {
  nlohmann::json err{{"error", kind}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  std::cerr << err.dump(2) << '\n';
  return code;
}

int cmd_estimate(const Common& c) {
  bimc::RunConfig cfg = bimc::parse_run_config(bimc::read_json_file(c.config));
  if (c.seed) cfg.seed = *c.seed;
  nlohmann::json out;
  bool zero = false;
  if (cfg.ensemble > 1) {
    const bimc::ModelPtr model = bimc::make_model(cfg.model);
    const bimc::Nominal nominal = bimc::build_nominal(cfg.nominal, model->dim());
    const auto runs = bimc::run_ensemble(cfg, *model, nominal, cfg.ensemble, std::max(cfg.threads, 1u));
    const auto s = bimc::summarize(runs, bimc::resolve_reference(cfg, *model, nominal));
    out["schema_version"] = bimc::kSchemaVersion;
    out["config"] = bimc::to_json(cfg);
    out["runs"] = nlohmann::json::array();
    for (const auto& r : runs) out["runs"].push_back(bimc::to_json(r));
    out["summary"] = {{"runs", s.runs},
                      {"mean_mu_hat", s.mean_mu_hat},
                      {"ensemble_rel_rmse", s.ensemble_rel_rmse},
                      {"mean_rel_rmse_hat", s.mean_rel_rmse_hat},
                      {"mean_acceptance_ratio", s.mean_acceptance_ratio},
                      {"reference_mu", s.reference_mu},
                      {"reference_source", s.reference_source}};
    zero = std::all_of(runs.begin(), runs.end(), [](const auto& r) { return r.zero_hits(); });
  } else {
    const bimc::EstimateReport r = bimc::run_estimate(cfg);
    out = bimc::to_json(r);
    zero = r.zero_hits();
    if (!c.quiet) {
      std::cerr << bimc::to_string(r.method) << ": mu_hat = " << r.mu_hat << ", acceptance ratio = "
                << r.acceptance_ratio << ", model evaluations = " << r.n_model_evals << '\n';
    }
  }
  emit(c.out, out.dump(2) + "\n");
  if (zero) return fail(kZeroHits, "zero_hits", "no samples hit Y; the estimate is degenerate");
  return kOk;
}

int cmd_sweep(const Common& c) {
  bimc::SweepSpec spec = bimc::parse_sweep_spec(bimc::read_json_file(c.config));
  if (c.seed) spec.base.seed = *c.seed;
  const auto rows = bimc::run_sweep(spec, std::max(spec.base.threads, 1u));
  std::ostringstream os;
  bimc::write_sweep_csv(os, rows);
  emit(c.out, os.str());
  if (!c.quiet) {
    std::size_t failed = 0;
    for (const auto& r : rows) failed += r.ok ? 0 : 1;
    std::cerr << rows.size() << " sweep cells, " << failed << " failed\n";
  }
  return kOk;
}

int cmd_models(const Common& c, const std::string& emit_name) {
  if (!emit_name.empty()) {
    emit(c.out, bimc::to_json(bimc::default_config(emit_name)).dump(2) + "\n");
    return kOk;
  }
  std::ostringstream os;
  for (const auto& name : bimc::catalog_names()) {
    const auto cfg = bimc::default_config(name);
    const auto model = bimc::make_model(cfg.model);
    os << name << "  dim=" << model->dim() << "  Y=[" << cfg.y_min << ", " << cfg.y_max << "]\n";
  }
  emit(c.out, os.str());
  return kOk;
}

int cmd_check(const Common& c) {
  const auto results = bimc::run_self_checks();
  std::ostringstream os;
  bool all = true;
  for (const auto& r : results) {
    os << (r.passed ? "PASS  " : "FAIL  ") << r.name << ": " << r.detail << '\n';
    all = all && r.passed;
  }
  if (!c.quiet || !all) emit(c.out, os.str());
  return all ? kOk : kOtherError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rare-event probability estimation by Bayesian inverse Monte Carlo"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed = 0;
  std::string emit_name;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", common.config, "configuration file (JSON)");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output file (default: stdout)");
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_flag("--quiet", common.quiet, "suppress progress messages");
  };
  auto* estimate = app.add_subcommand("estimate", "run one estimate (or an ensemble) and write a JSON report");
  add_common(estimate, true);
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep and write CSV");
  add_common(sweep, true);
  auto* models = app.add_subcommand("models", "list the model catalog");
  add_common(models, false);
  models->add_option("--emit", emit_name, "print the default configuration of a catalog model");
  auto* check = app.add_subcommand("check", "run gradient and oracle self-tests");
  add_common(check, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  for (auto* sub : {estimate, sweep, models, check}) {
    if (sub->parsed() && sub->count("--seed")) common.seed = seed;
  }

  try {
    if (estimate->parsed()) return cmd_estimate(common);
    if (sweep->parsed()) return cmd_sweep(common);
    if (models->parsed()) return cmd_models(common, emit_name);
    return cmd_check(common);
  } catch (const bimc::ConfigError& e) {
    return fail(kConfigError, "config", e.what(), e.field());
  } catch (const bimc::InvalidArgument& e) {
    return fail(kConfigError, "invalid_argument", e.what());
  } catch (const bimc::SolverError& e) {
    return fail(kSolverError, "solver", e.what());
  } catch (const bimc::TailOverflow& e) {
    return fail(kSolverError, "tail_overflow", e.what());
  } catch (const bimc::ModelError& e) {
    return fail(kSolverError, "model", e.what());
  } catch (const std::exception& e) {
    return fail(kOtherError, "internal", e.what());
  }
}
