#include "bimc/harness.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace bimc {

unsigned hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

EstimateReport run_estimate(const RunConfig& cfg, const ForwardModel& model, const Nominal& nominal) {
  const TargetInterval interval = target_interval(cfg);
  if (cfg.method == Method::MC) {
    SamplingOptions s;
    s.seed = cfg.seed;
    s.threads = cfg.threads;
    return mc_estimate(model, nominal, interval, cfg.n_samples, s);
  }
  return bimc_estimate(model, nominal, interval, cfg.n_samples, bimc_options(cfg));
}

EstimateReport run_estimate(const RunConfig& cfg) {
  const ModelPtr model = make_model(cfg.model);
  const Nominal nominal = build_nominal(cfg.nominal, model->dim());
  return run_estimate(cfg, *model, nominal);
}

std::vector<EstimateReport> run_ensemble(const RunConfig& cfg, const ForwardModel& model, const Nominal& nominal,
                                         int replicates, unsigned threads) {
  if (replicates < 1) throw InvalidArgument("ensemble size must be >= 1");
  std::vector<EstimateReport> out(static_cast<std::size_t>(replicates));
  parallel_for(out.size(), threads, [&](std::size_t r) {
    RunConfig c = cfg;
    c.seed = mix_seed(cfg.seed, r);
    c.threads = 1;
    out[r] = run_estimate(c, model, nominal);
  });
  return out;
}

std::vector<EstimateReport> run_ensemble(const RunConfig& cfg, int replicates, unsigned threads) {
  const ModelPtr model = make_model(cfg.model);
  const Nominal nominal = build_nominal(cfg.nominal, model->dim());
  return run_ensemble(cfg, *model, nominal, replicates, threads);
}

namespace {

std::optional<double> affine_probability(const ForwardModel& model, const Nominal& nominal,
                                         const TargetInterval& interval) {
  const auto* affine = dynamic_cast<const AffineModel*>(&model);
  const auto* gauss = std::get_if<GaussianDensity>(&nominal);
  if (!affine || !gauss) return std::nullopt;
  return linearized_probability(pushforward_moments(affine->v(), affine->beta(), *gauss), interval);
}

}  // namespace

std::optional<double> analytic_reference(const RunConfig& cfg) {
  const ModelPtr model = make_model(cfg.model);
  return affine_probability(*model, build_nominal(cfg.nominal, model->dim()), target_interval(cfg));
}

std::optional<Reference> resolve_reference(const RunConfig& cfg, const ForwardModel& model, const Nominal& nominal) {
  if (cfg.reference_mu) return Reference{*cfg.reference_mu, "config"};
  if (const auto mu = affine_probability(model, nominal, target_interval(cfg))) return Reference{*mu, "analytic"};
  return std::nullopt;
}

EnsembleSummary summarize(const std::vector<EstimateReport>& runs, const std::optional<Reference>& reference) {
  EnsembleSummary s;
  s.runs = runs.size();
  if (runs.empty()) return s;
  const double n = static_cast<double>(runs.size());
  std::size_t with_rmse = 0;
  for (const auto& r : runs) {
    s.mean_mu_hat += r.mu_hat;
    s.mean_acceptance_ratio += r.acceptance_ratio;
    if (r.rel_rmse_hat) {
      s.mean_rel_rmse_hat += *r.rel_rmse_hat;
      ++with_rmse;
    }
  }
  s.mean_mu_hat /= n;
  s.mean_acceptance_ratio /= n;
  s.mean_rel_rmse_hat = with_rmse ? s.mean_rel_rmse_hat / static_cast<double>(with_rmse) : std::nan("");
  s.reference_mu = reference ? reference->mu : s.mean_mu_hat;
  s.reference_source = reference ? reference->source : "ensemble_mean";
  double sq = 0.0;
  for (const auto& r : runs) sq += (r.mu_hat - s.reference_mu) * (r.mu_hat - s.reference_mu);
  s.ensemble_rel_rmse = std::sqrt(sq / n) / s.reference_mu;
  return s;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, unsigned threads) {
  if (spec.grid.empty()) throw InvalidArgument("sweep grid must not be empty");
  const ModelPtr model = make_model(spec.base.model);
  const Nominal nominal = build_nominal(spec.base.nominal, model->dim());

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < spec.grid.size(); ++i) {
    SweepRow row;
    row.grid_index = i;
    row.axis = spec.axis;
    row.value = spec.grid[i];
    try {
      RunConfig cfg = spec.base;
      switch (spec.axis) {
        case SweepAxis::SigmaSq:
          cfg.override_sigma_sq = row.value;
          break;
        case SweepAxis::NSamples:
          cfg.n_samples = static_cast<std::uint64_t>(std::llround(row.value));
          break;
        case SweepAxis::NPseudo:
          cfg.n_pseudo = static_cast<int>(std::lround(row.value));
          cfg.override_y.reset();
          break;
        case SweepAxis::ProbabilityLevel: {
          const auto* gauss = std::get_if<GaussianDensity>(&nominal);
          if (!gauss) throw InvalidArgument("probability_level sweeps need a Gaussian nominal");
          const Tail tail = 0.5 * (cfg.y_min + cfg.y_max) < model->eval(gauss->mean()) ? Tail::Lower : Tail::Upper;
          const TargetInterval y = place_target_interval(*model, *gauss, cfg.y_max - cfg.y_min, row.value, tail);
          cfg.y_min = y.lower();
          cfg.y_max = y.upper();
          cfg.reference_mu.reset();
          break;
        }
      }
      cfg.seed = mix_seed(spec.base.seed, i);
      const auto runs = run_ensemble(cfg, *model, nominal, spec.ensemble, threads);
      row.summary = summarize(runs, resolve_reference(cfg, *model, nominal));
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string csv_escape(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' ? ' ' : c);
  }
  return out + "\"";
}

}  // namespace

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "grid_index,axis,value,status,runs,mean_mu_hat,ensemble_rel_rmse,mean_rel_rmse_hat,"
        "mean_acceptance_ratio,reference_mu,reference_source,error\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.grid_index << ',' << to_string(r.axis) << ',' << r.value << ',' << (r.ok ? "ok" : "error") << ',';
    if (r.ok) {
      const auto& s = r.summary;
      os << s.runs << ',' << s.mean_mu_hat << ',' << s.ensemble_rel_rmse << ',' << s.mean_rel_rmse_hat << ','
         << s.mean_acceptance_ratio << ',' << s.reference_mu << ',' << s.reference_source << ",\n";
    } else {
      os << ",,,,,,," << csv_escape(r.error) << '\n';
    }
  }
}

namespace {

CheckResult gradient_check(const std::string& label, const ForwardModel& model, const Vector& x) {
  CheckResult c{"gradient " + label, false, ""};
  try {
    const Vector g = model.grad(x);
    const Vector fd = fd_gradient(model, x);
    const double err = (g - fd).norm() / std::max(fd.norm(), 1e-300);
    c.passed = err <= 1e-5;
    std::ostringstream os;
    os << "relative error " << err << " against central differences";
    c.detail = os.str();
  } catch (const std::exception& e) {
    c.detail = e.what();
  }
  return c;
}

CheckResult value_check(const std::string& name, double got, double expected, double rel_tol) {
  const double err = std::abs(got - expected) / std::abs(expected);
  std::ostringstream os;
  os << std::setprecision(17) << "got " << got << ", expected " << expected << " (relative error " << err << ")";
  return {name, err <= rel_tol, os.str()};
}

}  // namespace

std::vector<CheckResult> run_self_checks() {
  std::vector<CheckResult> out;
  for (const auto& name : catalog_names()) {
    const RunConfig cfg = default_config(name);
    const ModelPtr model = make_model(cfg.model);
    if (!model->has_analytic_gradient()) continue;
    const Nominal nominal = build_nominal(cfg.nominal, model->dim());
    RandomStream rng(1);
    Vector x = std::visit([&](const auto& d) { return d.sample(rng); }, nominal);
    if (const auto box = model->domain()) x = box->project(x);
    out.push_back(gradient_check(name, *model, x));
  }
  {
    ModelSpec spec = default_config("rank1").model;
    spec.analytic_gradient = true;
    const ModelPtr model = make_model(spec);
    out.push_back(gradient_check("rank1 (analytic)", *model, Vector::Constant(model->dim(), 1.0)));
  }

  out.push_back(value_check("erfcx(0)", erfcx(0.0), 1.0, 1e-15));
  out.push_back(value_check("erfcx(1) vs exp(1) erfc(1)", erfcx(1.0), std::exp(1.0) * std::erfc(1.0), 1e-14));
  {
    const double t = 1e4;
    const double asym = (1.0 - 0.5 / (t * t) + 0.75 / (t * t * t * t)) / (t * std::sqrt(std::numbers::pi));
    out.push_back(value_check("erfcx(1e4) asymptotic series", erfcx(t), asym, 1e-14));
  }
  out.push_back(value_check("P(3 <= Z <= 4)", standard_normal_mass(3.0, 4.0),
                            0.5 * (std::erfc(3.0 / std::numbers::sqrt2) - std::erfc(4.0 / std::numbers::sqrt2)), 1e-13));

  {
    const RunConfig cfg = default_config("affine");
    const auto model = affine_model(2);
    const auto prior = std::get<GaussianDensity>(build_nominal(cfg.nominal, 2));
    const TunedParams t = tune_affine(model->v(), model->beta(), prior, target_interval(cfg));
    const PseudoLikelihood lik(t.y_star, t.sigma_star_sq);
    const LaplaceApprox exact = affine_laplace_closed_form(model->v(), model->beta(), prior, lik);
    CheckResult c{"affine Laplace approximation: BFGS vs closed form", false, ""};
    try {
      const LaplaceApprox num = laplace_approximation(*model, prior, lik, prior.mean());
      const double dx = (num.map_point - exact.map_point).norm() / exact.map_point.norm();
      const double dc = (num.density.cov() - exact.density.cov()).norm() / exact.density.cov().norm();
      c.passed = dx <= 1e-6 && dc <= 1e-10;
      std::ostringstream os;
      os << "MAP relative difference " << dx << ", covariance relative difference " << dc;
      c.detail = os.str();
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    out.push_back(c);
    out.push_back(value_check("affine linearized probability", t.mu_lin,
                              0.5 * (std::erfc(3.0 / std::numbers::sqrt2) - std::erfc(4.0 / std::numbers::sqrt2)),
                              1e-3));
  }
  return out;
}

}  // namespace bimc
