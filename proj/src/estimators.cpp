#include "bimc/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace bimc {

std::string to_string(Method m) {
  switch (m) {
    case Method::MC:
      return "MC";
    case Method::IS:
      return "IS";
    case Method::BIMC:
      return "BIMC";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "MC") return Method::MC;
  if (s == "IS") return Method::IS;
  if (s == "BIMC") return Method::BIMC;
  throw InvalidArgument("unknown method '" + s + "'");
}

namespace {

Vector draw(const Nominal& d, RandomStream& rng) {
  return std::visit([&](const auto& density) { return density.sample(rng); }, d);
}

double log_density(const Nominal& d, const Vector& x) {
  return std::visit([&](const auto& density) { return density.logpdf(x); }, d);
}

Eigen::Index nominal_dim(const Nominal& d) {
  return std::visit([](const auto& density) { return density.dim(); }, d);
}

struct BlockStats {
  std::uint64_t n = 0;
  std::uint64_t hits = 0;
  std::uint64_t rejections = 0;
  double sum = 0.0;
  // Welford accumulators of the weights.
  double mean = 0.0;
  double m2 = 0.0;
  // Shifted power sums for the effective sample size.
  double log_max = -std::numeric_limits<double>::infinity();
  double s1 = 0.0;
  double s2 = 0.0;

  void add_weight(double w, double log_w) {
    ++n;
    sum += w;
    const double delta = w - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (w - mean);
    if (std::isfinite(log_w)) add_log_weight(log_w);
  }

  void add_log_weight(double log_w) {
    if (log_w > log_max) {
      const double scale = std::exp(log_max - log_w);
      s1 *= scale;
      s2 *= scale * scale;
      log_max = log_w;
    }
    const double e = std::exp(log_w - log_max);
    s1 += e;
    s2 += e * e;
  }

  void merge(const BlockStats& other) {
    if (other.n == 0) return;
    const std::uint64_t total = n + other.n;
    const double delta = other.mean - mean;
    const double na = static_cast<double>(n), nb = static_cast<double>(other.n);
    mean += delta * nb / static_cast<double>(total);
    m2 += other.m2 + delta * delta * na * nb / static_cast<double>(total);
    n = total;
    hits += other.hits;
    rejections += other.rejections;
    sum += other.sum;
    if (other.s1 > 0.0) {
      if (other.log_max > log_max) {
        const double scale = std::exp(log_max - other.log_max);
        s1 = s1 * scale + other.s1;
        s2 = s2 * scale * scale + other.s2;
        log_max = other.log_max;
      } else {
        const double scale = std::exp(other.log_max - log_max);
        s1 += other.s1 * scale;
        s2 += other.s2 * scale * scale;
      }
    }
  }
};

// One sampling pass. With `q` empty the nominal is sampled and every weight is
// the plain indicator (Monte Carlo).
BlockStats run_sampler(const ForwardModel& model, const Nominal& nominal, const Nominal* q,
                       const TargetInterval& interval, std::uint64_t n_samples, const SamplingOptions& options) {
  if (n_samples < 1) throw InvalidArgument("number of samples must be >= 1");
  if (nominal_dim(nominal) != model.dim() || (q && nominal_dim(*q) != model.dim())) {
    throw InvalidArgument("density and model dimensions disagree");
  }
  const std::size_t block = std::max<std::size_t>(1, options.block_size);
  const std::uint64_t n_blocks = (n_samples + block - 1) / block;
  std::vector<BlockStats> blocks(n_blocks);

  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  const auto worker = [&]() {
    for (;;) {
      const std::uint64_t b = next.fetch_add(1);
      if (b >= n_blocks || failed.load()) return;
      BlockStats& st = blocks[b];
      RandomStream rng = RandomStream::substream(options.seed, b);
      const std::uint64_t begin = b * block;
      const std::uint64_t end = std::min<std::uint64_t>(n_samples, begin + block);
      try {
        for (std::uint64_t i = begin; i < end; ++i) {
          const Vector x = q ? draw(*q, rng) : draw(nominal, rng);
          if (!model.in_domain(x)) {
            ++st.rejections;
            st.add_weight(0.0, -std::numeric_limits<double>::infinity());
            continue;
          }
          const double y = model.eval(x);
          if (!std::isfinite(y)) throw ModelError("model returned a non-finite output");
          if (!interval.contains(y)) {
            st.add_weight(0.0, -std::numeric_limits<double>::infinity());
            continue;
          }
          ++st.hits;
          if (!q) {
            st.add_weight(1.0, 0.0);
            continue;
          }
          const double log_w = log_density(nominal, x) - log_density(*q, x);
          st.add_weight(std::exp(log_w), log_w);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const unsigned threads =
      static_cast<unsigned>(std::min<std::uint64_t>(std::max(1u, options.threads), n_blocks));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  BlockStats total;
  for (const auto& st : blocks) total.merge(st);
  if (error) {
    std::ostringstream os;
    os << "estimation aborted after " << total.n << " of " << n_samples << " samples (" << total.hits << " hits): ";
    try {
      std::rethrow_exception(error);
    } catch (const std::exception& e) {
      os << e.what();
    }
    throw ModelError(os.str());
  }
  return total;
}

EstimateReport report_from(const BlockStats& st, Method method, std::uint64_t seed) {
  EstimateReport r;
  r.method = method;
  r.seed = seed;
  r.n_samples = st.n;
  r.hits = st.hits;
  r.n_domain_rejections = st.rejections;
  const double n = static_cast<double>(st.n);
  r.acceptance_ratio = static_cast<double>(st.hits) / n;
  r.ess = st.s1 > 0.0 ? st.s1 * st.s1 / st.s2 : 0.0;
  if (method == Method::MC) {
    r.mu_hat = r.acceptance_ratio;
    r.std_error = std::sqrt(r.mu_hat * (1.0 - r.mu_hat) / n);
    if (st.hits > 0) r.rel_rmse_hat = std::sqrt((1.0 - r.mu_hat) / (n * r.mu_hat));
  } else {
    r.mu_hat = st.sum / n;
    const double var = st.n > 1 ? st.m2 / (n - 1.0) : 0.0;
    r.std_error = std::sqrt(var / n);
    if (st.hits > 0 && st.n > 1) r.rel_rmse_hat = std::sqrt(var / (n * r.mu_hat * r.mu_hat));
  }
  if (st.hits == 0) r.diagnostics.push_back("no samples hit Y");
  if (st.rejections > 0) {
    r.diagnostics.push_back(std::to_string(st.rejections) + " samples fell outside the model domain");
  }
  if (method != Method::MC && st.hits > 0 && r.ess < 0.1 * static_cast<double>(st.hits)) {
    r.diagnostics.push_back("effective sample size collapsed (ESS = " + std::to_string(r.ess) +
                            "); estimate may be biased");
  }
  return r;
}

}  // namespace

EstimateReport mc_estimate(const ForwardModel& model, const Nominal& nominal, const TargetInterval& interval,
                           std::uint64_t n_samples, const SamplingOptions& options) {
  CountedModel counted(model);
  const BlockStats st = run_sampler(counted, nominal, nullptr, interval, n_samples, options);
  EstimateReport r = report_from(st, Method::MC, options.seed);
  r.n_model_evals = counted.eval_count();
  return r;
}

EstimateReport is_estimate(const ForwardModel& model, const Nominal& nominal, const Nominal& q,
                           const TargetInterval& interval, std::uint64_t n_samples, const SamplingOptions& options) {
  CountedModel counted(model);
  const BlockStats st = run_sampler(counted, nominal, &q, interval, n_samples, options);
  EstimateReport r = report_from(st, Method::IS, options.seed);
  r.n_model_evals = counted.eval_count();
  return r;
}

BimcDensity build_bimc_density(const ForwardModel& model, const GaussianDensity& prior,
                               const TargetInterval& interval, const BimcOptions& options) {
  if (options.n_pseudo < 1) throw InvalidArgument("n_pseudo must be >= 1");
  if (options.y_override && options.n_pseudo != 1) {
    throw InvalidArgument("a fixed pseudo-data point requires n_pseudo = 1");
  }
  TunedParams tuned = linearize_at_midpoint(model, prior, interval, options.map);
  std::vector<double> ys = options.n_pseudo == 1
                               ? std::vector<double>{options.y_override.value_or(tuned.y_star)}
                               : pseudo_data_points(interval, options.n_pseudo);
  const double sigma_sq = options.sigma_sq_override.value_or(tuned.sigma_star_sq);

  std::vector<LaplaceApprox> comps;
  std::vector<std::string> failures;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    try {
      comps.push_back(laplace_approximation(model, prior, PseudoLikelihood(ys[i], sigma_sq), tuned.x_map_mid,
                                            options.map));
    } catch (const SolverError& e) {
      failures.push_back("pseudo-data point " + std::to_string(i) + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = "could not build the BIMC density:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw SolverError(msg);
  }
  std::vector<GaussianDensity> densities;
  densities.reserve(comps.size());
  for (const auto& c : comps) densities.push_back(c.density);
  return BimcDensity{GaussianMixture::uniform(std::move(densities)), std::move(tuned), std::move(ys), sigma_sq,
                     std::move(comps)};
}

namespace {

EstimateReport bimc_gaussian(const ForwardModel& model, const GaussianDensity& prior,
                             const TargetInterval& interval, std::uint64_t n_samples, const BimcOptions& options,
                             std::uint64_t seed) {
  BimcDensity bd = build_bimc_density(model, prior, interval, options);
  SamplingOptions sampling = options.sampling;
  sampling.seed = seed;
  const Nominal p = prior;
  const Nominal q = bd.q.size() == 1 ? Nominal(bd.q.component(0)) : Nominal(bd.q);
  const BlockStats st = run_sampler(model, p, &q, interval, n_samples, sampling);
  EstimateReport r = report_from(st, Method::BIMC, seed);
  r.n_pseudo = options.n_pseudo;
  r.tuning.push_back(TuningRecord{std::move(bd.tuned), std::move(bd.pseudo_data), bd.sigma_sq, 1.0});
  return r;
}

}  // namespace

EstimateReport bimc_estimate(const ForwardModel& model, const Nominal& nominal, const TargetInterval& interval,
                             std::uint64_t n_samples, const BimcOptions& options) {
  if (n_samples < 1) throw InvalidArgument("number of samples must be >= 1");
  CountedModel counted(model);
  const std::uint64_t seed = options.sampling.seed;

  if (const auto* gauss = std::get_if<GaussianDensity>(&nominal)) {
    EstimateReport r = bimc_gaussian(counted, *gauss, interval, n_samples, options, seed);
    r.n_model_evals = counted.eval_count();
    return r;
  }

  const auto& mix = std::get<GaussianMixture>(nominal);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    if (mix.weights()[i] > 0.0) active.push_back(i);
  }
  if (active.size() == 1) {
    const std::size_t i = active.front();
    EstimateReport r = bimc_gaussian(counted, mix.component(i), interval, n_samples, options,
                                     i == 0 ? seed : mix_seed(seed, i));
    r.n_model_evals = counted.eval_count();
    return r;
  }

  EstimateReport combined;
  combined.method = Method::BIMC;
  combined.seed = seed;
  combined.n_pseudo = options.n_pseudo;
  double variance = 0.0;
  for (std::size_t i : active) {
    const double w = mix.weights()[i];
    const auto n_i = std::max<std::uint64_t>(100, static_cast<std::uint64_t>(std::llround(w * n_samples)));
    EstimateReport r;
    try {
      r = bimc_gaussian(counted, mix.component(i), interval, n_i, options, i == 0 ? seed : mix_seed(seed, i));
    } catch (const SolverError& e) {
      throw SolverError("nominal component " + std::to_string(i) + ": " + e.what());
    } catch (const ModelError& e) {
      throw ModelError("nominal component " + std::to_string(i) + ": " + e.what());
    }
    combined.mu_hat += w * r.mu_hat;
    variance += w * w * r.std_error * r.std_error;
    combined.hits += r.hits;
    combined.n_samples += r.n_samples;
    combined.n_domain_rejections += r.n_domain_rejections;
    combined.ess += r.ess;
    for (auto& t : r.tuning) {
      t.weight = w;
      combined.tuning.push_back(std::move(t));
    }
    for (auto& d : r.diagnostics) combined.diagnostics.push_back("component " + std::to_string(i) + ": " + d);
  }
  combined.acceptance_ratio = static_cast<double>(combined.hits) / static_cast<double>(combined.n_samples);
  combined.std_error = std::sqrt(variance);
  if (combined.mu_hat > 0.0) combined.rel_rmse_hat = combined.std_error / combined.mu_hat;
  combined.n_model_evals = counted.eval_count();
  return combined;
}

}  // namespace bimc
