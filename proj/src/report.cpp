#include "bimc/report.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace bimc {

using nlohmann::json;

namespace {

json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double num_value(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw InvalidArgument("report: unexpected string '" + s + "' in numeric field");
  }
  return v.get<double>();
}

double get_num(const json& j, const char* key) { return num_value(j.at(key)); }

json vec(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

Vector get_vec(const json& j, const char* key) {
  const json& a = j.at(key);
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = num_value(a[i]);
  return v;
}

SolverReport solver_from_json(const json& j) {
  SolverReport r;
  r.iterations = j.at("iterations").get<int>();
  r.grad_norm = get_num(j, "grad_norm");
  r.initial_grad_norm = get_num(j, "initial_grad_norm");
  r.tolerance = get_num(j, "tolerance");
  r.objective = get_num(j, "objective");
  r.converged = j.at("converged").get<bool>();
  r.message = j.at("message").get<std::string>();
  return r;
}

TunedParams tuned_from_json(const json& j) {
  TunedParams t;
  t.y_star = get_num(j, "y_star");
  t.sigma_star_sq = get_num(j, "sigma_star_sq");
  t.mu_lin = get_num(j, "mu_lin");
  t.v = get_vec(j, "v");
  t.beta = get_num(j, "beta");
  t.x_map_mid = get_vec(j, "x_map_mid");
  t.pushforward = {get_num(j, "nu"), get_num(j, "gamma_sq")};
  t.truncated = {get_num(j, "nu_T"), get_num(j, "gamma_T_sq")};
  t.kl_at_optimum = get_num(j, "kl_at_optimum");
  t.used_fallback = j.at("used_fallback").get<bool>();
  t.mid_report = solver_from_json(j.at("mid_report"));
  return t;
}

bool same(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0 || (std::isnan(a) && std::isnan(b)); }

bool same(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!same(a(i), b(i))) return false;
  }
  return true;
}

bool same(const SolverReport& a, const SolverReport& b) {
  return a.iterations == b.iterations && same(a.grad_norm, b.grad_norm) &&
         same(a.initial_grad_norm, b.initial_grad_norm) && same(a.tolerance, b.tolerance) &&
         same(a.objective, b.objective) && a.converged == b.converged && a.message == b.message;
}

bool same(const TunedParams& a, const TunedParams& b) {
  return same(a.y_star, b.y_star) && same(a.sigma_star_sq, b.sigma_star_sq) && same(a.mu_lin, b.mu_lin) &&
         same(a.v, b.v) && same(a.beta, b.beta) && same(a.x_map_mid, b.x_map_mid) &&
         same(a.pushforward.nu, b.pushforward.nu) && same(a.pushforward.gamma_sq, b.pushforward.gamma_sq) &&
         same(a.truncated.nu_T, b.truncated.nu_T) && same(a.truncated.gamma_T_sq, b.truncated.gamma_T_sq) &&
         same(a.kl_at_optimum, b.kl_at_optimum) && a.used_fallback == b.used_fallback &&
         same(a.mid_report, b.mid_report);
}

}  // namespace

json to_json(const SolverReport& r) {
  return json{{"iterations", r.iterations},
              {"grad_norm", num(r.grad_norm)},
              {"initial_grad_norm", num(r.initial_grad_norm)},
              {"tolerance", num(r.tolerance)},
              {"objective", num(r.objective)},
              {"converged", r.converged},
              {"message", r.message}};
}

json to_json(const TunedParams& t) {
  return json{{"y_star", num(t.y_star)},
              {"sigma_star_sq", num(t.sigma_star_sq)},
              {"mu_lin", num(t.mu_lin)},
              {"v", vec(t.v)},
              {"beta", num(t.beta)},
              {"x_map_mid", vec(t.x_map_mid)},
              {"nu", num(t.pushforward.nu)},
              {"gamma_sq", num(t.pushforward.gamma_sq)},
              {"nu_T", num(t.truncated.nu_T)},
              {"gamma_T_sq", num(t.truncated.gamma_T_sq)},
              {"kl_at_optimum", num(t.kl_at_optimum)},
              {"used_fallback", t.used_fallback},
              {"mid_report", to_json(t.mid_report)}};
}

json to_json(const EstimateReport& r) {
  json j;
  j["schema_version"] = 1;
  j["method"] = to_string(r.method);
  j["mu_hat"] = num(r.mu_hat);
  j["rel_rmse_hat"] = r.rel_rmse_hat ? num(*r.rel_rmse_hat) : json(nullptr);
  j["std_error"] = num(r.std_error);
  j["acceptance_ratio"] = num(r.acceptance_ratio);
  j["hits"] = r.hits;
  j["ess"] = num(r.ess);
  j["n_samples"] = r.n_samples;
  j["n_model_evals"] = r.n_model_evals;
  j["n_domain_rejections"] = r.n_domain_rejections;
  j["seed"] = r.seed;
  j["n_pseudo"] = r.n_pseudo;
  json tuning = json::array();
  for (const auto& t : r.tuning) {
    json pd = json::array();
    for (double y : t.pseudo_data) pd.push_back(num(y));
    tuning.push_back(
        {{"weight", num(t.weight)}, {"sigma_sq", num(t.sigma_sq)}, {"pseudo_data", pd}, {"tuned", to_json(t.tuned)}});
  }
  j["tuning"] = tuning;
  j["diagnostics"] = r.diagnostics;
  return j;
}

EstimateReport report_from_json(const json& j) {
  EstimateReport r;
  r.method = method_from_string(j.at("method").get<std::string>());
  r.mu_hat = get_num(j, "mu_hat");
  if (!j.at("rel_rmse_hat").is_null()) r.rel_rmse_hat = get_num(j, "rel_rmse_hat");
  r.std_error = get_num(j, "std_error");
  r.acceptance_ratio = get_num(j, "acceptance_ratio");
  r.hits = j.at("hits").get<std::uint64_t>();
  r.ess = get_num(j, "ess");
  r.n_samples = j.at("n_samples").get<std::uint64_t>();
  r.n_model_evals = j.at("n_model_evals").get<std::uint64_t>();
  r.n_domain_rejections = j.at("n_domain_rejections").get<std::uint64_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.n_pseudo = j.at("n_pseudo").get<int>();
  for (const auto& t : j.at("tuning")) {
    TuningRecord rec;
    rec.weight = get_num(t, "weight");
    rec.sigma_sq = get_num(t, "sigma_sq");
    for (const auto& y : t.at("pseudo_data")) rec.pseudo_data.push_back(num_value(y));
    rec.tuned = tuned_from_json(t.at("tuned"));
    r.tuning.push_back(std::move(rec));
  }
  r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
  return r;
}

bool identical(const EstimateReport& a, const EstimateReport& b) {
  if (a.method != b.method || !same(a.mu_hat, b.mu_hat) || a.rel_rmse_hat.has_value() != b.rel_rmse_hat.has_value())
    return false;
  if (a.rel_rmse_hat && !same(*a.rel_rmse_hat, *b.rel_rmse_hat)) return false;
  if (!same(a.std_error, b.std_error) || !same(a.acceptance_ratio, b.acceptance_ratio) || a.hits != b.hits ||
      !same(a.ess, b.ess) || a.n_samples != b.n_samples || a.n_model_evals != b.n_model_evals ||
      a.n_domain_rejections != b.n_domain_rejections || a.seed != b.seed || a.n_pseudo != b.n_pseudo ||
      a.diagnostics != b.diagnostics || a.tuning.size() != b.tuning.size())
    return false;
  for (std::size_t i = 0; i < a.tuning.size(); ++i) {
    const auto& x = a.tuning[i];
    const auto& y = b.tuning[i];
    if (!same(x.weight, y.weight) || !same(x.sigma_sq, y.sigma_sq) || x.pseudo_data.size() != y.pseudo_data.size() ||
        !same(x.tuned, y.tuned))
      return false;
    for (std::size_t k = 0; k < x.pseudo_data.size(); ++k) {
      if (!same(x.pseudo_data[k], y.pseudo_data[k])) return false;
    }
  }
  return true;
}

}  // namespace bimc
