// SPDX-License-Identifier: Apache-2.0
#include "rss/estimate/forward.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "json.hpp"
#include "rss/util/seed.hpp"

namespace rss {

std::string_view to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "cg"; }

std::uint64_t restart_seed(std::uint64_t base_seed, std::size_t sentence_index, std::size_t restart) {
  return derive_seed(base_seed, {sentence_index, restart});
}
std::uint64_t projection_seed(std::uint64_t rs) { return derive_seed(rs, {0}); }
std::uint64_t z0_seed(std::uint64_t rs) { return derive_seed(rs, {1}); }

DenseVector draw_z0(std::size_t code_dim, double std_dev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, std_dev);
  DenseVector z(code_dim);
  for (double& v : z) v = nd(rng);
  return z;
}

ProjectionSpec projection_of(const EstimationResult& r, const LmParameters& params) {
  return make_projection(r.code_dim, params.config.model_dim(), r.projection_seed);
}

namespace {

EstimationResult prepare(const TokenSeq& sentence, const LmParameters& params, std::size_t code_dim,
                         std::uint64_t rs, const EstimateConfig& config, Optimizer opt) {
  validate_sentence(sentence, params.config.vocab);
  EstimationResult r;
  r.optimizer = opt;
  r.code_dim = code_dim;
  r.restart_seed = rs;
  r.projection_seed = projection_seed(rs);
  r.z0_seed = z0_seed(rs);
  r.z = draw_z0(code_dim, config.z0_std, r.z0_seed);
  return r;
}

}  // namespace

EstimationResult estimate(const TokenSeq& sentence, const LmParameters& params, std::size_t code_dim,
                          std::uint64_t rs, const EstimateConfig& config) {
  EstimationResult r = prepare(sentence, params, code_dim, rs, config, Optimizer::ConjugateGradient);
  ConditionedModel model(params, projection_of(r, params), r.z);
  ConditionedWorkspace ws;
  const Objective fg = [&](std::span<const double> z, std::span<double> g) {
    for (double v : z)
      if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    model.set_z(z);
    return model.nll_and_grad(sentence, g, ws);
  };
  const CgResult cg = nlcg_minimize(fg, r.z, config.cg);
  r.z = DenseVector(cg.x);
  r.initial_nll = cg.f0;
  r.final_nll = cg.f;
  r.iterations = cg.iterations;
  r.evaluations = cg.evaluations;
  r.converged = cg.converged();
  r.status = std::string(to_string(cg.status));
  return r;
}

std::vector<EstimationResult> estimate_multi(const TokenSeq& sentence, const LmParameters& params,
                                             std::size_t code_dim, std::size_t n_restarts, std::uint64_t base_seed,
                                             std::size_t sentence_index, const EstimateConfig& config) {
  if (n_restarts == 0) throw std::invalid_argument("estimate_multi: n_restarts must be at least 1");
  std::vector<EstimationResult> out;
  out.reserve(n_restarts);
  for (std::size_t k = 0; k < n_restarts; ++k) {
    out.push_back(estimate(sentence, params, code_dim, restart_seed(base_seed, sentence_index, k), config));
    out.back().restart = k;
  }
  return out;
}

EstimationResult estimate_adam(const TokenSeq& sentence, const LmParameters& params, std::size_t code_dim,
                               std::uint64_t rs, const EstimateConfig& config) {
  EstimationResult r = prepare(sentence, params, code_dim, rs, config, Optimizer::Adam);
  ConditionedModel model(params, projection_of(r, params), r.z);
  ConditionedWorkspace ws;
  const std::size_t n = code_dim;
  std::vector<double> z(r.z.begin(), r.z.end()), g(n), m(n, 0.0), v(n, 0.0);
  double f = model.nll_and_grad(sentence, g, ws);
  r.initial_nll = r.final_nll = f;
  r.evaluations = 1;
  r.status = "max_iter";
  for (std::size_t t = 1; t <= config.cg.max_iter; ++t) {
    const double b1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(t));
    const double b2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * g[i];
      v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * g[i] * g[i];
      z[i] -= config.adam_lr * (m[i] / b1) / (std::sqrt(v[i] / b2) + config.adam_eps);
    }
    model.set_z(z);
    f = model.nll_and_grad(sentence, g, ws);
    ++r.evaluations;
    r.iterations = t;
    if (!std::isfinite(f)) {
      r.status = "non_finite";
      break;
    }
    if (f < r.final_nll) {
      r.final_nll = f;
      r.z = DenseVector(z);
    }
    double gg = 0.0;
    for (double x : g) gg += x * x;
    if (std::sqrt(gg) <= config.cg.gtol) {
      r.status = "gtol";
      r.converged = true;
      break;
    }
    if (f <= config.cg.f_target) {
      r.status = "target";
      r.converged = true;
      break;
    }
  }
  return r;
}

std::string to_json_line(const EstimationResult& r, std::size_t sentence_id) {
  nlohmann::ordered_json j;
  j["sentence"] = sentence_id;
  j["restart"] = r.restart;
  j["optimizer"] = to_string(r.optimizer);
  j["code_dim"] = r.code_dim;
  j["restart_seed"] = r.restart_seed;
  j["projection_seed"] = r.projection_seed;
  j["z0_seed"] = r.z0_seed;
  j["initial_nll"] = r.initial_nll;
  j["final_nll"] = r.final_nll;
  j["iterations"] = r.iterations;
  j["evaluations"] = r.evaluations;
  j["converged"] = r.converged;
  j["status"] = r.status;
  j["z"] = r.z.values();
  return j.dump();
}

EstimationResult estimation_from_json(const std::string& line, std::size_t* sentence_id) {
  const auto j = nlohmann::json::parse(line);
  EstimationResult r;
  if (sentence_id) *sentence_id = j.at("sentence").get<std::size_t>();
  r.restart = j.at("restart").get<std::size_t>();
  r.optimizer = j.at("optimizer").get<std::string>() == "adam" ? Optimizer::Adam : Optimizer::ConjugateGradient;
  r.code_dim = j.at("code_dim").get<std::size_t>();
  r.restart_seed = j.at("restart_seed").get<std::uint64_t>();
  r.projection_seed = j.at("projection_seed").get<std::uint64_t>();
  r.z0_seed = j.at("z0_seed").get<std::uint64_t>();
  r.initial_nll = j.at("initial_nll").get<double>();
  r.final_nll = j.at("final_nll").get<double>();
  r.iterations = j.at("iterations").get<std::size_t>();
  r.evaluations = j.at("evaluations").get<std::size_t>();
  r.converged = j.at("converged").get<bool>();
  r.status = j.at("status").get<std::string>();
  r.z = DenseVector(j.at("z").get<std::vector<double>>());
  if (r.z.size() != r.code_dim) throw std::invalid_argument("estimation record: z has the wrong length");
  return r;
}

}  // namespace rss
