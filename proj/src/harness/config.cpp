// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "rss/harness/experiment.hpp"
#include "rss/util/seed.hpp"

namespace rss {

using nlohmann::ordered_json;

void ExperimentConfig::validate() const {
  if (grid.empty()) throw std::invalid_argument("config: grid is empty");
  for (auto g : grid)
    if (g < 1) throw std::invalid_argument("config: grid values must be >= 1");
  if (restarts < 1) throw std::invalid_argument("config: restarts must be >= 1");
  if (beam_widths.empty()) throw std::invalid_argument("config: beam_widths is empty");
  for (auto w : beam_widths)
    if (w < 1) throw std::invalid_argument("config: beam widths must be >= 1");
  if (std::set(grid.begin(), grid.end()).size() != grid.size())
    throw std::invalid_argument("config: grid has duplicates");
  if (std::set(beam_widths.begin(), beam_widths.end()).size() != beam_widths.size())
    throw std::invalid_argument("config: beam_widths has duplicates");
  if (max_decode_len < 1) throw std::invalid_argument("config: max_decode_len must be >= 1");
  if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
  if (!(estimate.z0_std >= 0.0)) throw std::invalid_argument("config: z0_std must be non-negative");
  if (!(estimate.adam_lr > 0.0)) throw std::invalid_argument("config: adam_lr must be positive");
  estimate.cg.validate();
}

namespace {

ordered_json cg_json(const CgConfig& c) {
  ordered_json j;
  j["max_iter"] = c.max_iter;
  j["gtol"] = c.gtol;
  j["c1"] = c.c1;
  j["c2"] = c.c2;
  j["powell_nu"] = c.powell_nu;
  j["max_ls_evals"] = c.max_ls_evals;
  j["refine"] = c.refine;
  if (std::isfinite(c.f_target)) {
    j["f_target"] = c.f_target;
  } else {
    j["f_target"] = nullptr;
  }
  return j;
}

// Fields that decide the records; paths, model id and jobs do not.
ordered_json result_json(const ExperimentConfig& c) {
  ordered_json j;
  j["grid"] = c.grid;
  j["restarts"] = c.restarts;
  j["beam_widths"] = c.beam_widths;
  j["base_seed"] = c.base_seed;
  j["num_sentences"] = c.num_sentences;
  j["max_decode_len"] = c.max_decode_len;
  j["optimizer"] = to_string(c.optimizer);
  j["cg"] = cg_json(c.estimate.cg);
  j["z0_std"] = c.estimate.z0_std;
  j["adam_lr"] = c.estimate.adam_lr;
  return j;
}

template <class T>
void take(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const ordered_json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw std::invalid_argument(std::string("config: unknown key '") + k + "' in " + where);
  }
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["model_id"] = c.model_id;
  j["checkpoint"] = c.checkpoint.string();
  j["probe"] = c.probe.string();
  j["output_dir"] = c.output_dir.string();
  const ordered_json result = result_json(c);
  for (const auto& [k, v] : result.items()) j[k] = v;
  j["jobs"] = c.jobs;
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  check_keys(j,
             {"model_id", "checkpoint", "probe", "output_dir", "grid", "restarts", "beam_widths", "base_seed",
              "num_sentences", "max_decode_len", "optimizer", "cg", "z0_std", "adam_lr", "jobs"},
             "config");
  ExperimentConfig c;
  try {
    take(j, "model_id", c.model_id);
    if (j.contains("checkpoint")) c.checkpoint = j["checkpoint"].get<std::string>();
    if (j.contains("probe")) c.probe = j["probe"].get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    take(j, "grid", c.grid);
    take(j, "restarts", c.restarts);
    take(j, "beam_widths", c.beam_widths);
    take(j, "base_seed", c.base_seed);
    take(j, "num_sentences", c.num_sentences);
    take(j, "max_decode_len", c.max_decode_len);
    take(j, "jobs", c.jobs);
    take(j, "z0_std", c.estimate.z0_std);
    take(j, "adam_lr", c.estimate.adam_lr);
    if (j.contains("optimizer")) {
      const auto o = j["optimizer"].get<std::string>();
      if (o == "cg") {
        c.optimizer = Optimizer::ConjugateGradient;
      } else if (o == "adam") {
        c.optimizer = Optimizer::Adam;
      } else {
        throw std::invalid_argument("config: optimizer must be \"cg\" or \"adam\"");
      }
    }
    if (j.contains("cg")) {
      const auto& g = j["cg"];
      check_keys(g, {"max_iter", "gtol", "c1", "c2", "powell_nu", "max_ls_evals", "refine", "f_target"}, "cg");
      auto& cg = c.estimate.cg;
      take(g, "max_iter", cg.max_iter);
      take(g, "gtol", cg.gtol);
      take(g, "c1", cg.c1);
      take(g, "c2", cg.c2);
      take(g, "powell_nu", cg.powell_nu);
      take(g, "max_ls_evals", cg.max_ls_evals);
      take(g, "refine", cg.refine);
      if (g.contains("f_target")) {
        cg.f_target = g["f_target"].is_null() ? -std::numeric_limits<double>::infinity() : g["f_target"].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::uint64_t corpus_hash(const Corpus& corpus) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : corpus.sentences) {
    const auto* p = reinterpret_cast<const unsigned char*>(s.data());
    h = fnv1a64(std::span<const unsigned char>(p, s.size() * sizeof(TokenId)), h);
    const unsigned char sep = 0xff;
    h = fnv1a64(std::span<const unsigned char>(&sep, 1), h);
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& c, std::uint64_t model_checksum, std::uint64_t probe_hash) {
  const std::string s = result_json(c).dump() + "|" + std::to_string(model_checksum) + "|" + std::to_string(probe_hash);
  return fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

}  // namespace rss
