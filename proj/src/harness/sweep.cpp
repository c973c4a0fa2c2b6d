// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "rss/harness/experiment.hpp"
#include "rss/lm/checkpoint.hpp"
#include "rss/util/seed.hpp"

namespace rss {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

TokenSeq strip_eos(const TokenSeq& s) {
  TokenSeq out = s;
  if (!out.empty() && out.back() == Vocabulary::kEos) out.pop_back();
  return out;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string to_json_line(const RecoveryRecord& r, std::uint64_t config_hash) {
  ordered_json j;
  j["config_hash"] = hex64(config_hash);
  j["model"] = r.model;
  j["sentence"] = r.sentence;
  j["d_prime"] = r.code_dim;
  j["restart"] = r.restart;
  j["width"] = r.width;
  j["ref"] = r.ref;
  j["decoded"] = r.decoded;
  j["finished"] = r.finished;
  j["decode_log_prob"] = r.decode_log_prob;
  j["optimizer"] = to_string(r.estimate.optimizer);
  j["initial_nll"] = r.estimate.initial_nll;
  j["final_nll"] = r.estimate.final_nll;
  j["iterations"] = r.estimate.iterations;
  j["evaluations"] = r.estimate.evaluations;
  j["converged"] = r.estimate.converged;
  j["status"] = r.estimate.status;
  j["restart_seed"] = r.estimate.restart_seed;
  j["projection_seed"] = r.estimate.projection_seed;
  j["z0_seed"] = r.estimate.z0_seed;
  j["em"] = r.score.em;
  j["bleu"] = r.score.bleu;
  j["pm"] = r.score.pm;
  return j.dump();
}

RecoveryRecord record_from_json(const std::string& line, std::uint64_t* config_hash) {
  const auto j = ordered_json::parse(line);
  RecoveryRecord r;
  if (config_hash) *config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
  r.model = j.at("model").get<std::string>();
  r.sentence = j.at("sentence").get<std::size_t>();
  r.code_dim = j.at("d_prime").get<std::size_t>();
  r.restart = j.at("restart").get<std::size_t>();
  r.width = j.at("width").get<std::size_t>();
  r.ref = j.at("ref").get<TokenSeq>();
  r.decoded = j.at("decoded").get<TokenSeq>();
  r.finished = j.at("finished").get<bool>();
  r.decode_log_prob = j.at("decode_log_prob").get<double>();
  auto& e = r.estimate;
  e.optimizer = j.at("optimizer").get<std::string>() == "adam" ? Optimizer::Adam : Optimizer::ConjugateGradient;
  e.initial_nll = j.at("initial_nll").get<double>();
  e.final_nll = j.at("final_nll").get<double>();
  e.iterations = j.at("iterations").get<std::size_t>();
  e.evaluations = j.at("evaluations").get<std::size_t>();
  e.converged = j.at("converged").get<bool>();
  e.status = j.at("status").get<std::string>();
  e.restart_seed = j.at("restart_seed").get<std::uint64_t>();
  e.projection_seed = j.at("projection_seed").get<std::uint64_t>();
  e.z0_seed = j.at("z0_seed").get<std::uint64_t>();
  e.code_dim = r.code_dim;
  e.restart = r.restart;
  r.score = {j.at("em").get<double>(), j.at("bleu").get<double>(), j.at("pm").get<double>()};
  return r;
}

std::string aggregate_label(const std::string& model_id, std::size_t width, bool several_widths) {
  return several_widths ? model_id + "@w" + std::to_string(width) : model_id;
}

std::vector<AggregateRecord> aggregate_records(const std::vector<RecoveryRecord>& records, bool several_widths) {
  std::vector<ScoredRestart> scored;
  scored.reserve(records.size());
  for (const auto& r : records)
    scored.push_back({aggregate_label(r.model, r.width, several_widths), r.code_dim, r.sentence, r.ref.size(), r.score});
  return aggregate(scored);
}

std::vector<std::size_t> select_probe(std::size_t probe_size, std::size_t num_sentences, std::uint64_t base_seed) {
  std::vector<std::size_t> idx(probe_size);
  std::iota(idx.begin(), idx.end(), 0);
  if (num_sentences == 0 || num_sentences >= probe_size) return idx;
  std::mt19937_64 rng(derive_seed(base_seed, {0x70726f6265ULL}));
  for (std::size_t i = 0; i < num_sentences; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, probe_size - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(num_sentences);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

struct Cell {
  std::size_t sentence, code_dim, restart;
};

std::vector<RecoveryRecord> run_cell(const ExperimentConfig& c, const LmParameters& params, const TokenSeq& sentence,
                                     const Cell& cell) {
  const std::uint64_t rs = restart_seed(c.base_seed, cell.sentence, cell.restart);
  EstimationResult e = c.optimizer == Optimizer::Adam ? estimate_adam(sentence, params, cell.code_dim, rs, c.estimate)
                                                      : estimate(sentence, params, cell.code_dim, rs, c.estimate);
  e.restart = cell.restart;
  const ConditionedModel model(params, projection_of(e, params), e.z);
  const TokenSeq ref = strip_eos(sentence);
  std::vector<RecoveryRecord> out;
  for (std::size_t w : c.beam_widths) {
    BeamConfig bc;
    bc.width = w;
    bc.max_len = c.max_decode_len;
    const Hypothesis h = beam_decode(model, bc);
    RecoveryRecord r;
    r.model = c.model_id;
    r.sentence = cell.sentence;
    r.code_dim = cell.code_dim;
    r.restart = cell.restart;
    r.width = w;
    r.ref = ref;
    r.decoded = strip_eos(h.tokens);
    r.finished = h.finished;
    r.decode_log_prob = h.log_prob;
    r.estimate = e;
    r.estimate.z = DenseVector();
    r.score = score_sentence_pair(ref, r.decoded);
    out.push_back(std::move(r));
  }
  return out;
}

ordered_json report_meta(const SweepReport& r) {
  ordered_json j;
  j["model_id"] = r.model_id;
  j["config_hash"] = hex64(r.config_hash);
  j["model_checksum"] = hex64(r.model_checksum);
  j["base_seed"] = r.base_seed;
  j["grid"] = r.grid;
  j["beam_widths"] = r.beam_widths;
  j["restarts"] = r.restarts;
  j["sentences"] = r.sentences;
  j["records"] = r.records.size();
  return j;
}

}  // namespace

SweepReport run_sweep(const ExperimentConfig& config, const LmParameters& params, const Corpus& probe,
                      const SweepProgress& progress) {
  config.validate();
  const std::size_t model_dim = params.config.model_dim();
  for (std::size_t g : config.grid) make_projection(g, model_dim, 0);  // rejects bad grid values up front
  if (probe.sentences.empty()) throw std::invalid_argument("run_sweep: probe corpus is empty");
  for (const auto& s : probe.sentences) validate_sentence(s, params.config.vocab);

  SweepReport report;
  report.model_id = config.model_id;
  report.model_checksum = params.checksum();
  report.config_hash = config_hash(config, report.model_checksum, corpus_hash(probe));
  report.base_seed = config.base_seed;
  report.grid = config.grid;
  report.beam_widths = config.beam_widths;
  report.restarts = config.restarts;
  report.sentences = select_probe(probe.size(), config.num_sentences, config.base_seed);

  const bool persist = !config.output_dir.empty();
  const fs::path journal_path = config.output_dir / "journal.jsonl";
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>, RecoveryRecord> done;
  if (persist) {
    fs::create_directories(config.output_dir);
    write_text(config.output_dir / "resolved_config.json", config_to_json(config) + "\n");
    write_text(config.output_dir / "model_checksum.txt", hex64(report.model_checksum) + "\n");
    if (fs::exists(journal_path)) {
      std::ifstream in(journal_path);
      std::string line;
      while (std::getline(in, line)) {
        try {
          std::uint64_t h = 0;
          RecoveryRecord r = record_from_json(line, &h);
          if (h == report.config_hash) done.emplace(r.key(), std::move(r));
        } catch (const std::exception&) {
          // A torn final line from an interrupted run.
        }
      }
    }
  }

  std::vector<Cell> todo;
  std::vector<RecoveryRecord> records;
  for (std::size_t s : report.sentences) {
    for (std::size_t dim : config.grid) {
      for (std::size_t k = 0; k < config.restarts; ++k) {
        bool complete = true;
        for (std::size_t w : config.beam_widths) complete = complete && done.count({s, dim, k, w});
        if (complete) {
          for (std::size_t w : config.beam_widths) records.push_back(done.at({s, dim, k, w}));
          ++report.resumed;
        } else {
          todo.push_back({s, dim, k});
        }
      }
    }
  }

  std::ofstream journal;
  if (persist) {
    // Rewrite the journal with just the reusable cells so stale lines do not accumulate.
    std::vector<RecoveryRecord> keep = records;
    std::sort(keep.begin(), keep.end(), [](const auto& a, const auto& b) { return a.key() < b.key(); });
    journal.open(journal_path, std::ios::binary | std::ios::trunc);
    for (const auto& r : keep) journal << to_json_line(r, report.config_hash) << '\n';
    journal.flush();
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::size_t finished_cells = report.resumed;
  const std::size_t total_cells = report.sentences.size() * config.grid.size() * config.restarts;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      std::vector<RecoveryRecord> out;
      try {
        out = run_cell(config, params, probe.sentences[todo[i].sentence], todo[i]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = todo.size();
        return;
      }
      std::lock_guard lock(mu);
      ++finished_cells;
      for (auto& r : out) {
        if (persist) journal << to_json_line(r, report.config_hash) << '\n';
        if (progress) progress(r, finished_cells, total_cells);
        records.push_back(std::move(r));
      }
      if (persist) journal.flush();
    }
  };
  const std::size_t n_threads = std::min(config.jobs, std::max<std::size_t>(todo.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.key() < b.key(); });
  report.records = std::move(records);
  report.aggregates = aggregate_records(report.records, config.beam_widths.size() > 1);

  if (persist) {
    std::ostringstream rec;
    for (const auto& r : report.records) rec << to_json_line(r, report.config_hash) << '\n';
    write_text(config.output_dir / "records.jsonl", rec.str());
    std::ostringstream agg;
    write_aggregate_csv(agg, report.aggregates);
    write_text(config.output_dir / "aggregates.csv", agg.str());
    write_text(config.output_dir / "report.json", report_meta(report).dump(2) + "\n");
  }
  return report;
}

SweepReport run_sweep(const ExperimentConfig& config, const SweepProgress& progress) {
  config.validate();
  if (config.checkpoint.empty() || !fs::exists(config.checkpoint))
    throw std::runtime_error("run_sweep: checkpoint not found: " + config.checkpoint.string());
  if (config.probe.empty() || !fs::exists(config.probe))
    throw std::runtime_error("run_sweep: probe corpus not found: " + config.probe.string());
  const LmParameters params = load_checkpoint(config.checkpoint);
  const Corpus probe = load_ids(config.probe, Split::Probe);
  return run_sweep(config, params, probe, progress);
}

SweepReport load_report(const fs::path& dir) {
  const auto meta = ordered_json::parse(read_text(dir / "report.json"));
  SweepReport r;
  r.model_id = meta.at("model_id").get<std::string>();
  r.config_hash = std::stoull(meta.at("config_hash").get<std::string>(), nullptr, 16);
  r.model_checksum = std::stoull(meta.at("model_checksum").get<std::string>(), nullptr, 16);
  r.base_seed = meta.at("base_seed").get<std::uint64_t>();
  r.grid = meta.at("grid").get<std::vector<std::size_t>>();
  r.beam_widths = meta.at("beam_widths").get<std::vector<std::size_t>>();
  r.restarts = meta.at("restarts").get<std::size_t>();
  r.sentences = meta.at("sentences").get<std::vector<std::size_t>>();
  std::istringstream in(read_text(dir / "records.jsonl"));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) r.records.push_back(record_from_json(line));
  if (r.records.empty()) throw std::runtime_error("load_report: no records in " + dir.string());
  r.aggregates = aggregate_records(r.records, r.beam_widths.size() > 1);
  return r;
}

std::map<std::size_t, double> mean_em_by_dim(const std::vector<AggregateRecord>& aggregates, const std::string& label) {
  std::map<std::size_t, double> out;
  for (const auto& a : aggregates)
    if (a.model == label && a.metric == Metric::EM && a.bucket == "all") out[a.code_dim] = a.mean;
  return out;
}

namespace {

std::map<std::size_t, double> primary_em(const SweepReport& report) {
  if (report.records.empty() || report.beam_widths.empty())
    throw std::invalid_argument("effective dimension: empty report");
  return mean_em_by_dim(report.aggregates,
                        aggregate_label(report.model_id, report.beam_widths.front(), report.beam_widths.size() > 1));
}

}  // namespace

std::optional<std::size_t> effective_dimension(const std::map<std::size_t, double>& mean_em, double tau) {
  if (mean_em.empty()) throw std::invalid_argument("effective_dimension: empty grid");
  for (const auto& [dim, em] : mean_em)
    if (em > tau) return dim;
  return std::nullopt;
}

std::optional<std::size_t> effective_dimension(const SweepReport& report, double tau) {
  return effective_dimension(primary_em(report), tau);
}

std::size_t unconstrained_effective_dimension(const std::map<std::size_t, double>& mean_em) {
  if (mean_em.empty()) throw std::invalid_argument("unconstrained_effective_dimension: empty grid");
  double best = -1.0;
  for (const auto& [dim, em] : mean_em) best = std::max(best, em);
  for (const auto& [dim, em] : mean_em)
    if (em == best) return dim;
  return mean_em.begin()->first;
}

std::size_t unconstrained_effective_dimension(const SweepReport& report) {
  return unconstrained_effective_dimension(primary_em(report));
}

}  // namespace rss
