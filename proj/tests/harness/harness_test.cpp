// SPDX-License-Identifier: Apache-2.0
#include <unistd.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "rss/harness/experiment.hpp"
#include "rss/harness/synth.hpp"
#include "rss/lm/checkpoint.hpp"

using namespace rss;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("rss_harness_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LmParameters tiny_params() {
  LmConfig c;
  c.units = 2;
  c.vocab = 9;
  LmParameters p = LmParameters::zeros(c);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto& [name, a] : p.arrays())
    for (double& v : a) v = nd(rng);
  return p;
}

Corpus tiny_probe() {
  Corpus c;
  c.split = Split::Probe;
  c.sentences = {{3, 4, 1}, {5, 5, 6, 7, 1}, {8, 1}, {4, 6, 8, 3, 5, 7, 1}};
  return c;
}

ExperimentConfig tiny_config(const fs::path& out = {}) {
  ExperimentConfig c;
  c.model_id = "tiny";
  c.grid = {4, 8, 16};
  c.restarts = 3;
  c.num_sentences = 2;
  c.max_decode_len = 12;
  c.estimate.cg.max_iter = 15;
  c.output_dir = out;
  return c;
}

}  // namespace

TEST_CASE("config JSON") {
  ExperimentConfig c = tiny_config("/tmp/x");
  c.checkpoint = "m.ckpt";
  c.estimate.cg.f_target = 0.25;
  c.optimizer = Optimizer::Adam;
  const ExperimentConfig back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.estimate.cg.f_target == 0.25);
  CHECK(back.optimizer == Optimizer::Adam);
  CHECK(std::isinf(config_from_json(R"({"cg": {"f_target": null}})").estimate.cg.f_target));
  CHECK(config_from_json("{}").grid == std::vector<std::size_t>{16, 32, 64, 128, 256, 512});
  CHECK(config_from_json("{}").restarts == 10);
  CHECK_THROWS_AS(config_from_json(R"({"gird": [1]})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"cg": {"c1": 0.5, "c2": 0.4}})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"grid": [0]})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"beam_widths": [0]})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"optimizer": "sgd"})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json(R"({"restarts": "ten"})"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json("[1"), std::invalid_argument);

  const std::uint64_t h = config_hash(c, 1, 2);
  ExperimentConfig other = c;
  other.jobs = 4;
  other.output_dir = "/elsewhere";
  CHECK(config_hash(other, 1, 2) == h);
  other.base_seed = 2;
  CHECK(config_hash(other, 1, 2) != h);
  CHECK(config_hash(c, 3, 2) != h);
  CHECK(config_hash(c, 1, 3) != h);
}

TEST_CASE("select_probe") {
  CHECK(select_probe(5, 0, 1) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(select_probe(5, 9, 1).size() == 5);
  const auto a = select_probe(1000, 50, 7);
  CHECK(a.size() == 50);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::set(a.begin(), a.end()).size() == 50);
  CHECK(a == select_probe(1000, 50, 7));
  CHECK(a != select_probe(1000, 50, 8));
}

TEST_CASE("run_sweep counts, determinism and re-scoring") {
  const LmParameters p = tiny_params();
  const Corpus probe = tiny_probe();
  TempDir d1("a"), d2("b"), d3("c");
  ExperimentConfig c = tiny_config(d1.path);
  c.grid = {4, 16};
  const auto before = p.checksum();
  const SweepReport r = run_sweep(c, p, probe);
  CHECK(r.records.size() == 12);
  CHECK(p.checksum() == before);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> keys;
  for (const auto& rec : r.records) keys.insert(rec.key());
  CHECK(keys.size() == 12);
  for (const auto& rec : r.records) {
    CHECK(rec.score == score_sentence_pair(rec.ref, rec.decoded));
    CHECK(rec.estimate.final_nll <= rec.estimate.initial_nll);
  }

  for (const char* f : {"records.jsonl", "aggregates.csv", "resolved_config.json", "model_checksum.txt",
                        "report.json", "journal.jsonl"})
    CHECK(fs::exists(d1.path / f));

  c.output_dir = d2.path;
  run_sweep(c, p, probe);
  CHECK(slurp(d1.path / "records.jsonl") == slurp(d2.path / "records.jsonl"));
  CHECK(slurp(d1.path / "aggregates.csv") == slurp(d2.path / "aggregates.csv"));

  c.output_dir = d3.path;
  c.jobs = 3;
  run_sweep(c, p, probe);
  CHECK(slurp(d1.path / "records.jsonl") == slurp(d3.path / "records.jsonl"));

  const SweepReport loaded = load_report(d1.path);
  REQUIRE(loaded.records.size() == r.records.size());
  for (std::size_t i = 0; i < loaded.records.size(); ++i) {
    const auto& rec = loaded.records[i];
    CHECK(rec.key() == r.records[i].key());
    CHECK(score_sentence_pair(rec.ref, rec.decoded) == rec.score);
    CHECK(rec.decode_log_prob == r.records[i].decode_log_prob);
  }
  CHECK(loaded.aggregates == r.aggregates);
  CHECK(loaded.model_checksum == before);
}

TEST_CASE("interrupted sweeps resume from the journal") {
  const LmParameters p = tiny_params();
  const Corpus probe = tiny_probe();
  TempDir full("full"), part("part");
  ExperimentConfig c = tiny_config(full.path);
  run_sweep(c, p, probe);

  c.output_dir = part.path;
  run_sweep(c, p, probe);
  // Keep five journal lines and a torn sixth, drop the outputs.
  std::istringstream in(slurp(part.path / "journal.jsonl"));
  std::string line, kept;
  for (int i = 0; i < 5 && std::getline(in, line); ++i) kept += line + "\n";
  std::getline(in, line);
  kept += line.substr(0, line.size() / 2);
  {
    std::ofstream out(part.path / "journal.jsonl", std::ios::trunc);
    out << kept;
  }
  fs::remove(part.path / "records.jsonl");
  const SweepReport resumed = run_sweep(c, p, probe);
  CHECK(resumed.resumed == 5);
  CHECK(slurp(full.path / "records.jsonl") == slurp(part.path / "records.jsonl"));

  // A different config hash must not reuse cells.
  c.base_seed = 99;
  CHECK(run_sweep(c, p, probe).resumed == 0);
}

TEST_CASE("file inputs are checked before work starts") {
  TempDir d("missing");
  ExperimentConfig c = tiny_config(d.path / "out");
  c.checkpoint = d.path / "nope.ckpt";
  c.probe = d.path / "nope.ids";
  CHECK_THROWS_AS(run_sweep(c), std::runtime_error);
  CHECK_FALSE(fs::exists(d.path / "out"));

  const LmParameters p = tiny_params();
  save_checkpoint(p, d.path / "m.ckpt");
  save_ids(tiny_probe(), d.path / "p.ids");
  c.checkpoint = d.path / "m.ckpt";
  CHECK_THROWS_AS(run_sweep(c), std::runtime_error);
  c.probe = d.path / "p.ids";
  const SweepReport r = run_sweep(c);
  CHECK(r.records.size() == 2 * 3 * 3);

  ExperimentConfig bad = tiny_config();
  bad.grid = {12};  // not a multiple of d* = 8
  CHECK_THROWS_AS(run_sweep(bad, p, tiny_probe()), std::invalid_argument);
  Corpus out_of_vocab;
  out_of_vocab.sentences = {{3, 40, 1}};
  CHECK_THROWS(run_sweep(tiny_config(), p, out_of_vocab));
}

TEST_CASE("effective dimension") {
  const std::map<std::size_t, double> em{{16, 0.3}, {32, 0.8}, {64, 0.9}};
  CHECK(effective_dimension(em, 0.75) == 32u);
  CHECK_FALSE(effective_dimension(em, 0.95).has_value());
  CHECK(effective_dimension(em, 0.0) == 16u);
  CHECK(unconstrained_effective_dimension({{16, 0.3}, {32, 0.9}, {64, 0.9}}) == 32u);
  CHECK(unconstrained_effective_dimension({{16, 0.3}, {32, 0.5}, {64, 0.9}}) == 64u);
  CHECK(unconstrained_effective_dimension({{16, 0.5}, {32, 0.5}, {64, 0.5}}) == 16u);
  CHECK_THROWS_AS(effective_dimension(std::map<std::size_t, double>{}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(unconstrained_effective_dimension(std::map<std::size_t, double>{}), std::invalid_argument);
  CHECK_THROWS_AS(effective_dimension(SweepReport{}, 0.5), std::invalid_argument);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::size_t, double> m;
    for (std::size_t d = 4; d <= 256; d *= 2) m[d] = u(rng);
    const double t1 = u(rng), t2 = u(rng);
    const auto a = effective_dimension(m, std::min(t1, t2)), b = effective_dimension(m, std::max(t1, t2));
    if (a && b) CHECK(*a <= *b);
    if (b) CHECK(a.has_value());
  }

  const SweepReport r = run_sweep(tiny_config(), tiny_params(), tiny_probe());
  const auto em_r = mean_em_by_dim(r.aggregates, "tiny");
  CHECK(em_r.size() == 3);
  CHECK(effective_dimension(r, -1.0) == 4u);
  CHECK(unconstrained_effective_dimension(r) == unconstrained_effective_dimension(em_r));
}

TEST_CASE("plot data") {
  const SweepReport r = run_sweep(tiny_config(), tiny_params(), tiny_probe());
  std::ostringstream os;
  emit_plot_data(r, os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "metric,d_prime,bucket,mean,sigma");
  std::set<std::pair<std::string, std::string>> curves;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    REQUIRE(f.size() == 5);
    CHECK(std::stod(f[4]) >= 0.0);
    curves.insert({f[0], f[1]});
  }
  CHECK(curves.size() == 3 * 3);
  CHECK_THROWS_AS(emit_plot_data(SweepReport{}, os), std::invalid_argument);
}

TEST_CASE("beam width study reuses estimates") {
  TempDir d("beam");
  const LmParameters p = tiny_params();
  save_checkpoint(p, d.path / "m.ckpt");
  save_ids(tiny_probe(), d.path / "p.ids");
  ExperimentConfig c = tiny_config(d.path / "out");
  c.checkpoint = d.path / "m.ckpt";
  c.probe = d.path / "p.ids";
  const auto rows = beam_width_study(c, {5, 10, 20});
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) CHECK(row.bleu.size() == 3);
  const SweepReport r = load_report(d.path / "out");
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::map<std::size_t, const RecoveryRecord*>> cells;
  for (const auto& rec : r.records) cells[{rec.sentence, rec.code_dim, rec.restart}][rec.width] = &rec;
  for (const auto& [k, by_w] : cells) {
    REQUIRE(by_w.size() == 3);
    CHECK(by_w.at(5)->estimate.final_nll == by_w.at(20)->estimate.final_nll);
    if (by_w.at(5)->finished && by_w.at(20)->finished)
      CHECK(by_w.at(20)->decode_log_prob >= by_w.at(5)->decode_log_prob);
  }
  const std::string csv = slurp(d.path / "out" / "beam_widths.csv");
  CHECK(csv.rfind("model,d_prime,bleu_w5,bleu_w10,bleu_w20,", 0) == 0);
}

TEST_CASE("random sequence study") {
  const LmParameters p = tiny_params();
  TempDir d("rand");
  ExperimentConfig c = tiny_config(d.path);
  const SweepReport a = random_sequence_study(c, p, {2, 3, 4}, 5);
  c.output_dir.clear();
  const SweepReport b = random_sequence_study(c, p, {2, 3, 4}, 5);
  CHECK(a.records.size() == 3 * 3 * 3);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i)
    CHECK(to_json_line(a.records[i], 0) == to_json_line(b.records[i], 0));
  CHECK(fs::exists(d.path / "random_probe.ids"));
  CHECK(load_ids(d.path / "random_probe.ids").sentences[1].size() == 4);
  CHECK(a.records.front().ref.size() == 2);
}

TEST_CASE("synthetic grammar") {
  const SynthGrammar g(7);
  const auto a = g.generate(2000, 1);
  CHECK(a == g.generate(2000, 1));
  CHECK(a != g.generate(2000, 2));
  std::set<std::string> words;
  std::size_t short_ones = 0, long_ones = 0;
  for (const auto& s : a) {
    const auto t = tokenize(s);
    short_ones += t.size() <= 5;
    long_ones += t.size() >= 11;
    for (const auto& w : t) words.insert(w);
  }
  CHECK(short_ones > 50);
  CHECK(long_ones > 50);
  CHECK(words.size() > 200);
  CHECK(words.size() <= g.lexicon_size() + 2);
}
