// SPDX-License-Identifier: Apache-2.0
// rss: command-line front end for corpus preparation, LM training,
// sentence-code estimation, decoding and recoverability sweeps.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "rss/estimate/backward.hpp"
#include "rss/estimate/forward.hpp"
#include "rss/harness/experiment.hpp"
#include "rss/harness/synth.hpp"
#include "rss/lm/checkpoint.hpp"
#include "rss/lm/train.hpp"
#include "rss/util/seed.hpp"

namespace fs = std::filesystem;
using namespace rss;

namespace {

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  auto out = open_out(p);
  for (const auto& l : lines) out << l << '\n';
}

// Overrides shared by sweep, beamstudy and randstudy.
struct SweepFlags {
  std::string config;
  std::optional<std::string> checkpoint, probe, out, model_id, optimizer;
  std::optional<std::vector<std::size_t>> grid, widths;
  std::optional<std::size_t> restarts, sentences, max_iter, jobs, max_len;
  std::optional<std::uint64_t> seed;
  std::optional<double> gtol, f_target;

  void add(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON config file (flags below override it)");
    app->add_option("--checkpoint", checkpoint, "model checkpoint");
    app->add_option("--probe", probe, "probe sentences (.ids)");
    app->add_option("-o,--out", out, "output directory");
    app->add_option("--model-id", model_id, "label written into records");
    app->add_option("--grid", grid, "d' values")->delimiter(',');
    app->add_option("--widths", widths, "beam widths")->delimiter(',');
    app->add_option("--restarts", restarts, "restarts per sentence");
    app->add_option("--sentences", sentences, "probe sentences to sample (0 = all)");
    app->add_option("--seed", seed, "base seed");
    app->add_option("--max-iter", max_iter, "optimizer iteration cap");
    app->add_option("--gtol", gtol, "gradient-norm tolerance");
    app->add_option("--f-target", f_target, "stop once the NLL is at or below this value");
    app->add_option("--optimizer", optimizer, "cg or adam")->check(CLI::IsMember({"cg", "adam"}));
    app->add_option("--max-len", max_len, "decode length cap (tokens, <eos> included)");
    app->add_option("-j,--jobs", jobs, "worker threads");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
    if (checkpoint) c.checkpoint = *checkpoint;
    if (probe) c.probe = *probe;
    if (out) c.output_dir = *out;
    if (model_id) c.model_id = *model_id;
    if (grid) c.grid = *grid;
    if (widths) c.beam_widths = *widths;
    if (restarts) c.restarts = *restarts;
    if (sentences) c.num_sentences = *sentences;
    if (seed) c.base_seed = *seed;
    if (max_iter) c.estimate.cg.max_iter = *max_iter;
    if (gtol) c.estimate.cg.gtol = *gtol;
    if (f_target) c.estimate.cg.f_target = *f_target;
    if (optimizer) c.optimizer = *optimizer == "adam" ? Optimizer::Adam : Optimizer::ConjugateGradient;
    if (max_len) c.max_decode_len = *max_len;
    if (jobs) c.jobs = *jobs;
    c.validate();
    return c;
  }
};

SweepProgress progress_printer(bool quiet) {
  if (quiet) return {};
  return [](const RecoveryRecord& r, std::size_t done, std::size_t total) {
    std::cerr << "\r[" << done << "/" << total << "] sentence " << r.sentence << " d'=" << r.code_dim << " restart "
              << r.restart << " em=" << std::fixed << std::setprecision(3) << r.score.em << "   " << std::flush;
    if (done == total) std::cerr << '\n';
  };
}

void print_summary(const SweepReport& r) {
  for (const auto& a : r.aggregates)
    if (a.bucket == "all")
      std::cout << a.model << " d'=" << a.code_dim << ' ' << to_string(a.metric) << ' ' << a.mean << " +- " << a.std
                << " (n=" << a.n << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reparametrized sentence space toolkit"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "no progress output");

  // synth
  auto* synth = app.add_subcommand("synth", "write sentences from the built-in synthetic grammar");
  std::size_t synth_n = 1000;
  std::uint64_t synth_seed = 1, synth_lex = 7;
  std::string synth_out;
  synth->add_option("-n,--count", synth_n, "number of sentences");
  synth->add_option("--seed", synth_seed, "sentence seed");
  synth->add_option("--lexicon-seed", synth_lex, "lexicon seed");
  synth->add_option("-o,--out", synth_out, "output text file")->required();

  // bpe-train
  auto* bpe_cmd = app.add_subcommand("bpe-train", "learn BPE merges from text files");
  std::vector<std::string> bpe_inputs;
  std::size_t bpe_merges = 1000;
  std::string bpe_out;
  bpe_cmd->add_option("-i,--input", bpe_inputs, "text files, one sentence per line")->required()->check(CLI::ExistingFile);
  bpe_cmd->add_option("-m,--merges", bpe_merges, "number of merges");
  bpe_cmd->add_option("-o,--out", bpe_out, "merges file")->required();

  // prep
  auto* prep = app.add_subcommand("prep", "tokenize, BPE-encode and map text to id files");
  std::vector<std::string> prep_inputs;
  std::string prep_bpe, prep_vocab, prep_out;
  bool prep_build_vocab = false;
  std::size_t prep_min_count = 1, prep_max_len = 100;
  prep->add_option("-i,--input", prep_inputs, "text files")->required()->check(CLI::ExistingFile);
  prep->add_option("--bpe", prep_bpe, "merges file")->required()->check(CLI::ExistingFile);
  prep->add_option("--vocab", prep_vocab, "vocabulary file (read, or written with --build-vocab)")->required();
  prep->add_flag("--build-vocab", prep_build_vocab, "build the vocabulary from these inputs");
  prep->add_option("--min-count", prep_min_count, "vocabulary frequency cut-off");
  prep->add_option("--max-len", prep_max_len, "drop sentences longer than this (ids, <eos> included)");
  prep->add_option("-o,--out", prep_out, "output .ids file")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train the LSTM language model");
  std::string tr_train, tr_dev, tr_vocab, tr_out, tr_log;
  LmConfig lmc;
  TrainConfig tc;
  train_cmd->add_option("--train", tr_train, "training .ids")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--dev", tr_dev, "development .ids")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--vocab", tr_vocab, "vocabulary file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--layers", lmc.layers, "LSTM layers");
  train_cmd->add_option("--units", lmc.units, "units per layer");
  train_cmd->add_option("--dropout", lmc.dropout, "dropout rate");
  train_cmd->add_option("--lr", tc.lr, "Adam learning rate");
  train_cmd->add_option("--batch", tc.batch_size, "sentences per minibatch");
  train_cmd->add_option("--epochs", tc.epochs, "passes over the training data");
  train_cmd->add_option("--eval-interval", tc.eval_interval, "minibatches between dev evaluations");
  train_cmd->add_option("--clip", tc.clip_norm, "global gradient-norm clip");
  train_cmd->add_option("--seed", tc.seed, "seed");
  train_cmd->add_option("--threads", tc.threads, "gradient workers per minibatch");
  train_cmd->add_option("-o,--out", tr_out, "checkpoint path")->required();
  train_cmd->add_option("--log", tr_log, "JSON-lines training log");

  // ppl
  auto* ppl = app.add_subcommand("ppl", "perplexity of an id file");
  std::string ppl_model, ppl_data;
  ppl->add_option("--model", ppl_model, "checkpoint")->required()->check(CLI::ExistingFile);
  ppl->add_option("--data", ppl_data, ".ids file")->required()->check(CLI::ExistingFile);

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "sample sentences from the model");
  std::string sm_model, sm_vocab;
  std::size_t sm_n = 10, sm_len = 100;
  std::uint64_t sm_seed = 1;
  sample_cmd->add_option("--model", sm_model, "checkpoint")->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--vocab", sm_vocab, "vocabulary (prints ids when omitted)")->check(CLI::ExistingFile);
  sample_cmd->add_option("-n,--count", sm_n, "samples");
  sample_cmd->add_option("--max-len", sm_len, "length cap");
  sample_cmd->add_option("--seed", sm_seed, "seed");

  // estimate
  auto* est = app.add_subcommand("estimate", "find sentence codes z for sentences of an id file");
  std::string es_model, es_data, es_out, es_opt = "cg";
  std::vector<std::size_t> es_sentences;
  std::size_t es_dim = 0, es_restarts = 1;
  std::uint64_t es_seed = 1;
  EstimateConfig ec;
  est->add_option("--model", es_model, "checkpoint")->required()->check(CLI::ExistingFile);
  est->add_option("--data", es_data, ".ids file")->required()->check(CLI::ExistingFile);
  est->add_option("--sentence", es_sentences, "sentence indices (default: all)")->delimiter(',');
  est->add_option("--dprime", es_dim, "code dimension d'")->required();
  est->add_option("--restarts", es_restarts, "restarts per sentence");
  est->add_option("--seed", es_seed, "base seed");
  est->add_option("--max-iter", ec.cg.max_iter, "iteration cap");
  est->add_option("--gtol", ec.cg.gtol, "gradient-norm tolerance");
  est->add_option("--f-target", ec.cg.f_target, "stop once the NLL is at or below this value");
  est->add_option("--optimizer", es_opt, "cg or adam")->check(CLI::IsMember({"cg", "adam"}));
  est->add_option("-o,--out", es_out, "JSON-lines output (stdout when omitted)");

  // decode
  auto* dec = app.add_subcommand("decode", "beam-decode sentences from estimated codes");
  std::string dc_model, dc_est, dc_vocab, dc_out;
  BeamConfig bc;
  dec->add_option("--model", dc_model, "checkpoint")->required()->check(CLI::ExistingFile);
  dec->add_option("--estimates", dc_est, "output of `rss estimate`")->required()->check(CLI::ExistingFile);
  dec->add_option("--width", bc.width, "beam width");
  dec->add_option("--max-len", bc.max_len, "length cap (tokens, <eos> included)");
  dec->add_option("--vocab", dc_vocab, "vocabulary; adds detokenized text to stderr")->check(CLI::ExistingFile);
  dec->add_option("-o,--out", dc_out, "JSON-lines output (stdout when omitted)");

  // sweep / beamstudy / randstudy
  auto* sweep = app.add_subcommand("sweep", "estimate, decode and score every (sentence, d', restart) cell");
  SweepFlags sweep_flags;
  sweep_flags.add(sweep);
  auto* beam = app.add_subcommand("beamstudy", "BLEU for several beam widths on the same estimates");
  SweepFlags beam_flags;
  beam_flags.add(beam);
  auto* rnd = app.add_subcommand("randstudy", "the sweep pipeline on uniform random token sequences");
  SweepFlags rnd_flags;
  rnd_flags.add(rnd);
  std::vector<std::size_t> rnd_lengths;
  std::uint64_t rnd_seed = 1;
  rnd->add_option("--lengths", rnd_lengths, "one random sequence per listed length")->required()->delimiter(',');
  rnd->add_option("--random-seed", rnd_seed, "seed for the sequences");

  // effdim / plotdata
  auto* eff = app.add_subcommand("effdim", "effective dimension from a sweep output directory");
  std::string ef_dir;
  std::vector<double> ef_tau;
  eff->add_option("--report", ef_dir, "sweep output directory")->required()->check(CLI::ExistingDirectory);
  eff->add_option("--tau", ef_tau, "target mean EM values")->delimiter(',');
  auto* plot = app.add_subcommand("plotdata", "length-bucket curves from a sweep output directory");
  std::string pl_dir, pl_out;
  plot->add_option("--report", pl_dir, "sweep output directory")->required()->check(CLI::ExistingDirectory);
  plot->add_option("-o,--out", pl_out, "CSV output (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      write_lines(synth_out, SynthGrammar(synth_lex).generate(synth_n, synth_seed));
    } else if (bpe_cmd->parsed()) {
      std::vector<std::vector<std::string>> sentences;
      for (const auto& f : bpe_inputs)
        for (const auto& line : read_lines(f)) sentences.push_back(tokenize(line));
      const BpeModel m = bpe_train(sentences, bpe_merges);
      m.save(bpe_out);
      std::cout << "learned " << m.merges().size() << " merges\n";
    } else if (prep->parsed()) {
      const BpeModel bpe = BpeModel::load(prep_bpe);
      std::vector<fs::path> files(prep_inputs.begin(), prep_inputs.end());
      if (prep_build_vocab) {
        std::vector<std::vector<std::string>> enc;
        for (const auto& f : files)
          for (const auto& line : read_lines(f)) enc.push_back(bpe.encode_tokens(tokenize(line)));
        build_vocabulary(enc, prep_min_count).save(prep_vocab);
      }
      const Vocabulary vocab = Vocabulary::load(prep_vocab);
      const Corpus c = build_corpus(files, bpe, vocab, prep_max_len);
      save_ids(c, prep_out);
      std::cout << c.size() << " sentences, " << c.token_count() << " tokens, vocabulary " << vocab.size()
                << ", dropped " << c.dropped_too_long << " long and " << c.dropped_empty << " empty\n";
    } else if (train_cmd->parsed()) {
      lmc.vocab = Vocabulary::load(tr_vocab).size();
      const Corpus train_c = load_ids(tr_train, Split::Train), dev = load_ids(tr_dev, Split::Dev);
      std::ofstream log;
      if (!tr_log.empty()) log = open_out(tr_log);
      const TrainResult r = train(train_c, dev, lmc, tc, [&](const TrainLogRecord& rec) {
        if (log.is_open()) log << to_json_line(rec) << '\n' << std::flush;
        if (!quiet) std::cerr << "step " << rec.step << " lr " << rec.lr << " dev ppl " << rec.dev_ppl << '\n';
      });
      save_checkpoint(r.params, tr_out);
      std::cout << "dev perplexity " << r.log.back().dev_ppl << ", checksum " << std::hex << r.params.checksum()
                << std::dec << '\n';
    } else if (ppl->parsed()) {
      const LmParameters p = load_checkpoint(ppl_model);
      std::cout << perplexity(p, load_ids(ppl_data)) << '\n';
    } else if (sample_cmd->parsed()) {
      const LmParameters p = load_checkpoint(sm_model);
      std::optional<Vocabulary> vocab;
      if (!sm_vocab.empty()) vocab = Vocabulary::load(sm_vocab);
      for (std::size_t i = 0; i < sm_n; ++i) {
        const TokenSeq s = sample(p, sm_len, derive_seed(sm_seed, {i}));
        if (vocab) {
          std::cout << detokenize(s, *vocab) << '\n';
        } else {
          for (std::size_t k = 0; k < s.size(); ++k) std::cout << (k ? " " : "") << s[k];
          std::cout << '\n';
        }
      }
    } else if (est->parsed()) {
      const LmParameters p = load_checkpoint(es_model);
      const Corpus data = load_ids(es_data, Split::Probe);
      if (es_sentences.empty())
        for (std::size_t i = 0; i < data.size(); ++i) es_sentences.push_back(i);
      std::ofstream file;
      if (!es_out.empty()) file = open_out(es_out);
      std::ostream& out = es_out.empty() ? std::cout : file;
      for (std::size_t s : es_sentences) {
        if (s >= data.size()) throw std::out_of_range("sentence index " + std::to_string(s) + " out of range");
        for (std::size_t k = 0; k < es_restarts; ++k) {
          const std::uint64_t rs = restart_seed(es_seed, s, k);
          EstimationResult r = es_opt == "adam" ? estimate_adam(data.sentences[s], p, es_dim, rs, ec)
                                                : estimate(data.sentences[s], p, es_dim, rs, ec);
          r.restart = k;
          out << to_json_line(r, s) << '\n' << std::flush;
          if (!quiet)
            std::cerr << "sentence " << s << " restart " << k << ": nll " << r.initial_nll << " -> " << r.final_nll
                      << " (" << r.status << ", " << r.iterations << " iterations)\n";
        }
      }
    } else if (dec->parsed()) {
      const LmParameters p = load_checkpoint(dc_model);
      std::optional<Vocabulary> vocab;
      if (!dc_vocab.empty()) vocab = Vocabulary::load(dc_vocab);
      std::ofstream file;
      if (!dc_out.empty()) file = open_out(dc_out);
      std::ostream& out = dc_out.empty() ? std::cout : file;
      for (const auto& line : read_lines(dc_est)) {
        if (line.empty()) continue;
        std::size_t sid = 0;
        const EstimationResult e = estimation_from_json(line, &sid);
        const Hypothesis h = beam_decode(p, projection_of(e, p), e.z, bc);
        out << to_json_line(h, sid, e.restart, bc.width) << '\n';
        if (vocab && !quiet) std::cerr << sid << '/' << e.restart << ": " << detokenize(h.tokens, *vocab) << '\n';
      }
    } else if (sweep->parsed()) {
      const ExperimentConfig c = sweep_flags.resolve();
      const SweepReport r = run_sweep(c, progress_printer(quiet));
      print_summary(r);
      if (r.resumed) std::cout << r.resumed << " cells reused from the journal\n";
    } else if (beam->parsed()) {
      ExperimentConfig c = beam_flags.resolve();
      const std::vector<std::size_t> widths =
          beam_flags.widths ? *beam_flags.widths : std::vector<std::size_t>{5, 10, 20};
      write_beam_study_csv(std::cout, beam_width_study(c, widths, progress_printer(quiet)));
    } else if (rnd->parsed()) {
      ExperimentConfig c = rnd_flags.resolve();
      if (!rnd_flags.model_id && !c.model_id.empty()) c.model_id += "-random";
      const LmParameters p = load_checkpoint(c.checkpoint);
      print_summary(random_sequence_study(c, p, rnd_lengths, rnd_seed, progress_printer(quiet)));
    } else if (eff->parsed()) {
      const SweepReport r = load_report(ef_dir);
      std::cout << "unconstrained " << unconstrained_effective_dimension(r) << '\n';
      for (double t : ef_tau) {
        const auto d = effective_dimension(r, t);
        std::cout << "tau " << t << ' ' << (d ? std::to_string(*d) : "none") << '\n';
      }
    } else if (plot->parsed()) {
      const SweepReport r = load_report(pl_dir);
      if (pl_out.empty()) {
        emit_plot_data(r, std::cout);
      } else {
        auto out = open_out(pl_out);
        emit_plot_data(r, out);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
