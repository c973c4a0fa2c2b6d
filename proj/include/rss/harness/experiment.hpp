// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rss/estimate/backward.hpp"
#include "rss/estimate/forward.hpp"
#include "rss/metrics/metrics.hpp"

namespace rss {

/// Sweep settings. Stored as JSON; see config_to_json for the schema.
struct ExperimentConfig {
  std::string model_id = "model";
  std::filesystem::path checkpoint;
  std::filesystem::path probe;  // .ids file
  std::filesystem::path output_dir;
  std::vector<std::size_t> grid{16, 32, 64, 128, 256, 512};
  std::size_t restarts = 10;
  std::vector<std::size_t> beam_widths{5};
  std::uint64_t base_seed = 1;
  std::size_t num_sentences = 100;  // sampled from the probe file; 0 keeps all
  std::size_t max_decode_len = 100;
  Optimizer optimizer = Optimizer::ConjugateGradient;
  EstimateConfig estimate;
  std::size_t jobs = 1;

  void validate() const;
};

/// Throws std::invalid_argument on unknown keys or bad values. Missing keys
/// keep their defaults.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Hash of everything that determines the records: the result-relevant
/// config fields, the model checksum and the probe contents.
std::uint64_t config_hash(const ExperimentConfig& c, std::uint64_t model_checksum, std::uint64_t probe_hash);

std::uint64_t corpus_hash(const Corpus& corpus);

/// One (sentence, d', restart, beam width) cell.
struct RecoveryRecord {
  std::string model;
  std::size_t sentence = 0;
  std::size_t code_dim = 0;
  std::size_t restart = 0;
  std::size_t width = 0;
  TokenSeq ref;      // without <eos>
  TokenSeq decoded;  // without <eos>
  bool finished = false;
  double decode_log_prob = 0.0;
  EstimationResult estimate;  // z is not serialized
  SentenceScore score;

  auto key() const { return std::tuple(sentence, code_dim, restart, width); }
};

std::string to_json_line(const RecoveryRecord& r, std::uint64_t config_hash);
RecoveryRecord record_from_json(const std::string& line, std::uint64_t* config_hash = nullptr);

struct SweepReport {
  std::string model_id;
  std::uint64_t config_hash = 0;
  std::uint64_t model_checksum = 0;
  std::uint64_t base_seed = 0;
  std::vector<std::size_t> grid;
  std::vector<std::size_t> beam_widths;
  std::vector<std::size_t> sentences;  // probe indices
  std::size_t restarts = 0;
  std::size_t resumed = 0;  // cells taken from the journal
  std::vector<RecoveryRecord> records;  // sorted by key
  std::vector<AggregateRecord> aggregates;
};

/// Model label used in aggregates: model_id, plus "@w<width>" when several
/// beam widths are decoded.
std::string aggregate_label(const std::string& model_id, std::size_t width, bool several_widths);

std::vector<AggregateRecord> aggregate_records(const std::vector<RecoveryRecord>& records, bool several_widths);

using SweepProgress = std::function<void(const RecoveryRecord&, std::size_t done, std::size_t total)>;

/// Probe indices used by a sweep: all, or num_sentences drawn without
/// replacement with a seed derived from base_seed, in ascending order.
std::vector<std::size_t> select_probe(std::size_t probe_size, std::size_t num_sentences, std::uint64_t base_seed);

/// Estimate, decode and score every (sentence, d', restart) cell. With an
/// output_dir the run writes resolved_config.json, model_checksum.txt,
/// journal.jsonl (flushed per cell; matching cells are reused on re-runs),
/// records.jsonl (sorted), aggregates.csv and report.json.
SweepReport run_sweep(const ExperimentConfig& config, const LmParameters& params, const Corpus& probe,
                      const SweepProgress& progress = {});

/// Loads checkpoint and probe from the config paths; missing inputs fail
/// before any work starts.
SweepReport run_sweep(const ExperimentConfig& config, const SweepProgress& progress = {});

/// Reads records.jsonl and report.json back; aggregates are recomputed.
SweepReport load_report(const std::filesystem::path& dir);

/// Mean EM over all sentences per d' for one aggregate label.
std::map<std::size_t, double> mean_em_by_dim(const std::vector<AggregateRecord>& aggregates, const std::string& label);

/// Smallest d' whose mean EM exceeds tau.
std::optional<std::size_t> effective_dimension(const std::map<std::size_t, double>& mean_em, double tau);
std::optional<std::size_t> effective_dimension(const SweepReport& report, double tau);

/// Smallest d' attaining the best mean EM on the grid.
std::size_t unconstrained_effective_dimension(const std::map<std::size_t, double>& mean_em);
std::size_t unconstrained_effective_dimension(const SweepReport& report);

struct BeamStudyRow {
  std::string model;
  std::size_t code_dim = 0;
  std::map<std::size_t, double> bleu;         // width -> mean BLEU
  std::map<std::size_t, double> log_prob;     // width -> mean decoded log-prob
};

/// Decodes the same estimates at every width.
std::vector<BeamStudyRow> beam_width_study(ExperimentConfig config, const std::vector<std::size_t>& widths = {5, 10, 20},
                                           const SweepProgress& progress = {});
std::vector<BeamStudyRow> beam_study_table(const SweepReport& report);
void write_beam_study_csv(std::ostream& out, const std::vector<BeamStudyRow>& rows);

/// The sweep pipeline on uniform random token sequences of the given lengths.
SweepReport random_sequence_study(ExperimentConfig config, const LmParameters& params,
                                  const std::vector<std::size_t>& lengths, std::uint64_t seed,
                                  const SweepProgress& progress = {});

/// Length-bucket curves: columns metric, d_prime, bucket, mean, sigma.
void emit_plot_data(const SweepReport& report, std::ostream& out);

}  // namespace rss
