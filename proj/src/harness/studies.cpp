// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "rss/harness/experiment.hpp"
#include "rss/lm/checkpoint.hpp"

namespace rss {

std::vector<BeamStudyRow> beam_study_table(const SweepReport& report) {
  std::map<std::size_t, std::map<std::size_t, std::pair<double, std::size_t>>> bleu, lp;
  for (const auto& r : report.records) {
    auto& b = bleu[r.code_dim][r.width];
    b.first += r.score.bleu;
    ++b.second;
    auto& l = lp[r.code_dim][r.width];
    l.first += r.decode_log_prob;
    ++l.second;
  }
  std::vector<BeamStudyRow> rows;
  for (const auto& [dim, by_width] : bleu) {
    BeamStudyRow row;
    row.model = report.model_id;
    row.code_dim = dim;
    for (const auto& [w, acc] : by_width) row.bleu[w] = acc.first / static_cast<double>(acc.second);
    for (const auto& [w, acc] : lp[dim]) row.log_prob[w] = acc.first / static_cast<double>(acc.second);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<BeamStudyRow> beam_width_study(ExperimentConfig config, const std::vector<std::size_t>& widths,
                                           const SweepProgress& progress) {
  config.beam_widths = widths;
  const SweepReport report = run_sweep(config, progress);
  auto rows = beam_study_table(report);
  if (!config.output_dir.empty()) {
    std::ofstream out(config.output_dir / "beam_widths.csv");
    write_beam_study_csv(out, rows);
  }
  return rows;
}

void write_beam_study_csv(std::ostream& out, const std::vector<BeamStudyRow>& rows) {
  const auto old = out.precision(17);
  out << "model,d_prime";
  if (!rows.empty()) {
    for (const auto& [w, v] : rows.front().bleu) out << ",bleu_w" << w;
    for (const auto& [w, v] : rows.front().log_prob) out << ",log_prob_w" << w;
  }
  out << '\n';
  for (const auto& row : rows) {
    out << row.model << ',' << row.code_dim;
    for (const auto& [w, v] : row.bleu) out << ',' << v;
    for (const auto& [w, v] : row.log_prob) out << ',' << v;
    out << '\n';
  }
  out.precision(old);
}

SweepReport random_sequence_study(ExperimentConfig config, const LmParameters& params,
                                  const std::vector<std::size_t>& lengths, std::uint64_t seed,
                                  const SweepProgress& progress) {
  if (lengths.empty()) throw std::invalid_argument("random_sequence_study: no lengths");
  const Corpus probe = sample_random_sequences(params.config.vocab, lengths, seed);
  config.num_sentences = 0;
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    save_ids(probe, config.output_dir / "random_probe.ids");
  }
  return run_sweep(config, params, probe, progress);
}

void emit_plot_data(const SweepReport& report, std::ostream& out) {
  if (report.records.empty()) throw std::invalid_argument("emit_plot_data: empty report");
  const std::string label =
      aggregate_label(report.model_id, report.beam_widths.front(), report.beam_widths.size() > 1);
  struct Row {
    int metric;
    std::size_t dim, lo;
    const AggregateRecord* a;
  };
  std::vector<Row> rows;
  for (const auto& a : report.aggregates) {
    if (a.model != label || a.bucket == "all") continue;
    rows.push_back({static_cast<int>(a.metric), a.code_dim, std::stoul(a.bucket.substr(0, a.bucket.find('-'))), &a});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    return std::tie(x.metric, x.dim, x.lo) < std::tie(y.metric, y.dim, y.lo);
  });
  const auto old = out.precision(17);
  out << "metric,d_prime,bucket,mean,sigma\n";
  for (const auto& r : rows)
    out << to_string(r.a->metric) << ',' << r.dim << ',' << r.a->bucket << ',' << r.a->mean << ',' << r.a->std << '\n';
  out.precision(old);
}

}  // namespace rss
