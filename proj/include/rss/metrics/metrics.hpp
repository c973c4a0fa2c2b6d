// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <ostream>
#include <string>
#include <vector>

#include "rss/textprep/textprep.hpp"

namespace rss {

// All metrics take token sequences without <eos>.

struct SentenceScore {
  double em = 0.0;    // [0, 1]
  double bleu = 0.0;  // [0, 100]
  double pm = 0.0;    // [0, 1]

  bool operator==(const SentenceScore&) const = default;
};

/// Positional matches over the reference length; positions past the end of
/// hyp are mismatches. Throws std::invalid_argument on an empty reference.
double exact_match(const TokenSeq& ref, const TokenSeq& hyp);

/// Longest common prefix over the reference length.
double prefix_match(const TokenSeq& ref, const TokenSeq& hyp);

struct BleuStats {
  std::size_t max_n = 0;  // min(4, |ref|)
  std::array<std::size_t, 4> matches{};  // clipped n-gram matches
  std::array<std::size_t, 4> totals{};   // n-grams in hyp
  std::size_t hyp_len = 0, ref_len = 0;
};

BleuStats bleu_stats(const TokenSeq& ref, const TokenSeq& hyp);
double bleu_from_stats(const BleuStats& s);

/// Sentence BLEU on a 0-100 scale with brevity penalty, uniform weights over
/// orders 1..min(4, |ref|) and no further smoothing.
double bleu(const TokenSeq& ref, const TokenSeq& hyp);

SentenceScore score_sentence_pair(const TokenSeq& ref, const TokenSeq& hyp);

enum class Metric { EM, BLEU, PM };
std::string_view to_string(Metric m);
double value(const SentenceScore& s, Metric m);
inline constexpr std::array<Metric, 3> kMetrics{Metric::EM, Metric::BLEU, Metric::PM};

/// One restart of one sentence.
struct ScoredRestart {
  std::string model;
  std::size_t code_dim = 0;
  std::size_t sentence = 0;
  std::size_t ref_len = 0;
  SentenceScore score;
};

struct AggregateRecord {
  std::string model;
  std::size_t code_dim = 0;
  Metric metric = Metric::EM;
  std::string bucket;  // "all" or "lo-hi" over reference length
  double mean = 0.0;
  double std = 0.0;  // population standard deviation across sentences
  std::size_t n = 0;  // sentences

  bool operator==(const AggregateRecord&) const = default;
};

/// Length bucket label of width `width`: 1-5, 6-10, ...
std::string length_bucket(std::size_t len, std::size_t width = 5);

/// Per sentence: mean over restarts for EM and BLEU, median for PM. Then mean
/// and standard deviation across sentences, per (model, d', metric) for the
/// bucket "all" and for every length bucket present. Output is sorted.
std::vector<AggregateRecord> aggregate(const std::vector<ScoredRestart>& records, std::size_t bucket_width = 5);

double median(std::vector<double> v);

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRecord>& records);

}  // namespace rss
