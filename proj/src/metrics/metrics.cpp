// SPDX-License-Identifier: Apache-2.0
#include "rss/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

namespace rss {

namespace {

void require_ref(const TokenSeq& ref, const char* who) {
  if (ref.empty()) throw std::invalid_argument(std::string(who) + ": empty reference");
}

}  // namespace

double exact_match(const TokenSeq& ref, const TokenSeq& hyp) {
  require_ref(ref, "exact_match");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < ref.size() && t < hyp.size(); ++t) hits += ref[t] == hyp[t];
  return static_cast<double>(hits) / static_cast<double>(ref.size());
}

double prefix_match(const TokenSeq& ref, const TokenSeq& hyp) {
  require_ref(ref, "prefix_match");
  std::size_t k = 0;
  while (k < ref.size() && k < hyp.size() && ref[k] == hyp[k]) ++k;
  return static_cast<double>(k) / static_cast<double>(ref.size());
}

BleuStats bleu_stats(const TokenSeq& ref, const TokenSeq& hyp) {
  require_ref(ref, "bleu");
  BleuStats s;
  s.max_n = std::min<std::size_t>(4, ref.size());
  s.hyp_len = hyp.size();
  s.ref_len = ref.size();
  for (std::size_t n = 1; n <= s.max_n; ++n) {
    std::map<TokenSeq, std::size_t> ref_counts, hyp_counts;
    for (std::size_t i = 0; i + n <= ref.size(); ++i) ++ref_counts[TokenSeq(ref.begin() + i, ref.begin() + i + n)];
    for (std::size_t i = 0; i + n <= hyp.size(); ++i) ++hyp_counts[TokenSeq(hyp.begin() + i, hyp.begin() + i + n)];
    std::size_t m = 0, total = 0;
    for (const auto& [gram, c] : hyp_counts) {
      total += c;
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) m += std::min(c, it->second);
    }
    s.matches[n - 1] = m;
    s.totals[n - 1] = total;
  }
  return s;
}

double bleu_from_stats(const BleuStats& s) {
  if (s.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < s.max_n; ++n) {
    if (s.matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
  }
  const double bp =
      s.hyp_len >= s.ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.hyp_len));
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(s.max_n));
}

double bleu(const TokenSeq& ref, const TokenSeq& hyp) { return bleu_from_stats(bleu_stats(ref, hyp)); }

SentenceScore score_sentence_pair(const TokenSeq& ref, const TokenSeq& hyp) {
  return {exact_match(ref, hyp), bleu(ref, hyp), prefix_match(ref, hyp)};
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::EM: return "em";
    case Metric::BLEU: return "bleu";
    case Metric::PM: return "pm";
  }
  return "unknown";
}

double value(const SentenceScore& s, Metric m) {
  switch (m) {
    case Metric::EM: return s.em;
    case Metric::BLEU: return s.bleu;
    case Metric::PM: return s.pm;
  }
  return 0.0;
}

std::string length_bucket(std::size_t len, std::size_t width) {
  if (len == 0 || width == 0) throw std::invalid_argument("length_bucket: length and width must be positive");
  const std::size_t lo = (len - 1) / width * width + 1;
  return std::to_string(lo) + "-" + std::to_string(lo + width - 1);
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::vector<AggregateRecord> aggregate(const std::vector<ScoredRestart>& records, std::size_t bucket_width) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  // (model, d', sentence) -> restarts
  std::map<std::tuple<std::string, std::size_t, std::size_t>, std::vector<const ScoredRestart*>> by_sentence;
  for (const auto& r : records) by_sentence[{r.model, r.code_dim, r.sentence}].push_back(&r);

  // (model, d', metric, bucket sort key, bucket) -> per-sentence values
  using Key = std::tuple<std::string, std::size_t, int, std::size_t, std::string>;
  std::map<Key, std::vector<double>> groups;
  for (const auto& [key, rs] : by_sentence) {
    const auto& [model, dim, sentence] = key;
    const std::size_t len = rs.front()->ref_len;
    for (const auto* r : rs)
      if (r->ref_len != len) throw std::invalid_argument("aggregate: inconsistent reference length for a sentence");
    for (Metric m : kMetrics) {
      std::vector<double> vals;
      for (const auto* r : rs) vals.push_back(value(r->score, m));
      double v;
      if (m == Metric::PM) {
        v = median(vals);
      } else {
        v = 0.0;
        for (double x : vals) v += x;
        v /= static_cast<double>(vals.size());
      }
      groups[{model, dim, static_cast<int>(m), 0, "all"}].push_back(v);
      groups[{model, dim, static_cast<int>(m), (len - 1) / bucket_width + 1, length_bucket(len, bucket_width)}]
          .push_back(v);
    }
  }

  std::vector<AggregateRecord> out;
  for (const auto& [key, vals] : groups) {
    AggregateRecord a;
    a.model = std::get<0>(key);
    a.code_dim = std::get<1>(key);
    a.metric = static_cast<Metric>(std::get<2>(key));
    a.bucket = std::get<4>(key);
    a.n = vals.size();
    for (double x : vals) a.mean += x;
    a.mean /= static_cast<double>(a.n);
    double ss = 0.0;
    for (double x : vals) ss += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(a.n));
    out.push_back(std::move(a));
  }
  return out;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRecord>& records) {
  const auto old_prec = out.precision(17);
  out << "model,d_prime,metric,bucket,mean,std,n\n";
  for (const auto& a : records)
    out << a.model << ',' << a.code_dim << ',' << to_string(a.metric) << ',' << a.bucket << ',' << a.mean << ','
        << a.std << ',' << a.n << '\n';
  out.precision(old_prec);
}

}  // namespace rss
