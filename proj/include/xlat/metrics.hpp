// SPDX-License-Identifier: Apache-2.0
//
// Scoring: token-level micro-F1 over LCS-matched positions, exact match,
// chrF++, and MAUVE over externally supplied embeddings.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "xlat/backend.hpp"
#include "xlat/codec.hpp"
#include "xlat/corpus.hpp"

namespace xlat::metrics {

class MetricError : public std::runtime_error {
 public:
  enum class Kind { DimensionMismatch, TooFewPoints, IdMismatch };
  MetricError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct F1Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  friend bool operator==(const F1Counts&, const F1Counts&) = default;
};

/// 2·TP / (2·TP + FP + FN); 1.0 when all three counts are zero.
double f1_from_counts(const F1Counts& counts);

/// Tokens are matched by longest common subsequence over token strings;
/// among maximum-length matchings the one with the most label agreements is
/// used, which makes the counts symmetric: swapping pred and ref swaps
/// fp and fn. TP = matched positions with equal present labels; FP/FN =
/// remaining labeled tokens on the pred/ref side.
F1Counts micro_f1(const codec::LabeledSentence& pred,
                  const codec::LabeledSentence& ref);

/// Equality after collapsing whitespace runs and trimming.
int exact_match(std::string_view pred_text, std::string_view ref_text);

/// chrF++: character n-grams of order 1..6 on whitespace-stripped
/// codepoints plus word n-grams of order 1..2, F-beta with beta=2 per
/// order, averaged over orders that have n-grams on either side, x100.
/// Both sides vacuous at every order (e.g. two empty strings) scores 100.
double chrf_pp(std::string_view pred_text, std::string_view ref_text);

struct MauveOptions {
  int n_clusters = 0;  // 0 = max(2, floor((|pred|+|ref|)/20))
  double c = 5.0;
  int n_lambda = 25;
  std::uint64_t seed = 0;
  int max_kmeans_iterations = 100;
};

/// Divergence-frontier area between the two embedding sets: joint seeded
/// k-means quantization, add-one-smoothed cluster histograms, KL curves on
/// a lambda grid, trapezoidal area with the (0,1)/(1,0) end points added.
double mauve_score(const std::vector<std::vector<double>>& pred,
                   const std::vector<std::vector<double>>& ref,
                   const MauveOptions& options = {});

struct PairScore {
  std::string id;
  F1Counts f1_counts;
  int em = 0;
  double chrf = 0.0;
};

struct RunReport {
  double micro_f1 = 0.0;
  double em_rate = 0.0;
  double chrf_mean = 0.0;
  std::optional<double> mauve;
  std::size_t n_examples = 0;
  std::size_t n_parse_failures = 0;
  std::size_t n_mauve = 0;  // embeddings actually sampled per side
  std::string config_digest;
  F1Counts totals;
  std::vector<PairScore> pairs;
};

/// Embeddings of the generated and reference texts, keyed by example id.
struct MauveInputs {
  std::unordered_map<std::string, std::vector<double>> pred;
  std::unordered_map<std::string, std::vector<double>> ref;
  MauveOptions options;
};

/// Scores one generation run against gold references. Results and refs must
/// cover the same ids. Unparsed predictions count as parse failures and
/// contribute only false negatives to F1, but their raw text still feeds
/// exact match and chrF++. MAUVE runs on a seeded sample of
/// min(mauve_sample, n) ids when embeddings are supplied.
RunReport evaluate_run(const std::vector<backend::GenerationResult>& results,
                       const std::vector<corpus::Example>& refs,
                       const MauveInputs* mauve = nullptr,
                       std::size_t mauve_sample = 500,
                       std::uint64_t seed = 0,
                       std::string config_digest = "");

}  // namespace xlat::metrics
