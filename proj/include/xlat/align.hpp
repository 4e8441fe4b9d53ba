// SPDX-License-Identifier: Apache-2.0
//
// IBM Model 1 lexical translation, alignment extraction, and the
// alignment-driven target reordering + label projection used to build
// masqueraded training text.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xlat/codec.hpp"

namespace xlat::align {

/// Virtual source token every target word may align to; occupies source
/// position -1 so it never participates in reordering.
inline constexpr const char* kNullWord = "<NULL>";

struct SentencePair {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

/// Conditional distribution p(target | source). Rows are source words.
class TranslationTable {
 public:
  using Row = std::unordered_map<std::string, double>;

  double prob(const std::string& source, const std::string& target) const;
  Row& row(const std::string& source) { return rows_[source]; }
  const std::unordered_map<std::string, Row>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

  /// TSV: source, target, probability — sorted for reproducible bytes.
  void save(const std::filesystem::path& path) const;
  static TranslationTable load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, Row> rows_;
};

struct TrainStats {
  std::vector<double> log_likelihood;     // one entry per iteration
  std::vector<double> max_row_sum_error;  // max |row sum - 1| per iteration
};

struct TrainOptions {
  int iterations = 5;
  bool use_null = true;
};

/// Initialization used by train_ibm1: uniform over the target words each
/// source word co-occurs with. Exposed for inspection in tests.
TranslationTable initial_table(const std::vector<SentencePair>& corpus,
                               bool use_null = true);

TranslationTable train_ibm1(const std::vector<SentencePair>& corpus,
                            const TrainOptions& options = {},
                            TrainStats* stats = nullptr);

/// One link per pair; source == -1 marks a NULL alignment.
struct AlignmentLink {
  int source = 0;
  int target = 0;
  friend bool operator==(const AlignmentLink&, const AlignmentLink&) = default;
};

using Alignment = std::vector<AlignmentLink>;

struct ExtractOptions {
  bool use_null = true;
  /// Intersect the forward argmax with the reverse argmax (per-source best
  /// target under the same table). NULL links never survive intersection.
  bool symmetrize = false;
};

/// Per-target argmax over source words (plus NULL when enabled); ties keep
/// the lowest source index. Links are sorted by target index.
Alignment extract_alignment(const TranslationTable& table,
                            const std::vector<std::string>& source,
                            const std::vector<std::string>& target,
                            const ExtractOptions& options = {});

/// "0-1 2-3" pairs, source-target, NULL links omitted.
std::string format_pharaoh(const Alignment& alignment);
Alignment parse_pharaoh(const std::string& text);

struct Reordering {
  /// Permutation: position i of the reordered sentence holds original
  /// target index permutation[i].
  std::vector<int> permutation;
  std::vector<std::string> tokens;
};

/// Rearranges target tokens into source order. Each target token anchors to
/// its aligned source position; unaligned tokens inherit the anchor of the
/// nearest preceding aligned token (tokens before any aligned token anchor
/// at -1). Runs with equal anchors stay in target order.
Reordering reorder_target(const std::vector<std::string>& target,
                          const Alignment& alignment);

/// Copies source labels onto aligned target tokens; unaligned and
/// NULL-aligned targets stay unlabeled.
codec::LabeledSentence project_labels(const codec::LabeledSentence& source,
                                      const std::vector<std::string>& target,
                                      const Alignment& alignment);

}  // namespace xlat::align
