// SPDX-License-Identifier: Apache-2.0
//
// Dataset ingestion: MASSIVE-style JSONL utterances, CoNLL NER files,
// source/target pairing, deterministic splitting, test-set filtering.

#pragma once

#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xlat/codec.hpp"

namespace xlat::corpus {

struct Example {
  std::string id;
  std::string locale;
  codec::LabeledSentence plain;                  // all labels unset
  std::optional<codec::LabeledSentence> gold;    // same tokens as plain
};

struct ParallelExample {
  std::string id;
  Example source;
  Example target;
};

struct Diagnostic {
  std::string where;    // "line 12", example id, ...
  std::string kind;     // MalformedRecord, TokenMismatch, ...
  std::string message;
};

struct LoadResult {
  std::vector<Example> examples;
  std::vector<Diagnostic> diagnostics;
};

/// JSONL with fields id, locale, utt, annot_utt. Records whose annot_utt
/// does not parse against `labels`, or whose parsed tokens differ from the
/// tokenized utt, are skipped with a diagnostic. When `locale` is non-empty,
/// records with a different locale are skipped silently.
LoadResult load_massive(const std::filesystem::path& path,
                        std::string_view locale, const codec::LabelSet& labels);

/// CoNLL two-column file: token and BIO tag per line, blank line between
/// sentences. B-X/I-X collapse to label X, O to unlabeled. A dangling I-X
/// is repaired to B-X with a diagnostic. Sentence ids are the 0-based
/// position in the file.
LoadResult load_ner(const std::filesystem::path& path,
                    std::string_view locale);

struct PairResult {
  std::vector<ParallelExample> pairs;
  std::vector<Diagnostic> diagnostics;
};

/// Inner join on id; output order follows the target list. Unmatched ids on
/// either side are reported as diagnostics, as are pairs whose two sides
/// share a locale.
PairResult pair_parallel(const std::vector<Example>& source,
                         const std::vector<Example>& target);

struct SplitRatio {
  int train = 8;
  int validation = 1;
  int test = 1;
};

template <typename T>
struct DatasetSplit {
  std::vector<T> train;
  std::vector<T> validation;
  std::vector<T> test;
  std::uint64_t seed = 0;
};

namespace detail {

/// Fisher-Yates with an explicit engine so the shuffle is identical on every
/// platform (std::shuffle's draw sequence is implementation-defined).
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace detail

/// Deterministic shuffle under `seed`, then contiguous slices. Validation
/// and test sizes are floor allocations; the remainder goes to train.
template <typename T>
DatasetSplit<T> split_dataset(std::vector<T> examples, SplitRatio ratio,
                              std::uint64_t seed) {
  if (ratio.train <= 0 || ratio.validation <= 0 || ratio.test <= 0) {
    throw std::invalid_argument("split ratio parts must be positive");
  }
  detail::deterministic_shuffle(examples, seed);
  const std::size_t n = examples.size();
  const std::size_t total =
      static_cast<std::size_t>(ratio.train + ratio.validation + ratio.test);
  const std::size_t n_validation =
      n * static_cast<std::size_t>(ratio.validation) / total;
  const std::size_t n_test = n * static_cast<std::size_t>(ratio.test) / total;
  const std::size_t n_train = n - n_validation - n_test;

  DatasetSplit<T> out;
  out.seed = seed;
  out.train.assign(examples.begin(), examples.begin() + n_train);
  out.validation.assign(examples.begin() + n_train,
                        examples.begin() + n_train + n_validation);
  out.test.assign(examples.begin() + n_train + n_validation, examples.end());
  return out;
}

/// Keep only examples whose gold carries at least one label. Throws
/// std::invalid_argument when any example lacks gold.
std::vector<Example> filter_test_labeled(const std::vector<Example>& examples);

/// Same rule applied to the target side of each pair.
std::vector<ParallelExample> filter_test_labeled(
    const std::vector<ParallelExample>& pairs);

}  // namespace xlat::corpus
