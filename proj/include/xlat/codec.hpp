// SPDX-License-Identifier: Apache-2.0
//
// Bracketed-annotation codec. The surface form is the one the LLM reads and
// writes: plain tokens interleaved with groups like
//   will it be [weather_descriptor : sun] on [date : sunday]
// The in-memory form is a token sequence with one optional label per token.

#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace xlat::codec {

enum class TaskKind { SlotFilling, Ner };

std::string_view task_kind_name(TaskKind kind);  // "slot_filling" / "ner"
TaskKind task_kind_from_name(std::string_view name);

/// Ordered label inventory for one task. Loaded from the bundled tables
/// (labels/massive_slots.txt, labels/naamapadam_ner.txt) or built directly.
class LabelSet {
 public:
  LabelSet(TaskKind kind, std::vector<std::string> labels);

  /// One label name per line, UTF-8, '#' comments and blank lines ignored.
  static LabelSet load(const std::filesystem::path& file, TaskKind kind);

  TaskKind task_kind() const { return kind_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool contains(std::string_view name) const;

 private:
  TaskKind kind_;
  std::vector<std::string> labels_;
  std::unordered_set<std::string> index_;
};

/// Token sequence with per-token optional label; nullopt means unlabeled.
struct LabeledSentence {
  std::vector<std::string> tokens;
  std::vector<std::optional<std::string>> labels;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const LabeledSentence& other) const = default;

  /// Count of tokens carrying a label.
  std::size_t labeled_count() const;

  /// Throws std::invalid_argument on malformed shape: length mismatch,
  /// empty or whitespace-containing tokens, bare bracket/colon tokens.
  void validate() const;
};

class CodecError : public std::runtime_error {
 public:
  enum class Kind { UnbalancedBrackets, UnknownLabel, EmptyGroup };

  CodecError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Whitespace tokenization used everywhere in the harness (ASCII whitespace;
/// punctuation stays attached to its token).
std::vector<std::string> tokenize(std::string_view text);

/// Parse annotated surface text. Strict mode throws on unknown labels and
/// malformed groups; lenient mode degrades them to unlabeled tokens and
/// appends a note per incident to `warnings` (when given). Unbalanced
/// brackets fail in both modes.
LabeledSentence parse_annotated(std::string_view text, const LabelSet& labels,
                                bool strict,
                                std::vector<std::string>* warnings = nullptr);

/// Inverse of parse_annotated. Consecutive tokens with the same label merge
/// into a single bracket group; output is single-space separated.
std::string render_annotated(const LabeledSentence& z);

/// Same tokens, all labels cleared.
LabeledSentence strip_labels(LabeledSentence z);

}  // namespace xlat::codec
