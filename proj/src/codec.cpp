// SPDX-License-Identifier: Apache-2.0

#include "xlat/codec.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace xlat::codec {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

void warn(std::vector<std::string>* warnings, std::string message) {
  if (warnings != nullptr) warnings->push_back(std::move(message));
}

constexpr std::string_view kSeparator = " : ";

}  // namespace

std::string_view task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::SlotFilling:
      return "slot_filling";
    case TaskKind::Ner:
      return "ner";
  }
  throw std::logic_error("unreachable");
}

TaskKind task_kind_from_name(std::string_view name) {
  if (name == "slot_filling") return TaskKind::SlotFilling;
  if (name == "ner") return TaskKind::Ner;
  throw std::invalid_argument("unknown task kind: " + std::string(name));
}

LabelSet::LabelSet(TaskKind kind, std::vector<std::string> labels)
    : kind_(kind), labels_(std::move(labels)) {
  if (labels_.empty()) {
    throw std::invalid_argument("label set must be non-empty");
  }
  for (const auto& name : labels_) {
    if (name.empty()) {
      throw std::invalid_argument("label set contains an empty name");
    }
    if (!index_.insert(name).second) {
      throw std::invalid_argument("duplicate label name: " + name);
    }
  }
}

LabelSet LabelSet::load(const std::filesystem::path& file, TaskKind kind) {
  std::ifstream in(file);
  if (!in) {
    throw std::runtime_error("cannot open label table: " + file.string());
  }
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    names.push_back(line);
  }
  return LabelSet(kind, std::move(names));
}

bool LabelSet::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

std::size_t LabeledSentence::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(),
                    [](const auto& l) { return l.has_value(); }));
}

void LabeledSentence::validate() const {
  if (tokens.size() != labels.size()) {
    throw std::invalid_argument("token/label length mismatch");
  }
  for (const auto& tok : tokens) {
    if (tok.empty()) throw std::invalid_argument("empty token");
    if (std::any_of(tok.begin(), tok.end(), is_space)) {
      throw std::invalid_argument("token contains whitespace: " + tok);
    }
    if (tok == "[" || tok == "]" || tok == ":") {
      throw std::invalid_argument("bare bracket syntax token: " + tok);
    }
  }
  for (const auto& lab : labels) {
    if (lab.has_value() && lab->empty()) {
      throw std::invalid_argument("empty label name");
    }
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

LabeledSentence parse_annotated(std::string_view text, const LabelSet& labels,
                                bool strict,
                                std::vector<std::string>* warnings) {
  LabeledSentence out;

  auto add_plain = [&](std::string_view chunk) {
    for (auto& tok : tokenize(chunk)) {
      out.tokens.push_back(std::move(tok));
      out.labels.emplace_back(std::nullopt);
    }
  };

  auto add_group = [&](std::string_view content) {
    std::size_t sep = content.find(kSeparator);
    if (sep == std::string_view::npos) {
      if (strict) {
        throw CodecError(CodecError::Kind::EmptyGroup,
                         "bracket group without ' : ' separator: [" +
                             std::string(content) + "]");
      }
      warn(warnings, "group without separator treated as unlabeled: [" +
                         std::string(content) + "]");
      add_plain(content);
      return;
    }
    std::string label(content.substr(0, sep));
    std::string_view rest = content.substr(sep + kSeparator.size());
    auto toks = tokenize(rest);
    if (label.empty() || toks.empty()) {
      if (strict) {
        throw CodecError(CodecError::Kind::EmptyGroup,
                         "empty label or empty token list in group: [" +
                             std::string(content) + "]");
      }
      warn(warnings, "degenerate group treated as unlabeled: [" +
                         std::string(content) + "]");
      add_plain(rest);
      return;
    }
    std::optional<std::string> applied = label;
    if (!labels.contains(label) ||
        label.find_first_of(" \t") != std::string::npos) {
      if (strict) {
        throw CodecError(CodecError::Kind::UnknownLabel,
                         "unknown label: " + label);
      }
      warn(warnings, "unknown label '" + label + "' mapped to unlabeled");
      applied = std::nullopt;
    }
    for (auto& tok : toks) {
      out.tokens.push_back(std::move(tok));
      out.labels.push_back(applied);
    }
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t open = text.find('[', pos);
    std::size_t stray = text.find(']', pos);
    if (stray != std::string_view::npos && (open == std::string_view::npos || stray < open)) {
      throw CodecError(CodecError::Kind::UnbalancedBrackets,
                       "']' without matching '['");
    }
    if (open == std::string_view::npos) {
      add_plain(text.substr(pos));
      break;
    }
    add_plain(text.substr(pos, open - pos));
    std::size_t close = text.find(']', open + 1);
    if (close == std::string_view::npos) {
      throw CodecError(CodecError::Kind::UnbalancedBrackets,
                       "'[' without matching ']'");
    }
    std::size_t nested = text.find('[', open + 1);
    if (nested != std::string_view::npos && nested < close) {
      throw CodecError(CodecError::Kind::UnbalancedBrackets,
                       "nested '[' inside bracket group");
    }
    add_group(text.substr(open + 1, close - open - 1));
    pos = close + 1;
  }
  return out;
}

std::string render_annotated(const LabeledSentence& z) {
  std::ostringstream out;
  bool first = true;
  auto emit_sep = [&] {
    if (!first) out << ' ';
    first = false;
  };
  std::size_t i = 0;
  while (i < z.tokens.size()) {
    if (!z.labels[i].has_value()) {
      emit_sep();
      out << z.tokens[i];
      ++i;
      continue;
    }
    const std::string& label = *z.labels[i];
    emit_sep();
    out << '[' << label << " :";
    while (i < z.tokens.size() && z.labels[i].has_value() &&
           *z.labels[i] == label) {
      out << ' ' << z.tokens[i];
      ++i;
    }
    out << ']';
  }
  return out.str();
}

LabeledSentence strip_labels(LabeledSentence z) {
  for (auto& lab : z.labels) lab.reset();
  return z;
}

}  // namespace xlat::codec
