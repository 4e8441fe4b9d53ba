// SPDX-License-Identifier: Apache-2.0

#include "xlat/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace xlat::corpus {

namespace {

using nlohmann::json;

std::string line_ref(std::size_t lineno) {
  return "line " + std::to_string(lineno);
}

}  // namespace

LoadResult load_massive(const std::filesystem::path& path,
                        std::string_view locale,
                        const codec::LabelSet& labels) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  LoadResult out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (record.is_discarded() || !record.is_object()) {
      out.diagnostics.push_back(
          {line_ref(lineno), "MalformedRecord", "not a JSON object"});
      continue;
    }
    if (!record.contains("id") || !record.contains("locale") ||
        !record.contains("utt") || !record.contains("annot_utt")) {
      out.diagnostics.push_back({line_ref(lineno), "MalformedRecord",
                                 "missing id/locale/utt/annot_utt"});
      continue;
    }
    std::string id = record["id"].is_string()
                         ? record["id"].get<std::string>()
                         : record["id"].dump();
    std::string rec_locale = record["locale"].get<std::string>();
    if (!locale.empty() && rec_locale != locale) continue;

    codec::LabeledSentence gold;
    try {
      gold = codec::parse_annotated(record["annot_utt"].get<std::string>(),
                                    labels, /*strict=*/true);
    } catch (const codec::CodecError& e) {
      out.diagnostics.push_back({id, "AnnotationParse", e.what()});
      continue;
    }
    std::vector<std::string> utt_tokens =
        codec::tokenize(record["utt"].get<std::string>());
    if (utt_tokens != gold.tokens) {
      out.diagnostics.push_back(
          {id, "TokenMismatch", "utt and annot_utt tokens disagree"});
      continue;
    }

    Example ex;
    ex.id = std::move(id);
    ex.locale = std::move(rec_locale);
    ex.plain.tokens = gold.tokens;
    ex.plain.labels.assign(gold.tokens.size(), std::nullopt);
    ex.gold = std::move(gold);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

LoadResult load_ner(const std::filesystem::path& path,
                    std::string_view locale) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  LoadResult out;
  std::string line;
  codec::LabeledSentence sent;
  std::optional<std::string> prev_label;
  std::size_t sent_index = 0;
  std::size_t lineno = 0;

  auto flush = [&] {
    if (sent.tokens.empty()) return;
    Example ex;
    ex.id = std::to_string(sent_index++);
    ex.locale = std::string(locale);
    ex.plain.tokens = sent.tokens;
    ex.plain.labels.assign(sent.tokens.size(), std::nullopt);
    ex.gold = std::move(sent);
    out.examples.push_back(std::move(ex));
    sent = {};
    prev_label.reset();
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    while (!trimmed.empty() && (trimmed.back() == ' ' || trimmed.back() == '\t'))
      trimmed.pop_back();
    if (trimmed.empty()) {
      flush();
      continue;
    }
    std::istringstream fields(trimmed);
    std::string token, tag;
    fields >> token >> tag;
    if (token.empty() || tag.empty()) {
      out.diagnostics.push_back(
          {line_ref(lineno), "MalformedRecord", "expected token and BIO tag"});
      continue;
    }
    std::optional<std::string> label;
    if (tag == "O") {
      label.reset();
    } else if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') &&
               tag[1] == '-') {
      std::string name = tag.substr(2);
      if (tag[0] == 'I' && prev_label != std::optional<std::string>(name)) {
        out.diagnostics.push_back({line_ref(lineno), "DanglingIFlag",
                                   "I-" + name + " without preceding B-" +
                                       name + "; treated as B-" + name});
      }
      label = std::move(name);
    } else {
      out.diagnostics.push_back(
          {line_ref(lineno), "MalformedRecord", "unrecognized tag " + tag});
      continue;
    }
    sent.tokens.push_back(token);
    sent.labels.push_back(label);
    prev_label = label;
  }
  flush();
  return out;
}

PairResult pair_parallel(const std::vector<Example>& source,
                         const std::vector<Example>& target) {
  PairResult out;
  std::unordered_map<std::string, const Example*> by_id;
  for (const Example& ex : source) {
    if (!by_id.emplace(ex.id, &ex).second) {
      out.diagnostics.push_back(
          {ex.id, "DuplicateId", "duplicate source id; keeping first"});
    }
  }
  std::unordered_set<std::string> matched;
  for (const Example& tgt : target) {
    auto it = by_id.find(tgt.id);
    if (it == by_id.end()) {
      out.diagnostics.push_back(
          {tgt.id, "UnmatchedId", "target id has no source counterpart"});
      continue;
    }
    matched.insert(tgt.id);
    if (it->second->locale == tgt.locale) {
      out.diagnostics.push_back(
          {tgt.id, "LocaleClash", "source and target share locale " +
                                      tgt.locale});
    }
    out.pairs.push_back({tgt.id, *it->second, tgt});
  }
  for (const Example& src : source) {
    if (!matched.count(src.id)) {
      out.diagnostics.push_back(
          {src.id, "UnmatchedId", "source id has no target counterpart"});
    }
  }
  return out;
}

namespace {

bool has_label(const codec::LabeledSentence& s) {
  return s.labeled_count() > 0;
}

}  // namespace

std::vector<Example> filter_test_labeled(const std::vector<Example>& examples) {
  std::vector<Example> out;
  for (const Example& ex : examples) {
    if (!ex.gold) {
      throw std::invalid_argument("MissingGold: example " + ex.id +
                                  " has no gold annotation");
    }
    if (has_label(*ex.gold)) out.push_back(ex);
  }
  return out;
}

std::vector<ParallelExample> filter_test_labeled(
    const std::vector<ParallelExample>& pairs) {
  std::vector<ParallelExample> out;
  for (const ParallelExample& pair : pairs) {
    if (!pair.target.gold) {
      throw std::invalid_argument("MissingGold: pair " + pair.id +
                                  " has no target gold annotation");
    }
    if (has_label(*pair.target.gold)) out.push_back(pair);
  }
  return out;
}

}  // namespace xlat::corpus
