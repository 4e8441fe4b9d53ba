// SPDX-License-Identifier: Apache-2.0

#include "xlat/prompting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace xlat::prompting {

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const std::string& token : tokens) {
    if (!out.empty()) out += ' ';
    out += token;
  }
  return out;
}

std::string labeled_token_list(const codec::LabeledSentence& sentence) {
  std::string out;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    if (!sentence.labels[i]) continue;
    if (!out.empty()) out += ", ";
    out += sentence.tokens[i];
  }
  return out;
}

const codec::LabeledSentence& require_source_labels(const PromptInput& input) {
  if (!input.pair.source.gold) {
    throw PromptError(PromptError::Kind::MissingSourceLabels,
                      "pair " + input.pair.id +
                          ": handholding needs labeled source text");
  }
  return *input.pair.source.gold;
}

const codec::LabeledSentence& require_target_gold(const PromptInput& input) {
  if (!input.pair.target.gold) {
    throw PromptError(PromptError::Kind::MissingTargetGold,
                      "pair " + input.pair.id + ": target gold missing");
  }
  return *input.pair.target.gold;
}

std::string target_line_of(const PromptInput& input) {
  if (input.display_target) return *input.display_target;
  return join_tokens(input.pair.target.plain.tokens);
}

}  // namespace

std::string_view variant_tag_name(VariantTag tag) {
  switch (tag) {
    case VariantTag::Handholding:
      return "handholding";
    case VariantTag::Reordered:
      return "reordered";
    case VariantTag::Transliterated:
      return "transliterated";
    case VariantTag::PseudoSource:
      return "pseudo_source";
  }
  throw std::logic_error("unreachable");
}

VariantTag variant_tag_from_name(std::string_view name) {
  if (name == "handholding") return VariantTag::Handholding;
  if (name == "reordered") return VariantTag::Reordered;
  if (name == "transliterated") return VariantTag::Transliterated;
  if (name == "pseudo_source") return VariantTag::PseudoSource;
  throw std::invalid_argument("unknown variant tag: " + std::string(name));
}

std::string render_sft_prompt(const PromptTemplate& tmpl,
                              const std::string& target_line,
                              const std::optional<std::string>& source_line) {
  const std::string& target = tmpl.target_language_name;
  const std::string& source = tmpl.source_language_name;
  std::string out = "Reinsert the " + tmpl.task_phrase +
                    " into the following " + target + " sentence";
  if (source_line) {
    out += " using the information in the " + source + " sentence";
  }
  out += ".\n\n### " + target + ": " + target_line + "\n";
  if (source_line) {
    out += "### " + source + ": " + *source_line + "\n";
  }
  out += "### Output:";
  return out;
}

std::string icl_system_block(const PromptTemplate& tmpl) {
  const std::string& target = tmpl.target_language_name;
  const std::string& source = tmpl.source_language_name;
  return "<<SYS>> Add annotations for the corresponding tokens in " + target +
         " sentences using the annotation information given in the " + source +
         " sentence. The annotations are marked in the format "
         "[annotation_type : token/value]\n"
         "Input will be provided in the following format\n"
         "### " + target + ": " + target + " sentence\n"
         "### " + source + ": " + source + " sentence\n"
         "Output should be printed after the string \"### Output:\"\n"
         "The final output should be the " + target +
         " sentence with annotations inserted corresponding to the "
         "annotations of the " + source +
         " sentence. Do not add any extra annotations to the " + target +
         " sentence, which are not present in the " + source +
         " sentence input.<</SYS>>";
}

std::string icl_block(const PromptTemplate& tmpl,
                      const std::string& token_list,
                      const std::string& target_line,
                      const std::string& source_line,
                      const std::optional<std::string>& completion) {
  const std::string& target = tmpl.target_language_name;
  const std::string& source = tmpl.source_language_name;
  std::string out = "Add annotations for the given tokens " + token_list +
                    " in " + target +
                    " sentence using the annotation information given in the " +
                    source + " sentence\n"
                    "### " + target + ": " + target_line + "\n"
                    "### " + source + ": " + source_line + "\n"
                    "### Output:";
  if (completion) {
    out += " " + *completion;
  }
  return out;
}

PromptRecord build_sft_record(const PromptInput& input,
                              const PromptTemplate& tmpl) {
  const codec::LabeledSentence& gold = require_target_gold(input);
  std::optional<std::string> source_line;
  if (input.tags.count(VariantTag::Handholding)) {
    source_line = codec::render_annotated(require_source_labels(input));
  }
  PromptRecord record;
  record.id = input.pair.id;
  record.variant_tags = input.tags;
  record.prompt_text =
      render_sft_prompt(tmpl, target_line_of(input), source_line);
  record.expected_completion = codec::render_annotated(gold);
  return record;
}

PromptRecord build_icl_prompt(const PromptInput& query,
                              const std::vector<PromptInput>& demos,
                              const PromptTemplate& tmpl) {
  std::string text = icl_system_block(tmpl);
  for (const PromptInput& demo : demos) {
    if (demo.tags != query.tags) {
      throw PromptError(PromptError::Kind::VariantMismatch,
                        "demonstration " + demo.pair.id +
                            " carries different variant tags than query " +
                            query.pair.id);
    }
    const codec::LabeledSentence& source = require_source_labels(demo);
    const codec::LabeledSentence& gold = require_target_gold(demo);
    text += "\n\n";
    text += icl_block(tmpl, labeled_token_list(source), target_line_of(demo),
                      codec::render_annotated(source),
                      codec::render_annotated(gold));
  }
  const codec::LabeledSentence& query_source = require_source_labels(query);
  text += "\n\n";
  text += icl_block(tmpl, labeled_token_list(query_source),
                    target_line_of(query),
                    codec::render_annotated(query_source), std::nullopt);

  PromptRecord record;
  record.id = query.pair.id;
  record.variant_tags = query.tags;
  record.prompt_text = std::move(text);
  return record;
}

std::unordered_map<std::string, std::vector<double>> load_embeddings(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::unordered_map<std::string, std::vector<double>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json record = nlohmann::json::parse(line);
    out[record.at("id").get<std::string>()] =
        record.at("vector").get<std::vector<double>>();
  }
  return out;
}

namespace {

const std::vector<double>& embedding_of(
    const RetrievalConfig& cfg, const std::string& id) {
  auto it = cfg.embeddings.find(id);
  if (it == cfg.embeddings.end()) {
    throw PromptError(PromptError::Kind::MissingEmbedding,
                      "no embedding for id " + id);
  }
  return it->second;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("embedding dimensions differ");
  }
  double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    norm_a += a[i] * a[i];
    norm_b += b[i] * b[i];
  }
  if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
  return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

}  // namespace

std::vector<std::string> retrieve_exemplars(const std::string& query_id,
                                            const std::vector<std::string>& pool,
                                            const RetrievalConfig& cfg) {
  if (cfg.k < 1) {
    throw std::invalid_argument("retrieval k must be at least 1");
  }
  const std::vector<double>& query = embedding_of(cfg, query_id);
  std::vector<std::pair<double, std::string>> scored;
  scored.reserve(pool.size());
  for (const std::string& id : pool) {
    if (id == query_id) continue;
    scored.emplace_back(cosine(query, embedding_of(cfg, id)), id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  const std::size_t keep =
      std::min(scored.size(), static_cast<std::size_t>(cfg.k));
  std::vector<std::string> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(scored[i].second);
  return out;
}

nlohmann::json sft_config_sidecar(codec::TaskKind task) {
  const bool slots = task == codec::TaskKind::SlotFilling;
  nlohmann::json peft = {
      {"lora_rank", 8},
      {"lora_alpha", 16},
      {"batch_size_training", slots ? 32 : 16},
      {"batch_size_inference", 4},
      {"gradient_checkpointing", true},
      {"gradient_accumulation_steps", 4},
      {"max_gradient_norm", 0.3},
      {"epochs", slots ? nlohmann::json::array({2, 3}) : nlohmann::json(3)},
      {"learning_rate", 1e-3},
      {"optimizer", slots ? "32-bit AdamW (paged)" : "32-bit Adam (paged)"},
      {"precision", "bf16"},
      {"lr_scheduler", "cosine"},
      {"train_batch_size", slots ? 32 : 16},
      {"warmup_ratio", 0.05},
      {"max_sequence_length_training", slots ? 512 : 1024},
      {"stopping_criteria_inference", slots ? 512 : 768},
      {"penalty_alpha_inference", 0.6},
      {"top_k_inference", 4},
  };
  return nlohmann::json{
      {"dataset", slots ? "massive" : "naamapadam"},
      {"peft", peft},
  };
}

}  // namespace xlat::prompting
