// SPDX-License-Identifier: Apache-2.0
//
// Prompt construction for the three prompt families (SFT handholding, SFT
// monolingual, few-shot ICL) plus cosine-similarity exemplar retrieval.
// Rendered text is golden-file tested byte for byte, so the templates here
// must not be reformatted casually.

#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlat/codec.hpp"
#include "xlat/corpus.hpp"

namespace xlat::prompting {

enum class PromptFamily { SftHandholding, SftMonolingual, IclHandholding };

enum class VariantTag { Handholding, Reordered, Transliterated, PseudoSource };
using VariantTags = std::set<VariantTag>;

std::string_view variant_tag_name(VariantTag tag);
VariantTag variant_tag_from_name(std::string_view name);

struct PromptTemplate {
  PromptFamily family = PromptFamily::SftHandholding;
  std::string target_language_name = "Hindi";
  std::string source_language_name = "English";
  std::string task_phrase = "slot annotations";
};

struct PromptRecord {
  std::string id;
  std::string prompt_text;
  std::optional<std::string> expected_completion;
  VariantTags variant_tags;
};

class PromptError : public std::runtime_error {
 public:
  enum class Kind {
    MissingSourceLabels,
    MissingTargetGold,
    VariantMismatch,
    MissingEmbedding,
  };
  PromptError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Low-level template rendering; `source_line` present only for the
/// handholding family. These produce the exact bytes of the golden files
/// when fed the goldens' placeholder strings.
std::string render_sft_prompt(const PromptTemplate& tmpl,
                              const std::string& target_line,
                              const std::optional<std::string>& source_line);
std::string icl_system_block(const PromptTemplate& tmpl);
std::string icl_block(const PromptTemplate& tmpl,
                      const std::string& token_list,
                      const std::string& target_line,
                      const std::string& source_line,
                      const std::optional<std::string>& completion);

/// One pipeline example as prompt input; display_target overrides the plain
/// target text when the sentence was reordered or transliterated.
struct PromptInput {
  corpus::ParallelExample pair;
  VariantTags tags;
  std::optional<std::string> display_target;
};

PromptRecord build_sft_record(const PromptInput& input,
                              const PromptTemplate& tmpl);

/// System block, completed demonstration blocks, then the open query block.
/// Demonstrations must carry the query's variant tags.
PromptRecord build_icl_prompt(const PromptInput& query,
                              const std::vector<PromptInput>& demos,
                              const PromptTemplate& tmpl);

struct RetrievalConfig {
  int k = 8;
  std::unordered_map<std::string, std::vector<double>> embeddings;
};

/// JSONL sidecar with fields id and vector.
std::unordered_map<std::string, std::vector<double>> load_embeddings(
    const std::filesystem::path& path);

/// Pool ids ranked by cosine similarity to the query, descending, ties by
/// ascending id; the query itself is excluded; at most cfg.k results.
std::vector<std::string> retrieve_exemplars(const std::string& query_id,
                                            const std::vector<std::string>& pool,
                                            const RetrievalConfig& cfg);

/// Fine-tuning configuration emitted alongside SFT datasets.
nlohmann::json sft_config_sidecar(codec::TaskKind task);

}  // namespace xlat::prompting
