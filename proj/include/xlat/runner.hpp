// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: JSON configuration, the staged pipeline
// (ingest → pseudo-label → align → masquerade → prompts → generate →
// score), JSONL artifacts, and consolidated reporting. Stages communicate
// only through files in the output directory, so each one can be run
// standalone and a full run is bit-reproducible.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlat/backend.hpp"
#include "xlat/codec.hpp"
#include "xlat/corpus.hpp"
#include "xlat/metrics.hpp"
#include "xlat/prompting.hpp"

namespace xlat::runner {

inline constexpr const char* kToolVersion = "0.1.0";

enum class RunMode { Icl, SftEmit, Score };

std::string_view run_mode_name(RunMode mode);
RunMode run_mode_from_name(std::string_view name);

class RunnerError : public std::runtime_error {
 public:
  enum class Kind { InvalidConfig, StageFailure, UnreadableReport };
  RunnerError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct AlignmentOptions {
  int iterations = 5;
  bool use_null = true;
  bool symmetrize = false;
};

struct ExperimentConfig {
  codec::TaskKind task = codec::TaskKind::SlotFilling;
  RunMode mode = RunMode::Icl;
  std::string source_locale = "en-US";
  std::string target_locale = "hi-IN";
  prompting::VariantTags tags;
  std::uint64_t seed = 0;
  bool oracle_source = false;  // keep gold source labels at inference
  bool allow_deviation = false;

  std::filesystem::path source_corpus;
  std::filesystem::path target_corpus;
  std::filesystem::path alignments;       // optional import
  std::filesystem::path embeddings;       // retrieval sidecar (ICL)
  std::filesystem::path pred_embeddings;  // MAUVE sidecars (score)
  std::filesystem::path ref_embeddings;
  std::filesystem::path out_dir;
  std::filesystem::path resources;  // empty = default resolution

  backend::GenerationConfig generation;
  bool explicit_max_new_tokens = false;
  int retrieval_k = 8;
  backend::LabelerConfig labeler;
  AlignmentOptions alignment;
  std::string script;  // translit script for the transliterated tag
  std::string target_language_name;
  std::string source_language_name;
  std::string bridging_label = "base";
  std::size_t mauve_sample = 500;
  metrics::MauveOptions mauve;

  /// Effective variant tags after defaulting: inference-time handholding
  /// implies pseudo_source unless oracle_source is set.
  prompting::VariantTags effective_tags() const;
  std::string configuration_label() const;
};

/// Parses the JSON config document; relative paths resolve against the
/// config file's directory. Throws RunnerError(InvalidConfig).
ExperimentConfig load_config(const std::filesystem::path& path);

/// Re-serializes the effective config deterministically (sorted keys).
nlohmann::json config_to_json(const ExperimentConfig& config);

/// FNV-1a 64-bit hex digest of the canonical config serialization.
std::string config_digest(const ExperimentConfig& config);

/// Validates invariants that need the filesystem (paths exist, tags vs
/// mode, script given for transliterated, ...).
void validate_config(const ExperimentConfig& config);

struct RunManifest {
  std::string status;  // "complete" or "aborted"
  std::string error;
  std::string digest;
  std::string started_at;
  std::string finished_at;
  nlohmann::json artifacts = nlohmann::json::object();
  nlohmann::json counts = nlohmann::json::object();
  nlohmann::json report = nlohmann::json();  // summary metrics when scored
  ExperimentConfig config;
};

// Individual pipeline stages; each reads its inputs from config paths or
// earlier artifacts in out_dir and writes its own artifacts.
void stage_ingest(const ExperimentConfig& config);
void stage_pseudo_label(const ExperimentConfig& config);
void stage_align(const ExperimentConfig& config);
void stage_masquerade(const ExperimentConfig& config);
void stage_build_prompts(const ExperimentConfig& config);
void stage_generate(const ExperimentConfig& config);
nlohmann::json stage_score(const ExperimentConfig& config);

/// Full pipeline for the configured mode. Writes manifest.json atomically;
/// on stage failure a partial manifest with status "aborted" is written and
/// the stage error is rethrown.
RunManifest run(const ExperimentConfig& config);

/// Consolidated table over manifest files: one row per run with micro-F1,
/// EM, chrF++, MAUVE columns; missing metrics render as dashes; rows sorted
/// by (task, language, configuration).
std::string report(const std::vector<std::filesystem::path>& manifests);

}  // namespace xlat::runner
