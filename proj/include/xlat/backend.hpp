// SPDX-License-Identifier: Apache-2.0
//
// Remote text-generation and token-classifier clients, plus the
// deterministic mock used for pipeline soundness tests. All I/O concurrency
// in the project lives here.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "xlat/align.hpp"
#include "xlat/codec.hpp"
#include "xlat/corpus.hpp"
#include "xlat/prompting.hpp"

namespace xlat::backend {

/// Endpoint literal selecting the deterministic label-projection mock.
inline constexpr const char* kMockEndpoint = "mock:project";
/// Labeler endpoint literal that returns gold labels unchanged.
inline constexpr const char* kOracleEndpoint = "oracle";

struct GenerationConfig {
  double penalty_alpha = 0.6;
  int top_k = 4;
  int max_new_tokens = 512;
  std::string endpoint = kMockEndpoint;
  int timeout_ms = 30000;
  int max_retries = 2;
  int max_in_flight = 4;
  std::string api_key;  // sent as a bearer token when non-empty
};

int default_max_new_tokens(codec::TaskKind task);  // 512 slots, 768 NER

struct GenerationResult {
  std::string id;
  std::string raw_text;
  std::optional<codec::LabeledSentence> parsed;
  std::vector<std::string> warnings;
  bool failed = false;  // per-request timeout; batch continues
};

struct BatchStats {
  std::size_t attempts = 0;
};

class BackendError : public std::runtime_error {
 public:
  enum class Kind { EndpointError, InvalidConfig };
  BackendError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Deterministic stand-in for the LLM transfer step: project the source
/// annotations through the alignment and render the target.
std::string mock_transfer(const corpus::ParallelExample& pair,
                          const align::Alignment& alignment);

/// Precomputed mock completions keyed by record id.
using MockOracle = std::unordered_map<std::string, std::string>;

/// One result per record, in input order, regardless of completion order.
/// Requests run on up to max_in_flight threads. A request that times out
/// yields a failed result; any other error is retried up to max_retries and
/// then aborts the batch with EndpointError.
std::vector<GenerationResult> generate_batch(
    const std::vector<prompting::PromptRecord>& records,
    const GenerationConfig& cfg, const codec::LabelSet& labels,
    const MockOracle* mock = nullptr, BatchStats* stats = nullptr);

struct LabelerConfig {
  std::string endpoint = kOracleEndpoint;
  codec::TaskKind task = codec::TaskKind::SlotFilling;
  int timeout_ms = 30000;
  int max_retries = 2;
};

/// Token-aligned labels per sentence; a classifier response with the wrong
/// token count drops that sentence (nullopt) with a LengthMismatch
/// diagnostic. Oracle mode returns gold unchanged.
std::vector<std::optional<codec::LabeledSentence>> pseudo_label_batch(
    const std::vector<corpus::Example>& sentences, const LabelerConfig& cfg,
    std::vector<corpus::Diagnostic>* diagnostics = nullptr);

}  // namespace xlat::backend
