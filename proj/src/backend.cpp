// SPDX-License-Identifier: Apache-2.0

#include "xlat/backend.hpp"

#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace xlat::backend {

namespace {

using nlohmann::json;

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw BackendError(BackendError::Kind::InvalidConfig,
                       "endpoint is not a URL: " + url);
  }
  const std::size_t slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, slash), url.substr(slash)};
}

void validate(const GenerationConfig& cfg, std::size_t n_records) {
  if (cfg.penalty_alpha < 0.0 || cfg.penalty_alpha > 1.0) {
    throw BackendError(BackendError::Kind::InvalidConfig,
                       "penalty_alpha must be in [0,1]");
  }
  if (cfg.top_k <= 0 || cfg.max_new_tokens <= 0 || cfg.max_in_flight <= 0 ||
      cfg.timeout_ms <= 0 || cfg.max_retries < 0) {
    throw BackendError(BackendError::Kind::InvalidConfig,
                       "generation counts must be positive");
  }
  (void)n_records;
}

void configure_client(httplib::Client& client, int timeout_ms,
                      const std::string& api_key) {
  client.set_connection_timeout(0, timeout_ms * 1000);
  client.set_read_timeout(0, timeout_ms * 1000);
  client.set_write_timeout(0, timeout_ms * 1000);
  if (!api_key.empty()) {
    client.set_bearer_token_auth(api_key);
  }
}

bool is_timeout(httplib::Error error) {
  return error == httplib::Error::ConnectionTimeout ||
         error == httplib::Error::Read || error == httplib::Error::Write;
}

std::optional<std::string> completion_text(const std::string& body) {
  json parsed = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) return std::nullopt;
  if (parsed.contains("choices") && parsed["choices"].is_array() &&
      !parsed["choices"].empty() && parsed["choices"][0].contains("text")) {
    return parsed["choices"][0]["text"].get<std::string>();
  }
  if (parsed.contains("text") && parsed["text"].is_string()) {
    return parsed["text"].get<std::string>();
  }
  return std::nullopt;
}

void attach_parse(GenerationResult& result, const codec::LabelSet& labels) {
  try {
    result.parsed = codec::parse_annotated(result.raw_text, labels,
                                           /*strict=*/false, &result.warnings);
  } catch (const codec::CodecError& e) {
    result.parsed.reset();
    result.warnings.push_back(std::string("parse failure: ") + e.what());
  }
}

std::vector<GenerationResult> mock_batch(
    const std::vector<prompting::PromptRecord>& records,
    const codec::LabelSet& labels, const MockOracle* mock,
    BatchStats* stats) {
  if (mock == nullptr) {
    throw BackendError(BackendError::Kind::InvalidConfig,
                       "mock endpoint selected but no mock oracle supplied");
  }
  std::vector<GenerationResult> results;
  results.reserve(records.size());
  for (const prompting::PromptRecord& record : records) {
    if (stats) ++stats->attempts;
    auto it = mock->find(record.id);
    if (it == mock->end()) {
      throw BackendError(BackendError::Kind::EndpointError,
                         "mock oracle has no completion for id " + record.id);
    }
    GenerationResult result;
    result.id = record.id;
    result.raw_text = it->second;
    attach_parse(result, labels);
    results.push_back(std::move(result));
  }
  return results;
}

}  // namespace

int default_max_new_tokens(codec::TaskKind task) {
  return task == codec::TaskKind::SlotFilling ? 512 : 768;
}

std::string mock_transfer(const corpus::ParallelExample& pair,
                          const align::Alignment& alignment) {
  if (!pair.source.gold) {
    throw std::invalid_argument("mock_transfer needs labeled source for " +
                                pair.id);
  }
  return codec::render_annotated(align::project_labels(
      *pair.source.gold, pair.target.plain.tokens, alignment));
}

std::vector<GenerationResult> generate_batch(
    const std::vector<prompting::PromptRecord>& records,
    const GenerationConfig& cfg, const codec::LabelSet& labels,
    const MockOracle* mock, BatchStats* stats) {
  validate(cfg, records.size());
  if (cfg.endpoint == kMockEndpoint) {
    return mock_batch(records, labels, mock, stats);
  }

  const ParsedUrl url = split_url(cfg.endpoint);
  std::vector<GenerationResult> results(records.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> aborted{false};
  std::atomic<std::size_t> attempts{0};
  std::mutex error_mutex;
  std::string batch_error;

  auto worker = [&] {
    httplib::Client client(url.base);
    configure_client(client, cfg.timeout_ms, cfg.api_key);
    while (!aborted.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) break;
      const prompting::PromptRecord& record = records[i];
      GenerationResult result;
      result.id = record.id;

      const json body = {
          {"prompt", record.prompt_text},
          {"max_new_tokens", cfg.max_new_tokens},
          {"penalty_alpha", cfg.penalty_alpha},
          {"top_k", cfg.top_k},
      };
      const std::string payload = body.dump();

      bool done = false;
      std::string last_error;
      for (int attempt = 0; attempt <= cfg.max_retries && !done; ++attempt) {
        attempts.fetch_add(1);
        httplib::Result res =
            client.Post(url.path, payload, "application/json");
        if (!res) {
          if (is_timeout(res.error())) {
            result.failed = true;
            result.warnings.push_back("request timed out");
            done = true;
            break;
          }
          last_error = httplib::to_string(res.error());
          continue;
        }
        if (res->status != 200) {
          last_error = "HTTP status " + std::to_string(res->status);
          continue;
        }
        std::optional<std::string> text = completion_text(res->body);
        if (!text) {
          last_error = "response body lacks completion text";
          continue;
        }
        result.raw_text = std::move(*text);
        attach_parse(result, labels);
        done = true;
      }
      if (!done && !result.failed) {
        {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (batch_error.empty()) {
            batch_error = "record " + record.id + ": " + last_error;
          }
        }
        aborted.store(true);
        break;
      }
      results[i] = std::move(result);
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.max_in_flight),
                            std::max<std::size_t>(records.size(), 1));
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();

  if (stats) stats->attempts += attempts.load();
  if (aborted.load()) {
    throw BackendError(BackendError::Kind::EndpointError,
                       "generation failed after retries: " + batch_error);
  }
  return results;
}

std::vector<std::optional<codec::LabeledSentence>> pseudo_label_batch(
    const std::vector<corpus::Example>& sentences, const LabelerConfig& cfg,
    std::vector<corpus::Diagnostic>* diagnostics) {
  std::vector<std::optional<codec::LabeledSentence>> out;
  out.reserve(sentences.size());

  if (cfg.endpoint == kOracleEndpoint) {
    for (const corpus::Example& ex : sentences) {
      if (!ex.gold) {
        throw std::invalid_argument(
            "oracle labeler needs gold labels; none for " + ex.id);
      }
      out.push_back(*ex.gold);
    }
    return out;
  }

  const ParsedUrl url = split_url(cfg.endpoint);
  httplib::Client client(url.base);
  configure_client(client, cfg.timeout_ms, /*api_key=*/"");

  for (const corpus::Example& ex : sentences) {
    const json body = {
        {"tokens", ex.plain.tokens},
        {"task", std::string(codec::task_kind_name(cfg.task))},
    };
    const std::string payload = body.dump();
    std::string last_error;
    std::optional<json> labels_json;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
      httplib::Result res = client.Post(url.path, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP status " + std::to_string(res->status);
        continue;
      }
      json parsed = json::parse(res->body, nullptr, false);
      if (parsed.is_discarded() || !parsed.contains("labels") ||
          !parsed["labels"].is_array()) {
        last_error = "response body lacks a labels array";
        continue;
      }
      labels_json = parsed["labels"];
      break;
    }
    if (!labels_json) {
      throw BackendError(BackendError::Kind::EndpointError,
                         "labeler failed for " + ex.id + ": " + last_error);
    }
    if (labels_json->size() != ex.plain.tokens.size()) {
      if (diagnostics) {
        diagnostics->push_back(
            {ex.id, "LengthMismatch",
             "classifier returned " + std::to_string(labels_json->size()) +
                 " labels for " + std::to_string(ex.plain.tokens.size()) +
                 " tokens"});
      }
      out.push_back(std::nullopt);
      continue;
    }
    codec::LabeledSentence labeled;
    labeled.tokens = ex.plain.tokens;
    labeled.labels.reserve(labels_json->size());
    for (const json& cell : *labels_json) {
      if (cell.is_null() || (cell.is_string() && cell == "O")) {
        labeled.labels.emplace_back(std::nullopt);
      } else {
        labeled.labels.emplace_back(cell.get<std::string>());
      }
    }
    out.push_back(std::move(labeled));
  }
  return out;
}

}  // namespace xlat::backend
