// SPDX-License-Identifier: Apache-2.0

#include "xlat/runner.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <unordered_map>

#include "xlat/align.hpp"
#include "xlat/resources.hpp"
#include "xlat/translit.hpp"

namespace xlat::runner {

namespace {

using nlohmann::json;

constexpr const char* kPairsFile = "pairs.jsonl";
constexpr const char* kSplitFile = "split.jsonl";
constexpr const char* kPseudoFile = "pseudo_labels.jsonl";
constexpr const char* kAlignmentsFile = "alignments.jsonl";
constexpr const char* kTableFile = "translation_table.tsv";
constexpr const char* kMasqueradeFile = "masquerade.jsonl";
constexpr const char* kPromptsFile = "prompts.jsonl";
constexpr const char* kSftTrainFile = "sft_train.jsonl";
constexpr const char* kSftValidationFile = "sft_validation.jsonl";
constexpr const char* kSftConfigFile = "sft_config.json";
constexpr const char* kGenerationsFile = "generations.jsonl";
constexpr const char* kReportJsonlFile = "report.jsonl";
constexpr const char* kReportTxtFile = "report.txt";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kDiagnosticsFile = "diagnostics.jsonl";

[[noreturn]] void config_error(const std::string& message) {
  throw RunnerError(RunnerError::Kind::InvalidConfig, message);
}

[[noreturn]] void stage_error(const std::string& message) {
  throw RunnerError(RunnerError::Kind::StageFailure, message);
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const std::string& token : tokens) {
    if (!out.empty()) out += ' ';
    out += token;
  }
  return out;
}

void atomic_write(const std::filesystem::path& path,
                  const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) stage_error("cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

std::string iso_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buffer;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) stage_error("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (record.is_discarded()) {
      stage_error(path.string() + ":" + std::to_string(lineno) +
                  ": malformed JSON");
    }
    out.push_back(std::move(record));
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<json>& records) {
  std::string content;
  for (const json& record : records) {
    content += record.dump();
    content += '\n';
  }
  atomic_write(path, content);
}

void append_diagnostics(const ExperimentConfig& config,
                        const std::string& stage,
                        const std::vector<corpus::Diagnostic>& diagnostics) {
  if (diagnostics.empty()) return;
  std::ofstream out(config.out_dir / kDiagnosticsFile,
                    std::ios::binary | std::ios::app);
  for (const corpus::Diagnostic& d : diagnostics) {
    out << json{{"stage", stage},
                {"where", d.where},
                {"kind", d.kind},
                {"message", d.message}}
               .dump()
        << '\n';
  }
}

json labels_to_json(const std::vector<std::optional<std::string>>& labels) {
  json out = json::array();
  for (const auto& label : labels) {
    if (label) {
      out.push_back(*label);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

std::vector<std::optional<std::string>> labels_from_json(const json& labels) {
  std::vector<std::optional<std::string>> out;
  out.reserve(labels.size());
  for (const json& cell : labels) {
    if (cell.is_null()) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(cell.get<std::string>());
    }
  }
  return out;
}

json example_to_json(const corpus::Example& ex) {
  json out = {{"locale", ex.locale}, {"tokens", ex.plain.tokens}};
  if (ex.gold) {
    out["gold"] = labels_to_json(ex.gold->labels);
  } else {
    out["gold"] = nullptr;
  }
  return out;
}

corpus::Example example_from_json(const std::string& id, const json& j) {
  corpus::Example ex;
  ex.id = id;
  ex.locale = j.at("locale").get<std::string>();
  ex.plain.tokens = j.at("tokens").get<std::vector<std::string>>();
  ex.plain.labels.assign(ex.plain.tokens.size(), std::nullopt);
  if (!j.at("gold").is_null()) {
    codec::LabeledSentence gold;
    gold.tokens = ex.plain.tokens;
    gold.labels = labels_from_json(j.at("gold"));
    if (gold.labels.size() != gold.tokens.size()) {
      stage_error("gold label count mismatch for " + id);
    }
    ex.gold = std::move(gold);
  }
  return ex;
}

std::vector<corpus::ParallelExample> load_pairs(
    const ExperimentConfig& config) {
  std::vector<corpus::ParallelExample> pairs;
  for (const json& record : read_jsonl(config.out_dir / kPairsFile)) {
    corpus::ParallelExample pair;
    pair.id = record.at("id").get<std::string>();
    pair.source = example_from_json(pair.id, record.at("source"));
    pair.target = example_from_json(pair.id, record.at("target"));
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

struct SplitIds {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

SplitIds load_split(const ExperimentConfig& config) {
  SplitIds out;
  for (const json& record : read_jsonl(config.out_dir / kSplitFile)) {
    const std::string bucket = record.at("bucket").get<std::string>();
    const std::string id = record.at("id").get<std::string>();
    if (bucket == "train") out.train.push_back(id);
    if (bucket == "validation") out.validation.push_back(id);
    if (bucket == "test") out.test.push_back(id);
  }
  return out;
}

std::filesystem::path resolved_resources(const ExperimentConfig& config) {
  return resources::resource_dir(config.resources);
}

codec::LabelSet load_labels(const ExperimentConfig& config) {
  const std::filesystem::path dir = resolved_resources(config);
  return codec::LabelSet::load(
      resources::label_table(dir,
                             config.task == codec::TaskKind::SlotFilling),
      config.task);
}

corpus::LoadResult load_corpus_file(const ExperimentConfig& config,
                                    const std::filesystem::path& path,
                                    const std::string& locale,
                                    const codec::LabelSet& labels) {
  if (config.task == codec::TaskKind::SlotFilling) {
    return corpus::load_massive(path, locale, labels);
  }
  return corpus::load_ner(path, locale);
}

std::string language_display_name(const std::string& locale) {
  const std::string prefix = locale.substr(0, locale.find('-'));
  if (prefix == "en") return "English";
  if (prefix == "hi") return "Hindi";
  if (prefix == "bn") return "Bengali";
  if (prefix == "ta") return "Tamil";
  return locale;
}

std::string task_phrase(codec::TaskKind task) {
  return task == codec::TaskKind::SlotFilling ? "slot annotations"
                                              : "named entity annotations";
}

std::unordered_map<std::string, align::Alignment> load_alignments(
    const ExperimentConfig& config) {
  std::unordered_map<std::string, align::Alignment> out;
  const std::filesystem::path path = config.out_dir / kAlignmentsFile;
  if (!std::filesystem::exists(path)) return out;
  for (const json& record : read_jsonl(path)) {
    out[record.at("id").get<std::string>()] =
        align::parse_pharaoh(record.at("pharaoh").get<std::string>());
  }
  return out;
}

std::unordered_map<std::string, std::optional<codec::LabeledSentence>>
load_pseudo_labels(const ExperimentConfig& config,
                   const std::vector<corpus::ParallelExample>& pairs) {
  std::unordered_map<std::string, const corpus::ParallelExample*> by_id;
  for (const corpus::ParallelExample& pair : pairs) by_id[pair.id] = &pair;
  std::unordered_map<std::string, std::optional<codec::LabeledSentence>> out;
  for (const json& record : read_jsonl(config.out_dir / kPseudoFile)) {
    const std::string id = record.at("id").get<std::string>();
    if (record.at("labels").is_null()) {
      out[id] = std::nullopt;
      continue;
    }
    auto it = by_id.find(id);
    if (it == by_id.end()) stage_error("pseudo labels for unknown id " + id);
    codec::LabeledSentence sentence;
    sentence.tokens = it->second->source.plain.tokens;
    sentence.labels = labels_from_json(record.at("labels"));
    if (sentence.labels.size() != sentence.tokens.size()) {
      stage_error("pseudo label count mismatch for " + id);
    }
    out[id] = std::move(sentence);
  }
  return out;
}

/// Applies pseudo labels to the source side; pairs whose labeler output was
/// dropped are removed (with a diagnostic).
std::vector<corpus::ParallelExample> effective_pairs(
    const ExperimentConfig& config,
    std::vector<corpus::ParallelExample> pairs,
    std::vector<corpus::Diagnostic>* diagnostics) {
  if (!config.effective_tags().count(prompting::VariantTag::PseudoSource)) {
    return pairs;
  }
  const auto pseudo = load_pseudo_labels(config, pairs);
  std::vector<corpus::ParallelExample> out;
  out.reserve(pairs.size());
  for (corpus::ParallelExample& pair : pairs) {
    auto it = pseudo.find(pair.id);
    if (it == pseudo.end() || !it->second) {
      if (diagnostics) {
        diagnostics->push_back({pair.id, "PseudoLabelDropped",
                                "no usable pseudo labels; pair skipped"});
      }
      continue;
    }
    pair.source.gold = it->second;
    out.push_back(std::move(pair));
  }
  return out;
}

prompting::PromptTemplate make_template(const ExperimentConfig& config,
                                        prompting::PromptFamily family) {
  prompting::PromptTemplate tmpl;
  tmpl.family = family;
  tmpl.target_language_name = config.target_language_name.empty()
                                  ? language_display_name(config.target_locale)
                                  : config.target_language_name;
  tmpl.source_language_name = config.source_language_name.empty()
                                  ? language_display_name(config.source_locale)
                                  : config.source_language_name;
  tmpl.task_phrase = task_phrase(config.task);
  return tmpl;
}

json tags_to_json(const prompting::VariantTags& tags) {
  json out = json::array();
  for (prompting::VariantTag tag : tags) {
    out.push_back(std::string(prompting::variant_tag_name(tag)));
  }
  return out;
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const char c : data) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string format_metric(const std::optional<double>& value, int precision) {
  if (!value) return "-";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.*f", precision, *value);
  return buffer;
}

struct ReportRow {
  std::string task;
  std::string language;
  std::string configuration;
  std::optional<double> micro_f1;
  std::optional<double> em;
  std::optional<double> chrf;
  std::optional<double> mauve;
};

std::string format_report_table(std::vector<ReportRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a,
                                         const ReportRow& b) {
    if (a.task != b.task) return a.task < b.task;
    if (a.language != b.language) return a.language < b.language;
    return a.configuration < b.configuration;
  });
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"task", "language", "configuration", "micro_f1", "em",
                   "chrf++", "mauve"});
  for (const ReportRow& row : rows) {
    cells.push_back({row.task, row.language, row.configuration,
                     format_metric(row.micro_f1, 4), format_metric(row.em, 4),
                     format_metric(row.chrf, 2),
                     format_metric(row.mauve, 4)});
  }
  std::vector<std::size_t> widths(cells[0].size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += "  ";
      out += row[c];
      if (c + 1 < row.size()) {
        out.append(widths[c] - row[c].size(), ' ');
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::string_view run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::Icl:
      return "ICL";
    case RunMode::SftEmit:
      return "SFT_EMIT";
    case RunMode::Score:
      return "SCORE";
  }
  throw std::logic_error("unreachable");
}

RunMode run_mode_from_name(std::string_view name) {
  if (name == "ICL") return RunMode::Icl;
  if (name == "SFT_EMIT") return RunMode::SftEmit;
  if (name == "SCORE") return RunMode::Score;
  config_error("unknown mode: " + std::string(name));
}

prompting::VariantTags ExperimentConfig::effective_tags() const {
  prompting::VariantTags out = tags;
  if (mode == RunMode::Icl && out.count(prompting::VariantTag::Handholding) &&
      !oracle_source) {
    out.insert(prompting::VariantTag::PseudoSource);
  }
  return out;
}

std::string ExperimentConfig::configuration_label() const {
  std::string out(run_mode_name(mode));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (prompting::VariantTag tag : effective_tags()) {
    out += '+';
    out += prompting::variant_tag_name(tag);
  }
  out += '@';
  out += bridging_label;
  return out;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config " + path.string());
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    config_error("config is not a JSON object: " + path.string());
  }

  static const std::set<std::string> known_keys = {
      "task_kind", "mode", "source_locale", "target_locale", "variant_tags",
      "seed", "oracle_source", "allow_deviation", "paths", "generation",
      "retrieval", "labeler", "alignment", "script", "language_names",
      "bridging_label", "mauve"};
  for (const auto& [key, value] : doc.items()) {
    if (!known_keys.count(key)) {
      config_error("unknown config key: " + key);
    }
  }

  ExperimentConfig config;
  const std::filesystem::path base =
      std::filesystem::absolute(path).parent_path();
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    std::filesystem::path candidate(p);
    return candidate.is_absolute() ? candidate : base / candidate;
  };

  if (doc.contains("task_kind")) {
    config.task = codec::task_kind_from_name(doc["task_kind"].get<std::string>());
  }
  if (doc.contains("mode")) {
    config.mode = run_mode_from_name(doc["mode"].get<std::string>());
  }
  if (doc.contains("source_locale")) {
    config.source_locale = doc["source_locale"].get<std::string>();
  }
  if (doc.contains("target_locale")) {
    config.target_locale = doc["target_locale"].get<std::string>();
  }
  if (doc.contains("variant_tags")) {
    for (const json& tag : doc["variant_tags"]) {
      config.tags.insert(
          prompting::variant_tag_from_name(tag.get<std::string>()));
    }
  }
  if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("oracle_source")) {
    config.oracle_source = doc["oracle_source"].get<bool>();
  }
  if (doc.contains("allow_deviation")) {
    config.allow_deviation = doc["allow_deviation"].get<bool>();
  }
  if (doc.contains("paths")) {
    static const std::set<std::string> known_paths = {
        "source_corpus", "target_corpus", "alignments", "embeddings",
        "pred_embeddings", "ref_embeddings", "out_dir", "resources"};
    for (const auto& [key, value] : doc["paths"].items()) {
      if (!known_paths.count(key)) {
        config_error("unknown config key: paths." + key);
      }
    }
    const json& paths = doc["paths"];
    auto get = [&](const char* key) -> std::filesystem::path {
      return paths.contains(key) ? resolve(paths[key].get<std::string>())
                                 : std::filesystem::path{};
    };
    config.source_corpus = get("source_corpus");
    config.target_corpus = get("target_corpus");
    config.alignments = get("alignments");
    config.embeddings = get("embeddings");
    config.pred_embeddings = get("pred_embeddings");
    config.ref_embeddings = get("ref_embeddings");
    config.out_dir = get("out_dir");
    config.resources = get("resources");
  }
  if (doc.contains("generation")) {
    const json& g = doc["generation"];
    if (g.contains("endpoint")) {
      config.generation.endpoint = g["endpoint"].get<std::string>();
    }
    if (g.contains("penalty_alpha")) {
      config.generation.penalty_alpha = g["penalty_alpha"].get<double>();
    }
    if (g.contains("top_k")) config.generation.top_k = g["top_k"].get<int>();
    if (g.contains("max_new_tokens")) {
      config.generation.max_new_tokens = g["max_new_tokens"].get<int>();
      config.explicit_max_new_tokens = true;
    }
    if (g.contains("timeout_ms")) {
      config.generation.timeout_ms = g["timeout_ms"].get<int>();
    }
    if (g.contains("max_retries")) {
      config.generation.max_retries = g["max_retries"].get<int>();
    }
    if (g.contains("max_in_flight")) {
      config.generation.max_in_flight = g["max_in_flight"].get<int>();
    }
    if (g.contains("api_key")) {
      config.generation.api_key = g["api_key"].get<std::string>();
    }
  }
  if (doc.contains("retrieval") && doc["retrieval"].contains("k")) {
    config.retrieval_k = doc["retrieval"]["k"].get<int>();
  }
  if (doc.contains("labeler") && doc["labeler"].contains("endpoint")) {
    config.labeler.endpoint = doc["labeler"]["endpoint"].get<std::string>();
  }
  config.labeler.task = config.task;
  if (doc.contains("alignment")) {
    const json& a = doc["alignment"];
    if (a.contains("iterations")) {
      config.alignment.iterations = a["iterations"].get<int>();
    }
    if (a.contains("use_null")) {
      config.alignment.use_null = a["use_null"].get<bool>();
    }
    if (a.contains("symmetrize")) {
      config.alignment.symmetrize = a["symmetrize"].get<bool>();
    }
  }
  if (doc.contains("script")) config.script = doc["script"].get<std::string>();
  if (doc.contains("language_names")) {
    const json& names = doc["language_names"];
    if (names.contains("target")) {
      config.target_language_name = names["target"].get<std::string>();
    }
    if (names.contains("source")) {
      config.source_language_name = names["source"].get<std::string>();
    }
  }
  if (doc.contains("bridging_label")) {
    config.bridging_label = doc["bridging_label"].get<std::string>();
  }
  if (doc.contains("mauve")) {
    const json& m = doc["mauve"];
    if (m.contains("sample")) {
      config.mauve_sample = m["sample"].get<std::size_t>();
    }
    if (m.contains("n_clusters")) {
      config.mauve.n_clusters = m["n_clusters"].get<int>();
    }
    if (m.contains("c")) config.mauve.c = m["c"].get<double>();
    if (m.contains("n_lambda")) {
      config.mauve.n_lambda = m["n_lambda"].get<int>();
    }
  }
  config.mauve.seed = config.seed;
  return config;
}

json config_to_json(const ExperimentConfig& config) {
  return json{
      {"task_kind", std::string(codec::task_kind_name(config.task))},
      {"mode", std::string(run_mode_name(config.mode))},
      {"source_locale", config.source_locale},
      {"target_locale", config.target_locale},
      {"variant_tags", tags_to_json(config.effective_tags())},
      {"seed", config.seed},
      {"oracle_source", config.oracle_source},
      {"allow_deviation", config.allow_deviation},
      {"paths",
       {{"source_corpus", config.source_corpus.string()},
        {"target_corpus", config.target_corpus.string()},
        {"alignments", config.alignments.string()},
        {"embeddings", config.embeddings.string()},
        {"pred_embeddings", config.pred_embeddings.string()},
        {"ref_embeddings", config.ref_embeddings.string()},
        {"out_dir", config.out_dir.string()},
        {"resources", config.resources.string()}}},
      {"generation",
       {{"endpoint", config.generation.endpoint},
        {"penalty_alpha", config.generation.penalty_alpha},
        {"top_k", config.generation.top_k},
        {"max_new_tokens", config.generation.max_new_tokens},
        {"timeout_ms", config.generation.timeout_ms},
        {"max_retries", config.generation.max_retries},
        {"max_in_flight", config.generation.max_in_flight}}},
      {"retrieval", {{"k", config.retrieval_k}}},
      {"labeler", {{"endpoint", config.labeler.endpoint}}},
      {"alignment",
       {{"iterations", config.alignment.iterations},
        {"use_null", config.alignment.use_null},
        {"symmetrize", config.alignment.symmetrize}}},
      {"script", config.script},
      {"language_names",
       {{"target", config.target_language_name},
        {"source", config.source_language_name}}},
      {"bridging_label", config.bridging_label},
      {"mauve",
       {{"sample", config.mauve_sample},
        {"n_clusters", config.mauve.n_clusters},
        {"c", config.mauve.c},
        {"n_lambda", config.mauve.n_lambda}}},
  };
}

std::string config_digest(const ExperimentConfig& config) {
  char buffer[24];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a(config_to_json(config).dump())));
  return buffer;
}

void validate_config(const ExperimentConfig& config) {
  if (config.out_dir.empty()) config_error("paths.out_dir is required");
  if (config.source_corpus.empty() ||
      !std::filesystem::exists(config.source_corpus)) {
    config_error("paths.source_corpus missing or nonexistent");
  }
  if (config.target_corpus.empty() ||
      !std::filesystem::exists(config.target_corpus)) {
    config_error("paths.target_corpus missing or nonexistent");
  }
  if (!config.alignments.empty() &&
      !std::filesystem::exists(config.alignments)) {
    config_error("paths.alignments does not exist");
  }
  const prompting::VariantTags tags = config.effective_tags();
  if (config.mode == RunMode::Icl) {
    if (!tags.count(prompting::VariantTag::Handholding)) {
      config_error("ICL mode requires the handholding tag");
    }
    if (config.embeddings.empty() ||
        !std::filesystem::exists(config.embeddings)) {
      config_error("ICL mode needs paths.embeddings for exemplar retrieval");
    }
  }
  if (config.oracle_source &&
      config.tags.count(prompting::VariantTag::PseudoSource)) {
    config_error("oracle_source contradicts the pseudo_source tag");
  }
  if (tags.count(prompting::VariantTag::Transliterated)) {
    if (config.script.empty()) {
      config_error("transliterated tag needs a script");
    }
    translit::script_from_name(config.script);
    if (config.mode == RunMode::SftEmit && !config.allow_deviation) {
      config_error(
          "transliterated SFT recipes are off by default; pass "
          "--allow-deviation to emit them anyway");
    }
  }
  if (config.retrieval_k < 1) config_error("retrieval.k must be >= 1");
  if (config.mauve_sample < 1) config_error("mauve.sample must be >= 1");
  if (config.generation.endpoint.empty()) {
    config_error("generation.endpoint is required");
  }
}

void stage_ingest(const ExperimentConfig& config) {
  const codec::LabelSet labels = load_labels(config);
  corpus::LoadResult source = load_corpus_file(config, config.source_corpus,
                                               config.source_locale, labels);
  corpus::LoadResult target = load_corpus_file(config, config.target_corpus,
                                               config.target_locale, labels);
  corpus::PairResult paired = corpus::pair_parallel(source.examples,
                                                    target.examples);
  if (paired.pairs.empty()) stage_error("no parallel pairs after ingest");

  corpus::DatasetSplit<corpus::ParallelExample> split =
      corpus::split_dataset(paired.pairs, corpus::SplitRatio{}, config.seed);
  const std::vector<corpus::ParallelExample> test =
      corpus::filter_test_labeled(split.test);

  std::vector<json> pair_records;
  auto emit_bucket = [&](const std::vector<corpus::ParallelExample>& bucket) {
    for (const corpus::ParallelExample& pair : bucket) {
      pair_records.push_back({{"id", pair.id},
                              {"source", example_to_json(pair.source)},
                              {"target", example_to_json(pair.target)}});
    }
  };
  emit_bucket(split.train);
  emit_bucket(split.validation);
  emit_bucket(split.test);
  write_jsonl(config.out_dir / kPairsFile, pair_records);

  std::vector<json> split_records;
  std::set<std::string> kept_test;
  for (const corpus::ParallelExample& pair : test) kept_test.insert(pair.id);
  for (const corpus::ParallelExample& pair : split.train) {
    split_records.push_back({{"id", pair.id}, {"bucket", "train"}});
  }
  for (const corpus::ParallelExample& pair : split.validation) {
    split_records.push_back({{"id", pair.id}, {"bucket", "validation"}});
  }
  for (const corpus::ParallelExample& pair : split.test) {
    split_records.push_back(
        {{"id", pair.id},
         {"bucket", kept_test.count(pair.id) ? "test" : "test_dropped"}});
  }
  write_jsonl(config.out_dir / kSplitFile, split_records);

  std::vector<corpus::Diagnostic> diagnostics = std::move(source.diagnostics);
  diagnostics.insert(diagnostics.end(), target.diagnostics.begin(),
                     target.diagnostics.end());
  diagnostics.insert(diagnostics.end(), paired.diagnostics.begin(),
                     paired.diagnostics.end());
  append_diagnostics(config, "ingest", diagnostics);
}

void stage_pseudo_label(const ExperimentConfig& config) {
  const std::vector<corpus::ParallelExample> pairs = load_pairs(config);
  std::vector<corpus::Example> sources;
  sources.reserve(pairs.size());
  for (const corpus::ParallelExample& pair : pairs) {
    sources.push_back(pair.source);
  }
  std::vector<corpus::Diagnostic> diagnostics;
  const auto labeled =
      backend::pseudo_label_batch(sources, config.labeler, &diagnostics);

  std::vector<json> records;
  records.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    json record = {{"id", pairs[i].id}, {"labels", nullptr}};
    if (labeled[i]) {
      record["labels"] = labels_to_json(labeled[i]->labels);
    }
    records.push_back(std::move(record));
  }
  write_jsonl(config.out_dir / kPseudoFile, records);
  append_diagnostics(config, "pseudo-label", diagnostics);
}

void stage_align(const ExperimentConfig& config) {
  const std::vector<corpus::ParallelExample> pairs = load_pairs(config);
  std::vector<json> records;
  records.reserve(pairs.size());

  if (!config.alignments.empty()) {
    std::unordered_map<std::string, std::string> imported;
    for (const json& record : read_jsonl(config.alignments)) {
      imported[record.at("id").get<std::string>()] =
          record.at("pharaoh").get<std::string>();
    }
    for (const corpus::ParallelExample& pair : pairs) {
      auto it = imported.find(pair.id);
      if (it == imported.end()) {
        stage_error("imported alignments lack id " + pair.id);
      }
      records.push_back(
          {{"id", pair.id},
           {"pharaoh",
            align::format_pharaoh(align::parse_pharaoh(it->second))}});
    }
  } else {
    std::vector<align::SentencePair> corpus_pairs;
    corpus_pairs.reserve(pairs.size());
    for (const corpus::ParallelExample& pair : pairs) {
      corpus_pairs.push_back(
          {pair.source.plain.tokens, pair.target.plain.tokens});
    }
    align::TrainOptions options;
    options.iterations = config.alignment.iterations;
    options.use_null = config.alignment.use_null;
    const align::TranslationTable table =
        align::train_ibm1(corpus_pairs, options);
    table.save(config.out_dir / kTableFile);
    align::ExtractOptions extract;
    extract.use_null = config.alignment.use_null;
    extract.symmetrize = config.alignment.symmetrize;
    for (const corpus::ParallelExample& pair : pairs) {
      const align::Alignment alignment =
          align::extract_alignment(table, pair.source.plain.tokens,
                                   pair.target.plain.tokens, extract);
      records.push_back(
          {{"id", pair.id}, {"pharaoh", align::format_pharaoh(alignment)}});
    }
  }
  write_jsonl(config.out_dir / kAlignmentsFile, records);
}

void stage_masquerade(const ExperimentConfig& config) {
  const std::vector<corpus::ParallelExample> pairs = load_pairs(config);
  const prompting::VariantTags tags = config.effective_tags();
  const bool reorder = tags.count(prompting::VariantTag::Reordered) > 0;
  const bool romanize = tags.count(prompting::VariantTag::Transliterated) > 0;
  if (!reorder && !romanize) {
    write_jsonl(config.out_dir / kMasqueradeFile, {});
    return;
  }

  std::unordered_map<std::string, align::Alignment> alignments;
  if (reorder) alignments = load_alignments(config);
  std::optional<translit::ScriptTable> table;
  if (romanize) {
    table = translit::load_script_table(
        resolved_resources(config), translit::script_from_name(config.script));
  }

  std::vector<json> records;
  records.reserve(pairs.size());
  for (const corpus::ParallelExample& pair : pairs) {
    std::vector<std::string> tokens = pair.target.plain.tokens;
    if (reorder) {
      auto it = alignments.find(pair.id);
      if (it == alignments.end()) {
        stage_error("no alignment for pair " + pair.id +
                    "; run the align stage first");
      }
      tokens = align::reorder_target(tokens, it->second).tokens;
    }
    std::string text = join_tokens(tokens);
    if (romanize) {
      text = translit::transliterate(text, *table);
    }
    records.push_back({{"id", pair.id}, {"display_target", text}});
  }
  write_jsonl(config.out_dir / kMasqueradeFile, records);
}

namespace {

std::unordered_map<std::string, std::string> load_display_targets(
    const ExperimentConfig& config) {
  std::unordered_map<std::string, std::string> out;
  const std::filesystem::path path = config.out_dir / kMasqueradeFile;
  if (!std::filesystem::exists(path)) return out;
  for (const json& record : read_jsonl(path)) {
    out[record.at("id").get<std::string>()] =
        record.at("display_target").get<std::string>();
  }
  return out;
}

prompting::PromptInput make_input(
    const corpus::ParallelExample& pair, const prompting::VariantTags& tags,
    const std::unordered_map<std::string, std::string>& display) {
  prompting::PromptInput input;
  input.pair = pair;
  input.tags = tags;
  auto it = display.find(pair.id);
  if (it != display.end()) input.display_target = it->second;
  return input;
}

}  // namespace

void stage_build_prompts(const ExperimentConfig& config) {
  std::vector<corpus::Diagnostic> diagnostics;
  const std::vector<corpus::ParallelExample> all_pairs = load_pairs(config);
  const std::vector<corpus::ParallelExample> pairs =
      effective_pairs(config, all_pairs, &diagnostics);
  const SplitIds split = load_split(config);
  const auto display = load_display_targets(config);
  const prompting::VariantTags tags = config.effective_tags();

  std::unordered_map<std::string, const corpus::ParallelExample*> by_id;
  for (const corpus::ParallelExample& pair : pairs) by_id[pair.id] = &pair;

  if (config.mode == RunMode::SftEmit) {
    const prompting::PromptFamily family =
        tags.count(prompting::VariantTag::Handholding)
            ? prompting::PromptFamily::SftHandholding
            : prompting::PromptFamily::SftMonolingual;
    const prompting::PromptTemplate tmpl = make_template(config, family);
    auto emit = [&](const std::vector<std::string>& ids, const char* file) {
      std::vector<json> records;
      for (const std::string& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) continue;  // dropped by pseudo labeling
        const prompting::PromptRecord record = prompting::build_sft_record(
            make_input(*it->second, tags, display), tmpl);
        records.push_back({{"id", record.id},
                           {"prompt", record.prompt_text},
                           {"completion", *record.expected_completion},
                           {"variant_tags", tags_to_json(tags)}});
      }
      write_jsonl(config.out_dir / file, records);
    };
    emit(split.train, kSftTrainFile);
    emit(split.validation, kSftValidationFile);

    json sidecar = prompting::sft_config_sidecar(config.task);
    sidecar["variant_tags"] = tags_to_json(tags);
    sidecar["source_locale"] = config.source_locale;
    sidecar["target_locale"] = config.target_locale;
    atomic_write(config.out_dir / kSftConfigFile, sidecar.dump(2) + "\n");
    append_diagnostics(config, "build-prompts", diagnostics);
    return;
  }

  const prompting::PromptTemplate tmpl =
      make_template(config, prompting::PromptFamily::IclHandholding);
  prompting::RetrievalConfig retrieval;
  retrieval.k = config.retrieval_k;
  retrieval.embeddings = prompting::load_embeddings(config.embeddings);

  std::vector<std::string> pool;
  for (const std::string& id : split.train) {
    if (by_id.count(id)) pool.push_back(id);
  }

  std::vector<json> records;
  for (const std::string& id : split.test) {
    auto it = by_id.find(id);
    if (it == by_id.end()) continue;  // dropped by pseudo labeling
    const std::vector<std::string> demo_ids =
        prompting::retrieve_exemplars(id, pool, retrieval);
    std::vector<prompting::PromptInput> demos;
    demos.reserve(demo_ids.size());
    for (const std::string& demo_id : demo_ids) {
      demos.push_back(make_input(*by_id.at(demo_id), tags, display));
    }
    const prompting::PromptRecord record = prompting::build_icl_prompt(
        make_input(*it->second, tags, display), demos, tmpl);
    records.push_back({{"id", record.id},
                       {"prompt", record.prompt_text},
                       {"variant_tags", tags_to_json(tags)}});
  }
  write_jsonl(config.out_dir / kPromptsFile, records);
  append_diagnostics(config, "build-prompts", diagnostics);
}

void stage_generate(const ExperimentConfig& config) {
  const codec::LabelSet labels = load_labels(config);
  std::vector<prompting::PromptRecord> prompts;
  for (const json& record : read_jsonl(config.out_dir / kPromptsFile)) {
    prompting::PromptRecord prompt;
    prompt.id = record.at("id").get<std::string>();
    prompt.prompt_text = record.at("prompt").get<std::string>();
    prompts.push_back(std::move(prompt));
  }

  backend::GenerationConfig generation = config.generation;
  if (!config.explicit_max_new_tokens) {
    generation.max_new_tokens = backend::default_max_new_tokens(config.task);
  }

  backend::MockOracle oracle;
  const backend::MockOracle* oracle_ptr = nullptr;
  if (generation.endpoint == backend::kMockEndpoint) {
    std::vector<corpus::Diagnostic> diagnostics;
    const std::vector<corpus::ParallelExample> pairs =
        effective_pairs(config, load_pairs(config), &diagnostics);
    const auto alignments = load_alignments(config);
    for (const corpus::ParallelExample& pair : pairs) {
      align::Alignment alignment;
      auto it = alignments.find(pair.id);
      if (it != alignments.end()) alignment = it->second;
      oracle[pair.id] = backend::mock_transfer(pair, alignment);
    }
    oracle_ptr = &oracle;
    append_diagnostics(config, "generate", diagnostics);
  }

  backend::BatchStats stats;
  const std::vector<backend::GenerationResult> results =
      backend::generate_batch(prompts, generation, labels, oracle_ptr, &stats);

  std::vector<json> records;
  records.reserve(results.size());
  for (const backend::GenerationResult& result : results) {
    records.push_back({{"id", result.id},
                       {"raw_text", result.raw_text},
                       {"failed", result.failed},
                       {"warnings", result.warnings}});
  }
  write_jsonl(config.out_dir / kGenerationsFile, records);
}

nlohmann::json stage_score(const ExperimentConfig& config) {
  const codec::LabelSet labels = load_labels(config);
  std::vector<backend::GenerationResult> results;
  for (const json& record : read_jsonl(config.out_dir / kGenerationsFile)) {
    backend::GenerationResult result;
    result.id = record.at("id").get<std::string>();
    result.raw_text = record.at("raw_text").get<std::string>();
    result.failed = record.at("failed").get<bool>();
    if (!result.failed) {
      try {
        result.parsed = codec::parse_annotated(result.raw_text, labels,
                                               /*strict=*/false,
                                               &result.warnings);
      } catch (const codec::CodecError&) {
        result.parsed.reset();
      }
    }
    results.push_back(std::move(result));
  }

  const std::vector<corpus::ParallelExample> pairs = load_pairs(config);
  const SplitIds split = load_split(config);
  std::unordered_map<std::string, const corpus::ParallelExample*> by_id;
  for (const corpus::ParallelExample& pair : pairs) by_id[pair.id] = &pair;
  std::set<std::string> test_ids(split.test.begin(), split.test.end());

  std::vector<corpus::Example> refs;
  refs.reserve(results.size());
  for (const backend::GenerationResult& result : results) {
    if (!test_ids.count(result.id)) {
      stage_error("generation id " + result.id + " is not in the test split");
    }
    refs.push_back(by_id.at(result.id)->target);
  }

  metrics::MauveInputs mauve;
  const metrics::MauveInputs* mauve_ptr = nullptr;
  if (!config.pred_embeddings.empty() && !config.ref_embeddings.empty()) {
    mauve.pred = prompting::load_embeddings(config.pred_embeddings);
    mauve.ref = prompting::load_embeddings(config.ref_embeddings);
    mauve.options = config.mauve;
    mauve_ptr = &mauve;
  }

  const metrics::RunReport report =
      metrics::evaluate_run(results, refs, mauve_ptr, config.mauve_sample,
                            config.seed, config_digest(config));

  json summary = {
      {"type", "summary"},
      {"micro_f1", report.micro_f1},
      {"em_rate", report.em_rate},
      {"chrf_mean", report.chrf_mean},
      {"mauve", report.mauve ? json(*report.mauve) : json(nullptr)},
      {"n_examples", report.n_examples},
      {"n_parse_failures", report.n_parse_failures},
      {"n_mauve", report.n_mauve},
      {"tp", report.totals.tp},
      {"fp", report.totals.fp},
      {"fn", report.totals.fn},
      {"config_digest", report.config_digest},
  };
  std::vector<json> lines;
  lines.push_back(summary);
  for (const metrics::PairScore& pair : report.pairs) {
    lines.push_back({{"type", "pair"},
                     {"id", pair.id},
                     {"tp", pair.f1_counts.tp},
                     {"fp", pair.f1_counts.fp},
                     {"fn", pair.f1_counts.fn},
                     {"em", pair.em},
                     {"chrf", pair.chrf}});
  }
  write_jsonl(config.out_dir / kReportJsonlFile, lines);

  ReportRow row;
  row.task = std::string(codec::task_kind_name(config.task));
  row.language = config.target_locale;
  row.configuration = config.configuration_label();
  row.micro_f1 = report.micro_f1;
  row.em = report.em_rate;
  row.chrf = report.chrf_mean;
  row.mauve = report.mauve;
  atomic_write(config.out_dir / kReportTxtFile, format_report_table({row}));
  return summary;
}

namespace {

std::size_t count_lines(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return 0;
  std::ifstream in(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++n;
  }
  return n;
}

void add_artifact(RunManifest& manifest, const ExperimentConfig& config,
                  const std::string& key, const char* file) {
  if (std::filesystem::exists(config.out_dir / file)) {
    manifest.artifacts[key] = file;
  }
}

json manifest_to_json(const RunManifest& manifest) {
  return json{
      {"tool_version", kToolVersion},
      {"status", manifest.status},
      {"error", manifest.error},
      {"config_digest", manifest.digest},
      {"started_at", manifest.started_at},
      {"finished_at", manifest.finished_at},
      {"artifacts", manifest.artifacts},
      {"counts", manifest.counts},
      {"report", manifest.report},
      {"config", config_to_json(manifest.config)},
      {"configuration_label", manifest.config.configuration_label()},
  };
}

void write_manifest(const RunManifest& manifest) {
  atomic_write(manifest.config.out_dir / kManifestFile,
               manifest_to_json(manifest).dump(2) + "\n");
}

}  // namespace

RunManifest run(const ExperimentConfig& config) {
  validate_config(config);
  std::filesystem::create_directories(config.out_dir);
  atomic_write(config.out_dir / kDiagnosticsFile, "");

  RunManifest manifest;
  manifest.config = config;
  manifest.status = "aborted";
  manifest.digest = config_digest(config);
  manifest.started_at = iso_timestamp();

  const prompting::VariantTags tags = config.effective_tags();
  const bool wants_pseudo =
      tags.count(prompting::VariantTag::PseudoSource) > 0;
  const bool wants_reorder = tags.count(prompting::VariantTag::Reordered) > 0;
  const bool wants_translit =
      tags.count(prompting::VariantTag::Transliterated) > 0;
  const bool mock = config.generation.endpoint == backend::kMockEndpoint;

  try {
    switch (config.mode) {
      case RunMode::Icl:
        stage_ingest(config);
        if (wants_pseudo) stage_pseudo_label(config);
        if (wants_reorder || mock) stage_align(config);
        if (wants_reorder || wants_translit) stage_masquerade(config);
        stage_build_prompts(config);
        stage_generate(config);
        manifest.report = stage_score(config);
        break;
      case RunMode::SftEmit:
        stage_ingest(config);
        if (wants_pseudo) stage_pseudo_label(config);
        if (wants_reorder) stage_align(config);
        if (wants_reorder || wants_translit) stage_masquerade(config);
        stage_build_prompts(config);
        break;
      case RunMode::Score:
        stage_ingest(config);
        manifest.report = stage_score(config);
        break;
    }
    manifest.status = "complete";
  } catch (const std::exception& e) {
    manifest.error = e.what();
    manifest.finished_at = iso_timestamp();
    write_manifest(manifest);
    throw;
  }

  add_artifact(manifest, config, "pairs", kPairsFile);
  add_artifact(manifest, config, "split", kSplitFile);
  add_artifact(manifest, config, "pseudo_labels", kPseudoFile);
  add_artifact(manifest, config, "alignments", kAlignmentsFile);
  add_artifact(manifest, config, "translation_table", kTableFile);
  add_artifact(manifest, config, "masquerade", kMasqueradeFile);
  add_artifact(manifest, config, "prompts", kPromptsFile);
  add_artifact(manifest, config, "sft_train", kSftTrainFile);
  add_artifact(manifest, config, "sft_validation", kSftValidationFile);
  add_artifact(manifest, config, "sft_config", kSftConfigFile);
  add_artifact(manifest, config, "generations", kGenerationsFile);
  add_artifact(manifest, config, "report_jsonl", kReportJsonlFile);
  add_artifact(manifest, config, "report_txt", kReportTxtFile);
  add_artifact(manifest, config, "diagnostics", kDiagnosticsFile);

  manifest.counts["pairs"] = count_lines(config.out_dir / kPairsFile);
  const SplitIds split = load_split(config);
  manifest.counts["train"] = split.train.size();
  manifest.counts["validation"] = split.validation.size();
  manifest.counts["test"] = split.test.size();
  manifest.counts["generations"] =
      count_lines(config.out_dir / kGenerationsFile);
  manifest.counts["diagnostics"] =
      count_lines(config.out_dir / kDiagnosticsFile);
  if (manifest.report.is_object()) {
    manifest.counts["parse_failures"] =
        manifest.report["n_parse_failures"];
  }

  manifest.finished_at = iso_timestamp();
  write_manifest(manifest);
  return manifest;
}

std::string report(const std::vector<std::filesystem::path>& manifests) {
  std::vector<ReportRow> rows;
  rows.reserve(manifests.size());
  for (const std::filesystem::path& path : manifests) {
    std::ifstream in(path);
    if (!in) {
      throw RunnerError(RunnerError::Kind::UnreadableReport,
                        "cannot open manifest " + path.string());
    }
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("config") ||
        !doc.contains("configuration_label")) {
      throw RunnerError(RunnerError::Kind::UnreadableReport,
                        "malformed manifest " + path.string());
    }
    ReportRow row;
    row.task = doc["config"].value("task_kind", "?");
    row.language = doc["config"].value("target_locale", "?");
    row.configuration = doc["configuration_label"].get<std::string>();
    const json& summary = doc["report"];
    if (summary.is_object()) {
      row.micro_f1 = summary.value("micro_f1", 0.0);
      row.em = summary.value("em_rate", 0.0);
      row.chrf = summary.value("chrf_mean", 0.0);
      if (summary.contains("mauve") && !summary["mauve"].is_null()) {
        row.mauve = summary["mauve"].get<double>();
      }
    }
    rows.push_back(std::move(row));
  }
  return format_report_table(std::move(rows));
}

}  // namespace xlat::runner
