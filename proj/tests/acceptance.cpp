// SPDX-License-Identifier: Apache-2.0
//
// Release gate. Each check prints one [PASS]/[FAIL] line; the process
// exits nonzero when anything failed. Checks are heavier than the unit
// tests (larger property counts, wall-clock budgets) and intentionally
// independent of the doctest binaries.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "stub_server.hpp"
#include "test_support.hpp"
#include "xlat/align.hpp"
#include "xlat/backend.hpp"
#include "xlat/codec.hpp"
#include "xlat/corpus.hpp"
#include "xlat/metrics.hpp"
#include "xlat/prompting.hpp"
#include "xlat/resources.hpp"
#include "xlat/runner.hpp"
#include "xlat/translit.hpp"

using namespace xlat;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %-18s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------- codec

void check_codec_round_trip() {
  const auto start = Clock::now();
  bool ok = true;
  std::string detail;
  std::mt19937_64 rng(424242);
  std::size_t rounds = 0;
  for (const auto task : {codec::TaskKind::SlotFilling, codec::TaskKind::Ner}) {
    const codec::LabelSet labels = testsupport::bundled_labels(task);
    for (int i = 0; i < 5000 && ok; ++i) {
      const codec::LabeledSentence z =
          testsupport::random_sentence(rng, labels, 12);
      const std::string text = codec::render_annotated(z);
      const codec::LabeledSentence back =
          codec::parse_annotated(text, labels, /*strict=*/true);
      if (back.tokens != z.tokens || back.labels != z.labels) {
        ok = false;
        detail = "round trip diverged on: " + text;
      }
      // Rendered text is a fixed point of parse-then-render.
      if (ok && codec::render_annotated(back) != text) {
        ok = false;
        detail = "canonical text not a fixed point: " + text;
      }
      ++rounds;
    }
  }
  const double elapsed = seconds_since(start);
  if (ok && elapsed >= 5.0) {
    ok = false;
    detail = "too slow";
  }
  if (ok) {
    char buffer[96];
    std::snprintf(buffer, sizeof(buffer), "%zu sentences in %.2fs", rounds,
                  elapsed);
    detail = buffer;
  }
  report("codec-round-trip", ok, detail);
}

// ---------------------------------------------------------------- split

void check_split_arithmetic() {
  std::vector<int> items(16000);
  for (int i = 0; i < 16000; ++i) items[i] = i;
  const auto split = corpus::split_dataset(items, corpus::SplitRatio{}, 7);
  bool ok = split.train.size() == 12800 && split.validation.size() == 1600 &&
            split.test.size() == 1600;
  std::string detail = "16000 -> 12800/1600/1600";
  if (!ok) {
    detail = "got " + std::to_string(split.train.size()) + "/" +
             std::to_string(split.validation.size()) + "/" +
             std::to_string(split.test.size());
  }
  const auto again = corpus::split_dataset(items, corpus::SplitRatio{}, 7);
  if (ok && (again.train != split.train ||
             again.validation != split.validation ||
             again.test != split.test)) {
    ok = false;
    detail = "same seed produced a different assignment";
  }
  report("split-arithmetic", ok, detail);
}

// ------------------------------------------------------------ filtering

void check_test_filtering() {
  const codec::LabelSet labels =
      testsupport::bundled_labels(codec::TaskKind::SlotFilling);
  std::mt19937_64 rng(99);
  std::vector<corpus::Example> examples;
  std::size_t labeled_in = 0;
  for (int i = 0; i < 500; ++i) {
    corpus::Example example;
    example.id = "x" + std::to_string(i);
    codec::LabeledSentence gold = testsupport::random_sentence(rng, labels, 6);
    if (i % 2 == 0) {
      gold.labels.assign(gold.labels.size(), std::nullopt);
    }
    example.plain = codec::strip_labels(gold);
    example.gold = gold;
    if (gold.labeled_count() > 0) ++labeled_in;
    examples.push_back(std::move(example));
  }
  const auto kept = corpus::filter_test_labeled(examples);
  bool ok = kept.size() == labeled_in;
  for (const corpus::Example& example : kept) {
    if (!example.gold || example.gold->labeled_count() == 0) ok = false;
  }
  report("test-filtering", ok,
         std::to_string(kept.size()) + " of " + std::to_string(examples.size()) +
             " retained, all carrying labels");
}

// ----------------------------------------------------------------- ibm1

void check_ibm1_em() {
  const auto start = Clock::now();
  const std::vector<align::SentencePair> corpus = {
      {{"the", "house"}, {"das", "haus"}},
      {{"the", "book"}, {"das", "buch"}},
  };
  bool ok = true;
  std::string detail;
  for (const bool use_null : {true, false}) {
    align::TrainOptions options;
    options.iterations = 10;
    options.use_null = use_null;
    align::TrainStats stats;
    const align::TranslationTable table =
        align::train_ibm1(corpus, options, &stats);
    for (std::size_t i = 0; ok && i + 1 < stats.log_likelihood.size(); ++i) {
      if (stats.log_likelihood[i + 1] < stats.log_likelihood[i] - 1e-9) {
        ok = false;
        detail = "log-likelihood decreased at iteration " + std::to_string(i);
      }
    }
    for (std::size_t i = 0; ok && i < stats.max_row_sum_error.size(); ++i) {
      if (stats.max_row_sum_error[i] > 1e-9) {
        ok = false;
        detail = "row sums drifted by " +
                 std::to_string(stats.max_row_sum_error[i]);
      }
    }
    if (ok && !(table.prob("the", "das") > 0.5)) {
      ok = false;
      detail = "p(das|the) stayed at " + std::to_string(table.prob("the", "das"));
    }
  }
  const double elapsed = seconds_since(start);
  if (ok && elapsed >= 1.0) {
    ok = false;
    detail = "too slow";
  }
  if (ok) {
    char buffer[96];
    std::snprintf(buffer, sizeof(buffer),
                  "10 iterations monotone, rows normalized, %.3fs", elapsed);
    detail = buffer;
  }
  report("ibm1-em", ok, detail);
}

// -------------------------------------------------------------- translit

std::size_t sweep(const translit::ScriptTable& table, const char* name,
                  bool& ok, std::string& detail) {
  const std::filesystem::path path =
      std::filesystem::path(XLAT_TEST_DATA_DIR) / "translit" / name;
  std::ifstream in(path);
  if (!in) {
    ok = false;
    detail = "missing fixture " + path.string();
    return 0;
  }
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      ok = false;
      detail = std::string(name) + " has a malformed row";
      return rows;
    }
    const std::string input = line.substr(0, tab);
    const std::string expected = line.substr(tab + 1);
    const std::string got = translit::transliterate(input, table);
    if (got != expected) {
      ok = false;
      detail = std::string(name) + ": " + input + " -> " + got +
               " (wanted " + expected + ")";
      return rows;
    }
    if (translit::transliterate(got, table) != got) {
      ok = false;
      detail = std::string(name) + ": output not idempotent for " + input;
      return rows;
    }
    ++rows;
  }
  return rows;
}

void check_transliteration() {
  bool ok = true;
  std::string detail;
  const std::filesystem::path resources = resources::resource_dir();
  const auto devanagari =
      translit::load_script_table(resources, translit::Script::Devanagari);
  const auto bengali =
      translit::load_script_table(resources, translit::Script::Bengali);
  const auto tamil =
      translit::load_script_table(resources, translit::Script::Tamil);

  if (translit::transliterate("सूरज", devanagari) != "sūraja") {
    ok = false;
    detail = "sūraja mismatch";
  }
  if (ok && translit::transliterate("रविवार", devanagari) != "ravivāra") {
    ok = false;
    detail = "ravivāra mismatch";
  }

  std::size_t total = 0;
  const struct {
    const char* file;
    const translit::ScriptTable* table;
  } sweeps[] = {{"devanagari.tsv", &devanagari},
                {"bengali.tsv", &bengali},
                {"tamil.tsv", &tamil}};
  for (const auto& entry : sweeps) {
    if (!ok) break;
    const std::size_t rows = sweep(*entry.table, entry.file, ok, detail);
    if (ok && rows < 200) {
      ok = false;
      detail = std::string(entry.file) + " has only " + std::to_string(rows) +
               " rows";
    }
    total += rows;
  }

  const std::string latin = "the quick brown fox 123 :-)";
  if (ok && translit::transliterate(latin, devanagari) != latin) {
    ok = false;
    detail = "Latin text was altered";
  }
  if (ok) {
    detail = std::to_string(total) + " fixture rows byte-exact across 3 scripts";
  }
  report("transliteration", ok, detail);
}

// ------------------------------------------------------------- reorder

void check_reordering() {
  bool ok = true;
  std::string detail;

  const auto fig = align::reorder_target({"s", "o", "v"},
                                         {{0, 0}, {2, 1}, {1, 2}});
  if (fig.tokens != std::vector<std::string>{"s", "v", "o"}) {
    ok = false;
    detail = "subject-object-verb case did not land in source order";
  }

  std::mt19937_64 rng(31415);
  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_int_distribution<int> pct(0, 99);
  for (int round = 0; ok && round < 10000; ++round) {
    const int n_target = len(rng);
    const int n_source = len(rng);
    std::vector<std::string> target;
    target.reserve(n_target);
    for (int j = 0; j < n_target; ++j) {
      target.push_back("w" + std::to_string(j));
    }
    align::Alignment links;
    for (int j = 0; j < n_target; ++j) {
      const int roll = pct(rng);
      if (roll < 60) {
        links.push_back({pct(rng) % n_source, j});
      } else if (roll < 70) {
        links.push_back({-1, j});  // NULL-aligned
      }
    }
    const auto result = align::reorder_target(target, links);
    std::vector<int> sorted = result.permutation;
    std::sort(sorted.begin(), sorted.end());
    for (int j = 0; ok && j < n_target; ++j) {
      if (sorted[j] != j || result.tokens[j] != target[result.permutation[j]]) {
        ok = false;
        detail = "not a permutation at round " + std::to_string(round);
      }
    }
  }
  if (ok) detail = "10000 random alignments stayed permutations";
  report("reordering", ok, detail);
}

// ------------------------------------------------------------- prompts

void check_prompt_goldens() {
  bool ok = true;
  std::string detail;
  const std::filesystem::path dir =
      resources::resource_dir() / "prompts" / "golden";

  prompting::PromptTemplate sft;  // Hindi/English slot-filling defaults
  const std::string handholding = prompting::render_sft_prompt(
      sft, "[Unannotated target]", std::string("[Annotated source]"));
  if (handholding != testsupport::read_file(dir / "sft_handholding.txt")) {
    ok = false;
    detail = "sft_handholding.txt diverged";
  }
  if (ok && handholding.find("Reinsert the slot annotations") ==
                std::string::npos) {
    ok = false;
    detail = "missing reinsert anchor";
  }

  const std::string monolingual =
      prompting::render_sft_prompt(sft, "[Unannotated target]", std::nullopt);
  if (ok && monolingual != testsupport::read_file(dir / "sft_monolingual.txt")) {
    ok = false;
    detail = "sft_monolingual.txt diverged";
  }

  prompting::PromptTemplate icl;
  icl.family = prompting::PromptFamily::IclHandholding;
  icl.target_language_name = "Tamil";
  std::string rendered = prompting::icl_system_block(icl);
  rendered += "\n\n";
  rendered += prompting::icl_block(
      icl, "<list of tokens present in annotated source>",
      "[Unannotated target]", "[Annotated source]",
      std::string("[Annotated target]"));
  rendered += "\n\n";
  rendered += prompting::icl_block(
      icl, "<list of tokens present in annotated source>",
      "<An unannotated Tamil sentence>", "<An annotated English sentence>",
      std::nullopt);
  if (ok && rendered != testsupport::read_file(dir / "icl_handholding.txt")) {
    ok = false;
    detail = "icl_handholding.txt diverged";
  }
  if (ok && rendered.find("<<SYS>> Add annotations for the corresponding "
                          "tokens") == std::string::npos) {
    ok = false;
    detail = "missing system anchor";
  }
  if (ok) detail = "3 golden files byte-identical";
  report("prompt-goldens", ok, detail);
}

// ------------------------------------------------------------ retrieval

void check_retrieval() {
  bool ok = prompting::RetrievalConfig{}.k == 8;
  std::string detail = ok ? "" : "default k is not 8";

  std::mt19937_64 rng(2718);
  std::uniform_int_distribution<int> pool_size(1, 30);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::uniform_int_distribution<int> pct(0, 99);

  auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };

  for (int round = 0; ok && round < 1000; ++round) {
    prompting::RetrievalConfig cfg;  // default k = 8
    const int n = pool_size(rng);
    std::vector<std::string> pool;
    for (int i = 0; i < n; ++i) {
      const std::string id = "d" + std::to_string(i);
      pool.push_back(id);
      std::vector<double> v(3);
      for (double& x : v) x = coord(rng);
      if (pct(rng) < 5) v.assign(3, 0.0);  // zero vectors rank last
      cfg.embeddings[id] = v;
    }
    cfg.embeddings["query"] = {coord(rng), coord(rng), coord(rng)};
    if (pct(rng) < 30) pool.push_back("query");  // query inside its own pool

    const auto got = prompting::retrieve_exemplars("query", pool, cfg);

    std::vector<std::string> want;
    for (const std::string& id : pool) {
      if (id != "query") want.push_back(id);
    }
    std::stable_sort(want.begin(), want.end(),
                     [&](const std::string& a, const std::string& b) {
                       const double sa =
                           cosine(cfg.embeddings[a], cfg.embeddings["query"]);
                       const double sb =
                           cosine(cfg.embeddings[b], cfg.embeddings["query"]);
                       if (sa != sb) return sa > sb;
                       return a < b;
                     });
    if (want.size() > 8) want.resize(8);

    if (got != want) {
      ok = false;
      detail = "ranking diverged from the oracle at round " +
               std::to_string(round);
    }
    for (const std::string& id : got) {
      if (id == "query") {
        ok = false;
        detail = "query retrieved itself";
      }
    }
  }
  if (ok) detail = "1000 pools matched the brute-force cosine oracle, k=8";
  report("retrieval", ok, detail);
}

// -------------------------------------------------------------- metrics

void check_metric_oracles() {
  bool ok = true;
  std::string detail;

  const auto counts = metrics::micro_f1(
      {{"a", "b", "c"}, {"L1", "L3", "L4"}},
      {{"a", "b", "c"}, {"L1", "L2", std::nullopt}});
  if (counts != metrics::F1Counts{1, 2, 1} ||
      std::abs(metrics::f1_from_counts(counts) - 0.4) > 1e-12) {
    ok = false;
    detail = "hand-counted F1 fixture broke";
  }
  if (ok && metrics::f1_from_counts({0, 0, 0}) != 1.0) {
    ok = false;
    detail = "empty counts must score 1";
  }

  const codec::LabelSet labels =
      testsupport::bundled_labels(codec::TaskKind::SlotFilling);
  std::mt19937_64 rng(161803);
  for (int round = 0; ok && round < 1000; ++round) {
    const std::string pred = codec::render_annotated(
        testsupport::random_sentence(rng, labels, 7));
    const std::string ref = codec::render_annotated(
        testsupport::random_sentence(rng, labels, 7));
    const double got = metrics::chrf_pp(pred, ref);
    const double want = testsupport::brute_chrf(pred, ref);
    if (std::abs(got - want) > 1e-9) {
      ok = false;
      detail = "chrF diverged by " + std::to_string(std::abs(got - want));
    }
  }

  if (ok) {
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<std::vector<double>> self, far;
    for (int i = 0; i < 50; ++i) {
      self.push_back({noise(rng), noise(rng), noise(rng), noise(rng)});
      far.push_back({noise(rng) + 10, noise(rng) + 10, noise(rng) + 10,
                     noise(rng) + 10});
    }
    metrics::MauveOptions options;
    options.seed = 5;
    const double identical = metrics::mauve_score(self, self, options);
    const double separated = metrics::mauve_score(self, far, options);
    if (std::abs(identical - 1.0) > 1e-6) {
      ok = false;
      detail = "self-similarity scored " + std::to_string(identical);
    } else if (separated >= 0.1) {
      ok = false;
      detail = "separated clusters scored " + std::to_string(separated);
    }
  }
  if (ok) {
    detail = "chrF oracle x1000, F1 hand counts, self=1 / separated<0.1";
  }
  report("metric-oracles", ok, detail);
}

// ------------------------------------------------------------ pipeline

std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json") continue;  // carries wall-clock timestamps
    out[name] = testsupport::read_file(entry.path());
  }
  return out;
}

void check_e2e_soundness() {
  const auto start = Clock::now();
  bool ok = true;
  std::string detail;
  try {
    testsupport::ScratchDir scratch;
    const std::filesystem::path data =
        std::filesystem::path(XLAT_TEST_DATA_DIR) / "e2e";

    runner::ExperimentConfig config;
    config.task = codec::TaskKind::SlotFilling;
    config.mode = runner::RunMode::Icl;
    config.tags = {prompting::VariantTag::Handholding};
    config.seed = 13;
    config.source_corpus = data / "source_en.jsonl";
    config.target_corpus = data / "target_hi.jsonl";
    config.alignments = data / "alignments.jsonl";
    config.embeddings = data / "embeddings.jsonl";
    config.out_dir = scratch.path() / "run";
    config.generation.endpoint = backend::kMockEndpoint;

    const runner::RunManifest manifest = runner::run(config);
    if (manifest.status != "complete") {
      ok = false;
      detail = "run did not complete";
    }
    const double f1 = manifest.report.value("micro_f1", -1.0);
    const double em = manifest.report.value("em_rate", -1.0);
    const double chrf = manifest.report.value("chrf_mean", -1.0);
    if (ok && (f1 != 1.0 || em != 1.0 || std::abs(chrf - 100.0) > 1e-9)) {
      ok = false;
      char buffer[96];
      std::snprintf(buffer, sizeof(buffer),
                    "micro_f1=%.4f em=%.4f chrf=%.2f", f1, em, chrf);
      detail = buffer;
    }

    if (ok) {
      const auto first = snapshot(config.out_dir);
      runner::run(config);
      const auto second = snapshot(config.out_dir);
      if (first != second) {
        ok = false;
        detail = "rerun artifacts were not byte-identical";
      }
    }
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  const double elapsed = seconds_since(start);
  if (ok && elapsed >= 10.0) {
    ok = false;
    detail = "too slow";
  }
  if (ok) {
    char buffer[96];
    std::snprintf(buffer, sizeof(buffer),
                  "50-pair mock run perfect and reproducible in %.2fs",
                  elapsed);
    detail = buffer;
  }
  report("e2e-soundness", ok, detail);
}

// -------------------------------------------------------------- backend

void check_backend_contracts() {
  bool ok = true;
  std::string detail;

  backend::GenerationConfig defaults;
  if (defaults.penalty_alpha != 0.6 || defaults.top_k != 4) {
    ok = false;
    detail = "sampler defaults are wrong";
  }
  if (ok && (backend::default_max_new_tokens(codec::TaskKind::SlotFilling) !=
                 512 ||
             backend::default_max_new_tokens(codec::TaskKind::Ner) != 768)) {
    ok = false;
    detail = "token budgets are wrong";
  }

  const codec::LabelSet labels(codec::TaskKind::SlotFilling, {"date"});

  if (ok) {
    // The stub sleeps a prompt-dependent few milliseconds, echoes the
    // prompt back, and records the first request body it sees.
    std::mutex mu;
    std::string first_body;
    testsupport::StubServer server([&](const httplib::Request& req,
                                       httplib::Response& res) {
      {
        std::lock_guard<std::mutex> lock(mu);
        if (first_body.empty()) first_body = req.body;
      }
      const auto body = nlohmann::json::parse(req.body);
      const std::string prompt = body.at("prompt").get<std::string>();
      std::this_thread::sleep_for(
          std::chrono::milliseconds(std::hash<std::string>{}(prompt) % 23));
      const nlohmann::json choice = {{"text", "echo " + prompt}};
      const nlohmann::json response = {
          {"choices", nlohmann::json::array({choice})}};
      res.set_content(response.dump(), "application/json");
    });

    std::vector<prompting::PromptRecord> records;
    for (int i = 0; i < 24; ++i) {
      prompting::PromptRecord record;
      record.id = "r" + std::to_string(i);
      record.prompt_text = "prompt number " + std::to_string(i);
      records.push_back(std::move(record));
    }

    for (const int in_flight : {1, 2, 8}) {
      if (!ok) break;
      backend::GenerationConfig cfg;
      cfg.endpoint = server.endpoint();
      cfg.max_in_flight = in_flight;
      cfg.max_new_tokens =
          backend::default_max_new_tokens(codec::TaskKind::SlotFilling);
      const auto results = backend::generate_batch(records, cfg, labels);
      if (results.size() != records.size()) {
        ok = false;
        detail = "result count mismatch";
        break;
      }
      for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].id != records[i].id ||
            results[i].raw_text != "echo " + records[i].prompt_text) {
          ok = false;
          detail = "order broken at max_in_flight=" +
                   std::to_string(in_flight);
          break;
        }
      }
    }

    if (ok) {
      const auto body = nlohmann::json::parse(first_body);
      if (body.at("penalty_alpha").get<double>() != 0.6 ||
          body.at("top_k").get<int>() != 4 ||
          body.at("max_new_tokens").get<int>() != 512) {
        ok = false;
        detail = "request body defaults diverged: " + first_body;
      }
    }
  }
  if (ok) {
    detail = "order stable at max_in_flight 1/2/8; request carries "
             "0.6/4/512 and the NER budget is 768";
  }
  report("backend-contracts", ok, detail);
}

}  // namespace

int main() {
  std::printf("release gate\n------------\n");
  check_codec_round_trip();
  check_split_arithmetic();
  check_test_filtering();
  check_ibm1_em();
  check_transliteration();
  check_reordering();
  check_prompt_goldens();
  check_retrieval();
  check_metric_oracles();
  check_e2e_soundness();
  check_backend_contracts();
  if (g_failures > 0) {
    std::printf("------------\n%d check(s) failed\n", g_failures);
    return 1;
  }
  std::printf("------------\nall checks passed\n");
  return 0;
}
