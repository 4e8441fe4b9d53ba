// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "test_support.hpp"
#include "xlat/align.hpp"

using namespace xlat;
using doctest::Approx;

namespace {

// The worked EM example: two sentence pairs sharing one source word.
std::vector<align::SentencePair> toy_corpus() {
  return {
      {{"the", "house"}, {"das", "haus"}},
      {{"the", "book"}, {"das", "buch"}},
  };
}

align::TranslationTable table_from(
    const std::vector<std::tuple<std::string, std::string, double>>& cells) {
  align::TranslationTable table;
  for (const auto& [s, t, p] : cells) table.row(s)[t] = p;
  return table;
}

}  // namespace

TEST_CASE("initial table is uniform over co-occurring targets") {
  const auto table = align::initial_table(toy_corpus(), /*use_null=*/false);
  CHECK(table.prob("the", "das") == Approx(1.0 / 3).epsilon(1e-12));
  CHECK(table.prob("the", "haus") == Approx(1.0 / 3).epsilon(1e-12));
  CHECK(table.prob("the", "buch") == Approx(1.0 / 3).epsilon(1e-12));
  CHECK(table.prob("house", "das") == Approx(0.5).epsilon(1e-12));
  CHECK(table.prob("house", "buch") == 0.0);
  CHECK(table.rows().count(align::kNullWord) == 0);

  const auto with_null = align::initial_table(toy_corpus(), true);
  CHECK(with_null.prob(align::kNullWord, "das") ==
        Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("EM iterations hit the hand-derived posteriors") {
  align::TrainOptions options;
  options.use_null = false;

  options.iterations = 1;
  auto table = align::train_ibm1(toy_corpus(), options);
  CHECK(table.prob("the", "das") == Approx(0.5).epsilon(1e-12));

  options.iterations = 2;
  table = align::train_ibm1(toy_corpus(), options);
  CHECK(table.prob("the", "das") == Approx(0.6).epsilon(1e-12));

  options.use_null = true;
  options.iterations = 1;
  table = align::train_ibm1(toy_corpus(), options);
  CHECK(table.prob("the", "das") == Approx(0.5).epsilon(1e-12));

  options.iterations = 2;
  table = align::train_ibm1(toy_corpus(), options);
  CHECK(table.prob("the", "das") == Approx(4.0 / 7).epsilon(1e-12));
}

TEST_CASE("likelihood is non-decreasing and rows stay normalized") {
  align::TrainOptions options;
  options.iterations = 10;
  align::TrainStats stats;
  const auto table = align::train_ibm1(toy_corpus(), options, &stats);

  REQUIRE(stats.log_likelihood.size() == 10);
  for (std::size_t i = 1; i < stats.log_likelihood.size(); ++i) {
    CHECK(stats.log_likelihood[i] >= stats.log_likelihood[i - 1] - 1e-9);
  }
  REQUIRE(stats.max_row_sum_error.size() == 10);
  for (const double err : stats.max_row_sum_error) {
    CHECK(err <= 1e-9);
  }
  CHECK(table.prob("the", "das") > 0.5);

  for (const auto& [source, row] : table.rows()) {
    double sum = 0.0;
    for (const auto& [target, p] : row) sum += p;
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("translation table TSV round trips") {
  align::TrainOptions options;
  options.iterations = 3;
  const auto table = align::train_ibm1(toy_corpus(), options);

  testsupport::ScratchDir dir("xlat-align");
  const auto path = dir.path() / "table.tsv";
  table.save(path);
  const auto loaded = align::TranslationTable::load(path);
  for (const auto& [source, row] : table.rows()) {
    for (const auto& [target, p] : row) {
      CHECK(loaded.prob(source, target) == Approx(p).epsilon(1e-15));
    }
  }
  // Saving the reloaded table reproduces the bytes.
  const auto path2 = dir.path() / "table2.tsv";
  loaded.save(path2);
  CHECK(testsupport::read_file(path) == testsupport::read_file(path2));
}

TEST_CASE("extraction takes the per-target argmax, ties to lowest index") {
  const auto table = table_from({
      {"a", "x", 0.6},
      {"b", "x", 0.6},  // tie with a — a wins
      {"a", "y", 0.1},
      {"b", "y", 0.9},
  });
  align::ExtractOptions options;
  options.use_null = false;
  const auto links =
      align::extract_alignment(table, {"a", "b"}, {"x", "y"}, options);
  REQUIRE(links.size() == 2);
  CHECK(links[0] == align::AlignmentLink{0, 0});
  CHECK(links[1] == align::AlignmentLink{1, 1});
}

TEST_CASE("NULL wins only strictly and never survives symmetrization") {
  auto table = table_from({
      {"a", "x", 0.5},
      {align::kNullWord, "x", 0.5},  // tie — real word keeps the link
      {align::kNullWord, "y", 0.9},
      {"a", "y", 0.1},
  });
  align::ExtractOptions options;
  const auto links = align::extract_alignment(table, {"a"}, {"x", "y"},
                                              options);
  REQUIRE(links.size() == 2);
  CHECK(links[0] == align::AlignmentLink{0, 0});
  CHECK(links[1] == align::AlignmentLink{-1, 1});  // NULL strict win

  options.symmetrize = true;
  const auto sym = align::extract_alignment(table, {"a"}, {"x", "y"},
                                            options);
  REQUIRE(sym.size() == 1);
  CHECK(sym[0] == align::AlignmentLink{0, 0});
}

TEST_CASE("symmetrized links match a brute-force intersection") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> prob(0.0, 1.0);
  const std::vector<std::string> source = {"s0", "s1", "s2", "s3"};
  const std::vector<std::string> target = {"t0", "t1", "t2"};

  for (int round = 0; round < 200; ++round) {
    align::TranslationTable table;
    for (const auto& s : source) {
      for (const auto& t : target) table.row(s)[t] = prob(rng);
    }
    align::ExtractOptions options;
    options.use_null = false;
    options.symmetrize = true;
    const auto got = align::extract_alignment(table, source, target, options);

    // Forward per-target argmax intersected with reverse per-source argmax.
    std::set<std::pair<int, int>> expect;
    for (std::size_t j = 0; j < target.size(); ++j) {
      int best = 0;
      for (std::size_t i = 1; i < source.size(); ++i) {
        if (table.prob(source[i], target[j]) >
            table.prob(source[best], target[j])) {
          best = static_cast<int>(i);
        }
      }
      int rev = 0;
      for (std::size_t jj = 1; jj < target.size(); ++jj) {
        if (table.prob(source[best], target[jj]) >
            table.prob(source[best], target[rev])) {
          rev = static_cast<int>(jj);
        }
      }
      if (rev == static_cast<int>(j)) {
        expect.insert({best, static_cast<int>(j)});
      }
    }
    std::set<std::pair<int, int>> got_set;
    for (const auto& link : got) got_set.insert({link.source, link.target});
    REQUIRE(got_set == expect);
  }
}

TEST_CASE("pharaoh text round trips and skips NULL links") {
  const align::Alignment links = {{0, 0}, {-1, 1}, {2, 2}};
  const std::string text = align::format_pharaoh(links);
  CHECK(text == "0-0 2-2");
  const auto back = align::parse_pharaoh(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == align::AlignmentLink{0, 0});
  CHECK(back[1] == align::AlignmentLink{2, 2});
  CHECK(align::parse_pharaoh("").empty());
  CHECK_THROWS_AS(align::parse_pharaoh("3"), std::invalid_argument);
  CHECK_THROWS_AS(align::parse_pharaoh("3-"), std::invalid_argument);
}

TEST_CASE("SOV target reorders into source order") {
  // Source order subject-verb-object; target order subject-object-verb.
  const std::vector<std::string> target = {"s", "o", "v"};
  const align::Alignment links = {{0, 0}, {2, 1}, {1, 2}};
  const auto result = align::reorder_target(target, links);
  CHECK(result.tokens == std::vector<std::string>{"s", "v", "o"});
  CHECK(result.permutation == std::vector<int>{0, 2, 1});
}

TEST_CASE("unaligned tokens follow their preceding aligned neighbor") {
  // "ka" trails the possessor it attaches to.
  const std::vector<std::string> target = {"raam", "ka", "ghar"};
  const align::Alignment links = {{2, 0}, {0, 2}};  // raam<-2, ghar<-0
  const auto result = align::reorder_target(target, links);
  CHECK(result.tokens == std::vector<std::string>{"ghar", "raam", "ka"});
}

TEST_CASE("tokens before any aligned token stay in front") {
  const std::vector<std::string> target = {"oh", "kal", "baarish"};
  const align::Alignment links = {{1, 1}, {0, 2}};
  const auto result = align::reorder_target(target, links);
  CHECK(result.tokens == std::vector<std::string>{"oh", "baarish", "kal"});
}

TEST_CASE("reordering is always a permutation") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_int_distribution<int> pct(0, 99);
  for (int round = 0; round < 2000; ++round) {
    const int n_target = len(rng);
    const int n_source = len(rng);
    std::vector<std::string> target;
    for (int j = 0; j < n_target; ++j) {
      target.push_back("w" + std::to_string(j));
    }
    align::Alignment links;
    for (int j = 0; j < n_target; ++j) {
      if (pct(rng) < 70) {
        links.push_back({pct(rng) % n_source, j});
      }
    }
    const auto result = align::reorder_target(target, links);
    REQUIRE(result.tokens.size() == target.size());
    REQUIRE(result.permutation.size() == target.size());
    std::vector<int> sorted = result.permutation;
    std::sort(sorted.begin(), sorted.end());
    for (int j = 0; j < n_target; ++j) REQUIRE(sorted[j] == j);
    for (int j = 0; j < n_target; ++j) {
      REQUIRE(result.tokens[j] == target[result.permutation[j]]);
    }
  }
}

TEST_CASE("reorder_target rejects out-of-range links") {
  CHECK_THROWS_AS(align::reorder_target({"a"}, {{0, 5}}), std::out_of_range);
}

TEST_CASE("label projection copies labels over links only") {
  codec::LabeledSentence source;
  source.tokens = {"sun", "on", "sunday"};
  source.labels = {"weather_descriptor", std::nullopt, "date"};
  const std::vector<std::string> target = {"ravivar", "ko", "dhoop"};
  const align::Alignment links = {{2, 0}, {-1, 1}, {0, 2}};
  const auto projected = align::project_labels(source, target, links);
  CHECK(projected.tokens == target);
  CHECK(projected.labels[0] == "date");
  CHECK_FALSE(projected.labels[1].has_value());  // NULL-aligned
  CHECK(projected.labels[2] == "weather_descriptor");
}

TEST_CASE("first projected label wins on duplicate links") {
  codec::LabeledSentence source;
  source.tokens = {"a", "b"};
  source.labels = {"date", "time"};
  const auto projected =
      align::project_labels(source, {"t"}, {{0, 0}, {1, 0}});
  CHECK(projected.labels[0] == "date");
}
