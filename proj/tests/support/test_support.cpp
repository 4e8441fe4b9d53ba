// SPDX-License-Identifier: Apache-2.0

#include "test_support.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "xlat/resources.hpp"
#include "xlat/unicode.hpp"

namespace xlat::testsupport {

codec::LabelSet bundled_labels(codec::TaskKind task) {
  const std::filesystem::path dir = resources::resource_dir();
  return codec::LabelSet::load(
      resources::label_table(dir, task == codec::TaskKind::SlotFilling),
      task);
}

codec::LabeledSentence random_sentence(std::mt19937_64& rng,
                                       const codec::LabelSet& labels,
                                       std::size_t max_len) {
  static const std::string kChars = "abcdefghijklmnopqrstuvwxyz0123456789:.-";
  static const std::vector<std::string> kUnicodeTokens = {
      "सूरज", "घर", "किताब", "ঢাকা", "தமிழ்"};

  std::uniform_int_distribution<std::size_t> n_dist(1, max_len);
  std::uniform_int_distribution<std::size_t> len_dist(1, 8);
  std::uniform_int_distribution<std::size_t> char_dist(0, kChars.size() - 1);
  std::uniform_int_distribution<std::size_t> label_dist(
      0, labels.labels().size() - 1);
  std::uniform_int_distribution<int> pct(0, 99);

  codec::LabeledSentence z;
  const std::size_t n = n_dist(rng);
  while (z.tokens.size() < n) {
    std::string token;
    if (pct(rng) < 10) {
      token = kUnicodeTokens[char_dist(rng) % kUnicodeTokens.size()];
    } else {
      const std::size_t len = len_dist(rng);
      for (std::size_t i = 0; i < len; ++i) token += kChars[char_dist(rng)];
      if (token == ":" || token == "." || token == "-") token += "x";
    }
    std::optional<std::string> label;
    if (pct(rng) < 40) label = labels.labels()[label_dist(rng)];
    // Occasionally repeat the label over a short run to hit group merging.
    std::size_t run = 1;
    if (label && pct(rng) < 30) run = 2 + static_cast<std::size_t>(pct(rng) % 2);
    for (std::size_t r = 0; r < run && z.tokens.size() < n; ++r) {
      z.tokens.push_back(token);
      z.labels.push_back(label);
    }
  }
  return z;
}

namespace {

bool chr_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
         c == U'\v';
}

std::vector<std::u32string> char_ngrams(const std::u32string& s, int n) {
  std::vector<std::u32string> out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= s.size(); ++i) {
    out.push_back(s.substr(i, static_cast<std::size_t>(n)));
  }
  return out;
}

std::vector<std::string> word_ngrams(const std::vector<std::string>& words,
                                     int n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size();
       ++i) {
    std::string gram;
    for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) {
      gram += words[i + j];
      gram += '\x1f';  // unit separator keeps ["ab","c"] != ["a","bc"]
    }
    out.push_back(std::move(gram));
  }
  return out;
}

template <typename T>
std::size_t multiset_overlap(std::vector<T> a, std::vector<T> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0, n = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

template <typename T>
bool accumulate_order(const std::vector<T>& pred, const std::vector<T>& ref,
                      double& total, int& used) {
  if (pred.empty() && ref.empty()) return false;
  const double m = static_cast<double>(
      multiset_overlap(pred, ref));
  const double p = pred.empty() ? 0.0 : m / static_cast<double>(pred.size());
  const double r = ref.empty() ? 0.0 : m / static_cast<double>(ref.size());
  const double denom = 4.0 * p + r;
  total += denom == 0.0 ? 0.0 : 5.0 * p * r / denom;
  ++used;
  return true;
}

}  // namespace

double brute_chrf(const std::string& pred, const std::string& ref) {
  std::u32string pred_chars, ref_chars;
  for (char32_t c : unicode::to_codepoints(pred)) {
    if (!chr_space(c)) pred_chars.push_back(c);
  }
  for (char32_t c : unicode::to_codepoints(ref)) {
    if (!chr_space(c)) ref_chars.push_back(c);
  }
  const std::vector<std::string> pred_words = codec::tokenize(pred);
  const std::vector<std::string> ref_words = codec::tokenize(ref);

  double total = 0.0;
  int used = 0;
  for (int n = 1; n <= 6; ++n) {
    accumulate_order(char_ngrams(pred_chars, n), char_ngrams(ref_chars, n),
                     total, used);
  }
  for (int n = 1; n <= 2; ++n) {
    accumulate_order(word_ngrams(pred_words, n), word_ngrams(ref_words, n),
                     total, used);
  }
  if (used == 0) return 100.0;
  return 100.0 * total / static_cast<double>(used);
}

ScratchDir::ScratchDir(const std::string& stem) {
  static std::atomic<unsigned> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          (stem + "-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter.fetch_add(1)));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

ScratchDir::~ScratchDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_file(const std::filesystem::path& path,
                const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace xlat::testsupport
