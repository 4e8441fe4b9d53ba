// SPDX-License-Identifier: Apache-2.0

#include "xlat/align.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace xlat::align {

double TranslationTable::prob(const std::string& source,
                              const std::string& target) const {
  auto row = rows_.find(source);
  if (row == rows_.end()) return 0.0;
  auto cell = row->second.find(target);
  return cell == row->second.end() ? 0.0 : cell->second;
}

void TranslationTable::save(const std::filesystem::path& path) const {
  std::map<std::string, std::map<std::string, double>> sorted;
  for (const auto& [source, row] : rows_) {
    sorted[source].insert(row.begin(), row.end());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  char buffer[64];
  for (const auto& [source, row] : sorted) {
    for (const auto& [target, p] : row) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", p);
      out << source << '\t' << target << '\t' << buffer << '\n';
    }
  }
}

TranslationTable TranslationTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  TranslationTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t tab1 = line.find('\t');
    std::size_t tab2 = tab1 == std::string::npos
                           ? std::string::npos
                           : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected three tab-separated fields");
    }
    std::string source = line.substr(0, tab1);
    std::string target = line.substr(tab1 + 1, tab2 - tab1 - 1);
    table.row(source)[target] = std::stod(line.substr(tab2 + 1));
  }
  return table;
}

TranslationTable initial_table(const std::vector<SentencePair>& corpus,
                               bool use_null) {
  std::unordered_map<std::string, std::set<std::string>> cooc;
  for (const SentencePair& pair : corpus) {
    for (const std::string& t : pair.target) {
      if (use_null) cooc[kNullWord].insert(t);
      for (const std::string& s : pair.source) {
        cooc[s].insert(t);
      }
    }
  }
  TranslationTable table;
  for (const auto& [source, targets] : cooc) {
    const double uniform = 1.0 / static_cast<double>(targets.size());
    TranslationTable::Row& row = table.row(source);
    for (const std::string& t : targets) {
      row[t] = uniform;
    }
  }
  return table;
}

TranslationTable train_ibm1(const std::vector<SentencePair>& corpus,
                            const TrainOptions& options, TrainStats* stats) {
  if (options.iterations < 0) {
    throw std::invalid_argument("iterations must be non-negative");
  }
  TranslationTable table = initial_table(corpus, options.use_null);
  if (stats) {
    stats->log_likelihood.clear();
    stats->max_row_sum_error.clear();
  }

  for (int iter = 0; iter < options.iterations; ++iter) {
    std::unordered_map<std::string, TranslationTable::Row> counts;
    std::unordered_map<std::string, double> totals;
    double log_likelihood = 0.0;

    for (const SentencePair& pair : corpus) {
      std::vector<const std::string*> sources;
      sources.reserve(pair.source.size() + 1);
      static const std::string null_word = kNullWord;
      if (options.use_null) sources.push_back(&null_word);
      for (const std::string& s : pair.source) sources.push_back(&s);
      if (sources.empty()) continue;

      for (const std::string& t : pair.target) {
        double denom = 0.0;
        for (const std::string* s : sources) denom += table.prob(*s, t);
        if (denom <= 0.0) continue;
        log_likelihood +=
            std::log(denom / static_cast<double>(sources.size()));
        for (const std::string* s : sources) {
          const double share = table.prob(*s, t) / denom;
          if (share <= 0.0) continue;
          counts[*s][t] += share;
          totals[*s] += share;
        }
      }
    }

    TranslationTable next;
    double max_row_error = 0.0;
    for (auto& [source, row] : counts) {
      const double total = totals[source];
      if (total <= 0.0) continue;
      TranslationTable::Row& out = next.row(source);
      double row_sum = 0.0;
      for (auto& [target, count] : row) {
        out[target] = count / total;
        row_sum += out[target];
      }
      max_row_error = std::max(max_row_error, std::fabs(row_sum - 1.0));
    }
    table = std::move(next);
    if (stats) {
      stats->log_likelihood.push_back(log_likelihood);
      stats->max_row_sum_error.push_back(max_row_error);
    }
  }
  return table;
}

namespace {

/// Best source position for one target word: highest probability, ties to
/// the lowest index; NULL (-1) only on a strict win.
int best_source(const TranslationTable& table,
                const std::vector<std::string>& source,
                const std::string& target, bool use_null) {
  int best = -2;
  double best_prob = -1.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const double p = table.prob(source[i], target);
    if (p > best_prob) {
      best_prob = p;
      best = static_cast<int>(i);
    }
  }
  if (use_null && table.prob(kNullWord, target) > best_prob) {
    best = -1;
  }
  return best;
}

}  // namespace

Alignment extract_alignment(const TranslationTable& table,
                            const std::vector<std::string>& source,
                            const std::vector<std::string>& target,
                            const ExtractOptions& options) {
  Alignment forward;
  for (std::size_t j = 0; j < target.size(); ++j) {
    const int i = best_source(table, source, target[j], options.use_null);
    if (i <= -2) continue;
    forward.push_back({i, static_cast<int>(j)});
  }
  if (!options.symmetrize) return forward;

  std::set<std::pair<int, int>> reverse;
  for (std::size_t i = 0; i < source.size(); ++i) {
    int best = -1;
    double best_prob = -1.0;
    for (std::size_t j = 0; j < target.size(); ++j) {
      const double p = table.prob(source[i], target[j]);
      if (p > best_prob) {
        best_prob = p;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) reverse.insert({static_cast<int>(i), best});
  }
  Alignment intersected;
  for (const AlignmentLink& link : forward) {
    if (link.source >= 0 && reverse.count({link.source, link.target})) {
      intersected.push_back(link);
    }
  }
  return intersected;
}

std::string format_pharaoh(const Alignment& alignment) {
  std::string out;
  for (const AlignmentLink& link : alignment) {
    if (link.source < 0) continue;
    if (!out.empty()) out += ' ';
    out += std::to_string(link.source);
    out += '-';
    out += std::to_string(link.target);
  }
  return out;
}

Alignment parse_pharaoh(const std::string& text) {
  Alignment out;
  std::istringstream in(text);
  std::string item;
  while (in >> item) {
    const std::size_t dash = item.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == item.size()) {
      throw std::invalid_argument("bad alignment pair: " + item);
    }
    AlignmentLink link;
    link.source = std::stoi(item.substr(0, dash));
    link.target = std::stoi(item.substr(dash + 1));
    out.push_back(link);
  }
  return out;
}

namespace {

/// Source anchor per target position: own link when aligned, otherwise the
/// nearest preceding aligned token's anchor (-1 before any aligned token).
std::vector<int> target_anchors(std::size_t n_target,
                                const Alignment& alignment) {
  std::vector<int> direct(n_target, -1);
  std::vector<bool> aligned(n_target, false);
  for (const AlignmentLink& link : alignment) {
    if (link.target < 0 || static_cast<std::size_t>(link.target) >= n_target) {
      throw std::out_of_range("alignment target index out of range");
    }
    if (link.source < 0) continue;
    if (!aligned[link.target] || link.source < direct[link.target]) {
      direct[link.target] = link.source;
      aligned[link.target] = true;
    }
  }
  std::vector<int> anchors(n_target, -1);
  int current = -1;
  for (std::size_t j = 0; j < n_target; ++j) {
    if (aligned[j]) current = direct[j];
    anchors[j] = current;
  }
  return anchors;
}

}  // namespace

Reordering reorder_target(const std::vector<std::string>& target,
                          const Alignment& alignment) {
  const std::vector<int> anchors = target_anchors(target.size(), alignment);
  Reordering out;
  out.permutation.resize(target.size());
  for (std::size_t j = 0; j < target.size(); ++j) {
    out.permutation[j] = static_cast<int>(j);
  }
  std::stable_sort(out.permutation.begin(), out.permutation.end(),
                   [&](int a, int b) { return anchors[a] < anchors[b]; });
  out.tokens.reserve(target.size());
  for (int j : out.permutation) {
    out.tokens.push_back(target[j]);
  }
  return out;
}

codec::LabeledSentence project_labels(const codec::LabeledSentence& source,
                                      const std::vector<std::string>& target,
                                      const Alignment& alignment) {
  source.validate();
  codec::LabeledSentence out;
  out.tokens = target;
  out.labels.assign(target.size(), std::nullopt);
  for (const AlignmentLink& link : alignment) {
    if (link.target < 0 ||
        static_cast<std::size_t>(link.target) >= target.size()) {
      throw std::out_of_range("alignment target index out of range");
    }
    if (link.source < 0) continue;
    if (static_cast<std::size_t>(link.source) >= source.tokens.size()) {
      throw std::out_of_range("alignment source index out of range");
    }
    if (!out.labels[link.target]) {
      out.labels[link.target] = source.labels[link.source];
    }
  }
  return out;
}

}  // namespace xlat::align
