// SPDX-License-Identifier: Apache-2.0

#include "xlat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <map>
#include <unordered_map>

#include "xlat/unicode.hpp"

namespace xlat::metrics {

double f1_from_counts(const F1Counts& counts) {
  const double denom =
      2.0 * static_cast<double>(counts.tp) + static_cast<double>(counts.fp) +
      static_cast<double>(counts.fn);
  if (denom == 0.0) return 1.0;
  return 2.0 * static_cast<double>(counts.tp) / denom;
}

namespace {

bool label_match(const std::optional<std::string>& a,
                 const std::optional<std::string>& b) {
  return a.has_value() && b.has_value() && *a == *b;
}

struct LcsCell {
  int len = 0;
  int tp = 0;
  friend bool operator<(const LcsCell& a, const LcsCell& b) {
    if (a.len != b.len) return a.len < b.len;
    return a.tp < b.tp;
  }
};

}  // namespace

F1Counts micro_f1(const codec::LabeledSentence& pred,
                  const codec::LabeledSentence& ref) {
  pred.validate();
  ref.validate();
  const std::size_t n = pred.tokens.size();
  const std::size_t m = ref.tokens.size();

  // Lexicographic (length, label-agreements) LCS: the agreement count is
  // maximized over all maximum-length matchings, so it is well defined and
  // symmetric in the two arguments.
  std::vector<std::vector<LcsCell>> dp(n + 1, std::vector<LcsCell>(m + 1));
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      LcsCell best = std::max(dp[i - 1][j], dp[i][j - 1]);
      if (pred.tokens[i - 1] == ref.tokens[j - 1]) {
        LcsCell take = dp[i - 1][j - 1];
        take.len += 1;
        if (label_match(pred.labels[i - 1], ref.labels[j - 1])) take.tp += 1;
        best = std::max(best, take);
      }
      dp[i][j] = best;
    }
  }
  const std::size_t tp = static_cast<std::size_t>(dp[n][m].tp);
  F1Counts counts;
  counts.tp = tp;
  counts.fp = pred.labeled_count() - tp;
  counts.fn = ref.labeled_count() - tp;
  return counts;
}

int exact_match(std::string_view pred_text, std::string_view ref_text) {
  const auto normalize = [](std::string_view text) {
    std::string out;
    for (const std::string& token : codec::tokenize(text)) {
      if (!out.empty()) out += ' ';
      out += token;
    }
    return out;
  };
  return normalize(pred_text) == normalize(ref_text) ? 1 : 0;
}

namespace {

constexpr int kCharOrders = 6;
constexpr int kWordOrders = 2;
constexpr double kBetaSquared = 4.0;  // beta = 2

template <typename Sequence>
std::map<Sequence, int> ngram_counts(const Sequence& items, int order) {
  std::map<Sequence, int> counts;
  if (static_cast<int>(items.size()) < order) return counts;
  for (std::size_t i = 0; i + order <= items.size(); ++i) {
    counts[Sequence(items.begin() + i, items.begin() + i + order)] += 1;
  }
  return counts;
}

struct OrderScore {
  bool vacuous = false;
  double f = 0.0;
};

template <typename Sequence>
OrderScore order_f_score(const Sequence& pred, const Sequence& ref,
                         int order) {
  const auto pred_counts = ngram_counts(pred, order);
  const auto ref_counts = ngram_counts(ref, order);
  std::size_t total_pred = 0, total_ref = 0, matches = 0;
  for (const auto& [gram, count] : pred_counts) {
    total_pred += static_cast<std::size_t>(count);
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) {
      matches += static_cast<std::size_t>(std::min(count, it->second));
    }
  }
  for (const auto& [gram, count] : ref_counts) {
    total_ref += static_cast<std::size_t>(count);
  }
  if (total_pred == 0 && total_ref == 0) return {true, 0.0};
  const double precision =
      total_pred == 0 ? 0.0
                      : static_cast<double>(matches) /
                            static_cast<double>(total_pred);
  const double recall = total_ref == 0
                            ? 0.0
                            : static_cast<double>(matches) /
                                  static_cast<double>(total_ref);
  const double denom = kBetaSquared * precision + recall;
  if (denom == 0.0) return {false, 0.0};
  return {false, (1.0 + kBetaSquared) * precision * recall / denom};
}

std::u32string squeeze_codepoints(std::string_view text) {
  std::u32string all = unicode::to_codepoints(text);
  std::u32string out;
  out.reserve(all.size());
  for (char32_t cp : all) {
    if (cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' ||
        cp == U'\f' || cp == U'\v') {
      continue;
    }
    out.push_back(cp);
  }
  return out;
}

}  // namespace

double chrf_pp(std::string_view pred_text, std::string_view ref_text) {
  const std::u32string pred_chars = squeeze_codepoints(pred_text);
  const std::u32string ref_chars = squeeze_codepoints(ref_text);
  const std::vector<std::string> pred_words = codec::tokenize(pred_text);
  const std::vector<std::string> ref_words = codec::tokenize(ref_text);

  double sum = 0.0;
  int included = 0;
  for (int order = 1; order <= kCharOrders; ++order) {
    OrderScore score = order_f_score(pred_chars, ref_chars, order);
    if (score.vacuous) continue;
    sum += score.f;
    ++included;
  }
  for (int order = 1; order <= kWordOrders; ++order) {
    OrderScore score = order_f_score(pred_words, ref_words, order);
    if (score.vacuous) continue;
    sum += score.f;
    ++included;
  }
  if (included == 0) return 100.0;
  return 100.0 * sum / static_cast<double>(included);
}

namespace {

double squared_distance(const std::vector<double>& a,
                        const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

std::vector<int> kmeans_assign(const std::vector<std::vector<double>>& points,
                               int k, std::uint64_t seed, int max_iterations) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) centroids.push_back(points[order[c]]);

  std::vector<int> assignment(points.size(), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      int best = 0;
      double best_dist = squared_distance(points[i], centroids[0]);
      for (int c = 1; c < k; ++c) {
        const double dist = squared_distance(points[i], centroids[c]);
        if (dist < best_dist) {
          best_dist = dist;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    const std::size_t dim = points[0].size();
    std::vector<std::vector<double>> sums(
        static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = static_cast<std::size_t>(assignment[i]);
      counts[c] += 1;
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t d = 0; d < points[0].size(); ++d) {
        centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
      }
    }
  }
  return assignment;
}

double kl_divergence(const std::vector<double>& p,
                     const std::vector<double>& m) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sum += p[i] * std::log(p[i] / m[i]);
  }
  return sum;
}

}  // namespace

double mauve_score(const std::vector<std::vector<double>>& pred,
                   const std::vector<std::vector<double>>& ref,
                   const MauveOptions& options) {
  if (pred.empty() || ref.empty()) {
    throw MetricError(MetricError::Kind::TooFewPoints,
                      "both embedding sets must be non-empty");
  }
  const std::size_t dim = pred[0].size();
  for (const auto& v : pred) {
    if (v.size() != dim) {
      throw MetricError(MetricError::Kind::DimensionMismatch,
                        "embedding dimensions differ within pred");
    }
  }
  for (const auto& v : ref) {
    if (v.size() != dim) {
      throw MetricError(MetricError::Kind::DimensionMismatch,
                        "embedding dimensions differ between pred and ref");
    }
  }
  const std::size_t n = pred.size() + ref.size();
  const int k = options.n_clusters > 0
                    ? options.n_clusters
                    : std::max<int>(2, static_cast<int>(n / 20));
  if (static_cast<std::size_t>(k) > n) {
    throw MetricError(MetricError::Kind::TooFewPoints,
                      "n_clusters exceeds the number of points");
  }

  std::vector<std::vector<double>> pool;
  pool.reserve(n);
  pool.insert(pool.end(), pred.begin(), pred.end());
  pool.insert(pool.end(), ref.begin(), ref.end());
  const std::vector<int> assignment =
      kmeans_assign(pool, k, options.seed, options.max_kmeans_iterations);

  // Add-one smoothed cluster histograms.
  std::vector<double> p_hist(static_cast<std::size_t>(k), 1.0);
  std::vector<double> q_hist(static_cast<std::size_t>(k), 1.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p_hist[static_cast<std::size_t>(assignment[i])] += 1.0;
  }
  for (std::size_t i = pred.size(); i < n; ++i) {
    q_hist[static_cast<std::size_t>(assignment[i])] += 1.0;
  }
  const double p_total = static_cast<double>(pred.size() + k);
  const double q_total = static_cast<double>(ref.size() + k);
  for (double& v : p_hist) v /= p_total;
  for (double& v : q_hist) v /= q_total;

  std::vector<std::pair<double, double>> curve;
  curve.reserve(static_cast<std::size_t>(options.n_lambda) + 2);
  curve.emplace_back(0.0, 1.0);
  curve.emplace_back(1.0, 0.0);
  for (int t = 1; t <= options.n_lambda; ++t) {
    const double lambda =
        static_cast<double>(t) / static_cast<double>(options.n_lambda + 1);
    std::vector<double> mixture(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < mixture.size(); ++i) {
      mixture[i] = lambda * p_hist[i] + (1.0 - lambda) * q_hist[i];
    }
    const double kl_p = kl_divergence(p_hist, mixture);
    const double kl_q = kl_divergence(q_hist, mixture);
    curve.emplace_back(std::exp(-options.c * kl_q),
                       std::exp(-options.c * kl_p));
  }
  std::sort(curve.begin(), curve.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second > b.second;
  });
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].first - curve[i - 1].first) *
            (curve[i].second + curve[i - 1].second) / 2.0;
  }
  return area;
}

RunReport evaluate_run(const std::vector<backend::GenerationResult>& results,
                       const std::vector<corpus::Example>& refs,
                       const MauveInputs* mauve, std::size_t mauve_sample,
                       std::uint64_t seed, std::string config_digest) {
  std::unordered_map<std::string, const corpus::Example*> by_id;
  for (const corpus::Example& ref : refs) {
    if (!by_id.emplace(ref.id, &ref).second) {
      throw MetricError(MetricError::Kind::IdMismatch,
                        "duplicate reference id " + ref.id);
    }
  }
  if (results.size() != refs.size()) {
    throw MetricError(MetricError::Kind::IdMismatch,
                      "result and reference counts differ");
  }

  RunReport report;
  report.config_digest = std::move(config_digest);
  report.n_examples = results.size();
  double em_sum = 0.0;
  double chrf_sum = 0.0;
  std::unordered_map<std::string, bool> seen;
  for (const backend::GenerationResult& result : results) {
    auto it = by_id.find(result.id);
    if (it == by_id.end() || seen[result.id]) {
      throw MetricError(MetricError::Kind::IdMismatch,
                        "result id " + result.id +
                            " missing from references or duplicated");
    }
    seen[result.id] = true;
    const corpus::Example& ref = *it->second;
    if (!ref.gold) {
      throw MetricError(MetricError::Kind::IdMismatch,
                        "reference " + ref.id + " has no gold annotation");
    }
    const std::string ref_text = codec::render_annotated(*ref.gold);

    PairScore score;
    score.id = result.id;
    if (result.parsed) {
      score.f1_counts = micro_f1(*result.parsed, *ref.gold);
    } else {
      report.n_parse_failures += 1;
      score.f1_counts = {0, 0, ref.gold->labeled_count()};
    }
    score.em = exact_match(result.raw_text, ref_text);
    score.chrf = chrf_pp(result.raw_text, ref_text);

    report.totals.tp += score.f1_counts.tp;
    report.totals.fp += score.f1_counts.fp;
    report.totals.fn += score.f1_counts.fn;
    em_sum += score.em;
    chrf_sum += score.chrf;
    report.pairs.push_back(std::move(score));
  }

  report.micro_f1 = f1_from_counts(report.totals);
  if (!results.empty()) {
    em_sum /= static_cast<double>(results.size());
    chrf_sum /= static_cast<double>(results.size());
    report.em_rate = em_sum;
    report.chrf_mean = chrf_sum;
  }

  if (mauve != nullptr && !results.empty()) {
    std::vector<std::string> ids;
    ids.reserve(results.size());
    for (const backend::GenerationResult& result : results) {
      ids.push_back(result.id);
    }
    std::sort(ids.begin(), ids.end());
    corpus::detail::deterministic_shuffle(ids, seed);
    const std::size_t m = std::min(mauve_sample, ids.size());
    std::vector<std::vector<double>> pred_vecs, ref_vecs;
    pred_vecs.reserve(m);
    ref_vecs.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      auto p = mauve->pred.find(ids[i]);
      auto r = mauve->ref.find(ids[i]);
      if (p == mauve->pred.end() || r == mauve->ref.end()) {
        throw MetricError(MetricError::Kind::IdMismatch,
                          "missing embedding for id " + ids[i]);
      }
      pred_vecs.push_back(p->second);
      ref_vecs.push_back(r->second);
    }
    report.n_mauve = m;
    report.mauve = mauve_score(pred_vecs, ref_vecs, mauve->options);
  }
  return report;
}

}  // namespace xlat::metrics
