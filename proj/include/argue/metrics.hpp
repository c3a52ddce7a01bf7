#pragma once

// Threshold-free ranking metrics and the Wilcoxon signed-rank test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "argue/error.hpp"

namespace argue {

struct EvalResult {
  double auc = 0.0;
  double ap = 0.0;
  std::size_t n_normal = 0;
  std::size_t n_anomalous = 0;
};

namespace detail {

inline void require_both_classes(std::span<const double> scores, std::span<const int> labels, const char* what,
                                 std::size_t& n_pos, std::size_t& n_neg) {
  detail::require_shape(scores.size() == labels.size(), std::string(what) + ": scores/labels length mismatch");
  n_pos = 0;
  for (int l : labels) n_pos += l != 0;
  n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError(std::string(what) + ": labels must contain both classes");
}

// Indices sorted by descending score; ties keep input order.
inline std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace detail

/// Mann-Whitney form of the ROC AUC; tied pairs get half credit.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t n_pos, n_neg;
  detail::require_both_classes(scores, labels, "roc_auc", n_pos, n_neg);
  const auto order = detail::descending_order(scores);
  // Walk tie groups from the top; each positive beats every negative below its group.
  double credit = 0;
  std::size_t neg_above = 0;
  for (std::size_t s = 0; s < order.size();) {
    std::size_t e = s, pos = 0, neg = 0;
    while (e < order.size() && scores[order[e]] == scores[order[s]]) {
      (labels[order[e]] ? pos : neg)++;
      ++e;
    }
    const double neg_below = static_cast<double>(n_neg - neg_above - neg);
    credit += static_cast<double>(pos) * (neg_below + 0.5 * static_cast<double>(neg));
    neg_above += neg;
    s = e;
  }
  return credit / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Σ (R_k − R_{k−1}) P_k over distinct descending thresholds.
inline double average_precision(std::span<const double> scores, std::span<const int> labels) {
  std::size_t n_pos, n_neg;
  detail::require_both_classes(scores, labels, "average_precision", n_pos, n_neg);
  const auto order = detail::descending_order(scores);
  double ap = 0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t s = 0; s < order.size();) {
    std::size_t e = s, pos = 0;
    while (e < order.size() && scores[order[e]] == scores[order[s]]) {
      pos += labels[order[e]] != 0;
      ++e;
    }
    tp += pos;
    seen = e;
    if (pos > 0)
      ap += (static_cast<double>(pos) / static_cast<double>(n_pos)) *
            (static_cast<double>(tp) / static_cast<double>(seen));
    s = e;
  }
  return ap;
}

inline EvalResult evaluate(std::span<const double> scores, std::span<const int> labels) {
  EvalResult r;
  r.auc = roc_auc(scores, labels);
  r.ap = average_precision(scores, labels);
  for (int l : labels) (l ? r.n_anomalous : r.n_normal)++;
  return r;
}

// ---------------------------------------------------------------------------

inline constexpr std::size_t kWilcoxonExactMax = 12;

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;      // sum of ranks of positive differences
  std::size_t n_eff = 0;    // non-zero differences
  bool exact = false;
};

namespace detail {

// Average ranks (1-based) of |d|; returns ranks in input order.
inline std::vector<double> average_ranks(std::span<const double> magnitudes) {
  std::vector<std::size_t> idx(magnitudes.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return magnitudes[a] < magnitudes[b]; });
  std::vector<double> ranks(magnitudes.size());
  for (std::size_t s = 0; s < idx.size();) {
    std::size_t e = s;
    while (e < idx.size() && magnitudes[idx[e]] == magnitudes[idx[s]]) ++e;
    const double r = 0.5 * static_cast<double>(s + 1 + e);  // mean of ranks s+1 .. e
    for (std::size_t k = s; k < e; ++k) ranks[idx[k]] = r;
    s = e;
  }
  return ranks;
}

}  // namespace detail

/// Two-sided paired test of a vs b. Zero differences are dropped; exact
/// null distribution for n_eff <= 12, normal approximation with tie and
/// continuity correction beyond.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  detail::require_shape(a.size() == b.size(), "wilcoxon_signed_rank: length mismatch");
  std::vector<double> mag;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0.0) continue;
    mag.push_back(std::abs(d));
    positive.push_back(d > 0);
  }
  WilcoxonResult r;
  r.n_eff = mag.size();
  if (r.n_eff == 0) return r;

  const auto ranks = detail::average_ranks(mag);
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (positive[i]) r.w_plus += ranks[i];
  const double n = static_cast<double>(r.n_eff);
  const double mean = n * (n + 1) / 4.0;

  if (r.n_eff <= kWilcoxonExactMax) {
    // Doubled average ranks are integers; count sign assignments per doubled sum.
    r.exact = true;
    std::vector<std::size_t> twice(ranks.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) total += twice[i] = static_cast<std::size_t>(std::lround(2 * ranks[i]));
    std::vector<std::uint64_t> count(total + 1, 0);
    count[0] = 1;
    for (auto t : twice)
      for (std::size_t s = total; s >= t; --s) {
        count[s] += count[s - t];
        if (s == t) break;
      }
    const auto observed = static_cast<std::size_t>(std::lround(2 * r.w_plus));
    const auto mirror = total - observed;
    const std::size_t lo = std::min(observed, mirror), hi = std::max(observed, mirror);
    std::uint64_t tail = 0;
    for (std::size_t s = 0; s <= total; ++s)
      if (s <= lo || s >= hi) tail += count[s];
    r.p_value = std::min(1.0, static_cast<double>(tail) / std::ldexp(1.0, static_cast<int>(r.n_eff)));
    return r;
  }

  double tie_term = 0;
  {
    std::vector<double> sorted = mag;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t s = 0; s < sorted.size();) {
      std::size_t e = s;
      while (e < sorted.size() && sorted[e] == sorted[s]) ++e;
      const double t = static_cast<double>(e - s);
      tie_term += t * t * t - t;
      s = e;
    }
  }
  const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
  const double dev = std::abs(r.w_plus - mean) - 0.5;
  if (dev <= 0 || var <= 0) return r;
  const double z = dev / std::sqrt(var);
  r.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), std::numeric_limits<double>::min(), 1.0);
  return r;
}

}  // namespace argue
