#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "argue/data.hpp"
#include "argue/error.hpp"
#include "argue/matrix.hpp"
#include "argue/random.hpp"

namespace argue {

enum class ClusterStrategy : std::uint8_t { by_class, by_attribute, by_algorithm };

inline const char* to_string(ClusterStrategy s) {
  switch (s) {
    case ClusterStrategy::by_class: return "by_class";
    case ClusterStrategy::by_attribute: return "by_attribute";
    case ClusterStrategy::by_algorithm: return "by_algorithm";
  }
  return "?";
}

inline ClusterStrategy parse_cluster_strategy(const std::string& s) {
  if (s == "by_class") return ClusterStrategy::by_class;
  if (s == "by_attribute") return ClusterStrategy::by_attribute;
  if (s == "by_algorithm") return ClusterStrategy::by_algorithm;
  throw ConfigError("unknown clustering strategy '" + s + "'");
}

/// Expert index per training sample. Total and surjective onto [0, expert_count).
struct ClusterAssignment {
  std::vector<std::size_t> expert_index;
  std::size_t expert_count = 0;
  ClusterStrategy strategy = ClusterStrategy::by_class;
  /// Source label of each expert (class name, attribute value, or "cluster<k>").
  std::vector<std::string> expert_labels;

  std::size_t size() const { return expert_index.size(); }

  std::vector<std::size_t> counts() const {
    std::vector<std::size_t> c(expert_count, 0);
    for (auto j : expert_index) ++c.at(j);
    return c;
  }

  /// Throws ConfigError naming the first empty expert.
  void validate() const {
    if (expert_count == 0) throw ConfigError("assignment has no experts");
    for (auto j : expert_index)
      if (j >= expert_count) throw ConfigError("assignment index out of range");
    auto c = counts();
    for (std::size_t j = 0; j < c.size(); ++j)
      if (c[j] == 0) throw ConfigError("cluster " + std::to_string(j) + " is empty");
  }

  bool operator==(const ClusterAssignment&) const = default;
};

/// One "row_index,expert_index" line per sample.
inline void write_assignment(std::ostream& os, const ClusterAssignment& a) {
  for (std::size_t i = 0; i < a.expert_index.size(); ++i) os << i << ',' << a.expert_index[i] << '\n';
}

/// Experts are numbered by sorted label order.
template <typename Label>
ClusterAssignment assign_by_class(std::span<const Label> labels,
                                  ClusterStrategy strategy = ClusterStrategy::by_class) {
  std::map<Label, std::size_t> index;
  for (const auto& l : labels) index.emplace(l, 0);
  std::size_t next = 0;
  ClusterAssignment a;
  for (auto& [label, idx] : index) {
    idx = next++;
    if constexpr (std::is_convertible_v<Label, std::string>)
      a.expert_labels.emplace_back(label);
    else
      a.expert_labels.push_back(std::to_string(label));
  }
  a.expert_count = index.size();
  a.strategy = strategy;
  a.expert_index.reserve(labels.size());
  for (const auto& l : labels) a.expert_index.push_back(index.at(l));
  return a;
}

template <typename Label>
ClusterAssignment assign_by_class(const std::vector<Label>& labels) {
  return assign_by_class(std::span<const Label>(labels));
}

/// Splits by a categorical attribute; `max_distinct` caps the number of experts.
inline ClusterAssignment assign_by_attribute_values(std::span<const std::string> values,
                                                    std::size_t max_distinct = 32) {
  std::map<std::string, int> distinct;
  for (const auto& v : values) distinct.emplace(v, 0);
  if (distinct.size() > max_distinct)
    throw AttributeError("attribute has " + std::to_string(distinct.size()) + " distinct values (cap " +
                         std::to_string(max_distinct) + "); use by_algorithm clustering instead");
  if (distinct.size() == 1) std::cerr << "warning: attribute is constant, using a single expert\n";
  return assign_by_class(values, ClusterStrategy::by_attribute);
}

// ---------------------------------------------------------------------------
// k-means with k-means++ seeding

struct KMeansResult {
  std::vector<std::size_t> labels;
  Matrix centroids;
  /// Within-cluster sum of squares after seeding and after every Lloyd iteration.
  std::vector<double> objective_history;
  std::size_t iterations = 0;
};

struct KMeansOptions {
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;  // stop when no centroid moves further than this
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) { return squared_distance(a, b); }

// Nearest centroid, lowest index on ties.
inline std::size_t nearest(std::span<const double> x, const Matrix& c, double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < c.rows(); ++k) {
    const double d = sq_dist(x, c.row(k));
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

inline double assign_all(const Matrix& x, const Matrix& c, std::vector<std::size_t>& labels) {
  double obj = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double d;
    labels[i] = nearest(x.row(i), c, &d);
    obj += d;
  }
  return obj;
}

}  // namespace detail

inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, KMeansOptions opts = {}) {
  if (k == 0) throw ConfigError("k-means needs k >= 1");
  if (k > x.rows())
    throw ConfigError("k-means: k=" + std::to_string(k) + " exceeds sample count " + std::to_string(x.rows()));
  Rng rng(seed);
  const std::size_t n = x.rows();
  KMeansResult r;
  r.centroids = Matrix(k, x.cols());

  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  auto first = x.row(pick(rng));
  std::copy(first.begin(), first.end(), r.centroids.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = detail::sq_dist(x.row(i), r.centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0;
    for (double d : d2) total += d;
    std::size_t chosen = 0;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng), acc = 0;
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target && d2[i] > 0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    auto row = x.row(chosen);
    std::copy(row.begin(), row.end(), r.centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], detail::sq_dist(x.row(i), r.centroids.row(c)));
  }

  r.labels.assign(n, 0);
  r.objective_history.push_back(detail::assign_all(x, r.centroids, r.labels));

  for (r.iterations = 0; r.iterations < opts.max_iterations;) {
    ++r.iterations;
    Matrix next(k, x.cols());
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = next.row(r.labels[i]);
      auto src = x.row(i);
      for (std::size_t f = 0; f < src.size(); ++f) dst[f] += src[f];
      ++count[r.labels[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) {
        // Re-seed an empty cluster at the point farthest from its current centroid.
        std::size_t far = 0;
        double far_d = -1;
        for (std::size_t i = 0; i < n; ++i) {
          if (taken[i]) continue;
          const double d = detail::sq_dist(x.row(i), r.centroids.row(r.labels[i]));
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        taken[far] = true;
        auto row = x.row(far);
        std::copy(row.begin(), row.end(), next.row(c).begin());
        continue;
      }
      for (double& v : next.row(c)) v /= static_cast<double>(count[c]);
    }
    double shift = 0;
    for (std::size_t c = 0; c < k; ++c)
      shift = std::max(shift, std::sqrt(detail::sq_dist(next.row(c), r.centroids.row(c))));
    r.centroids = std::move(next);
    r.objective_history.push_back(detail::assign_all(x, r.centroids, r.labels));
    if (shift < opts.tolerance) break;
  }
  return r;
}

inline ClusterAssignment assign_by_algorithm(const Matrix& features, std::size_t k, std::uint64_t seed) {
  auto km = kmeans(features, k, mix_seed(seed, stream::kmeans));
  ClusterAssignment a;
  a.expert_index = std::move(km.labels);
  a.expert_count = k;
  a.strategy = ClusterStrategy::by_algorithm;
  for (std::size_t c = 0; c < k; ++c) a.expert_labels.push_back("cluster" + std::to_string(c));
  // Lloyd can leave a cluster empty only through degenerate duplicates; keep the
  // assignment surjective by moving the farthest point of the largest cluster.
  auto counts = a.counts();
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] != 0) continue;
    const std::size_t big = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    std::size_t far = 0;
    double far_d = -1;
    for (std::size_t i = 0; i < features.rows(); ++i) {
      if (a.expert_index[i] != big) continue;
      const double d = detail::sq_dist(features.row(i), km.centroids.row(big));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    a.expert_index[far] = c;
    --counts[big];
    ++counts[c];
  }
  return a;
}

/// Splits by a categorical attribute. A schema-declared attribute column is
/// used as is; a numeric feature column of that name is removed from the
/// features first, so the split criterion never reaches the networks.
inline ClusterAssignment assign_by_attribute(Dataset& data, const std::string& column, std::size_t max_distinct = 32) {
  if (data.cluster_attribute && data.cluster_attribute->name == column)
    return assign_by_attribute_values(data.cluster_attribute->values, max_distinct);
  const auto it = std::find(data.feature_names.begin(), data.feature_names.end(), column);
  if (it == data.feature_names.end()) throw SchemaError("attribute column '" + column + "' not found");
  const auto col = static_cast<std::size_t>(it - data.feature_names.begin());
  AttributeColumn attr{column, {}};
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t r = 0; r < data.size(); ++r) {
    os.str("");
    os << data.features(r, col);
    attr.values.push_back(os.str());
  }
  auto a = assign_by_attribute_values(attr.values, max_distinct);
  data.features = data.features.drop_column(col);
  data.feature_names.erase(it);
  data.cluster_attribute = std::move(attr);
  return a;
}

}  // namespace argue
