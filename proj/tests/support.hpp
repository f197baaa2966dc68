#pragma once

#include <random>
#include <sstream>
#include <string>

#include "infsus/cascades.hpp"
#include "infsus/im.hpp"

namespace infsus::testing {

inline CascadeLog log_from(const std::string& jsonl, NodeNames& names,
                           Diagnostics* diag = nullptr, ParseOptions options = {}) {
  std::istringstream in(jsonl);
  return parse_cascades(in, names, diag, options);
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> unit(lo, hi);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = unit(rng);
  return m;
}

inline IMModel random_model(std::size_t n, std::size_t k, double lambda, std::mt19937_64& rng,
                            double hi = 1.0) {
  return IMModel{random_matrix(n, k, rng, 0.0, hi), random_matrix(n, k, rng, 0.0, hi), lambda};
}

/// Random exposure groups over n nodes: distinct (target, mode) keys,
/// modes of size 1..3 excluding the target, small counts with choices
/// summing to the successes.
inline ExposureTable random_exposures(std::size_t n, std::size_t max_groups, std::mt19937_64& rng) {
  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
  std::uniform_int_distribution<int> size(1, 3);
  std::uniform_int_distribution<Count> count(0, 4);
  std::vector<ExposureGroup> groups;
  for (std::size_t g = 0; g < max_groups; ++g) {
    ExposureGroup e;
    e.target = node(rng);
    std::vector<NodeId> ids;
    const int s = size(rng);
    while (static_cast<int>(ids.size()) < s) {
      const NodeId u = node(rng);
      if (u != e.target && std::find(ids.begin(), ids.end(), u) == ids.end()) ids.push_back(u);
    }
    e.mode = AssembleMode::of(ids);
    e.choices.assign(e.mode.size(), 0);
    std::uniform_int_distribution<std::size_t> pick(0, e.mode.size() - 1);
    e.successes = count(rng);
    e.failures = count(rng);
    if (e.successes + e.failures == 0) e.failures = 1;
    for (Count i = 0; i < e.successes; ++i) ++e.choices[pick(rng)];
    groups.push_back(std::move(e));
  }
  return ExposureTable(std::move(groups));
}

}  // namespace infsus::testing
