#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "infsus/cascades.hpp"
#include "infsus/im.hpp"

namespace infsus {

/// 1 - prod_{u in mode} (1 - pair_prob(u, v)); 0 for an empty mode.
double or_combine(const std::function<double(NodeId, NodeId)>& pair_prob, NodeId v,
                  const AssembleMode& mode);

/// Common query surface of the factor model and the pairwise baselines.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual double pair_prob(NodeId u, NodeId v) const = 0;
  /// Probability that v forwards when exactly `mode` is active.
  virtual double set_prob(NodeId v, const AssembleMode& mode) const;
  /// Mode members from most to least likely credited influencer, ties by id.
  virtual std::vector<NodeId> rank(NodeId v, const AssembleMode& mode) const;

 protected:
  /// Key used by the default `rank`; defaults to pair_prob.
  virtual double rank_score(NodeId u, NodeId v) const { return pair_prob(u, v); }
};

class UniformPredictor final : public Predictor {
 public:
  explicit UniformPredictor(double p);  // throws ConfigError outside [0, 1]
  double pair_prob(NodeId, NodeId) const override { return p_; }

 private:
  double p_;
};

class ImPredictor final : public Predictor {
 public:
  explicit ImPredictor(IMModel model) : model_(std::move(model)) {}
  double pair_prob(NodeId u, NodeId v) const override;
  double set_prob(NodeId v, const AssembleMode& mode) const override;
  std::vector<NodeId> rank(NodeId v, const AssembleMode& mode) const override;
  const IMModel& model() const { return model_; }

 private:
  IMModel model_;
};

struct PairEstimate {
  double prob = 0.0;
  Count successes = 0;
  Count attempts = 0;

  bool operator==(const PairEstimate&) const = default;
};

/// Per-edge propagation-probability estimates.
struct PairwiseTable {
  std::map<Edge, PairEstimate> entries;

  double prob(NodeId u, NodeId v) const;  // 0 for pairs without an entry
  bool operator==(const PairwiseTable&) const = default;
};

/// Answers from the raw table; pairs without an entry get 0.
class TablePredictor final : public Predictor {
 public:
  explicit TablePredictor(PairwiseTable table) : table_(std::move(table)) {}
  double pair_prob(NodeId u, NodeId v) const override { return table_.prob(u, v); }

 private:
  PairwiseTable table_;
};

/// Low-rank completion U V^T of a pairwise table.
class FactorPredictor final : public Predictor {
 public:
  FactorPredictor(Matrix left, Matrix right) : left_(std::move(left)), right_(std::move(right)) {}
  double pair_prob(NodeId u, NodeId v) const override;
  double raw(NodeId u, NodeId v) const;
  const Matrix& left() const { return left_; }
  const Matrix& right() const { return right_; }

 protected:
  double rank_score(NodeId u, NodeId v) const override { return raw(u, v); }

 private:
  Matrix left_;
  Matrix right_;
};

/// successes(u, v): forwards by v credited to u; attempts(u, v): exposures
/// of v with u in the active set. One count per message.
PairwiseTable bernoulli_estimator(const ExposureTable& exposures);

/// |messages where v forwarded with u active before| /
/// |messages where u or v was active|, for every edge of `net`.
PairwiseTable jaccard_estimator(const CascadeLog& log, const DiffusionNetwork& net);

struct EmTrace {
  std::vector<double> log_likelihood;  // after each iteration, starting with the initial point
  std::size_t iterations = 0;
};

/// EM for independent-cascade edge probabilities, started from the
/// Bernoulli ratios floored at 1e-6.
PairwiseTable em_estimator(const ExposureTable& exposures, std::size_t max_iters, double tol,
                           EmTrace* trace = nullptr);
PairwiseTable em_estimator(const CascadeLog& log, const DiffusionNetwork& net,
                           std::size_t max_iters, double tol, EmTrace* trace = nullptr);

/// sum_g n log P_g + n~ log(1 - P_g) with P_g = 1 - prod_{u in mode}(1 - table(u, v)).
double ic_log_likelihood(const ExposureTable& exposures, const PairwiseTable& table);

struct PmfOptions {
  std::size_t rank = 20;
  double reg = 0.01;
  std::size_t iters = 500;
  std::uint64_t seed = 7;
  double init_scale = 0.1;

  bool operator==(const PmfOptions&) const = default;
};

struct PmfTrace {
  std::vector<double> objective;  // after each accepted step, starting with the initial point
};

/// Fits U, V minimizing sum_{observed} (p - U_u . V_v)^2 + reg (|U|^2 + |V|^2)
/// by gradient descent with Armijo backtracking.
FactorPredictor pmf_complete(const PairwiseTable& table, std::size_t node_count,
                             const PmfOptions& options, PmfTrace* trace = nullptr);

void write_pairwise_csv(std::ostream& out, const PairwiseTable& table, const NodeNames& names);
PairwiseTable read_pairwise_csv(std::istream& in, NodeNames& names);

}  // namespace infsus
