#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "infsus/baselines.hpp"
#include "infsus/cascades.hpp"
#include "infsus/im.hpp"

namespace infsus {

struct TruthEntry {
  NodeId target = 0;
  AssembleMode mode;
  double p_true = 0.0;
  Count support = 1;
};

/// Reference propagation probabilities per (target, assemble mode).
struct GroundTruth {
  std::vector<TruthEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

/// n / (n + n~) for every group observed at least `min_support` times.
GroundTruth estimate_ground_truth(const ExposureTable& exposures, Count min_support = 1);

/// Exact probabilities from a known model, one entry per group of `pairs`.
GroundTruth synthetic_ground_truth(const IMModel& model, const ExposureTable& pairs);
GroundTruth synthetic_ground_truth(const IMModel& model,
                                   const std::vector<std::pair<NodeId, AssembleMode>>& pairs);

inline constexpr double kKlClamp = 1e-9;

/// Bernoulli KL(p || q) in nats, q clamped to [eps, 1 - eps], 0 log 0 = 0.
double bernoulli_kl(double p, double q, double eps = kKlClamp);

/// Mean of bernoulli_kl(p_true, predictor.set_prob) over the entries.
/// Throws std::domain_error on an empty truth.
double mkl(const GroundTruth& truth, const Predictor& predictor);

/// Test-network edges as singleton evaluation pairs (v, {u}).
struct EdgeSplit {
  std::vector<std::pair<NodeId, AssembleMode>> observed;
  std::vector<std::pair<NodeId, AssembleMode>> hidden;
};
EdgeSplit split_observed_hidden(const DiffusionNetwork& train_net, const DiffusionNetwork& test_net);

/// A truth entry is hidden when any (member, target) edge is missing from
/// `train_net`, observed otherwise.
struct TruthSplit {
  GroundTruth observed;
  GroundTruth hidden;
};
TruthSplit split_truth(const DiffusionNetwork& train_net, const GroundTruth& truth);

double compositive(double mkl_observed, double mkl_hidden);

struct RankSummary {
  double mrr = 0.0;
  double r_mrr = 0.0;
};

/// Throws std::domain_error for empty input or ranks below 1.
RankSummary mrr(const std::vector<std::size_t>& ranks);

/// One multiple-exposure forwarding case: v forwarded with `mode` active and
/// `truth` is the influencer to be ranked first.
struct RankCase {
  NodeId target = 0;
  AssembleMode mode;
  NodeId truth = 0;
  Count weight = 1;
};

/// Recorded parents of every success with |mode| >= 2.
std::vector<RankCase> recorded_rank_cases(const ExposureTable& exposures);
/// Every group with |mode| >= 2, forwarded or not; the truth is the member
/// with the largest I_u . S_v under `model` (ties to the smallest id) and
/// the weight is the number of exposures n + n~.
std::vector<RankCase> model_rank_cases(const ExposureTable& exposures, const IMModel& model);

/// 1-based rank of each case's truth under `predictor`, expanded by weight.
std::vector<std::size_t> truth_ranks(const std::vector<RankCase>& cases, const Predictor& predictor);
/// Expected R-MRR of a uniformly random ordering, 1 - mean(H_s / s).
double random_guess_rmrr(const std::vector<RankCase>& cases);

/// min over column permutations pi of sum_ij |a(i,j) - b(i,pi(j))|, solved
/// exactly as a k x k assignment problem. Throws std::domain_error on shape mismatch.
double matrix_difference(const Matrix& a, const Matrix& b);

/// Minimum-cost perfect assignment of a square cost matrix; returns the
/// column assigned to each row.
std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost);

enum class NormKind { l1, l2 };

/// bins x bins counts over [0, max]^2 of (|I_u|, |S_u|); cell [x][y] with x
/// the influence bin.
std::vector<std::vector<Count>> influence_susceptibility_histogram(const IMModel& model,
                                                                   std::size_t bins,
                                                                   NormKind norm = NormKind::l1);
void write_histogram_csv(std::ostream& out, const std::vector<std::vector<Count>>& grid);

struct MetricsReport {
  std::string method;
  double mkl = 0.0;
  double mkl_observed = 0.0;
  double mkl_hidden = 0.0;
  double compositive = 0.0;
  double mrr = 0.0;
  double r_mrr = 0.0;
  std::size_t pairs = 0;
  std::size_t observed_pairs = 0;
  std::size_t hidden_pairs = 0;
  std::size_t rank_cases = 0;
};

/// Full evaluation of one predictor: MKL overall and per bucket (a bucket
/// without pairs reports 0), compositive score and ranking quality.
MetricsReport evaluate_predictor(const std::string& method, const Predictor& predictor,
                                 const GroundTruth& truth, const DiffusionNetwork& train_net,
                                 const std::vector<RankCase>& cases);

void write_metrics_json(std::ostream& out, const std::vector<MetricsReport>& reports);
/// v, mode (space-separated names), p_true, q, kl, bucket
void write_kl_dump_csv(std::ostream& out, const GroundTruth& truth, const Predictor& predictor,
                       const DiffusionNetwork& train_net, const NodeNames& names);

}  // namespace infsus
