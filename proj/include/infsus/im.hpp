#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "infsus/cascades.hpp"
#include "infsus/common.hpp"

namespace infsus {

/// Row-major so that row u is the contiguous k-vector of individual u.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Influence and susceptibility factors. Row u of each matrix belongs to
/// node id u; all entries are nonnegative.
struct IMModel {
  Matrix influence;
  Matrix susceptibility;
  double lambda = 0.01;

  std::size_t node_count() const { return static_cast<std::size_t>(influence.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(influence.cols()); }
  /// I_u . S_v. Throws std::out_of_range for unknown ids.
  double score(NodeId u, NodeId v) const;
};

/// 1 - exp(-lambda * sum_{u in active} I_u . S_v); 0 for an empty set.
double propagation_prob(const IMModel& model, NodeId v, const AssembleMode& active);

/// Plackett-Luce first-choice probabilities over `active`, aligned with
/// active.members. Throws std::domain_error when `active` is empty.
std::vector<double> choice_distribution(const IMModel& model, NodeId v, const AssembleMode& active);

/// Members of `active` by descending I_u . S_v, ties by ascending id.
std::vector<NodeId> rank_influencers(const IMModel& model, NodeId v, const AssembleMode& active);

enum class StepRule { armijo, fixed };

struct Hyperparams {
  double alpha = 0.9;   // weight of the cascade likelihood against the choice likelihood
  double beta = 1.0;    // initial (Armijo) or constant (fixed) step size
  double mu_influence = 0.0;
  double sigma2_influence = 0.1;
  double mu_susceptibility = 0.0;
  double sigma2_susceptibility = 0.1;
  /// Replace both prior means by calibrated_prior_mean of the training
  /// exposures and draw the initialization from (0, 2 mu] instead of
  /// (0, init_scale].
  bool calibrate_prior = true;
  std::size_t max_epochs = 250;
  std::size_t k = 20;
  double lambda = 0.01;
  std::uint64_t init_seed = 1;
  double init_scale = 0.1;
  StepRule step_rule = StepRule::armijo;
  bool parallel = true;
  /// Opt-in OpenMP reductions whose summation order depends on scheduling.
  bool fast_reduction = false;

  void validate() const;  // throws ConfigError
  bool operator==(const Hyperparams&) const = default;
};

inline constexpr double kProbClamp = 1e-12;
inline constexpr double kArmijoSufficientDecrease = 0.01;
inline constexpr double kArmijoShrink = 0.5;
inline constexpr int kArmijoMaxBacktracks = 20;

/// Objective value split into its terms (cascade and choice terms unweighted).
struct ObjectiveParts {
  double cascade = 0.0;  // -sum [n log p + n~ log(1-p)]
  double choice = 0.0;   // -sum m log P(u*)
  double prior = 0.0;    // both Gaussian prior terms

  double combined(double alpha) const { return alpha * cascade + (1.0 - alpha) * choice + prior; }
};

/// The prior means are those of resolve_prior(hp, exposures).
ObjectiveParts objective_parts(const IMModel& model, const ExposureTable& exposures,
                               const Hyperparams& hp);
double objective(const IMModel& model, const ExposureTable& exposures, const Hyperparams& hp);

struct Gradient {
  Matrix influence;
  Matrix susceptibility;
};

Gradient gradients(const IMModel& model, const ExposureTable& exposures, const Hyperparams& hp);

struct TraceRow {
  std::size_t epoch = 0;
  double loss = 0.0;
  double step = 0.0;  // 0 when no step was accepted
};

struct TrainResult {
  IMModel model;
  std::vector<TraceRow> trace;
  Hyperparams hyperparams;  // as used, with calibrated prior means filled in
};

/// Entry value mu of the constant model (every entry of I and S equal to
/// mu) that best explains the exposures: lambda * k * mu^2 is the
/// maximum-likelihood exponent of one active member, conditional on every
/// diffusion edge having carried at least one forward. Falls back to the
/// unconditional fit when the conditional one has no interior optimum.
/// Empty when the exposures hold no successes or no failures.
std::optional<double> calibrated_prior_mean(const ExposureTable& exposures, double lambda,
                                            std::size_t k);

/// `hp` with calibrate_prior resolved against `exposures`: the prior means
/// and init_scale are filled in and the flag is cleared. Unchanged when
/// calibration is off or not possible.
Hyperparams resolve_prior(const Hyperparams& hp, const ExposureTable& exposures);

/// Uniform (0, init_scale] factors for `node_count` nodes (the flag
/// calibrate_prior is not consulted here).
IMModel initial_model(std::size_t node_count, const Hyperparams& hp);

/// Projected gradient descent on the combined objective after
/// resolve_prior. `node_count` of 0 sizes the model from the ids in
/// `exposures`. Throws NumericalError on a
/// non-finite loss.
TrainResult train(const ExposureTable& exposures, const Hyperparams& hp,
                  std::size_t node_count = 0);
/// Continues from `start` instead of a random initialization.
TrainResult train_from(IMModel start, const ExposureTable& exposures, const Hyperparams& hp);

void write_model_json(std::ostream& out, const IMModel& model, const NodeNames& names);
/// Rows are placed at the ids the node names intern to in `names`.
IMModel read_model_json(std::istream& in, NodeNames& names);
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace infsus
