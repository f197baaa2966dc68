#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "infsus/baselines.hpp"
#include "infsus/cascades.hpp"
#include "infsus/eval.hpp"
#include "infsus/im.hpp"
#include "infsus/synth.hpp"

namespace infsus {

struct BaselineSettings {
  std::vector<double> uniform_probs{0.1, 0.01, 0.001};
  bool bernoulli = true;
  bool jaccard = true;
  bool em = true;
  std::size_t em_iters = 100;
  double em_tol = 1e-6;
  PmfOptions pmf{.rank = 0, .reg = 0.01, .iters = 500, .seed = 0, .init_scale = 0.1};  // rank 0: use k

  bool operator==(const BaselineSettings&) const = default;
};

struct GridSettings {
  std::vector<double> alphas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> lambdas{0.001, 0.005, 0.01, 0.015, 0.02};
  std::vector<std::size_t> ks{10, 20, 30, 40};

  bool operator==(const GridSettings&) const = default;
};

enum class DataSource { synthetic, cascades };

struct ExperimentConfig {
  DataSource source = DataSource::synthetic;
  SynthConfig synth;
  std::size_t test_cascades = 20000;  // per evaluation network
  std::size_t swaps_per_edge = 10;
  std::size_t restart_random_pairs = 10;

  std::vector<std::string> cascade_files;
  std::vector<Timestamp> windows;
  Count prune_min_pair_total = 50;
  Count prune_max_pair_per_message = 50;
  Count min_support = 1;

  GridSettings grid;
  Hyperparams train;
  BaselineSettings baselines;
  std::string output_dir = "out";
  std::uint64_t seed = 42;

  /// Throws ConfigError.
  void validate() const;
  bool operator==(const ExperimentConfig&) const;

  /// Full-scale synthetic settings (1000 nodes, 20000 cascades).
  static ExperimentConfig synthetic_paper();
  /// Reduced synthetic profile: 300 nodes, k = 10, 30 sources (the same
  /// share of nodes as at full scale), 5000 training cascades.
  static ExperimentConfig synthetic_small();
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Keys missing from `doc` keep their values from `base`. Throws ConfigError
/// on bad values.
ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Component seeds all flow from the global seed.
SynthConfig seeded(SynthConfig synth, std::uint64_t seed);
Hyperparams seeded(Hyperparams hp, std::uint64_t seed);

struct SyntheticCorpus {
  NodeNames names;
  DiffusionNetwork network;
  DiffusionNetwork shuffled;
  std::size_t accepted_swaps = 0;
  IMModel truth;
  CascadeLog train;
  CascadeLog test_trained;   // fresh cascades on the original network
  CascadeLog test_shuffled;  // cascades on the shuffled network
};

SyntheticCorpus generate_corpus(const ExperimentConfig& cfg);

/// A fitted method ready for evaluation.
struct FittedMethod {
  std::string name;
  std::shared_ptr<const Predictor> predictor;
};

struct TrainingData {
  CascadeLog log;
  DiffusionNetwork network;
  ExposureTable exposures;
  Diagnostics diagnostics;
};

TrainingData prepare_training(CascadeLog log);

/// IM plus every enabled baseline, in table order.
std::vector<FittedMethod> fit_methods(const TrainingData& data, const ExperimentConfig& cfg,
                                      std::size_t node_count, TrainResult* im_result = nullptr);

/// Pairwise estimator by short name ("bd", "ji", "em").
PairwiseTable pairwise_estimate(const std::string& estimator, const TrainingData& data,
                                const BaselineSettings& settings);

struct EvaluationSet {
  GroundTruth truth;
  std::vector<RankCase> cases;
};

/// Exact ground truth and model-argmax ranking cases from test cascades.
EvaluationSet synthetic_evaluation(const IMModel& truth_model, const CascadeLog& test,
                                   const DiffusionNetwork& generating_net);
/// Ratio ground truth and recorded-parent ranking cases from test cascades.
EvaluationSet observed_evaluation(const CascadeLog& test, Count min_support);

std::vector<MetricsReport> evaluate_methods(const std::vector<FittedMethod>& methods,
                                            const EvaluationSet& eval,
                                            const DiffusionNetwork& train_net);

/// Stable sort by compositive score, ascending.
void order_by_compositive(std::vector<MetricsReport>& reports);

struct RestartCheck {
  double influence_difference = 0.0;        // per entry, between two restarts
  double susceptibility_difference = 0.0;
  double random_influence_difference = 0.0; // per entry, mean over random pairs
  double random_susceptibility_difference = 0.0;
};

/// Permutation-matched differences between two models normalized by n*k,
/// against independently sampled random factor pairs drawn like `synth`.
RestartCheck restart_check(const IMModel& first, const IMModel& second, const SynthConfig& synth,
                           std::size_t random_pairs, std::uint64_t seed);

struct SyntheticReport {
  std::vector<MetricsReport> trained;
  std::vector<MetricsReport> shuffled;
  double random_rmrr_trained = 0.0;
  double random_rmrr_shuffled = 0.0;
  RestartCheck restart;
  TrainResult im;
  TrainResult im_restart;
};

/// generate -> fit every method -> evaluate on the trained and shuffled
/// networks -> restart check. Writes the bundle when `out` is given.
SyntheticReport run_synthetic(const ExperimentConfig& cfg, const SyntheticCorpus& corpus,
                              const std::optional<std::filesystem::path>& out);

struct RoundReport {
  std::size_t train_window = 0;
  std::size_t test_window = 0;
  std::vector<MetricsReport> reports;
};

/// Train on each window in turn and evaluate on every other window.
std::vector<RoundReport> run_rounds(const ExperimentConfig& cfg, const CascadeLog& log,
                                    NodeNames& names,
                                    const std::optional<std::filesystem::path>& out);

void write_table(std::ostream& out, const std::vector<MetricsReport>& reports);

}  // namespace infsus
