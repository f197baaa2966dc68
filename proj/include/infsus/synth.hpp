#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "infsus/cascades.hpp"
#include "infsus/im.hpp"

namespace infsus {

enum class ParentRule { plackett_luce, uniform };

struct SynthConfig {
  std::size_t n_nodes = 1000;
  std::size_t edges_per_node = 5;
  std::size_t k = 20;
  double lambda = 0.01;
  std::pair<double, double> influence_range{0.0, 0.5};
  std::pair<double, double> susceptibility_range{0.0, 1.5};
  std::size_t n_cascades = 20000;
  std::size_t n_sources = 100;
  std::uint64_t seed = 42;

  bool retries = true;              // re-expose a node whenever its active in-neighborhood grows
  ParentRule parent_rule = ParentRule::plackett_luce;
  bool edges_old_to_new = true;     // attachment edges point from the existing node to the newcomer

  void validate() const;  // throws ConfigError
  bool operator==(const SynthConfig&) const = default;
};

/// Directed preferential-attachment graph on ids 0..n-1: a complete seed
/// graph on the first m+1 nodes, then every arriving node links to m
/// distinct existing nodes picked with probability proportional to degree.
DiffusionNetwork generate_ba_network(std::size_t n, std::size_t m, std::uint64_t seed,
                                     bool old_to_new = true);

/// I and S drawn i.i.d. uniform from the configured ranges.
IMModel sample_ground_truth(const SynthConfig& cfg);

/// The fixed pool of cascade sources, drawn once per seed.
std::vector<NodeId> source_pool(const SynthConfig& cfg, const DiffusionNetwork& net);

/// Synchronous-round independent-cascade simulation driven by the model's
/// propagation probabilities. Cascade i uses its own stream derived from
/// (seed, stream, i), so output does not depend on scheduling. Message ids
/// are "<stream>-<i>".
CascadeLog simulate_cascades(const DiffusionNetwork& net, const IMModel& model,
                             const SynthConfig& cfg, std::string_view stream = "train");
CascadeLog simulate_cascades(const DiffusionNetwork& net, const IMModel& model,
                             const SynthConfig& cfg, std::span<const NodeId> sources,
                             std::string_view stream);

/// Degree-preserving double-edge swaps. Returns the network and the number
/// of accepted swaps, which is below `n_swaps` only if the attempt budget
/// (100 per requested swap) runs out.
std::pair<DiffusionNetwork, std::size_t> shuffle_network(const DiffusionNetwork& net,
                                                         std::uint64_t seed, std::size_t n_swaps);

}  // namespace infsus
