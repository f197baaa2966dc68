#include "infsus/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <unordered_set>

namespace infsus {

void SynthConfig::validate() const {
  if (n_nodes == 0 || edges_per_node == 0 || k == 0 || n_sources == 0)
    throw ConfigError("synthetic counts must be positive");
  if (n_nodes <= edges_per_node) throw ConfigError("n_nodes must exceed edges_per_node");
  if (n_sources > n_nodes) throw ConfigError("n_sources exceeds n_nodes");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  for (const auto& [lo, hi] : {influence_range, susceptibility_range})
    if (!(lo >= 0.0 && lo <= hi)) throw ConfigError("ranges need 0 <= lo <= hi");
}

DiffusionNetwork generate_ba_network(std::size_t n, std::size_t m, std::uint64_t seed,
                                     bool old_to_new) {
  if (m == 0 || n <= m) throw ConfigError("preferential attachment needs n > m >= 1");
  std::mt19937_64 rng(derive_seed(seed, "ba_network"));
  std::vector<Edge> edges;
  std::vector<NodeId> endpoints;  // each node once per incident edge
  auto link = [&](NodeId older, NodeId newer) {
    edges.push_back(old_to_new ? Edge{older, newer} : Edge{newer, older});
    endpoints.push_back(older);
    endpoints.push_back(newer);
  };

  const auto seed_size = static_cast<NodeId>(m + 1);
  for (NodeId j = 1; j < seed_size; ++j)
    for (NodeId i = 0; i < j; ++i) link(i, j);

  std::vector<NodeId> chosen;
  for (auto v = seed_size; v < n; ++v) {
    chosen.clear();
    std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
    while (chosen.size() < m) {
      const NodeId u = endpoints[pick(rng)];
      if (std::find(chosen.begin(), chosen.end(), u) == chosen.end()) chosen.push_back(u);
    }
    for (NodeId u : chosen) link(u, v);
  }

  std::vector<NodeId> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<NodeId>(i);
  return DiffusionNetwork(std::move(edges), all);
}

IMModel sample_ground_truth(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, "ground_truth"));
  auto fill = [&](Matrix& m, std::pair<double, double> range) {
    m.resize(static_cast<Eigen::Index>(cfg.n_nodes), static_cast<Eigen::Index>(cfg.k));
    std::uniform_real_distribution<double> dist(range.first, range.second);
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = range.first == range.second ? range.first : dist(rng);
  };
  IMModel model;
  model.lambda = cfg.lambda;
  fill(model.influence, cfg.influence_range);
  fill(model.susceptibility, cfg.susceptibility_range);
  return model;
}

std::vector<NodeId> source_pool(const SynthConfig& cfg, const DiffusionNetwork& net) {
  std::vector<NodeId> nodes = net.nodes();
  if (cfg.n_sources > nodes.size()) throw ConfigError("n_sources exceeds the network size");
  std::mt19937_64 rng(derive_seed(cfg.seed, "sources"));
  std::shuffle(nodes.begin(), nodes.end(), rng);
  nodes.resize(cfg.n_sources);
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

namespace {

Message simulate_one(const DiffusionNetwork& net, const IMModel& model, const SynthConfig& cfg,
                     std::span<const NodeId> sources, std::string_view stream, std::uint64_t index,
                     std::vector<Timestamp>& time, std::vector<char>& attempted) {
  std::mt19937_64 rng(derive_seed(cfg.seed, stream, index));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_source(0, sources.size() - 1);

  Message msg;
  msg.id = std::string(stream) + "-" + std::to_string(index);
  const NodeId source = sources[pick_source(rng)];
  std::vector<NodeId> touched{source};
  time[source] = 0;
  msg.events.push_back({std::nullopt, source, 0});

  std::vector<NodeId> frontier{source};
  std::vector<NodeId> candidates;
  std::vector<NodeId> exposed_by;
  std::vector<double> weights;
  std::vector<std::pair<NodeId, NodeId>> activated;  // (child, parent)
  for (Timestamp t = 0; !frontier.empty(); ++t) {
    candidates.clear();
    for (NodeId u : frontier)
      for (NodeId v : net.out_neighbors(u))
        if (time[v] < 0 && (cfg.retries || !attempted[v])) candidates.push_back(v);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    activated.clear();
    for (NodeId v : candidates) {
      if (!attempted[v]) {
        attempted[v] = 1;
        touched.push_back(v);
      }
      exposed_by.clear();
      double total = 0.0;
      for (NodeId w : net.in_neighbors(v)) {
        if (time[w] >= 0 && time[w] <= t) {
          exposed_by.push_back(w);
          total += model.score(w, v);
        }
      }
      const double p = -std::expm1(-model.lambda * total);
      if (!(coin(rng) < p)) continue;

      NodeId parent = exposed_by.front();
      if (exposed_by.size() > 1) {
        weights.clear();
        if (cfg.parent_rule == ParentRule::plackett_luce) {
          double top = -std::numeric_limits<double>::infinity();
          for (NodeId w : exposed_by) top = std::max(top, model.score(w, v));
          for (NodeId w : exposed_by) weights.push_back(std::exp(model.score(w, v) - top));
        } else {
          weights.assign(exposed_by.size(), 1.0);
        }
        std::discrete_distribution<std::size_t> choose(weights.begin(), weights.end());
        parent = exposed_by[choose(rng)];
      }
      activated.emplace_back(v, parent);
    }

    frontier.clear();
    for (const auto& [v, parent] : activated) {
      time[v] = t + 1;
      touched.push_back(v);
      frontier.push_back(v);
      msg.events.push_back({parent, v, t + 1});
    }
  }

  for (NodeId v : touched) {
    time[v] = -1;
    attempted[v] = 0;
  }
  return msg;
}

}  // namespace

CascadeLog simulate_cascades(const DiffusionNetwork& net, const IMModel& model,
                             const SynthConfig& cfg, std::string_view stream) {
  const auto pool = source_pool(cfg, net);
  return simulate_cascades(net, model, cfg, pool, stream);
}

CascadeLog simulate_cascades(const DiffusionNetwork& net, const IMModel& model,
                             const SynthConfig& cfg, std::span<const NodeId> sources,
                             std::string_view stream) {
  if (sources.empty()) throw ConfigError("no cascade sources");
  if (net.id_bound() > model.node_count())
    throw ConfigError("model does not cover every network node");
  CascadeLog log;
  log.messages.resize(cfg.n_cascades);
  const auto count = static_cast<std::int64_t>(cfg.n_cascades);
  const std::size_t bound = std::max(net.id_bound(), model.node_count());

#pragma omp parallel
  {
    std::vector<Timestamp> time(bound, -1);
    std::vector<char> attempted(bound, 0);
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < count; ++i)
      log.messages[static_cast<std::size_t>(i)] = simulate_one(
          net, model, cfg, sources, stream, static_cast<std::uint64_t>(i), time, attempted);
  }
  return log;
}

std::pair<DiffusionNetwork, std::size_t> shuffle_network(const DiffusionNetwork& net,
                                                         std::uint64_t seed, std::size_t n_swaps) {
  std::vector<Edge> edges = net.edges();
  if (n_swaps == 0 || edges.size() < 2) return {net, 0};

  auto key = [](NodeId a, NodeId b) { return (static_cast<std::uint64_t>(a) << 32) | b; };
  std::unordered_set<std::uint64_t> present;
  for (const auto& e : edges) present.insert(key(e.from, e.to));

  std::mt19937_64 rng(derive_seed(seed, "shuffle"));
  std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
  std::size_t accepted = 0;
  const std::size_t budget = 100 * n_swaps;
  for (std::size_t attempt = 0; attempt < budget && accepted < n_swaps; ++attempt) {
    const std::size_t i = pick(rng);
    const std::size_t j = pick(rng);
    const auto [a, b] = edges[i];
    const auto [c, d] = edges[j];
    if (a == c || b == d || a == d || c == b) continue;
    if (present.contains(key(a, d)) || present.contains(key(c, b))) continue;
    present.erase(key(a, b));
    present.erase(key(c, d));
    present.insert(key(a, d));
    present.insert(key(c, b));
    edges[i] = {a, d};
    edges[j] = {c, b};
    ++accepted;
  }
  return {DiffusionNetwork(std::move(edges), net.nodes()), accepted};
}

}  // namespace infsus
