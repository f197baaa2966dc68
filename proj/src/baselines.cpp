#include "infsus/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

namespace infsus {

double or_combine(const std::function<double(NodeId, NodeId)>& pair_prob, NodeId v,
                  const AssembleMode& mode) {
  double miss = 1.0;
  for (NodeId u : mode.members) miss *= 1.0 - pair_prob(u, v);
  return 1.0 - miss;
}

double Predictor::set_prob(NodeId v, const AssembleMode& mode) const {
  return or_combine([this](NodeId u, NodeId w) { return pair_prob(u, w); }, v, mode);
}

std::vector<NodeId> Predictor::rank(NodeId v, const AssembleMode& mode) const {
  std::vector<std::pair<double, NodeId>> scored;
  for (NodeId u : mode.members) scored.emplace_back(rank_score(u, v), u);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<NodeId> out;
  for (const auto& [s, u] : scored) out.push_back(u);
  return out;
}

UniformPredictor::UniformPredictor(double p) : p_(p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("uniform probability must lie in [0, 1]");
}

double ImPredictor::pair_prob(NodeId u, NodeId v) const {
  return propagation_prob(model_, v, AssembleMode{{u}});
}

double ImPredictor::set_prob(NodeId v, const AssembleMode& mode) const {
  return propagation_prob(model_, v, mode);
}

std::vector<NodeId> ImPredictor::rank(NodeId v, const AssembleMode& mode) const {
  return rank_influencers(model_, v, mode);
}

double PairwiseTable::prob(NodeId u, NodeId v) const {
  auto it = entries.find({u, v});
  return it == entries.end() ? 0.0 : it->second.prob;
}

double FactorPredictor::raw(NodeId u, NodeId v) const {
  if (u >= left_.rows() || v >= right_.rows()) return 0.0;
  return left_.row(u).dot(right_.row(v));
}

double FactorPredictor::pair_prob(NodeId u, NodeId v) const {
  return std::clamp(raw(u, v), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

namespace {

PairwiseTable credited_ratios(const ExposureTable& exposures) {
  PairwiseTable table;
  for (const auto& g : exposures.groups()) {
    for (std::size_t j = 0; j < g.mode.size(); ++j) {
      auto& e = table.entries[{g.mode.members[j], g.target}];
      e.successes += g.choices[j];
      e.attempts += g.successes + g.failures;
    }
  }
  for (auto& [edge, e] : table.entries)
    e.prob = e.attempts == 0 ? 0.0
                             : static_cast<double>(e.successes) / static_cast<double>(e.attempts);
  return table;
}

}  // namespace

PairwiseTable bernoulli_estimator(const ExposureTable& exposures) {
  return credited_ratios(exposures);
}

PairwiseTable jaccard_estimator(const CascadeLog& log, const DiffusionNetwork& net) {
  std::map<Edge, Count> together;
  std::map<Edge, Count> either;
  for (const auto& msg : log.messages) {
    std::unordered_map<NodeId, Timestamp> active;
    for (const auto& ev : msg.events) {
      for (auto [node, t] : {std::pair{std::optional<NodeId>(ev.child), ev.time},
                             std::pair{ev.parent, ev.time}}) {
        if (!node) continue;
        auto [it, inserted] = active.try_emplace(*node, t);
        if (!inserted) it->second = std::min(it->second, t);
      }
    }
    std::vector<Edge> touched;
    for (const auto& [x, t] : active) {
      for (NodeId v : net.out_neighbors(x)) touched.push_back({x, v});
      for (NodeId u : net.in_neighbors(x)) touched.push_back({u, x});
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (const auto& e : touched) ++either[e];

    for (const auto& ev : msg.events) {
      if (!ev.parent) continue;
      for (NodeId u : net.in_neighbors(ev.child)) {
        auto it = active.find(u);
        if (u == *ev.parent || (it != active.end() && it->second < ev.time))
          ++together[{u, ev.child}];
      }
    }
  }

  PairwiseTable table;
  for (const auto& e : net.edges()) {
    PairEstimate est;
    est.successes = together.contains(e) ? together.at(e) : 0;
    est.attempts = either.contains(e) ? either.at(e) : 0;
    est.prob = est.attempts == 0
                   ? 0.0
                   : static_cast<double>(est.successes) / static_cast<double>(est.attempts);
    table.entries[e] = est;
  }
  return table;
}

double ic_log_likelihood(const ExposureTable& exposures, const PairwiseTable& table) {
  double total = 0.0;
  for (const auto& g : exposures.groups()) {
    double miss = 1.0;
    for (NodeId u : g.mode.members) miss *= 1.0 - table.prob(u, g.target);
    if (g.successes) total += static_cast<double>(g.successes) * std::log(1.0 - miss);
    if (g.failures) total += static_cast<double>(g.failures) * std::log(miss);
  }
  return total;
}

PairwiseTable em_estimator(const ExposureTable& exposures, std::size_t max_iters, double tol,
                           EmTrace* trace) {
  if (max_iters == 0) throw ConfigError("EM needs at least one iteration");
  // successes here count every forward with u in the active set (|M+|).
  PairwiseTable table = credited_ratios(exposures);
  std::map<Edge, Count> exposed_success;
  for (const auto& g : exposures.groups())
    for (NodeId u : g.mode.members) exposed_success[{u, g.target}] += g.successes;
  for (auto& [edge, e] : table.entries) e.prob = std::max(e.prob, 1e-6);
  if (trace) trace->log_likelihood.push_back(ic_log_likelihood(exposures, table));

  std::map<Edge, double> numerator;
  for (std::size_t it = 0; it < max_iters; ++it) {
    numerator.clear();
    for (const auto& g : exposures.groups()) {
      if (g.successes == 0) continue;
      double miss = 1.0;
      for (NodeId u : g.mode.members) miss *= 1.0 - table.prob(u, g.target);
      const double hit = 1.0 - miss;
      if (hit <= 0.0) continue;
      for (NodeId u : g.mode.members)
        numerator[{u, g.target}] +=
            static_cast<double>(g.successes) * table.prob(u, g.target) / hit;
    }
    double change = 0.0;
    for (auto& [edge, e] : table.entries) {
      const double updated =
          e.attempts == 0 ? 0.0 : numerator[edge] / static_cast<double>(e.attempts);
      change = std::max(change, std::abs(updated - e.prob));
      e.prob = std::min(updated, 1.0);
    }
    if (trace) {
      trace->log_likelihood.push_back(ic_log_likelihood(exposures, table));
      trace->iterations = it + 1;
    }
    if (change < tol) break;
  }
  for (auto& [edge, e] : table.entries) e.successes = exposed_success[edge];
  return table;
}

PairwiseTable em_estimator(const CascadeLog& log, const DiffusionNetwork& net,
                           std::size_t max_iters, double tol, EmTrace* trace) {
  return em_estimator(extract_exposures(log, net), max_iters, tol, trace);
}

// ---------------------------------------------------------------------------

namespace {

struct Observed {
  std::vector<NodeId> row;
  std::vector<NodeId> col;
  std::vector<double> value;
};

double pmf_objective(const Observed& obs, const Matrix& left, const Matrix& right, double reg) {
  double total = 0.0;
  for (std::size_t i = 0; i < obs.value.size(); ++i) {
    const double e = obs.value[i] - left.row(obs.row[i]).dot(right.row(obs.col[i]));
    total += e * e;
  }
  return total + reg * (left.squaredNorm() + right.squaredNorm());
}

void pmf_gradient(const Observed& obs, const Matrix& left, const Matrix& right, double reg,
                  Matrix& d_left, Matrix& d_right) {
  d_left = 2.0 * reg * left;
  d_right = 2.0 * reg * right;
  for (std::size_t i = 0; i < obs.value.size(); ++i) {
    const NodeId u = obs.row[i];
    const NodeId v = obs.col[i];
    const double e = obs.value[i] - left.row(u).dot(right.row(v));
    d_left.row(u) -= 2.0 * e * right.row(v);
    d_right.row(v) -= 2.0 * e * left.row(u);
  }
}

}  // namespace

FactorPredictor pmf_complete(const PairwiseTable& table, std::size_t node_count,
                             const PmfOptions& options, PmfTrace* trace) {
  if (options.rank == 0) throw ConfigError("MF rank must be positive");
  Observed obs;
  for (const auto& [edge, e] : table.entries) {
    node_count = std::max<std::size_t>({node_count, edge.from + 1, edge.to + 1});
    obs.row.push_back(edge.from);
    obs.col.push_back(edge.to);
    obs.value.push_back(e.prob);
  }

  const auto rows = static_cast<Eigen::Index>(node_count);
  const auto cols = static_cast<Eigen::Index>(options.rank);
  std::mt19937_64 rng(derive_seed(options.seed, "pmf"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix left(rows, cols);
  Matrix right(rows, cols);
  for (Eigen::Index i = 0; i < left.size(); ++i) left.data()[i] = options.init_scale * (1.0 - unit(rng));
  for (Eigen::Index i = 0; i < right.size(); ++i) right.data()[i] = options.init_scale * (1.0 - unit(rng));

  double value = pmf_objective(obs, left, right, options.reg);
  if (trace) trace->objective.push_back(value);
  Matrix d_left;
  Matrix d_right;
  double step = 1.0;
  for (std::size_t it = 0; it < options.iters; ++it) {
    pmf_gradient(obs, left, right, options.reg, d_left, d_right);
    const double slope = d_left.squaredNorm() + d_right.squaredNorm();
    if (slope == 0.0) break;
    step *= 2.0;
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Matrix next_left = left - step * d_left;
      Matrix next_right = right - step * d_right;
      const double trial = pmf_objective(obs, next_left, next_right, options.reg);
      if (trial <= value - kArmijoSufficientDecrease * step * slope) {
        left.swap(next_left);
        right.swap(next_right);
        value = trial;
        accepted = true;
        break;
      }
      step *= kArmijoShrink;
    }
    if (!accepted) break;
    if (trace) trace->objective.push_back(value);
  }
  return FactorPredictor(std::move(left), std::move(right));
}

void write_pairwise_csv(std::ostream& out, const PairwiseTable& table, const NodeNames& names) {
  out << "u,v,probability,successes,attempts\n";
  out.precision(17);
  for (const auto& [edge, e] : table.entries)
    out << names.name(edge.from) << ',' << names.name(edge.to) << ',' << e.prob << ','
        << e.successes << ',' << e.attempts << '\n';
}

PairwiseTable read_pairwise_csv(std::istream& in, NodeNames& names) {
  PairwiseTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::stringstream row(line);
    std::string u, v, prob, successes, attempts;
    if (!std::getline(row, u, ',') || !std::getline(row, v, ',') || !std::getline(row, prob, ',') ||
        !std::getline(row, successes, ',') || !std::getline(row, attempts))
      throw DataError("pairwise CSV line " + std::to_string(line_no) + ": expected 5 fields");
    PairEstimate e;
    try {
      e.prob = std::stod(prob);
      e.successes = std::stoull(successes);
      e.attempts = std::stoull(attempts);
    } catch (const std::exception&) {
      throw DataError("pairwise CSV line " + std::to_string(line_no) + ": bad number");
    }
    if (!(e.prob >= 0.0 && e.prob <= 1.0))
      throw DataError("pairwise CSV line " + std::to_string(line_no) + ": probability outside [0, 1]");
    table.entries[{names.intern(u), names.intern(v)}] = e;
  }
  return table;
}

}  // namespace infsus
