#include "infsus/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace infsus {

GroundTruth estimate_ground_truth(const ExposureTable& exposures, Count min_support) {
  if (min_support == 0) throw ConfigError("min_support must be at least 1");
  GroundTruth truth;
  for (const auto& g : exposures.groups()) {
    const Count support = g.successes + g.failures;
    if (support < min_support) continue;
    truth.entries.push_back({g.target, g.mode,
                             static_cast<double>(g.successes) / static_cast<double>(support),
                             support});
  }
  return truth;
}

GroundTruth synthetic_ground_truth(const IMModel& model, const ExposureTable& pairs) {
  GroundTruth truth;
  for (const auto& g : pairs.groups())
    truth.entries.push_back({g.target, g.mode, propagation_prob(model, g.target, g.mode),
                             std::max<Count>(1, g.successes + g.failures)});
  return truth;
}

GroundTruth synthetic_ground_truth(const IMModel& model,
                                   const std::vector<std::pair<NodeId, AssembleMode>>& pairs) {
  GroundTruth truth;
  for (const auto& [v, mode] : pairs)
    truth.entries.push_back({v, mode, propagation_prob(model, v, mode), 1});
  return truth;
}

double bernoulli_kl(double p, double q, double eps) {
  const double qc = std::clamp(q, eps, 1.0 - eps);
  double kl = 0.0;
  if (p > 0.0) kl += p * std::log(p / qc);
  if (p < 1.0) kl += (1.0 - p) * std::log((1.0 - p) / (1.0 - qc));
  return kl;
}

double mkl(const GroundTruth& truth, const Predictor& predictor) {
  if (truth.empty()) throw std::domain_error("MKL over an empty ground truth");
  double total = 0.0;
  for (const auto& e : truth.entries)
    total += bernoulli_kl(e.p_true, predictor.set_prob(e.target, e.mode));
  return total / static_cast<double>(truth.size());
}

namespace {

bool all_trained(const DiffusionNetwork& train_net, NodeId v, const AssembleMode& mode) {
  return std::all_of(mode.members.begin(), mode.members.end(),
                     [&](NodeId u) { return train_net.has_edge(u, v); });
}

}  // namespace

EdgeSplit split_observed_hidden(const DiffusionNetwork& train_net, const DiffusionNetwork& test_net) {
  EdgeSplit split;
  for (const auto& e : test_net.edges()) {
    auto pair = std::make_pair(e.to, AssembleMode{{e.from}});
    (train_net.has_edge(e.from, e.to) ? split.observed : split.hidden).push_back(std::move(pair));
  }
  return split;
}

TruthSplit split_truth(const DiffusionNetwork& train_net, const GroundTruth& truth) {
  TruthSplit split;
  for (const auto& e : truth.entries)
    (all_trained(train_net, e.target, e.mode) ? split.observed : split.hidden).entries.push_back(e);
  return split;
}

double compositive(double mkl_observed, double mkl_hidden) {
  return std::sqrt(mkl_observed * mkl_observed + mkl_hidden * mkl_hidden);
}

RankSummary mrr(const std::vector<std::size_t>& ranks) {
  if (ranks.empty()) throw std::domain_error("MRR over no cases");
  double total = 0.0;
  for (std::size_t r : ranks) {
    if (r == 0) throw std::domain_error("ranks are 1-based");
    total += 1.0 / static_cast<double>(r);
  }
  RankSummary out;
  out.mrr = total / static_cast<double>(ranks.size());
  out.r_mrr = 1.0 - out.mrr;
  return out;
}

std::vector<RankCase> recorded_rank_cases(const ExposureTable& exposures) {
  std::vector<RankCase> cases;
  for (const auto& g : exposures.groups()) {
    if (g.mode.size() < 2) continue;
    for (std::size_t j = 0; j < g.mode.size(); ++j)
      if (g.choices[j] > 0) cases.push_back({g.target, g.mode, g.mode.members[j], g.choices[j]});
  }
  return cases;
}

std::vector<RankCase> model_rank_cases(const ExposureTable& exposures, const IMModel& model) {
  std::vector<RankCase> cases;
  for (const auto& g : exposures.groups()) {
    if (g.mode.size() < 2) continue;
    cases.push_back({g.target, g.mode, rank_influencers(model, g.target, g.mode).front(),
                     g.successes + g.failures});
  }
  return cases;
}

std::vector<std::size_t> truth_ranks(const std::vector<RankCase>& cases, const Predictor& predictor) {
  std::vector<std::size_t> ranks;
  for (const auto& c : cases) {
    const auto order = predictor.rank(c.target, c.mode);
    const auto pos = std::find(order.begin(), order.end(), c.truth) - order.begin();
    ranks.insert(ranks.end(), c.weight, static_cast<std::size_t>(pos) + 1);
  }
  return ranks;
}

double random_guess_rmrr(const std::vector<RankCase>& cases) {
  if (cases.empty()) throw std::domain_error("random R-MRR over no cases");
  double total = 0.0;
  double weight = 0.0;
  for (const auto& c : cases) {
    double harmonic = 0.0;
    for (std::size_t i = 1; i <= c.mode.size(); ++i) harmonic += 1.0 / static_cast<double>(i);
    total += static_cast<double>(c.weight) * harmonic / static_cast<double>(c.mode.size());
    weight += static_cast<double>(c.weight);
  }
  return 1.0 - total / weight;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost) {
  // Shortest augmenting paths with row/column potentials, 1-based internally.
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> row_pot(n + 1, 0.0), col_pot(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    if (cost[i - 1].size() != n) throw std::domain_error("assignment cost matrix must be square");
    match[0] = i;
    std::size_t col = 0;
    std::vector<double> min_slack(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col] = 1;
      const std::size_t row = match[col];
      double delta = inf;
      std::size_t next = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double slack = cost[row - 1][j - 1] - row_pot[row] - col_pot[j];
        if (slack < min_slack[j]) {
          min_slack[j] = slack;
          way[j] = col;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          next = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          row_pot[match[j]] += delta;
          col_pot[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      col = next;
    } while (match[col] != 0);
    do {
      const std::size_t prev = way[col];
      match[col] = match[prev];
      col = prev;
    } while (col != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

double matrix_difference(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::domain_error("matrix_difference needs equal shapes");
  const auto k = static_cast<std::size_t>(a.cols());
  std::vector<std::vector<double>> cost(k, std::vector<double>(k));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      cost[i][j] = (a.col(static_cast<Eigen::Index>(i)) - b.col(static_cast<Eigen::Index>(j)))
                       .cwiseAbs()
                       .sum();
  const auto assignment = solve_assignment(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += cost[i][assignment[i]];
  return total;
}

std::vector<std::vector<Count>> influence_susceptibility_histogram(const IMModel& model,
                                                                   std::size_t bins,
                                                                   NormKind norm) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  const auto rows = static_cast<Eigen::Index>(model.node_count());
  std::vector<double> xs(model.node_count()), ys(model.node_count());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    if (norm == NormKind::l1) {
      xs[i] = model.influence.row(r).lpNorm<1>();
      ys[i] = model.susceptibility.row(r).lpNorm<1>();
    } else {
      xs[i] = model.influence.row(r).norm();
      ys[i] = model.susceptibility.row(r).norm();
    }
  }
  const double x_max = xs.empty() ? 0.0 : *std::max_element(xs.begin(), xs.end());
  const double y_max = ys.empty() ? 0.0 : *std::max_element(ys.begin(), ys.end());
  auto bin_of = [bins](double value, double max) -> std::size_t {
    if (max <= 0.0) return 0;
    const auto b = static_cast<std::size_t>(value / max * static_cast<double>(bins));
    return std::min(b, bins - 1);
  };
  std::vector<std::vector<Count>> grid(bins, std::vector<Count>(bins, 0));
  for (std::size_t i = 0; i < xs.size(); ++i) ++grid[bin_of(xs[i], x_max)][bin_of(ys[i], y_max)];
  return grid;
}

void write_histogram_csv(std::ostream& out, const std::vector<std::vector<Count>>& grid) {
  out << "x_bin,y_bin,count\n";
  for (std::size_t x = 0; x < grid.size(); ++x)
    for (std::size_t y = 0; y < grid[x].size(); ++y) out << x << ',' << y << ',' << grid[x][y] << '\n';
}

MetricsReport evaluate_predictor(const std::string& method, const Predictor& predictor,
                                 const GroundTruth& truth, const DiffusionNetwork& train_net,
                                 const std::vector<RankCase>& cases) {
  MetricsReport r;
  r.method = method;
  r.pairs = truth.size();
  r.mkl = truth.empty() ? 0.0 : mkl(truth, predictor);
  const auto split = split_truth(train_net, truth);
  r.observed_pairs = split.observed.size();
  r.hidden_pairs = split.hidden.size();
  r.mkl_observed = split.observed.empty() ? 0.0 : mkl(split.observed, predictor);
  r.mkl_hidden = split.hidden.empty() ? 0.0 : mkl(split.hidden, predictor);
  r.compositive = compositive(r.mkl_observed, r.mkl_hidden);
  const auto ranks = truth_ranks(cases, predictor);
  r.rank_cases = ranks.size();
  if (ranks.empty()) {
    r.mrr = r.r_mrr = std::numeric_limits<double>::quiet_NaN();
  } else {
    const auto summary = mrr(ranks);
    r.mrr = summary.mrr;
    r.r_mrr = summary.r_mrr;
  }
  return r;
}

void write_metrics_json(std::ostream& out, const std::vector<MetricsReport>& reports) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json row;
    row["method"] = r.method;
    row["mkl"] = r.mkl;
    row["mkl_observed"] = r.mkl_observed;
    row["mkl_hidden"] = r.mkl_hidden;
    row["compositive"] = r.compositive;
    row["mrr"] = std::isnan(r.mrr) ? nlohmann::json(nullptr) : nlohmann::json(r.mrr);
    row["r_mrr"] = std::isnan(r.r_mrr) ? nlohmann::json(nullptr) : nlohmann::json(r.r_mrr);
    row["pairs"] = r.pairs;
    row["observed_pairs"] = r.observed_pairs;
    row["hidden_pairs"] = r.hidden_pairs;
    row["rank_cases"] = r.rank_cases;
    doc.push_back(std::move(row));
  }
  out << doc.dump(2) << '\n';
}

void write_kl_dump_csv(std::ostream& out, const GroundTruth& truth, const Predictor& predictor,
                       const DiffusionNetwork& train_net, const NodeNames& names) {
  out << "v,mode,p_true,q,kl,bucket\n";
  out.precision(12);
  for (const auto& e : truth.entries) {
    const double q = predictor.set_prob(e.target, e.mode);
    out << names.name(e.target) << ',';
    for (std::size_t j = 0; j < e.mode.size(); ++j)
      out << (j ? " " : "") << names.name(e.mode.members[j]);
    out << ',' << e.p_true << ',' << q << ',' << bernoulli_kl(e.p_true, q) << ','
        << (all_trained(train_net, e.target, e.mode) ? "observed" : "hidden") << '\n';
  }
}

}  // namespace infsus
