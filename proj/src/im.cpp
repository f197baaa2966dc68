#include "infsus/im.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "infsus/im_kernels.hpp"

namespace infsus {

double IMModel::score(NodeId u, NodeId v) const {
  if (u >= node_count() || v >= node_count())
    throw std::out_of_range("node id " + std::to_string(std::max(u, v)) + " not in model");
  return influence.row(u).dot(susceptibility.row(v));
}

double propagation_prob(const IMModel& model, NodeId v, const AssembleMode& active) {
  double total = 0.0;
  for (NodeId u : active.members) total += model.score(u, v);
  return -std::expm1(-model.lambda * total);
}

std::vector<double> choice_distribution(const IMModel& model, NodeId v, const AssembleMode& active) {
  if (active.empty()) throw std::domain_error("choice distribution over an empty active set");
  std::vector<double> out;
  out.reserve(active.size());
  for (NodeId u : active.members) out.push_back(model.score(u, v));
  const double top = *std::max_element(out.begin(), out.end());
  double norm = 0.0;
  for (double& x : out) norm += x = std::exp(x - top);
  for (double& x : out) x /= norm;
  return out;
}

std::vector<NodeId> rank_influencers(const IMModel& model, NodeId v, const AssembleMode& active) {
  std::vector<std::pair<double, NodeId>> scored;
  for (NodeId u : active.members) scored.emplace_back(model.score(u, v), u);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<NodeId> out;
  for (const auto& [s, u] : scored) out.push_back(u);
  return out;
}

void Hyperparams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(sigma2_influence > 0.0) || !(sigma2_susceptibility > 0.0))
    throw ConfigError("prior variances must be positive");
  if (k == 0) throw ConfigError("k must be positive");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale must be positive");
}

namespace {

kernels::LossTerms evaluate(const kernels::GroupLayout& layout, const Matrix& influence,
                            const Matrix& susceptibility, const Hyperparams& hp) {
  const auto w = kernels::LossWeights::from(hp);
  if (hp.parallel) return kernels::loss_parallel(layout, influence, susceptibility, w, hp.fast_reduction);
  return kernels::loss_serial(layout, influence, susceptibility, w);
}

void evaluate_gradient(const kernels::GroupLayout& layout, const Matrix& influence,
                       const Matrix& susceptibility, const Hyperparams& hp, Gradient& grad) {
  const auto w = kernels::LossWeights::from(hp);
  if (hp.parallel)
    kernels::gradient_parallel(layout, influence, susceptibility, w, grad.influence,
                               grad.susceptibility);
  else
    kernels::gradient_serial(layout, influence, susceptibility, w, grad.influence,
                             grad.susceptibility);
}

void check_model_covers(const IMModel& model, const ExposureTable& exposures) {
  if (exposures.id_bound() > model.node_count())
    throw std::out_of_range("exposure table names nodes outside the model");
}

}  // namespace

std::optional<double> calibrated_prior_mean(const ExposureTable& exposures, double lambda,
                                            std::size_t k) {
  // One-member exponent x of the constant model, fitted by maximum
  // likelihood conditional on every diffusion edge having forwarded at
  // least once: sum_g [n log(1 - e^{-a x}) - n~ a x] - sum_e log(1 - e^{-E_e x}),
  // with a = |mode| and E_e the exposures of the edge's target to its source.
  double fail_mass = 0.0;
  double succ = 0.0;
  std::map<Edge, double> edge_exposures;
  for (const auto& g : exposures.groups()) {
    const double trials = static_cast<double>(g.successes + g.failures);
    fail_mass += static_cast<double>(g.failures) * static_cast<double>(g.mode.size());
    succ += static_cast<double>(g.successes);
    for (NodeId u : g.mode.members) edge_exposures[{u, g.target}] += trials;
  }
  if (succ == 0.0 || fail_mass == 0.0 || k == 0 || !(lambda > 0.0)) return std::nullopt;

  auto slope = [&](double x, bool truncated) {
    double total = -fail_mass;
    for (const auto& g : exposures.groups()) {
      if (g.successes == 0) continue;
      const double a = static_cast<double>(g.mode.size());
      total += static_cast<double>(g.successes) * a / std::expm1(a * x);
    }
    if (truncated)
      for (const auto& [edge, e] : edge_exposures)
        if (e * x < 700.0) total -= e / std::expm1(e * x);
    return total;
  };
  auto solve = [&](bool truncated) -> std::optional<double> {
    double lo = 1e-12;
    double hi = 1.0;
    if (!(slope(lo, truncated) > 0.0)) return std::nullopt;
    while (slope(hi, truncated) > 0.0) {
      if (hi > 1e6) return std::nullopt;
      hi *= 2.0;
    }
    for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
      const double mid = std::sqrt(lo * hi);
      (slope(mid, truncated) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  auto x = solve(true);
  if (!x) x = solve(false);
  if (!x) return std::nullopt;
  return std::sqrt(*x / (lambda * static_cast<double>(k)));
}

Hyperparams resolve_prior(const Hyperparams& hp, const ExposureTable& exposures) {
  Hyperparams out = hp;
  if (!hp.calibrate_prior) return out;
  if (const auto mu = calibrated_prior_mean(exposures, hp.lambda, hp.k); mu && *mu > 0.0) {
    out.mu_influence = *mu;
    out.mu_susceptibility = *mu;
    out.init_scale = 2.0 * *mu;
    out.calibrate_prior = false;
  }
  return out;
}

ObjectiveParts objective_parts(const IMModel& model, const ExposureTable& exposures,
                               const Hyperparams& hp) {
  check_model_covers(model, exposures);
  Hyperparams local = hp;
  local.lambda = model.lambda;
  local.k = model.dim();
  local = resolve_prior(local, exposures);
  const auto layout = kernels::GroupLayout::build(exposures, model.node_count());
  const auto t = evaluate(layout, model.influence, model.susceptibility, local);
  return {t.cascade, t.choice, t.prior};
}

double objective(const IMModel& model, const ExposureTable& exposures, const Hyperparams& hp) {
  return objective_parts(model, exposures, hp).combined(hp.alpha);
}

Gradient gradients(const IMModel& model, const ExposureTable& exposures, const Hyperparams& hp) {
  check_model_covers(model, exposures);
  Hyperparams local = hp;
  local.lambda = model.lambda;
  local.k = model.dim();
  local = resolve_prior(local, exposures);
  const auto layout = kernels::GroupLayout::build(exposures, model.node_count());
  Gradient grad;
  evaluate_gradient(layout, model.influence, model.susceptibility, local, grad);
  return grad;
}

IMModel initial_model(std::size_t node_count, const Hyperparams& hp) {
  std::mt19937_64 rng(hp.init_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto rows = static_cast<Eigen::Index>(node_count);
  const auto cols = static_cast<Eigen::Index>(hp.k);
  IMModel model;
  model.lambda = hp.lambda;
  model.influence.resize(rows, cols);
  model.susceptibility.resize(rows, cols);
  // 1 - U[0,1) lies in (0, 1], so no coordinate starts on the boundary.
  for (Eigen::Index i = 0; i < model.influence.size(); ++i)
    model.influence.data()[i] = hp.init_scale * (1.0 - unit(rng));
  for (Eigen::Index i = 0; i < model.susceptibility.size(); ++i)
    model.susceptibility.data()[i] = hp.init_scale * (1.0 - unit(rng));
  return model;
}

TrainResult train(const ExposureTable& exposures, const Hyperparams& hp, std::size_t node_count) {
  hp.validate();
  const Hyperparams resolved = resolve_prior(hp, exposures);
  return train_from(initial_model(std::max(node_count, exposures.id_bound()), resolved), exposures,
                    resolved);
}

TrainResult train_from(IMModel start, const ExposureTable& exposures, const Hyperparams& hp) {
  hp.validate();
  check_model_covers(start, exposures);
  Hyperparams local = hp;
  local.lambda = start.lambda;
  local.k = start.dim();
  local = resolve_prior(local, exposures);
  const auto layout = kernels::GroupLayout::build(exposures, start.node_count());

  TrainResult result;
  result.hyperparams = local;
  result.model = std::move(start);
  Matrix& influence = result.model.influence;
  Matrix& susceptibility = result.model.susceptibility;

  double loss = kernels::combine(evaluate(layout, influence, susceptibility, local), hp.alpha);
  if (!std::isfinite(loss)) throw NumericalError("training diverged: non-finite loss at epoch 0");
  result.trace.push_back({0, loss, 0.0});

  Gradient grad;
  Matrix next_influence;
  Matrix next_susceptibility;
  for (std::size_t epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    evaluate_gradient(layout, influence, susceptibility, local, grad);

    double step = hp.beta;
    double accepted = 0.0;
    double next_loss = loss;
    for (int attempt = 0; attempt <= kArmijoMaxBacktracks; ++attempt) {
      next_influence = (influence - step * grad.influence).cwiseMax(0.0);
      next_susceptibility = (susceptibility - step * grad.susceptibility).cwiseMax(0.0);
      const double trial =
          kernels::combine(evaluate(layout, next_influence, next_susceptibility, local), hp.alpha);
      if (hp.step_rule == StepRule::fixed) {
        accepted = step;
        next_loss = trial;
        break;
      }
      // Sufficient decrease along the projection arc.
      const double decrease = grad.influence.cwiseProduct(next_influence - influence).sum() +
                              grad.susceptibility.cwiseProduct(next_susceptibility - susceptibility).sum();
      if (std::isfinite(trial) && trial - loss <= kArmijoSufficientDecrease * decrease) {
        accepted = step;
        next_loss = trial;
        break;
      }
      step *= kArmijoShrink;
    }

    if (!std::isfinite(next_loss))
      throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
    if (accepted > 0.0) {
      influence.swap(next_influence);
      susceptibility.swap(next_susceptibility);
      loss = next_loss;
    }
    result.trace.push_back({epoch, loss, accepted});
  }
  return result;
}

// ---------------------------------------------------------------------------

using nlohmann::json;

void write_model_json(std::ostream& out, const IMModel& model, const NodeNames& names) {
  if (names.size() < model.node_count())
    throw std::invalid_argument("node name table smaller than the model");
  json doc;
  doc["lambda"] = model.lambda;
  doc["k"] = model.dim();
  doc["nodes"] = json::array();
  doc["I"] = json::array();
  doc["S"] = json::array();
  for (std::size_t r = 0; r < model.node_count(); ++r) {
    doc["nodes"].push_back(names.name(static_cast<NodeId>(r)));
    const auto row = static_cast<Eigen::Index>(r);
    doc["I"].push_back(std::vector<double>(model.influence.row(row).begin(),
                                           model.influence.row(row).end()));
    doc["S"].push_back(std::vector<double>(model.susceptibility.row(row).begin(),
                                           model.susceptibility.row(row).end()));
  }
  out << doc.dump() << '\n';
}

IMModel read_model_json(std::istream& in, NodeNames& names) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
  for (const char* key : {"lambda", "k", "nodes", "I", "S"})
    if (!doc.contains(key)) throw DataError(std::string("model JSON: missing \"") + key + "\"");
  const auto k = doc["k"].get<std::size_t>();
  const auto& nodes = doc["nodes"];
  if (doc["I"].size() != nodes.size() || doc["S"].size() != nodes.size())
    throw DataError("model JSON: I and S must have one row per node");

  std::vector<NodeId> ids;
  for (const auto& n : nodes) ids.push_back(names.intern(n.get<std::string>()));
  const auto rows = static_cast<Eigen::Index>(names.size());
  IMModel model;
  model.lambda = doc["lambda"].get<double>();
  model.influence = Matrix::Zero(rows, static_cast<Eigen::Index>(k));
  model.susceptibility = Matrix::Zero(rows, static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& irow = doc["I"][i];
    const auto& srow = doc["S"][i];
    if (irow.size() != k || srow.size() != k) throw DataError("model JSON: row width differs from k");
    for (std::size_t j = 0; j < k; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      model.influence(ids[i], col) = irow[j].get<double>();
      model.susceptibility(ids[i], col) = srow[j].get<double>();
      if (model.influence(ids[i], col) < 0.0 || model.susceptibility(ids[i], col) < 0.0)
        throw DataError("model JSON: negative factor entry");
    }
  }
  return model;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "epoch,loss,step\n";
  out.precision(17);
  for (const auto& row : trace) out << row.epoch << ',' << row.loss << ',' << row.step << '\n';
}

}  // namespace infsus
