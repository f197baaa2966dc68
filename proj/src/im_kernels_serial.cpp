#include <algorithm>
#include <cmath>
#include <vector>

#include "im_group_math.hpp"
#include "infsus/im_kernels.hpp"

namespace infsus::kernels {

LossWeights LossWeights::from(const Hyperparams& hp) {
  LossWeights w;
  w.alpha = hp.alpha;
  w.lambda = hp.lambda;
  w.mu_influence = hp.mu_influence;
  w.inv_sigma2_influence = 1.0 / hp.sigma2_influence;
  w.mu_susceptibility = hp.mu_susceptibility;
  w.inv_sigma2_susceptibility = 1.0 / hp.sigma2_susceptibility;
  return w;
}

GroupLayout GroupLayout::build(const ExposureTable& table, std::size_t node_count) {
  node_count = std::max(node_count, table.id_bound());
  GroupLayout out;
  out.node_count = node_count;
  const auto& groups = table.groups();
  out.slot_begin.reserve(groups.size() + 1);
  out.slot_begin.push_back(0);
  for (const auto& g : groups) {
    out.target.push_back(g.target);
    out.successes.push_back(static_cast<double>(g.successes));
    out.failures.push_back(static_cast<double>(g.failures));
    for (std::size_t j = 0; j < g.mode.size(); ++j) {
      out.member.push_back(g.mode.members[j]);
      out.choice.push_back(static_cast<double>(g.choices[j]));
      out.slot_group.push_back(out.target.size() - 1);
    }
    out.slot_begin.push_back(out.member.size());
  }

  out.target_begin.assign(node_count + 1, 0);
  for (NodeId v : out.target) ++out.target_begin[v + 1];
  for (std::size_t v = 0; v < node_count; ++v) out.target_begin[v + 1] += out.target_begin[v];

  // Counting sort of slots by member keeps slot order within each member.
  out.member_begin.assign(node_count + 1, 0);
  for (NodeId u : out.member) ++out.member_begin[u + 1];
  for (std::size_t u = 0; u < node_count; ++u) out.member_begin[u + 1] += out.member_begin[u];
  out.by_member.resize(out.member.size());
  std::vector<std::size_t> cursor(out.member_begin.begin(), out.member_begin.end() - 1);
  for (std::size_t s = 0; s < out.member.size(); ++s) out.by_member[cursor[out.member[s]]++] = s;
  return out;
}

namespace {

double prior_term(const Matrix& m, double mu, double inv_sigma2) {
  if (inv_sigma2 == 0.0) return 0.0;
  return 0.5 * inv_sigma2 * (m.array() - mu).square().sum();
}

}  // namespace

LossTerms loss_serial(const GroupLayout& layout, const Matrix& influence,
                      const Matrix& susceptibility, const LossWeights& w) {
  LossTerms terms;
  std::vector<double> scores;
  for (std::size_t g = 0; g < layout.groups(); ++g) {
    const NodeId v = layout.target[g];
    scores.clear();
    double total = 0.0;
    for (std::size_t s = layout.slot_begin[g]; s < layout.slot_begin[g + 1]; ++s) {
      scores.push_back(influence.row(layout.member[s]).dot(susceptibility.row(v)));
      total += scores.back();
    }
    terms.cascade += detail::cascade_term(w.lambda * total, layout.successes[g],
                                          layout.failures[g], w.lambda)
                         .loss;

    const double top = *std::max_element(scores.begin(), scores.end());
    double norm = 0.0;
    for (double x : scores) norm += std::exp(x - top);
    const double lse = top + std::log(norm);
    for (std::size_t j = 0; j < scores.size(); ++j) {
      const double m = layout.choice[layout.slot_begin[g] + j];
      if (m != 0.0) terms.choice -= m * detail::clamped_log_prob(scores[j] - lse);
    }
  }
  terms.prior = prior_term(influence, w.mu_influence, w.inv_sigma2_influence) +
                prior_term(susceptibility, w.mu_susceptibility, w.inv_sigma2_susceptibility);
  return terms;
}

void gradient_serial(const GroupLayout& layout, const Matrix& influence,
                     const Matrix& susceptibility, const LossWeights& w, Matrix& d_influence,
                     Matrix& d_susceptibility) {
  const auto k = influence.cols();
  d_influence.setZero(influence.rows(), k);
  d_susceptibility.setZero(susceptibility.rows(), k);

  std::vector<double> scores;
  std::vector<double> softmax;
  Eigen::RowVectorXd sum_influence(k);
  Eigen::RowVectorXd expected_influence(k);
  for (std::size_t g = 0; g < layout.groups(); ++g) {
    const NodeId v = layout.target[g];
    const std::size_t first = layout.slot_begin[g];
    const std::size_t size = layout.slot_begin[g + 1] - first;
    const double n = layout.successes[g];

    scores.assign(size, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < size; ++j) {
      scores[j] = influence.row(layout.member[first + j]).dot(susceptibility.row(v));
      total += scores[j];
    }
    const double h =
        detail::cascade_term(w.lambda * total, n, layout.failures[g], w.lambda).h;

    const double top = *std::max_element(scores.begin(), scores.end());
    softmax.assign(size, 0.0);
    double norm = 0.0;
    for (std::size_t j = 0; j < size; ++j) norm += softmax[j] = std::exp(scores[j] - top);
    for (double& x : softmax) x /= norm;

    sum_influence.setZero();
    expected_influence.setZero();
    for (std::size_t j = 0; j < size; ++j) {
      const auto row = influence.row(layout.member[first + j]);
      sum_influence += row;
      expected_influence += softmax[j] * row;
    }

    // dL/dS_v = a h sum_u I_u + (1 - a) sum_{u*} m(u*) (E_softmax[I] - I_{u*})
    d_susceptibility.row(v) += w.alpha * h * sum_influence;
    for (std::size_t j = 0; j < size; ++j) {
      const double m = layout.choice[first + j];
      if (m == 0.0) continue;
      d_susceptibility.row(v) +=
          (1.0 - w.alpha) * m * (expected_influence - influence.row(layout.member[first + j]));
    }
    // dL/dI_u = (a h + (1 - a)(n softmax(u) - m(u))) S_v
    for (std::size_t j = 0; j < size; ++j) {
      const double m = layout.choice[first + j];
      d_influence.row(layout.member[first + j]) +=
          (w.alpha * h + (1.0 - w.alpha) * (n * softmax[j] - m)) * susceptibility.row(v);
    }
  }

  if (w.inv_sigma2_influence != 0.0)
    d_influence.array() += w.inv_sigma2_influence * (influence.array() - w.mu_influence);
  if (w.inv_sigma2_susceptibility != 0.0)
    d_susceptibility.array() +=
        w.inv_sigma2_susceptibility * (susceptibility.array() - w.mu_susceptibility);
}

}  // namespace infsus::kernels
