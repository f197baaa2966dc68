#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "im_group_math.hpp"
#include "infsus/im_kernels.hpp"

namespace infsus::kernels {

namespace {

using Index = std::int64_t;

// Per-group pass: scores, losses and the coefficient c_{g,j} = dL_g / d(I_u . S_v)
// for every slot. Each group writes only its own entries.
void group_pass(const GroupLayout& layout, const Matrix& influence, const Matrix& susceptibility,
                const LossWeights& w, std::vector<double>* coeff, std::vector<double>& cascade_loss,
                std::vector<double>& choice_loss) {
  const auto groups = static_cast<Index>(layout.groups());
  cascade_loss.assign(layout.groups(), 0.0);
  choice_loss.assign(layout.groups(), 0.0);
  if (coeff) coeff->assign(layout.member.size(), 0.0);

#pragma omp parallel
  {
    std::vector<double> scores;
#pragma omp for schedule(dynamic, 256)
    for (Index gi = 0; gi < groups; ++gi) {
      const auto g = static_cast<std::size_t>(gi);
      const NodeId v = layout.target[g];
      const std::size_t first = layout.slot_begin[g];
      const std::size_t size = layout.slot_begin[g + 1] - first;
      scores.resize(size);
      double total = 0.0;
      for (std::size_t j = 0; j < size; ++j) {
        scores[j] = influence.row(layout.member[first + j]).dot(susceptibility.row(v));
        total += scores[j];
      }
      const double n = layout.successes[g];
      const auto cascade = detail::cascade_term(w.lambda * total, n, layout.failures[g], w.lambda);
      cascade_loss[g] = cascade.loss;

      const double top = *std::max_element(scores.begin(), scores.end());
      double norm = 0.0;
      for (std::size_t j = 0; j < size; ++j) norm += std::exp(scores[j] - top);
      const double lse = top + std::log(norm);
      double choice = 0.0;
      for (std::size_t j = 0; j < size; ++j) {
        const double m = layout.choice[first + j];
        const double log_prob = scores[j] - lse;
        if (m != 0.0) choice -= m * detail::clamped_log_prob(log_prob);
        if (coeff)
          (*coeff)[first + j] =
              w.alpha * cascade.h + (1.0 - w.alpha) * (n * std::exp(log_prob) - m);
      }
      choice_loss[g] = choice;
    }
  }
}

double prior_parallel(const Matrix& m, double mu, double inv_sigma2, bool fast) {
  if (inv_sigma2 == 0.0) return 0.0;
  const auto rows = static_cast<Index>(m.rows());
  if (fast) {
    double total = 0.0;
#pragma omp parallel for reduction(+ : total) schedule(static)
    for (Index r = 0; r < rows; ++r) total += (m.row(r).array() - mu).square().sum();
    return 0.5 * inv_sigma2 * total;
  }
  std::vector<double> per_row(m.rows());
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r)
    per_row[static_cast<std::size_t>(r)] = (m.row(r).array() - mu).square().sum();
  return 0.5 * inv_sigma2 * std::accumulate(per_row.begin(), per_row.end(), 0.0);
}

double sum(const std::vector<double>& values, bool fast) {
  if (!fast) return std::accumulate(values.begin(), values.end(), 0.0);
  double total = 0.0;
  const auto size = static_cast<Index>(values.size());
#pragma omp parallel for reduction(+ : total) schedule(static)
  for (Index i = 0; i < size; ++i) total += values[static_cast<std::size_t>(i)];
  return total;
}

}  // namespace

LossTerms loss_parallel(const GroupLayout& layout, const Matrix& influence,
                        const Matrix& susceptibility, const LossWeights& w, bool fast_reduction) {
  std::vector<double> cascade_loss;
  std::vector<double> choice_loss;
  group_pass(layout, influence, susceptibility, w, nullptr, cascade_loss, choice_loss);
  LossTerms terms;
  terms.cascade = sum(cascade_loss, fast_reduction);
  terms.choice = sum(choice_loss, fast_reduction);
  terms.prior =
      prior_parallel(influence, w.mu_influence, w.inv_sigma2_influence, fast_reduction) +
      prior_parallel(susceptibility, w.mu_susceptibility, w.inv_sigma2_susceptibility,
                     fast_reduction);
  return terms;
}

void gradient_parallel(const GroupLayout& layout, const Matrix& influence,
                       const Matrix& susceptibility, const LossWeights& w, Matrix& d_influence,
                       Matrix& d_susceptibility) {
  std::vector<double> coeff;
  std::vector<double> cascade_loss;
  std::vector<double> choice_loss;
  group_pass(layout, influence, susceptibility, w, &coeff, cascade_loss, choice_loss);

  const auto k = influence.cols();
  d_influence.resize(influence.rows(), k);
  d_susceptibility.resize(susceptibility.rows(), k);
  const auto rows = static_cast<Index>(influence.rows());

#pragma omp parallel for schedule(dynamic, 64)
  for (Index r = 0; r < rows; ++r) {
    const auto v = static_cast<std::size_t>(r);
    auto out = d_susceptibility.row(r);
    out.setZero();
    if (v < layout.node_count) {
      for (std::size_t g = layout.target_begin[v]; g < layout.target_begin[v + 1]; ++g)
        for (std::size_t s = layout.slot_begin[g]; s < layout.slot_begin[g + 1]; ++s)
          out += coeff[s] * influence.row(layout.member[s]);
    }
    if (w.inv_sigma2_susceptibility != 0.0)
      out.array() += w.inv_sigma2_susceptibility * (susceptibility.row(r).array() - w.mu_susceptibility);
  }

#pragma omp parallel for schedule(dynamic, 64)
  for (Index r = 0; r < rows; ++r) {
    const auto u = static_cast<std::size_t>(r);
    auto out = d_influence.row(r);
    out.setZero();
    if (u < layout.node_count) {
      for (std::size_t i = layout.member_begin[u]; i < layout.member_begin[u + 1]; ++i) {
        const std::size_t s = layout.by_member[i];
        out += coeff[s] * susceptibility.row(layout.target[layout.slot_group[s]]);
      }
    }
    if (w.inv_sigma2_influence != 0.0)
      out.array() += w.inv_sigma2_influence * (influence.row(r).array() - w.mu_influence);
  }
}

}  // namespace infsus::kernels
