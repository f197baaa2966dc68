#pragma once

// Objective and gradient kernels over a flattened exposure table. The serial
// versions follow the per-group formulas directly and serve as the reference
// for the OpenMP versions, which split the work into a per-group pass and
// two owner-computes accumulation passes (rows of S by target, rows of I by
// influencer) so that results do not depend on the thread count.

#include <cstddef>
#include <vector>

#include "infsus/cascades.hpp"
#include "infsus/im.hpp"

namespace infsus::kernels {

struct LossWeights {
  double alpha = 1.0;
  double lambda = 0.01;
  double mu_influence = 0.0;
  double inv_sigma2_influence = 0.0;
  double mu_susceptibility = 0.0;
  double inv_sigma2_susceptibility = 0.0;

  static LossWeights from(const Hyperparams& hp);
};

/// CSR view of an ExposureTable. Slots are (group, member) positions.
struct GroupLayout {
  std::size_t node_count = 0;
  std::vector<NodeId> target;          // per group
  std::vector<double> successes;       // per group
  std::vector<double> failures;        // per group
  std::vector<std::size_t> slot_begin; // groups + 1 offsets into member/choice
  std::vector<NodeId> member;          // per slot
  std::vector<double> choice;          // per slot
  std::vector<std::size_t> slot_group; // per slot

  // Groups targeting v are [target_begin[v], target_begin[v+1]).
  std::vector<std::size_t> target_begin;
  // Slots naming u as a member are by_member[member_begin[u] .. member_begin[u+1]).
  std::vector<std::size_t> member_begin;
  std::vector<std::size_t> by_member;

  std::size_t groups() const { return target.size(); }

  static GroupLayout build(const ExposureTable& table, std::size_t node_count);
};

/// Unweighted objective terms, as in ObjectiveParts.
struct LossTerms {
  double cascade = 0.0;
  double choice = 0.0;
  double prior = 0.0;
};

LossTerms loss_serial(const GroupLayout& layout, const Matrix& influence,
                      const Matrix& susceptibility, const LossWeights& w);
LossTerms loss_parallel(const GroupLayout& layout, const Matrix& influence,
                        const Matrix& susceptibility, const LossWeights& w,
                        bool fast_reduction = false);

/// Fills the gradient of the combined objective; `d_influence` and
/// `d_susceptibility` are resized as needed.
void gradient_serial(const GroupLayout& layout, const Matrix& influence,
                     const Matrix& susceptibility, const LossWeights& w, Matrix& d_influence,
                     Matrix& d_susceptibility);
void gradient_parallel(const GroupLayout& layout, const Matrix& influence,
                       const Matrix& susceptibility, const LossWeights& w, Matrix& d_influence,
                       Matrix& d_susceptibility);

inline double combine(const LossTerms& t, double alpha) {
  return alpha * t.cascade + (1.0 - alpha) * t.choice + t.prior;
}

}  // namespace infsus::kernels
