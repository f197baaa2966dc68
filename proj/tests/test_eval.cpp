#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "infsus/eval.hpp"
#include "support.hpp"

using namespace infsus;
using infsus::testing::random_exposures;
using infsus::testing::random_matrix;
using infsus::testing::random_model;

namespace {

double brute_matrix_difference(const Matrix& a, const Matrix& b) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(a.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      total += (a.col(j) - b.col(perm[static_cast<std::size_t>(j)])).cwiseAbs().sum();
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

class TablePair final : public Predictor {
 public:
  explicit TablePair(double q) : q_(q) {}
  double pair_prob(NodeId, NodeId) const override { return q_; }

 private:
  double q_;
};

}  // namespace

TEST_CASE("ratio ground truth") {
  const ExposureTable table({{1, AssembleMode::of({0}), 1, 3, {1}},
                             {2, AssembleMode::of({0}), 0, 2, {0}},
                             {2, AssembleMode::of({1}), 2, 2, {2}}});
  const auto truth = estimate_ground_truth(table, 1);
  REQUIRE(truth.size() == 3);
  CHECK(truth.entries[0].p_true == 0.25);
  CHECK(truth.entries[0].support == 4);
  CHECK(truth.entries[1].p_true == 0.0);
  const auto strict = estimate_ground_truth(table, 5);
  CHECK(strict.empty());
  CHECK(estimate_ground_truth(table, 4).size() == 2);
  CHECK_THROWS_AS(estimate_ground_truth(table, 0), ConfigError);
}

TEST_CASE("synthetic ground truth is the exact propagation probability") {
  Matrix i = Matrix::Zero(2, 1), s = Matrix::Zero(2, 1);
  i(0, 0) = 10.0;
  s(1, 0) = 10.0;
  const IMModel m{i, s, 0.01};
  const std::vector<std::pair<NodeId, AssembleMode>> pairs{{1, AssembleMode::of({0})},
                                                           {1, AssembleMode{}}};
  const auto truth = synthetic_ground_truth(m, pairs);
  CHECK(truth.entries[0].p_true == doctest::Approx(1 - std::exp(-1.0)).epsilon(1e-14));
  CHECK(truth.entries[1].p_true == 0.0);
  const auto again = synthetic_ground_truth(m, pairs);
  CHECK(again.entries[0].p_true == truth.entries[0].p_true);
}

TEST_CASE("bernoulli KL values") {
  CHECK(bernoulli_kl(0.3, 0.3) == 0.0);
  CHECK(bernoulli_kl(0.5, 0.25) == doctest::Approx(0.14384).epsilon(1e-5));
  CHECK(std::abs(bernoulli_kl(0.5, 0.25) - (0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0))) < 1e-15);
  CHECK(bernoulli_kl(0.0, kKlClamp) == doctest::Approx(-std::log1p(-kKlClamp)).epsilon(1e-12));
  CHECK(std::isfinite(bernoulli_kl(1.0, 0.0)));
  CHECK(std::isfinite(bernoulli_kl(0.0, 1.0)));
}

TEST_CASE("bernoulli KL is nonnegative and zero only at the clamped match") {
  for (int a = 0; a <= 20; ++a) {
    for (int b = 0; b <= 20; ++b) {
      const double p = a / 20.0;
      const double q = b / 20.0;
      const double kl = bernoulli_kl(p, q);
      CHECK(kl >= 0.0);
      const double qc = std::clamp(q, kKlClamp, 1 - kKlClamp);
      if (p == qc) CHECK(kl == 0.0);
      else CHECK(kl > 0.0);
    }
  }
}

TEST_CASE("MKL of a single pair and of a perfect predictor") {
  GroundTruth truth;
  truth.entries.push_back({1, AssembleMode::of({0}), 0.5, 1});
  CHECK(mkl(truth, TablePair(0.25)) == doctest::Approx(0.14384).epsilon(1e-5));
  CHECK(mkl(truth, TablePair(0.5)) == 0.0);
  CHECK_THROWS_AS(mkl(GroundTruth{}, TablePair(0.5)), std::domain_error);

  std::mt19937_64 rng(3);
  const auto model = random_model(6, 2, 0.3, rng);
  const auto exact = synthetic_ground_truth(model, random_exposures(6, 20, rng));
  CHECK(mkl(exact, ImPredictor(model)) < 1e-12);
}

TEST_CASE("MKL ignores pair order and duplication") {
  std::mt19937_64 rng(5);
  const auto model = random_model(8, 2, 0.3, rng);
  auto truth = synthetic_ground_truth(model, random_exposures(8, 30, rng));
  const TablePair guess(0.1);
  const double base = mkl(truth, guess);
  std::shuffle(truth.entries.begin(), truth.entries.end(), rng);
  CHECK(mkl(truth, guess) == doctest::Approx(base).epsilon(1e-14));
  auto doubled = truth;
  doubled.entries.insert(doubled.entries.end(), truth.entries.begin(), truth.entries.end());
  CHECK(mkl(doubled, guess) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("observed and hidden buckets") {
  const DiffusionNetwork train({{0, 2}, {1, 3}});
  const DiffusionNetwork test({{0, 2}, {1, 2}});
  const auto split = split_observed_hidden(train, test);
  REQUIRE(split.observed.size() == 1);
  CHECK(split.observed[0].first == 2);
  CHECK(split.observed[0].second == AssembleMode::of({0}));
  REQUIRE(split.hidden.size() == 1);
  CHECK(split.hidden[0].second == AssembleMode::of({1}));

  GroundTruth truth;
  truth.entries.push_back({2, AssembleMode::of({0}), 0.1, 1});
  truth.entries.push_back({2, AssembleMode::of({0, 1}), 0.2, 1});
  const auto buckets = split_truth(train, truth);
  CHECK(buckets.observed.size() == 1);
  CHECK(buckets.hidden.size() == 1);
  CHECK(buckets.hidden.entries[0].mode.size() == 2);
}

TEST_CASE("compositive score") {
  CHECK(compositive(0, 0) == 0.0);
  CHECK(compositive(3, 4) == 5.0);
  CHECK(compositive(0.7, 0) == 0.7);
}

TEST_CASE("mean reciprocal rank") {
  const auto perfect = mrr({1, 1, 1});
  CHECK(perfect.mrr == 1.0);
  CHECK(perfect.r_mrr == 0.0);
  const auto half = mrr({1, 2});
  CHECK(half.mrr == 0.75);
  CHECK(half.r_mrr == 0.25);
  CHECK_THROWS_AS(mrr({}), std::domain_error);
  CHECK_THROWS_AS(mrr({0, 1}), std::domain_error);
}

TEST_CASE("random-guess R-MRR is the expected reciprocal rank of a uniform order") {
  std::vector<RankCase> cases{{0, AssembleMode::of({1, 2}), 1, 1}};
  CHECK(random_guess_rmrr(cases) == doctest::Approx(0.25));
  cases.push_back({0, AssembleMode::of({1, 2, 3}), 1, 1});
  CHECK(random_guess_rmrr(cases) == doctest::Approx(1 - (0.75 + 11.0 / 18.0) / 2));

  // Monte-Carlo check over shuffled orders.
  std::mt19937_64 rng(1);
  std::vector<std::size_t> ranks;
  for (int i = 0; i < 200000; ++i) {
    const auto& c = cases[static_cast<std::size_t>(i % 2)];
    std::vector<NodeId> order = c.mode.members;
    std::shuffle(order.begin(), order.end(), rng);
    ranks.push_back(static_cast<std::size_t>(std::find(order.begin(), order.end(), c.truth) - order.begin()) + 1);
  }
  CHECK(mrr(ranks).r_mrr == doctest::Approx(random_guess_rmrr(cases)).epsilon(0.01));
}

TEST_CASE("rank cases and truth ranks") {
  const ExposureTable table({{3, AssembleMode::of({0, 1}), 3, 1, {1, 2}},
                             {3, AssembleMode::of({2}), 5, 0, {5}}});
  const auto recorded = recorded_rank_cases(table);
  REQUIRE(recorded.size() == 2);
  CHECK(recorded[0].truth == 0);
  CHECK(recorded[0].weight == 1);
  CHECK(recorded[1].truth == 1);
  CHECK(recorded[1].weight == 2);

  Matrix i(4, 1), s = Matrix::Constant(4, 1, 1.0);
  i << 1.0, 2.0, 0.5, 0.0;
  const IMModel m{i, s, 0.01};
  const auto by_model = model_rank_cases(table, m);
  REQUIRE(by_model.size() == 1);
  CHECK(by_model[0].truth == 1);
  CHECK(by_model[0].weight == 4);

  const auto ranks = truth_ranks(recorded, ImPredictor(m));
  CHECK(ranks == std::vector<std::size_t>{2, 1, 1});
}

TEST_CASE("assignment matches brute force for small k") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto k = static_cast<std::size_t>(1 + trial % 6);
    const auto a = random_matrix(12, k, rng);
    const auto b = random_matrix(12, k, rng);
    CHECK(matrix_difference(a, b) == doctest::Approx(brute_matrix_difference(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("matrix difference is a metric up to column permutation") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_matrix(10, 4, rng);
    const auto b = random_matrix(10, 4, rng);
    const auto c = random_matrix(10, 4, rng);
    CHECK(matrix_difference(a, b) == doctest::Approx(matrix_difference(b, a)).epsilon(1e-12));
    CHECK(matrix_difference(a, b) >= 0.0);
    CHECK(matrix_difference(a, c) <= matrix_difference(a, b) + matrix_difference(b, c) + 1e-12);

    Matrix permuted(a.rows(), a.cols());
    permuted << a.col(2), a.col(0), a.col(3), a.col(1);
    CHECK(matrix_difference(a, permuted) == 0.0);
  }
  const auto x = random_matrix(7, 1, rng);
  const auto y = random_matrix(7, 1, rng);
  CHECK(matrix_difference(x, y) == doctest::Approx((x - y).cwiseAbs().sum()).epsilon(1e-14));
  CHECK_THROWS_AS(matrix_difference(x, random_matrix(7, 2, rng)), std::domain_error);
}

TEST_CASE("assignment solves a known cost matrix") {
  const std::vector<std::vector<double>> cost{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
  const auto a = solve_assignment(cost);
  CHECK(cost[0][a[0]] + cost[1][a[1]] + cost[2][a[2]] == 5.0);
}

TEST_CASE("histogram conserves nodes and puts a zero model in the first cell") {
  const IMModel zero{Matrix::Zero(9, 3), Matrix::Zero(9, 3), 0.01};
  const auto grid = influence_susceptibility_histogram(zero, 4);
  CHECK(grid[0][0] == 9);

  std::mt19937_64 rng(7);
  const auto m = random_model(50, 3, 0.01, rng);
  for (auto norm : {NormKind::l1, NormKind::l2}) {
    const auto g = influence_susceptibility_histogram(m, 5, norm);
    Count total = 0;
    for (const auto& row : g)
      for (Count c : row) total += c;
    CHECK(total == 50);
  }
  CHECK_THROWS_AS(influence_susceptibility_histogram(m, 0), ConfigError);

  std::ostringstream out;
  write_histogram_csv(out, {{1, 2}, {3, 4}});
  CHECK(out.str() == "x_bin,y_bin,count\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n");
}

TEST_CASE("metrics report identities") {
  std::mt19937_64 rng(9);
  const auto model = random_model(10, 2, 0.2, rng);
  const auto table = random_exposures(10, 40, rng);
  const auto truth = synthetic_ground_truth(model, table);
  const DiffusionNetwork train({{0, 1}, {2, 3}, {4, 5}});
  const auto cases = model_rank_cases(table, model);
  const auto r = evaluate_predictor("UN", UniformPredictor(0.01), truth, train, cases);
  CHECK(r.compositive == compositive(r.mkl_observed, r.mkl_hidden));
  CHECK(r.r_mrr == 1.0 - r.mrr);
  CHECK(r.pairs == r.observed_pairs + r.hidden_pairs);
  CHECK(r.pairs == truth.size());

  const auto im = evaluate_predictor("IM", ImPredictor(model), truth, train, cases);
  CHECK(im.mkl < 1e-12);
  CHECK(im.r_mrr == 0.0);

  std::ostringstream out;
  write_metrics_json(out, {r, im});
  const auto doc = nlohmann::json::parse(out.str());
  REQUIRE(doc.size() == 2);
  for (const char* key : {"method", "mkl", "mkl_observed", "mkl_hidden", "compositive", "mrr",
                          "r_mrr", "pairs", "observed_pairs", "hidden_pairs", "rank_cases"})
    CHECK(doc[0].contains(key));
}

TEST_CASE("per-pair KL dump") {
  GroundTruth truth;
  truth.entries.push_back({1, AssembleMode::of({0}), 0.5, 1});
  truth.entries.push_back({1, AssembleMode::of({0, 2}), 0.0, 1});
  const DiffusionNetwork train({{0, 1}});
  auto names = NodeNames::numbered(3);
  std::ostringstream out;
  write_kl_dump_csv(out, truth, UniformPredictor(0.25), train, names);
  std::istringstream in(out.str());
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  CHECK(header == "v,mode,p_true,q,kl,bucket");
  CHECK(first.starts_with("1,0,0.5,0.25,0.1438"));
  CHECK(first.ends_with(",observed"));
  CHECK(second.starts_with("1,0 2,0,"));
  CHECK(second.ends_with(",hidden"));
}
