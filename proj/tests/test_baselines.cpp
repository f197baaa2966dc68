#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "infsus/baselines.hpp"
#include "support.hpp"

using namespace infsus;
using infsus::testing::random_exposures;

namespace {

// Independent-cascade log-likelihood recomputed from scratch.
double brute_ic_loglik(const ExposureTable& table, const PairwiseTable& probs) {
  double total = 0.0;
  for (const auto& g : table.groups()) {
    double miss = 1.0;
    for (NodeId u : g.mode.members) {
      auto it = probs.entries.find({u, g.target});
      miss *= 1.0 - (it == probs.entries.end() ? 0.0 : it->second.prob);
    }
    for (Count i = 0; i < g.successes; ++i) total += std::log(1.0 - miss);
    for (Count i = 0; i < g.failures; ++i) total += std::log(miss);
  }
  return total;
}

}  // namespace

TEST_CASE("or_combine closed forms") {
  auto constant = [](double p) { return [p](NodeId, NodeId) { return p; }; };
  CHECK(or_combine(constant(0.3), 0, AssembleMode::of({1})) == doctest::Approx(0.3));
  CHECK(or_combine(constant(0.5), 0, AssembleMode::of({1, 2})) == doctest::Approx(0.75));
  CHECK(or_combine(constant(0.5), 0, AssembleMode{}) == 0.0);
  auto one_sure = [](NodeId u, NodeId) { return u == 2 ? 1.0 : 0.2; };
  CHECK(or_combine(one_sure, 0, AssembleMode::of({1, 2, 3})) == 1.0);
}

TEST_CASE("or_combine is monotone under mode inclusion") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::map<NodeId, double> p;
  for (NodeId u = 0; u < 6; ++u) p[u] = unit(rng);
  auto pair = [&](NodeId u, NodeId) { return p[u]; };
  std::vector<NodeId> grow;
  double last = 0.0;
  for (NodeId u = 0; u < 6; ++u) {
    grow.push_back(u);
    const double now = or_combine(pair, 9, AssembleMode::of(grow));
    CHECK(now >= last);
    last = now;
  }
}

TEST_CASE("uniform predictor") {
  CHECK(UniformPredictor(0.0).set_prob(1, AssembleMode::of({0, 2})) == 0.0);
  CHECK(UniformPredictor(1.0).set_prob(1, AssembleMode::of({0})) == 1.0);
  CHECK(UniformPredictor(0.1).set_prob(1, AssembleMode{}) == 0.0);
  CHECK(UniformPredictor(0.01).set_prob(1, AssembleMode::of({0, 2})) ==
        doctest::Approx(1 - 0.99 * 0.99));
  for (double p : {0.1, 0.01, 0.001}) CHECK_NOTHROW(UniformPredictor{p});
  CHECK_THROWS_AS(UniformPredictor{1.5}, ConfigError);
}

TEST_CASE("bernoulli ratio of credited successes to exposures") {
  const ExposureTable table({{1, AssembleMode::of({0}), 3, 7, {3}}});
  const auto bd = bernoulli_estimator(table);
  CHECK(bd.prob(0, 1) == doctest::Approx(0.3));
  CHECK(bd.prob(1, 0) == 0.0);  // never exposed
}

TEST_CASE("bernoulli estimates are probabilities that cover every forward") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto table = random_exposures(10, 40, rng);
    const auto bd = bernoulli_estimator(table);
    std::map<NodeId, Count> credited, forwards;
    for (const auto& [edge, e] : bd.entries) {
      CHECK(e.successes <= e.attempts);
      CHECK(e.prob >= 0.0);
      CHECK(e.prob <= 1.0);
      credited[edge.to] += e.successes;
    }
    for (const auto& g : table.groups()) forwards[g.target] += g.successes;
    for (const auto& [v, n] : forwards) CHECK(credited[v] >= n);
  }
}

TEST_CASE("jaccard over messages where either endpoint was active") {
  const DiffusionNetwork net({{0, 1}});
  CascadeLog log;
  log.messages.push_back({"a", {{std::nullopt, 0, 0}, {0, 1, 1}}});
  log.messages.push_back({"b", {{std::nullopt, 0, 0}, {0, 1, 2}}});
  log.messages.push_back({"c", {{std::nullopt, 0, 0}}});
  log.messages.push_back({"d", {{std::nullopt, 0, 0}}});
  log.messages.push_back({"e", {{std::nullopt, 1, 0}}});
  log.messages.push_back({"f", {{std::nullopt, 1, 0}}});
  const auto ji = jaccard_estimator(log, net);
  CHECK(ji.prob(0, 1) == doctest::Approx(2.0 / 6.0));
  CHECK(ji.entries.at({0, 1}).attempts == 6);
}

TEST_CASE("jaccard edge cases") {
  const DiffusionNetwork net({{0, 1}, {2, 3}});
  CascadeLog disjoint;
  disjoint.messages.push_back({"a", {{std::nullopt, 0, 0}}});
  disjoint.messages.push_back({"b", {{std::nullopt, 1, 0}}});
  CHECK(jaccard_estimator(disjoint, net).prob(0, 1) == 0.0);
  CHECK(jaccard_estimator(disjoint, net).prob(2, 3) == 0.0);

  CascadeLog always;
  for (int i = 0; i < 4; ++i)
    always.messages.push_back({"m" + std::to_string(i), {{std::nullopt, 0, 0}, {0, 1, 1}}});
  CHECK(jaccard_estimator(always, net).prob(0, 1) == 1.0);
}

TEST_CASE("EM with singleton modes reaches the success ratio") {
  const ExposureTable table({{1, AssembleMode::of({0}), 3, 7, {3}},
                             {2, AssembleMode::of({0}), 0, 5, {0}},
                             {2, AssembleMode::of({1}), 4, 4, {4}}});
  const auto one = em_estimator(table, 1, 0.0);
  const auto bd = bernoulli_estimator(table);
  REQUIRE(one.entries.size() == bd.entries.size());
  for (const auto& [edge, e] : bd.entries) {
    const auto& got = one.entries.at(edge);
    CHECK(got.prob == doctest::Approx(e.prob).epsilon(1e-12));
    CHECK(got.successes == e.successes);
    CHECK(got.attempts == e.attempts);
  }
  const auto many = em_estimator(table, 100, 1e-12);
  CHECK(many.prob(0, 1) == doctest::Approx(0.3));
  CHECK(many.prob(0, 2) == 0.0);
  CHECK(many.prob(1, 2) == doctest::Approx(0.5));
}

TEST_CASE("EM starts off the zero fixed point") {
  // Every success credits node 1, so the ratio of (0, 2) is zero; the
  // floor keeps EM off that fixed point.
  const ExposureTable table({{2, AssembleMode::of({0, 1}), 4, 1, {0, 4}}});
  CHECK(bernoulli_estimator(table).prob(0, 2) == 0.0);
  const auto em = em_estimator(table, 200, 1e-12);
  CHECK(em.prob(0, 2) > 0.0);
}

TEST_CASE("EM likelihood never decreases") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const auto table = random_exposures(5, 12, rng);
    EmTrace trace;
    const auto est = em_estimator(table, 50, 0.0, &trace);
    REQUIRE(trace.log_likelihood.size() >= 2);
    for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i)
      CHECK(trace.log_likelihood[i] >= trace.log_likelihood[i - 1] - 1e-9);
    CHECK(trace.log_likelihood.back() == doctest::Approx(brute_ic_loglik(table, est)).epsilon(1e-12));
    for (const auto& [edge, e] : est.entries) {
      CHECK(e.prob >= 0.0);
      CHECK(e.prob <= 1.0);
    }
  }
}

TEST_CASE("PMF recovers an exact rank-one table") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  std::vector<double> a(8), b(8);
  for (auto& x : a) x = unit(rng);
  for (auto& x : b) x = unit(rng);
  PairwiseTable table;
  for (NodeId u = 0; u < 8; ++u)
    for (NodeId v = 0; v < 8; ++v)
      if ((u + v) % 3 != 0) table.entries[{u, v}] = {a[u] * b[v], 0, 0};
  PmfTrace trace;
  const auto fit = pmf_complete(table, 8, {.rank = 1, .reg = 0.0, .iters = 5000, .seed = 3, .init_scale = 0.5}, &trace);
  double worst = 0.0;
  for (const auto& [edge, e] : table.entries)
    worst = std::max(worst, std::abs(fit.raw(edge.from, edge.to) - e.prob));
  CHECK(worst < 1e-4);
  for (std::size_t i = 1; i < trace.objective.size(); ++i)
    CHECK(trace.objective[i] <= trace.objective[i - 1]);
}

TEST_CASE("PMF predictions are clamped probabilities") {
  std::mt19937_64 rng(15);
  const auto table = bernoulli_estimator(random_exposures(20, 80, rng));
  const auto fit = pmf_complete(table, 20, {.rank = 3, .reg = 0.01, .iters = 200, .seed = 1, .init_scale = 0.5});
  for (NodeId u = 0; u < 20; ++u)
    for (NodeId v = 0; v < 20; ++v) {
      CHECK(fit.pair_prob(u, v) >= 0.0);
      CHECK(fit.pair_prob(u, v) <= 1.0);
    }
  CHECK(fit.pair_prob(100, 1) == 0.0);  // outside the factors
}

TEST_CASE("PMF under heavy regularization predicts zero") {
  std::mt19937_64 rng(16);
  const auto table = bernoulli_estimator(random_exposures(10, 40, rng));
  const auto fit = pmf_complete(table, 10, {.rank = 2, .reg = 1e6, .iters = 200, .seed = 1, .init_scale = 0.1});
  for (NodeId u = 0; u < 10; ++u)
    for (NodeId v = 0; v < 10; ++v) CHECK(std::abs(fit.raw(u, v)) < 1e-6);
}

TEST_CASE("PMF is deterministic in its seed") {
  std::mt19937_64 rng(17);
  const auto table = bernoulli_estimator(random_exposures(10, 40, rng));
  const PmfOptions opts{.rank = 2, .reg = 0.01, .iters = 50, .seed = 4, .init_scale = 0.1};
  const auto a = pmf_complete(table, 10, opts);
  const auto b = pmf_complete(table, 10, opts);
  CHECK(a.left() == b.left());
  CHECK(a.right() == b.right());
  CHECK_THROWS_AS(pmf_complete(table, 10, {.rank = 0}), ConfigError);
}

TEST_CASE("factor ranking uses raw scores") {
  Matrix left(3, 1), right(3, 1);
  left << 2.0, 3.0, 0.0;
  right << 1.0, 1.0, 1.0;
  const FactorPredictor fit(left, right);
  // Both clamp to 1, the raw score breaks the tie.
  CHECK(fit.rank(2, AssembleMode::of({0, 1})) == std::vector<NodeId>{1, 0});
}

TEST_CASE("pairwise csv round-trip") {
  PairwiseTable table;
  table.entries[{0, 1}] = {0.25, 1, 4};
  table.entries[{2, 0}] = {1.0 / 3.0, 1, 3};
  auto names = NodeNames::numbered(3);
  std::ostringstream out;
  write_pairwise_csv(out, table, names);
  std::istringstream in(out.str());
  auto again = NodeNames::numbered(3);
  CHECK(read_pairwise_csv(in, again) == table);

  std::istringstream bad("u,v,probability,successes,attempts\na,b,1.5,1,1\n");
  CHECK_THROWS_AS(read_pairwise_csv(bad, again), DataError);
}
