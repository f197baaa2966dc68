#include "infsus/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace infsus {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (grid.alphas.empty() || grid.lambdas.empty() || grid.ks.empty())
    throw ConfigError("hyperparameter grids must be nonempty");
  for (double a : grid.alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("grid alpha outside [0, 1]");
  for (double l : grid.lambdas)
    if (!(l > 0.0)) throw ConfigError("grid lambda must be positive");
  for (std::size_t k : grid.ks)
    if (k == 0) throw ConfigError("grid k must be positive");
  train.validate();
  if (source == DataSource::synthetic) {
    synth.validate();
  } else {
    if (cascade_files.empty()) throw ConfigError("no cascade files configured");
    for (const auto& f : cascade_files)
      if (!std::filesystem::exists(f)) throw ConfigError("cascade file not found: " + f);
  }
  if (min_support == 0) throw ConfigError("min_support must be at least 1");
  for (double p : baselines.uniform_probs)
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("uniform probability outside [0, 1]");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  return source == o.source && synth == o.synth && test_cascades == o.test_cascades &&
         swaps_per_edge == o.swaps_per_edge && restart_random_pairs == o.restart_random_pairs &&
         cascade_files == o.cascade_files && windows == o.windows &&
         prune_min_pair_total == o.prune_min_pair_total &&
         prune_max_pair_per_message == o.prune_max_pair_per_message &&
         min_support == o.min_support && grid == o.grid && train == o.train &&
         baselines == o.baselines && output_dir == o.output_dir && seed == o.seed;
}

ExperimentConfig ExperimentConfig::synthetic_paper() {
  ExperimentConfig cfg;
  cfg.source = DataSource::synthetic;
  cfg.synth = SynthConfig{};
  cfg.test_cascades = 20000;
  cfg.train.k = 20;
  cfg.train.lambda = 0.01;
  return cfg;
}

ExperimentConfig ExperimentConfig::synthetic_small() {
  ExperimentConfig cfg = synthetic_paper();
  cfg.synth.n_nodes = 300;
  cfg.synth.k = 10;
  cfg.synth.n_cascades = 5000;
  cfg.synth.n_sources = 30;
  cfg.test_cascades = 20000;
  cfg.train.k = 10;
  return cfg;
}

// ---------------------------------------------------------------------------

namespace {

json range_json(std::pair<double, double> r) { return json::array({r.first, r.second}); }

std::pair<double, double> range_from(const json& j, std::pair<double, double> fallback) {
  if (j.is_null()) return fallback;
  if (!j.is_array() || j.size() != 2) throw ConfigError("ranges are [lo, hi] pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
void read(const json& doc, const char* key, T& target) {
  if (doc.contains(key) && !doc[key].is_null()) target = doc[key].get<T>();
}

}  // namespace

json to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["seed"] = cfg.seed;
  doc["output_dir"] = cfg.output_dir;
  doc["source"] = cfg.source == DataSource::synthetic ? "synthetic" : "cascades";

  const auto& s = cfg.synth;
  doc["synth"] = {{"n_nodes", s.n_nodes},
                  {"edges_per_node", s.edges_per_node},
                  {"k", s.k},
                  {"lambda", s.lambda},
                  {"influence_range", range_json(s.influence_range)},
                  {"susceptibility_range", range_json(s.susceptibility_range)},
                  {"n_cascades", s.n_cascades},
                  {"n_sources", s.n_sources},
                  {"retries", s.retries},
                  {"parent_rule", s.parent_rule == ParentRule::plackett_luce ? "plackett_luce" : "uniform"},
                  {"edges_old_to_new", s.edges_old_to_new},
                  {"test_cascades", cfg.test_cascades},
                  {"swaps_per_edge", cfg.swaps_per_edge},
                  {"restart_random_pairs", cfg.restart_random_pairs}};

  doc["data"] = {{"cascade_files", cfg.cascade_files},
                 {"windows", cfg.windows},
                 {"prune_min_pair_total", cfg.prune_min_pair_total},
                 {"prune_max_pair_per_message", cfg.prune_max_pair_per_message},
                 {"min_support", cfg.min_support}};

  doc["grid"] = {{"alpha", cfg.grid.alphas}, {"lambda", cfg.grid.lambdas}, {"k", cfg.grid.ks}};

  const auto& t = cfg.train;
  doc["train"] = {{"alpha", t.alpha},
                  {"beta", t.beta},
                  {"mu_influence", t.mu_influence},
                  {"sigma2_influence", t.sigma2_influence},
                  {"mu_susceptibility", t.mu_susceptibility},
                  {"sigma2_susceptibility", t.sigma2_susceptibility},
                  {"calibrate_prior", t.calibrate_prior},
                  {"max_epochs", t.max_epochs},
                  {"k", t.k},
                  {"lambda", t.lambda},
                  {"init_scale", t.init_scale},
                  {"step_rule", t.step_rule == StepRule::armijo ? "armijo" : "fixed"},
                  {"parallel", t.parallel},
                  {"fast_reduction", t.fast_reduction}};

  const auto& b = cfg.baselines;
  doc["baselines"] = {{"uniform_probs", b.uniform_probs},
                      {"bernoulli", b.bernoulli},
                      {"jaccard", b.jaccard},
                      {"em", b.em},
                      {"em_iters", b.em_iters},
                      {"em_tol", b.em_tol},
                      {"mf_rank", b.pmf.rank},
                      {"mf_reg", b.pmf.reg},
                      {"mf_iters", b.pmf.iters},
                      {"mf_init_scale", b.pmf.init_scale}};
  return doc;
}

ExperimentConfig config_from_json(const json& doc, ExperimentConfig base) {
  ExperimentConfig cfg = std::move(base);
  try {
    read(doc, "seed", cfg.seed);
    read(doc, "output_dir", cfg.output_dir);
    if (doc.contains("source")) {
      const auto src = doc["source"].get<std::string>();
      if (src == "synthetic") cfg.source = DataSource::synthetic;
      else if (src == "cascades") cfg.source = DataSource::cascades;
      else throw ConfigError("unknown source " + src);
    }
    if (doc.contains("synth")) {
      const auto& s = doc["synth"];
      read(s, "n_nodes", cfg.synth.n_nodes);
      read(s, "edges_per_node", cfg.synth.edges_per_node);
      read(s, "k", cfg.synth.k);
      read(s, "lambda", cfg.synth.lambda);
      if (s.contains("influence_range"))
        cfg.synth.influence_range = range_from(s["influence_range"], cfg.synth.influence_range);
      if (s.contains("susceptibility_range"))
        cfg.synth.susceptibility_range =
            range_from(s["susceptibility_range"], cfg.synth.susceptibility_range);
      read(s, "n_cascades", cfg.synth.n_cascades);
      read(s, "n_sources", cfg.synth.n_sources);
      read(s, "retries", cfg.synth.retries);
      if (s.contains("parent_rule")) {
        const auto rule = s["parent_rule"].get<std::string>();
        if (rule == "plackett_luce") cfg.synth.parent_rule = ParentRule::plackett_luce;
        else if (rule == "uniform") cfg.synth.parent_rule = ParentRule::uniform;
        else throw ConfigError("unknown parent_rule " + rule);
      }
      read(s, "edges_old_to_new", cfg.synth.edges_old_to_new);
      read(s, "test_cascades", cfg.test_cascades);
      read(s, "swaps_per_edge", cfg.swaps_per_edge);
      read(s, "restart_random_pairs", cfg.restart_random_pairs);
    }
    if (doc.contains("data")) {
      const auto& d = doc["data"];
      read(d, "cascade_files", cfg.cascade_files);
      read(d, "windows", cfg.windows);
      read(d, "prune_min_pair_total", cfg.prune_min_pair_total);
      read(d, "prune_max_pair_per_message", cfg.prune_max_pair_per_message);
      read(d, "min_support", cfg.min_support);
    }
    if (doc.contains("grid")) {
      const auto& g = doc["grid"];
      read(g, "alpha", cfg.grid.alphas);
      read(g, "lambda", cfg.grid.lambdas);
      read(g, "k", cfg.grid.ks);
    }
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      read(t, "alpha", cfg.train.alpha);
      read(t, "beta", cfg.train.beta);
      read(t, "mu_influence", cfg.train.mu_influence);
      read(t, "sigma2_influence", cfg.train.sigma2_influence);
      read(t, "mu_susceptibility", cfg.train.mu_susceptibility);
      read(t, "sigma2_susceptibility", cfg.train.sigma2_susceptibility);
      read(t, "calibrate_prior", cfg.train.calibrate_prior);
      read(t, "max_epochs", cfg.train.max_epochs);
      read(t, "k", cfg.train.k);
      read(t, "lambda", cfg.train.lambda);
      read(t, "init_scale", cfg.train.init_scale);
      if (t.contains("step_rule")) {
        const auto rule = t["step_rule"].get<std::string>();
        if (rule == "armijo") cfg.train.step_rule = StepRule::armijo;
        else if (rule == "fixed") cfg.train.step_rule = StepRule::fixed;
        else throw ConfigError("unknown step_rule " + rule);
      }
      read(t, "parallel", cfg.train.parallel);
      read(t, "fast_reduction", cfg.train.fast_reduction);
    }
    if (doc.contains("baselines")) {
      const auto& b = doc["baselines"];
      read(b, "uniform_probs", cfg.baselines.uniform_probs);
      read(b, "bernoulli", cfg.baselines.bernoulli);
      read(b, "jaccard", cfg.baselines.jaccard);
      read(b, "em", cfg.baselines.em);
      read(b, "em_iters", cfg.baselines.em_iters);
      read(b, "em_tol", cfg.baselines.em_tol);
      read(b, "mf_rank", cfg.baselines.pmf.rank);
      read(b, "mf_reg", cfg.baselines.pmf.reg);
      read(b, "mf_iters", cfg.baselines.pmf.iters);
      read(b, "mf_init_scale", cfg.baselines.pmf.init_scale);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return config_from_json(doc, std::move(base));
}

SynthConfig seeded(SynthConfig synth, std::uint64_t seed) {
  synth.seed = derive_seed(seed, "synth");
  return synth;
}

Hyperparams seeded(Hyperparams hp, std::uint64_t seed) {
  hp.init_seed = derive_seed(seed, "im_init");
  return hp;
}

// ---------------------------------------------------------------------------

SyntheticCorpus generate_corpus(const ExperimentConfig& cfg) {
  const SynthConfig synth = seeded(cfg.synth, cfg.seed);
  synth.validate();
  SyntheticCorpus c;
  c.names = NodeNames::numbered(synth.n_nodes);
  c.network = generate_ba_network(synth.n_nodes, synth.edges_per_node, synth.seed,
                                  synth.edges_old_to_new);
  auto [shuffled, accepted] =
      shuffle_network(c.network, synth.seed, cfg.swaps_per_edge * c.network.edges().size());
  c.shuffled = std::move(shuffled);
  c.accepted_swaps = accepted;
  c.truth = sample_ground_truth(synth);

  c.train = simulate_cascades(c.network, c.truth, synth, "train");
  SynthConfig test = synth;
  test.n_cascades = cfg.test_cascades;
  const auto pool = source_pool(synth, c.network);
  c.test_trained = simulate_cascades(c.network, c.truth, test, pool, "test");
  c.test_shuffled = simulate_cascades(c.shuffled, c.truth, test, pool, "shuffled");
  return c;
}

TrainingData prepare_training(CascadeLog log) {
  TrainingData data;
  data.log = std::move(log);
  data.network = build_diffusion_network(data.log);
  data.exposures = extract_exposures(data.log, data.network, &data.diagnostics);
  return data;
}

PairwiseTable pairwise_estimate(const std::string& estimator, const TrainingData& data,
                                const BaselineSettings& settings) {
  if (estimator == "bd") return bernoulli_estimator(data.exposures);
  if (estimator == "ji") return jaccard_estimator(data.log, data.network);
  if (estimator == "em") return em_estimator(data.exposures, settings.em_iters, settings.em_tol);
  throw ConfigError("unknown pairwise estimator " + estimator);
}

std::vector<FittedMethod> fit_methods(const TrainingData& data, const ExperimentConfig& cfg,
                                      std::size_t node_count, TrainResult* im_result) {
  if (data.exposures.empty()) throw DataError("nothing to train: the exposure table is empty");
  std::vector<FittedMethod> methods;
  auto im = train(data.exposures, seeded(cfg.train, cfg.seed), node_count);
  methods.push_back({"IM", std::make_shared<ImPredictor>(im.model)});
  if (im_result) *im_result = std::move(im);

  PmfOptions pmf = cfg.baselines.pmf;
  if (pmf.rank == 0) pmf.rank = cfg.train.k;
  pmf.seed = derive_seed(cfg.seed, "pmf");
  const std::vector<std::pair<std::string, bool>> pairwise{
      {"em", cfg.baselines.em}, {"bd", cfg.baselines.bernoulli}, {"ji", cfg.baselines.jaccard}};
  for (const auto& [name, enabled] : pairwise) {
    if (!enabled) continue;
    auto table = pairwise_estimate(name, data, cfg.baselines);
    std::string label = name;
    std::transform(label.begin(), label.end(), label.begin(), ::toupper);
    methods.push_back({label + "+MF", std::make_shared<FactorPredictor>(
                                          pmf_complete(table, node_count, pmf))});
  }
  for (double p : cfg.baselines.uniform_probs) {
    std::ostringstream label;
    label << "UN (p=" << p << ")";
    methods.push_back({label.str(), std::make_shared<UniformPredictor>(p)});
  }
  return methods;
}

EvaluationSet synthetic_evaluation(const IMModel& truth_model, const CascadeLog& test,
                                   const DiffusionNetwork& generating_net) {
  const auto exposures = extract_exposures(test, generating_net);
  return {synthetic_ground_truth(truth_model, exposures), model_rank_cases(exposures, truth_model)};
}

EvaluationSet observed_evaluation(const CascadeLog& test, Count min_support) {
  const auto net = build_diffusion_network(test);
  const auto exposures = extract_exposures(test, net);
  return {estimate_ground_truth(exposures, min_support), recorded_rank_cases(exposures)};
}

std::vector<MetricsReport> evaluate_methods(const std::vector<FittedMethod>& methods,
                                            const EvaluationSet& eval,
                                            const DiffusionNetwork& train_net) {
  std::vector<MetricsReport> reports(methods.size());
  const auto count = static_cast<std::int64_t>(methods.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto& m = methods[static_cast<std::size_t>(i)];
    reports[static_cast<std::size_t>(i)] =
        evaluate_predictor(m.name, *m.predictor, eval.truth, train_net, eval.cases);
  }
  return reports;
}

void order_by_compositive(std::vector<MetricsReport>& reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
    return a.compositive < b.compositive;
  });
}

RestartCheck restart_check(const IMModel& first, const IMModel& second, const SynthConfig& synth,
                           std::size_t random_pairs, std::uint64_t seed) {
  RestartCheck check;
  const double cells = static_cast<double>(first.influence.size());
  check.influence_difference = matrix_difference(first.influence, second.influence) / cells;
  check.susceptibility_difference =
      matrix_difference(first.susceptibility, second.susceptibility) / cells;

  SynthConfig shape = synth;
  shape.n_nodes = first.node_count();
  shape.k = first.dim();
  if (shape.edges_per_node >= shape.n_nodes) shape.edges_per_node = 1;
  shape.n_sources = 1;
  for (std::size_t r = 0; r < random_pairs; ++r) {
    shape.seed = derive_seed(seed, "restart_random_a", r);
    const auto a = sample_ground_truth(shape);
    shape.seed = derive_seed(seed, "restart_random_b", r);
    const auto b = sample_ground_truth(shape);
    check.random_influence_difference += matrix_difference(a.influence, b.influence) / cells;
    check.random_susceptibility_difference +=
        matrix_difference(a.susceptibility, b.susceptibility) / cells;
  }
  if (random_pairs > 0) {
    check.random_influence_difference /= static_cast<double>(random_pairs);
    check.random_susceptibility_difference /= static_cast<double>(random_pairs);
  }
  return check;
}

void write_table(std::ostream& out, const std::vector<MetricsReport>& reports) {
  out << "| method | MKL | MKL observed | MKL hidden | compositive | R-MRR | pairs |\n";
  out << "|---|---|---|---|---|---|---|\n";
  out << std::setprecision(6);
  for (const auto& r : reports)
    out << "| " << r.method << " | " << r.mkl << " | " << r.mkl_observed << " | " << r.mkl_hidden
        << " | " << r.compositive << " | " << r.r_mrr << " | " << r.pairs << " |\n";
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

}  // namespace

SyntheticReport run_synthetic(const ExperimentConfig& cfg, const SyntheticCorpus& corpus,
                              const std::optional<std::filesystem::path>& out) {
  SyntheticReport report;
  const auto data = prepare_training(corpus.train);
  const std::size_t n = corpus.names.size();
  const auto methods = fit_methods(data, cfg, n, &report.im);

  const auto trained_eval = synthetic_evaluation(corpus.truth, corpus.test_trained, corpus.network);
  const auto shuffled_eval =
      synthetic_evaluation(corpus.truth, corpus.test_shuffled, corpus.shuffled);
  report.trained = evaluate_methods(methods, trained_eval, data.network);
  report.shuffled = evaluate_methods(methods, shuffled_eval, data.network);
  if (!trained_eval.cases.empty()) report.random_rmrr_trained = random_guess_rmrr(trained_eval.cases);
  if (!shuffled_eval.cases.empty())
    report.random_rmrr_shuffled = random_guess_rmrr(shuffled_eval.cases);

  Hyperparams restart = seeded(cfg.train, cfg.seed);
  restart.init_seed = derive_seed(cfg.seed, "im_init", 1);
  report.im_restart = train(data.exposures, restart, n);
  report.restart = restart_check(report.im.model, report.im_restart.model, cfg.synth,
                                 cfg.restart_random_pairs, cfg.seed);

  order_by_compositive(report.trained);
  order_by_compositive(report.shuffled);

  if (out) {
    std::filesystem::create_directories(*out);
    { auto f = open_out(*out / "config.json"); f << to_json(cfg).dump(2) << '\n'; }
    { auto f = open_out(*out / "network.json"); write_network_json(f, corpus.network, corpus.names); }
    { auto f = open_out(*out / "shuffled_network.json"); write_network_json(f, corpus.shuffled, corpus.names); }
    { auto f = open_out(*out / "truth_model.json"); write_model_json(f, corpus.truth, corpus.names); }
    { auto f = open_out(*out / "cascades.jsonl"); write_cascades(f, corpus.train, corpus.names); }
    { auto f = open_out(*out / "test_cascades.jsonl"); write_cascades(f, corpus.test_trained, corpus.names); }
    { auto f = open_out(*out / "shuffled_cascades.jsonl"); write_cascades(f, corpus.test_shuffled, corpus.names); }
    { auto f = open_out(*out / "im_model.json"); write_model_json(f, report.im.model, corpus.names); }
    { auto f = open_out(*out / "im_trace.csv"); write_trace_csv(f, report.im.trace); }
    { auto f = open_out(*out / "im_restart_model.json"); write_model_json(f, report.im_restart.model, corpus.names); }
    { auto f = open_out(*out / "im_restart_trace.csv"); write_trace_csv(f, report.im_restart.trace); }
    { auto f = open_out(*out / "metrics_trained.json"); write_metrics_json(f, report.trained); }
    { auto f = open_out(*out / "metrics_shuffled.json"); write_metrics_json(f, report.shuffled); }
    {
      auto f = open_out(*out / "histogram.csv");
      write_histogram_csv(f, influence_susceptibility_histogram(report.im.model, 10));
    }
    {
      auto f = open_out(*out / "restart.json");
      json doc = {{"influence_difference", report.restart.influence_difference},
                  {"susceptibility_difference", report.restart.susceptibility_difference},
                  {"random_influence_difference", report.restart.random_influence_difference},
                  {"random_susceptibility_difference",
                   report.restart.random_susceptibility_difference}};
      f << doc.dump(2) << '\n';
    }
    {
      auto f = open_out(*out / "table.md");
      f << "## Trained network\n\n";
      write_table(f, report.trained);
      f << "\nRandom-guess R-MRR: " << report.random_rmrr_trained << "\n\n## Shuffled network\n\n";
      write_table(f, report.shuffled);
      f << "\nRandom-guess R-MRR: " << report.random_rmrr_shuffled << "\n";
    }
  }
  return report;
}

std::vector<RoundReport> run_rounds(const ExperimentConfig& cfg, const CascadeLog& log,
                                    NodeNames& names,
                                    const std::optional<std::filesystem::path>& out) {
  if (cfg.windows.size() < 3) throw ConfigError("round-robin needs at least two time windows");
  const auto split = split_by_time(log, cfg.windows);
  std::vector<RoundReport> rounds;
  for (std::size_t i = 0; i < split.windows.size(); ++i) {
    const auto data = prepare_training(split.windows[i]);
    if (data.exposures.empty()) throw DataError("window " + std::to_string(i) + " has nothing to train on");
    TrainResult im;
    const auto methods = fit_methods(data, cfg, names.size(), &im);
    for (std::size_t j = 0; j < split.windows.size(); ++j) {
      if (j == i) continue;
      const auto eval = observed_evaluation(split.windows[j], cfg.min_support);
      RoundReport round{i, j, evaluate_methods(methods, eval, data.network)};
      order_by_compositive(round.reports);
      rounds.push_back(std::move(round));
    }
    if (out) {
      std::filesystem::create_directories(*out);
      const auto stem = "round" + std::to_string(i + 1);
      { auto f = open_out(*out / (stem + "_im_model.json")); write_model_json(f, im.model, names); }
      { auto f = open_out(*out / (stem + "_im_trace.csv")); write_trace_csv(f, im.trace); }
      {
        auto f = open_out(*out / (stem + "_histogram.csv"));
        write_histogram_csv(f, influence_susceptibility_histogram(im.model, 10));
      }
    }
  }
  if (out) {
    auto f = open_out(*out / "rounds.md");
    for (const auto& r : rounds) {
      f << "## Train window " << r.train_window + 1 << ", test window " << r.test_window + 1 << "\n\n";
      write_table(f, r.reports);
      f << '\n';
      auto m = open_out(*out / ("metrics_train" + std::to_string(r.train_window + 1) + "_test" +
                                std::to_string(r.test_window + 1) + ".json"));
      write_metrics_json(m, r.reports);
    }
  }
  return rounds;
}

}  // namespace infsus
