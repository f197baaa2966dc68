// Command-line front end: generate, train, evaluate, reproduce, baselines.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "infsus/experiment.hpp"

namespace fs = std::filesystem;
using namespace infsus;

namespace {

constexpr const char* kOutputEnv = "INFSUS_OUTPUT_DIR";

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON experiment config");
  cmd->add_option("--seed", flags.seed, "Global seed");
  cmd->add_option("--out", flags.out, "Output directory (overrides config and $INFSUS_OUTPUT_DIR)");
}

ExperimentConfig base_config(const CommonFlags& flags,
                             ExperimentConfig fallback = ExperimentConfig{}) {
  ExperimentConfig cfg =
      flags.config.empty() ? std::move(fallback) : load_config(flags.config, std::move(fallback));
  if (flags.seed) cfg.seed = *flags.seed;
  if (const char* env = std::getenv(kOutputEnv); env && *env) cfg.output_dir = env;
  if (!flags.out.empty()) cfg.output_dir = flags.out;
  return cfg;
}

fs::path output_dir(const ExperimentConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return in;
}

struct PruneFlags {
  bool enabled = false;
  std::optional<Count> min_total;
  std::optional<Count> max_per_message;
};

void add_prune(CLI::App* cmd, PruneFlags& flags) {
  cmd->add_flag("--prune", flags.enabled, "Apply both pair pruning rules before training");
  cmd->add_option("--prune-min-total", flags.min_total, "Minimum corpus-wide count per pair");
  cmd->add_option("--prune-max-per-message", flags.max_per_message,
                  "Maximum count per pair inside one message");
}

void apply_prune_flags(const PruneFlags& flags, ExperimentConfig& cfg) {
  if (flags.min_total) cfg.prune_min_pair_total = *flags.min_total;
  if (flags.max_per_message) cfg.prune_max_pair_per_message = *flags.max_per_message;
}

/// Parses and concatenates logs into one name table; pruning runs before
/// duplicate removal so per-message pair counts see the raw events.
CascadeLog read_logs(const std::vector<std::string>& files, NodeNames& names, bool prune_log,
                     const ExperimentConfig& cfg, Diagnostics* diag) {
  CascadeLog log;
  for (const auto& file : files) {
    auto in = open_in(file);
    auto part = parse_cascades(in, names, diag, ParseOptions{.deduplicate = false});
    for (auto& m : part.messages) log.messages.push_back(std::move(m));
  }
  if (prune_log) log = prune(log, cfg.prune_min_pair_total, cfg.prune_max_pair_per_message);
  return deduplicate(log, diag);
}

void write_diagnostics(const fs::path& path, const Diagnostics& diag) {
  auto out = open_out(path);
  nlohmann::json doc = {{"duplicate_events", diag.duplicate_events},
                        {"skipped_events", diag.skipped_events},
                        {"overflow_messages", diag.overflow_messages}};
  out << doc.dump(2) << '\n';
}

// --------------------------------------------------------------------------- generate

struct GenerateFlags {
  CommonFlags common;
  std::optional<std::size_t> nodes, edges_per_node, k, cascades, test_cascades, sources;
  std::optional<double> lambda;
  std::string profile;
};

int cmd_generate(const GenerateFlags& f) {
  ExperimentConfig fallback = f.profile == "synthetic-small" ? ExperimentConfig::synthetic_small()
                                                              : ExperimentConfig::synthetic_paper();
  ExperimentConfig cfg = base_config(f.common, fallback);
  if (f.nodes) cfg.synth.n_nodes = *f.nodes;
  if (f.edges_per_node) cfg.synth.edges_per_node = *f.edges_per_node;
  if (f.k) cfg.synth.k = *f.k;
  if (f.lambda) cfg.synth.lambda = *f.lambda;
  if (f.cascades) cfg.synth.n_cascades = *f.cascades;
  if (f.sources) cfg.synth.n_sources = *f.sources;
  cfg.test_cascades = f.test_cascades.value_or(cfg.synth.n_cascades);
  cfg.source = DataSource::synthetic;
  cfg.validate();
  const auto dir = output_dir(cfg);
  const auto corpus = generate_corpus(cfg);

  { auto o = open_out(dir / "config.json"); o << to_json(cfg).dump(2) << '\n'; }
  { auto o = open_out(dir / "network.json"); write_network_json(o, corpus.network, corpus.names); }
  { auto o = open_out(dir / "truth_model.json"); write_model_json(o, corpus.truth, corpus.names); }
  { auto o = open_out(dir / "shuffled_network.json"); write_network_json(o, corpus.shuffled, corpus.names); }
  if (cfg.synth.n_cascades > 0) {
    auto o = open_out(dir / "cascades.jsonl");
    write_cascades(o, corpus.train, corpus.names);
  }
  if (cfg.test_cascades > 0) {
    { auto o = open_out(dir / "test_cascades.jsonl"); write_cascades(o, corpus.test_trained, corpus.names); }
    { auto o = open_out(dir / "shuffled_cascades.jsonl"); write_cascades(o, corpus.test_shuffled, corpus.names); }
  }
  std::cout << "network: " << corpus.network.nodes().size() << " nodes, "
            << corpus.network.edges().size() << " edges; " << corpus.accepted_swaps
            << " accepted swaps; " << corpus.train.messages.size() << " training cascades -> "
            << dir.string() << '\n';
  return 0;
}

// --------------------------------------------------------------------------- train

struct TrainFlags {
  CommonFlags common;
  PruneFlags prune;
  std::vector<std::string> cascades;
  std::optional<double> alpha, beta, lambda, mu, sigma2;
  std::optional<std::size_t> k, max_epochs, nodes;
  std::string step_rule;
  bool serial = false;
  bool grid = false;
  std::vector<std::string> validation;
};

void apply_train_flags(const TrainFlags& f, Hyperparams& hp) {
  if (f.alpha) hp.alpha = *f.alpha;
  if (f.beta) hp.beta = *f.beta;
  if (f.lambda) hp.lambda = *f.lambda;
  if (f.k) hp.k = *f.k;
  if (f.max_epochs) hp.max_epochs = *f.max_epochs;
  if (f.mu) {
    hp.mu_influence = hp.mu_susceptibility = *f.mu;
    hp.calibrate_prior = false;
  }
  if (f.sigma2) hp.sigma2_influence = hp.sigma2_susceptibility = *f.sigma2;
  if (f.step_rule == "fixed") hp.step_rule = StepRule::fixed;
  else if (f.step_rule == "armijo") hp.step_rule = StepRule::armijo;
  if (f.serial) hp.parallel = false;
}

std::string cell_stem(double alpha, double lambda, std::size_t k) {
  std::ostringstream s;
  s << "model_a" << alpha << "_l" << lambda << "_k" << k;
  return s.str();
}

int cmd_train(const TrainFlags& f) {
  ExperimentConfig cfg = base_config(f.common);
  apply_prune_flags(f.prune, cfg);
  apply_train_flags(f, cfg.train);
  if (f.cascades.empty()) throw ConfigError("train needs --cascades");
  cfg.cascade_files = f.cascades;
  cfg.source = DataSource::cascades;
  cfg.validate();
  const auto dir = output_dir(cfg);

  NodeNames names;
  Diagnostics diag;
  auto data = prepare_training(read_logs(f.cascades, names, f.prune.enabled, cfg, &diag));
  diag += data.diagnostics;
  write_diagnostics(dir / "diagnostics.json", diag);
  if (data.exposures.empty()) throw DataError("nothing to train: the exposure table is empty");
  const std::size_t node_count = std::max(names.size(), f.nodes.value_or(0));

  if (!f.grid) {
    const auto result = train(data.exposures, seeded(cfg.train, cfg.seed), node_count);
    { auto o = open_out(dir / "model.json"); write_model_json(o, result.model, names); }
    { auto o = open_out(dir / "trace.csv"); write_trace_csv(o, result.trace); }
    std::cout << "trained " << result.model.node_count() << " nodes, final loss "
              << result.trace.back().loss << " -> " << dir.string() << '\n';
    return 0;
  }

  std::optional<EvaluationSet> validation;
  if (!f.validation.empty()) {
    Diagnostics vdiag;
    validation = observed_evaluation(read_logs(f.validation, names, false, cfg, &vdiag), cfg.min_support);
  }
  struct Cell {
    double alpha, lambda;
    std::size_t k;
    TrainResult result;
    std::optional<MetricsReport> metrics;
  };
  std::vector<Cell> cells;
  for (double a : cfg.grid.alphas)
    for (double l : cfg.grid.lambdas)
      for (std::size_t k : cfg.grid.ks) cells.push_back({a, l, k, {}, std::nullopt});

  const std::size_t model_nodes = std::max(node_count, names.size());
  std::vector<std::exception_ptr> errors(cells.size());
  const auto count = static_cast<std::int64_t>(cells.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    auto& cell = cells[static_cast<std::size_t>(i)];
    try {
      Hyperparams hp = seeded(cfg.train, cfg.seed);
      hp.alpha = cell.alpha;
      hp.lambda = cell.lambda;
      hp.k = cell.k;
      cell.result = train(data.exposures, hp, model_nodes);
      if (validation)
        cell.metrics = evaluate_predictor("IM", ImPredictor(cell.result.model), validation->truth,
                                          data.network, validation->cases);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  auto summary = open_out(dir / "grid_summary.csv");
  summary << "alpha,lambda,k,final_loss,mkl,mkl_observed,mkl_hidden,compositive,r_mrr\n";
  summary.precision(10);
  for (const auto& cell : cells) {
    const auto stem = cell_stem(cell.alpha, cell.lambda, cell.k);
    { auto o = open_out(dir / (stem + ".json")); write_model_json(o, cell.result.model, names); }
    { auto o = open_out(dir / (stem + "_trace.csv")); write_trace_csv(o, cell.result.trace); }
    summary << cell.alpha << ',' << cell.lambda << ',' << cell.k << ','
            << cell.result.trace.back().loss;
    if (cell.metrics)
      summary << ',' << cell.metrics->mkl << ',' << cell.metrics->mkl_observed << ','
              << cell.metrics->mkl_hidden << ',' << cell.metrics->compositive << ','
              << cell.metrics->r_mrr;
    else
      summary << ",,,,,";
    summary << '\n';
  }
  std::cout << "trained " << cells.size() << " grid cells -> " << dir.string() << '\n';
  return 0;
}

// --------------------------------------------------------------------------- baselines

struct BaselineFlags {
  CommonFlags common;
  PruneFlags prune;
  std::vector<std::string> cascades;
  std::string method = "bd";
  std::optional<std::size_t> rank;
  bool complete = false;
};

int cmd_baselines(const BaselineFlags& f) {
  ExperimentConfig cfg = base_config(f.common);
  apply_prune_flags(f.prune, cfg);
  if (f.cascades.empty()) throw ConfigError("baselines needs --cascades");
  const auto dir = output_dir(cfg);
  NodeNames names;
  Diagnostics diag;
  const auto data = prepare_training(read_logs(f.cascades, names, f.prune.enabled, cfg, &diag));
  const auto table = pairwise_estimate(f.method, data, cfg.baselines);
  {
    auto o = open_out(dir / (f.method + "_pairwise.csv"));
    write_pairwise_csv(o, table, names);
  }
  if (f.complete) {
    PmfOptions pmf = cfg.baselines.pmf;
    pmf.rank = f.rank.value_or(pmf.rank == 0 ? cfg.train.k : pmf.rank);
    pmf.seed = derive_seed(cfg.seed, "pmf");
    const auto mf = pmf_complete(table, names.size(), pmf);
    IMModel factors{mf.left(), mf.right(), 1.0};
    auto o = open_out(dir / (f.method + "_mf_factors.json"));
    write_model_json(o, factors, names);
  }
  std::cout << table.entries.size() << " pair estimates -> " << dir.string() << '\n';
  return 0;
}

// --------------------------------------------------------------------------- evaluate

struct EvaluateFlags {
  CommonFlags common;
  PruneFlags prune;
  std::string method = "im";
  std::string model;
  std::optional<double> p;
  std::string pairwise;
  std::vector<std::string> train_cascades;
  std::vector<std::string> test_cascades;
  std::string truth_model;
  std::string test_network;
  bool no_mf = false;
  bool rounds = false;
  std::vector<std::string> cascades;
  std::vector<Timestamp> windows;
  std::size_t bins = 10;
};

void check_domain(const IMModel& model, const NodeNames& names, std::string_view what) {
  if (model.node_count() >= names.size()) return;
  std::ostringstream msg;
  msg << what << " has no factors for " << names.size() - model.node_count() << " node(s):";
  std::size_t listed = 0;
  for (std::size_t id = model.node_count(); id < names.size() && listed < 20; ++id, ++listed)
    msg << ' ' << names.name(static_cast<NodeId>(id));
  if (names.size() - model.node_count() > listed) msg << " ...";
  throw DataError(msg.str());
}

// Nodes the model never saw get the mean trained row, standing in for the
// prior that in-process training gives them. Throws when no test node is
// covered.
IMModel cover_test_nodes(IMModel model, const NodeNames& names, const CascadeLog& test) {
  const std::size_t known = model.node_count();
  if (known >= names.size()) return model;
  bool overlap = false;
  for (const auto& msg : test.messages)
    for (const auto& ev : msg.events) overlap = overlap || ev.child < known;
  if (!overlap) check_domain(model, names, "model");
  std::cerr << "warning: model has no factors for " << names.size() - known
            << " node(s); using the mean row\n";
  const auto rows = static_cast<Eigen::Index>(names.size());
  const auto added = rows - static_cast<Eigen::Index>(known);
  for (Matrix* m : {&model.influence, &model.susceptibility}) {
    const Eigen::RowVectorXd mean = m->colwise().mean();
    m->conservativeResize(rows, Eigen::NoChange);
    m->bottomRows(added) = mean.replicate(added, 1);
  }
  return model;
}

int cmd_evaluate_rounds(const EvaluateFlags& f, ExperimentConfig cfg) {
  if (!f.cascades.empty()) cfg.cascade_files = f.cascades;
  if (!f.windows.empty()) cfg.windows = f.windows;
  cfg.source = DataSource::cascades;
  cfg.validate();
  const auto dir = output_dir(cfg);
  NodeNames names;
  Diagnostics diag;
  const auto log = read_logs(cfg.cascade_files, names, f.prune.enabled, cfg, &diag);
  const auto rounds = run_rounds(cfg, log, names, dir);
  const auto split = split_by_time(log, cfg.windows);
  diag.overflow_messages += split.overflow.messages.size();
  write_diagnostics(dir / "diagnostics.json", diag);
  for (const auto& r : rounds) {
    std::cout << "train window " << r.train_window + 1 << ", test window " << r.test_window + 1
              << '\n';
    write_table(std::cout, r.reports);
  }
  return 0;
}

int cmd_evaluate(const EvaluateFlags& f) {
  ExperimentConfig cfg = base_config(f.common);
  apply_prune_flags(f.prune, cfg);
  if (f.rounds) return cmd_evaluate_rounds(f, cfg);
  if (f.test_cascades.empty()) throw ConfigError("evaluate needs --test");
  const auto dir = output_dir(cfg);

  NodeNames names;
  std::optional<IMModel> im;
  if (f.method == "im") {
    if (f.model.empty()) throw ConfigError("--method im needs --model");
    auto in = open_in(f.model);
    im = read_model_json(in, names);
  }
  std::optional<IMModel> truth_model;
  if (!f.truth_model.empty()) {
    auto in = open_in(f.truth_model);
    truth_model = read_model_json(in, names);
  }

  Diagnostics diag;
  std::optional<TrainingData> training;
  if (!f.train_cascades.empty())
    training = prepare_training(read_logs(f.train_cascades, names, f.prune.enabled, cfg, &diag));
  const auto test = read_logs(f.test_cascades, names, false, cfg, &diag);

  DiffusionNetwork test_net;
  if (!f.test_network.empty()) {
    auto in = open_in(f.test_network);
    test_net = read_network_json(in, names);
  } else {
    test_net = build_diffusion_network(test);
  }

  EvaluationSet eval;
  if (truth_model) {
    check_domain(*truth_model, names, "truth model");
    eval = synthetic_evaluation(*truth_model, test, test_net);
  } else {
    eval = observed_evaluation(test, cfg.min_support);
  }
  if (eval.truth.empty()) throw DataError("test data yields no evaluation pairs");

  std::shared_ptr<const Predictor> predictor;
  std::string label = f.method;
  if (f.method == "im") {
    predictor = std::make_shared<ImPredictor>(cover_test_nodes(*im, names, test));
    label = "IM";
  } else if (f.method == "un") {
    if (!f.p) throw ConfigError("--method un needs --p");
    predictor = std::make_shared<UniformPredictor>(*f.p);
    std::ostringstream s;
    s << "UN (p=" << *f.p << ")";
    label = s.str();
  } else if (f.method == "bd" || f.method == "ji" || f.method == "em") {
    PairwiseTable table;
    if (!f.pairwise.empty()) {
      auto in = open_in(f.pairwise);
      table = read_pairwise_csv(in, names);
    } else if (training) {
      table = pairwise_estimate(f.method, *training, cfg.baselines);
    } else {
      throw ConfigError("--method " + f.method + " needs --pairwise or --train");
    }
    label = f.method;
    for (auto& c : label) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (f.no_mf) {
      predictor = std::make_shared<TablePredictor>(std::move(table));
    } else {
      PmfOptions pmf = cfg.baselines.pmf;
      if (pmf.rank == 0) pmf.rank = cfg.train.k;
      pmf.seed = derive_seed(cfg.seed, "pmf");
      predictor = std::make_shared<FactorPredictor>(pmf_complete(table, names.size(), pmf));
      label += "+MF";
    }
  } else {
    throw ConfigError("unknown method " + f.method + " (im, un, bd, ji, em)");
  }

  const DiffusionNetwork train_net = training ? training->network : DiffusionNetwork{};
  const auto report = evaluate_predictor(label, *predictor, eval.truth, train_net, eval.cases);
  { auto o = open_out(dir / "metrics.json"); write_metrics_json(o, {report}); }
  {
    auto o = open_out(dir / "kl_pairs.csv");
    write_kl_dump_csv(o, eval.truth, *predictor, train_net, names);
  }
  if (im) {
    auto o = open_out(dir / "histogram.csv");
    write_histogram_csv(o, influence_susceptibility_histogram(*im, f.bins));
  }
  write_table(std::cout, {report});
  return 0;
}

// --------------------------------------------------------------------------- reproduce

struct ReproduceFlags {
  CommonFlags common;
  std::string profile = "synthetic-small";
  std::optional<std::size_t> max_epochs;
};

int cmd_reproduce(const ReproduceFlags& f) {
  ExperimentConfig fallback;
  if (f.profile == "synthetic-small") fallback = ExperimentConfig::synthetic_small();
  else if (f.profile == "synthetic-paper") fallback = ExperimentConfig::synthetic_paper();
  else throw ConfigError("unknown profile " + f.profile);
  ExperimentConfig cfg = base_config(f.common, fallback);
  if (f.max_epochs) cfg.train.max_epochs = *f.max_epochs;
  cfg.source = DataSource::synthetic;
  cfg.validate();
  const auto dir = output_dir(cfg);
  const auto corpus = generate_corpus(cfg);
  const auto report = run_synthetic(cfg, corpus, dir);
  std::cout << "Trained network\n";
  write_table(std::cout, report.trained);
  std::cout << "random-guess R-MRR " << report.random_rmrr_trained << "\n\nShuffled network\n";
  write_table(std::cout, report.shuffled);
  std::cout << "random-guess R-MRR " << report.random_rmrr_shuffled << "\n\nRestart check: I "
            << report.restart.influence_difference << " vs random "
            << report.restart.random_influence_difference << ", S "
            << report.restart.susceptibility_difference << " vs random "
            << report.restart.random_susceptibility_difference << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Influence and susceptibility factor model for information diffusion"};
  app.require_subcommand(1);

  GenerateFlags gen;
  auto* g = app.add_subcommand("generate", "Synthetic network, ground-truth model and cascades");
  add_common(g, gen.common);
  g->add_option("--profile", gen.profile, "Base settings: synthetic-paper (default) or synthetic-small");
  g->add_option("--nodes", gen.nodes, "Number of nodes");
  g->add_option("--edges-per-node", gen.edges_per_node, "Attachment edges per arriving node");
  g->add_option("--k", gen.k, "Latent dimension");
  g->add_option("--lambda", gen.lambda, "Propagation scale");
  g->add_option("--cascades", gen.cascades, "Training cascades (0: network and model only)");
  g->add_option("--test-cascades", gen.test_cascades, "Test cascades per network");
  g->add_option("--sources", gen.sources, "Size of the cascade source pool");

  TrainFlags tr;
  auto* t = app.add_subcommand("train", "Fit the factor model to cascade logs");
  add_common(t, tr.common);
  add_prune(t, tr.prune);
  t->add_option("--cascades", tr.cascades, "Cascade JSONL files")->check(CLI::ExistingFile);
  t->add_option("--alpha", tr.alpha, "Cascade versus choice weight");
  t->add_option("--beta", tr.beta, "Initial step size");
  t->add_option("--lambda", tr.lambda, "Propagation scale");
  t->add_option("--k", tr.k, "Latent dimension");
  t->add_option("--max-epochs", tr.max_epochs, "Epoch budget");
  t->add_option("--mu", tr.mu, "Prior mean for both factor matrices (turns calibration off)");
  t->add_option("--sigma2", tr.sigma2, "Prior variance for both factor matrices (inf disables)");
  t->add_option("--nodes", tr.nodes, "Minimum model size");
  t->add_option("--step-rule", tr.step_rule, "armijo or fixed")
      ->check(CLI::IsMember({"armijo", "fixed"}));
  t->add_flag("--serial", tr.serial, "Use the serial reference kernels");
  t->add_flag("--grid", tr.grid, "Train one model per (alpha, lambda, k) grid cell");
  t->add_option("--validation", tr.validation, "Cascades scored for every grid cell")
      ->check(CLI::ExistingFile);

  EvaluateFlags ev;
  auto* e = app.add_subcommand("evaluate", "Score a model or baseline on test cascades");
  add_common(e, ev.common);
  add_prune(e, ev.prune);
  e->add_option("--method", ev.method, "im, un, bd, ji or em");
  e->add_option("--model", ev.model, "Model JSON for --method im")->check(CLI::ExistingFile);
  e->add_option("--p", ev.p, "Probability for --method un");
  e->add_option("--pairwise", ev.pairwise, "Pairwise CSV for bd, ji, em")->check(CLI::ExistingFile);
  e->add_option("--train", ev.train_cascades, "Training cascades (observed/hidden split, baseline fit)")
      ->check(CLI::ExistingFile);
  e->add_option("--test", ev.test_cascades, "Test cascades")->check(CLI::ExistingFile);
  e->add_option("--truth-model", ev.truth_model, "Exact ground-truth model (synthetic mode)")
      ->check(CLI::ExistingFile);
  e->add_option("--test-network", ev.test_network, "Network that generated the test cascades")
      ->check(CLI::ExistingFile);
  e->add_flag("--no-mf", ev.no_mf, "Score pairwise baselines without matrix completion");
  e->add_option("--bins", ev.bins, "Histogram bins per axis");
  e->add_flag("--rounds", ev.rounds, "Round-robin over time windows");
  e->add_option("--cascades", ev.cascades, "Cascade files for --rounds")->check(CLI::ExistingFile);
  e->add_option("--windows", ev.windows, "Window boundaries for --rounds");

  ReproduceFlags rp;
  auto* r = app.add_subcommand("reproduce", "Full synthetic experiment with every method");
  add_common(r, rp.common);
  r->add_option("--profile", rp.profile, "synthetic-small or synthetic-paper")
      ->check(CLI::IsMember({"synthetic-small", "synthetic-paper"}));
  r->add_option("--max-epochs", rp.max_epochs, "Epoch budget override");

  BaselineFlags bl;
  auto* b = app.add_subcommand("baselines", "Pairwise estimates and matrix completion");
  add_common(b, bl.common);
  add_prune(b, bl.prune);
  b->add_option("--cascades", bl.cascades, "Cascade JSONL files")->check(CLI::ExistingFile);
  b->add_option("--method", bl.method, "bd, ji or em")->check(CLI::IsMember({"bd", "ji", "em"}));
  b->add_flag("--complete", bl.complete, "Also write matrix-completion factors");
  b->add_option("--rank", bl.rank, "Completion rank");

  try {
    app.parse(argc, argv);
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_evaluate(ev);
    if (r->parsed()) return cmd_reproduce(rp);
    if (b->parsed()) return cmd_baselines(bl);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 2;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << '\n';
    return 3;
  } catch (const NumericalError& err) {
    std::cerr << "numerical error: " << err.what() << '\n';
    return 4;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
