#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "infsus_cli_test";

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(INFSUS_CLI) + " " + args +
                          " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh(const std::string& name) {
  const auto dir = kRoot / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const std::string kGenerate =
    "generate --profile synthetic-small --nodes 120 --k 4 --cascades 2000 --test-cascades 2000 "
    "--sources 12 --seed 5";

// One generated corpus shared by the evaluation tests.
const fs::path& corpus() {
  static const fs::path dir = [] {
    const auto d = fresh("corpus");
    REQUIRE(run(kGenerate + " --out " + d.string()) == 0);
    return d;
  }();
  return dir;
}

double metric(const fs::path& dir, const char* key) {
  return json::parse(slurp(dir / "metrics.json"))[0][key].get<double>();
}

}  // namespace

TEST_CASE("generate is byte-identical for the same seed") {
  const auto a = fresh("gen_a");
  const auto b = fresh("gen_b");
  REQUIRE(run(kGenerate + " --out " + a.string()) == 0);
  REQUIRE(run(kGenerate + " --out " + b.string()) == 0);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    const auto name = entry.path().filename();
    if (name == "config.json") {
      auto left = json::parse(slurp(entry.path()));
      auto right = json::parse(slurp(b / name));
      left.erase("output_dir");
      right.erase("output_dir");
      CHECK(left == right);
      continue;
    }
    CHECK_MESSAGE(slurp(entry.path()) == slurp(b / name), name.string());
  }
  CHECK(files >= 6);
  const auto c = fresh("gen_c");
  REQUIRE(run("generate --profile synthetic-small --nodes 120 --k 4 --cascades 2000 "
              "--test-cascades 2000 --sources 12 --seed 6 --out " + c.string()) == 0);
  CHECK(slurp(a / "cascades.jsonl") != slurp(c / "cascades.jsonl"));
}

TEST_CASE("generate with zero cascades writes only the network and model") {
  const auto dir = fresh("gen_zero");
  REQUIRE(run("generate --nodes 50 --k 3 --cascades 0 --sources 5 --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "network.json"));
  CHECK(fs::exists(dir / "truth_model.json"));
  CHECK_FALSE(fs::exists(dir / "cascades.jsonl"));
  CHECK_FALSE(fs::exists(dir / "test_cascades.jsonl"));
}

TEST_CASE("output directory precedence") {
  const auto env_dir = fresh("env_out");
  const auto flag_dir = fresh("flag_out");
  const std::string args = "generate --nodes 30 --k 2 --cascades 0 --sources 3";
  REQUIRE(run(args, "INFSUS_OUTPUT_DIR=" + env_dir.string()) == 0);
  CHECK(fs::exists(env_dir / "network.json"));
  REQUIRE(run(args + " --out " + flag_dir.string(), "INFSUS_OUTPUT_DIR=" + env_dir.string() + "_x") == 0);
  CHECK(fs::exists(flag_dir / "network.json"));
  CHECK_FALSE(fs::exists(env_dir.string() + "_x"));
}

TEST_CASE("train writes a model, trace and diagnostics") {
  const auto dir = fresh("train");
  REQUIRE(run("train --cascades " + (corpus() / "cascades.jsonl").string() +
              " --k 4 --max-epochs 30 --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "model.json"));
  CHECK(fs::exists(dir / "diagnostics.json"));
  const auto trace = slurp(dir / "trace.csv");
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 32);  // header + epochs 0..30
  const auto model = json::parse(slurp(dir / "model.json"));
  CHECK(model["k"] == 4);
  CHECK(model["I"].size() == model["nodes"].size());

  const auto serial = fresh("train_serial");
  REQUIRE(run("train --cascades " + (corpus() / "cascades.jsonl").string() +
              " --k 4 --max-epochs 30 --serial --out " + serial.string()) == 0);
  // Serial and parallel kernels sum in different orders.
  const auto reference = json::parse(slurp(serial / "model.json"));
  CHECK(reference["nodes"] == model["nodes"]);
  double gap = 0.0;
  for (const char* key : {"I", "S"})
    for (std::size_t r = 0; r < model[key].size(); ++r)
      for (std::size_t c = 0; c < model[key][r].size(); ++c)
        gap = std::max(gap, std::abs(model[key][r][c].get<double>() -
                                     reference[key][r][c].get<double>()));
  CHECK(gap < 1e-9);
  const auto again = fresh("train_again");
  REQUIRE(run("train --cascades " + (corpus() / "cascades.jsonl").string() +
              " --k 4 --max-epochs 30 --out " + again.string()) == 0);
  CHECK(slurp(again / "model.json") == slurp(dir / "model.json"));
}

TEST_CASE("train --grid fits one model per cell") {
  const auto dir = fresh("grid");
  write(dir / "grid.json", R"({"grid":{"alpha":[0.5,1.0],"lambda":[0.01],"k":[2,3]}})");
  REQUIRE(run("train --grid --config " + (dir / "grid.json").string() + " --cascades " +
              (corpus() / "cascades.jsonl").string() + " --max-epochs 5 --out " + dir.string()) == 0);
  const auto summary = slurp(dir / "grid_summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 5);
  std::size_t models = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("model_a") && name.ends_with(".json")) ++models;
  }
  CHECK(models == 4);
}

TEST_CASE("evaluate scores IM below every uniform baseline") {
  const auto& c = corpus();
  const auto model_dir = fresh("eval_model");
  REQUIRE(run("train --cascades " + (c / "cascades.jsonl").string() + " --k 4 --out " +
              model_dir.string()) == 0);
  const std::string common = " --train " + (c / "cascades.jsonl").string() + " --test " +
                             (c / "test_cascades.jsonl").string() + " --truth-model " +
                             (c / "truth_model.json").string() + " --test-network " +
                             (c / "network.json").string();
  const auto im = fresh("eval_im");
  REQUIRE(run("evaluate --method im --model " + (model_dir / "model.json").string() + common +
              " --out " + im.string()) == 0);
  const double im_mkl = metric(im, "mkl");
  for (const char* p : {"0.1", "0.01", "0.001"}) {
    const auto un = fresh(std::string("eval_un_") + p);
    REQUIRE(run(std::string("evaluate --method un --p ") + p + common + " --out " + un.string()) == 0);
    CHECK(im_mkl < metric(un, "mkl"));
  }

  std::ifstream kl(im / "kl_pairs.csv");
  std::string line;
  std::getline(kl, line);
  std::size_t rows = 0;
  while (std::getline(kl, line)) {
    std::stringstream row(line);
    std::string field;
    for (int i = 0; i < 5; ++i) std::getline(row, field, ',');
    CHECK(std::isfinite(std::stod(field)));
    ++rows;
  }
  CHECK(rows > 0);
  CHECK(fs::exists(im / "histogram.csv"));

  const auto bd = fresh("eval_bd");
  REQUIRE(run("evaluate --method bd" + common + " --out " + bd.string()) == 0);
  CHECK(json::parse(slurp(bd / "metrics.json"))[0]["method"] == "BD+MF");
}

TEST_CASE("baselines writes pairwise tables and factors") {
  const auto dir = fresh("baselines");
  REQUIRE(run("baselines --cascades " + (corpus() / "cascades.jsonl").string() +
              " --method em --complete --rank 3 --out " + dir.string()) == 0);
  CHECK(fs::exists(dir / "em_pairwise.csv"));
  CHECK(fs::exists(dir / "em_mf_factors.json"));
}

TEST_CASE("reproduce writes a table with one row per method") {
  const auto dir = fresh("reproduce");
  write(dir / "tiny.json",
        R"({"synth":{"n_nodes":60,"k":3,"n_sources":6,"n_cascades":500,"test_cascades":500},)"
        R"("train":{"k":3,"max_epochs":20},"baselines":{"mf_iters":30}})");
  REQUIRE(run("reproduce --profile synthetic-small --config " + (dir / "tiny.json").string() +
              " --out " + dir.string()) == 0);
  const auto table = slurp(dir / "table.md");
  for (const char* m : {"| IM |", "| EM+MF |", "| BD+MF |", "| JI+MF |", "| UN (p=0.1) |",
                        "| UN (p=0.01) |", "| UN (p=0.001) |"}) {
    const auto first = table.find(m);
    CHECK_MESSAGE(first != std::string::npos, m);
    // One row on each of the two networks.
    CHECK(table.find(m, first + 1) != std::string::npos);
    CHECK(table.find(m, table.find(m, first + 1) + 1) == std::string::npos);
  }
}

TEST_CASE("exit codes") {
  const auto dir = fresh("exit");
  CHECK(run("") != 0);
  CHECK(run("train --no-such-flag") == 2);
  CHECK(run("reproduce --profile nope --out " + dir.string()) == 2);

  write(dir / "bad.json", R"({"train":{"alpha":2}})");
  CHECK(run("train --config " + (dir / "bad.json").string() + " --cascades " +
            (corpus() / "cascades.jsonl").string() + " --out " + dir.string()) == 2);
  write(dir / "broken.json", "{");
  CHECK(run("generate --cascades 0 --config " + (dir / "broken.json").string()) == 2);

  write(dir / "bad.jsonl", "{\"mid\":\"m\",\"events\":[{\"child\":\"a\",\"t\":-4}]}\n");
  CHECK(run("train --cascades " + (dir / "bad.jsonl").string() + " --out " + dir.string()) == 3);

  write(dir / "other.jsonl",
        R"({"mid":"x","events":[{"parent":null,"child":"zz","t":0},{"parent":"zz","child":"yy","t":1}]})"
        "\n");
  const auto model_dir = fresh("exit_model");
  REQUIRE(run("train --cascades " + (corpus() / "cascades.jsonl").string() +
              " --k 2 --max-epochs 2 --out " + model_dir.string()) == 0);
  CHECK(run("evaluate --method im --model " + (model_dir / "model.json").string() + " --test " +
            (dir / "other.jsonl").string() + " --out " + dir.string()) == 3);

  CHECK(run("train --cascades " + (corpus() / "cascades.jsonl").string() +
            " --k 2 --max-epochs 3 --step-rule fixed --beta 1e300 --out " + dir.string()) == 4);
}
