#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mview/checkpoint.hpp"
#include "mview/pipeline.hpp"

using namespace mview;
namespace fs = std::filesystem;

namespace {

const fs::path fixtures = MVIEW_FIXTURES;

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("mview_test_" + name);
  fs::remove_all(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MVIEW_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string small_args(const fs::path& work, const std::string& extra = "") {
  return "-c " + (fixtures / "small.conf").string() + " --set input=" +
         (fixtures / "small_log.tsv").string() + " --set work_dir=" + work.string() + " " + extra;
}

void run_all(const fs::path& work, const std::string& extra = "") {
  for (const char* cmd : {"ingest", "build-graph", "train", "eval", "similar", "metric-train",
                          "novelty-eval"})
    REQUIRE_MESSAGE(run_cli(std::string(cmd) + " " + small_args(work, extra)) == 0, cmd);
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("cli: missing input exits 1 and writes nothing") {
  auto work = fresh_dir("missing");
  CHECK(run_cli("ingest --set input=/nonexistent/log.tsv --set work_dir=" + work.string()) == 1);
  CHECK_FALSE(fs::exists(work));
}

TEST_CASE("cli: unknown config key exits 1") {
  CHECK(run_cli("ingest --set no_such_key=3") == 1);
}

TEST_CASE("cli: full pipeline writes every artefact; 3-view checkpoint is complete") {
  auto work = fresh_dir("full");
  run_all(work);
  for (const char* f : {"sessions.item.tsv", "sessions.category.tsv", "sessions.shop.tsv",
                        "attributes.category.tsv", "attributes.shop.tsv", "test.tsv",
                        "graph.item.tsv", "vocab.shop.tsv", "links.I-C.tsv", "links.I-S.tsv",
                        "metrics.csv", "similar.tsv", "novelty.csv"})
    CHECK_MESSAGE(fs::exists(work / f), f);

  const auto ckpt = work / "checkpoint";
  for (const char* v : {"item", "category", "shop"})
    for (const char* part : {"input", "context"})
      for (const char* ext : {"txt", "bin"}) {
        const auto name = std::string("embedding.") + v + "." + part + "." + ext;
        CHECK_MESSAGE(fs::exists(ckpt / name), name);
      }
  CHECK(fs::exists(ckpt / "history.csv"));
  CHECK(fs::exists(ckpt / "metric.txt"));
  const auto meta = slurp(ckpt / "meta.tsv");
  CHECK(meta.find("transform.I-C") != std::string::npos);
  CHECK(meta.find("transform.I-S") != std::string::npos);
  for (const char* t : {"log_var.I\t", "log_var.C\t", "log_var.S\t", "log_var.I-C\t",
                        "log_var.I-S\t"})
    CHECK_MESSAGE(meta.find(t) != std::string::npos, t);

  PipelineConfig cfg = load_config(fixtures / "small.conf");
  cfg.work_dir = work;
  auto model = load_checkpoint(cfg.checkpoint());
  CHECK(model.views == std::vector<View>{View::item, View::category, View::shop});
  CHECK(model.transforms.size() == 2);
  CHECK(model.uncertainties.size() == 5);
}

TEST_CASE("cli: similar.tsv has at most K descending entries and never the trigger") {
  auto work = fresh_dir("similar");
  REQUIRE(run_cli("ingest " + small_args(work)) == 0);
  REQUIRE(run_cli("train " + small_args(work)) == 0);
  REQUIRE(run_cli("similar -k 5 " + small_args(work)) == 0);
  auto lines = lines_of(work / "similar.tsv");
  REQUIRE_FALSE(lines.empty());
  for (const auto& line : lines) {
    const auto tab = line.find('\t');
    const auto trigger = line.substr(0, tab);
    std::stringstream items(line.substr(tab + 1));
    std::string entry;
    std::size_t n = 0;
    double prev = std::numeric_limits<double>::infinity();
    while (std::getline(items, entry, ',')) {
      const auto colon = entry.rfind(':');
      CHECK(entry.substr(0, colon) != trigger);
      const double score = std::stod(entry.substr(colon + 1));
      CHECK(score <= prev);
      prev = score;
      ++n;
    }
    CHECK(n <= 5);
  }
}

TEST_CASE("cli: same seed reruns are byte-identical") {
  auto a = fresh_dir("rerun_a");
  auto b = fresh_dir("rerun_b");
  run_all(a);
  run_all(b);
  for (const auto& entry : fs::directory_iterator(a / "checkpoint")) {
    const auto name = entry.path().filename();
    CHECK_MESSAGE(slurp(entry.path()) == slurp(b / "checkpoint" / name), name.string());
  }
  for (const char* f : {"metrics.csv", "similar.tsv", "novelty.csv", "sessions.item.tsv"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
}

TEST_CASE("cli: thread count does not change the checkpoint") {
  auto a = fresh_dir("threads_1");
  auto b = fresh_dir("threads_3");
  for (const auto& [dir, t] : {std::pair{a, "1"}, std::pair{b, "3"}}) {
    REQUIRE(run_cli("ingest " + small_args(dir)) == 0);
    REQUIRE(run_cli("train --threads " + std::string(t) + " " + small_args(dir)) == 0);
  }
  CHECK(slurp(a / "checkpoint/embedding.item.input.bin") ==
        slurp(b / "checkpoint/embedding.item.input.bin"));
}

TEST_CASE("cli: divergence exits 2 and keeps a checkpoint") {
  auto work = fresh_dir("diverge");
  REQUIRE(run_cli("ingest " + small_args(work)) == 0);
  CHECK(run_cli("train " + small_args(work, "--set learning_rate=1e300 --set optimizer=sgd")) == 2);
  CHECK(fs::exists(work / "checkpoint" / "meta.tsv"));
}

TEST_CASE("config: canonical dump parses back to the same dump") {
  auto cfg = load_config(fixtures / "small.conf");
  cfg.set("floor_var", "0.1");
  cfg.set("max_len", "30");
  std::stringstream first;
  write_config(first, cfg);
  auto text = first.str();
  std::stringstream in(text);
  auto again = parse_config(in, default_config(DatasetMode::taobao));
  std::stringstream second;
  write_config(second, again);
  CHECK(second.str() == text);
  CHECK(again.train.floor_var == 0.1);
}

TEST_CASE("config: rating mode defaults") {
  auto cfg = default_config(DatasetMode::movielens);
  CHECK(cfg.rules.max_len == 50u);
  CHECK(cfg.rules.min_rating == 3.0);
  CHECK(cfg.views == std::vector<View>{View::item, View::category});
  CHECK(cfg.train.sampler.window == 9);
  CHECK(cfg.train.sampler.negatives_k == 10);
  CHECK(cfg.train.sampler.batch_size == 2048);
  CHECK(cfg.train.sampler.epochs == 10);
  CHECK(cfg.train.floor_var == 0.05);
  CHECK(cfg.eval.k == 50);
}

TEST_CASE("ingest: golden fixtures produce the hand-specified sessions") {
  struct Case {
    const char* log;
    const char* boundaries;
    const char* expected;
    DatasetMode mode;
  };
  for (const auto& c : {Case{"golden_taobao.tsv", "golden_taobao.boundaries.tsv",
                             "golden_taobao.expected.tsv", DatasetMode::taobao},
                        Case{"golden_movielens.tsv", "", "golden_movielens.expected.tsv",
                             DatasetMode::movielens}}) {
    auto work = fresh_dir(std::string("golden_") + c.log);
    auto cfg = default_config(c.mode);
    cfg.input = fixtures / c.log;
    if (*c.boundaries) cfg.boundaries = fixtures / c.boundaries;
    cfg.work_dir = work;
    std::ostringstream log;
    cmd_ingest(cfg, log);
    std::string produced;
    for (View v : cfg.views) produced += slurp(work / ("sessions." + std::string(to_string(v)) + ".tsv"));
    CHECK_MESSAGE(produced == slurp(fixtures / c.expected), c.log);
  }
}
