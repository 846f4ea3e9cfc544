// Command-line driver: ingest -> build-graph -> train -> eval / similar ->
// metric-train -> novelty-eval. Exit codes: 0 ok, 1 config/I-O, 2 numerical.

#include <iostream>

#include <CLI11.hpp>

#include "mview/pipeline.hpp"

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> k;
  bool print_config = false;
};

mview::PipelineConfig resolve(const Options& o) {
  auto config = o.config_path.empty() ? mview::default_config(mview::DatasetMode::taobao)
                                      : mview::load_config(o.config_path);
  for (const auto& kv : o.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw mview::ConfigError("--set expects key=value, got " + kv);
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) config.set("seed", std::to_string(*o.seed));
  if (o.threads) config.set("threads", std::to_string(*o.threads));
  if (o.k) config.set("K", std::to_string(*o.k));
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view graph representation learning for item recommendation"};
  app.require_subcommand(1);
  Options opts;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", opts.config_path, "key = value configuration file");
    cmd->add_option("--set", opts.overrides, "override a config key (key=value)");
    cmd->add_option("--seed", opts.seed, "random seed");
    cmd->add_option("--threads", opts.threads, "worker threads");
    cmd->add_flag("--print-config", opts.print_config, "print the resolved configuration");
    return cmd;
  };

  std::string chosen;
  auto sub = [&](const char* name, const char* help) {
    auto* cmd = add_common(app.add_subcommand(name, help));
    cmd->callback([&chosen, name] { chosen = name; });
    return cmd;
  };
  sub("ingest", "parse, clean and sessionize a behavior log");
  sub("build-graph", "build per-view graphs and cross-view links; dump them");
  sub("train", "train embeddings, alignments and task uncertainties");
  sub("eval", "offline HitRate/Recall/Precision/F1 on the held-out split");
  sub("similar", "write the item-to-item similarity map")
      ->add_option("-k,--k", opts.k, "candidates per item");
  sub("metric-train", "train the two-space metric model for diversity");
  sub("novelty-eval", "novelty of instance ranking vs metric reranking");

  CLI11_PARSE(app, argc, argv);

  try {
    auto config = resolve(opts);
    if (opts.print_config) mview::write_config(std::cout, config);
    if (chosen == "ingest") mview::cmd_ingest(config, std::cout);
    else if (chosen == "build-graph") mview::cmd_build_graph(config, std::cout);
    else if (chosen == "train") mview::cmd_train(config, std::cout);
    else if (chosen == "eval") mview::cmd_eval(config, std::cout);
    else if (chosen == "similar") mview::cmd_similar(config, std::cout);
    else if (chosen == "metric-train") mview::cmd_metric_train(config, std::cout);
    else if (chosen == "novelty-eval") mview::cmd_novelty_eval(config, std::cout);
  } catch (const mview::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
