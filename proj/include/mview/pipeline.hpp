#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mview/diversity.hpp"
#include "mview/eval.hpp"
#include "mview/ingest.hpp"
#include "mview/trainer.hpp"

namespace mview {

/// Flat `key = value` settings. Every default matches the published
/// training setup where one exists.
struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path boundaries;  // optional app open/close times
  std::filesystem::path work_dir = "work";
  std::filesystem::path checkpoint_dir;  // default: work_dir/checkpoint
  EventSchema schema;
  SessionRules rules;
  MissingLinkPolicy missing_links = MissingLinkPolicy::skip_item;
  std::vector<View> views{View::item, View::category, View::shop};
  std::vector<std::pair<View, View>> relations{{View::item, View::category},
                                               {View::item, View::shop}};
  std::optional<std::int64_t> split_cutoff;
  std::optional<double> split_quantile;
  TrainConfig train;
  EvalConfig eval;
  double metric_margin = 1.0;
  MetricTrainConfig metric;
  std::size_t metric_window = 3;
  std::size_t metric_negatives = 1;
  std::size_t metric_max_positives = 20000;
  std::size_t metric_candidates = 200;
  std::int64_t history_days = 15;

  std::filesystem::path checkpoint() const;
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

PipelineConfig default_config(DatasetMode mode);
/// Applies `key = value` lines (# comments) on top of `base`.
PipelineConfig parse_config(std::istream& in, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path);
/// Canonical dump of every key, loadable by parse_config.
void write_config(std::ostream& out, const PipelineConfig& config);

struct IngestSummary {
  std::size_t users = 0;
  std::size_t events_in = 0;
  std::size_t events_kept = 0;
  std::size_t skipped_rows = 0;
  std::size_t missing_links = 0;
  std::size_t test_users = 0;
  std::map<View, std::size_t> sessions;
};

IngestSummary cmd_ingest(const PipelineConfig& config, std::ostream& log);
void cmd_build_graph(const PipelineConfig& config, std::ostream& log);
/// Returns the trained model; on divergence the last good parameters are
/// written before NumericalError propagates.
TrainedModel cmd_train(const PipelineConfig& config, std::ostream& log);
EvalResult cmd_eval(const PipelineConfig& config, std::ostream& log);
void cmd_similar(const PipelineConfig& config, std::ostream& log);
MetricModel<double> cmd_metric_train(const PipelineConfig& config, std::ostream& log);

struct NoveltyReport {
  double base = 0;
  double metric = 0;
  std::size_t users = 0;
};
NoveltyReport cmd_novelty_eval(const PipelineConfig& config, std::ostream& log);

/// Loads everything `train` needs from an ingest work directory.
TrainingData load_training_data(const PipelineConfig& config);

}  // namespace mview
