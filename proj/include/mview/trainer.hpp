#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "mview/embedding.hpp"
#include "mview/graph.hpp"
#include "mview/ingest.hpp"
#include "mview/losses.hpp"
#include "mview/optimizer.hpp"
#include "mview/sampler.hpp"
#include "mview/uncertainty.hpp"

namespace mview {

/// One intra-view task (skip-gram over a view) or one inter-view alignment task.
struct TaskSpec {
  bool inter = false;
  View from = View::item;
  View to = View::item;

  /// "I", "C", "S" for intra tasks; "I-C", "I-S" for alignment tasks.
  std::string name() const;
};

enum class WeightingMode { adaptive, static_uniform };
enum class SequenceSource { sessions, random_walks };

struct TrainConfig {
  SamplerConfig sampler;
  OptimizerConfig optimizer;
  Index dim = 64;
  Index relation_dim = 0;  // 0: same as dim
  WeightingMode weighting = WeightingMode::adaptive;
  double floor_var = 0.05;
  InterLossKind inter_loss = InterLossKind::raw_score;
  std::size_t record_every = 10;
  std::size_t max_steps = 0;  // 0: run sampler.epochs passes over the first view
  std::size_t threads = 1;
  SequenceSource source = SequenceSource::sessions;
  std::size_t walk_length = 5;
  std::size_t walks_per_node = 10;
  bool undirected_graphs = false;

  void validate() const;
};

struct TrainingData {
  std::vector<View> views;  // views.front() is the instance view
  std::vector<std::pair<View, View>> relations;
  std::map<View, std::vector<Session>> sessions;
  std::map<View, std::unordered_map<NodeId, NodeId>> attributes;  // item -> attribute
};

struct HistoryRow {
  long step = 0;
  std::string task;
  double loss = 0;
  double sigma2 = 0;
  double weight = 0;
};

struct TrainedModel {
  std::vector<View> views;
  std::map<View, Vocab> vocabs;
  std::map<View, EmbeddingTable<double>> tables;
  std::vector<AlignmentTransform<double>> transforms;
  std::vector<TaskUncertainty<double>> uncertainties;
  std::vector<HistoryRow> history;

  const AlignmentTransform<double>* transform(View from, View to) const;
  const EmbeddingTable<double>& table(View v) const;
  const Vocab& vocab(View v) const;
};

/// Joint multi-task trainer. Each round draws one batch per task, combines
/// the task losses with the uncertainty weights and takes one optimizer
/// step over every parameter. Task gradients may be computed concurrently;
/// they are merged in task order, so results do not depend on the thread
/// count.
class Trainer {
 public:
  Trainer(const TrainingData& data, TrainConfig config);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  std::size_t rounds_per_epoch() const;
  std::size_t total_rounds() const;

  /// One scheduling round. Returns the unweighted per-task losses. Throws
  /// NumericalError before touching parameters if the total is not finite.
  std::vector<double> step();
  long steps_done() const { return optimizer_.step(); }

  /// Runs the remaining rounds; `on_round` (optional) sees the losses.
  void run(const std::function<void(long, const std::vector<double>&)>& on_round = {});

  const TrainedModel& model() const { return model_; }
  TrainedModel take_model() { return std::move(model_); }
  const std::map<View, ViewGraph>& graphs() const { return graphs_; }
  const std::vector<CrossViewLinks>& links() const { return links_; }

 private:
  struct Streams;

  TrainConfig config_;
  TrainedModel model_;
  std::map<View, ViewGraph> graphs_;
  std::vector<CrossViewLinks> links_;
  std::vector<TaskSpec> tasks_;
  std::unique_ptr<Streams> streams_;
  Optimizer<double> optimizer_;
};

TrainedModel train(const TrainingData& data, const TrainConfig& config);

}  // namespace mview
