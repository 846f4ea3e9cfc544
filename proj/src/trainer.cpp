#include "mview/trainer.hpp"

#include <algorithm>
#include <future>
#include <variant>

namespace mview {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string TaskSpec::name() const {
  if (!inter) return std::string(view_tag(from));
  return std::string(view_tag(from)) + "-" + std::string(view_tag(to));
}

void TrainConfig::validate() const {
  sampler.validate();
  optimizer.validate();
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (relation_dim < 0) throw ConfigError("relation_dim must be >= 0");
  if (!(floor_var > 0)) throw ConfigError("floor_var must be > 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

const AlignmentTransform<double>* TrainedModel::transform(View from, View to) const {
  for (const auto& t : transforms)
    if (t.from_view == from && t.to_view == to) return &t;
  return nullptr;
}

const EmbeddingTable<double>& TrainedModel::table(View v) const {
  auto it = tables.find(v);
  if (it == tables.end()) throw ConfigError("model has no " + std::string(to_string(v)) + " view");
  return it->second;
}

const Vocab& TrainedModel::vocab(View v) const {
  auto it = vocabs.find(v);
  if (it == vocabs.end()) throw ConfigError("model has no " + std::string(to_string(v)) + " view");
  return it->second;
}

struct Trainer::Streams {
  std::vector<std::variant<IntraStream, InterStream>> per_task;
};

Trainer::Trainer(const TrainingData& data, TrainConfig config)
    : config_(std::move(config)), streams_(std::make_unique<Streams>()),
      optimizer_(config_.optimizer) {
  config_.validate();
  if (data.views.empty()) throw ConfigError("at least one view is required");
  const Index rel_dim = config_.relation_dim > 0 ? config_.relation_dim : config_.dim;
  const auto seed = config_.sampler.seed;
  std::mt19937_64 init_rng(splitmix64(seed));

  model_.views = data.views;
  for (View v : data.views) {
    auto it = data.sessions.find(v);
    if (it == data.sessions.end() || it->second.empty())
      throw ConfigError("no sessions for view " + std::string(to_string(v)));
    auto g = build_view_graph(it->second, config_.undirected_graphs);
    g.view = v;
    model_.vocabs[v] = g.vocab;
    model_.tables[v] = make_table<double>(v, g.vocab.size(), config_.dim, init_rng);
    graphs_.emplace(v, std::move(g));
    tasks_.push_back({false, v, v});
  }
  for (const auto& [from, to] : data.relations) {
    if (!graphs_.count(from) || !graphs_.count(to))
      throw ConfigError("relation references an undeclared view");
    auto attrs = data.attributes.find(to);
    if (attrs == data.attributes.end())
      throw ConfigError("no attribute map for " + std::string(to_string(to)));
    links_.push_back(build_cross_links(data.sessions.at(from), attrs->second,
                                       graphs_.at(from).vocab, graphs_.at(to).vocab, to));
    links_.back().from_view = from;
    model_.transforms.push_back(make_transform<double>(from, to, rel_dim, config_.dim, init_rng));
    tasks_.push_back({true, from, to});
  }
  for (const auto& t : tasks_)
    model_.uncertainties.push_back({t.name(), 0.0, config_.floor_var});

  std::size_t rel = 0;
  for (std::size_t k = 0; k < tasks_.size(); ++k) {
    const auto& t = tasks_[k];
    const auto task_seed = splitmix64(seed ^ splitmix64(k + 1));
    const auto& g = graphs_.at(t.to);
    auto noise = build_noise(g.node_freq, config_.sampler.noise_power);
    if (!t.inter) {
      std::vector<std::vector<Index>> seqs;
      if (config_.source == SequenceSource::sessions) {
        seqs = encode_sessions(data.sessions.at(t.from), g.vocab);
      } else {
        std::mt19937_64 walk_rng(task_seed);
        seqs = random_walks(g, config_.walk_length, config_.walks_per_node, walk_rng);
      }
      streams_->per_task.emplace_back(
          std::in_place_type<IntraStream>, t.from, std::move(seqs), std::move(noise),
          config_.sampler, task_seed);
    } else {
      streams_->per_task.emplace_back(std::in_place_type<InterStream>, links_[rel++],
                                      std::move(noise), config_.sampler, task_seed);
    }
  }
}

Trainer::~Trainer() = default;

std::size_t Trainer::rounds_per_epoch() const {
  return std::get<IntraStream>(streams_->per_task.front()).batches_per_epoch();
}

std::size_t Trainer::total_rounds() const {
  if (config_.max_steps > 0) return config_.max_steps;
  return rounds_per_epoch() * config_.sampler.epochs;
}

std::vector<double> Trainer::step() {
  using IntraResult = IntraGradient<double>;
  using InterResult = InterGradient<double>;
  using Result = std::variant<IntraResult, InterResult>;
  const auto n_tasks = tasks_.size();

  auto compute = [this](std::size_t k) -> Result {
    const auto& t = tasks_[k];
    auto& stream = streams_->per_task[k];
    if (!t.inter) {
      auto batch = std::get<IntraStream>(stream).next_batch();
      return intra_loss_grad(model_.tables.at(t.from), std::span<const IntraExample>(batch));
    }
    auto batch = std::get<InterStream>(stream).next_batch();
    return inter_loss_grad(model_.tables.at(t.from), model_.tables.at(t.to),
                           *model_.transform(t.from, t.to), std::span<const InterExample>(batch),
                           config_.inter_loss);
  };

  std::vector<Result> results;
  results.reserve(n_tasks);
  if (config_.threads <= 1 || n_tasks == 1) {
    for (std::size_t k = 0; k < n_tasks; ++k) results.push_back(compute(k));
  } else {
    // Tasks own disjoint streams and only read shared parameters here.
    std::vector<std::future<Result>> futures;
    const auto workers = std::min(config_.threads, n_tasks);
    std::vector<std::optional<Result>> slots(n_tasks);
    for (std::size_t w = 0; w < workers; ++w)
      futures.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t k = w; k < n_tasks; k += workers) slots[k] = compute(k);
        return Result{};
      }));
    for (auto& f : futures) f.get();
    for (auto& s : slots) results.push_back(std::move(*s));
  }

  std::vector<double> losses(n_tasks);
  for (std::size_t k = 0; k < n_tasks; ++k)
    losses[k] = std::visit([](const auto& r) { return r.loss; }, results[k]);

  WeightedTotal<double> total;
  if (config_.weighting == WeightingMode::adaptive) {
    total = weighted_total<double>(losses, model_.uncertainties);
  } else {
    const std::vector<double> ones(n_tasks, 1.0);
    total = static_total<double>(losses, ones);
  }
  if (!std::isfinite(total.total))
    throw NumericalError("total loss is not finite at step " +
                         std::to_string(optimizer_.step() + 1));

  // Merge weighted task gradients per parameter block.
  const auto n_views = model_.views.size();
  std::vector<SparseRows<double>> input_grad, context_grad;
  for (View v : model_.views) {
    input_grad.emplace_back(model_.tables.at(v).dim());
    context_grad.emplace_back(model_.tables.at(v).dim());
  }
  auto view_slot = [&](View v) {
    return static_cast<std::size_t>(
        std::find(model_.views.begin(), model_.views.end(), v) - model_.views.begin());
  };
  std::vector<Matrix<double>> transform_grad;
  for (const auto& t : model_.transforms)
    transform_grad.push_back(Matrix<double>::Zero(t.matrix.rows(), t.matrix.cols()));

  std::size_t rel = 0;
  for (std::size_t k = 0; k < n_tasks; ++k) {
    const double w = total.weights[k];
    const auto& t = tasks_[k];
    if (!t.inter) {
      const auto& r = std::get<IntraResult>(results[k]);
      input_grad[view_slot(t.from)].add_scaled(r.input, w);
      context_grad[view_slot(t.from)].add_scaled(r.context, w);
    } else {
      const auto& r = std::get<InterResult>(results[k]);
      input_grad[view_slot(t.from)].add_scaled(r.from_input, w);
      input_grad[view_slot(t.to)].add_scaled(r.to_input, w);
      transform_grad[rel++] = w * r.transform;
    }
  }

  double sq = 0;
  for (std::size_t v = 0; v < n_views; ++v)
    sq += input_grad[v].squared_norm() + context_grad[v].squared_norm();
  for (const auto& g : transform_grad) sq += g.squaredNorm();
  for (double g : total.log_var_grad) sq += g * g;
  const double scale = clip_scale(sq, config_.optimizer.clip_norm);

  optimizer_.begin_step();
  std::size_t slot = 0;
  for (std::size_t v = 0; v < n_views; ++v) {
    auto& table = model_.tables.at(model_.views[v]);
    optimizer_.update_rows(slot++, table.input, input_grad[v], scale);
    optimizer_.update_rows(slot++, table.context, context_grad[v], scale);
  }
  for (std::size_t j = 0; j < model_.transforms.size(); ++j)
    optimizer_.update_dense(slot++, model_.transforms[j].matrix, transform_grad[j], scale);
  if (config_.weighting == WeightingMode::adaptive) {
    for (std::size_t k = 0; k < n_tasks; ++k) {
      auto& u = model_.uncertainties[k];
      optimizer_.update_scalar(slot++, u.log_var, total.log_var_grad[k], scale);
      u.project();
    }
  }

  const long s = optimizer_.step();
  if (config_.record_every > 0 && (s == 1 || s % static_cast<long>(config_.record_every) == 0)) {
    for (std::size_t k = 0; k < n_tasks; ++k) {
      const auto& u = model_.uncertainties[k];
      const bool adaptive = config_.weighting == WeightingMode::adaptive;
      model_.history.push_back({s, u.task, losses[k], adaptive ? u.sigma2() : 1.0,
                                adaptive ? u.weight() : 1.0});
    }
  }
  return losses;
}

void Trainer::run(const std::function<void(long, const std::vector<double>&)>& on_round) {
  const auto total = static_cast<long>(total_rounds());
  while (optimizer_.step() < total) {
    auto losses = step();
    if (on_round) on_round(optimizer_.step(), losses);
  }
}

TrainedModel train(const TrainingData& data, const TrainConfig& config) {
  Trainer trainer(data, config);
  trainer.run();
  return trainer.take_model();
}

}  // namespace mview
