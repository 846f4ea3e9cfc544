#include "mview/pipeline.hpp"

#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "mview/checkpoint.hpp"
#include "mview/graph.hpp"
#include "mview/io.hpp"

namespace mview {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char delim = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, delim))
    if (!trim(tok).empty()) out.push_back(trim(tok));
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    auto x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config '" + key + "': not an integer: '" + v + "'");
  }
}

std::size_t to_size(const std::string& key, const std::string& v) {
  auto x = to_int(key, v);
  if (x < 0) throw ConfigError("config '" + key + "' must be >= 0");
  return static_cast<std::size_t>(x);
}

double to_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const ConfigError&) {
    throw ConfigError("config '" + key + "': not a number: '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config '" + key + "': not a boolean: '" + v + "'");
}

char to_delim(const std::string& v) {
  if (v == "tab" || v == "\\t") return '\t';
  if (v == "comma") return ',';
  if (v.size() == 1) return v[0];
  throw ConfigError("config 'delimiter': expected tab, comma or a single character");
}

std::string delim_name(char c) {
  if (c == '\t') return "tab";
  if (c == ',') return "comma";
  return std::string(1, c);
}

std::string session_file(View v) { return "sessions." + std::string(to_string(v)) + ".tsv"; }
std::string attribute_file(View v) { return "attributes." + std::string(to_string(v)) + ".tsv"; }

std::vector<Session> read_session_file(const fs::path& path) {
  auto in = open_input(path);
  return read_sessions(in);
}

std::unordered_map<NodeId, NodeId> read_attribute_file(const fs::path& path) {
  auto in = open_input(path);
  std::vector<std::pair<NodeId, NodeId>> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ConfigError("bad attribute line in " + path.string());
    records.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return attribute_map_from_pairs(records);
}

ParsedEvents read_events(const PipelineConfig& config) {
  if (config.input.empty()) throw ConfigError("config 'input' is not set");
  if (!fs::exists(config.input)) throw ConfigError("input not found: " + config.input.string());
  auto in = open_input(config.input);
  return parse_events(in, config.schema);
}

/// The training part of the log plus test ground truth (if a split is set).
TimeSplit split_events(const PipelineConfig& config, ParsedEvents events) {
  std::optional<std::int64_t> cutoff = config.split_cutoff;
  if (!cutoff && config.split_quantile) cutoff = timestamp_quantile(events, *config.split_quantile);
  if (!cutoff) return {std::move(events), {}};
  return time_split(events, *cutoff, config.rules);
}

}  // namespace

fs::path PipelineConfig::checkpoint() const {
  return checkpoint_dir.empty() ? work_dir / "checkpoint" : checkpoint_dir;
}

void PipelineConfig::set(const std::string& key, const std::string& raw) {
  const auto v = trim(raw);
  auto& s = train.sampler;
  auto& o = train.optimizer;
  if (key == "mode") {
    if (v == "movielens") {
      rules = SessionRules::movielens();
    } else if (v == "taobao") {
      rules = SessionRules{};
    } else {
      throw ConfigError("config 'mode': expected taobao or movielens");
    }
  } else if (key == "input") input = v;
  else if (key == "boundaries") boundaries = v;
  else if (key == "work_dir") work_dir = v;
  else if (key == "checkpoint_dir") checkpoint_dir = v;
  else if (key == "delimiter") schema.delimiter = to_delim(v);
  else if (key == "col.user_id") schema.user_id = v;
  else if (key == "col.item_id") schema.item_id = v;
  else if (key == "col.category_id") schema.category_id = v;
  else if (key == "col.shop_id") schema.shop_id = v;
  else if (key == "col.timestamp") schema.timestamp = v;
  else if (key == "col.dwell_ms") schema.dwell_ms = v;
  else if (key == "col.rating") schema.rating = v;
  else if (key == "min_dwell_ms") rules.min_dwell_ms = to_int(key, v);
  else if (key == "idle_split") rules.idle_split = to_int(key, v);
  else if (key == "merge_gap") rules.merge_gap = to_int(key, v);
  else if (key == "movielens_idle_split") rules.movielens_idle_split = to_int(key, v);
  else if (key == "max_len") rules.max_len = v == "none" ? std::nullopt : std::optional(to_size(key, v));
  else if (key == "min_rating")
    rules.min_rating = v == "none" ? std::nullopt : std::optional(to_real(key, v));
  else if (key == "min_session_len") rules.min_session_len = to_size(key, v);
  else if (key == "missing_links") {
    if (v == "skip") missing_links = MissingLinkPolicy::skip_item;
    else if (v == "fatal") missing_links = MissingLinkPolicy::fatal;
    else throw ConfigError("config 'missing_links': expected skip or fatal");
  } else if (key == "views") {
    views.clear();
    for (const auto& name : split_list(v)) views.push_back(view_from_string(name));
  } else if (key == "relations") {
    relations.clear();
    for (const auto& r : split_list(v)) {
      auto dash = r.find('-');
      if (dash == std::string::npos) throw ConfigError("config 'relations': bad entry '" + r + "'");
      relations.emplace_back(view_from_string(r.substr(0, dash)),
                             view_from_string(r.substr(dash + 1)));
    }
  } else if (key == "split.cutoff") {
    split_cutoff = v == "none" ? std::nullopt : std::optional(to_int(key, v));
  } else if (key == "split.quantile") {
    split_quantile = v == "none" ? std::nullopt : std::optional(to_real(key, v));
  } else if (key == "window") s.window = to_size(key, v);
  else if (key == "negatives") s.negatives_k = to_size(key, v);
  else if (key == "noise_power") s.noise_power = to_real(key, v);
  else if (key == "batch_size") s.batch_size = to_size(key, v);
  else if (key == "epochs") s.epochs = to_size(key, v);
  else if (key == "seed") {
    s.seed = static_cast<std::uint64_t>(to_int(key, v));
    metric.seed = s.seed;
  } else if (key == "inter_sampling") {
    if (v == "uniform") s.inter_uniform = true;
    else if (v == "occurrence") s.inter_uniform = false;
    else throw ConfigError("config 'inter_sampling': expected occurrence or uniform");
  } else if (key == "threads") train.threads = to_size(key, v);
  else if (key == "optimizer") {
    if (v == "adam") o.algorithm = OptimizerKind::adam;
    else if (v == "sgd") o.algorithm = OptimizerKind::sgd;
    else throw ConfigError("config 'optimizer': expected adam or sgd");
  } else if (key == "learning_rate") o.learning_rate = to_real(key, v);
  else if (key == "clip_norm") o.clip_norm = to_real(key, v);
  else if (key == "beta1") o.beta1 = to_real(key, v);
  else if (key == "beta2") o.beta2 = to_real(key, v);
  else if (key == "epsilon") o.epsilon = to_real(key, v);
  else if (key == "dim") train.dim = to_int(key, v);
  else if (key == "relation_dim") train.relation_dim = to_int(key, v);
  else if (key == "weighting") {
    if (v == "adaptive") train.weighting = WeightingMode::adaptive;
    else if (v == "static") train.weighting = WeightingMode::static_uniform;
    else throw ConfigError("config 'weighting': expected adaptive or static");
  } else if (key == "floor_var") train.floor_var = to_real(key, v);
  else if (key == "inter_loss") {
    if (v == "raw") train.inter_loss = InterLossKind::raw_score;
    else if (v == "log_sigmoid") train.inter_loss = InterLossKind::log_sigmoid;
    else throw ConfigError("config 'inter_loss': expected raw or log_sigmoid");
  } else if (key == "record_every") train.record_every = to_size(key, v);
  else if (key == "max_steps") train.max_steps = to_size(key, v);
  else if (key == "sampling") {
    if (v == "sessions") train.source = SequenceSource::sessions;
    else if (v == "random_walks") train.source = SequenceSource::random_walks;
    else throw ConfigError("config 'sampling': expected sessions or random_walks");
  } else if (key == "walk_length") train.walk_length = to_size(key, v);
  else if (key == "walks_per_node") train.walks_per_node = to_size(key, v);
  else if (key == "undirected") train.undirected_graphs = to_bool(key, v);
  else if (key == "K") eval.k = to_size(key, v);
  else if (key == "trigger_window") eval.trigger_window = to_size(key, v);
  else if (key == "exclude_seen") eval.exclude_seen = to_bool(key, v);
  else if (key == "metric.margin") metric_margin = to_real(key, v);
  else if (key == "metric.steps") metric.steps = to_size(key, v);
  else if (key == "metric.batch_size") metric.batch_size = to_size(key, v);
  else if (key == "metric.learning_rate") metric.optimizer.learning_rate = to_real(key, v);
  else if (key == "metric.window") metric_window = to_size(key, v);
  else if (key == "metric.negatives") metric_negatives = to_size(key, v);
  else if (key == "metric.max_positives") metric_max_positives = to_size(key, v);
  else if (key == "metric.candidates") metric_candidates = to_size(key, v);
  else if (key == "metric.history_days") history_days = to_int(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

void PipelineConfig::validate() const {
  rules.validate();
  train.validate();
  eval.validate();
  if (views.empty()) throw ConfigError("no views declared");
  if (views.front() != View::item) throw ConfigError("the first view must be item");
  std::set<View> declared(views.begin(), views.end());
  for (const auto& [from, to] : relations)
    if (!declared.count(from) || !declared.count(to) || from == to)
      throw ConfigError("relation " + std::string(view_tag(from)) + "-" +
                        std::string(view_tag(to)) + " references an undeclared view");
  if (!(metric_margin > 0)) throw ConfigError("metric.margin must be > 0");
}

PipelineConfig default_config(DatasetMode mode) {
  PipelineConfig c;
  if (mode == DatasetMode::movielens) {
    c.rules = SessionRules::movielens();
    c.schema.rating = "rating";
    c.views = {View::item, View::category};
    c.relations = {{View::item, View::category}};
  } else {
    c.schema.shop_id = "shop_id";
    c.schema.dwell_ms = "dwell_ms";
  }
  return c;
}

PipelineConfig parse_config(std::istream& in, PipelineConfig base) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

PipelineConfig load_config(const fs::path& path) {
  auto in = open_input(path);
  // `mode` decides the defaults, so it is applied first.
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  DatasetMode mode = DatasetMode::taobao;
  std::stringstream probe(text);
  std::string line;
  while (std::getline(probe, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos && trim(line.substr(0, eq)) == "mode" &&
        trim(line.substr(eq + 1)).rfind("movielens", 0) == 0)
      mode = DatasetMode::movielens;
  }
  std::stringstream body(text);
  return parse_config(body, default_config(mode));
}

void write_config(std::ostream& out, const PipelineConfig& c) {
  const auto& s = c.train.sampler;
  const auto& o = c.train.optimizer;
  out << "mode = " << (c.rules.mode == DatasetMode::movielens ? "movielens" : "taobao") << '\n'
      << "input = " << c.input.string() << '\n'
      << "boundaries = " << c.boundaries.string() << '\n'
      << "work_dir = " << c.work_dir.string() << '\n'
      << "checkpoint_dir = " << c.checkpoint().string() << '\n'
      << "delimiter = " << delim_name(c.schema.delimiter) << '\n'
      << "col.user_id = " << c.schema.user_id << '\n'
      << "col.item_id = " << c.schema.item_id << '\n'
      << "col.category_id = " << c.schema.category_id << '\n'
      << "col.shop_id = " << c.schema.shop_id << '\n'
      << "col.timestamp = " << c.schema.timestamp << '\n'
      << "col.dwell_ms = " << c.schema.dwell_ms << '\n'
      << "col.rating = " << c.schema.rating << '\n'
      << "min_dwell_ms = " << c.rules.min_dwell_ms << '\n'
      << "idle_split = " << c.rules.idle_split << '\n'
      << "merge_gap = " << c.rules.merge_gap << '\n'
      << "movielens_idle_split = " << c.rules.movielens_idle_split << '\n'
      << "max_len = " << (c.rules.max_len ? std::to_string(*c.rules.max_len) : "none") << '\n'
      << "min_rating = " << (c.rules.min_rating ? format_double(*c.rules.min_rating) : "none")
      << '\n'
      << "min_session_len = " << c.rules.min_session_len << '\n'
      << "missing_links = " << (c.missing_links == MissingLinkPolicy::fatal ? "fatal" : "skip")
      << '\n';
  out << "views = ";
  for (std::size_t i = 0; i < c.views.size(); ++i) out << (i ? "," : "") << to_string(c.views[i]);
  out << "\nrelations = ";
  for (std::size_t i = 0; i < c.relations.size(); ++i)
    out << (i ? "," : "") << to_string(c.relations[i].first) << '-'
        << to_string(c.relations[i].second);
  out << '\n'
      << "split.cutoff = " << (c.split_cutoff ? std::to_string(*c.split_cutoff) : "none") << '\n'
      << "split.quantile = " << (c.split_quantile ? format_double(*c.split_quantile) : "none")
      << '\n'
      << "window = " << s.window << '\n'
      << "negatives = " << s.negatives_k << '\n'
      << "noise_power = " << format_double(s.noise_power) << '\n'
      << "batch_size = " << s.batch_size << '\n'
      << "epochs = " << s.epochs << '\n'
      << "seed = " << s.seed << '\n'
      << "inter_sampling = " << (s.inter_uniform ? "uniform" : "occurrence") << '\n'
      << "threads = " << c.train.threads << '\n'
      << "optimizer = " << (o.algorithm == OptimizerKind::adam ? "adam" : "sgd") << '\n'
      << "learning_rate = " << format_double(o.learning_rate) << '\n'
      << "clip_norm = " << format_double(o.clip_norm) << '\n'
      << "beta1 = " << format_double(o.beta1) << '\n'
      << "beta2 = " << format_double(o.beta2) << '\n'
      << "epsilon = " << format_double(o.epsilon) << '\n'
      << "dim = " << c.train.dim << '\n'
      << "relation_dim = " << c.train.relation_dim << '\n'
      << "weighting = " << (c.train.weighting == WeightingMode::adaptive ? "adaptive" : "static")
      << '\n'
      << "floor_var = " << format_double(c.train.floor_var) << '\n'
      << "inter_loss = " << (c.train.inter_loss == InterLossKind::raw_score ? "raw" : "log_sigmoid")
      << '\n'
      << "record_every = " << c.train.record_every << '\n'
      << "max_steps = " << c.train.max_steps << '\n'
      << "sampling = "
      << (c.train.source == SequenceSource::sessions ? "sessions" : "random_walks") << '\n'
      << "walk_length = " << c.train.walk_length << '\n'
      << "walks_per_node = " << c.train.walks_per_node << '\n'
      << "undirected = " << (c.train.undirected_graphs ? "true" : "false") << '\n'
      << "K = " << c.eval.k << '\n'
      << "trigger_window = " << c.eval.trigger_window << '\n'
      << "exclude_seen = " << (c.eval.exclude_seen ? "true" : "false") << '\n'
      << "metric.margin = " << format_double(c.metric_margin) << '\n'
      << "metric.steps = " << c.metric.steps << '\n'
      << "metric.batch_size = " << c.metric.batch_size << '\n'
      << "metric.learning_rate = " << format_double(c.metric.optimizer.learning_rate) << '\n'
      << "metric.window = " << c.metric_window << '\n'
      << "metric.negatives = " << c.metric_negatives << '\n'
      << "metric.max_positives = " << c.metric_max_positives << '\n'
      << "metric.candidates = " << c.metric_candidates << '\n'
      << "metric.history_days = " << c.history_days << '\n';
}

IngestSummary cmd_ingest(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  auto events = read_events(config);
  IngestSummary summary;
  summary.skipped_rows = events.skipped;

  std::vector<View> aux(config.views.begin() + 1, config.views.end());
  auto attributes = collect_attributes(events, aux);
  auto split = split_events(config, std::move(events));
  BoundaryMap boundaries;
  if (!config.boundaries.empty()) {
    auto in = open_input(config.boundaries);
    boundaries = read_boundaries(in);
  }
  auto result =
      sessionize(split.train, config.rules, attributes, config.missing_links, boundaries);

  summary.users = split.train.by_user.size();
  summary.events_in = result.events_in;
  summary.events_kept = result.events_kept;
  summary.missing_links = result.missing_links;
  summary.test_users = split.test.size();

  const auto& dir = config.work_dir;
  for (View v : config.views) {
    const auto& list = result.sessions[v];
    summary.sessions[v] = list.size();
    write_atomic(dir / session_file(v), [&](std::ostream& o) { write_sessions(o, list); });
  }
  for (View v : aux) {
    std::map<NodeId, NodeId> sorted(attributes[v].begin(), attributes[v].end());
    write_atomic(dir / attribute_file(v), [&](std::ostream& o) {
      for (const auto& [item, attr] : sorted) o << item << '\t' << attr << '\n';
    });
  }
  write_atomic(dir / "test.tsv", [&](std::ostream& o) { write_test_file(o, split.test); });

  log << "users: " << summary.users << "\nevents: " << summary.events_in
      << "\nevents kept after cleaning: " << summary.events_kept
      << "\nmalformed rows skipped: " << summary.skipped_rows
      << "\nitems without attribute: " << summary.missing_links
      << "\ntest users: " << summary.test_users << '\n';
  for (const auto& [v, n] : summary.sessions) log << to_string(v) << " sessions: " << n << '\n';
  return summary;
}

TrainingData load_training_data(const PipelineConfig& config) {
  TrainingData data;
  data.views = config.views;
  data.relations = config.relations;
  for (View v : config.views) {
    data.sessions[v] = read_session_file(config.work_dir / session_file(v));
    if (v != View::item)
      data.attributes[v] = read_attribute_file(config.work_dir / attribute_file(v));
  }
  return data;
}

void cmd_build_graph(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  auto data = load_training_data(config);
  std::map<View, ViewGraph> graphs;
  for (View v : config.views) {
    auto g = build_view_graph(data.sessions.at(v), config.train.undirected_graphs);
    g.view = v;
    const auto name = std::string(to_string(v));
    write_atomic(config.work_dir / ("graph." + name + ".tsv"),
                 [&](std::ostream& o) { dump_graph(o, g); });
    write_atomic(config.work_dir / ("vocab." + name + ".tsv"),
                 [&](std::ostream& o) { dump_vocab(o, g); });
    log << name << ": " << g.vocab.size() << " nodes, " << g.num_edges() << " distinct edges, "
        << g.total_weight() << " total edge weight\n";
    graphs.emplace(v, std::move(g));
  }
  for (const auto& [from, to] : config.relations) {
    auto links = build_cross_links(data.sessions.at(from), data.attributes.at(to),
                                   graphs.at(from).vocab, graphs.at(to).vocab, to);
    const auto tag = std::string(view_tag(from)) + "-" + std::string(view_tag(to));
    write_atomic(config.work_dir / ("links." + tag + ".tsv"), [&](std::ostream& o) {
      dump_links(o, links, graphs.at(from).vocab, graphs.at(to).vocab);
    });
    std::set<Index> targets;
    for (const auto& [a, b] : links.pairs) targets.insert(b);
    log << tag << ": " << links.pairs.size() << " link pairs, " << targets.size()
        << " distinct targets\n";
  }
}

TrainedModel cmd_train(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  auto data = load_training_data(config);
  Trainer trainer(data, config.train);
  log << "tasks:";
  for (const auto& t : trainer.tasks()) log << ' ' << t.name();
  log << "\nrounds: " << trainer.total_rounds() << " (" << trainer.rounds_per_epoch()
      << " per epoch)\n";
  try {
    trainer.run();
  } catch (const NumericalError&) {
    save_checkpoint(config.checkpoint(), trainer.model());
    throw;
  }
  save_checkpoint(config.checkpoint(), trainer.model());
  const auto& m = trainer.model();
  for (const auto& u : m.uncertainties)
    log << "task " << u.task << ": sigma2 " << u.sigma2() << ", weight " << u.weight() << '\n';
  log << "checkpoint: " << config.checkpoint().string() << '\n';
  return trainer.take_model();
}

namespace {

TrainedModel load_model_for(const PipelineConfig& config) {
  auto model = load_checkpoint(config.checkpoint());
  if (model.views != config.views) throw ConfigError("checkpoint views differ from config views");
  return model;
}

}  // namespace

EvalResult cmd_eval(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  auto model = load_model_for(config);
  auto sessions = read_session_file(config.work_dir / session_file(View::item));
  auto in = open_input(config.work_dir / "test.tsv");
  auto test = read_test_file(in);
  auto result = evaluate(model, test, sessions, config.eval);
  print_report(log, model.views.size() > 1 ? "multi-view" : "single-view", result);
  write_atomic(config.work_dir / "metrics.csv",
               [&](std::ostream& o) { write_metrics_csv(o, result); });
  return result;
}

void cmd_similar(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  auto model = load_model_for(config);
  const auto& table = model.table(View::item);
  const auto& vocab = model.vocab(View::item);
  write_atomic(config.work_dir / "similar.tsv", [&](std::ostream& o) {
    for (Index i = 0; i < table.rows(); ++i) {
      const Index self[] = {i};
      auto top = topk_similar<double>(table.input.row(i).transpose(), table.input, config.eval.k,
                                      self);
      write_similarity_line(o, vocab.id(i), top, vocab);
    }
  });
  log << "similarity map for " << table.rows() << " items written to "
      << (config.work_dir / "similar.tsv").string() << '\n';
}

namespace {

struct MetricContext {
  TrainedModel model;
  MetricEmbeddings<double> emb;
  std::vector<Index> item_category;  // -1 when unknown
  Vocab category_vocab;
};

MetricContext metric_context(const PipelineConfig& config) {
  MetricContext ctx;
  ctx.model = load_model_for(config);
  const auto* t = ctx.model.transform(View::item, View::category);
  if (!t) throw ConfigError("metric model needs an item-category alignment in the checkpoint");
  ctx.emb = metric_embeddings(ctx.model.table(View::item).input, t->matrix);
  const auto& vocab = ctx.model.vocab(View::item);
  auto attrs = read_attribute_file(config.work_dir / attribute_file(View::category));
  ctx.item_category.assign(static_cast<std::size_t>(vocab.size()), -1);
  for (Index i = 0; i < vocab.size(); ++i) {
    auto it = attrs.find(vocab.id(i));
    if (it != attrs.end())
      ctx.item_category[static_cast<std::size_t>(i)] = ctx.category_vocab.add(it->second);
  }
  return ctx;
}

}  // namespace

MetricModel<double> cmd_metric_train(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  auto ctx = metric_context(config);
  auto sessions = read_session_file(config.work_dir / session_file(View::item));
  auto seqs = encode_sessions(sessions, ctx.model.vocab(View::item));
  std::mt19937_64 rng(config.metric.seed);
  auto pairs = generate_metric_pairs(seqs, ctx.item_category, config.metric_window,
                                     config.metric_negatives, config.metric_max_positives, rng);
  auto init = identity_metric<double>(ctx.emb.item.cols(), ctx.emb.relational.cols(),
                                      config.metric_margin);
  auto result = train_metric(std::move(init), ctx.emb, std::span<const PairExample>(pairs),
                             config.metric);
  write_atomic(config.checkpoint() / "metric.txt",
               [&](std::ostream& o) { write_metric_model(o, result.model); });
  log << "metric pairs: " << pairs.size() << "\nsteps: " << result.losses.size();
  if (!result.losses.empty())
    log << "\nloss: " << result.losses.front() << " -> " << result.losses.back();
  log << '\n';
  return result.model;
}

NoveltyReport cmd_novelty_eval(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  auto ctx = metric_context(config);
  MetricModel<double> metric;
  {
    auto in = open_input(config.checkpoint() / "metric.txt");
    metric = read_metric_model(in);
  }
  auto events = read_events(config);
  auto split = split_events(config, std::move(events));
  const auto& vocab = ctx.model.vocab(View::item);
  const auto& table = ctx.model.table(View::item);
  const std::int64_t window = config.history_days * 24 * 3600;

  std::vector<std::vector<Index>> base_recs, metric_recs;
  std::vector<std::set<Index>> history;
  for (const auto& [user, raw] : split.train.by_user) {
    auto list = clean_events(raw, config.rules);
    if (list.empty()) continue;
    std::optional<Index> trigger;
    std::set<Index> cats, seen;
    const auto last_ts = list.back().timestamp;
    for (const auto& e : list) {
      auto idx = vocab.find(e.item_id);
      if (!idx) continue;
      seen.insert(*idx);
      trigger = idx;
      const auto c = ctx.item_category[static_cast<std::size_t>(*idx)];
      if (e.timestamp >= last_ts - window && c >= 0) cats.insert(c);
    }
    if (!trigger) continue;
    std::vector<Index> exclude(seen.begin(), seen.end());
    auto pool = topk_similar<double>(table.input.row(*trigger).transpose(), table.input,
                                     config.metric_candidates, exclude);
    std::vector<Index> pool_idx, base;
    for (const auto& s : pool) {
      if (ctx.item_category[static_cast<std::size_t>(s.index)] < 0) continue;
      pool_idx.push_back(s.index);
      if (base.size() < config.eval.k) base.push_back(s.index);
    }
    std::vector<Index> reranked;
    for (const auto& s : metric_rerank(metric, ctx.emb, *trigger, pool_idx, config.eval.k))
      reranked.push_back(s.index);
    base_recs.push_back(std::move(base));
    metric_recs.push_back(std::move(reranked));
    history.push_back(std::move(cats));
  }
  NoveltyReport r;
  r.users = base_recs.size();
  r.base = novelty_at_k(base_recs, history, ctx.item_category);
  r.metric = novelty_at_k(metric_recs, history, ctx.item_category);
  write_atomic(config.work_dir / "novelty.csv", [&](std::ostream& o) {
    o << "ranking,novelty,K,N\n"
      << "instance," << format_double(r.base) << ',' << config.eval.k << ',' << r.users << '\n'
      << "metric," << format_double(r.metric) << ',' << config.eval.k << ',' << r.users << '\n';
  });
  log << "novelty@" << config.eval.k << " instance ranking: " << r.base
      << "\nnovelty@" << config.eval.k << " metric reranking: " << r.metric << "\nusers: " << r.users
      << '\n';
  return r;
}

}  // namespace mview
