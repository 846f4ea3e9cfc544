#include "mview/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mview/io.hpp"

namespace mview {

namespace {

static_assert(std::endian::native == std::endian::little, "binary tables assume little-endian");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw ConfigError("truncated binary table");
  return v;
}

std::string table_name(View v, const char* kind, const char* ext) {
  return "embedding." + std::string(to_string(v)) + "." + kind + ext;
}

std::vector<std::string> tokens(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, delim)) out.push_back(tok);
  return out;
}

}  // namespace

void write_table_text(std::ostream& out, View view, const Matrix<double>& m, const Vocab& vocab) {
  out << to_string(view) << ' ' << m.cols() << ' ' << m.rows() << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    out << vocab.id(r);
    for (Index c = 0; c < m.cols(); ++c) out << ' ' << format_double(m(r, c));
    out << '\n';
  }
}

Matrix<double> read_table_text(std::istream& in, View expected_view, Vocab& vocab) {
  std::string name;
  Index dim = 0, rows = 0;
  if (!(in >> name >> dim >> rows)) throw ConfigError("bad table header");
  if (view_from_string(name) != expected_view)
    throw ConfigError("table is for view '" + name + "', expected " +
                      std::string(to_string(expected_view)));
  const bool fresh = vocab.empty();
  Matrix<double> m(rows, dim);
  std::string id, value;
  for (Index r = 0; r < rows; ++r) {
    if (!(in >> id)) throw ConfigError("truncated table");
    if (fresh) {
      vocab.add(id);
    } else if (vocab.find(id) != r) {
      throw ConfigError("table/vocab mismatch at row " + std::to_string(r) + " ('" + id + "')");
    }
    for (Index c = 0; c < dim; ++c) {
      if (!(in >> value)) throw ConfigError("truncated table row");
      m(r, c) = parse_double(value);
    }
  }
  return m;
}

void write_table_binary(std::ostream& out, View view, const Matrix<double>& m,
                        const Vocab& vocab) {
  out.write("MVEB", 4);
  const auto name = std::string(to_string(view));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  for (Index r = 0; r < m.rows(); ++r) {
    const auto& id = vocab.id(r);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
  }
}

Matrix<double> read_table_binary(std::istream& in, View expected_view, Vocab& vocab) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MVEB", 4) != 0)
    throw ConfigError("not a binary embedding table");
  std::string name(get<std::uint32_t>(in), '\0');
  in.read(name.data(), static_cast<std::streamsize>(name.size()));
  if (view_from_string(name) != expected_view) throw ConfigError("binary table view mismatch");
  const auto dim = static_cast<Index>(get<std::uint64_t>(in));
  const auto rows = static_cast<Index>(get<std::uint64_t>(in));
  const bool fresh = vocab.empty();
  Matrix<double> m(rows, dim);
  for (Index r = 0; r < rows; ++r) {
    std::string id(get<std::uint32_t>(in), '\0');
    in.read(id.data(), static_cast<std::streamsize>(id.size()));
    if (fresh) {
      vocab.add(id);
    } else if (vocab.find(id) != r) {
      throw ConfigError("binary table/vocab mismatch at row " + std::to_string(r));
    }
    for (Index c = 0; c < dim; ++c) m(r, c) = get<double>(in);
  }
  return m;
}

void write_history_csv(std::ostream& out, std::span<const HistoryRow> rows) {
  out << "step,task,loss,sigma2,weight\n";
  for (const auto& r : rows)
    out << r.step << ',' << r.task << ',' << format_double(r.loss) << ','
        << format_double(r.sigma2) << ',' << format_double(r.weight) << '\n';
}

void save_checkpoint(const std::filesystem::path& dir, const TrainedModel& model) {
  std::filesystem::create_directories(dir);
  for (View v : model.views) {
    const auto& table = model.table(v);
    const auto& vocab = model.vocab(v);
    write_atomic(dir / table_name(v, "input", ".txt"),
                 [&](std::ostream& o) { write_table_text(o, v, table.input, vocab); });
    write_atomic(dir / table_name(v, "context", ".txt"),
                 [&](std::ostream& o) { write_table_text(o, v, table.context, vocab); });
    write_atomic(dir / table_name(v, "input", ".bin"),
                 [&](std::ostream& o) { write_table_binary(o, v, table.input, vocab); }, true);
    write_atomic(dir / table_name(v, "context", ".bin"),
                 [&](std::ostream& o) { write_table_binary(o, v, table.context, vocab); }, true);
  }
  write_atomic(dir / "meta.tsv", [&](std::ostream& o) {
    o << "views\t";
    for (std::size_t i = 0; i < model.views.size(); ++i)
      o << (i ? "," : "") << to_string(model.views[i]);
    o << '\n';
    for (const auto& t : model.transforms) {
      o << "transform." << view_tag(t.from_view) << '-' << view_tag(t.to_view) << '\t'
        << t.matrix.rows() << '\t' << t.matrix.cols() << '\t';
      for (Index r = 0; r < t.matrix.rows(); ++r)
        for (Index c = 0; c < t.matrix.cols(); ++c)
          o << (r || c ? " " : "") << format_double(t.matrix(r, c));
      o << '\n';
    }
    for (const auto& u : model.uncertainties) {
      o << "log_var." << u.task << '\t' << format_double(u.log_var) << '\n';
      o << "floor_var." << u.task << '\t' << format_double(u.floor_var) << '\n';
    }
  });
  write_atomic(dir / "history.csv",
               [&](std::ostream& o) { write_history_csv(o, model.history); });
}

TrainedModel load_checkpoint(const std::filesystem::path& dir) {
  TrainedModel model;
  auto meta = open_input(dir / "meta.tsv");
  std::string line;
  std::map<std::string, TaskUncertainty<double>> unc;
  std::vector<std::string> unc_order;
  while (std::getline(meta, line)) {
    if (line.empty()) continue;
    auto f = tokens(line, '\t');
    if (f.size() < 2) throw ConfigError("bad meta.tsv line: " + line);
    const auto& key = f[0];
    if (key == "views") {
      for (const auto& v : tokens(f[1], ',')) model.views.push_back(view_from_string(v));
    } else if (key.rfind("transform.", 0) == 0) {
      if (f.size() != 4) throw ConfigError("bad transform line");
      auto rel = key.substr(10);
      auto dash = rel.find('-');
      if (dash == std::string::npos) throw ConfigError("bad transform key " + key);
      AlignmentTransform<double> t;
      t.from_view = view_from_string(rel.substr(0, dash));
      t.to_view = view_from_string(rel.substr(dash + 1));
      const auto rows = std::stol(f[1]), cols = std::stol(f[2]);
      auto vals = tokens(f[3], ' ');
      if (static_cast<long>(vals.size()) != rows * cols)
        throw ConfigError("transform " + rel + " has wrong value count");
      t.matrix.resize(rows, cols);
      for (long k = 0; k < rows * cols; ++k)
        t.matrix(k / cols, k % cols) = parse_double(vals[static_cast<std::size_t>(k)]);
      model.transforms.push_back(std::move(t));
    } else if (key.rfind("log_var.", 0) == 0) {
      auto task = key.substr(8);
      if (!unc.count(task)) unc_order.push_back(task);
      unc[task].task = task;
      unc[task].log_var = parse_double(f[1]);
    } else if (key.rfind("floor_var.", 0) == 0) {
      auto task = key.substr(10);
      if (!unc.count(task)) unc_order.push_back(task);
      unc[task].task = task;
      unc[task].floor_var = parse_double(f[1]);
    }
  }
  if (model.views.empty()) throw ConfigError("checkpoint has no views");
  for (const auto& t : unc_order) model.uncertainties.push_back(unc[t]);

  for (View v : model.views) {
    Vocab vocab;
    EmbeddingTable<double> table;
    table.view = v;
    {
      auto in = open_input(dir / table_name(v, "input", ".txt"));
      table.input = read_table_text(in, v, vocab);
    }
    {
      auto in = open_input(dir / table_name(v, "context", ".txt"));
      table.context = read_table_text(in, v, vocab);
    }
    if (table.context.rows() != table.input.rows() || table.context.cols() != table.input.cols())
      throw ConfigError("input/context shape mismatch for " + std::string(to_string(v)));
    model.vocabs[v] = std::move(vocab);
    model.tables[v] = std::move(table);
  }
  for (const auto& t : model.transforms)
    if (t.matrix.cols() != model.table(t.from_view).dim())
      throw ConfigError("transform shape does not match embedding dim");
  return model;
}

}  // namespace mview
