#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>

#include "mview/trainer.hpp"

namespace mview {

/// Text table: header `view dim V`, then `node_id v_1 ... v_d` per row.
void write_table_text(std::ostream& out, View view, const Matrix<double>& m, const Vocab& vocab);
Matrix<double> read_table_text(std::istream& in, View expected_view, Vocab& vocab);

/// Binary table: "MVEB", u32 name length + view name, u64 dim, u64 V, then per
/// row u32 id length + id bytes + dim little-endian f64 values.
void write_table_binary(std::ostream& out, View view, const Matrix<double>& m, const Vocab& vocab);
Matrix<double> read_table_binary(std::istream& in, View expected_view, Vocab& vocab);

/// `step,task,loss,sigma2,weight`
void write_history_csv(std::ostream& out, std::span<const HistoryRow> rows);

/// Directory layout:
///   embedding.<view>.input.txt / .context.txt  (text tables)
///   embedding.<view>.input.bin / .context.bin  (binary tables)
///   meta.tsv                                   (views, transforms, log_var values)
///   history.csv
void save_checkpoint(const std::filesystem::path& dir, const TrainedModel& model);
TrainedModel load_checkpoint(const std::filesystem::path& dir);

}  // namespace mview
