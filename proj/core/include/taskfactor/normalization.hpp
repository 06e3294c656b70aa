#pragma once

#include "taskfactor/data_model.hpp"
#include "taskfactor/error.hpp"
#include "taskfactor/labeled_matrix.hpp"

#include <string>
#include <vector>

namespace taskfactor {

/// Denominator choice for the zero-shot / best-source normalization.
enum class NormalizationMode {
  /// best_j = max over source rows of column j (default).
  per_target_best,
  /// best = max over targets of row i, the subscript as literally printed.
  literal_row_max,
};

struct NormalizedTable {
  std::string model_id;
  LabeledMatrix matrix;
  Warnings warnings;
};

inline constexpr double kDenominatorFloor = 1e-9;

/// a_ij = (b_ij - b_0j) / (best - b_0j). Columns (or, in literal mode, cells)
/// whose denominator magnitude is below kDenominatorFloor become missing.
NormalizedTable normalize_table(const PerformanceTable& table,
                                NormalizationMode mode = NormalizationMode::per_target_best);

struct RowKey {
  std::string model_id;
  std::string source_id;

  auto operator<=>(const RowKey&) const = default;
};

/// Normalized per-model matrices stacked row-wise.
struct AggregateMatrix {
  std::vector<RowKey> rows;
  LabeledMatrix matrix; ///< row labels are "model/source"

  [[nodiscard]] std::vector<std::string> model_ids() const;
  [[nodiscard]] std::vector<Eigen::Index> rows_of_model(const std::string& model_id) const;
  [[nodiscard]] const std::vector<std::string>& target_ids() const { return matrix.col_labels; }
};

std::string row_label(const RowKey& key);

AggregateMatrix aggregate_models(const std::vector<NormalizedTable>& normalized);

/// CSV with leading `model_id,source_task` columns.
std::string format_aggregate(const AggregateMatrix& a);
AggregateMatrix parse_aggregate(const std::string& csv_text);

/// Per-model LabeledMatrix (rows = sources) recovered from an aggregate.
std::vector<NormalizedTable> split_aggregate(const AggregateMatrix& a);

struct ZeroShotMean {
  std::string model_id;
  double mean;
  std::size_t n_targets;
};

std::vector<ZeroShotMean> zero_shot_means(const std::vector<PerformanceTable>& tables);

} // namespace taskfactor
