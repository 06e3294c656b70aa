#include "taskfactor/normalization.hpp"

#include "taskfactor/csv.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace taskfactor {

NormalizedTable normalize_table(const PerformanceTable& table, NormalizationMode mode) {
  const Eigen::Index n = table.n_sources();
  const Eigen::Index k = table.n_targets();
  if (n < 1 || k < 1) throw InputError("normalize: table '" + table.model_id + "' has no source rows");
  if (table.zero_shot.size() != k) throw InputError("normalize: zero-shot vector missing for '" + table.model_id + "'");

  NormalizedTable out{table.model_id, LabeledMatrix(table.source_ids, table.target_ids), {}};
  LabeledMatrix& a = out.matrix;

  if (mode == NormalizationMode::per_target_best) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto& target = table.target_ids[static_cast<std::size_t>(j)];
      double best = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (table.missing(i, j)) continue;
        best = std::max(best, table.values(i, j));
        any = true;
      }
      const double zero = table.zero_shot(j);
      const bool zero_missing = table.zero_shot_missing[static_cast<std::size_t>(j)];
      const double denom = best - zero;
      if (!any || zero_missing || !(std::abs(denom) >= kDenominatorFloor)) {
        for (Eigen::Index i = 0; i < n; ++i) a.set_missing(i, j);
        out.warnings.push_back("normalize[" + table.model_id + "]: column '" + target + "' undefined (" +
                               (!any            ? std::string("all cells missing")
                                : zero_missing ? std::string("zero-shot missing")
                                                : std::string("best source equals zero-shot")) +
                               ")");
        continue;
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        if (table.missing(i, j)) {
          a.set_missing(i, j);
        } else {
          a.set(i, j, (table.values(i, j) - zero) / denom);
        }
      }
    }
    return out;
  }

  // Literal reading: the maximum runs over targets within each source row.
  std::size_t undefined = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_best = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (table.missing(i, j)) continue;
      row_best = std::max(row_best, table.values(i, j));
      any = true;
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      const double denom = row_best - table.zero_shot(j);
      if (!any || table.missing(i, j) || table.zero_shot_missing[static_cast<std::size_t>(j)] ||
          !(std::abs(denom) >= kDenominatorFloor)) {
        a.set_missing(i, j);
        if (!table.missing(i, j)) ++undefined;
        continue;
      }
      a.set(i, j, (table.values(i, j) - table.zero_shot(j)) / denom);
    }
  }
  if (undefined > 0) {
    out.warnings.push_back("normalize[" + table.model_id + "]: " + std::to_string(undefined) +
                           " cell(s) undefined under the literal row-max denominator");
  }
  return out;
}

std::string row_label(const RowKey& key) { return key.model_id + "/" + key.source_id; }

std::vector<std::string> AggregateMatrix::model_ids() const {
  std::vector<std::string> ids;
  for (const auto& r : rows) {
    if (std::find(ids.begin(), ids.end(), r.model_id) == ids.end()) ids.push_back(r.model_id);
  }
  return ids;
}

std::vector<Eigen::Index> AggregateMatrix::rows_of_model(const std::string& model_id) const {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].model_id == model_id) idx.push_back(static_cast<Eigen::Index>(i));
  }
  return idx;
}

AggregateMatrix aggregate_models(const std::vector<NormalizedTable>& normalized) {
  if (normalized.empty()) throw InputError("aggregate: no normalized matrices given");
  const auto& cols = normalized.front().matrix.col_labels;
  Eigen::Index total = 0;
  std::set<std::string> models;
  for (const auto& nt : normalized) {
    if (nt.matrix.col_labels != cols) {
      throw InputError("aggregate: target columns of model '" + nt.model_id + "' do not match '" +
                       normalized.front().model_id + "'");
    }
    if (!models.insert(nt.model_id).second) throw InputError("aggregate: duplicate model '" + nt.model_id + "'");
    total += nt.matrix.rows();
  }

  AggregateMatrix agg;
  std::vector<std::string> labels;
  for (const auto& nt : normalized) {
    for (const auto& src : nt.matrix.row_labels) {
      agg.rows.push_back({nt.model_id, src});
      labels.push_back(row_label(agg.rows.back()));
    }
  }
  agg.matrix = LabeledMatrix(labels, cols);
  Eigen::Index offset = 0;
  for (const auto& nt : normalized) {
    agg.matrix.values.middleRows(offset, nt.matrix.rows()) = nt.matrix.values;
    agg.matrix.missing.middleRows(offset, nt.matrix.rows()) = nt.matrix.missing;
    offset += nt.matrix.rows();
  }
  assert(offset == total);
  agg.matrix.check_shape();
  return agg;
}

std::string format_aggregate(const AggregateMatrix& a) {
  std::ostringstream out;
  csv::Row header{"model_id", kSourceHeader};
  header.insert(header.end(), a.matrix.col_labels.begin(), a.matrix.col_labels.end());
  out << csv::join(header) << '\n';
  for (Eigen::Index r = 0; r < a.matrix.rows(); ++r) {
    const auto& key = a.rows[static_cast<std::size_t>(r)];
    out << csv::escape_field(key.model_id) << ',' << csv::escape_field(key.source_id);
    for (Eigen::Index c = 0; c < a.matrix.cols(); ++c) {
      out << ',' << (a.matrix.missing(r, c) ? std::string(kMissingSentinel) : csv::format_number(a.matrix.values(r, c)));
    }
    out << '\n';
  }
  return out.str();
}

AggregateMatrix parse_aggregate(const std::string& csv_text) {
  const auto rows = csv::parse(csv_text);
  if (rows.empty()) throw InputError("aggregate csv: empty file");
  const auto& header = rows.front();
  if (header.size() < 3 || header[0] != "model_id" || header[1] != kSourceHeader) {
    throw InputError("aggregate csv: header must start with 'model_id,source_task'");
  }
  AggregateMatrix agg;
  std::vector<std::string> cols(header.begin() + 2, header.end());
  std::vector<std::string> labels;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != header.size()) {
      throw InputError("aggregate csv: row " + std::to_string(i) + " has the wrong number of fields");
    }
    agg.rows.push_back({rows[i][0], rows[i][1]});
    labels.push_back(row_label(agg.rows.back()));
  }
  if (agg.rows.empty()) throw InputError("aggregate csv: no data rows");
  agg.matrix = LabeledMatrix(labels, cols);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    for (std::size_t j = 2; j < header.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(i - 1);
      const auto c = static_cast<Eigen::Index>(j - 2);
      if (rows[i][j] == kMissingSentinel) {
        agg.matrix.set_missing(r, c);
      } else {
        agg.matrix.set(r, c, csv::parse_number(rows[i][j], "aggregate csv row " + std::to_string(i)));
      }
    }
  }
  agg.matrix.check_shape();
  return agg;
}

std::vector<NormalizedTable> split_aggregate(const AggregateMatrix& a) {
  std::vector<NormalizedTable> out;
  for (const auto& model : a.model_ids()) {
    const auto idx = a.rows_of_model(model);
    LabeledMatrix m = a.matrix.select_rows(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) m.row_labels[i] = a.rows[static_cast<std::size_t>(idx[i])].source_id;
    out.push_back({model, std::move(m), {}});
  }
  return out;
}

std::vector<ZeroShotMean> zero_shot_means(const std::vector<PerformanceTable>& tables) {
  std::vector<ZeroShotMean> out;
  for (const auto& t : tables) {
    if (t.n_targets() == 0) throw InputError("zero-shot mean: model '" + t.model_id + "' has no targets");
    double sum = 0.0;
    std::size_t count = 0;
    for (Eigen::Index j = 0; j < t.n_targets(); ++j) {
      if (t.zero_shot_missing[static_cast<std::size_t>(j)]) continue;
      sum += t.zero_shot(j);
      ++count;
    }
    if (count == 0) throw InputError("zero-shot mean: model '" + t.model_id + "' has only missing zero-shot cells");
    out.push_back({t.model_id, sum / static_cast<double>(count), count});
  }
  return out;
}

} // namespace taskfactor
