#pragma once

#include "taskfactor/data_model.hpp"
#include "taskfactor/error.hpp"
#include "taskfactor/normalization.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace taskfactor {

struct RankingRow {
  std::string source_id;
  std::vector<int> ranks; ///< one per model, in RankingTable::model_ids order
  double score = 0.0;     ///< harmonic mean of ranks
};

struct RankingTable {
  std::vector<std::string> model_ids;
  std::vector<RankingRow> rows; ///< ascending by score, ties by id
  Warnings warnings;
};

double harmonic_mean(const std::vector<int>& ranks);

/// Rank sources within each model by descending row sum (competition
/// ranking, missing cells skipped), then score by harmonic mean of ranks.
RankingTable harmonic_rank(const std::vector<NormalizedTable>& per_model);

struct TopSource {
  std::string source_id;
  double mean = 0.0;
  std::optional<double> mean_output_length;
};

struct LengthCell {
  LengthBand source_band;
  LengthBand target_band;
  std::size_t pair_count = 0;
  std::optional<double> mean_all; ///< empty when no eligible pairs
  std::optional<double> mean_top;
  std::vector<TopSource> top_sources;
};

struct LengthCrossTable {
  std::size_t top_n = 5;
  std::vector<LengthCell> cells; ///< source band major, 3 x 3
  std::map<LengthBand, std::vector<TopSource>> target_band_top;
  Warnings warnings;

  [[nodiscard]] const LengthCell& cell(LengthBand source, LengthBand target) const;
};

inline constexpr LengthBand kAnalyzedBands[] = {LengthBand::band_1_3, LengthBand::band_6_12,
                                                LengthBand::band_gt40};

/// Mean normalized transfer by (source band, target band). In-domain pairs,
/// missing cells and `other`-banded tasks are excluded. "Top" restricts to the
/// `top_n` sources with the highest mean within the cell.
LengthCrossTable length_group_table(const AggregateMatrix& a, const TaskRegistry& registry,
                                    const InDomainMap& in_domain, std::size_t top_n = 5);

enum class EntropyBase { bits, nats };

using WordCounts = std::map<std::string, std::uint64_t>;

double word_entropy(const WordCounts& counts, EntropyBase base = EntropyBase::bits);
WordCounts count_tokens(std::string_view text, bool lowercase = false);
WordCounts parse_word_counts(std::string_view csv_text);

/// Product of the k largest eigenvalues of the sample covariance (n-1).
double generalized_variance(const Matrix& features, Eigen::Index k);

std::string_view band_label(LengthBand b);

} // namespace taskfactor
