#include "taskfactor/reporting.hpp"

#include "taskfactor/csv.hpp"
#include "taskfactor/numkernels.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

namespace taskfactor {

std::string_view band_label(LengthBand b) {
  switch (b) {
  case LengthBand::band_1_3: return "1-3";
  case LengthBand::band_6_12: return "6-12";
  case LengthBand::band_gt40: return ">40";
  case LengthBand::other: return "other";
  }
  return "other";
}

double harmonic_mean(const std::vector<int>& ranks) {
  if (ranks.empty()) throw InputError("harmonic mean: no ranks");
  double inv = 0.0;
  for (int r : ranks) {
    if (r < 1) throw InputError("harmonic mean: ranks are 1-based");
    inv += 1.0 / r;
  }
  return static_cast<double>(ranks.size()) / inv;
}

RankingTable harmonic_rank(const std::vector<NormalizedTable>& per_model) {
  if (per_model.empty()) throw InputError("harmonic rank: no models");
  RankingTable table;
  const auto& ref = per_model.front().matrix;
  const std::set<std::string> sources(ref.row_labels.begin(), ref.row_labels.end());
  const std::set<std::string> targets(ref.col_labels.begin(), ref.col_labels.end());

  for (const auto& nt : per_model) {
    const auto& m = nt.matrix;
    if (std::set<std::string>(m.row_labels.begin(), m.row_labels.end()) != sources ||
        std::set<std::string>(m.col_labels.begin(), m.col_labels.end()) != targets) {
      throw InputError("harmonic rank: model '" + nt.model_id + "' has a different source or target set");
    }
    table.model_ids.push_back(nt.model_id);
  }

  for (const auto& id : ref.row_labels) table.rows.push_back({id, {}, 0.0});

  for (const auto& nt : per_model) {
    const auto& m = nt.matrix;
    std::vector<double> sums;
    std::size_t skipped = 0;
    for (const auto& id : ref.row_labels) {
      const Eigen::Index r = m.row_index(id);
      double s = 0.0;
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (m.missing(r, c)) {
          ++skipped;
        } else {
          s += m.values(r, c);
        }
      }
      sums.push_back(s);
    }
    if (skipped > 0) {
      table.warnings.push_back("harmonic rank: " + std::to_string(skipped) + " missing cell(s) in model '" +
                               nt.model_id + "' excluded from row sums");
    }
    for (std::size_t i = 0; i < sums.size(); ++i) {
      const auto better = std::count_if(sums.begin(), sums.end(), [&](double s) { return s > sums[i]; });
      table.rows[i].ranks.push_back(static_cast<int>(better) + 1);
    }
  }
  for (auto& row : table.rows) row.score = harmonic_mean(row.ranks);
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const RankingRow& a, const RankingRow& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.source_id < b.source_id;
  });
  return table;
}

const LengthCell& LengthCrossTable::cell(LengthBand source, LengthBand target) const {
  for (const auto& c : cells) {
    if (c.source_band == source && c.target_band == target) return c;
  }
  throw InputError("length table: no cell for the requested bands");
}

namespace {

struct Accumulator {
  double sum = 0.0;
  std::size_t count = 0;
};

std::vector<TopSource> top_sources(const std::map<std::string, Accumulator>& per_source, std::size_t top_n,
                                   const TaskRegistry& registry) {
  std::vector<TopSource> all;
  for (const auto& [id, acc] : per_source) {
    if (acc.count == 0) continue;
    all.push_back({id, acc.sum / static_cast<double>(acc.count), registry.at(id).mean_output_length});
  }
  std::stable_sort(all.begin(), all.end(), [](const TopSource& a, const TopSource& b) {
    if (a.mean != b.mean) return a.mean > b.mean;
    return a.source_id < b.source_id;
  });
  if (all.size() > top_n) all.resize(top_n);
  return all;
}

} // namespace

LengthCrossTable length_group_table(const AggregateMatrix& a, const TaskRegistry& registry,
                                    const InDomainMap& in_domain, std::size_t top_n) {
  if (top_n == 0) throw InputError("length table: top_n must be positive");
  LengthCrossTable table;
  table.top_n = top_n;

  auto band_of = [&](const std::string& id) {
    const auto it = registry.find(id);
    if (it == registry.end()) throw InputError("length table: task '" + id + "' has no metadata");
    return it->second.length_band;
  };
  std::set<std::string> warned;
  auto warn_other = [&](const std::string& id) {
    if (warned.insert(id).second) {
      table.warnings.push_back("length table: task '" + id + "' is outside the analyzed bands and is excluded");
    }
  };

  const auto& m = a.matrix;
  std::vector<LengthBand> target_bands;
  for (const auto& t : m.col_labels) {
    target_bands.push_back(band_of(t));
    if (target_bands.back() == LengthBand::other) warn_other(t);
  }

  std::map<std::pair<LengthBand, LengthBand>, std::map<std::string, Accumulator>> cell_sources;
  std::map<LengthBand, std::map<std::string, Accumulator>> target_band_sources;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const auto& source = a.rows[static_cast<std::size_t>(r)].source_id;
    const LengthBand sb = band_of(source);
    if (sb == LengthBand::other) {
      warn_other(source);
      continue;
    }
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const LengthBand tb = target_bands[static_cast<std::size_t>(c)];
      if (tb == LengthBand::other || m.missing(r, c)) continue;
      if (in_domain.contains(source, m.col_labels[static_cast<std::size_t>(c)])) continue;
      auto& acc = cell_sources[{sb, tb}][source];
      acc.sum += m.values(r, c);
      ++acc.count;
      auto& tacc = target_band_sources[tb][source];
      tacc.sum += m.values(r, c);
      ++tacc.count;
    }
  }

  for (LengthBand sb : kAnalyzedBands) {
    for (LengthBand tb : kAnalyzedBands) {
      LengthCell cell{sb, tb, 0, std::nullopt, std::nullopt, {}};
      const auto it = cell_sources.find({sb, tb});
      if (it != cell_sources.end()) {
        Accumulator total;
        for (const auto& [id, acc] : it->second) {
          total.sum += acc.sum;
          total.count += acc.count;
        }
        cell.pair_count = total.count;
        if (total.count > 0) {
          cell.mean_all = total.sum / static_cast<double>(total.count);
          cell.top_sources = top_sources(it->second, top_n, registry);
          Accumulator top;
          for (const auto& ts : cell.top_sources) {
            const auto& acc = it->second.at(ts.source_id);
            top.sum += acc.sum;
            top.count += acc.count;
          }
          cell.mean_top = top.sum / static_cast<double>(top.count);
        }
      }
      table.cells.push_back(std::move(cell));
    }
  }
  for (LengthBand tb : kAnalyzedBands) {
    const auto it = target_band_sources.find(tb);
    table.target_band_top[tb] = it == target_band_sources.end() ? std::vector<TopSource>{}
                                                                : top_sources(it->second, top_n, registry);
  }
  return table;
}

double word_entropy(const WordCounts& counts, EntropyBase base) {
  double total = 0.0;
  for (const auto& [word, c] : counts) total += static_cast<double>(c);
  if (counts.empty() || total <= 0.0) throw InputError("word entropy: no tokens");
  double h = 0.0;
  for (const auto& [word, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * (base == EntropyBase::bits ? std::log2(p) : std::log(p));
  }
  return h == 0.0 ? 0.0 : h;
}

WordCounts count_tokens(std::string_view text, bool lowercase) {
  WordCounts counts;
  std::string token;
  auto flush = [&] {
    if (!token.empty()) ++counts[token];
    token.clear();
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      token.push_back(lowercase ? static_cast<char>(std::tolower(static_cast<unsigned char>(ch))) : ch);
    }
  }
  flush();
  return counts;
}

WordCounts parse_word_counts(std::string_view csv_text) {
  WordCounts counts;
  const auto rows = csv::parse(csv_text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 2) throw InputError("word counts: expected 'word,count' rows");
    if (i == 0 && row[0] == "word" && row[1] == "count") continue;
    std::uint64_t c = 0;
    const auto res = std::from_chars(row[1].data(), row[1].data() + row[1].size(), c);
    if (res.ec != std::errc() || res.ptr != row[1].data() + row[1].size()) {
      throw InputError("word counts: invalid count '" + row[1] + "' for '" + row[0] + "'");
    }
    counts[row[0]] += c;
  }
  return counts;
}

double generalized_variance(const Matrix& features, Eigen::Index k) {
  if (features.rows() < 2) throw InputError("generalized variance: at least 2 observations required");
  if (k < 1 || k > features.cols()) {
    throw InputError("generalized variance: k must be in [1, " + std::to_string(features.cols()) + "]");
  }
  const auto eig = num::sym_eig(num::covariance_matrix(features));
  return eig.values.head(k).prod();
}

} // namespace taskfactor
