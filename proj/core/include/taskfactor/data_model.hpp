#pragma once

#include "taskfactor/labeled_matrix.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace taskfactor {

enum class Role { source, target };
enum class EvalMode { generative, multiple_choice, not_applicable };
enum class LengthBand { band_1_3, band_6_12, band_gt40, other };

std::string to_string(Role r);
std::string to_string(EvalMode m);
std::string to_string(LengthBand b);
Role parse_role(const std::string& s);
EvalMode parse_eval_mode(const std::string& s);
LengthBand parse_length_band(const std::string& s);

/// Output-length band edges in words: [short_lo, short_hi], [mid_lo, mid_hi],
/// (long_above, inf). Anything else is `other`.
struct BandCutoffs {
  double short_lo = 1.0;
  double short_hi = 3.0;
  double mid_lo = 6.0;
  double mid_hi = 12.0;
  double long_above = 40.0;
};

LengthBand band_for_length(double mean_words, const BandCutoffs& cutoffs = {});

struct TaskMeta {
  std::string id;
  std::string display_name;
  std::set<Role> roles;
  EvalMode eval_mode = EvalMode::not_applicable;
  std::string category;
  std::optional<double> mean_output_length;
  LengthBand length_band = LengthBand::other;
  std::string metric_name;

  [[nodiscard]] bool has_role(Role r) const { return roles.contains(r); }
};

using TaskRegistry = std::map<std::string, TaskMeta>;

/// Explicit (source_id, target_id) pairs drawn from the same dataset.
struct InDomainMap {
  std::set<std::pair<std::string, std::string>> pairs;

  [[nodiscard]] bool contains(const std::string& source, const std::string& target) const {
    return pairs.contains({source, target});
  }
};

struct TaskMetadata {
  TaskRegistry registry;
  InDomainMap in_domain;
};

/// One model's raw transfer scores: sources x targets plus the zero-shot row.
struct PerformanceTable {
  std::string model_id;
  std::vector<std::string> source_ids;
  std::vector<std::string> target_ids;
  Matrix values;
  Mask missing;
  Vector zero_shot;
  std::vector<bool> zero_shot_missing;

  [[nodiscard]] Eigen::Index n_sources() const { return values.rows(); }
  [[nodiscard]] Eigen::Index n_targets() const { return values.cols(); }
};

inline constexpr const char* kZeroShotRow = "__zero_shot__";
inline constexpr const char* kSourceHeader = "source_task";
inline constexpr const char* kMissingSentinel = "NA";

PerformanceTable parse_performance_table(const std::string& csv_text, const std::string& model_id);
PerformanceTable load_performance_table(const std::filesystem::path& path, const std::string& model_id);

/// Canonical layout: header, zero-shot row, then sources in table order.
std::string format_performance_table(const PerformanceTable& table);
void save_performance_table(const PerformanceTable& table, const std::filesystem::path& path);

TaskMetadata parse_task_metadata(const std::string& json_text, const BandCutoffs& cutoffs = {});
TaskMetadata load_task_metadata(const std::filesystem::path& path, const BandCutoffs& cutoffs = {});

enum class Severity { error, warning };

struct Finding {
  Severity severity;
  std::string code;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  [[nodiscard]] bool passed() const;
  [[nodiscard]] std::size_t error_count() const;
  [[nodiscard]] bool has(const std::string& code) const;
};

/// Cross-checks tables against each other and against the metadata. Never
/// throws unless `strict` is set and a blocking finding exists.
ValidationReport validate_dataset(const std::vector<PerformanceTable>& tables,
                                  const TaskRegistry& registry,
                                  const InDomainMap& in_domain,
                                  bool strict = false);

} // namespace taskfactor
