#pragma once

#include "taskfactor/data_model.hpp"
#include "taskfactor/factor_analysis.hpp"
#include "taskfactor/normalization.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace taskfactor {

struct ModelInput {
  std::string model_id;
  std::filesystem::path path;
};

enum class ClusterInput { features, similarity };

struct RunConfig {
  std::vector<ModelInput> models;
  std::optional<std::filesystem::path> metadata;
  std::filesystem::path output_dir = "taskfactor_out";

  Eigen::Index embedding_rank = 8;
  std::optional<Eigen::Index> factors = 6; ///< empty means "auto"
  std::vector<double> cutoffs{0.3, 0.6};
  std::optional<std::uint64_t> seed;
  int pa_replications = 100;
  double pa_percentile = 95.0;
  unsigned threads = 1;
  std::size_t top_n = 5;

  bool literal_eq1 = false;
  bool center = false;
  bool strict = false;
  bool all_loadings = false;
  ClusterInput cluster_on = ClusterInput::features;
  InterceptMode intercept = InterceptMode::per_target;
  FactorScaling scaling = FactorScaling::correlation;
  BandCutoffs bands;

  [[nodiscard]] NormalizationMode normalization_mode() const {
    return literal_eq1 ? NormalizationMode::literal_row_max : NormalizationMode::per_target_best;
  }
  [[nodiscard]] std::uint64_t effective_seed() const { return seed.value_or(0); }
};

/// Flat TOML subset: `key = value` lines, `#` comments, quoted strings,
/// numbers, booleans, `[a, b]` number arrays, and a `[models]` table mapping
/// model ids to CSV paths. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Apply one `key=value` override with the same syntax as the config file.
void apply_config_setting(RunConfig& config, const std::string& key, const std::string& value,
                          const std::filesystem::path& base_dir);

/// Throws InputError naming the offending field.
void validate_run_config(const RunConfig& config);

} // namespace taskfactor
