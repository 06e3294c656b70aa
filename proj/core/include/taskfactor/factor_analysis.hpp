#pragma once

#include "taskfactor/error.hpp"
#include "taskfactor/labeled_matrix.hpp"
#include "taskfactor/normalization.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace taskfactor {

// Orientation used throughout: target tasks are the variables (columns of A)
// and (model, source) rows are the observations.

enum class FactorScaling {
  correlation, ///< standardized columns (default)
  covariance,  ///< centered only; loadings in raw units
};

struct EfaOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;
  FactorScaling scaling = FactorScaling::correlation;
};

inline constexpr double kMinUniqueness = 1e-6;

struct EfaModel {
  std::vector<std::string> target_ids;
  Matrix loadings;      ///< K x L
  Vector uniquenesses;  ///< K, on the fitted scale
  Vector mean;          ///< per-target mean over observations
  Vector scale;         ///< per-target standard deviation (n-1)
  Matrix fitted_matrix; ///< correlation (or covariance) the model was fit to
  Matrix rotation;      ///< L x L; identity until rotated
  Eigen::Index n_obs = 0;
  std::string method = "principal_axis";
  FactorScaling scaling = FactorScaling::correlation;
  bool converged = false;
  int iterations = 0;
  bool heywood = false;
  Warnings warnings;

  [[nodiscard]] Eigen::Index n_targets() const { return loadings.rows(); }
  [[nodiscard]] Eigen::Index n_factors() const { return loadings.cols(); }

  /// Model-implied matrix Lambda Lambda^T + diag(psi).
  [[nodiscard]] Matrix implied() const;

  /// Loadings expressed in the raw units of A (scale-multiplied when fitted
  /// on correlations).
  [[nodiscard]] Matrix raw_loadings() const;
};

/// Principal-axis factoring with iterated communalities.
EfaModel fit_efa(const LabeledMatrix& a, Eigen::Index n_factors, const EfaOptions& options = {});

struct VarimaxOptions {
  int max_sweeps = 1000;
  double tolerance = 1e-8;
  bool kaiser_normalize = true;
};

struct VarimaxResult {
  EfaModel model;
  Matrix rotation; ///< rotated loadings = loadings * rotation
  std::vector<double> criterion_trace; ///< criterion after each sweep, starting with the initial value
  int sweeps = 0;
  bool converged = true;
};

/// Sum over factors of the variance of the squared loadings in that column.
double varimax_criterion(const Matrix& loadings);

/// Orthogonal Varimax rotation by pairwise planar sweeps. Afterwards each
/// column's largest-magnitude loading is positive and columns are ordered by
/// descending sum of squares.
VarimaxResult varimax_rotate(const EfaModel& model, const VarimaxOptions& options = {});

struct FactorScores {
  Matrix scores; ///< observations x L
  Warnings warnings;
};

/// Regression (Thomson) scores: Z R^-1 Lambda with Z standardized by the
/// model's own moments.
FactorScores factor_scores(const EfaModel& model, const LabeledMatrix& a);

struct ParallelAnalysisOptions {
  int replications = 100;
  double percentile = 95.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct FactorCountReport {
  Vector eigenvalues;        ///< sample correlation spectrum
  Vector pa_thresholds;      ///< per-rank random-data percentile
  Eigen::Index pa_retained = -1;
  Vector map_curve;          ///< index m = components removed; NaN when invalid
  Eigen::Index map_retained = -1;
  int replications = 0;
  double percentile = 0.0;
  std::uint64_t seed = 0;
  Warnings warnings;
};

/// Horn's parallel analysis. Replication r draws from a generator seeded by
/// a value derived from (seed, r), so results do not depend on `threads`.
FactorCountReport parallel_analysis(const LabeledMatrix& a, const ParallelAnalysisOptions& options = {});

/// Velicer's minimum average partial test over m = 0..K-2 removed components.
FactorCountReport velicer_map(const LabeledMatrix& a);

/// Both retention rules merged into one report.
FactorCountReport select_factor_count(const LabeledMatrix& a, const ParallelAnalysisOptions& options = {});

enum class InterceptMode {
  per_target, ///< gamma has one entry per target column (default)
  per_row,    ///< gamma has one entry per observation row
};

struct ResidualResult {
  Vector w;               ///< dominant-factor score per observation
  Vector beta;            ///< per target
  Vector gamma;           ///< per target, or per row in per_row mode
  LabeledMatrix residuals;
  EfaModel dominant;      ///< the one-factor fit that produced w
  InterceptMode mode = InterceptMode::per_target;
  Warnings warnings;
};

/// Remove the dominant factor: one-factor fit, scores w, then regress every
/// column of A on [w, 1].
ResidualResult residualize_dominant(const LabeledMatrix& a, InterceptMode mode = InterceptMode::per_target,
                                    const EfaOptions& options = {});

/// Apply a fitted residualization to new rows: score them with the dominant
/// model and subtract w beta^T plus the intercept.
LabeledMatrix apply_residualization(const ResidualResult& fit, const LabeledMatrix& rows);

struct LoadingEntry {
  std::string task_id;
  Eigen::Index factor = 0; ///< zero-based
  double loading = 0.0;
  bool dominant = false;
};

struct SignificanceReport {
  double cutoff = 0.0;
  std::vector<LoadingEntry> entries;
  std::vector<std::string> unexplained;
};

SignificanceReport significant_loadings(const EfaModel& model, double cutoff, bool all = false);

/// Sum of squared loadings per target on the standardized scale.
Vector communalities(const EfaModel& model);

struct RobustnessResult {
  std::string held_out_model;
  std::vector<std::string> training_models;
  Matrix w_test;     ///< held-out rows x L
  Matrix residuals;  ///< reconstruction error per held-out cell
  double error_l2 = 0.0;
  Matrix basis;      ///< K x L, raw units
  Vector mean;       ///< K
  Eigen::Index residual_dof = 0; ///< rows * (K - L)
};

/// Least-squares reconstruction of each row of `rows` as basis * w + mean.
RobustnessResult reconstruct_rows(const Matrix& basis, const Vector& mean, const Matrix& rows);

struct RobustnessOptions {
  Eigen::Index factors = 6;
  EfaOptions efa;
  InterceptMode intercept = InterceptMode::per_target;
};

/// Leave one model out: residualize and fit on the other models, reconstruct
/// the held-out model's residual rows.
RobustnessResult loo_robustness(const AggregateMatrix& a, const std::string& held_out,
                                const RobustnessOptions& options = {});

std::string to_string(FactorScaling s);
std::string to_string(InterceptMode m);

} // namespace taskfactor
