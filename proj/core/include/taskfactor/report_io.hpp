#pragma once

#include "taskfactor/clustering.hpp"
#include "taskfactor/embedding.hpp"
#include "taskfactor/factor_analysis.hpp"
#include "taskfactor/normalization.hpp"
#include "taskfactor/reporting.hpp"

#include <string>
#include <vector>

// CSV/JSON renderings shared by the pipeline and the individual subcommands,
// so that both produce identical bytes for identical results.
namespace taskfactor::io {

std::string normalized_csv(const NormalizedTable& t);
std::string zero_shot_csv(const std::vector<ZeroShotMean>& means);
std::string features_csv(const TaskFeatures& f);
std::string similarity_csv(const LabeledMatrix& s);
std::string similarity_ranking_csv(const std::vector<MeanSimilarity>& ranking);
std::string clusters_csv(const Dendrogram& d, Eigen::Index k);
std::string factor_count_csv(const FactorCountReport& r);
std::string dominant_csv(const AggregateMatrix& a, const ResidualResult& r);
std::string residual_params_csv(const ResidualResult& r);
std::string loadings_csv(const EfaModel& m);
std::string significance_csv(const SignificanceReport& r);
std::string communalities_csv(const EfaModel& m);
std::string efa_diagnostics_json(const EfaModel& m, const VarimaxResult* rotation);
std::string robustness_csv(const std::vector<RobustnessResult>& runs);
std::string ranking_csv(const RankingTable& t);
std::string length_table_csv(const LengthCrossTable& t);
std::string length_top_csv(const LengthCrossTable& t);

/// File-name friendly rendering of a cutoff, e.g. 0.3 -> "0.3".
std::string cutoff_tag(double cutoff);

} // namespace taskfactor::io
