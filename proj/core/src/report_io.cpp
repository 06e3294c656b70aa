#include "taskfactor/report_io.hpp"

#include "taskfactor/csv.hpp"

#include <json.hpp>

#include <sstream>

namespace taskfactor::io {

namespace {

using csv::format_number;

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string("NA"); }

} // namespace

std::string cutoff_tag(double cutoff) { return format_number(cutoff); }

std::string normalized_csv(const NormalizedTable& t) { return csv::format_labeled(t.matrix, kSourceHeader); }

std::string zero_shot_csv(const std::vector<ZeroShotMean>& means) {
  std::ostringstream out;
  out << "model_id,mean_zero_shot,n_targets\n";
  for (const auto& m : means) out << csv::escape_field(m.model_id) << ',' << format_number(m.mean) << ',' << m.n_targets << '\n';
  return out.str();
}

std::string features_csv(const TaskFeatures& f) { return csv::format_labeled(f.as_labeled(), "target_task"); }

std::string similarity_csv(const LabeledMatrix& s) { return csv::format_labeled(s, "target_task"); }

std::string similarity_ranking_csv(const std::vector<MeanSimilarity>& ranking) {
  std::ostringstream out;
  out << "rank,target_task,mean_similarity\n";
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    out << i + 1 << ',' << csv::escape_field(ranking[i].task_id) << ',' << format_number(ranking[i].mean) << '\n';
  }
  return out.str();
}

std::string clusters_csv(const Dendrogram& d, Eigen::Index k) {
  std::ostringstream out;
  out << "cluster,target_task\n";
  const auto groups = cut_tree(d, k);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (const auto& id : groups[g]) out << g + 1 << ',' << csv::escape_field(id) << '\n';
  }
  return out.str();
}

std::string factor_count_csv(const FactorCountReport& r) {
  std::ostringstream out;
  out << "rank,eigenvalue,pa_threshold,map_components_removed,map_avg_sq_partial\n";
  for (Eigen::Index i = 0; i < r.eigenvalues.size(); ++i) {
    out << i + 1 << ',' << format_number(r.eigenvalues(i)) << ','
        << (i < r.pa_thresholds.size() ? format_number(r.pa_thresholds(i)) : std::string("NA")) << ',' << i << ','
        << (i < r.map_curve.size() ? format_number(r.map_curve(i)) : std::string("NA")) << '\n';
  }
  return out.str();
}

std::string dominant_csv(const AggregateMatrix& a, const ResidualResult& r) {
  std::ostringstream out;
  const bool per_row = r.mode == InterceptMode::per_row;
  out << "model_id,source_task,w" << (per_row ? ",gamma" : "") << '\n';
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    out << csv::escape_field(a.rows[i].model_id) << ',' << csv::escape_field(a.rows[i].source_id) << ','
        << format_number(r.w(idx));
    if (per_row) out << ',' << format_number(r.gamma(idx));
    out << '\n';
  }
  return out.str();
}

std::string residual_params_csv(const ResidualResult& r) {
  std::ostringstream out;
  const bool per_target = r.mode == InterceptMode::per_target;
  out << "target_task,dominant_loading,beta" << (per_target ? ",gamma" : "") << '\n';
  for (Eigen::Index j = 0; j < r.beta.size(); ++j) {
    out << csv::escape_field(r.dominant.target_ids[static_cast<std::size_t>(j)]) << ','
        << format_number(r.dominant.loadings(j, 0)) << ',' << format_number(r.beta(j));
    if (per_target) out << ',' << format_number(r.gamma(j));
    out << '\n';
  }
  return out.str();
}

std::string loadings_csv(const EfaModel& m) {
  std::ostringstream out;
  out << "target_task";
  for (Eigen::Index l = 0; l < m.n_factors(); ++l) out << ",factor_" << l + 1;
  out << ",communality,uniqueness\n";
  const Vector h = communalities(m);
  for (Eigen::Index j = 0; j < m.n_targets(); ++j) {
    out << csv::escape_field(m.target_ids[static_cast<std::size_t>(j)]);
    for (Eigen::Index l = 0; l < m.n_factors(); ++l) out << ',' << format_number(m.loadings(j, l));
    out << ',' << format_number(h(j)) << ',' << format_number(m.uniquenesses(j)) << '\n';
  }
  return out.str();
}

std::string significance_csv(const SignificanceReport& r) {
  std::ostringstream out;
  out << "target_task,factor,loading,sign,dominant\n";
  for (const auto& e : r.entries) {
    out << csv::escape_field(e.task_id) << ',' << e.factor + 1 << ',' << format_number(e.loading) << ','
        << (e.loading < 0 ? '-' : '+') << ',' << (e.dominant ? "true" : "false") << '\n';
  }
  for (const auto& id : r.unexplained) out << csv::escape_field(id) << ",NA,NA,NA,false\n";
  return out.str();
}

std::string communalities_csv(const EfaModel& m) {
  std::ostringstream out;
  out << "target_task,communality\n";
  const Vector h = communalities(m);
  for (Eigen::Index j = 0; j < m.n_targets(); ++j) {
    out << csv::escape_field(m.target_ids[static_cast<std::size_t>(j)]) << ',' << format_number(h(j)) << '\n';
  }
  return out.str();
}

std::string efa_diagnostics_json(const EfaModel& m, const VarimaxResult* rotation) {
  nlohmann::ordered_json j;
  j["method"] = m.method;
  j["scaling"] = to_string(m.scaling);
  j["n_obs"] = m.n_obs;
  j["n_factors"] = m.n_factors();
  j["converged"] = m.converged;
  j["iterations"] = m.iterations;
  j["heywood"] = m.heywood;
  j["target_ids"] = m.target_ids;
  j["uniquenesses"] = std::vector<double>(m.uniquenesses.begin(), m.uniquenesses.end());
  const Vector h = communalities(m);
  j["communalities"] = std::vector<double>(h.begin(), h.end());
  if (rotation != nullptr) {
    j["varimax"]["converged"] = rotation->converged;
    j["varimax"]["sweeps"] = rotation->sweeps;
    j["varimax"]["criterion_trace"] = rotation->criterion_trace;
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < rotation->rotation.rows(); ++r) {
      std::vector<double> row(rotation->rotation.row(r).begin(), rotation->rotation.row(r).end());
      rows.push_back(row);
    }
    j["varimax"]["rotation"] = rows;
  }
  j["warnings"] = m.warnings;
  return j.dump(2) + "\n";
}

std::string robustness_csv(const std::vector<RobustnessResult>& runs) {
  std::ostringstream out;
  out << "training_models,held_out_model,n_rows,residual_dof,error_l2\n";
  for (const auto& r : runs) {
    std::string train;
    for (const auto& m : r.training_models) train += (train.empty() ? "" : ";") + m;
    out << csv::escape_field(train) << ',' << csv::escape_field(r.held_out_model) << ',' << r.residuals.rows() << ','
        << r.residual_dof << ',' << format_number(r.error_l2) << '\n';
  }
  return out.str();
}

std::string ranking_csv(const RankingTable& t) {
  std::ostringstream out;
  out << "source_task";
  for (const auto& m : t.model_ids) out << ',' << csv::escape_field("rank_" + m);
  out << ",harmonic_mean_score\n";
  for (const auto& row : t.rows) {
    out << csv::escape_field(row.source_id);
    for (int r : row.ranks) out << ',' << r;
    out << ',' << format_number(row.score) << '\n';
  }
  return out.str();
}

std::string length_table_csv(const LengthCrossTable& t) {
  std::ostringstream out;
  out << "source_band,target_band,pair_count,mean_all,mean_top" << t.top_n << ",top_sources\n";
  for (const auto& c : t.cells) {
    std::string tops;
    for (const auto& s : c.top_sources) {
      if (!tops.empty()) tops += "; ";
      tops += s.source_id + " (" + opt_number(s.mean_output_length) + ")";
    }
    out << band_label(c.source_band) << ',' << band_label(c.target_band) << ',' << c.pair_count << ','
        << opt_number(c.mean_all) << ',' << opt_number(c.mean_top) << ',' << csv::escape_field(tops) << '\n';
  }
  return out.str();
}

std::string length_top_csv(const LengthCrossTable& t) {
  std::ostringstream out;
  out << "target_band,position,source_task,mean_normalized,mean_output_length\n";
  for (LengthBand b : kAnalyzedBands) {
    const auto it = t.target_band_top.find(b);
    if (it == t.target_band_top.end()) continue;
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      const auto& s = it->second[i];
      out << band_label(b) << ',' << i + 1 << ',' << csv::escape_field(s.source_id) << ',' << format_number(s.mean)
          << ',' << opt_number(s.mean_output_length) << '\n';
    }
  }
  return out.str();
}

} // namespace taskfactor::io
