#include "taskfactor/pipeline.hpp"

#include "taskfactor/clustering.hpp"
#include "taskfactor/csv.hpp"
#include "taskfactor/embedding.hpp"
#include "taskfactor/factor_analysis.hpp"
#include "taskfactor/report_io.hpp"
#include "taskfactor/reporting.hpp"

#include <json.hpp>

#include <cstdio>
#include <ostream>

#ifndef TASKFACTOR_VERSION
#define TASKFACTOR_VERSION "0.0.0"
#endif

namespace taskfactor {

std::string version_string() { return TASKFACTOR_VERSION; }

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

using json = nlohmann::ordered_json;

class ReportWriter {
public:
  ReportWriter(std::filesystem::path root, std::ostream* log) : root_(std::move(root)), log_(log) {}

  void write(const std::filesystem::path& rel, const std::string& contents) {
    csv::write_file(root_ / rel, contents);
    written_.push_back(rel);
    if (log_ != nullptr) *log_ << "  wrote " << rel.generic_string() << '\n';
  }

  [[nodiscard]] const std::vector<std::filesystem::path>& written() const { return written_; }

private:
  std::filesystem::path root_;
  std::ostream* log_;
  std::vector<std::filesystem::path> written_;
};

json warnings_json(const Warnings& w) { return json(w); }

json config_json(const RunConfig& c) {
  json j;
  j["embedding_rank"] = c.embedding_rank;
  j["factors"] = c.factors ? json(*c.factors) : json("auto");
  j["cutoffs"] = c.cutoffs;
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["pa_replications"] = c.pa_replications;
  j["pa_percentile"] = c.pa_percentile;
  j["top_n"] = c.top_n;
  j["literal_eq1"] = c.literal_eq1;
  j["center"] = c.center;
  j["strict"] = c.strict;
  j["all_loadings"] = c.all_loadings;
  j["cluster_on"] = c.cluster_on == ClusterInput::features ? "features" : "similarity";
  j["intercept"] = to_string(c.intercept);
  j["scaling"] = to_string(c.scaling);
  j["bands"] = {{"short", {c.bands.short_lo, c.bands.short_hi}},
                {"mid", {c.bands.mid_lo, c.bands.mid_hi}},
                {"long_above", c.bands.long_above}};
  j["conventions"] = {{"ward_height", "delta_sse"},
                      {"covariance_denominator", "n-1"},
                      {"entropy_base", "bits"},
                      {"length_top_selection", "per_cell"},
                      {"robustness_error", "frobenius"}};
  return j;
}

} // namespace

std::string describe_formats() {
  return R"(taskfactor file formats
=======================

Performance table (input, one per model)
  UTF-8 CSV, comma separated, optional double-quoted fields.
  Header:  source_task,<target_id>,<target_id>,...
  Rows:    <source_id>,<score>,...      raw metric units
  Reserved row id __zero_shot__ holds the pretrained model's scores.
  The literal cell NA marks a missing value. Canonical output order is
  header, __zero_shot__, then sources in file order.

Task metadata (input, JSON)
  {"tasks": [{"id", "display_name", "roles": ["source"|"target", ...],
              "eval_mode": "generative"|"multiple_choice"|"not_applicable",
              "category", "mean_output_length" (> 0, words),
              "length_band": "band_1_3"|"band_6_12"|"band_gt40"|"other" (optional),
              "metric_name"}],
   "in_domain": [["<source_id>", "<target_id>"], ...]}
  in_domain entries may also be {"source_id": ..., "target_id": ...}.
  A missing length_band is derived from mean_output_length with the bands
  [1,3], [6,12], (40,inf); anything else is "other".

Run config (input, TOML subset)
  key = value lines, '#' comments, a [models] table of model_id = "path".
  Keys: metadata, output, embedding_rank, factors (integer or "auto"),
  cutoffs ([0.3, 0.6]), seed, pa_replications, pa_percentile, threads,
  top_n, literal_eq1, center, strict, all_loadings, cluster_on
  ("features"|"similarity"), intercept ("per_target"|"per_row"),
  scaling ("correlation"|"covariance"), band_short, band_mid,
  band_long_above.

Word counts (input)
  Whitespace-tokenized text, or CSV rows word,count (optional header).

Feature matrix (input for diversity)
  Labeled CSV: first column observation id, remaining columns numeric.

Report tree (output of `run`)
  normalized/<model>.csv    source_task x targets, normalized, NA = undefined
  aggregate.csv             model_id,source_task,<targets...>
  zero_shot.csv             model_id,mean_zero_shot,n_targets
  features.csv              target_task,dim_1..dim_D   (V Sigma^1/2 rows)
  similarity.csv            target_task x target_task cosine similarity
  similarity_ranking.csv    rank,target_task,mean_similarity
  dendrogram.nwk            Newick; branch length = Ward height difference
  dendrogram.json           merge list; height = increase in within-cluster SSE
  nfactors.csv              rank,eigenvalue,pa_threshold,
                            map_components_removed,map_avg_sq_partial
                            (computed on the residual matrix)
  residuals.csv             same layout as aggregate.csv
  dominant.csv              model_id,source_task,w[,gamma]
  residual_params.csv       target_task,dominant_loading,beta[,gamma]
  loadings.csv              target_task,factor_1..factor_L,communality,uniqueness
  significant_loadings_<c>.csv
                            target_task,factor,loading,sign,dominant
                            (unexplained targets carry NA)
  efa_diagnostics.json      uniquenesses, communalities, convergence, varimax trace
  communalities.csv         target_task,communality
  robustness.csv            training_models,held_out_model,n_rows,residual_dof,error_l2
  ranking.csv               source_task,rank_<model>...,harmonic_mean_score
  lengths.csv               source_band,target_band,pair_count,mean_all,mean_top<N>,top_sources
  lengths_top_sources.csv   target_band,position,source_task,mean_normalized,mean_output_length
  report.json               config, input hashes (FNV-1a 64), per-stage diagnostics

Exit codes: 0 success, 1 input/validation failure, 2 numeric failure.
)";
}

RunOutcome run_pipeline(const RunConfig& config, std::ostream* log) {
  RunOutcome outcome;
  outcome.report_dir = config.output_dir;
  std::string stage = "config";
  try {
    validate_run_config(config);
    ReportWriter out(config.output_dir, log);
    json report;
    report["tool"] = "taskfactor";
    report["version"] = version_string();
    report["config"] = config_json(config);

    // Inputs.
    stage = "load";
    std::vector<PerformanceTable> tables;
    json inputs = json::array();
    for (const auto& m : config.models) {
      const std::string text = csv::read_file(m.path);
      tables.push_back(parse_performance_table(text, m.model_id));
      inputs.push_back({{"model_id", m.model_id}, {"file", m.path.filename().string()}, {"fnv1a64", fnv1a_hex(text)}});
    }
    std::optional<TaskMetadata> meta;
    if (config.metadata) {
      const std::string text = csv::read_file(*config.metadata);
      meta = parse_task_metadata(text, config.bands);
      inputs.push_back({{"metadata", config.metadata->filename().string()}, {"fnv1a64", fnv1a_hex(text)}});
    }
    report["inputs"] = inputs;

    stage = "validate";
    if (meta) {
      const auto validation = validate_dataset(tables, meta->registry, meta->in_domain, config.strict);
      json findings = json::array();
      for (const auto& f : validation.findings) {
        findings.push_back({{"severity", f.severity == Severity::error ? "error" : "warning"},
                            {"code", f.code},
                            {"message", f.message}});
      }
      report["validation"] = {{"passed", validation.passed()}, {"findings", findings}};
      if (!validation.passed()) {
        std::string msg = "dataset validation failed:";
        for (const auto& f : validation.findings) {
          if (f.severity == Severity::error) msg += "\n  [" + f.code + "] " + f.message;
        }
        throw InputError(msg);
      }
    }

    // Normalization and aggregation.
    stage = "normalize";
    std::vector<NormalizedTable> normalized;
    Warnings norm_warnings;
    for (const auto& t : tables) {
      normalized.push_back(normalize_table(t, config.normalization_mode()));
      append_warnings(norm_warnings, normalized.back().warnings);
      out.write(std::filesystem::path("normalized") / (t.model_id + ".csv"), io::normalized_csv(normalized.back()));
    }
    const AggregateMatrix aggregate = aggregate_models(normalized);
    out.write("aggregate.csv", format_aggregate(aggregate));
    const auto zs = zero_shot_means(tables);
    out.write("zero_shot.csv", io::zero_shot_csv(zs));
    report["normalization"] = {{"mode", config.literal_eq1 ? "literal_row_max" : "per_target_best"},
                               {"rows", aggregate.matrix.rows()},
                               {"targets", aggregate.matrix.cols()},
                               {"warnings", warnings_json(norm_warnings)}};
    if (config.strict && aggregate.matrix.has_missing()) {
      throw InputError("aggregate matrix has " + std::to_string(aggregate.matrix.missing_count()) +
                       " missing cell(s); strict mode forbids dropping them");
    }

    // Embedding and similarity.
    stage = "embed";
    const TaskFeatures features = svd_task_features(aggregate.matrix, config.embedding_rank, config.center);
    const auto sim = cosine_similarity(features);
    const auto sim_rank = mean_similarity_ranking(sim.similarity);
    out.write("features.csv", io::features_csv(features));
    out.write("similarity.csv", io::similarity_csv(sim.similarity));
    out.write("similarity_ranking.csv", io::similarity_ranking_csv(sim_rank));
    report["embedding"] = {{"rank", features.rank()},
                           {"centered", features.centered},
                           {"singular_values", std::vector<double>(features.singular_values.begin(),
                                                                   features.singular_values.end())},
                           {"warnings", warnings_json(sim.warnings)}};

    stage = "cluster";
    const LabeledMatrix cluster_points =
        config.cluster_on == ClusterInput::features ? features.as_labeled() : sim.similarity;
    const Dendrogram dendrogram = ward_linkage(cluster_points);
    out.write("dendrogram.nwk", to_newick(dendrogram));
    out.write("dendrogram.json", to_merge_json(dendrogram));

    // Dominant factor, then factor count on the residuals.
    stage = "residualize";
    const ResidualResult residual = residualize_dominant(aggregate.matrix, config.intercept, {.scaling = config.scaling});

    stage = "nfactors";
    ParallelAnalysisOptions pa{config.pa_replications, config.pa_percentile, config.effective_seed(), config.threads};
    const FactorCountReport counts = select_factor_count(residual.residuals, pa);
    Eigen::Index n_factors = 0;
    Warnings count_warnings = counts.warnings;
    if (config.factors) {
      n_factors = *config.factors;
    } else {
      n_factors = std::min(counts.pa_retained, counts.map_retained);
      if (counts.pa_retained != counts.map_retained) {
        const std::string msg = "parallel analysis retains " + std::to_string(counts.pa_retained) +
                                " factor(s) but MAP retains " + std::to_string(counts.map_retained);
        if (config.strict) throw NumericError(msg);
        count_warnings.push_back(msg + "; using the smaller count");
      }
      if (n_factors < 1) throw NumericError("factor-count selection retained no factors");
    }
    out.write("nfactors.csv", io::factor_count_csv(counts));
    report["factor_count"] = {{"matrix", "residuals"},
                              {"pa_retained", counts.pa_retained},
                              {"map_retained", counts.map_retained},
                              {"replications", counts.replications},
                              {"percentile", counts.percentile},
                              {"seed", counts.seed},
                              {"selected", n_factors},
                              {"warnings", warnings_json(count_warnings)}};

    out.write("residuals.csv", format_aggregate(AggregateMatrix{aggregate.rows, residual.residuals}));
    out.write("dominant.csv", io::dominant_csv(aggregate, residual));
    out.write("residual_params.csv", io::residual_params_csv(residual));
    report["residualization"] = {{"intercept", to_string(residual.mode)},
                                 {"dominant_converged", residual.dominant.converged},
                                 {"warnings", warnings_json(residual.warnings)}};

    stage = "efa";
    const EfaModel unrotated = fit_efa(residual.residuals, n_factors, {.scaling = config.scaling});
    const VarimaxResult rotated = varimax_rotate(unrotated);
    const EfaModel& model = rotated.model;
    out.write("loadings.csv", io::loadings_csv(model));
    json significance = json::array();
    for (double cutoff : config.cutoffs) {
      const auto sig = significant_loadings(model, cutoff, config.all_loadings);
      out.write("significant_loadings_" + io::cutoff_tag(cutoff) + ".csv", io::significance_csv(sig));
      significance.push_back({{"cutoff", cutoff}, {"reported", sig.entries.size()}, {"unexplained", sig.unexplained}});
    }
    out.write("efa_diagnostics.json", io::efa_diagnostics_json(model, &rotated));
    out.write("communalities.csv", io::communalities_csv(model));
    report["efa"] = {{"factors", n_factors},
                     {"method", model.method},
                     {"converged", model.converged},
                     {"heywood", model.heywood},
                     {"varimax_sweeps", rotated.sweeps},
                     {"significance", significance},
                     {"warnings", warnings_json(model.warnings)}};

    stage = "robustness";
    std::vector<RobustnessResult> runs;
    json robustness = json::array();
    const auto models = aggregate.model_ids();
    if (models.size() >= 2) {
      for (const auto& held : models) {
        runs.push_back(loo_robustness(aggregate, held, {.factors = n_factors,
                                                        .efa = {.scaling = config.scaling},
                                                        .intercept = config.intercept}));
        robustness.push_back({{"held_out", held}, {"error_l2", runs.back().error_l2}});
      }
      out.write("robustness.csv", io::robustness_csv(runs));
    }
    report["robustness"] = robustness;

    stage = "rank";
    const RankingTable ranking = harmonic_rank(normalized);
    out.write("ranking.csv", io::ranking_csv(ranking));
    report["ranking"] = {{"top", ranking.rows.empty() ? json(nullptr) : json(ranking.rows.front().source_id)},
                         {"warnings", warnings_json(ranking.warnings)}};

    stage = "lengths";
    if (meta) {
      const auto lengths = length_group_table(aggregate, meta->registry, meta->in_domain, config.top_n);
      out.write("lengths.csv", io::length_table_csv(lengths));
      out.write("lengths_top_sources.csv", io::length_top_csv(lengths));
      report["lengths"] = {{"top_n", lengths.top_n}, {"warnings", warnings_json(lengths.warnings)}};
    }

    json files = json::array();
    for (const auto& p : out.written()) files.push_back(p.generic_string());
    report["files"] = files;
    out.write("report.json", report.dump(2) + "\n");

    outcome.written = out.written();
    outcome.exit_code = kExitOk;
    outcome.message = "ok";
  } catch (const InputError& e) {
    outcome.exit_code = kExitValidation;
    outcome.message = stage + ": " + e.what();
  } catch (const NumericError& e) {
    outcome.exit_code = kExitNumeric;
    outcome.message = stage + ": " + e.what();
  } catch (const std::filesystem::filesystem_error& e) {
    outcome.exit_code = kExitValidation;
    outcome.message = stage + ": " + e.what();
  }
  return outcome;
}

} // namespace taskfactor
