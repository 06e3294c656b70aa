// Command-line front end. Every subcommand reads and writes the same file
// formats as `run`, so the stages can be chained by hand.

#include "taskfactor/clustering.hpp"
#include "taskfactor/config.hpp"
#include "taskfactor/csv.hpp"
#include "taskfactor/embedding.hpp"
#include "taskfactor/factor_analysis.hpp"
#include "taskfactor/normalization.hpp"
#include "taskfactor/pipeline.hpp"
#include "taskfactor/report_io.hpp"
#include "taskfactor/reporting.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace taskfactor;

namespace {

struct Common {
  std::string input;
  std::string output = ".";
};

void write_out(const Common& c, const fs::path& name, const std::string& contents) {
  const fs::path path = fs::path(c.output) / name;
  csv::write_file(path, contents);
  std::cout << "wrote " << path.generic_string() << '\n';
}

void print_warnings(const Warnings& w) {
  for (const auto& msg : w) std::cerr << "warning: " << msg << '\n';
}

AggregateMatrix read_aggregate(const std::string& path) { return parse_aggregate(csv::read_file(path)); }

InterceptMode parse_intercept(const std::string& s) {
  if (s == "per_target") return InterceptMode::per_target;
  if (s == "per_row") return InterceptMode::per_row;
  throw InputError("intercept must be 'per_target' or 'per_row'");
}

FactorScaling parse_scaling(const std::string& s) {
  if (s == "correlation") return FactorScaling::correlation;
  if (s == "covariance") return FactorScaling::covariance;
  throw InputError("scaling must be 'correlation' or 'covariance'");
}

// ---- normalize ------------------------------------------------------------

struct NormalizeArgs {
  std::vector<std::string> models;
  std::string metadata;
  bool literal = false;
  bool strict = false;
  std::string output = ".";
};

int cmd_normalize(const NormalizeArgs& a) {
  std::vector<PerformanceTable> tables;
  for (const auto& entry : a.models) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("--model expects ID=PATH, got '" + entry + "'");
    tables.push_back(load_performance_table(entry.substr(eq + 1), entry.substr(0, eq)));
  }
  if (!a.metadata.empty()) {
    const auto meta = load_task_metadata(a.metadata);
    const auto report = validate_dataset(tables, meta.registry, meta.in_domain, a.strict);
    for (const auto& f : report.findings) {
      std::cerr << (f.severity == Severity::error ? "error" : "warning") << ": [" << f.code << "] " << f.message << '\n';
    }
    if (!report.passed()) throw InputError("dataset validation failed");
  }
  Common c{"", a.output};
  std::vector<NormalizedTable> normalized;
  for (const auto& t : tables) {
    normalized.push_back(normalize_table(t, a.literal ? NormalizationMode::literal_row_max
                                                      : NormalizationMode::per_target_best));
    print_warnings(normalized.back().warnings);
    write_out(c, fs::path("normalized") / (t.model_id + ".csv"), io::normalized_csv(normalized.back()));
  }
  write_out(c, "aggregate.csv", format_aggregate(aggregate_models(normalized)));
  write_out(c, "zero_shot.csv", io::zero_shot_csv(zero_shot_means(tables)));
  return kExitOk;
}

// ---- embed ----------------------------------------------------------------

struct EmbedArgs {
  Common io;
  Eigen::Index rank = kDefaultEmbeddingRank;
  bool center = false;
};

int cmd_embed(const EmbedArgs& a) {
  const auto agg = read_aggregate(a.io.input);
  const auto features = svd_task_features(agg.matrix, a.rank, a.center);
  const auto sim = cosine_similarity(features);
  print_warnings(sim.warnings);
  write_out(a.io, "features.csv", io::features_csv(features));
  write_out(a.io, "similarity.csv", io::similarity_csv(sim.similarity));
  write_out(a.io, "similarity_ranking.csv", io::similarity_ranking_csv(mean_similarity_ranking(sim.similarity)));
  return kExitOk;
}

// ---- cluster --------------------------------------------------------------

struct ClusterArgs {
  Common io;
  std::vector<Eigen::Index> cuts;
};

int cmd_cluster(const ClusterArgs& a) {
  const LabeledMatrix points = csv::parse_labeled(csv::read_file(a.io.input));
  const Dendrogram d = ward_linkage(points);
  write_out(a.io, "dendrogram.nwk", to_newick(d));
  write_out(a.io, "dendrogram.json", to_merge_json(d));
  for (auto k : a.cuts) write_out(a.io, "clusters_k" + std::to_string(k) + ".csv", io::clusters_csv(d, k));
  return kExitOk;
}

// ---- nfactors / efa -------------------------------------------------------

struct CountArgs {
  std::optional<std::uint64_t> seed;
  int replications = 100;
  double percentile = 95.0;
  unsigned threads = 1;
};

ParallelAnalysisOptions pa_options(const CountArgs& c) {
  return {c.replications, c.percentile, c.seed.value_or(0), c.threads};
}

void print_counts(const FactorCountReport& r) {
  std::cout << "parallel analysis: " << r.pa_retained << " factor(s) (" << r.replications << " replications, "
            << csv::format_number(r.percentile) << "th percentile, seed " << r.seed << ")\n";
  std::cout << "velicer MAP: " << r.map_retained << " factor(s)\n";
}

struct NfactorsArgs {
  Common io;
  CountArgs count;
};

int cmd_nfactors(const NfactorsArgs& a) {
  const auto agg = read_aggregate(a.io.input);
  const auto rep = select_factor_count(agg.matrix, pa_options(a.count));
  print_warnings(rep.warnings);
  print_counts(rep);
  write_out(a.io, "nfactors.csv", io::factor_count_csv(rep));
  return kExitOk;
}

struct EfaArgs {
  Common io;
  std::string factors = "6";
  std::vector<double> cutoffs{0.3, 0.6};
  bool all = false;
  bool no_rotate = false;
  std::string scaling = "correlation";
  CountArgs count;
};

int cmd_efa(const EfaArgs& a) {
  const auto agg = read_aggregate(a.io.input);
  Eigen::Index n_factors = 0;
  if (a.factors == "auto") {
    const auto rep = select_factor_count(agg.matrix, pa_options(a.count));
    print_warnings(rep.warnings);
    print_counts(rep);
    if (rep.pa_retained != rep.map_retained) {
      throw NumericError("parallel analysis and MAP disagree (" + std::to_string(rep.pa_retained) + " vs " +
                         std::to_string(rep.map_retained) + "); pass an explicit --factors");
    }
    n_factors = rep.pa_retained;
    if (n_factors < 1) throw NumericError("factor-count selection retained no factors");
  } else {
    try {
      n_factors = std::stol(a.factors);
    } catch (const std::exception&) {
      throw InputError("--factors must be a positive integer or 'auto'");
    }
  }
  std::cout << "extracting " << n_factors << " factor(s)\n";

  const EfaModel unrotated = fit_efa(agg.matrix, n_factors, {.scaling = parse_scaling(a.scaling)});
  std::optional<VarimaxResult> rotated;
  if (!a.no_rotate) rotated = varimax_rotate(unrotated);
  const EfaModel& model = rotated ? rotated->model : unrotated;
  print_warnings(model.warnings);
  write_out(a.io, "loadings.csv", io::loadings_csv(model));
  for (double cutoff : a.cutoffs) {
    write_out(a.io, "significant_loadings_" + io::cutoff_tag(cutoff) + ".csv",
              io::significance_csv(significant_loadings(model, cutoff, a.all)));
  }
  write_out(a.io, "efa_diagnostics.json", io::efa_diagnostics_json(model, rotated ? &*rotated : nullptr));
  write_out(a.io, "communalities.csv", io::communalities_csv(model));
  return kExitOk;
}

// ---- residualize ----------------------------------------------------------

struct ResidualizeArgs {
  Common io;
  std::string intercept = "per_target";
  std::string scaling = "correlation";
};

int cmd_residualize(const ResidualizeArgs& a) {
  const auto agg = read_aggregate(a.io.input);
  const auto r = residualize_dominant(agg.matrix, parse_intercept(a.intercept), {.scaling = parse_scaling(a.scaling)});
  print_warnings(r.warnings);
  write_out(a.io, "residuals.csv", format_aggregate(AggregateMatrix{agg.rows, r.residuals}));
  write_out(a.io, "dominant.csv", io::dominant_csv(agg, r));
  write_out(a.io, "residual_params.csv", io::residual_params_csv(r));
  return kExitOk;
}

// ---- robustness -----------------------------------------------------------

struct RobustnessArgs {
  Common io;
  Eigen::Index factors = 6;
  std::vector<std::string> held_out;
  std::string intercept = "per_target";
  std::string scaling = "correlation";
};

int cmd_robustness(const RobustnessArgs& a) {
  const auto agg = read_aggregate(a.io.input);
  const auto models = a.held_out.empty() ? agg.model_ids() : a.held_out;
  std::vector<RobustnessResult> runs;
  for (const auto& m : models) {
    runs.push_back(loo_robustness(agg, m, {.factors = a.factors,
                                           .efa = {.scaling = parse_scaling(a.scaling)},
                                           .intercept = parse_intercept(a.intercept)}));
    std::cout << "held out " << m << ": error_l2 = " << csv::format_number(runs.back().error_l2) << '\n';
  }
  write_out(a.io, "robustness.csv", io::robustness_csv(runs));
  return kExitOk;
}

// ---- rank / lengths -------------------------------------------------------

int cmd_rank(const Common& c) {
  const auto table = harmonic_rank(split_aggregate(read_aggregate(c.input)));
  print_warnings(table.warnings);
  write_out(c, "ranking.csv", io::ranking_csv(table));
  return kExitOk;
}

struct LengthsArgs {
  Common io;
  std::string metadata;
  std::size_t top_n = 5;
};

int cmd_lengths(const LengthsArgs& a) {
  const auto agg = read_aggregate(a.io.input);
  const auto meta = load_task_metadata(a.metadata);
  const auto table = length_group_table(agg, meta.registry, meta.in_domain, a.top_n);
  print_warnings(table.warnings);
  write_out(a.io, "lengths.csv", io::length_table_csv(table));
  write_out(a.io, "lengths_top_sources.csv", io::length_top_csv(table));
  return kExitOk;
}

// ---- diversity ------------------------------------------------------------

struct DiversityArgs {
  std::vector<std::string> texts;
  std::vector<std::string> counts;
  std::vector<std::string> features;
  std::vector<Eigen::Index> ks{8};
  bool nats = false;
  bool lowercase = false;
};

int cmd_diversity(const DiversityArgs& a) {
  if (a.texts.empty() && a.counts.empty() && a.features.empty()) {
    throw InputError("diversity: give at least one of --text, --counts, --features");
  }
  const char* unit = a.nats ? "nats" : "bits";
  const EntropyBase base = a.nats ? EntropyBase::nats : EntropyBase::bits;
  std::cout << "input,measure,k,value\n";
  for (const auto& p : a.texts) {
    const double h = word_entropy(count_tokens(csv::read_file(p), a.lowercase), base);
    std::cout << csv::escape_field(p) << ",word_entropy_" << unit << ",NA," << csv::format_number(h) << '\n';
  }
  for (const auto& p : a.counts) {
    const double h = word_entropy(parse_word_counts(csv::read_file(p)), base);
    std::cout << csv::escape_field(p) << ",word_entropy_" << unit << ",NA," << csv::format_number(h) << '\n';
  }
  for (const auto& p : a.features) {
    const LabeledMatrix m = csv::parse_labeled(csv::read_file(p));
    m.require_complete("features");
    for (auto k : a.ks) {
      std::cout << csv::escape_field(p) << ",generalized_variance," << k << ','
                << csv::format_number(generalized_variance(m.values, k)) << '\n';
    }
  }
  return kExitOk;
}

// ---- run ------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::string> models;
  std::map<std::string, std::string> flags;
};

int cmd_run(const RunArgs& a) {
  RunConfig config;
  if (!a.config.empty()) config = load_run_config(a.config);
  for (const auto& entry : a.models) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("--model expects ID=PATH, got '" + entry + "'");
    apply_config_setting(config, "models." + entry.substr(0, eq), entry.substr(eq + 1), {});
  }
  for (const auto& [key, value] : a.flags) apply_config_setting(config, key, value, {});
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError("--set expects KEY=VALUE, got '" + kv + "'");
    apply_config_setting(config, kv.substr(0, eq), kv.substr(eq + 1), {});
  }
  const RunOutcome outcome = run_pipeline(config, &std::cout);
  if (outcome.exit_code != kExitOk) {
    std::cerr << "taskfactor: " << outcome.message << '\n';
    return outcome.exit_code;
  }
  std::cout << "report written to " << outcome.report_dir.generic_string() << " (" << outcome.written.size()
            << " files)\n";
  return kExitOk;
}

void add_io(CLI::App* sub, Common& c, const char* input_help) {
  sub->add_option("-i,--input", c.input, input_help)->required()->check(CLI::ExistingFile);
  sub->add_option("-o,--output", c.output, "Output directory")->capture_default_str();
}

void add_counts(CLI::App* sub, CountArgs& c) {
  sub->add_option("--seed", c.seed, "Seed for parallel analysis");
  sub->add_option("--replications", c.replications, "Parallel-analysis replications")->capture_default_str();
  sub->add_option("--percentile", c.percentile, "Parallel-analysis percentile")->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"taskfactor: transfer-matrix analysis of visual instruction tasks"};
  app.require_subcommand(0, 1);
  bool describe = false;
  app.set_version_flag("--version", "taskfactor " + version_string());
  app.add_flag("--describe-formats", describe, "Print every input and output file format");

  NormalizeArgs norm;
  auto* s_norm = app.add_subcommand("normalize", "Normalize raw tables and stack them into aggregate.csv");
  s_norm->add_option("-m,--model", norm.models, "Performance table as ID=PATH (repeatable)")->required();
  s_norm->add_option("--metadata", norm.metadata, "Task metadata JSON for validation")->check(CLI::ExistingFile);
  s_norm->add_flag("--literal-eq1", norm.literal, "Use the per-row maximum as the denominator");
  s_norm->add_flag("--strict", norm.strict, "Fail on any blocking validation finding");
  s_norm->add_option("-o,--output", norm.output, "Output directory")->capture_default_str();

  EmbedArgs embed;
  auto* s_embed = app.add_subcommand("embed", "SVD task features and cosine similarity");
  add_io(s_embed, embed.io, "aggregate.csv");
  s_embed->add_option("-D,--rank", embed.rank, "Embedding rank")->capture_default_str();
  s_embed->add_flag("--center", embed.center, "Remove column means before the SVD");

  ClusterArgs cluster;
  auto* s_cluster = app.add_subcommand("cluster", "Ward clustering of target tasks");
  add_io(s_cluster, cluster.io, "features.csv or similarity.csv");
  s_cluster->add_option("-k,--cut", cluster.cuts, "Also write the partition into k clusters (repeatable)");

  NfactorsArgs nfac;
  auto* s_nfac = app.add_subcommand("nfactors", "Parallel analysis and Velicer MAP");
  add_io(s_nfac, nfac.io, "aggregate-format CSV (usually residuals.csv)");
  add_counts(s_nfac, nfac.count);

  EfaArgs efa;
  auto* s_efa = app.add_subcommand("efa", "Exploratory factor analysis with Varimax rotation");
  add_io(s_efa, efa.io, "aggregate-format CSV (usually residuals.csv)");
  s_efa->add_option("-L,--factors", efa.factors, "Factor count or 'auto'")->capture_default_str();
  s_efa->add_option("--cutoffs", efa.cutoffs, "Loading cut-offs")->capture_default_str();
  s_efa->add_flag("--all", efa.all, "Report every loading above the cut-off, not only the largest");
  s_efa->add_flag("--no-rotate", efa.no_rotate, "Skip the Varimax rotation");
  s_efa->add_option("--scaling", efa.scaling, "correlation or covariance")->capture_default_str();
  add_counts(s_efa, efa.count);

  ResidualizeArgs resid;
  auto* s_resid = app.add_subcommand("residualize", "Remove the dominant factor");
  add_io(s_resid, resid.io, "aggregate.csv");
  s_resid->add_option("--intercept", resid.intercept, "per_target or per_row")->capture_default_str();
  s_resid->add_option("--scaling", resid.scaling, "correlation or covariance")->capture_default_str();

  RobustnessArgs robust;
  auto* s_robust = app.add_subcommand("robustness", "Leave-one-model-out reconstruction error");
  add_io(s_robust, robust.io, "aggregate.csv");
  s_robust->add_option("-L,--factors", robust.factors, "Factor count")->capture_default_str();
  s_robust->add_option("--held-out", robust.held_out, "Model to hold out (repeatable; default all)");
  s_robust->add_option("--intercept", robust.intercept, "per_target or per_row")->capture_default_str();
  s_robust->add_option("--scaling", robust.scaling, "correlation or covariance")->capture_default_str();

  Common rank;
  auto* s_rank = app.add_subcommand("rank", "Harmonic-mean ranking of source tasks");
  add_io(s_rank, rank, "aggregate.csv");

  LengthsArgs lengths;
  auto* s_len = app.add_subcommand("lengths", "Transfer by output-length band");
  add_io(s_len, lengths.io, "aggregate.csv");
  s_len->add_option("--metadata", lengths.metadata, "Task metadata JSON")->required()->check(CLI::ExistingFile);
  s_len->add_option("--top-n", lengths.top_n, "Sources kept per cell")->capture_default_str();

  DiversityArgs div;
  auto* s_div = app.add_subcommand("diversity", "Word entropy and generalized variance (CSV on stdout)");
  s_div->add_option("--text", div.texts, "Whitespace-tokenized text file")->check(CLI::ExistingFile);
  s_div->add_option("--counts", div.counts, "word,count CSV")->check(CLI::ExistingFile);
  s_div->add_option("--features", div.features, "Labeled feature CSV")->check(CLI::ExistingFile);
  s_div->add_option("-k", div.ks, "Eigenvalues multiplied (repeatable)")->capture_default_str();
  s_div->add_flag("--nats", div.nats, "Natural-log entropy instead of bits");
  s_div->add_flag("--lowercase", div.lowercase, "Lowercase tokens before counting");

  RunArgs run;
  auto* s_run = app.add_subcommand("run", "Full pipeline from a config file");
  s_run->add_option("-c,--config", run.config, "Run config (TOML subset)")->check(CLI::ExistingFile);
  s_run->add_option("-m,--model", run.models, "Extra performance table as ID=PATH (repeatable)");
  s_run->add_option("--set", run.sets, "Override any config key as KEY=VALUE (repeatable)");
  const std::vector<std::pair<const char*, const char*>> run_options{
      {"metadata", "--metadata"},         {"output", "-o,--output"},
      {"embedding_rank", "-D,--rank"},    {"factors", "-L,--factors"},
      {"cutoffs", "--cutoffs"},           {"seed", "--seed"},
      {"pa_replications", "--replications"}, {"pa_percentile", "--percentile"},
      {"threads", "--threads"},           {"top_n", "--top-n"},
      {"cluster_on", "--cluster-on"},     {"intercept", "--intercept"},
      {"scaling", "--scaling"}};
  for (const auto& [key, flag] : run_options) {
    s_run->add_option_function<std::string>(flag, [&run, key = std::string(key)](const std::string& v) {
      run.flags[key] = v;
    }, "Overrides config key '" + std::string(key) + "'");
  }
  const std::vector<std::pair<const char*, const char*>> run_flags{{"literal_eq1", "--literal-eq1"},
                                                                   {"center", "--center"},
                                                                   {"strict", "--strict"},
                                                                   {"all_loadings", "--all-loadings"}};
  for (const auto& [key, flag] : run_flags) {
    s_run->add_flag_callback(flag, [&run, key = std::string(key)] { run.flags[key] = "true"; },
                             "Sets config key '" + std::string(key) + "'");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (describe) {
      std::cout << describe_formats();
      return kExitOk;
    }
    if (s_norm->parsed()) return cmd_normalize(norm);
    if (s_embed->parsed()) return cmd_embed(embed);
    if (s_cluster->parsed()) return cmd_cluster(cluster);
    if (s_nfac->parsed()) return cmd_nfactors(nfac);
    if (s_efa->parsed()) return cmd_efa(efa);
    if (s_resid->parsed()) return cmd_residualize(resid);
    if (s_robust->parsed()) return cmd_robustness(robust);
    if (s_rank->parsed()) return cmd_rank(rank);
    if (s_len->parsed()) return cmd_lengths(lengths);
    if (s_div->parsed()) return cmd_diversity(div);
    if (s_run->parsed()) return cmd_run(run);
    std::cout << app.help();
    return kExitOk;
  } catch (const InputError& e) {
    std::cerr << "taskfactor: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericError& e) {
    std::cerr << "taskfactor: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "taskfactor: " << e.what() << '\n';
    return kExitValidation;
  }
}
