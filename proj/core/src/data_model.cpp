#include "taskfactor/data_model.hpp"

#include "taskfactor/csv.hpp"
#include "taskfactor/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace taskfactor {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& s, const std::pair<const char*, Enum> (&table)[N], const char* what) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  throw InputError(std::string("unknown ") + what + " '" + s + "'");
}

constexpr std::pair<const char*, Role> kRoles[] = {{"source", Role::source}, {"target", Role::target}};
constexpr std::pair<const char*, EvalMode> kModes[] = {{"generative", EvalMode::generative},
                                                       {"multiple_choice", EvalMode::multiple_choice},
                                                       {"not_applicable", EvalMode::not_applicable}};
constexpr std::pair<const char*, LengthBand> kBands[] = {{"band_1_3", LengthBand::band_1_3},
                                                         {"band_6_12", LengthBand::band_6_12},
                                                         {"band_gt40", LengthBand::band_gt40},
                                                         {"other", LengthBand::other}};

} // namespace

std::string to_string(Role r) { return r == Role::source ? "source" : "target"; }

std::string to_string(EvalMode m) {
  switch (m) {
  case EvalMode::generative: return "generative";
  case EvalMode::multiple_choice: return "multiple_choice";
  case EvalMode::not_applicable: return "not_applicable";
  }
  return "not_applicable";
}

std::string to_string(LengthBand b) {
  switch (b) {
  case LengthBand::band_1_3: return "band_1_3";
  case LengthBand::band_6_12: return "band_6_12";
  case LengthBand::band_gt40: return "band_gt40";
  case LengthBand::other: return "other";
  }
  return "other";
}

Role parse_role(const std::string& s) { return parse_enum(s, kRoles, "role"); }
EvalMode parse_eval_mode(const std::string& s) { return parse_enum(s, kModes, "eval_mode"); }
LengthBand parse_length_band(const std::string& s) { return parse_enum(s, kBands, "length_band"); }

LengthBand band_for_length(double mean_words, const BandCutoffs& c) {
  if (mean_words >= c.short_lo && mean_words <= c.short_hi) return LengthBand::band_1_3;
  if (mean_words >= c.mid_lo && mean_words <= c.mid_hi) return LengthBand::band_6_12;
  if (mean_words > c.long_above) return LengthBand::band_gt40;
  return LengthBand::other;
}

PerformanceTable parse_performance_table(const std::string& csv_text, const std::string& model_id) {
  const auto rows = csv::parse(csv_text);
  const std::string where = "performance table '" + model_id + "'";
  if (rows.empty()) throw InputError(where + ": empty table");
  const auto& header = rows.front();
  if (header.front() != kSourceHeader) {
    throw InputError(where + ": first header cell must be '" + std::string(kSourceHeader) + "'");
  }

  PerformanceTable t;
  t.model_id = model_id;
  t.target_ids.assign(header.begin() + 1, header.end());
  std::set<std::string> seen;
  for (const auto& id : t.target_ids) {
    if (id.empty()) throw InputError(where + ": empty target id");
    if (!seen.insert(id).second) throw InputError(where + ": duplicate target id '" + id + "'");
  }

  std::vector<const csv::Row*> source_rows;
  const csv::Row* zero_row = nullptr;
  seen.clear();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != header.size()) {
      throw InputError(where + ": row '" + row.front() + "' has " + std::to_string(row.size()) +
                       " fields, expected " + std::to_string(header.size()));
    }
    if (!seen.insert(row.front()).second) {
      throw InputError(where + ": duplicate source id '" + row.front() + "'");
    }
    if (row.front() == kZeroShotRow) {
      zero_row = &row;
    } else {
      if (row.front().empty()) throw InputError(where + ": empty source id");
      source_rows.push_back(&row);
    }
  }
  if (zero_row == nullptr) throw InputError(where + ": zero-shot row required ('" + std::string(kZeroShotRow) + "')");
  if (source_rows.empty() || t.target_ids.empty()) throw InputError(where + ": empty table");

  const auto n = static_cast<Eigen::Index>(source_rows.size());
  const auto k = static_cast<Eigen::Index>(t.target_ids.size());
  t.values = Matrix::Zero(n, k);
  t.missing = Mask::Constant(n, k, false);
  t.zero_shot = Vector::Zero(k);
  t.zero_shot_missing.assign(static_cast<std::size_t>(k), false);

  auto cell = [&](const std::string& text, const std::string& row_id, double& out) -> bool {
    if (text == kMissingSentinel) {
      out = std::numeric_limits<double>::quiet_NaN();
      return true;
    }
    out = csv::parse_number(text, where + " row '" + row_id + "'");
    return false;
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = *source_rows[static_cast<std::size_t>(i)];
    t.source_ids.push_back(row.front());
    for (Eigen::Index j = 0; j < k; ++j) {
      t.missing(i, j) = cell(row[static_cast<std::size_t>(j) + 1], row.front(), t.values(i, j));
    }
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    t.zero_shot_missing[static_cast<std::size_t>(j)] =
        cell((*zero_row)[static_cast<std::size_t>(j) + 1], kZeroShotRow, t.zero_shot(j));
  }
  return t;
}

PerformanceTable load_performance_table(const std::filesystem::path& path, const std::string& model_id) {
  return parse_performance_table(csv::read_file(path), model_id);
}

std::string format_performance_table(const PerformanceTable& t) {
  std::ostringstream out;
  csv::Row header{kSourceHeader};
  header.insert(header.end(), t.target_ids.begin(), t.target_ids.end());
  out << csv::join(header) << '\n';
  out << kZeroShotRow;
  for (Eigen::Index j = 0; j < t.n_targets(); ++j) {
    out << ',' << (t.zero_shot_missing[static_cast<std::size_t>(j)] ? std::string(kMissingSentinel)
                                                                    : csv::format_number(t.zero_shot(j)));
  }
  out << '\n';
  for (Eigen::Index i = 0; i < t.n_sources(); ++i) {
    out << csv::escape_field(t.source_ids[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < t.n_targets(); ++j) {
      out << ',' << (t.missing(i, j) ? std::string(kMissingSentinel) : csv::format_number(t.values(i, j)));
    }
    out << '\n';
  }
  return out.str();
}

void save_performance_table(const PerformanceTable& table, const std::filesystem::path& path) {
  csv::write_file(path, format_performance_table(table));
}

TaskMetadata parse_task_metadata(const std::string& json_text, const BandCutoffs& cutoffs) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("metadata: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("tasks") || !doc["tasks"].is_array()) {
    throw InputError("metadata: a 'tasks' array is required");
  }

  TaskMetadata meta;
  try {
    for (const auto& jt : doc["tasks"]) {
      TaskMeta t;
      t.id = jt.at("id").get<std::string>();
      if (t.id.empty()) throw InputError("metadata: task id must be non-empty");
      t.display_name = jt.value("display_name", t.id);
      if (jt.contains("roles")) {
        for (const auto& r : jt["roles"]) t.roles.insert(parse_role(r.get<std::string>()));
      }
      if (jt.contains("eval_mode")) t.eval_mode = parse_eval_mode(jt["eval_mode"].get<std::string>());
      t.category = jt.value("category", std::string{});
      t.metric_name = jt.value("metric_name", std::string{});
      if (jt.contains("mean_output_length") && !jt["mean_output_length"].is_null()) {
        const double len = jt["mean_output_length"].get<double>();
        if (!(len > 0.0) || !std::isfinite(len)) {
          throw InputError("metadata: task '" + t.id + "' has non-positive mean_output_length");
        }
        t.mean_output_length = len;
      }
      if (jt.contains("length_band") && !jt["length_band"].is_null()) {
        t.length_band = parse_length_band(jt["length_band"].get<std::string>());
      } else if (t.mean_output_length) {
        t.length_band = band_for_length(*t.mean_output_length, cutoffs);
      }
      const std::string id = t.id;
      if (!meta.registry.emplace(id, std::move(t)).second) {
        throw InputError("metadata: duplicate task id '" + id + "'");
      }
    }

    if (doc.contains("in_domain")) {
      for (const auto& jp : doc["in_domain"]) {
        std::string source;
        std::string target;
        if (jp.is_array() && jp.size() == 2) {
          source = jp[0].get<std::string>();
          target = jp[1].get<std::string>();
        } else if (jp.is_object()) {
          source = jp.at("source_id").get<std::string>();
          target = jp.at("target_id").get<std::string>();
        } else {
          throw InputError("metadata: in_domain entries must be [source, target] or {source_id, target_id}");
        }
        for (const auto& id : {source, target}) {
          if (!meta.registry.contains(id)) throw InputError("metadata: in_domain references unknown id '" + id + "'");
        }
        meta.in_domain.pairs.emplace(source, target);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("metadata: ") + e.what());
  }
  return meta;
}

TaskMetadata load_task_metadata(const std::filesystem::path& path, const BandCutoffs& cutoffs) {
  return parse_task_metadata(csv::read_file(path), cutoffs);
}

bool ValidationReport::passed() const { return error_count() == 0; }

std::size_t ValidationReport::error_count() const {
  return static_cast<std::size_t>(std::count_if(findings.begin(), findings.end(),
                                                [](const Finding& f) { return f.severity == Severity::error; }));
}

bool ValidationReport::has(const std::string& code) const {
  return std::any_of(findings.begin(), findings.end(), [&](const Finding& f) { return f.code == code; });
}

ValidationReport validate_dataset(const std::vector<PerformanceTable>& tables, const TaskRegistry& registry,
                                  const InDomainMap& in_domain, bool strict) {
  ValidationReport report;
  auto error = [&](std::string code, std::string msg) {
    report.findings.push_back({Severity::error, std::move(code), std::move(msg)});
  };
  auto warning = [&](std::string code, std::string msg) {
    report.findings.push_back({Severity::warning, std::move(code), std::move(msg)});
  };

  if (tables.empty()) {
    error("no_tables", "at least one performance table is required");
  } else {
    std::set<std::string> models;
    const auto& reference = tables.front();
    for (const auto& t : tables) {
      if (!models.insert(t.model_id).second) error("duplicate_model", "model '" + t.model_id + "' appears twice");
      if (t.target_ids != reference.target_ids) {
        error("target_mismatch", "target sets must align: model '" + t.model_id + "' differs from '" +
                                     reference.model_id + "' in target ids or order");
      }
      if (std::set(t.source_ids.begin(), t.source_ids.end()) !=
          std::set(reference.source_ids.begin(), reference.source_ids.end())) {
        warning("source_mismatch", "model '" + t.model_id + "' has a different source set than '" +
                                       reference.model_id + "'; cross-model rankings need shared sources");
      }
      if (t.missing.size() > 0 && t.missing.any()) {
        warning("missing_cells", "model '" + t.model_id + "' has " + std::to_string(t.missing.count()) +
                                     " missing cell(s)");
      }
      if (std::any_of(t.zero_shot_missing.begin(), t.zero_shot_missing.end(), [](bool b) { return b; })) {
        warning("missing_zero_shot", "model '" + t.model_id + "' has missing zero-shot cells; those targets "
                                                              "cannot be normalized");
      }
      auto check_role = [&](const std::string& id, Role role) {
        const auto it = registry.find(id);
        if (it == registry.end()) {
          error("unknown_task", "model '" + t.model_id + "' references unknown task '" + id + "'");
        } else if (!it->second.has_role(role)) {
          error("role_mismatch", "task '" + id + "' is used as a " + to_string(role) + " but lacks that role");
        }
      };
      for (const auto& id : t.source_ids) check_role(id, Role::source);
      for (const auto& id : t.target_ids) check_role(id, Role::target);
    }
  }

  for (const auto& [source, target] : in_domain.pairs) {
    const auto s = registry.find(source);
    const auto t = registry.find(target);
    if (s == registry.end() || t == registry.end()) {
      error("in_domain_unknown", "in_domain pair (" + source + ", " + target + ") references an unknown id");
      continue;
    }
    if (!s->second.has_role(Role::source)) {
      error("in_domain_role", "in_domain pair (" + source + ", " + target + "): '" + source +
                                  "' is not a source task");
    }
    if (!t->second.has_role(Role::target)) {
      error("in_domain_role", "in_domain pair (" + source + ", " + target + "): '" + target +
                                  "' is not a target task");
    }
  }

  if (strict && !report.passed()) {
    std::string msg = "dataset validation failed:";
    for (const auto& f : report.findings) {
      if (f.severity == Severity::error) msg += "\n  [" + f.code + "] " + f.message;
    }
    throw InputError(msg);
  }
  return report;
}

} // namespace taskfactor
