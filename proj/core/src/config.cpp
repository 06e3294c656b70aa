#include "taskfactor/config.hpp"

#include "taskfactor/csv.hpp"
#include "taskfactor/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace taskfactor {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& key, const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (!v.empty() && (v.front() == '"' || v.back() == '"')) throw InputError("config: unbalanced quotes for '" + key + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw InputError("config: '" + key + "' must be true or false");
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw InputError("config: '" + key + "' must be an integer");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    return csv::parse_number(v, "config");
  } catch (const InputError&) {
    throw InputError("config: '" + key + "' must be a number");
  }
}

std::vector<double> parse_reals(const std::string& key, const std::string& v) {
  std::string body = v;
  if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
  std::vector<double> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_real(key, item));
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

} // namespace

void apply_config_setting(RunConfig& c, const std::string& raw_key, const std::string& raw_value,
                          const std::filesystem::path& base_dir) {
  const std::string key = trim(raw_key);
  const std::string value = unquote(key, trim(raw_value));

  if (key.starts_with("models.")) {
    const std::string id = key.substr(7);
    if (id.empty()) throw InputError("config: empty model id");
    auto it = std::find_if(c.models.begin(), c.models.end(), [&](const ModelInput& m) { return m.model_id == id; });
    if (it != c.models.end()) {
      it->path = resolve(base_dir, value);
    } else {
      c.models.push_back({id, resolve(base_dir, value)});
    }
  } else if (key == "metadata") {
    c.metadata = resolve(base_dir, value);
  } else if (key == "output" || key == "output_dir") {
    c.output_dir = resolve(base_dir, value);
  } else if (key == "embedding_rank" || key == "rank") {
    c.embedding_rank = parse_int<Eigen::Index>(key, value);
  } else if (key == "factors") {
    if (value == "auto") {
      c.factors.reset();
    } else {
      c.factors = parse_int<Eigen::Index>(key, value);
    }
  } else if (key == "cutoffs") {
    c.cutoffs = parse_reals(key, value);
  } else if (key == "seed") {
    c.seed = parse_int<std::uint64_t>(key, value);
  } else if (key == "pa_replications") {
    c.pa_replications = parse_int<int>(key, value);
  } else if (key == "pa_percentile") {
    c.pa_percentile = parse_real(key, value);
  } else if (key == "threads") {
    c.threads = parse_int<unsigned>(key, value);
  } else if (key == "top_n") {
    c.top_n = parse_int<std::size_t>(key, value);
  } else if (key == "literal_eq1") {
    c.literal_eq1 = parse_bool(key, value);
  } else if (key == "center") {
    c.center = parse_bool(key, value);
  } else if (key == "strict") {
    c.strict = parse_bool(key, value);
  } else if (key == "all_loadings") {
    c.all_loadings = parse_bool(key, value);
  } else if (key == "cluster_on") {
    if (value == "features") {
      c.cluster_on = ClusterInput::features;
    } else if (value == "similarity") {
      c.cluster_on = ClusterInput::similarity;
    } else {
      throw InputError("config: cluster_on must be 'features' or 'similarity'");
    }
  } else if (key == "intercept") {
    if (value == "per_target") {
      c.intercept = InterceptMode::per_target;
    } else if (value == "per_row") {
      c.intercept = InterceptMode::per_row;
    } else {
      throw InputError("config: intercept must be 'per_target' or 'per_row'");
    }
  } else if (key == "scaling") {
    if (value == "correlation") {
      c.scaling = FactorScaling::correlation;
    } else if (value == "covariance") {
      c.scaling = FactorScaling::covariance;
    } else {
      throw InputError("config: scaling must be 'correlation' or 'covariance'");
    }
  } else if (key == "band_short" || key == "band_mid") {
    const auto edges = parse_reals(key, value);
    if (edges.size() != 2 || !(edges[0] <= edges[1])) throw InputError("config: '" + key + "' must be [lo, hi]");
    if (key == "band_short") {
      c.bands.short_lo = edges[0];
      c.bands.short_hi = edges[1];
    } else {
      c.bands.mid_lo = edges[0];
      c.bands.mid_hi = edges[1];
    }
  } else if (key == "band_long_above") {
    c.bands.long_above = parse_real(key, value);
  } else {
    throw InputError("config: unknown key '" + key + "'");
  }
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section != "models") throw InputError("config: unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    key = unquote(key, key);
    const std::string value = line.substr(eq + 1);
    apply_config_setting(c, section.empty() ? key : section + "." + key, value, base_dir);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(csv::read_file(path), path.parent_path());
}

void validate_run_config(const RunConfig& c) {
  if (c.models.empty()) throw InputError("config: 'models' must list at least one performance table");
  if (c.embedding_rank < 1) throw InputError("config: 'embedding_rank' must be positive");
  if (c.factors && *c.factors < 1) throw InputError("config: 'factors' must be positive or \"auto\"");
  if (c.cutoffs.empty()) throw InputError("config: 'cutoffs' must not be empty");
  for (double v : c.cutoffs) {
    if (!(v > 0.0)) throw InputError("config: 'cutoffs' entries must be positive");
  }
  if (c.pa_replications < 1) throw InputError("config: 'pa_replications' must be at least 1");
  if (!(c.pa_percentile > 0.0 && c.pa_percentile < 100.0)) throw InputError("config: 'pa_percentile' must lie in (0, 100)");
  if (c.threads < 1) throw InputError("config: 'threads' must be at least 1");
  if (c.top_n < 1) throw InputError("config: 'top_n' must be at least 1");
  if (c.strict && !c.seed) throw InputError("config: 'seed' is required when strict = true");
}

} // namespace taskfactor
