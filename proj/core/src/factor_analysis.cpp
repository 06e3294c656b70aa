#include "taskfactor/factor_analysis.hpp"

#include "taskfactor/numkernels.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace taskfactor {

std::string to_string(FactorScaling s) { return s == FactorScaling::correlation ? "correlation" : "covariance"; }
std::string to_string(InterceptMode m) { return m == InterceptMode::per_target ? "per_target" : "per_row"; }

Matrix EfaModel::implied() const {
  Matrix m = loadings * loadings.transpose();
  m.diagonal() += uniquenesses;
  return m;
}

Matrix EfaModel::raw_loadings() const {
  if (scaling == FactorScaling::covariance) return loadings;
  return scale.asDiagonal() * loadings;
}

namespace {

// Squared multiple correlations as starting communalities; falls back to the
// largest absolute off-diagonal entry when the matrix is (near) singular.
Vector initial_communalities(const Matrix& r, Warnings& warnings) {
  const Eigen::Index k = r.rows();
  Eigen::LLT<Matrix> llt(r);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) {
    const Matrix inv = llt.solve(Matrix::Identity(k, k));
    Vector h(k);
    for (Eigen::Index j = 0; j < k; ++j) h(j) = r(j, j) - 1.0 / inv(j, j);
    if (h.allFinite() && (h.array() >= 0.0).all()) return h;
  }
  warnings.push_back("efa: correlation matrix is near singular; starting communalities use max |r|");
  Vector h(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (i == j) continue;
      best = std::max(best, std::abs(r(i, j)) / std::sqrt(r(i, i) * r(j, j)));
    }
    h(j) = best * r(j, j);
  }
  return h;
}

void check_columns(const EfaModel& model, const LabeledMatrix& a, const char* what) {
  if (a.col_labels != model.target_ids) {
    throw InputError(std::string(what) + ": columns do not match the model's target ids");
  }
}

} // namespace

EfaModel fit_efa(const LabeledMatrix& a, Eigen::Index n_factors, const EfaOptions& options) {
  a.require_complete("efa");
  const Eigen::Index k = a.cols();
  const Eigen::Index n = a.rows();
  if (n_factors < 1) throw InputError("efa: factor count must be positive");
  if (n_factors >= k) {
    throw InputError("efa: factor count " + std::to_string(n_factors) + " must be below the number of targets (" +
                     std::to_string(k) + ")");
  }
  if (n < n_factors + 1) throw InputError("efa: need at least " + std::to_string(n_factors + 1) + " observations");

  EfaModel model;
  model.target_ids = a.col_labels;
  model.n_obs = n;
  model.scaling = options.scaling;
  const auto mom = num::column_moments(a.values);
  model.mean = mom.mean;
  model.scale = mom.sd;

  const Matrix corr = num::correlation_matrix(a.values, a.col_labels);
  model.fitted_matrix = options.scaling == FactorScaling::correlation ? corr : num::covariance_matrix(a.values);
  const Matrix& r = model.fitted_matrix;
  const Vector total = r.diagonal();

  Vector h = initial_communalities(r, model.warnings);
  Matrix lambda = Matrix::Zero(k, n_factors);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    Matrix reduced = r;
    reduced.diagonal() = h;
    const auto eig = num::sym_eig(reduced);
    for (Eigen::Index l = 0; l < n_factors; ++l) {
      lambda.col(l) = eig.vectors.col(l) * std::sqrt(std::max(eig.values(l), 0.0));
    }
    Vector next = lambda.rowwise().squaredNorm();
    for (Eigen::Index j = 0; j < k; ++j) {
      const double upper = total(j) - kMinUniqueness;
      if (next(j) > upper) {
        next(j) = upper;
        model.heywood = true;
      }
    }
    const double change = (next - h).cwiseAbs().maxCoeff();
    h = next;
    model.iterations = iter;
    if (change < options.tolerance) {
      model.converged = true;
      break;
    }
  }

  // Pull Heywood rows back inside the admissible region.
  for (Eigen::Index j = 0; j < k; ++j) {
    const double norm2 = lambda.row(j).squaredNorm();
    const double upper = total(j) - kMinUniqueness;
    if (norm2 > upper) lambda.row(j) *= std::sqrt(upper / norm2);
  }
  model.loadings = lambda;
  model.uniquenesses = total - lambda.rowwise().squaredNorm();
  model.rotation = Matrix::Identity(n_factors, n_factors);

  if (model.heywood) {
    model.warnings.push_back("efa: Heywood case; uniquenesses clamped at " + std::to_string(kMinUniqueness));
  }
  if (!model.converged) {
    model.warnings.push_back("efa: communalities did not converge within " + std::to_string(options.max_iterations) +
                             " iterations");
  }
  return model;
}

double varimax_criterion(const Matrix& loadings) {
  const auto p = static_cast<double>(loadings.rows());
  double total = 0.0;
  for (Eigen::Index l = 0; l < loadings.cols(); ++l) {
    const auto sq = loadings.col(l).array().square();
    const double mean = sq.sum() / p;
    total += sq.square().sum() / p - mean * mean;
  }
  return total;
}

VarimaxResult varimax_rotate(const EfaModel& model, const VarimaxOptions& options) {
  const Eigen::Index k = model.n_targets();
  const Eigen::Index m = model.n_factors();
  VarimaxResult out;
  out.model = model;
  out.rotation = Matrix::Identity(m, m);
  out.model.method = model.method + "+varimax";
  if (m < 2) {
    out.criterion_trace.push_back(varimax_criterion(model.loadings));
    return out;
  }

  Matrix x = model.loadings;
  if (options.kaiser_normalize) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double norm = x.row(j).norm();
      if (norm > 1e-12) x.row(j) /= norm;
    }
  }
  const auto n = static_cast<double>(k);
  Matrix rot = Matrix::Identity(m, m);
  double crit = varimax_criterion(x);
  out.criterion_trace.push_back(crit);
  out.converged = false;

  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    for (Eigen::Index p = 0; p < m - 1; ++p) {
      for (Eigen::Index q = p + 1; q < m; ++q) {
        const auto xp = x.col(p).array();
        const auto xq = x.col(q).array();
        const Eigen::ArrayXd u = xp.square() - xq.square();
        const Eigen::ArrayXd v = 2.0 * xp * xq;
        const double sa = u.sum();
        const double sb = v.sum();
        const double sc = (u.square() - v.square()).sum();
        const double sd = 2.0 * (u * v).sum();
        const double num = sd - 2.0 * sa * sb / n;
        const double den = sc - (sa * sa - sb * sb) / n;
        const double phi = 0.25 * std::atan2(num, den);
        if (phi == 0.0) continue;
        const double c = std::cos(phi);
        const double s = std::sin(phi);
        const Vector cp = x.col(p);
        const Vector cq = x.col(q);
        x.col(p) = c * cp + s * cq;
        x.col(q) = -s * cp + c * cq;
        const Vector rp = rot.col(p);
        const Vector rq = rot.col(q);
        rot.col(p) = c * rp + s * rq;
        rot.col(q) = -s * rp + c * rq;
      }
    }
    const double next = varimax_criterion(x);
    out.criterion_trace.push_back(next);
    out.sweeps = sweep;
    const double gain = next - crit;
    crit = next;
    if (gain < options.tolerance) {
      out.converged = true;
      break;
    }
  }

  Matrix rotated = model.loadings * rot;
  for (Eigen::Index l = 0; l < m; ++l) {
    const double sign = num::orient(rotated.col(l));
    rot.col(l) *= sign;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  const Vector ss = rotated.colwise().squaredNorm().transpose();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return ss(a) > ss(b); });
  Matrix sorted_rot(m, m);
  Matrix sorted_load(k, m);
  for (Eigen::Index l = 0; l < m; ++l) {
    sorted_rot.col(l) = rot.col(order[static_cast<std::size_t>(l)]);
    sorted_load.col(l) = rotated.col(order[static_cast<std::size_t>(l)]);
  }

  out.rotation = sorted_rot;
  out.model.loadings = sorted_load;
  out.model.rotation = model.rotation * sorted_rot;
  if (!out.converged) {
    out.model.warnings.push_back("varimax: no convergence within " + std::to_string(options.max_sweeps) + " sweeps");
  }
  return out;
}

FactorScores factor_scores(const EfaModel& model, const LabeledMatrix& a) {
  check_columns(model, a, "factor scores");
  a.require_complete("factor scores");
  FactorScores out;

  Matrix z = a.values.rowwise() - model.mean.transpose();
  if (model.scaling == FactorScaling::correlation) z.array().rowwise() /= model.scale.transpose().array();

  const Matrix& r = model.fitted_matrix;
  Eigen::LLT<Matrix> llt(r);
  Matrix weights;
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) {
    weights = llt.solve(model.loadings);
  } else {
    out.warnings.push_back("factor scores: correlation matrix is singular; using a 1e-8 ridge");
    Matrix ridged = r;
    ridged.diagonal().array() += 1e-8;
    Eigen::LDLT<Matrix> ldlt(ridged);
    weights = ldlt.solve(model.loadings);
  }
  out.scores = z * weights;
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Vector random_spectrum(Eigen::Index n, Eigen::Index k, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) x(r, c) = normal(gen);
  }
  return num::sym_eig(num::correlation_matrix(x)).values;
}

double percentile_of_sorted(const std::vector<double>& sorted, double pct) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void check_count_input(const LabeledMatrix& a, const char* what) {
  a.require_complete(what);
  if (a.cols() < 2) throw InputError(std::string(what) + ": at least 2 target columns required");
  if (a.rows() < 3) throw InputError(std::string(what) + ": at least 3 observations required");
}

} // namespace

FactorCountReport parallel_analysis(const LabeledMatrix& a, const ParallelAnalysisOptions& options) {
  if (options.replications < 1) throw InputError("parallel analysis: replications must be at least 1");
  if (!(options.percentile > 0.0 && options.percentile < 100.0)) {
    throw InputError("parallel analysis: percentile must lie in (0, 100)");
  }
  check_count_input(a, "parallel analysis");
  const Eigen::Index n = a.rows();
  const Eigen::Index k = a.cols();

  FactorCountReport rep;
  rep.replications = options.replications;
  rep.percentile = options.percentile;
  rep.seed = options.seed;
  rep.eigenvalues = num::sym_eig(num::correlation_matrix(a.values, a.col_labels)).values;

  const auto reps = static_cast<std::size_t>(options.replications);
  std::vector<Vector> spectra(reps);
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t r = first; r < reps; r += stride) {
      spectra[r] = random_spectrum(n, k, splitmix64(options.seed ^ splitmix64(r + 1)));
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, reps);
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
    for (auto& th : pool) th.join();
  }

  rep.pa_thresholds.resize(k);
  std::vector<double> column(reps);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (std::size_t r = 0; r < reps; ++r) column[r] = spectra[r](i);
    std::sort(column.begin(), column.end());
    rep.pa_thresholds(i) = percentile_of_sorted(column, options.percentile);
  }
  Eigen::Index retained = 0;
  while (retained < k && rep.eigenvalues(retained) > rep.pa_thresholds(retained)) ++retained;
  rep.pa_retained = std::min(retained, k - 1);
  return rep;
}

FactorCountReport velicer_map(const LabeledMatrix& a) {
  check_count_input(a, "velicer map");
  const Eigen::Index k = a.cols();
  const Matrix r = num::correlation_matrix(a.values, a.col_labels);
  const auto eig = num::sym_eig(r);

  FactorCountReport rep;
  rep.eigenvalues = eig.values;
  rep.map_curve = Vector::Constant(k - 1, std::numeric_limits<double>::quiet_NaN());
  const auto pairs = static_cast<double>(k * (k - 1));
  for (Eigen::Index m = 0; m <= k - 2; ++m) {
    Matrix partial = r;
    if (m > 0) {
      const Matrix comp = eig.vectors.leftCols(m) * eig.values.head(m).cwiseMax(0.0).cwiseSqrt().asDiagonal();
      partial -= comp * comp.transpose();
    }
    const Vector d = partial.diagonal();
    if ((d.array() <= 1e-10).any()) {
      rep.warnings.push_back("velicer map: partial covariance collapsed after removing " + std::to_string(m) +
                             " component(s); skipped");
      continue;
    }
    const Vector inv_sd = d.cwiseSqrt().cwiseInverse();
    partial = inv_sd.asDiagonal() * partial * inv_sd.asDiagonal();
    const double off = partial.squaredNorm() - partial.diagonal().squaredNorm();
    rep.map_curve(m) = off / pairs;
  }
  Eigen::Index best = -1;
  for (Eigen::Index m = 0; m < rep.map_curve.size(); ++m) {
    if (std::isnan(rep.map_curve(m))) continue;
    if (best < 0 || rep.map_curve(m) < rep.map_curve(best)) best = m;
  }
  if (best < 0) throw NumericError("velicer map: no valid partial correlation matrix");
  rep.map_retained = best;
  return rep;
}

FactorCountReport select_factor_count(const LabeledMatrix& a, const ParallelAnalysisOptions& options) {
  FactorCountReport rep = parallel_analysis(a, options);
  FactorCountReport map = velicer_map(a);
  rep.map_curve = std::move(map.map_curve);
  rep.map_retained = map.map_retained;
  append_warnings(rep.warnings, map.warnings);
  return rep;
}

ResidualResult residualize_dominant(const LabeledMatrix& a, InterceptMode mode, const EfaOptions& options) {
  ResidualResult out;
  out.mode = mode;
  out.dominant = fit_efa(a, 1, options);
  append_warnings(out.warnings, out.dominant.warnings);
  auto scores = factor_scores(out.dominant, a);
  append_warnings(out.warnings, scores.warnings);
  out.w = scores.scores.col(0);

  const Eigen::Index n = a.rows();
  const double w_mean = out.w.mean();
  const double w_var = (out.w.array() - w_mean).square().sum() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  if (!(w_var >= 1e-12)) throw NumericError("residualize: dominant factor degenerate");

  out.residuals = a;
  if (mode == InterceptMode::per_target) {
    Matrix design(n, 2);
    design.col(0) = out.w;
    design.col(1).setOnes();
    auto fit = num::ols_multi(design, a.values);
    append_warnings(out.warnings, fit.warnings);
    out.beta = fit.coefficients.row(0).transpose();
    out.gamma = fit.coefficients.row(1).transpose();
    out.residuals.values = fit.residuals;
    return out;
  }

  // A ~ w beta^T + gamma 1^T. Row-centering removes gamma; beta is fixed up to
  // a shift c (gamma absorbs -c w), chosen to minimize |beta|^2 + |gamma|^2.
  const auto k = static_cast<double>(a.cols());
  const Vector row_mean = a.values.rowwise().mean();
  const Matrix centered = a.values.colwise() - row_mean;
  const double ww = out.w.squaredNorm();
  const Vector delta = centered.transpose() * out.w / ww;
  const double shift = row_mean.dot(out.w) / (k + ww);
  out.beta = delta.array() + shift;
  out.gamma = row_mean - shift * out.w;
  out.residuals.values = centered - out.w * delta.transpose();
  return out;
}

LabeledMatrix apply_residualization(const ResidualResult& fit, const LabeledMatrix& rows) {
  auto scores = factor_scores(fit.dominant, rows);
  const Vector w = scores.scores.col(0);
  LabeledMatrix out = rows;
  Matrix fitted = w * fit.beta.transpose();
  if (fit.mode == InterceptMode::per_target) {
    fitted.rowwise() += fit.gamma.transpose();
  } else {
    const Vector gamma = (rows.values - fitted).rowwise().mean();
    fitted.colwise() += gamma;
  }
  out.values = rows.values - fitted;
  return out;
}

SignificanceReport significant_loadings(const EfaModel& model, double cutoff, bool all) {
  if (!(cutoff > 0.0)) throw InputError("significant loadings: cutoff must be positive");
  SignificanceReport rep;
  rep.cutoff = cutoff;
  for (Eigen::Index j = 0; j < model.n_targets(); ++j) {
    const auto& id = model.target_ids[static_cast<std::size_t>(j)];
    Eigen::Index top = 0;
    model.loadings.row(j).cwiseAbs().maxCoeff(&top);
    const double top_value = model.loadings(j, top);
    if (std::abs(top_value) < cutoff) {
      rep.unexplained.push_back(id);
      continue;
    }
    rep.entries.push_back({id, top, top_value, true});
    if (!all) continue;
    for (Eigen::Index l = 0; l < model.n_factors(); ++l) {
      if (l != top && std::abs(model.loadings(j, l)) >= cutoff) {
        rep.entries.push_back({id, l, model.loadings(j, l), false});
      }
    }
  }
  return rep;
}

Vector communalities(const EfaModel& model) {
  Vector h = model.loadings.rowwise().squaredNorm();
  if (model.scaling == FactorScaling::covariance) h.array() /= model.scale.array().square();
  return h;
}

RobustnessResult reconstruct_rows(const Matrix& basis, const Vector& mean, const Matrix& rows) {
  if (basis.rows() != mean.size() || rows.cols() != mean.size()) {
    throw InputError("reconstruction: basis, mean and rows disagree on the number of targets");
  }
  const Matrix centered = (rows.rowwise() - mean.transpose()).transpose();
  auto fit = num::ols_multi(basis, centered);
  RobustnessResult out;
  out.basis = basis;
  out.mean = mean;
  out.w_test = fit.coefficients.transpose();
  out.residuals = fit.residuals.transpose();
  out.error_l2 = out.residuals.norm();
  out.residual_dof = rows.rows() * (basis.rows() - fit.rank);
  return out;
}

RobustnessResult loo_robustness(const AggregateMatrix& a, const std::string& held_out,
                                const RobustnessOptions& options) {
  const auto models = a.model_ids();
  if (std::find(models.begin(), models.end(), held_out) == models.end()) {
    throw InputError("robustness: held-out model '" + held_out + "' is not in the aggregate");
  }
  if (models.size() < 2) throw InputError("robustness: at least 2 models are required");

  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    (a.rows[i].model_id == held_out ? test : train).push_back(static_cast<Eigen::Index>(i));
  }
  if (static_cast<Eigen::Index>(train.size()) < options.factors + 1) {
    throw InputError("robustness: " + std::to_string(train.size()) + " training rows cannot support " +
                     std::to_string(options.factors) + " factors");
  }

  const LabeledMatrix a_train = a.matrix.select_rows(train);
  const LabeledMatrix a_test = a.matrix.select_rows(test);
  const ResidualResult dominant = residualize_dominant(a_train, options.intercept, options.efa);
  const LabeledMatrix test_bar = apply_residualization(dominant, a_test);
  const EfaModel model = fit_efa(dominant.residuals, options.factors, options.efa);

  RobustnessResult out = reconstruct_rows(model.raw_loadings(), model.mean, test_bar.values);
  out.held_out_model = held_out;
  for (const auto& m : models) {
    if (m != held_out) out.training_models.push_back(m);
  }
  return out;
}

} // namespace taskfactor
