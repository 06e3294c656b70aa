#include "taskfactor/factor_analysis.hpp"
#include "taskfactor/normalization.hpp"
#include "taskfactor/numkernels.hpp"

#include "oracles.hpp"
#include "synthetic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace taskfactor;
namespace tt = taskfactor::testing;

namespace {

LabeledMatrix labeled(const Matrix& m) {
  return LabeledMatrix(tt::make_labels("r", m.rows()), tt::make_labels("t", m.cols()), m);
}

// n observations whose sample correlation matrix is exactly `r`.
Matrix exact_correlation_data(const Matrix& r, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Matrix z = tt::random_matrix(n, r.cols(), gen);
  z = z.rowwise() - z.colwise().mean();
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ() * Matrix::Identity(n, r.cols());
  q *= std::sqrt(static_cast<double>(n - 1));
  const Eigen::LLT<Matrix> llt(r);
  return q * Matrix(llt.matrixU());
}

Matrix equicorrelation(Eigen::Index k, double rho) {
  Matrix r = Matrix::Constant(k, k, rho);
  r.diagonal().setOnes();
  return r;
}

// Largest |a - b P S| over column permutations P and sign flips S.
double aligned_difference(const Matrix& a, const Matrix& b) {
  const Eigen::Index m = a.cols();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0.0;
    for (Eigen::Index l = 0; l < m; ++l) {
      const auto& col = b.col(perm[static_cast<std::size_t>(l)]);
      worst = std::max(worst, std::min((a.col(l) - col).cwiseAbs().maxCoeff(), (a.col(l) + col).cwiseAbs().maxCoeff()));
    }
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

EfaModel model_with_loadings(const Matrix& loadings) {
  EfaModel m;
  m.target_ids = tt::make_labels("t", loadings.rows());
  m.loadings = loadings;
  m.uniquenesses = (1.0 - loadings.rowwise().squaredNorm().array()).matrix();
  m.mean = Vector::Zero(loadings.rows());
  m.scale = Vector::Ones(loadings.rows());
  m.rotation = Matrix::Identity(loadings.cols(), loadings.cols());
  return m;
}

} // namespace

TEST(Efa, EquicorrelatedOneFactor) {
  const auto a = labeled(exact_correlation_data(equicorrelation(4, 0.49), 50, 1));
  const auto m = fit_efa(a, 1);
  EXPECT_TRUE(m.converged);
  for (Eigen::Index j = 0; j < 4; ++j) {
    EXPECT_NEAR(std::abs(m.loadings(j, 0)), 0.7, 1e-4);
    EXPECT_NEAR(m.uniquenesses(j), 0.51, 1e-4);
  }
  EXPECT_EQ(m.method, "principal_axis");
}

TEST(Efa, UncorrelatedColumns) {
  const auto a = labeled(exact_correlation_data(Matrix::Identity(5, 5), 40, 2));
  const auto m = fit_efa(a, 1);
  EXPECT_LT(m.loadings.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((m.uniquenesses.array() - 1.0).abs().maxCoeff(), 1e-6);
}

TEST(Efa, PlantedRecovery) {
  int good = 0;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto data = tt::planted_simple_structure(10, 3, 500, seed);
    const auto m = fit_efa(data.data, 3);
    const auto rotated = varimax_rotate(m);
    const Matrix aligned = tt::procrustes_align(rotated.model.loadings, data.loadings);
    if ((aligned - data.loadings).cwiseAbs().maxCoeff() < 0.1) ++good;
    EXPECT_LT(aligned_difference(rotated.model.loadings, data.loadings), 0.15);
  }
  EXPECT_GE(good, 9);
}

TEST(Efa, Preconditions) {
  std::mt19937_64 gen(3);
  auto a = labeled(tt::random_matrix(10, 4, gen));
  EXPECT_THROW(fit_efa(a, 0), InputError);
  EXPECT_THROW(fit_efa(a, 4), InputError);
  EXPECT_THROW(fit_efa(labeled(tt::random_matrix(3, 6, gen)), 3), InputError);
  a.set_missing(2, 2);
  EXPECT_THROW(fit_efa(a, 1), InputError);
}

TEST(Efa, HeywoodCaseClamped) {
  // Two nearly collinear columns force a communality against its bound.
  std::mt19937_64 gen(4);
  Matrix x = tt::random_matrix(60, 4, gen);
  x.col(1) = x.col(0) + 1e-4 * x.col(1);
  const auto m = fit_efa(labeled(x), 2);
  EXPECT_TRUE((m.uniquenesses.array() >= kMinUniqueness - 1e-12).all());
  EXPECT_TRUE((m.loadings.rowwise().squaredNorm().array() <= 1.0).all());
  if (m.heywood) {
    const bool mentioned = std::any_of(m.warnings.begin(), m.warnings.end(),
                                       [](const std::string& w) { return w.find("Heywood") != std::string::npos; });
    EXPECT_TRUE(mentioned);
  }
}

TEST(Efa, CovarianceScalingRawUnits) {
  const auto data = tt::planted_simple_structure(6, 2, 300, 5);
  LabeledMatrix scaled = data.data;
  scaled.values.col(0) *= 10.0;
  EfaOptions opts;
  opts.scaling = FactorScaling::covariance;
  const auto cov = fit_efa(scaled, 2, opts);
  const auto cor = fit_efa(scaled, 2);
  EXPECT_EQ(cov.scaling, FactorScaling::covariance);
  EXPECT_NEAR(cor.raw_loadings().row(0).norm(), cor.scale(0) * cor.loadings.row(0).norm(), 1e-12);
  EXPECT_TRUE((communalities(cov).array() <= 1.0 + 1e-9).all());
}

TEST(Varimax, SimpleStructureIsFixedPoint) {
  Matrix l(4, 2);
  l << 0.8, 0, 0.7, 0, 0, 0.6, 0, 0.5;
  const auto r = varimax_rotate(model_with_loadings(l));
  EXPECT_LT((r.rotation.cwiseAbs() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(varimax_criterion(r.model.loadings), varimax_criterion(l), 1e-12);
}

TEST(Varimax, FortyFiveDegreeRows) {
  const double c = std::sqrt(0.5);
  Matrix l(4, 2);
  l << 0.8 * c, 0.8 * c, 0.6 * c, 0.6 * c, 0.7 * c, -0.7 * c, 0.5 * c, -0.5 * c;
  const auto r = varimax_rotate(model_with_loadings(l));
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_LT(r.model.loadings.row(j).cwiseAbs().minCoeff(), 1e-9);
  EXPECT_NEAR(std::abs(r.rotation(0, 0)), c, 1e-9);
}

TEST(Varimax, MatchesAngleSearchOracle) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix l = 0.5 * tt::random_matrix(8, 2, gen);
    const auto r = varimax_rotate(model_with_loadings(l));
    const double theta = tt::best_varimax_angle(l);
    Matrix rot(2, 2);
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    EXPECT_LT(aligned_difference(r.model.loadings, l * rot), 1e-6) << "trial " << trial;
  }
}

TEST(Varimax, OrthogonalityCommunalitiesAndMonotoneTrace) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix l = 0.4 * tt::random_matrix(12, 4, gen);
    const auto m = model_with_loadings(l);
    const auto r = varimax_rotate(m);
    EXPECT_LT((r.rotation.transpose() * r.rotation - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((r.model.loadings.rowwise().squaredNorm() - l.rowwise().squaredNorm()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((r.model.implied() - m.implied()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((l * r.rotation - r.model.loadings).cwiseAbs().maxCoeff(), 1e-12);
    for (std::size_t s = 1; s < r.criterion_trace.size(); ++s) {
      EXPECT_GE(r.criterion_trace[s], r.criterion_trace[s - 1] - 1e-12);
    }
    const Vector ss = r.model.loadings.colwise().squaredNorm().transpose();
    for (Eigen::Index q = 1; q < 4; ++q) EXPECT_GE(ss(q - 1), ss(q));
    for (Eigen::Index q = 0; q < 4; ++q) {
      Eigen::Index arg = 0;
      r.model.loadings.col(q).cwiseAbs().maxCoeff(&arg);
      EXPECT_GT(r.model.loadings(arg, q), 0.0);
    }
  }
}

TEST(Varimax, SingleFactorIdentity) {
  Matrix l(3, 1);
  l << 0.5, -0.6, 0.7;
  const auto r = varimax_rotate(model_with_loadings(l));
  EXPECT_EQ(r.rotation, Matrix::Identity(1, 1));
  EXPECT_EQ(r.model.loadings, l);
}

TEST(Scores, ZeroLoadingsGiveZeroScores) {
  std::mt19937_64 gen(8);
  const auto a = labeled(tt::random_matrix(20, 4, gen));
  auto m = fit_efa(a, 1);
  m.loadings.setZero();
  EXPECT_EQ(factor_scores(m, a).scores.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Scores, NoiselessOneFactorCorrelatesWithTruth) {
  std::mt19937_64 gen(9);
  const Matrix f = tt::random_matrix(200, 1, gen);
  Vector lambda(6);
  lambda << 0.9, 0.8, 0.7, 0.95, 0.6, 0.85;
  // A whisper of noise keeps the correlation matrix invertible.
  const Matrix x = f * lambda.transpose() + 1e-3 * tt::random_matrix(200, 6, gen);
  const auto a = labeled(x);
  const auto m = fit_efa(a, 1);
  const auto s = factor_scores(m, a);
  EXPECT_GT(std::abs(tt::pearson(s.scores.col(0), f.col(0))), 0.999);
}

TEST(Scores, ColumnMeansVanish) {
  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x = tt::random_matrix(40, 6, gen);
    x.rowwise() += Eigen::RowVectorXd::LinSpaced(6, -50, 50);
    const auto a = labeled(x);
    const auto s = factor_scores(fit_efa(a, 2), a);
    EXPECT_LT(s.scores.colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Scores, ColumnMismatchRejected) {
  std::mt19937_64 gen(11);
  const auto a = labeled(tt::random_matrix(20, 4, gen));
  const auto m = fit_efa(a, 1);
  auto b = a;
  b.col_labels[0] = "zz";
  EXPECT_THROW(factor_scores(m, b), InputError);
}

TEST(ParallelAnalysis, PureNoiseRetainsNothing) {
  int zeros = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 gen(seed);
    const auto a = labeled(tt::random_matrix(200, 10, gen));
    ParallelAnalysisOptions opts;
    opts.seed = seed + 1000;
    if (parallel_analysis(a, opts).pa_retained == 0) ++zeros;
  }
  EXPECT_GE(zeros, 17);
}

TEST(ParallelAnalysis, StrongRankOneSignal) {
  const auto data = tt::planted_simple_structure(10, 1, 300, 12, 0.1, 0.15);
  const auto spectrum = num::sym_eig(num::correlation_matrix(data.data.values)).values;
  EXPECT_GT(spectrum(0), 7.5);
  ParallelAnalysisOptions opts;
  opts.seed = 5;
  EXPECT_EQ(parallel_analysis(data.data, opts).pa_retained, 1);
}

TEST(ParallelAnalysis, DeterministicAcrossThreads) {
  const auto data = tt::planted_simple_structure(8, 2, 120, 13);
  ParallelAnalysisOptions one;
  one.seed = 77;
  one.replications = 40;
  ParallelAnalysisOptions four = one;
  four.threads = 4;
  const auto r1 = parallel_analysis(data.data, one);
  const auto r2 = parallel_analysis(data.data, four);
  const auto r3 = parallel_analysis(data.data, one);
  EXPECT_EQ(r1.pa_thresholds, r2.pa_thresholds);
  EXPECT_EQ(r1.pa_thresholds, r3.pa_thresholds);
  EXPECT_EQ(r1.pa_retained, r2.pa_retained);
  ParallelAnalysisOptions other = one;
  other.seed = 78;
  EXPECT_NE(parallel_analysis(data.data, other).pa_thresholds, r1.pa_thresholds);
}

TEST(ParallelAnalysis, Preconditions) {
  std::mt19937_64 gen(14);
  EXPECT_THROW(parallel_analysis(labeled(tt::random_matrix(20, 1, gen))), InputError);
  ParallelAnalysisOptions bad;
  bad.percentile = 100.0;
  EXPECT_THROW(parallel_analysis(labeled(tt::random_matrix(20, 3, gen)), bad), InputError);
}

TEST(Map, IdentityRetainsZero) {
  const auto rep = velicer_map(labeled(exact_correlation_data(Matrix::Identity(6, 6), 30, 15)));
  EXPECT_EQ(rep.map_retained, 0);
  EXPECT_NEAR(rep.map_curve(0), 0.0, 1e-20);
}

TEST(Map, EquicorrelationRetainsOne) {
  const auto rep = velicer_map(labeled(exact_correlation_data(equicorrelation(6, 0.8), 30, 16)));
  ASSERT_EQ(rep.map_curve.size(), 5);
  // Off-diagonals are 0.8 before any removal. After removing the first
  // component the partial correlations are all -1/(K-1) = -0.2.
  EXPECT_NEAR(rep.map_curve(0), 0.64, 1e-10);
  EXPECT_NEAR(rep.map_curve(1), 0.04, 1e-10);
  EXPECT_EQ(rep.map_retained, 1);
}

TEST(Map, TwoBlocksRetainTwo) {
  Matrix r = Matrix::Zero(8, 8);
  r.topLeftCorner(4, 4) = equicorrelation(4, 0.7);
  r.bottomRightCorner(4, 4) = equicorrelation(4, 0.7);
  const auto rep = velicer_map(labeled(exact_correlation_data(r, 40, 17)));
  EXPECT_EQ(rep.map_retained, 2);
}

TEST(FactorCount, PlantedCountsAgree) {
  for (Eigen::Index l = 1; l <= 3; ++l) {
    const auto data = tt::planted_simple_structure(12, l, 400, 200 + static_cast<std::uint64_t>(l), 0.2, 0.4);
    ParallelAnalysisOptions opts;
    opts.seed = 9;
    const auto rep = select_factor_count(data.data, opts);
    EXPECT_EQ(rep.pa_retained, l);
    EXPECT_EQ(rep.map_retained, l);
  }
}

TEST(Residualize, ExactModelLeavesNothing) {
  std::mt19937_64 gen(18);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector w = tt::random_matrix(30, 1, gen).col(0);
    const Vector beta = tt::random_matrix(5, 1, gen).col(0);
    const Vector gamma = tt::random_matrix(5, 1, gen).col(0);
    Matrix a = w * beta.transpose();
    a.rowwise() += gamma.transpose();
    const auto r = residualize_dominant(labeled(a));
    EXPECT_LT(r.residuals.values.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GT(std::abs(tt::pearson(r.w, w)), 1.0 - 1e-9);
  }
}

TEST(Residualize, ResidualsOrthogonalToWAndOnes) {
  std::mt19937_64 gen(19);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = tt::planted_simple_structure(8, 2, 60, 300 + static_cast<std::uint64_t>(trial));
    const auto r = residualize_dominant(data.data);
    const Matrix& e = r.residuals.values;
    EXPECT_LT((r.w.transpose() * e).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(e.colwise().sum().cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(r.residuals.col_labels, data.data.col_labels);
    EXPECT_EQ(r.residuals.row_labels, data.data.row_labels);
    EXPECT_EQ(r.beta.size(), 8);
    EXPECT_EQ(r.gamma.size(), 8);
  }
}

TEST(Residualize, UncorrelatedColumnIsOnlyCentered) {
  std::mt19937_64 gen(20);
  const auto data = tt::planted_simple_structure(6, 1, 80, 21);
  auto first = residualize_dominant(data.data);
  // Replace one column by a vector orthogonal to w and 1.
  Matrix x = data.data.values;
  Vector c = tt::random_matrix(80, 1, gen).col(0);
  Matrix basis(80, 2);
  basis.col(0) = first.w;
  basis.col(1).setOnes();
  c -= basis * num::ols(basis, c, false).coefficients;
  c.array() += 3.0;
  x.col(5) = c;
  const auto a = labeled(x);
  const auto r = residualize_dominant(a);
  // The dominant factor may move slightly; beta for the orthogonal column
  // only has to be small relative to the loaded columns.
  EXPECT_LT(std::abs(r.beta(5)), 0.1 * r.beta.head(5).cwiseAbs().minCoeff());
  EXPECT_NEAR(r.gamma(5), 3.0, 1e-9);
}

TEST(Residualize, AttenuatesDominantFactor) {
  const auto data = tt::planted_simple_structure(10, 1, 200, 22, 0.3, 0.5);
  const auto before = fit_efa(data.data, 1);
  const auto r = residualize_dominant(data.data);
  const auto after = fit_efa(r.residuals, 1);
  EXPECT_LT(after.loadings.squaredNorm(), before.loadings.squaredNorm());
}

TEST(Residualize, PerRowIntercept) {
  const auto data = tt::planted_simple_structure(8, 2, 50, 23);
  const auto r = residualize_dominant(data.data, InterceptMode::per_row);
  EXPECT_EQ(r.gamma.size(), 50);
  EXPECT_EQ(r.mode, InterceptMode::per_row);
  Matrix fitted = r.w * r.beta.transpose();
  fitted.colwise() += r.gamma;
  EXPECT_LT((data.data.values - fitted - r.residuals.values).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(r.residuals.values.rowwise().sum().cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Residualize, ApplyToTrainingRowsReproducesFit) {
  const auto data = tt::planted_simple_structure(8, 2, 50, 24);
  const auto r = residualize_dominant(data.data);
  const auto again = apply_residualization(r, data.data);
  EXPECT_LT((again.values - r.residuals.values).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Significance, CutoffLogic) {
  Matrix l(3, 2);
  l << 0.8, 0.1, 0.2, -0.25, -0.5, 0.4;
  const auto m = model_with_loadings(l);
  const auto plain = significant_loadings(m, 0.3);
  ASSERT_EQ(plain.entries.size(), 2u);
  EXPECT_EQ(plain.entries[0].task_id, "t01");
  EXPECT_EQ(plain.entries[0].factor, 0);
  EXPECT_DOUBLE_EQ(plain.entries[0].loading, 0.8);
  EXPECT_EQ(plain.unexplained, (std::vector<std::string>{"t02"}));

  const auto all = significant_loadings(m, 0.3, true);
  ASSERT_EQ(all.entries.size(), 3u);
  EXPECT_EQ(all.entries[1].task_id, "t03");
  EXPECT_EQ(all.entries[1].factor, 0);
  EXPECT_DOUBLE_EQ(all.entries[1].loading, -0.5);
  EXPECT_TRUE(all.entries[1].dominant);
  EXPECT_EQ(all.entries[2].factor, 1);
  EXPECT_FALSE(all.entries[2].dominant);
  EXPECT_THROW(significant_loadings(m, 0.0), InputError);
}

TEST(Communalities, SquaredLoadings) {
  Matrix l(2, 1);
  l << 0.0, 0.7;
  const Vector h = communalities(model_with_loadings(l));
  EXPECT_EQ(h(0), 0.0);
  EXPECT_NEAR(h(1), 0.49, 1e-15);
}

TEST(Reconstruction, InSpanAndOracle) {
  std::mt19937_64 gen(25);
  const Matrix basis = tt::random_matrix(10, 3, gen);
  const Vector mean = tt::random_matrix(10, 1, gen).col(0);
  const Matrix w = tt::random_matrix(7, 3, gen);
  Matrix rows = w * basis.transpose();
  rows.rowwise() += mean.transpose();
  const auto exact = reconstruct_rows(basis, mean, rows);
  EXPECT_LT(exact.error_l2, 1e-8);
  EXPECT_LT((exact.w_test - w).cwiseAbs().maxCoeff(), 1e-10);

  const Matrix noisy = tt::random_matrix(7, 10, gen);
  const auto r = reconstruct_rows(basis, mean, noisy);
  for (Eigen::Index i = 0; i < 7; ++i) {
    const Vector target = (noisy.row(i) - mean.transpose()).transpose();
    const Vector oracle = tt::normal_equations(basis, target);
    EXPECT_LT((r.w_test.row(i).transpose() - oracle).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((r.residuals.row(i).transpose() - (target - basis * oracle)).cwiseAbs().maxCoeff(), 1e-8);
  }
  EXPECT_EQ(r.residual_dof, 7 * (10 - 3));
}

TEST(Robustness, LeaveOneModelOut) {
  const auto fx = tt::make_transfer_fixture(31);
  std::vector<NormalizedTable> parts;
  for (const auto& t : fx.tables) parts.push_back(normalize_table(t));
  const auto agg = aggregate_models(parts);
  const auto r = loo_robustness(agg, "model_b");
  EXPECT_EQ(r.held_out_model, "model_b");
  EXPECT_EQ(r.training_models, (std::vector<std::string>{"model_a", "model_c", "model_d"}));
  EXPECT_EQ(r.w_test.rows(), 23);
  EXPECT_EQ(r.w_test.cols(), 6);
  EXPECT_EQ(r.basis.rows(), 29);
  EXPECT_GT(r.error_l2, 0.0);
  EXPECT_THROW(loo_robustness(agg, "nobody"), InputError);
}

TEST(Robustness, InvariantToTestRowOrder) {
  std::mt19937_64 gen(26);
  const Matrix basis = tt::random_matrix(9, 2, gen);
  const Vector mean = Vector::Zero(9);
  Matrix rows = tt::random_matrix(6, 9, gen);
  const double e1 = reconstruct_rows(basis, mean, rows).error_l2;
  rows.row(0).swap(rows.row(5));
  rows.row(2).swap(rows.row(3));
  EXPECT_NEAR(reconstruct_rows(basis, mean, rows).error_l2, e1, 1e-12);
}
