#include "taskfactor/normalization.hpp"

#include "synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace taskfactor;
namespace tt = taskfactor::testing;

namespace {

PerformanceTable one_column(const std::vector<double>& sources, double zero) {
  PerformanceTable t;
  t.model_id = "m";
  t.source_ids = tt::make_labels("s", static_cast<Eigen::Index>(sources.size()));
  t.target_ids = {"t"};
  t.values = Matrix(static_cast<Eigen::Index>(sources.size()), 1);
  for (std::size_t i = 0; i < sources.size(); ++i) t.values(static_cast<Eigen::Index>(i), 0) = sources[i];
  t.missing = Mask::Constant(t.values.rows(), 1, false);
  t.zero_shot = Vector::Constant(1, zero);
  t.zero_shot_missing = {false};
  return t;
}

NormalizedTable normalized_of(const std::string& model, Eigen::Index rows, Eigen::Index cols, double base) {
  LabeledMatrix m(tt::make_labels("s", rows), tt::make_labels("t", cols));
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m.set(i, j, base + static_cast<double>(i * cols + j));
  return {model, m, {}};
}

} // namespace

TEST(Normalize, WorkedValues) {
  // best_j = 30 from the third source.
  const auto n = normalize_table(one_column({20.0, 10.0, 30.0}, 10.0));
  EXPECT_DOUBLE_EQ(n.matrix.values(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(n.matrix.values(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(n.matrix.values(2, 0), 1.0);
  EXPECT_TRUE(n.warnings.empty());
}

TEST(Normalize, NegativeTransfer) {
  const auto n = normalize_table(one_column({40.0, 60.0}, 50.0));
  EXPECT_DOUBLE_EQ(n.matrix.values(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(n.matrix.values(1, 0), 1.0);
}

TEST(Normalize, DegenerateColumnBecomesMissing) {
  const auto n = normalize_table(one_column({50.0, 50.0}, 50.0));
  EXPECT_TRUE(n.matrix.missing(0, 0));
  EXPECT_TRUE(n.matrix.missing(1, 0));
  ASSERT_EQ(n.warnings.size(), 1u);
  EXPECT_NE(n.warnings[0].find("'t'"), std::string::npos);
}

TEST(Normalize, MissingCellsStayMissingAndAreSkippedForBest) {
  auto t = one_column({20.0, 90.0, 30.0}, 10.0);
  t.missing(1, 0) = true;
  t.values(1, 0) = std::nan("");
  const auto n = normalize_table(t);
  EXPECT_TRUE(n.matrix.missing(1, 0));
  EXPECT_DOUBLE_EQ(n.matrix.values(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(n.matrix.values(0, 0), 0.5);
}

TEST(Normalize, AnchorsHoldOnRandomTables) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 25; ++trial) {
    auto t = tt::random_table("m", 6, 5, gen);
    // Make one source match the zero-shot score exactly in column 0.
    t.values(3, 0) = t.zero_shot(0);
    const auto n = normalize_table(t);
    for (Eigen::Index j = 0; j < t.n_targets(); ++j) {
      if (n.matrix.missing(0, j)) continue;
      Eigen::Index arg = 0;
      const double best = t.values.col(j).maxCoeff(&arg);
      EXPECT_NEAR(n.matrix.values(arg, j), 1.0, 1e-12);
      // With every source below zero-shot the denominator is negative and
      // weaker sources map above 1, so the column maximum is only pinned
      // when the best source beats zero-shot.
      if (best > t.zero_shot(j)) EXPECT_NEAR(n.matrix.values.col(j).maxCoeff(), 1.0, 1e-12);
    }
    if (!n.matrix.missing(3, 0)) EXPECT_EQ(n.matrix.values(3, 0), 0.0);
  }
}

TEST(Normalize, AffineInvariance) {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> alpha(0.1, 10.0);
  std::uniform_real_distribution<double> shift(-100.0, 100.0);
  for (int trial = 0; trial < 25; ++trial) {
    auto t = tt::random_table("m", 7, 4, gen);
    const auto base = normalize_table(t);
    for (Eigen::Index j = 0; j < t.n_targets(); ++j) {
      const double a = alpha(gen), c = shift(gen);
      t.values.col(j) = (a * t.values.col(j).array() + c).matrix();
      t.zero_shot(j) = a * t.zero_shot(j) + c;
    }
    const auto scaled = normalize_table(t);
    EXPECT_LT((base.matrix.values - scaled.matrix.values).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Normalize, LabelPermutationPermutesOutput) {
  std::mt19937_64 gen(13);
  auto t = tt::random_table("m", 5, 4, gen);
  const auto base = normalize_table(t);
  std::vector<Eigen::Index> rp{4, 2, 0, 3, 1}, cp{2, 0, 3, 1};
  PerformanceTable p = t;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    p.source_ids[i] = t.source_ids[static_cast<std::size_t>(rp[i])];
    for (std::size_t j = 0; j < cp.size(); ++j) {
      p.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.values(rp[i], cp[j]);
    }
  }
  for (std::size_t j = 0; j < cp.size(); ++j) {
    p.target_ids[j] = t.target_ids[static_cast<std::size_t>(cp[j])];
    p.zero_shot(static_cast<Eigen::Index>(j)) = t.zero_shot(cp[j]);
  }
  const auto perm = normalize_table(p);
  for (std::size_t i = 0; i < rp.size(); ++i)
    for (std::size_t j = 0; j < cp.size(); ++j)
      EXPECT_EQ(perm.matrix.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                base.matrix.values(rp[i], cp[j]));
}

TEST(Normalize, LiteralRowMaxMode) {
  PerformanceTable t;
  t.model_id = "m";
  t.source_ids = {"s1", "s2"};
  t.target_ids = {"t1", "t2"};
  t.values.resize(2, 2);
  t.values << 20, 40, 30, 10;
  t.missing = Mask::Constant(2, 2, false);
  t.zero_shot = Vector(2);
  t.zero_shot << 10, 0;
  t.zero_shot_missing = {false, false};
  const auto n = normalize_table(t, NormalizationMode::literal_row_max);
  // Row 1 max is 40: (20-10)/(40-10), (40-0)/(40-0).
  EXPECT_DOUBLE_EQ(n.matrix.values(0, 0), 10.0 / 30.0);
  EXPECT_DOUBLE_EQ(n.matrix.values(0, 1), 1.0);
  // Row 2 max is 30: (30-10)/(30-10), (10-0)/(30-0).
  EXPECT_DOUBLE_EQ(n.matrix.values(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(n.matrix.values(1, 1), 10.0 / 30.0);
}

TEST(Aggregate, StacksInInputOrder) {
  const auto agg = aggregate_models({normalized_of("a", 2, 3, 0.0), normalized_of("b", 2, 3, 100.0)});
  EXPECT_EQ(agg.matrix.rows(), 4);
  EXPECT_EQ(agg.matrix.cols(), 3);
  EXPECT_EQ(agg.matrix.row_labels, (std::vector<std::string>{"a/s01", "a/s02", "b/s01", "b/s02"}));
  EXPECT_EQ(agg.rows[2], (RowKey{"b", "s01"}));
  EXPECT_EQ(agg.matrix.values(2, 1), 101.0);
  EXPECT_EQ(agg.rows_of_model("b"), (std::vector<Eigen::Index>{2, 3}));
  EXPECT_EQ(agg.model_ids(), (std::vector<std::string>{"a", "b"}));
}

TEST(Aggregate, PermutedColumnsRejected) {
  auto b = normalized_of("b", 2, 3, 0.0);
  std::swap(b.matrix.col_labels[0], b.matrix.col_labels[2]);
  EXPECT_THROW(aggregate_models({normalized_of("a", 2, 3, 0.0), b}), InputError);
  EXPECT_THROW(aggregate_models({normalized_of("a", 2, 3, 0.0), normalized_of("a", 2, 3, 0.0)}), InputError);
  EXPECT_THROW(aggregate_models({}), InputError);
}

TEST(Aggregate, FullSizeDimensions) {
  std::vector<NormalizedTable> parts;
  for (const char* m : {"m1", "m2", "m3", "m4"}) parts.push_back(normalized_of(m, 23, 29, 0.0));
  const auto agg = aggregate_models(parts);
  EXPECT_EQ(agg.matrix.rows(), 92);
  EXPECT_EQ(agg.matrix.cols(), 29);
}

TEST(Aggregate, CsvRoundTripAndSplit) {
  auto a = normalized_of("a", 2, 3, 0.25);
  a.matrix.set_missing(1, 2);
  const auto agg = aggregate_models({a, normalized_of("b", 3, 3, -1.5)});
  const std::string text = format_aggregate(agg);
  EXPECT_EQ(text.substr(0, text.find('\n')), "model_id,source_task,t01,t02,t03");
  const auto back = parse_aggregate(text);
  EXPECT_EQ(format_aggregate(back), text);
  EXPECT_TRUE(back.matrix.missing(1, 2));
  const auto parts = split_aggregate(back);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[1].model_id, "b");
  EXPECT_EQ(parts[1].matrix.row_labels, tt::make_labels("s", 3));
  EXPECT_EQ(parts[1].matrix.values(2, 2), -1.5 + 8.0);
  EXPECT_THROW(parse_aggregate("source_task,t1\nx,1\n"), InputError);
}

TEST(ZeroShot, Means) {
  auto t = one_column({1.0}, 7.0);
  auto means = zero_shot_means({t});
  ASSERT_EQ(means.size(), 1u);
  EXPECT_DOUBLE_EQ(means[0].mean, 7.0);

  PerformanceTable u = t;
  u.target_ids = {"t1", "t2", "t3"};
  u.values = Matrix::Zero(1, 3);
  u.missing = Mask::Constant(1, 3, false);
  u.zero_shot = Vector(3);
  u.zero_shot << 40, 60, 1000;
  u.zero_shot_missing = {false, false, true};
  means = zero_shot_means({u});
  EXPECT_DOUBLE_EQ(means[0].mean, 50.0);
  EXPECT_EQ(means[0].n_targets, 2u);
}
