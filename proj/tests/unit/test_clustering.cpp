#include "taskfactor/clustering.hpp"

#include "oracles.hpp"
#include "synthetic.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

using namespace taskfactor;
namespace tt = taskfactor::testing;

namespace {

LabeledMatrix points_of(const Matrix& m) { return LabeledMatrix(tt::make_labels("p", m.rows()), {"x", "y"}, m); }

LabeledMatrix line(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return LabeledMatrix(tt::make_labels("p", m.rows()), {"x"}, m);
}

std::set<std::set<std::string>> as_partition(const std::vector<std::vector<std::string>>& groups) {
  std::set<std::set<std::string>> out;
  for (const auto& g : groups) out.insert(std::set<std::string>(g.begin(), g.end()));
  return out;
}

} // namespace

TEST(Ward, WorkedOneDimensionalExample) {
  const auto d = ward_linkage(line({0.0, 1.0, 10.0}));
  ASSERT_EQ(d.merges.size(), 2u);
  EXPECT_EQ(d.merges[0].cluster_a, 0);
  EXPECT_EQ(d.merges[0].cluster_b, 1);
  EXPECT_NEAR(d.merges[0].height, 0.5, 1e-12);
  EXPECT_EQ(d.merges[1].cluster_a, 2);
  EXPECT_EQ(d.merges[1].cluster_b, 3);
  EXPECT_NEAR(d.merges[1].height, (2.0 * 1.0 / 3.0) * 9.5 * 9.5, 1e-9);
  EXPECT_EQ(d.merges[1].size, 3);
}

TEST(Ward, CoincidentPoints) {
  const auto d = ward_linkage(line({4.0, 4.0}));
  ASSERT_EQ(d.merges.size(), 1u);
  EXPECT_EQ(d.merges[0].height, 0.0);
}

TEST(Ward, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 gen(seed);
    const Matrix pts = tt::random_matrix(6, 2, gen);
    const auto d = ward_linkage(points_of(pts));
    const auto oracle = tt::brute_force_ward(pts);
    ASSERT_EQ(d.merges.size(), oracle.size());
    for (std::size_t s = 0; s < oracle.size(); ++s) {
      const auto a = d.members(d.merges[s].cluster_a);
      const auto b = d.members(d.merges[s].cluster_b);
      const std::set<std::vector<Eigen::Index>> got{a, b};
      const std::set<std::vector<Eigen::Index>> want{oracle[s].left, oracle[s].right};
      EXPECT_EQ(got, want) << "seed " << seed << " step " << s;
      EXPECT_NEAR(d.merges[s].height, oracle[s].height, 1e-9 * std::max(1.0, oracle[s].height));
    }
  }
}

TEST(Ward, TiesBrokenByLeafSets) {
  // Four corners of a square: all four edges cost the same.
  Matrix pts(4, 2);
  pts << 0, 0, 1, 0, 0, 1, 1, 1;
  const auto d = ward_linkage(points_of(pts));
  const auto oracle = tt::brute_force_ward(pts);
  EXPECT_EQ(d.members(d.merges[0].cluster_a), (std::vector<Eigen::Index>{0}));
  EXPECT_EQ(d.members(d.merges[0].cluster_b), (std::vector<Eigen::Index>{1}));
  for (std::size_t s = 0; s < oracle.size(); ++s) {
    const std::set<std::vector<Eigen::Index>> got{d.members(d.merges[s].cluster_a), d.members(d.merges[s].cluster_b)};
    EXPECT_EQ(got, (std::set<std::vector<Eigen::Index>>{oracle[s].left, oracle[s].right}));
  }
}

TEST(Ward, MonotoneAndVarianceBookkeeping) {
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix pts = tt::random_matrix(15, 2, gen);
    const auto d = ward_linkage(points_of(pts));
    double total = 0.0;
    for (std::size_t s = 0; s < d.merges.size(); ++s) {
      if (s > 0) EXPECT_GE(d.merges[s].height, d.merges[s - 1].height - 1e-12);
      total += d.merges[s].height;
    }
    const double sse = (pts.rowwise() - pts.colwise().mean()).squaredNorm();
    EXPECT_NEAR(total, sse, 1e-8);
  }
}

TEST(Ward, Preconditions) {
  EXPECT_THROW(ward_linkage(line({1.0})), InputError);
  auto p = line({1.0, 2.0});
  p.set_missing(0, 0);
  EXPECT_THROW(ward_linkage(p), InputError);
}

TEST(CutTree, Extremes) {
  std::mt19937_64 gen(42);
  const auto d = ward_linkage(points_of(tt::random_matrix(5, 2, gen)));
  const auto singletons = cut_tree(d, 5);
  ASSERT_EQ(singletons.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(singletons[i], (std::vector<std::string>{d.leaves[i]}));
  const auto all = cut_tree(d, 1);
  ASSERT_EQ(all.size(), 1u);
  EXPECT_EQ(all[0], d.leaves);
  EXPECT_THROW(cut_tree(d, 0), InputError);
  EXPECT_THROW(cut_tree(d, 6), InputError);
}

TEST(CutTree, WorkedExample) {
  const auto d = ward_linkage(line({0.0, 1.0, 10.0}));
  EXPECT_EQ(cut_tree(d, 2), (std::vector<std::vector<std::string>>{{"p01", "p02"}, {"p03"}}));
}

TEST(CutTree, LeafPermutationKeepsPartitions) {
  std::mt19937_64 gen(43);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix pts = tt::random_matrix(9, 2, gen);
    const auto base = points_of(pts);
    std::vector<Eigen::Index> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    LabeledMatrix shuffled = base.select_rows(perm);
    const auto d1 = ward_linkage(base);
    const auto d2 = ward_linkage(shuffled);
    for (Eigen::Index k = 1; k <= 9; ++k) EXPECT_EQ(as_partition(cut_tree(d1, k)), as_partition(cut_tree(d2, k)));
  }
}

TEST(Export, NewickAndJson) {
  const auto d = ward_linkage(line({0.0, 1.0, 10.0}));
  const std::string newick = to_newick(d);
  EXPECT_EQ(newick.substr(0, 5), "(p03:");
  EXPECT_NE(newick.find(",(p01:0.5,p02:0.5):"), std::string::npos);
  EXPECT_EQ(newick.back(), '\n');
  const auto j = nlohmann::json::parse(to_merge_json(d));
  EXPECT_EQ(j["height_convention"], "ward_delta_sse");
  ASSERT_EQ(j["merges"].size(), 2u);
  EXPECT_EQ(j["merges"][1]["new_cluster"], 4);
  EXPECT_EQ(j["merges"][1]["members"], (std::vector<std::string>{"p01", "p02", "p03"}));
}
