#pragma once

#include "taskfactor/labeled_matrix.hpp"

#include <string>
#include <vector>

namespace taskfactor {

/// One agglomeration step. Cluster ids follow the usual linkage-matrix
/// convention: leaves are 0..K-1 and merge s creates cluster K+s.
struct Merge {
  Eigen::Index cluster_a;
  Eigen::Index cluster_b;
  double height; ///< Ward cost: increase in within-cluster sum of squares
  Eigen::Index size;
};

struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;

  /// Sorted leaf indices under cluster `id`.
  [[nodiscard]] std::vector<Eigen::Index> members(Eigen::Index id) const;
};

/// Ward agglomeration on the rows of `points` via the Lance-Williams update.
/// Ties within a relative 1e-12 go to the pair whose leaf-index sets compare
/// lexicographically smallest.
Dendrogram ward_linkage(const LabeledMatrix& points);

/// Partition after K-k merges. Groups are ordered by their smallest leaf
/// index; members keep leaf order.
std::vector<std::vector<std::string>> cut_tree(const Dendrogram& d, Eigen::Index k);

/// Newick text with branch lengths equal to height differences.
std::string to_newick(const Dendrogram& d);
std::string to_merge_json(const Dendrogram& d);

} // namespace taskfactor
