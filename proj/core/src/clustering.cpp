#include "taskfactor/clustering.hpp"

#include "taskfactor/csv.hpp"
#include "taskfactor/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace taskfactor {

std::vector<Eigen::Index> Dendrogram::members(Eigen::Index id) const {
  const auto k = static_cast<Eigen::Index>(leaves.size());
  if (id < 0 || id >= k + static_cast<Eigen::Index>(merges.size())) {
    throw InputError("dendrogram: unknown cluster id " + std::to_string(id));
  }
  if (id < k) return {id};
  const Merge& m = merges[static_cast<std::size_t>(id - k)];
  auto out = members(m.cluster_a);
  const auto rhs = members(m.cluster_b);
  out.insert(out.end(), rhs.begin(), rhs.end());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct Cluster {
  Eigen::Index id;
  Eigen::Index size;
  std::vector<Eigen::Index> leaves; // sorted
};

bool pair_key_less(const Cluster& a1, const Cluster& b1, const Cluster& a2, const Cluster& b2) {
  const auto& lo1 = std::min(a1.leaves, b1.leaves);
  const auto& hi1 = std::max(a1.leaves, b1.leaves);
  const auto& lo2 = std::min(a2.leaves, b2.leaves);
  const auto& hi2 = std::max(a2.leaves, b2.leaves);
  if (lo1 != lo2) return lo1 < lo2;
  return hi1 < hi2;
}

} // namespace

Dendrogram ward_linkage(const LabeledMatrix& points) {
  const Eigen::Index k = points.rows();
  if (k < 2) throw InputError("ward linkage: at least 2 leaves required");
  points.require_complete("ward linkage");

  Dendrogram d;
  d.leaves = points.row_labels;

  std::vector<Cluster> slots;
  for (Eigen::Index i = 0; i < k; ++i) slots.push_back({i, 1, {i}});
  std::vector<bool> active(static_cast<std::size_t>(k), true);

  Matrix cost = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double c = 0.5 * (points.values.row(i) - points.values.row(j)).squaredNorm();
      cost(i, j) = c;
      cost(j, i) = c;
    }
  }

  for (Eigen::Index step = 0; step < k - 1; ++step) {
    Eigen::Index best_i = -1;
    Eigen::Index best_j = -1;
    double best = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = i + 1; j < k; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        const double c = cost(i, j);
        if (best_i < 0) {
          best_i = i;
          best_j = j;
          best = c;
          continue;
        }
        const double tol = 1e-12 * std::max(1.0, std::abs(best));
        if (c < best - tol) {
          best_i = i;
          best_j = j;
          best = c;
        } else if (std::abs(c - best) <= tol &&
                   pair_key_less(slots[static_cast<std::size_t>(i)], slots[static_cast<std::size_t>(j)],
                                 slots[static_cast<std::size_t>(best_i)], slots[static_cast<std::size_t>(best_j)])) {
          best_i = i;
          best_j = j;
          best = std::min(best, c);
        }
      }
    }

    Cluster& a = slots[static_cast<std::size_t>(best_i)];
    Cluster& b = slots[static_cast<std::size_t>(best_j)];
    const auto na = static_cast<double>(a.size);
    const auto nb = static_cast<double>(b.size);
    const double height = cost(best_i, best_j);

    for (Eigen::Index other = 0; other < k; ++other) {
      if (!active[static_cast<std::size_t>(other)] || other == best_i || other == best_j) continue;
      const auto nk = static_cast<double>(slots[static_cast<std::size_t>(other)].size);
      const double updated =
          ((na + nk) * cost(other, best_i) + (nb + nk) * cost(other, best_j) - nk * height) / (na + nb + nk);
      cost(other, best_i) = updated;
      cost(best_i, other) = updated;
    }

    const Eigen::Index new_id = k + step;
    d.merges.push_back({std::min(a.id, b.id), std::max(a.id, b.id), height, a.size + b.size});

    std::vector<Eigen::Index> merged;
    std::merge(a.leaves.begin(), a.leaves.end(), b.leaves.begin(), b.leaves.end(), std::back_inserter(merged));
    a = Cluster{new_id, a.size + b.size, std::move(merged)};
    active[static_cast<std::size_t>(best_j)] = false;
  }
  return d;
}

std::vector<std::vector<std::string>> cut_tree(const Dendrogram& d, Eigen::Index k) {
  const auto n = static_cast<Eigen::Index>(d.leaves.size());
  if (k < 1 || k > n) throw InputError("cut_tree: k must be in [1, " + std::to_string(n) + "]");
  if (static_cast<Eigen::Index>(d.merges.size()) != n - 1) throw InputError("cut_tree: dendrogram is incomplete");

  std::vector<Eigen::Index> parent(static_cast<std::size_t>(2 * n - 1));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<Eigen::Index(Eigen::Index)> find = [&](Eigen::Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  for (Eigen::Index s = 0; s < n - k; ++s) {
    const Merge& m = d.merges[static_cast<std::size_t>(s)];
    parent[static_cast<std::size_t>(find(m.cluster_a))] = n + s;
    parent[static_cast<std::size_t>(find(m.cluster_b))] = n + s;
  }

  std::vector<std::pair<Eigen::Index, std::vector<Eigen::Index>>> groups;
  for (Eigen::Index leaf = 0; leaf < n; ++leaf) {
    const Eigen::Index root = find(leaf);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == root; });
    if (it == groups.end()) {
      groups.push_back({root, {leaf}});
    } else {
      it->second.push_back(leaf);
    }
  }
  std::vector<std::vector<std::string>> out;
  for (const auto& [root, leaves] : groups) {
    std::vector<std::string> names;
    for (auto l : leaves) names.push_back(d.leaves[static_cast<std::size_t>(l)]);
    out.push_back(std::move(names));
  }
  return out;
}

namespace {

std::string newick_name(const std::string& s) {
  if (s.find_first_of(" ():;,[]'\t\n") == std::string::npos) return s;
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'') out.push_back('\'');
    out.push_back(ch);
  }
  out.push_back('\'');
  return out;
}

} // namespace

std::string to_newick(const Dendrogram& d) {
  const auto n = static_cast<Eigen::Index>(d.leaves.size());
  auto height_of = [&](Eigen::Index id) {
    return id < n ? 0.0 : d.merges[static_cast<std::size_t>(id - n)].height;
  };
  std::function<std::string(Eigen::Index)> node = [&](Eigen::Index id) -> std::string {
    if (id < n) return newick_name(d.leaves[static_cast<std::size_t>(id)]);
    const Merge& m = d.merges[static_cast<std::size_t>(id - n)];
    return "(" + node(m.cluster_a) + ":" + csv::format_number(m.height - height_of(m.cluster_a)) + "," +
           node(m.cluster_b) + ":" + csv::format_number(m.height - height_of(m.cluster_b)) + ")";
  };
  if (d.merges.empty()) return n == 1 ? newick_name(d.leaves.front()) + ";\n" : ";\n";
  return node(n + static_cast<Eigen::Index>(d.merges.size()) - 1) + ";\n";
}

std::string to_merge_json(const Dendrogram& d) {
  nlohmann::ordered_json j;
  j["height_convention"] = "ward_delta_sse";
  j["leaves"] = d.leaves;
  auto merges = nlohmann::ordered_json::array();
  const auto n = static_cast<Eigen::Index>(d.leaves.size());
  for (std::size_t s = 0; s < d.merges.size(); ++s) {
    const Merge& m = d.merges[s];
    nlohmann::ordered_json jm;
    jm["step"] = s + 1;
    jm["cluster_a"] = m.cluster_a;
    jm["cluster_b"] = m.cluster_b;
    jm["new_cluster"] = n + static_cast<Eigen::Index>(s);
    jm["height"] = m.height;
    jm["size"] = m.size;
    std::vector<std::string> names;
    for (auto leaf : d.members(n + static_cast<Eigen::Index>(s))) names.push_back(d.leaves[static_cast<std::size_t>(leaf)]);
    jm["members"] = names;
    merges.push_back(std::move(jm));
  }
  j["merges"] = std::move(merges);
  return j.dump(2) + "\n";
}

} // namespace taskfactor
