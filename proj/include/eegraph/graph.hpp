#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace eegraph {

using NodePair = std::pair<int, int>;

/// Adjacency plus optional electrode geometry.
struct GraphSpec {
  int n_nodes = 0;
  Eigen::MatrixXd adjacency;  // self-loops included
  std::optional<Eigen::MatrixXd> positions;  // [n x 3]
  std::vector<NodePair> global_pairs;
};

/// Rows with |degree| at or below this are degenerate.
inline constexpr double kDegreeEpsilon = 1e-12;

/// D^{-1/2} A D^{-1/2} with D_ii = sum_j A_ij. Signed graphs are normalized by
/// |D_ii|. Throws ValidationError naming the first degenerate node.
Eigen::MatrixXd normalize_adjacency(const Eigen::MatrixXd& a);

/// D_ii = sum_j A_ij.
Eigen::VectorXd degrees(const Eigen::MatrixXd& a);

/// Distance-based initialization: A_ij = min(1, delta / d(i,j)^2), A_ii = 1,
/// then every global pair (both orientations) set to `global_weight`.
Eigen::MatrixXd init_adjacency(const Eigen::MatrixXd& positions, double delta,
                               const std::vector<NodePair>& global_pairs = {},
                               double global_weight = -1.0);

/// All-ones adjacency (self-loops included).
Eigen::MatrixXd fully_connected(int n_nodes);

/// Reads a JSON array of [x, y, z] triples.
Eigen::MatrixXd load_positions(const std::filesystem::path& file);

}  // namespace eegraph
