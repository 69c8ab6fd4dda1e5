#include "eegraph/graph.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "eegraph/errors.hpp"

namespace eegraph {

Eigen::VectorXd degrees(const Eigen::MatrixXd& a) { return a.rowwise().sum(); }

Eigen::MatrixXd normalize_adjacency(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) {
    throw ValidationError("normalize_adjacency: matrix is " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + ", expected square");
  }
  if (!a.allFinite()) throw ValidationError("normalize_adjacency: non-finite entries");
  const Eigen::VectorXd d = degrees(a);
  Eigen::VectorXd s(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (std::abs(d(i)) <= kDegreeEpsilon) {
      throw ValidationError("normalize_adjacency: degenerate degree " + std::to_string(d(i)) +
                            " at node " + std::to_string(i));
    }
    s(i) = 1.0 / std::sqrt(std::abs(d(i)));
  }
  return s.asDiagonal() * a * s.asDiagonal();
}

Eigen::MatrixXd init_adjacency(const Eigen::MatrixXd& positions, double delta,
                               const std::vector<NodePair>& global_pairs, double global_weight) {
  if (positions.cols() != 3) throw ValidationError("init_adjacency: positions must be n x 3");
  if (!positions.allFinite()) throw ValidationError("init_adjacency: non-finite positions");
  if (!(delta > 0.0)) throw ValidationError("init_adjacency: delta must be positive");
  if (!global_pairs.empty() && !(global_weight < 0.0)) {
    throw ValidationError("init_adjacency: global_weight must be negative");
  }
  const Eigen::Index n = positions.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d2 = (positions.row(i) - positions.row(j)).squaredNorm();
      if (d2 == 0.0) {
        throw ValidationError("init_adjacency: electrodes " + std::to_string(i) + " and " +
                              std::to_string(j) + " coincide");
      }
      a(i, j) = a(j, i) = std::min(1.0, delta / d2);
    }
  }
  for (const auto& [i, j] : global_pairs) {
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw ValidationError("init_adjacency: global pair (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") out of range");
    }
    a(i, j) = a(j, i) = global_weight;
  }
  return a;
}

Eigen::MatrixXd fully_connected(int n_nodes) { return Eigen::MatrixXd::Ones(n_nodes, n_nodes); }

Eigen::MatrixXd load_positions(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError(DataErrorKind::missing_file, "missing file: " + file.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(DataErrorKind::malformed, file.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw DataError(DataErrorKind::malformed, file.string() + ": expected an array");
  Eigen::MatrixXd pos(static_cast<Eigen::Index>(doc.size()), 3);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& row = doc[i];
    if (!row.is_array() || row.size() != 3) {
      throw DataError(DataErrorKind::malformed,
                      file.string() + ": entry " + std::to_string(i) + " is not an [x,y,z] triple");
    }
    for (int k = 0; k < 3; ++k) {
      if (!row[k].is_number()) {
        throw DataError(DataErrorKind::malformed,
                        file.string() + ": entry " + std::to_string(i) + " has a non-numeric coordinate");
      }
      pos(static_cast<Eigen::Index>(i), k) = row[k].get<double>();
    }
  }
  return pos;
}

}  // namespace eegraph
