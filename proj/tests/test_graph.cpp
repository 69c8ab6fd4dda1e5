#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <Eigen/Eigenvalues>

#include "eegraph/errors.hpp"
#include "eegraph/graph.hpp"
#include "eegraph/models.hpp"
#include "eegraph/rng.hpp"

using namespace eegraph;
using Eigen::MatrixXd;

TEST_CASE("normalize_adjacency of the identity is the identity") {
  const MatrixXd a = MatrixXd::Identity(5, 5);
  CHECK(normalize_adjacency(a) == a);
}

TEST_CASE("normalize_adjacency on the all-ones 2x2 graph") {
  const MatrixXd a = MatrixXd::Ones(2, 2);
  const MatrixXd expected = MatrixXd::Constant(2, 2, 0.5);
  CHECK((normalize_adjacency(a) - expected).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(degrees(a)(0) == 2.0);
}

TEST_CASE("zero-degree row names the node") {
  MatrixXd a = MatrixXd::Identity(3, 3);
  a(1, 1) = 0.0;
  try {
    normalize_adjacency(a);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("node 1") != std::string::npos);
  }
}

TEST_CASE("signed rows normalize by absolute degree") {
  MatrixXd a(2, 2);
  a << 1.0, -3.0, -3.0, 1.0;  // degrees -2, -2
  const MatrixXd n = normalize_adjacency(a);
  CHECK(n(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(n(0, 1) == doctest::Approx(-1.5).epsilon(1e-15));
}

TEST_CASE("normalization is invariant to positive scaling") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    MatrixXd a(6, 6);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(0.0, 2.0);
    const double c = rng.uniform(1e-3, 1e3);
    CHECK((normalize_adjacency(c * a) - normalize_adjacency(a)).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("spectrum of a normalized nonnegative symmetric graph lies in [-1, 1]") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    MatrixXd a(8, 8);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(0.0, 1.0);
    a = (a + a.transpose()).eval();
    a.diagonal().array() += 0.1;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(normalize_adjacency(a));
    CHECK(eig.eigenvalues().minCoeff() >= -1.0 - 1e-9);
    CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-9);
  }
}

TEST_CASE("gcn_layer_forward follows sigma(A H W)") {
  SUBCASE("identity chain") {
    MatrixXd h(3, 2);
    h << 1, -2, 3, 4, -5, 6;
    CHECK(gcn_layer_forward(h, MatrixXd::Identity(3, 3), MatrixXd::Identity(2, 2), Activation::identity) == h);
  }
  SUBCASE("two nodes averaged") {
    const MatrixXd a = MatrixXd::Constant(2, 2, 0.5);
    MatrixXd h(2, 1);
    h << 2, 0;
    const MatrixXd out = gcn_layer_forward(h, a, MatrixXd::Ones(1, 1), Activation::relu);
    CHECK(std::abs(out(0, 0) - 1.0) <= 1e-12);
    CHECK(std::abs(out(1, 0) - 1.0) <= 1e-12);
  }
  SUBCASE("relu clips negatives") {
    MatrixXd h(1, 2);
    h << 1.0, -1.0;
    const MatrixXd out = gcn_layer_forward(h, MatrixXd::Identity(1, 1), MatrixXd::Identity(2, 2), Activation::relu);
    CHECK(out(0, 1) == 0.0);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(gcn_layer_forward(MatrixXd::Ones(3, 2), MatrixXd::Identity(2, 2), MatrixXd::Ones(2, 2),
                                      Activation::relu),
                    ValidationError);
  }
}

TEST_CASE("init_adjacency") {
  SUBCASE("distance sqrt(delta) clamps to one") {
    MatrixXd pos(2, 3);
    pos << 0, 0, 0, std::sqrt(2.0), 0, 0;
    const MatrixXd a = init_adjacency(pos, 2.0);
    CHECK(a(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(a(0, 0) == 1.0);
  }
  SUBCASE("inverse square") {
    MatrixXd pos(2, 3);
    pos << 0, 0, 0, 0, 2, 0;
    const MatrixXd a = init_adjacency(pos, 1.0);
    CHECK(a(0, 1) == 0.25);
    CHECK(a(1, 0) == 0.25);
  }
  SUBCASE("global pairs are negative and symmetric") {
    MatrixXd pos(3, 3);
    pos << 0, 0, 0, 1, 0, 0, 0, 3, 0;
    const MatrixXd a = init_adjacency(pos, 1.0, {{0, 1}}, -1.0);
    CHECK(a(0, 1) == -1.0);
    CHECK(a(1, 0) == -1.0);
    CHECK(a.isApprox(a.transpose()));
  }
  SUBCASE("coincident electrodes") {
    MatrixXd pos = MatrixXd::Zero(2, 3);
    CHECK_THROWS_AS(init_adjacency(pos, 1.0), ValidationError);
  }
  SUBCASE("positive global weight is rejected") {
    MatrixXd pos(2, 3);
    pos << 0, 0, 0, 1, 0, 0;
    CHECK_THROWS(init_adjacency(pos, 1.0, {{0, 1}}, 0.5));
  }
}

TEST_CASE("positions load from a JSON array of triples") {
  const auto file = std::filesystem::temp_directory_path() / "eegraph_positions_test.json";
  std::ofstream(file) << "[[0,0,0],[1,0,0],[0,1,0]]";
  const MatrixXd pos = load_positions(file);
  CHECK(pos.rows() == 3);
  CHECK(pos(1, 0) == 1.0);
  std::filesystem::remove(file);
}

TEST_CASE("fully connected default") {
  CHECK(fully_connected(4) == MatrixXd::Ones(4, 4));
}
