#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

#include "eegraph/errors.hpp"
#include "eegraph/graph.hpp"
#include "eegraph/models.hpp"
#include "model_checks.hpp"

using namespace eegraph;
using Eigen::MatrixXd;

namespace {

const double kLn2 = std::log(2.0);

Dataset random_dataset(std::uint64_t seed, std::size_t n, int nodes, int features, int classes) {
  Rng rng(seed);
  Dataset ds;
  ds.n_samples = n;
  ds.n_nodes = static_cast<std::size_t>(nodes);
  ds.n_features = static_cast<std::size_t>(features);
  ds.n_classes = classes;
  for (std::size_t i = 0; i < n * ds.sample_stride(); ++i) ds.features.push_back(static_cast<float>(rng.normal()));
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels.push_back(static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(classes))));
    ds.subjects.push_back(static_cast<std::int32_t>(i % 3));
  }
  return ds;
}

ModelConfig small_config(ModelKind kind) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.n_nodes = 5;
  cfg.n_features = 3;
  cfg.n_classes = 2;
  cfg.hidden_dim = 6;
  cfg.dropout = 0.2;
  return cfg;
}

void zero_all(Model& m) {
  for (auto& p : m.params) {
    if (p.role != ParamRole::adjacency) p.value.setZero();
  }
}

bool same_params(const Model& a, const Model& b) {
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    if (a.params[i].value != b.params[i].value) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  for (auto kind : {ModelKind::dgcnn, ModelKind::rgnn, ModelKind::sparse_dgcnn, ModelKind::het_emotion_net}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      CAPTURE(to_string(kind));
      CAPTURE(seed);
      auto problem = checks::toy_problem(kind, seed);
      for (const auto& [name, err] : checks::gradient_errors(problem)) {
        CAPTURE(name);
        CHECK(err <= 1e-4);
      }
    }
  }
}

TEST_CASE("spectral-only HetEmotionNet ignores a missing temporal input") {
  auto cfg = small_config(ModelKind::het_emotion_net);
  cfg.het.streams = HetStreams::dual;
  const auto m = make_model(cfg, 4);
  Rng rng(9);
  auto batch = checks::random_batch(rng, 3, 5, 3, 2);
  const MatrixXd logits = model_forward(m, batch);
  CHECK(logits.rows() == 3);
  batch.temporal = MatrixXd::Ones(15, 4);
  CHECK_FALSE(model_forward(m, batch).isApprox(logits));
}

TEST_CASE("forward pass contracts") {
  for (auto kind : {ModelKind::dgcnn, ModelKind::rgnn, ModelKind::sparse_dgcnn, ModelKind::het_emotion_net}) {
    CAPTURE(to_string(kind));
    auto m = make_model(small_config(kind), 0);
    Rng rng(1);
    const auto batch = checks::random_batch(rng, 3, 5, 3, 2);
    const MatrixXd a = model_forward(m, batch);
    CHECK(a.rows() == 3);
    CHECK(a.cols() == 2);
    CHECK(model_forward(m, batch) == a);
    const MatrixXd p = softmax(a);
    for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(std::abs(p.row(r).sum() - 1.0) <= 1e-6);

    zero_all(m);
    const MatrixXd z = model_forward(m, batch);
    CHECK(z.cwiseAbs().maxCoeff() == 0.0);
    CHECK(softmax(z)(0, 0) == doctest::Approx(0.5));

    auto wrong = batch;
    wrong.features = MatrixXd::Zero(15, 4);
    CHECK_THROWS_AS(model_forward(m, wrong), ValidationError);
  }
}

TEST_CASE("non-finite parameters are reported with their name") {
  auto m = make_model(small_config(ModelKind::dgcnn), 0);
  m.param("conv.weight").value(0, 0) = std::numeric_limits<double>::infinity();
  Rng rng(1);
  try {
    model_forward(m, checks::random_batch(rng, 1, 5, 3, 2));
    FAIL("expected a contract error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("conv.weight") != std::string::npos);
  }
}

TEST_CASE("softmax rows sum to one for extreme logits") {
  Rng rng(4);
  MatrixXd z(50, 9);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal(0.0, 300.0);
  const MatrixXd p = softmax(z);
  for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(std::abs(p.row(r).sum() - 1.0) <= 1e-6);
}

TEST_CASE("loss") {
  auto m = make_model(small_config(ModelKind::dgcnn), 0);
  TrainConfig cfg;
  cfg.l1_coef = 0.0;
  cfg.l2_coef = 0.0;
  const std::vector<int> labels{0, 1};

  MatrixXd sure(2, 2);
  sure << 50, -50, -50, 50;
  CHECK(loss(m, sure, labels, cfg) < 1e-6);
  CHECK(loss(m, MatrixXd::Zero(2, 2), labels, cfg) == doctest::Approx(kLn2).epsilon(1e-12));

  zero_all(m);
  m.param("fc.weight").value(0, 0) = 2.0;
  const double base = loss(m, MatrixXd::Zero(2, 2), labels, cfg);
  cfg.l2_coef = 1.0;
  CHECK(loss(m, MatrixXd::Zero(2, 2), labels, cfg) - base == 4.0);

  cfg.l2_coef = 0.0;
  cfg.l1_coef = 0.5;
  m.param("gcn.0.weight").value(1, 1) = -3.0;
  CHECK(loss(m, MatrixXd::Zero(2, 2), labels, cfg) - base == doctest::Approx(2.5));

  CHECK_THROWS_AS(loss(m, MatrixXd::Zero(1, 2), std::vector<int>{2}, cfg), ValidationError);
}

TEST_CASE("emotion_dl_targets") {
  const std::vector<int> labels{0, 1, 2};
  CHECK(emotion_dl_targets(labels, 0.0, {}, 3) == MatrixXd::Identity(3, 3));
  const MatrixXd t = emotion_dl_targets(std::vector<int>{0}, 0.1, {}, 2);
  CHECK(t(0, 0) == doctest::Approx(0.9));
  CHECK(t(0, 1) == doctest::Approx(0.1));

  const std::vector<std::vector<int>> ring{{1}, {0, 2}, {1}};
  const MatrixXd r = emotion_dl_targets(labels, 0.3, ring, 3);
  CHECK(r(1, 0) == doctest::Approx(0.15));
  CHECK(r(0, 2) == 0.0);
  for (Eigen::Index i = 0; i < r.rows(); ++i) CHECK(std::abs(r.row(i).sum() - 1.0) <= 1e-12);

  CHECK_THROWS_AS(emotion_dl_targets(labels, 0.2, {{1}, {}, {1}}, 3), ConfigError);
  CHECK_THROWS_AS(emotion_dl_targets(labels, 1.0, {}, 3), ConfigError);
}

TEST_CASE("NodeDAT term") {
  auto cfg = small_config(ModelKind::rgnn);
  cfg.rgnn.node_dat = true;
  auto m = make_model(cfg, 3);

  SUBCASE("disabled model is a contract violation") {
    const auto plain = make_model(small_config(ModelKind::rgnn), 0);
    CHECK_THROWS_AS(node_dat_term(plain, MatrixXd::Zero(2, 6), MatrixXd::Zero(2, 6), 0.1), ContractError);
  }

  SUBCASE("constant one-half discriminator gives ln 2") {
    m.param("domain.weight").value.setZero();
    m.param("domain.bias").value.setZero();
    Rng rng(2);
    MatrixXd s(7, 6), t(4, 6);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
    CHECK(node_dat_term(m, s, t, 0.5).loss == doctest::Approx(kLn2).epsilon(1e-15));
  }

  SUBCASE("reversed gradient is scaled by beta") {
    Rng rng(5);
    MatrixXd s(3, 6), t(3, 6);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
    const auto one = node_dat_term(m, s, t, 1.0);
    const auto half = node_dat_term(m, s, t, 0.5);
    const auto zero = node_dat_term(m, s, t, 0.0);
    CHECK(half.grad_source.isApprox(0.5 * one.grad_source));
    CHECK(zero.grad_source.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zero.grad_weight == one.grad_weight);
    // Reversal: one step along -grad_source raises the discriminator loss.
    MatrixXd stepped = s - 0.01 * one.grad_source;
    CHECK(node_dat_term(m, stepped, t, 1.0).loss > one.loss);
  }

  SUBCASE("indistinguishable domains keep a trained discriminator at chance") {
    Rng rng(11);
    const Eigen::Index n = 20000;
    MatrixXd s(n, 6), t(n, 6);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
    double last = 0.0;
    for (int it = 0; it < 300; ++it) {
      const auto r = node_dat_term(m, s, t, 1.0);
      m.param("domain.weight").value -= 1.0 * r.grad_weight;
      m.param("domain.bias").value -= 1.0 * r.grad_bias;
      last = r.loss;
    }
    CHECK(last >= kLn2 - 1e-3);
    CHECK(node_dat_term(m, s, s, 1.0).loss >= kLn2 - 1e-12);
  }

  SUBCASE("beta zero leaves feature gradients untouched") {
    auto problem = checks::toy_problem(ModelKind::rgnn, 8);
    problem.model.config.rgnn.node_dat_beta = 0.0;
    const auto with = compute_gradients(problem.model, problem.source, problem.train, &problem.target);
    const auto without = compute_gradients(problem.model, problem.source, problem.train, nullptr);
    for (std::size_t i = 0; i < problem.model.params.size(); ++i) {
      if (problem.model.params[i].role == ParamRole::discriminator) continue;
      CAPTURE(problem.model.params[i].name);
      CHECK((with.grads[i] - without.grads[i]).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("prox_l1") {
  MatrixXd a(2, 2);
  a << 5.0, 0.5, -0.1, -7.0;
  const MatrixXd p = prox_l1(a, 0.2);
  CHECK(p(0, 1) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(p(1, 0) == 0.0);
  CHECK(p(0, 0) == 5.0);
  CHECK(p(1, 1) == -7.0);
  CHECK(prox_l1(a, 0.0) == a);
  CHECK(prox_l1(a, 0.5).cwiseAbs()(0, 1) == 0.0);
  CHECK_THROWS_AS(prox_l1(a, -1.0), ValidationError);

  Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    MatrixXd x(4, 4), y(4, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x.data()[i] = rng.normal(0.0, 2.0);
      y.data()[i] = rng.normal(0.0, 2.0);
    }
    const double lam = rng.uniform(0.0, 3.0);
    // Subtracting lambda can round by an ulp, hence the relative slack.
    CHECK((prox_l1(x, lam) - prox_l1(y, lam)).norm() <= (x - y).norm() * (1.0 + 1e-12));
  }
}

TEST_CASE("adjacency constraints hold through training") {
  const auto ds = random_dataset(1, 60, 5, 3, 2);
  const auto view = DatasetView::all(ds);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 16;
  for (auto kind : {ModelKind::dgcnn, ModelKind::sparse_dgcnn}) {
    CAPTURE(to_string(kind));
    auto m = make_model(small_config(kind), 2);
    for (int e = 0; e < 20; ++e) {
      train_epoch(m, view, cfg);
      CHECK(effective_adjacency(m).diagonal().minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("dominating adj_l1 clears the off-diagonal in one step") {
  auto cfg = small_config(ModelKind::sparse_dgcnn);
  cfg.sparse.adj_l1 = 1e6;
  auto m = make_model(cfg, 5);
  const auto ds = random_dataset(2, 8, 5, 3, 2);
  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.batch_size = 8;
  train_epoch(m, DatasetView::all(ds), tc);
  CHECK(m.optimizer_steps == 1);
  MatrixXd a = effective_adjacency(m);
  const MatrixXd diag = a.diagonal();
  a.diagonal().setZero();
  CHECK(a.cwiseAbs().maxCoeff() == 0.0);
  CHECK(diag.minCoeff() >= 1.0);
}

TEST_CASE("RGNN keeps a signed adjacency") {
  auto cfg = small_config(ModelKind::rgnn);
  MatrixXd init = MatrixXd::Ones(5, 5);
  init(0, 1) = init(1, 0) = -1.0;
  cfg.initial_adjacency = init;
  const auto m = make_model(cfg, 0);
  CHECK(effective_adjacency(m)(0, 1) == -1.0);
}

TEST_CASE("train_epoch") {
  const auto ds = random_dataset(3, 40, 5, 3, 2);
  const auto view = DatasetView::all(ds);

  SUBCASE("zero learning rate leaves parameters bit-identical") {
    for (auto kind : {ModelKind::dgcnn, ModelKind::rgnn, ModelKind::sparse_dgcnn, ModelKind::het_emotion_net}) {
      auto m = make_model(small_config(kind), 1);
      const auto before = m;
      TrainConfig cfg;
      cfg.learning_rate = 0.0;
      cfg.batch_size = 8;
      train_epoch(m, view, cfg);
      CHECK(same_params(m, before));
    }
  }

  SUBCASE("same seed, same data, same parameters") {
    TrainConfig cfg;
    cfg.batch_size = 8;
    auto a = make_model(small_config(ModelKind::het_emotion_net), 7);
    auto b = make_model(small_config(ModelKind::het_emotion_net), 7);
    for (int e = 0; e < 3; ++e) {
      const auto ma = train_epoch(a, view, cfg);
      const auto mb = train_epoch(b, view, cfg);
      CHECK(ma.mean_loss == mb.mean_loss);
    }
    CHECK(same_params(a, b));
  }

  SUBCASE("one sample is overfit with a strictly decreasing loss") {
    const DatasetView single(ds, {0});
    for (auto kind : {ModelKind::dgcnn, ModelKind::rgnn, ModelKind::sparse_dgcnn, ModelKind::het_emotion_net}) {
      CAPTURE(to_string(kind));
      auto mc = small_config(kind);
      mc.dropout = 0.0;
      auto m = make_model(mc, 3);
      TrainConfig cfg;
      cfg.learning_rate = 0.01;
      cfg.l1_coef = 0.0;
      cfg.l2_coef = 0.0;
      double previous = std::numeric_limits<double>::infinity();
      double last = 0.0;
      for (int e = 0; e < 50; ++e) {
        last = train_epoch(m, single, cfg).mean_loss;
        CHECK(last < previous);
        previous = last;
      }
      CHECK(last < 0.05);
    }
  }

  SUBCASE("blow-up raises a divergence error") {
    auto m = make_model(small_config(ModelKind::dgcnn), 1);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::sgd;
    cfg.learning_rate = 1e308;
    cfg.batch_size = 8;
    try {
      train_epoch(m, view, cfg);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.batch_index() >= 0);
    }
  }

  SUBCASE("empty slice") {
    auto m = make_model(small_config(ModelKind::dgcnn), 1);
    CHECK_THROWS_AS(train_epoch(m, DatasetView(ds, {}), TrainConfig{}), ValidationError);
  }
}

TEST_CASE("evaluate") {
  Dataset ds;
  ds.n_samples = 4;
  ds.n_nodes = 1;
  ds.n_features = 1;
  ds.n_classes = 2;
  ds.features = {1.0f, 1.0f, 1.0f, 1.0f};
  ds.labels = {0, 1, 0, 1};
  ds.subjects = {0, 0, 0, 0};
  auto cfg = small_config(ModelKind::dgcnn);
  cfg.n_nodes = 1;
  cfg.n_features = 1;
  auto m = make_model(cfg, 0);
  zero_all(m);
  CHECK(evaluate(m, DatasetView::all(ds)) == 0.5);

  // A predictor keyed on the input sign.
  ds.features = {-1.0f, 1.0f, -1.0f, 1.0f};
  cfg.n_layers = 1;
  cfg.hidden_dim = 1;
  cfg.activation = Activation::identity;
  auto sign = make_model(cfg, 0);
  zero_all(sign);
  sign.param("gcn.0.weight").value(0, 0) = 1.0;
  sign.param("conv.weight").value(0, 0) = 1.0;
  sign.param("fc.weight").value(0, 1) = 1.0;
  sign.param("fc.bias").value(0, 0) = 0.5;
  CHECK(evaluate(sign, DatasetView::all(ds)) == 1.0);
  ds.labels = {1, 0, 1, 0};
  CHECK(evaluate(sign, DatasetView::all(ds)) == 0.0);

  CHECK_THROWS_AS(evaluate(m, DatasetView(ds, {})), ValidationError);
  CHECK(argmax_rows(MatrixXd::Zero(2, 3)) == std::vector<int>{0, 0});
}

TEST_CASE("checkpoint round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "eegraph_ckpt_test";
  std::filesystem::remove_all(dir);
  for (auto kind : {ModelKind::dgcnn, ModelKind::rgnn, ModelKind::sparse_dgcnn, ModelKind::het_emotion_net}) {
    auto cfg = small_config(kind);
    cfg.rgnn.node_dat = kind == ModelKind::rgnn;
    cfg.rgnn.neighbor_map = {{1}, {0}};
    auto m = make_model(cfg, 13);
    m.params.front().value(0, 1) = 0.123456789012345;
    save_checkpoint(m, dir);
    const auto back = load_checkpoint(dir);
    CHECK(same_params(back, m));
    CHECK(back.config.kind == kind);
    CHECK(back.config.rgnn.neighbor_map == cfg.rgnn.neighbor_map);
  }
  std::filesystem::resize_file(dir / "params.bin", 8);
  CHECK_THROWS_AS(load_checkpoint(dir), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("configuration validation") {
  auto cfg = small_config(ModelKind::dgcnn);
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(make_model(cfg, 0), ConfigError);
  cfg = small_config(ModelKind::dgcnn);
  cfg.hidden_dim = 0;
  CHECK_THROWS_AS(make_model(cfg, 0), ConfigError);
  cfg = small_config(ModelKind::dgcnn);
  cfg.initial_adjacency = MatrixXd::Ones(2, 2);
  CHECK_THROWS_AS(make_model(cfg, 0), ConfigError);
  TrainConfig tc;
  tc.learning_rate = -1.0;
  CHECK_THROWS_AS(validate(tc), ConfigError);
  CHECK(parse_model_kind("sparse_dgcnn") == ModelKind::sparse_dgcnn);
  CHECK_THROWS_AS(parse_model_kind("gat"), ConfigError);
}
