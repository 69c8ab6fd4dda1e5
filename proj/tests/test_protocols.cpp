#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "eegraph/errors.hpp"
#include "eegraph/protocols.hpp"
#include "eegraph/rng.hpp"

using namespace eegraph;

namespace {

Dataset balanced_synth(int subjects, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_subjects = subjects;
  spec.samples_per_subject = 20;
  spec.n_nodes = 6;
  spec.n_features = 3;
  spec.seed = seed;
  return synth_generate(spec);
}

ModelConfig base_config(const Dataset& ds) {
  ModelConfig cfg;
  cfg.n_nodes = static_cast<int>(ds.n_nodes);
  cfg.n_features = static_cast<int>(ds.n_features);
  cfg.n_classes = ds.n_classes;
  cfg.hidden_dim = 8;
  cfg.dropout = 0.0;
  return cfg;
}

// Always predicts class 0: every non-graph parameter zero, class-0 bias one.
ModelFactory constant_factory(const Dataset& ds) {
  return [cfg = base_config(ds)](const HyperParams&, std::uint64_t seed) {
    Model m = make_model(cfg, seed);
    for (auto& p : m.params) {
      if (p.role != ParamRole::adjacency) p.value.setZero();
    }
    m.param("fc.bias").value(0, 0) = 1.0;
    return m;
  };
}

ModelFactory dgcnn_factory(const Dataset& ds) {
  return [cfg = base_config(ds)](const HyperParams& hp, std::uint64_t seed) {
    auto c = cfg;
    if (hp.hidden_dim) c.hidden_dim = *hp.hidden_dim;
    return make_model(c, seed);
  };
}

TrainConfig frozen() {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 16;
  return cfg;
}

}  // namespace

TEST_CASE("cv and fcv worked matrices") {
  const AccuracyMatrix acc{{{0.5, 0.7, 0.6}, {0.6, 0.8, 0.5}}};
  const auto cv = cv_summary(acc);
  CHECK(cv.per_fold == std::vector<double>{0.7, 0.8});
  CHECK(cv.summary_accuracy == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(cv.selected_epochs == std::vector<int>{2, 2});

  const auto fcv = fcv_summary(acc);
  CHECK(column_means(acc)[0] == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(column_means(acc)[2] == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(fcv.summary_accuracy == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(fcv.selected_epochs == std::vector<int>{2});

  const AccuracyMatrix gap{{{0.9, 0.1}, {0.1, 0.9}}};
  CHECK(cv_summary(gap).summary_accuracy == doctest::Approx(0.9));
  CHECK(fcv_summary(gap).summary_accuracy == doctest::Approx(0.5));
  CHECK(fcv_summary(gap).selected_epochs == std::vector<int>{1});

  CHECK(cv_summary(AccuracyMatrix{{{0.37}}}).summary_accuracy == 0.37);
  const AccuracyMatrix flat{{{0.6, 0.6, 0.6}, {0.6, 0.6, 0.6}}};
  CHECK(cv_summary(flat).summary_accuracy == 0.6);
  CHECK(cv_summary(flat).selected_epochs == std::vector<int>{1, 1});
  CHECK(fcv_summary(flat).summary_accuracy == 0.6);
}

TEST_CASE("cv is never below fcv") {
  Rng rng(17);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    AccuracyMatrix acc;
    acc.acc.assign(10, std::vector<double>(100));
    for (auto& row : acc.acc) {
      for (auto& v : row) v = rng.uniform();
    }
    if (cv_summary(acc).summary_accuracy < fcv_summary(acc).summary_accuracy) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("accuracy matrix validation") {
  CHECK_THROWS_AS(AccuracyMatrix{}.validate(), ValidationError);
  CHECK_THROWS_AS((AccuracyMatrix{{{0.5}, {0.5, 0.5}}}.validate()), ValidationError);
  CHECK_THROWS_AS((AccuracyMatrix{{{1.5}}}.validate()), ValidationError);
}

TEST_CASE("tune_grid") {
  const AccuracyMatrix low{{{0.5, 0.6}, {0.5, 0.6}}};
  const AccuracyMatrix high{{{0.8, 0.7}, {0.8, 0.7}}};
  auto one = tune_grid({low});
  CHECK(one.grid_point == 0);
  CHECK(one.epoch_index == 1);
  auto two = tune_grid({low, high});
  CHECK(two.grid_point == 1);
  CHECK(two.epoch_index == 0);
  CHECK(two.score == doctest::Approx(0.8));
  CHECK(tune_grid({high, high}).grid_point == 0);
  CHECK(tune_grid({std::nullopt, low}).grid_point == 1);
  CHECK_THROWS_AS(tune_grid({std::nullopt, std::nullopt}), DivergenceError);
}

TEST_CASE("make_grid order") {
  const auto grid = make_grid({1e-3, 1e-2}, {8, 16, 32});
  REQUIRE(grid.size() == 6);
  CHECK(grid[1].learning_rate == 1e-3);
  CHECK(grid[1].hidden_dim == 16);
  CHECK(grid[3].learning_rate == 1e-2);
  CHECK(make_grid({}, {}).size() == 1);
}

TEST_CASE("collect_acc_matrix") {
  const auto ds = balanced_synth(4, 1);
  const auto plan = split_cross(ds.subjects, 2, 3);

  ProtocolOptions opts;
  opts.epochs = 1;
  const auto shape = collect_acc_matrix(constant_factory(ds), plan, ds, frozen(), opts);
  CHECK(shape.folds() == 2);
  CHECK(shape.epochs() == 1);

  opts.epochs = 3;
  const auto acc = collect_acc_matrix(constant_factory(ds), plan, ds, frozen(), opts);
  for (const auto& row : acc.acc) {
    for (double v : row) CHECK(v == 0.5);
  }

  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  const auto a = collect_acc_matrix(dgcnn_factory(ds), plan, ds, cfg, opts);
  const auto b = collect_acc_matrix(dgcnn_factory(ds), plan, ds, cfg, opts);
  CHECK(a.acc == b.acc);
  opts.jobs = 2;
  CHECK(collect_acc_matrix(dgcnn_factory(ds), plan, ds, cfg, opts).acc == a.acc);

  opts.epochs = 0;
  CHECK_THROWS_AS(collect_acc_matrix(dgcnn_factory(ds), plan, ds, cfg, opts), ValidationError);
}

TEST_CASE("ncv with a constant predictor scores one half") {
  const auto ds = balanced_synth(4, 2);
  NcvSettings settings;
  settings.k = 2;
  settings.k_inner = 2;
  settings.seed = 5;
  ProtocolOptions opts;
  opts.epochs = 2;
  const auto r = ncv_run(constant_factory(ds), ds, settings, {HyperParams{}}, frozen(), opts);
  CHECK(r.summary_accuracy == 0.5);
  CHECK(r.outer.size() == 2);
  for (const auto& t : r.outer) CHECK(t.selected_epoch == 1);
}

TEST_CASE("ncv audit shows every test fold read once, last") {
  const auto ds = balanced_synth(6, 3);
  NcvSettings settings;
  settings.k = 3;
  settings.k_inner = 2;
  settings.seed = 11;
  AuditLog log;
  ProtocolOptions opts;
  opts.epochs = 2;
  opts.audit = &log;
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  ncv_run(dgcnn_factory(ds), ds, settings, make_grid({1e-2}, {4, 8}), cfg, opts);

  const auto outer = make_plan(SplitMode::cross, ds.subjects, 3, 11);
  const auto records = log.records();
  for (std::size_t i = 0; i < outer.k(); ++i) {
    CAPTURE(i);
    const std::set<std::size_t> test(outer.folds[i].begin(), outer.folds[i].end());
    std::uint64_t last_other = 0;
    std::uint64_t first_test = 0;
    int test_records = 0;
    for (const auto& rec : records) {
      if (rec.tag.outer_fold != static_cast<int>(i)) continue;
      if (rec.tag.phase == "test") {
        ++test_records;
        first_test = rec.first_seq;
        CHECK(std::set<std::size_t>(rec.indices.begin(), rec.indices.end()) == test);
        continue;
      }
      last_other = std::max(last_other, rec.last_seq);
      for (auto idx : rec.indices) CHECK(test.count(idx) == 0);
    }
    CHECK(test_records == 1);
    CHECK(first_test > last_other);
  }
}

TEST_CASE("ncv prefers the learning rate that trains") {
  SynthSpec spec;
  spec.n_subjects = 6;
  spec.samples_per_subject = 40;
  spec.n_nodes = 6;
  spec.n_features = 3;
  spec.seed = 4;
  const auto ds = synth_generate(spec);
  NcvSettings settings;
  settings.k = 3;
  settings.k_inner = 2;
  settings.seed = 2;
  ProtocolOptions opts;
  opts.epochs = 15;
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.l1_coef = 1e-4;
  cfg.l2_coef = 1e-4;
  const auto r = ncv_run(dgcnn_factory(ds), ds, settings, make_grid({1e-3, 1e3}, {}), cfg, opts);
  for (const auto& t : r.outer) {
    CHECK(t.selected_grid_point == 0);
    CHECK(t.inner_score > 0.8);
  }
}

TEST_CASE("ncv is identical serial and parallel") {
  const auto ds = balanced_synth(6, 5);
  NcvSettings settings;
  settings.k = 3;
  settings.k_inner = 2;
  settings.seed = 8;
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  ProtocolOptions opts;
  opts.epochs = 3;
  const auto grid = make_grid({1e-2, 1e-3}, {});
  const auto serial = ncv_run(dgcnn_factory(ds), ds, settings, grid, cfg, opts);
  opts.jobs = 3;
  const auto parallel = ncv_run(dgcnn_factory(ds), ds, settings, grid, cfg, opts);
  CHECK(to_json(serial).dump() == to_json(parallel).dump());
  CHECK(acc_matrix_csv(serial) == acc_matrix_csv(parallel));
}

TEST_CASE("ncv intra mode and argument checks") {
  const auto ds = balanced_synth(2, 6);
  NcvSettings settings;
  settings.k = 2;
  settings.k_inner = 2;
  settings.mode = SplitMode::intra;
  ProtocolOptions opts;
  opts.epochs = 1;
  const auto r = ncv_run(constant_factory(ds), ds, settings, {HyperParams{}}, frozen(), opts);
  CHECK(r.outer.size() == 2);
  settings.k_inner = 1;
  CHECK_THROWS_AS(ncv_run(constant_factory(ds), ds, settings, {HyperParams{}}, frozen(), opts), ValidationError);
  settings.k_inner = 2;
  CHECK_THROWS_AS(ncv_run(constant_factory(ds), ds, settings, {}, frozen(), opts), ValidationError);
}

TEST_CASE("csv and json layout") {
  const AccuracyMatrix acc{{{0.5, 0.75}, {0.25, 1.0}}};
  const auto csv = acc_matrix_csv(cv_summary(acc));
  CHECK(csv == "fold,epoch_1,epoch_2\n0,0.5,0.75\n1,0.25,1\n");
  const auto j = to_json(fcv_summary(acc));
  CHECK(j.at("protocol") == "fcv");
  CHECK(j.at("summary_accuracy") == 0.875);
}
