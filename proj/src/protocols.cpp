#include "eegraph/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <map>
#include <thread>

#include "eegraph/errors.hpp"

namespace eegraph {

namespace {

// Runs fn(0..n-1) on up to `jobs` threads. Results must be written by index;
// the first failure in index order is rethrown.
void run_indexed(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// Odd-ranked subjects of the training side, used as NodeDAT's unlabelled
// target domain.
std::vector<std::size_t> domain_pool_positions(const DatasetView& train) {
  std::vector<std::int32_t> subjects(train.size());
  for (std::size_t p = 0; p < train.size(); ++p) subjects[p] = train.subject(p);
  const auto ids = distinct_subjects(subjects);
  if (ids.size() < 2) return {};
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < train.size(); ++p) {
    const auto rank = std::lower_bound(ids.begin(), ids.end(), subjects[p]) - ids.begin();
    if (rank % 2 == 1) out.push_back(p);
  }
  return out;
}

void append_number(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  out.append(buf, end);
}

}  // namespace

std::string to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::cv: return "cv";
    case ProtocolKind::fcv: return "fcv";
    case ProtocolKind::ncv: return "ncv";
  }
  return "unknown";
}

ProtocolKind parse_protocol_kind(std::string_view name) {
  if (name == "cv") return ProtocolKind::cv;
  if (name == "fcv") return ProtocolKind::fcv;
  if (name == "ncv") return ProtocolKind::ncv;
  throw ConfigError("unknown protocol '" + std::string(name) + "'");
}

nlohmann::json to_json(const HyperParams& hp) {
  nlohmann::json j = nlohmann::json::object();
  if (hp.learning_rate) j["learning_rate"] = *hp.learning_rate;
  if (hp.hidden_dim) j["hidden_dim"] = *hp.hidden_dim;
  return j;
}

std::vector<HyperParams> make_grid(const std::vector<double>& learning_rates, const std::vector<int>& hidden_dims) {
  std::vector<std::optional<double>> lrs(learning_rates.begin(), learning_rates.end());
  std::vector<std::optional<int>> hs(hidden_dims.begin(), hidden_dims.end());
  if (lrs.empty()) lrs.push_back(std::nullopt);
  if (hs.empty()) hs.push_back(std::nullopt);
  std::vector<HyperParams> grid;
  for (const auto& lr : lrs) {
    for (const auto& h : hs) grid.push_back({lr, h});
  }
  return grid;
}

TrainConfig with_overrides(TrainConfig cfg, const HyperParams& hp) {
  if (hp.learning_rate) cfg.learning_rate = *hp.learning_rate;
  return cfg;
}

void AccuracyMatrix::validate() const {
  if (acc.empty() || acc.front().empty()) throw ValidationError("accuracy matrix is empty");
  const auto t = acc.front().size();
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (acc[i].size() != t) {
      throw ValidationError("accuracy matrix row " + std::to_string(i) + " has " + std::to_string(acc[i].size()) +
                            " epochs, expected " + std::to_string(t));
    }
    for (std::size_t j = 0; j < t; ++j) {
      if (!(acc[i][j] >= 0.0 && acc[i][j] <= 1.0)) {
        throw ValidationError("accuracy matrix entry (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") outside [0, 1]");
      }
    }
  }
}

std::vector<double> column_means(const AccuracyMatrix& m) {
  m.validate();
  std::vector<double> avg(m.epochs(), 0.0);
  for (const auto& row : m.acc) {
    for (std::size_t j = 0; j < row.size(); ++j) avg[j] += row[j];
  }
  for (auto& v : avg) v /= static_cast<double>(m.folds());
  return avg;
}

std::vector<double> train_and_track(Model& model, const DatasetView& train, const DatasetView* eval,
                                    const TrainConfig& cfg, int epochs) {
  std::optional<DatasetView> pool;
  TrainExtras extras;
  if (model.config.kind == ModelKind::rgnn && model.config.rgnn.node_dat) {
    auto positions = domain_pool_positions(train);
    if (!positions.empty()) {
      pool = train.subview(std::move(positions), train.tag());
      extras.domain_target = &*pool;
    }
  }
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(epochs));
  for (int e = 0; e < epochs; ++e) {
    train_epoch(model, train, cfg, extras);
    if (eval) curve.push_back(evaluate(model, *eval));
  }
  return curve;
}

AccuracyMatrix collect_acc_matrix(const ModelFactory& factory, const FoldPlan& plan, const Dataset& ds,
                                  const TrainConfig& train_cfg, const ProtocolOptions& opts, const HyperParams& hp) {
  if (opts.epochs < 1) throw ValidationError("collect_acc_matrix: T must be at least 1");
  if (auto issues = check_plan(plan, ds.n_samples, ds.subjects); !issues.empty()) {
    throw ValidationError("collect_acc_matrix: invalid fold plan: " + issues.front());
  }
  const TrainConfig cfg = with_overrides(train_cfg, hp);
  AccuracyMatrix out;
  out.acc.resize(plan.k());
  run_indexed(plan.k(), opts.jobs, [&](std::size_t i) {
    const int fold = static_cast<int>(i);
    DatasetView train(ds, plan.complement(i), {"train", fold, -1, -1}, opts.audit);
    DatasetView val(ds, plan.folds[i], {"val", fold, -1, -1}, opts.audit);
    Model model = factory(hp, train_cfg.seed + i);
    try {
      out.acc[i] = train_and_track(model, train, &val, cfg, opts.epochs);
    } catch (const DivergenceError& e) {
      throw DivergenceError("fold " + std::to_string(i) + ": " + e.what(), e.batch_index());
    }
  });
  return out;
}

ProtocolResult cv_summary(const AccuracyMatrix& acc) {
  acc.validate();
  ProtocolResult r;
  r.protocol = ProtocolKind::cv;
  double total = 0.0;
  for (const auto& row : acc.acc) {
    const auto best = argmax_first(row);
    r.per_fold.push_back(row[best]);
    r.selected_epochs.push_back(static_cast<int>(best) + 1);
    total += row[best];
  }
  r.summary_accuracy = total / static_cast<double>(acc.folds());
  r.acc_matrix = acc;
  return r;
}

ProtocolResult fcv_summary(const AccuracyMatrix& acc) {
  const auto avg = column_means(acc);
  const auto best = argmax_first(avg);
  ProtocolResult r;
  r.protocol = ProtocolKind::fcv;
  r.summary_accuracy = avg[best];
  r.selected_epochs = {static_cast<int>(best) + 1};
  for (const auto& row : acc.acc) r.per_fold.push_back(row[best]);
  r.acc_matrix = acc;
  return r;
}

GridChoice tune_grid(const std::vector<std::optional<AccuracyMatrix>>& inner) {
  std::optional<GridChoice> best;
  for (std::size_t g = 0; g < inner.size(); ++g) {
    if (!inner[g]) continue;
    const auto avg = column_means(*inner[g]);
    const auto t = argmax_first(avg);
    if (!best || avg[t] > best->score) best = GridChoice{g, static_cast<int>(t), avg[t]};
  }
  if (!best) throw DivergenceError("tune_grid: every grid point failed", -1);
  return *best;
}

ProtocolResult ncv_run(const ModelFactory& factory, const Dataset& ds, const NcvSettings& settings,
                       const std::vector<HyperParams>& grid, const TrainConfig& train_cfg,
                       const ProtocolOptions& opts) {
  if (settings.k < 2 || settings.k_inner < 2) throw ValidationError("ncv_run: K and K' must both be at least 2");
  if (grid.empty()) throw ValidationError("ncv_run: grid must not be empty");
  if (opts.epochs < 1) throw ValidationError("ncv_run: T must be at least 1");

  AuditLog local_log;
  AuditLog& log = opts.audit ? *opts.audit : local_log;
  const FoldPlan outer = make_plan(settings.mode, ds.subjects, settings.k, settings.seed);

  ProtocolResult r;
  r.protocol = ProtocolKind::ncv;
  r.grid = grid;
  r.outer.resize(outer.k());

  run_indexed(outer.k(), opts.jobs, [&](std::size_t i) {
    const int fold = static_cast<int>(i);
    auto& trace = r.outer[i];
    const DatasetView train_val(ds, outer.complement(i), {"final_train", fold, -1, -1}, &log);

    std::vector<std::int32_t> inner_subjects(train_val.size());
    for (std::size_t p = 0; p < train_val.size(); ++p) inner_subjects[p] = train_val.subject(p);
    const FoldPlan inner = make_plan(settings.mode, inner_subjects, settings.k_inner, mix_seed(settings.seed, i + 1));
    const std::uint64_t inner_seed = mix_seed(train_cfg.seed, i + 1);

    trace.inner.resize(grid.size());
    trace.failures.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const TrainConfig cfg = with_overrides(train_cfg, grid[g]);
      AccuracyMatrix m;
      try {
        for (std::size_t j = 0; j < inner.k(); ++j) {
          const int jj = static_cast<int>(j);
          const int gg = static_cast<int>(g);
          auto inner_train = train_val.subview(inner.complement(j), {"inner_train", fold, jj, gg});
          auto inner_val = train_val.subview(inner.folds[j], {"inner_val", fold, jj, gg});
          Model model = factory(grid[g], inner_seed + j);
          m.acc.push_back(train_and_track(model, inner_train, &inner_val, cfg, opts.epochs));
        }
        trace.inner[g] = std::move(m);
      } catch (const DivergenceError& e) {
        trace.failures[g] = e.what();
      }
    }

    const GridChoice choice = tune_grid(trace.inner);
    trace.selected_grid_point = choice.grid_point;
    trace.selected_epoch = choice.epoch_index + 1;
    trace.inner_score = choice.score;

    // Re-initialize and retrain on the whole outer training side for T' epochs.
    const HyperParams& hp = grid[choice.grid_point];
    Model final_model = factory(hp, train_cfg.seed + i);
    try {
      train_and_track(final_model, train_val, nullptr, with_overrides(train_cfg, hp), trace.selected_epoch);
    } catch (const DivergenceError& e) {
      throw DivergenceError("outer fold " + std::to_string(i) + " final training: " + e.what(), e.batch_index());
    }
    const DatasetView test(ds, outer.folds[i], {"test", fold, -1, -1}, &log);
    trace.test_accuracy = evaluate(final_model, test);
    trace.test_size = test.size();

    const auto leaks = log.find_leaks(fold, outer.folds[i]);
    if (!leaks.empty()) {
      throw LeakageError("outer fold " + std::to_string(i) + ": " + leaks.front() + " (" +
                         std::to_string(leaks.size()) + " finding(s))");
    }
  });

  double total = 0.0;
  for (const auto& t : r.outer) {
    r.per_fold.push_back(t.test_accuracy);
    r.selected_epochs.push_back(t.selected_epoch);
    total += t.test_accuracy;
  }
  r.summary_accuracy = total / static_cast<double>(r.outer.size());
  r.audit_summary = summarize_audit(log);
  return r;
}

nlohmann::json to_json(const AccuracyMatrix& m) { return m.acc; }

nlohmann::json to_json(const ProtocolResult& r) {
  nlohmann::json j;
  j["protocol"] = to_string(r.protocol);
  j["summary_accuracy"] = r.summary_accuracy;
  j["per_fold"] = r.per_fold;
  j["selected_epochs"] = r.selected_epochs;
  if (!r.grid.empty()) {
    nlohmann::json g = nlohmann::json::array();
    for (const auto& hp : r.grid) g.push_back(to_json(hp));
    j["grid"] = g;
  }
  if (r.acc_matrix) j["acc_matrix"] = to_json(*r.acc_matrix);
  if (!r.outer.empty()) {
    nlohmann::json outer = nlohmann::json::array();
    for (std::size_t i = 0; i < r.outer.size(); ++i) {
      const auto& t = r.outer[i];
      nlohmann::json inner = nlohmann::json::array();
      for (std::size_t g = 0; g < t.inner.size(); ++g) {
        nlohmann::json cell;
        cell["grid_point"] = g;
        if (t.inner[g]) {
          cell["acc_matrix"] = to_json(*t.inner[g]);
          cell["avg"] = column_means(*t.inner[g]);
        } else {
          cell["failed"] = t.failures[g];
        }
        inner.push_back(cell);
      }
      outer.push_back({{"outer_fold", i},
                       {"selected_grid_point", t.selected_grid_point},
                       {"selected_hyperparams", to_json(r.grid.at(t.selected_grid_point))},
                       {"selected_epoch", t.selected_epoch},
                       {"inner_score", t.inner_score},
                       {"test_accuracy", t.test_accuracy},
                       {"test_size", t.test_size},
                       {"inner", inner}});
    }
    j["outer"] = outer;
  }
  if (!r.audit_summary.is_null()) j["audit"] = r.audit_summary;
  return j;
}

std::string acc_matrix_csv(const ProtocolResult& r) {
  std::string out;
  if (r.acc_matrix) {
    const auto& m = *r.acc_matrix;
    out += "fold";
    for (std::size_t e = 0; e < m.epochs(); ++e) out += ",epoch_" + std::to_string(e + 1);
    out += '\n';
    for (std::size_t i = 0; i < m.folds(); ++i) {
      out += std::to_string(i);
      for (double v : m.acc[i]) {
        out += ',';
        append_number(out, v);
      }
      out += '\n';
    }
    return out;
  }
  std::size_t epochs = 0;
  for (const auto& t : r.outer) {
    for (const auto& m : t.inner) {
      if (m) epochs = std::max(epochs, m->epochs());
    }
  }
  out += "outer_fold,grid_point,inner_fold";
  for (std::size_t e = 0; e < epochs; ++e) out += ",epoch_" + std::to_string(e + 1);
  out += '\n';
  for (std::size_t i = 0; i < r.outer.size(); ++i) {
    for (std::size_t g = 0; g < r.outer[i].inner.size(); ++g) {
      const auto& m = r.outer[i].inner[g];
      if (!m) continue;
      for (std::size_t j = 0; j < m->folds(); ++j) {
        out += std::to_string(i) + ',' + std::to_string(g) + ',' + std::to_string(j);
        for (double v : m->acc[j]) {
          out += ',';
          append_number(out, v);
        }
        out += '\n';
      }
    }
  }
  return out;
}

nlohmann::json summarize_audit(const AuditLog& log) {
  auto records = log.records();
  std::sort(records.begin(), records.end(), [](const AccessRecord& a, const AccessRecord& b) {
    return std::tie(a.tag.outer_fold, a.tag.phase, a.tag.inner_fold, a.tag.grid_point) <
           std::tie(b.tag.outer_fold, b.tag.phase, b.tag.inner_fold, b.tag.grid_point);
  });
  nlohmann::json out = nlohmann::json::array();
  for (const auto& rec : records) {
    out.push_back({{"phase", rec.tag.phase},
                   {"outer_fold", rec.tag.outer_fold},
                   {"inner_fold", rec.tag.inner_fold},
                   {"grid_point", rec.tag.grid_point},
                   {"distinct_samples", rec.indices.size()},
                   {"accesses", rec.accesses}});
  }
  return out;
}

}  // namespace eegraph
