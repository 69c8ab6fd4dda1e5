#include "eegraph/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "eegraph/audit.hpp"
#include "eegraph/errors.hpp"

namespace eegraph {

namespace {

using nlohmann::json;

std::string type_name(const json& v) {
  if (v.is_number_integer()) return "integer";
  return v.type_name();
}

// Reads one JSON object, tracking consumed keys so leftovers can be reported
// with their full path.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object, got " + type_name(j_));
  }

  std::string at(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

  const json* find(std::string_view key) {
    seen_.insert(std::string(key));
    auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  std::optional<double> number(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) fail(at(key), "expected a number, got " + type_name(*v));
    return v->get<double>();
  }

  std::optional<std::int64_t> integer(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) fail(at(key), "expected an integer, got " + type_name(*v));
    return v->get<std::int64_t>();
  }

  std::optional<bool> boolean(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) fail(at(key), "expected a boolean, got " + type_name(*v));
    return v->get<bool>();
  }

  std::optional<std::string> string(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail(at(key), "expected a string, got " + type_name(*v));
    return v->get<std::string>();
  }

  std::optional<Section> object(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return Section(*v, at(key));
  }

  const json* array(std::string_view key) {
    const json* v = find(key);
    if (v && !v->is_array()) fail(at(key), "expected an array, got " + type_name(*v));
    return v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

int positive_int(Section& s, std::string_view key, int fallback, int minimum = 1) {
  const auto v = s.integer(key);
  if (!v) return fallback;
  if (*v < minimum || *v > 1'000'000'000) {
    Section::fail(s.at(key), "must be at least " + std::to_string(minimum) + ", got " + std::to_string(*v));
  }
  return static_cast<int>(*v);
}

std::uint64_t seed_value(Section& s, std::string_view key, std::uint64_t fallback) {
  const auto v = s.integer(key);
  if (!v) return fallback;
  if (*v < 0) Section::fail(s.at(key), "must be nonnegative");
  return static_cast<std::uint64_t>(*v);
}

double nonneg_number(Section& s, std::string_view key, double fallback) {
  const auto v = s.number(key);
  if (!v) return fallback;
  if (!(*v >= 0.0) || !std::isfinite(*v)) Section::fail(s.at(key), "must be a finite nonnegative number");
  return *v;
}

SynthSpec read_synth(Section& s) {
  SynthSpec spec;
  spec.n_subjects = positive_int(s, "n_subjects", spec.n_subjects, 0);
  spec.samples_per_subject = positive_int(s, "samples_per_subject", spec.samples_per_subject, 0);
  spec.n_nodes = positive_int(s, "n_nodes", spec.n_nodes, 0);
  spec.n_features = positive_int(s, "n_features", spec.n_features, 0);
  spec.n_classes = positive_int(s, "n_classes", spec.n_classes, 0);
  spec.class_separation = nonneg_number(s, "class_separation", spec.class_separation);
  spec.subject_shift = nonneg_number(s, "subject_shift", spec.subject_shift);
  spec.noise_std = nonneg_number(s, "noise_std", spec.noise_std);
  spec.seed = seed_value(s, "seed", spec.seed);
  s.finish();
  return spec;
}

json synth_to_json(const SynthSpec& spec) {
  return {{"n_subjects", spec.n_subjects},
          {"samples_per_subject", spec.samples_per_subject},
          {"n_nodes", spec.n_nodes},
          {"n_features", spec.n_features},
          {"n_classes", spec.n_classes},
          {"class_separation", spec.class_separation},
          {"subject_shift", spec.subject_shift},
          {"noise_std", spec.noise_std},
          {"seed", spec.seed}};
}

template <typename T>
std::vector<T> read_list(Section& s, std::string_view key, std::vector<T> fallback) {
  const json* arr = s.array(key);
  if (!arr) return fallback;
  std::vector<T> out;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto& v = (*arr)[i];
    const auto where = s.at(key) + "[" + std::to_string(i) + "]";
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) Section::fail(where, "expected a positive integer");
      out.push_back(static_cast<T>(v.get<std::int64_t>()));
    } else {
      if (!v.is_number() || !(v.get<double>() >= 0.0)) Section::fail(where, "expected a nonnegative number");
      out.push_back(v.get<double>());
    }
  }
  if (out.empty()) Section::fail(s.at(key), "must not be empty");
  return out;
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, end);
}

void create_dirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError(DataErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

double default_regularization(const std::string& task_name) {
  if (task_name == "cross-9") return 0.005;
  if (task_name == "cross-2" || task_name == "intra-9") return 0.003;
  return 0.001;
}

ExperimentConfig parse_config(const json& input) {
  // A run_meta.json embeds the resolved config.
  const json& doc = input.is_object() && input.contains("config") && input.contains("wall_time_seconds")
                        ? input.at("config")
                        : input;
  ExperimentConfig cfg;
  Section root(doc, "");

  // dataset
  if (auto ds = root.object("dataset")) {
    if (auto path = ds->string("path")) cfg.dataset.path = *path;
    if (auto synth = ds->object("synth")) cfg.dataset.synth = read_synth(*synth);
    ds->finish();
    if (cfg.dataset.path && cfg.dataset.synth) Section::fail("dataset", "give either path or synth, not both");
  }
  if (!cfg.dataset.path && !cfg.dataset.synth) cfg.dataset.synth = SynthSpec{};

  // task
  auto task = root.object("task");
  if (!task) Section::fail("task", "required section is missing");
  {
    auto split = task->string("split");
    if (!split) Section::fail("task.split", "required");
    if (*split != "intra" && *split != "cross") Section::fail("task.split", "must be 'intra' or 'cross'");
    cfg.task.split = parse_split_mode(*split);
    if (auto n = task->integer("n_classes")) {
      if (*n < 2) Section::fail("task.n_classes", "must be at least 2");
      cfg.task.n_classes = static_cast<int>(*n);
    }
    cfg.task.name = task->string("name").value_or("");
    task->finish();
  }

  // model
  auto model = root.object("model");
  if (!model) Section::fail("model", "required section is missing");
  {
    auto kind = model->string("kind");
    if (!kind) Section::fail("model.kind", "required");
    try {
      cfg.model.kind = parse_model_kind(*kind);
    } catch (const ConfigError& e) {
      Section::fail("model.kind", e.what());
    }
    cfg.model.hidden_dim = positive_int(*model, "hidden_dim", 40);
    cfg.model.n_layers = positive_int(*model, "n_layers", 2);
    if (auto act = model->string("activation")) {
      if (*act != "relu" && *act != "identity") Section::fail("model.activation", "must be 'relu' or 'identity'");
      cfg.model.activation = *act == "relu" ? Activation::relu : Activation::identity;
    }
    if (auto rgnn = model->object("rgnn")) {
      cfg.model.rgnn.node_dat = rgnn->boolean("node_dat").value_or(false);
      cfg.model.rgnn.node_dat_beta = nonneg_number(*rgnn, "node_dat_beta", cfg.model.rgnn.node_dat_beta);
      cfg.model.rgnn.emotion_dl_eps = nonneg_number(*rgnn, "emotion_dl_eps", 0.0);
      if (cfg.model.rgnn.emotion_dl_eps >= 1.0) Section::fail("model.rgnn.emotion_dl_eps", "must be below 1");
      if (const json* map = rgnn->array("neighbor_map")) {
        try {
          cfg.model.rgnn.neighbor_map = map->get<std::vector<std::vector<int>>>();
        } catch (const json::exception&) {
          Section::fail("model.rgnn.neighbor_map", "expected a list of integer lists");
        }
      }
      rgnn->finish();
    }
    if (auto sparse = model->object("sparse")) {
      cfg.model.sparse.adj_l1 = nonneg_number(*sparse, "adj_l1", cfg.model.sparse.adj_l1);
      sparse->finish();
    }
    if (auto het = model->object("het")) {
      if (auto streams = het->string("streams")) {
        try {
          cfg.model.het.streams = parse_het_streams(*streams);
        } catch (const ConfigError& e) {
          Section::fail("model.het.streams", e.what());
        }
      }
      het->finish();
    }
    if (auto graph = model->object("graph")) {
      if (auto pos = graph->string("positions")) cfg.graph.positions = *pos;
      if (auto d = graph->number("delta")) {
        if (!(*d > 0.0)) Section::fail("model.graph.delta", "must be positive");
        cfg.graph.delta = *d;
      }
      if (const json* pairs = graph->array("global_pairs")) {
        for (std::size_t i = 0; i < pairs->size(); ++i) {
          const auto& p = (*pairs)[i];
          if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
            Section::fail("model.graph.global_pairs[" + std::to_string(i) + "]", "expected [i, j]");
          }
          cfg.graph.global_pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
        }
      }
      if (auto w = graph->number("global_weight")) cfg.graph.global_weight = *w;
      graph->finish();
      if (!cfg.graph.positions && !cfg.graph.global_pairs.empty()) {
        Section::fail("model.graph.global_pairs", "requires model.graph.positions");
      }
    }
    model->finish();
  }

  // protocol
  bool grid_given = false;
  bool k_inner_given = false;
  std::optional<std::uint64_t> protocol_seed;
  if (auto proto = root.object("protocol")) {
    if (auto kind = proto->string("kind")) {
      try {
        cfg.protocol.kind = parse_protocol_kind(*kind);
      } catch (const ConfigError& e) {
        Section::fail("protocol.kind", e.what());
      }
    }
    cfg.protocol.k = positive_int(*proto, "K", 10, 2);
    k_inner_given = proto->has("K_inner");
    cfg.protocol.k_inner = positive_int(*proto, "K_inner", 3, 2);
    if (auto grid = proto->object("grid")) {
      grid_given = true;
      cfg.protocol.grid_learning_rate = read_list<double>(*grid, "learning_rate", cfg.protocol.grid_learning_rate);
      cfg.protocol.grid_hidden_dim = read_list<int>(*grid, "hidden_dim", cfg.protocol.grid_hidden_dim);
      grid->finish();
    }
    if (proto->has("seed")) protocol_seed = seed_value(*proto, "seed", 0);
    proto->finish();
  }
  if (cfg.protocol.kind != ProtocolKind::ncv) {
    if (grid_given) cfg.warnings.push_back("protocol.grid is only honored by ncv; ignored for " + to_string(cfg.protocol.kind));
    if (k_inner_given) cfg.warnings.push_back("protocol.K_inner is only used by ncv; ignored");
  }

  // train
  const double reg = default_regularization(cfg.task.name);
  cfg.train.l1_coef = reg;
  cfg.train.l2_coef = reg;
  if (auto train = root.object("train")) {
    if (auto lr = train->number("learning_rate")) {
      if (!(*lr >= 0.0) || !std::isfinite(*lr)) Section::fail("train.learning_rate", "must be a finite nonnegative number");
      cfg.train.learning_rate = *lr;
    }
    cfg.train.l1_coef = nonneg_number(*train, "l1_coef", cfg.train.l1_coef);
    cfg.train.l2_coef = nonneg_number(*train, "l2_coef", cfg.train.l2_coef);
    if (auto dropout = train->number("dropout")) {
      if (!(*dropout >= 0.0 && *dropout < 1.0)) {
        Section::fail("train.dropout", "must lie in [0, 1), got " + format_number(*dropout));
      }
      cfg.model.dropout = *dropout;
    }
    cfg.train.batch_size = positive_int(*train, "batch_size", 256);
    cfg.train.max_epochs = positive_int(*train, "max_epochs", 100);
    if (auto opt = train->string("optimizer")) {
      try {
        cfg.train.optimizer = parse_optimizer(*opt);
      } catch (const ConfigError& e) {
        Section::fail("train.optimizer", e.what());
      }
    }
    cfg.train.seed = seed_value(*train, "seed", 0);
    if (auto device = train->string("device")) {
      if (*device != "cpu") Section::fail("train.device", "only 'cpu' is supported, got '" + *device + "'");
      cfg.train.device = *device;
    }
    train->finish();
  }
  cfg.protocol.seed = protocol_seed.value_or(cfg.train.seed);
  root.finish();
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError(DataErrorKind::missing_file, "cannot open config " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.dataset.path) {
    j["dataset"] = {{"path", cfg.dataset.path->string()}};
  } else {
    j["dataset"] = {{"synth", synth_to_json(cfg.dataset.synth.value_or(SynthSpec{}))}};
  }
  j["task"] = {{"split", to_string(cfg.task.split)}, {"name", cfg.task.name}};
  if (cfg.task.n_classes) j["task"]["n_classes"] = *cfg.task.n_classes;

  const auto& m = cfg.model;
  j["model"] = {{"kind", to_string(m.kind)},
                {"hidden_dim", m.hidden_dim},
                {"n_layers", m.n_layers},
                {"activation", m.activation == Activation::relu ? "relu" : "identity"},
                {"rgnn",
                 {{"node_dat", m.rgnn.node_dat},
                  {"node_dat_beta", m.rgnn.node_dat_beta},
                  {"emotion_dl_eps", m.rgnn.emotion_dl_eps},
                  {"neighbor_map", m.rgnn.neighbor_map}}},
                {"sparse", {{"adj_l1", m.sparse.adj_l1}}},
                {"het", {{"streams", to_string(m.het.streams)}}}};
  if (cfg.graph.positions) {
    json pairs = json::array();
    for (const auto& [a, b] : cfg.graph.global_pairs) pairs.push_back({a, b});
    j["model"]["graph"] = {{"positions", cfg.graph.positions->string()},
                           {"delta", cfg.graph.delta},
                           {"global_pairs", pairs},
                           {"global_weight", cfg.graph.global_weight}};
  }

  j["protocol"] = {{"kind", to_string(cfg.protocol.kind)}, {"K", cfg.protocol.k}, {"seed", cfg.protocol.seed}};
  if (cfg.protocol.kind == ProtocolKind::ncv) {
    j["protocol"]["K_inner"] = cfg.protocol.k_inner;
    j["protocol"]["grid"] = {{"learning_rate", cfg.protocol.grid_learning_rate},
                             {"hidden_dim", cfg.protocol.grid_hidden_dim}};
  }
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"l1_coef", cfg.train.l1_coef},
                {"l2_coef", cfg.train.l2_coef},
                {"dropout", m.dropout},
                {"batch_size", cfg.train.batch_size},
                {"max_epochs", cfg.train.max_epochs},
                {"optimizer", to_string(cfg.train.optimizer)},
                {"seed", cfg.train.seed},
                {"device", cfg.train.device}};
  return j;
}

Dataset load_experiment_dataset(const ExperimentConfig& cfg) {
  Dataset ds = cfg.dataset.path ? load_dataset(*cfg.dataset.path) : synth_generate(cfg.dataset.synth.value_or(SynthSpec{}));
  if (cfg.task.n_classes && *cfg.task.n_classes != ds.n_classes) {
    throw ConfigError("task.n_classes: " + std::to_string(*cfg.task.n_classes) + " does not match the dataset's " +
                      std::to_string(ds.n_classes) + " classes");
  }
  return ds;
}

ModelFactory make_factory(const ExperimentConfig& cfg, const Dataset& ds) {
  ModelConfig base = cfg.model;
  base.n_nodes = static_cast<int>(ds.n_nodes);
  base.n_features = static_cast<int>(ds.n_features);
  base.n_classes = ds.n_classes;
  if (cfg.graph.positions) {
    const auto positions = load_positions(*cfg.graph.positions);
    if (positions.rows() != base.n_nodes) {
      throw ConfigError("model.graph.positions: " + std::to_string(positions.rows()) + " electrodes for " +
                        std::to_string(base.n_nodes) + " nodes");
    }
    base.initial_adjacency = init_adjacency(positions, cfg.graph.delta, cfg.graph.global_pairs, cfg.graph.global_weight);
  }
  validate(base);
  return [base](const HyperParams& hp, std::uint64_t seed) {
    ModelConfig mc = base;
    if (hp.hidden_dim) mc.hidden_dim = *hp.hidden_dim;
    return make_model(mc, seed);
  };
}

RunOutcome run_experiment(const ExperimentConfig& cfg, int jobs) {
  const auto start = std::chrono::steady_clock::now();
  validate(cfg.train);
  const Dataset ds = load_experiment_dataset(cfg);
  const auto factory = make_factory(cfg, ds);

  ProtocolOptions opts;
  opts.epochs = cfg.train.max_epochs;
  opts.jobs = jobs;
  AuditLog log;
  opts.audit = &log;

  RunOutcome out;
  if (cfg.protocol.kind == ProtocolKind::ncv) {
    NcvSettings settings{cfg.protocol.k, cfg.protocol.k_inner, cfg.task.split, cfg.protocol.seed};
    const auto grid = make_grid(cfg.protocol.grid_learning_rate, cfg.protocol.grid_hidden_dim);
    out.result = ncv_run(factory, ds, settings, grid, cfg.train, opts);
  } else {
    const FoldPlan plan = make_plan(cfg.task.split, ds.subjects, cfg.protocol.k, cfg.protocol.seed);
    const auto acc = collect_acc_matrix(factory, plan, ds, cfg.train, opts);
    out.result = cfg.protocol.kind == ProtocolKind::cv ? cv_summary(acc) : fcv_summary(acc);
    out.result.audit_summary = summarize_audit(log);
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  out.run_meta = {{"config", config_to_json(cfg)},
                  {"seeds",
                   {{"split", cfg.protocol.seed},
                    {"model_base", cfg.train.seed},
                    {"dataset", cfg.dataset.synth ? json(cfg.dataset.synth->seed) : json(nullptr)}}},
                  {"dataset",
                   {{"n_samples", ds.n_samples},
                    {"n_nodes", ds.n_nodes},
                    {"n_features", ds.n_features},
                    {"n_classes", ds.n_classes},
                    {"n_subjects", distinct_subjects(ds.subjects).size()}}},
                  {"jobs", jobs},
                  {"wall_time_seconds", elapsed.count()}};
  return out;
}

void write_atomic(const std::filesystem::path& file, const std::string& content) {
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw DataError(DataErrorKind::io, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) throw DataError(DataErrorKind::io, "cannot rename " + tmp.string() + ": " + ec.message());
}

RunOutcome cmd_run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, int jobs) {
  auto outcome = run_experiment(cfg, jobs);
  create_dirs(out_dir);
  write_atomic(out_dir / "results.json", to_json(outcome.result).dump(2) + "\n");
  write_atomic(out_dir / "acc_matrix.csv", acc_matrix_csv(outcome.result));
  write_atomic(out_dir / "run_meta.json", outcome.run_meta.dump(2) + "\n");
  return outcome;
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "learning_rate") return SweepAxis::learning_rate;
  if (name == "hidden_dim") return SweepAxis::hidden_dim;
  throw ConfigError("sweep axis must be learning_rate or hidden_dim, got '" + std::string(name) + "'");
}

std::vector<SweepCell> cmd_sweep(const ExperimentConfig& cfg, SweepAxis axis, std::vector<double> values,
                                 const std::filesystem::path& out_dir, int jobs) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  std::vector<double> distinct;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("sweep: value " + format_number(v) + " is not a finite nonnegative number");
    if (axis == SweepAxis::hidden_dim && (v < 1.0 || v != std::floor(v))) {
      throw ConfigError("sweep: hidden_dim value " + format_number(v) + " is not a positive integer");
    }
    if (std::find(distinct.begin(), distinct.end(), v) != distinct.end()) {
      std::cerr << "warning: duplicate sweep value " << format_number(v) << " dropped\n";
      continue;
    }
    distinct.push_back(v);
  }

  const std::string axis_name = axis == SweepAxis::learning_rate ? "learning_rate" : "hidden_dim";
  create_dirs(out_dir);
  std::vector<SweepCell> cells;
  for (double v : distinct) {
    ExperimentConfig cell_cfg = cfg;
    if (axis == SweepAxis::learning_rate) {
      cell_cfg.train.learning_rate = v;
      cell_cfg.protocol.grid_learning_rate = {v};
    } else {
      cell_cfg.model.hidden_dim = static_cast<int>(v);
      cell_cfg.protocol.grid_hidden_dim = {static_cast<int>(v)};
    }
    SweepCell cell;
    cell.value = v;
    try {
      auto outcome = cmd_run(cell_cfg, out_dir / (axis_name + "_" + format_number(v)), jobs);
      cell.summary_accuracy = outcome.result.summary_accuracy;
    } catch (const Error& e) {
      cell.error = e.what();
      std::cerr << "warning: sweep cell " << axis_name << "=" << format_number(v) << " failed: " << e.what() << "\n";
    }
    cells.push_back(std::move(cell));
  }

  std::string csv = axis_name + ",summary_accuracy,status\n";
  for (const auto& c : cells) {
    csv += format_number(c.value) + ",";
    if (c.summary_accuracy) csv += format_number(*c.summary_accuracy);
    csv += c.summary_accuracy ? ",ok\n" : ",failed\n";
  }
  write_atomic(out_dir / "sweep.csv", csv);
  return cells;
}

SynthSpec parse_synth_spec(const json& doc) {
  Section s(doc, "");
  return read_synth(s);
}

void cmd_synth(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  save_dataset(synth_generate(spec), out_dir);
}

int exit_code_for(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  if (!err) return 1;
  switch (err->category()) {
    case ErrorCategory::config:
    case ErrorCategory::validation: return 2;
    case ErrorCategory::data: return 3;
    case ErrorCategory::divergence: return 4;
    case ErrorCategory::leakage: return 5;
    case ErrorCategory::contract: return 1;
  }
  return 1;
}

}  // namespace eegraph
