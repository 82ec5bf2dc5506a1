/*
 * Copyright 2026 The PaveGraph Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pavegraph/checkpoint.hpp"
#include "pavegraph/config.hpp"
#include "pavegraph/csv.hpp"
#include "pavegraph/decision.hpp"
#include "pavegraph/error.hpp"
#include "pavegraph/explain.hpp"
#include "pavegraph/metrics.hpp"
#include "pavegraph/pipeline.hpp"
#include "pavegraph/synth.hpp"

namespace pavegraph::cli {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kVersion = "0.1.0";

// Thrown for bad flag combinations discovered after parsing.
struct UsageError : Error {
  using Error::Error;
};

std::string digest_bytes(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return os.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Options every command understands.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  ConfigMap config;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--out", c.out, "output directory");
}

// Collects outputs and writes manifest.json last.
class Run {
 public:
  Run(std::string command, const Common& common) : command_(std::move(command)), dir_(common.out) {
    fs::create_directories(dir_);
    if (!common.config_path.empty()) input(common.config_path);
  }

  void input(const std::string& path) { inputs_.push_back(path); }
  void config(const std::string& text) { config_ += text; }
  void seed(std::uint64_t s) { seed_ = s; }

  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void write(const std::string& name, const std::string& content) {
    const std::string p = path(name);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p);
    out << content;
    if (!out) throw Error("failed writing " + p);
    outputs_.push_back(name);
  }

  void adopt(const std::string& name) { outputs_.push_back(name); }

  void finish(std::ostream& out) {
    ordered_json j;
    j["command"] = command_;
    j["toolkit_version"] = kVersion;
    j["seed"] = seed_;
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, v] : parse_config_text(config_)) cfg[k] = v;
    j["config"] = cfg;
    j["inputs"] = ordered_json::array();
    for (const auto& p : inputs_) j["inputs"].push_back({{"path", p}, {"sha256", file_digest(p)}});
    j["outputs"] = ordered_json::array();
    for (const auto& name : outputs_) {
      j["outputs"].push_back({{"path", name}, {"sha256", file_digest(path(name))}});
    }
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
    j["created_at"] = ts.str();
    const std::string p = path("manifest.json");
    std::ofstream f(p);
    f << j.dump(2) << '\n';
    out << "wrote " << outputs_.size() << " file(s) and manifest to " << dir_ << '\n';
  }

 private:
  std::string command_;
  std::string dir_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::string config_;
  std::uint64_t seed_ = 0;
};

// ---- data access ----

struct DataArgs {
  std::string dir;
  std::string observations;
  std::string edges;
};

void add_data(CLI::App* app, DataArgs& d) {
  app->add_option("--data", d.dir, "directory holding observations.csv and edges.csv");
  app->add_option("--observations", d.observations, "observation file");
  app->add_option("--edges", d.edges, "edge file");
}

struct Dataset {
  RoadGraph graph;
  SnapshotSeries series;
};

Dataset load(const DataArgs& d, Run& run) {
  std::string obs = d.observations;
  std::string edges = d.edges;
  if (obs.empty() && !d.dir.empty()) obs = (fs::path(d.dir) / "observations.csv").string();
  if (edges.empty() && !d.dir.empty()) edges = (fs::path(d.dir) / "edges.csv").string();
  if (obs.empty() || edges.empty()) throw UsageError("give --data or both --observations and --edges");
  run.input(obs);
  run.input(edges);
  const CsvTable obs_table = read_csv(obs);
  Dataset out;
  out.graph = load_graph(segment_ids_of(obs_table), read_csv(edges));
  out.series = load_snapshots(obs_table, out.graph);
  return out;
}

// Windows standardized with a fitted standardizer.
std::vector<TemporalSample> windows_for(const SnapshotSeries& series, const Standardizer& st, int t0) {
  std::vector<TemporalSample> w = build_windows(series, t0);
  for (auto& s : w) s = st.apply(s);
  return w;
}

const TemporalSample& window_for_year(const std::vector<TemporalSample>& windows, int year) {
  for (const auto& w : windows) {
    if (w.target_year == year) return w;
  }
  throw UsageError("no window targets year " + std::to_string(year));
}

// Final-year input slices for a forecast beyond the observed years.
TemporalSample forecast_window(const SnapshotSeries& series, const Standardizer& st, int t0) {
  if (static_cast<int>(series.num_years()) < t0) throw UsageError("not enough history to forecast");
  TemporalSample s;
  for (std::size_t t = series.num_years() - t0; t < series.num_years(); ++t) {
    s.inputs.push_back(series.features[t]);
    s.input_years.push_back(series.years[t]);
  }
  s.target = Vector::Zero(static_cast<Eigen::Index>(series.num_nodes()));
  s.target_year = series.years.back() + 1;
  TemporalSample z = st.apply(s);
  z.target = Vector::Zero(s.target.size());
  return z;
}

std::string csv_number(double v) { return format_double(v); }

// ---- synth ----

struct SynthArgs {
  Common common;
  std::optional<int> segments, arcs, years, first_year;
  std::optional<double> gamma;
  bool drift = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthConfig cfg;
  apply_config(a.common.config, cfg);
  if (a.segments) cfg.num_segments = *a.segments;
  if (a.arcs) cfg.target_arcs = *a.arcs;
  if (a.years) cfg.num_years = *a.years;
  if (a.first_year) cfg.first_year = *a.first_year;
  if (a.gamma) cfg.gamma = *a.gamma;
  if (a.drift) cfg.drift = true;
  if (a.common.seed) cfg.seed = *a.common.seed;
  cfg.validate();

  Run run("synth", a.common);
  run.seed(cfg.seed);
  run.config(to_config_text(cfg));
  const SynthDataset d = generate(cfg);
  write_dataset(d, cfg, a.common.out);
  run.adopt("observations.csv");
  run.adopt("edges.csv");
  run.adopt("provenance.cfg");
  out << "synthesized " << d.graph.num_nodes() << " segments, " << 2 * d.graph.num_edges()
      << " arcs, " << d.series.num_years() << " years\n";
  run.finish(out);
  return kExitOk;
}

// ---- train ----

struct TrainArgs {
  Common common;
  DataArgs data;
  std::string variant;
  std::optional<int> t0, epochs;
  std::optional<double> lr, weight_decay;
};

// A model window key wins over the training default when only it is given.
void reconcile_window(const ConfigMap& config, TrainConfig& tc, ModelConfig& mc) {
  const bool model_key = config.count("model.window") || config.count("model.t0");
  const bool train_key = config.count("train.window");
  if (model_key && train_key && tc.window != mc.window) {
    throw ConfigError("train.window and model.window disagree");
  }
  if (model_key && !train_key) tc.window = mc.window;
  mc.window = tc.window;
}

Variant parse_variant_or_usage(const std::string& name) {
  const auto v = parse_variant(name);
  if (!v) throw UsageError("unknown variant '" + name + "'");
  return *v;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig tc;
  ModelConfig mc;
  apply_config(a.common.config, tc);
  apply_config(a.common.config, mc);
  if (!a.variant.empty()) mc.variant = parse_variant_or_usage(a.variant);
  reconcile_window(a.common.config, tc, mc);
  if (a.t0) tc.window = mc.window = *a.t0;
  if (a.epochs) tc.max_epochs = *a.epochs;
  if (a.lr) tc.learning_rate = *a.lr;
  if (a.weight_decay) tc.weight_decay = *a.weight_decay;
  if (a.common.seed) tc.seed = *a.common.seed;
  tc.validate();
  mc.validate();

  Run run("train", a.common);
  run.seed(tc.seed);
  run.config(to_config_text(tc));
  run.config(to_config_text(mc));
  const Dataset d = load(a.data, run);
  const PreparedData data = prepare_data(d.series, tc.window);
  const TrainResult r = train(mc, data.windows.train, data.windows.val, d.graph, tc);

  Checkpoint ck{r.model, data.standardizer, tc.seed};
  run.write("checkpoint.txt", checkpoint_text(ck));
  run.write("train_report.csv", r.report.to_csv());
  out << "trained " << variant_name(mc.variant) << ": best epoch " << r.report.best_epoch
      << ", best val loss " << csv_number(r.report.best_val_loss) << " (" << r.report.stop_reason
      << ")\n";
  run.finish(out);
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  Common common;
  DataArgs data;
  std::string checkpoint;
  std::string split = "test";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  Run run("eval", a.common);
  run.input(a.checkpoint);
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  run.seed(ck.seed);
  run.config(to_config_text(ck.model.config()));
  run.config("eval.split = " + a.split + "\n");
  const Dataset d = load(a.data, run);
  const SplitSpec split = chronological_split(d.series.years);
  const std::set<int>& years = a.split == "train" ? split.train_years
                               : a.split == "val" ? split.val_years
                                                  : split.test_years;
  const auto windows = windows_for(d.series, ck.standardizer, ck.model.config().window);

  std::ostringstream metrics, preds;
  metrics << "split,target_year,n,mse,rmse,mae,r2\n";
  preds << "segment_id,target_year,predicted_pci,actual_pci\n";
  std::vector<double> all_pred, all_actual;
  for (const auto& w : windows) {
    if (!years.count(w.target_year)) continue;
    const Evaluation e = evaluate(ck.model, w, ck.standardizer, d.graph);
    metrics << a.split << ',' << w.target_year << ',' << e.predicted.size() << ','
            << csv_number(e.report.mse) << ',' << csv_number(e.report.rmse) << ','
            << csv_number(e.report.mae) << ',' << csv_number(e.report.r2) << '\n';
    for (std::size_t i = 0; i < e.predicted.size(); ++i) {
      preds << d.graph.node_ids()[i] << ',' << w.target_year << ',' << csv_number(e.predicted[i])
            << ',' << csv_number(e.actual[i]) << '\n';
    }
    all_pred.insert(all_pred.end(), e.predicted.begin(), e.predicted.end());
    all_actual.insert(all_actual.end(), e.actual.begin(), e.actual.end());
  }
  if (all_pred.empty()) throw UsageError("split '" + a.split + "' has no windows for this model");

  std::ostringstream rec, taylor;
  const RecCurve curve = rec_curve(all_pred, all_actual, default_rec_grid());
  rec << "tolerance,coverage\n";
  for (std::size_t k = 0; k < curve.tolerance.size(); ++k) {
    rec << csv_number(curve.tolerance[k]) << ',' << csv_number(curve.coverage[k]) << '\n';
  }
  const TaylorStats ts = taylor_stats(all_pred, all_actual);
  taylor << "pred_std,ref_std,correlation,centered_rmse\n"
         << csv_number(ts.pred_std) << ',' << csv_number(ts.ref_std) << ','
         << csv_number(ts.correlation) << ',' << csv_number(ts.centered_rmse) << '\n';

  run.write("metrics.csv", metrics.str());
  run.write("predictions.csv", preds.str());
  run.write("rec_curve.csv", rec.str());
  run.write("taylor.csv", taylor.str());
  const RegressionReport pooled = regression_report(all_pred, all_actual);
  out << a.split << ": rmse " << csv_number(pooled.rmse) << ", r2 " << csv_number(pooled.r2) << '\n';
  run.finish(out);
  return kExitOk;
}

// ---- prioritize ----

struct PrioritizeArgs {
  Common common;
  DataArgs data;
  std::string checkpoint;
  std::optional<int> year;
  std::size_t k = 10;
};

int cmd_prioritize(const PrioritizeArgs& a, std::ostream& out) {
  Run run("prioritize", a.common);
  run.input(a.checkpoint);
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  run.seed(ck.seed);
  const Dataset d = load(a.data, run);
  const int t0 = ck.model.config().window;
  const int year = a.year.value_or(d.series.years.back());
  run.config("prioritize.k = " + std::to_string(a.k) + "\nprioritize.year = " +
             std::to_string(year) + "\n");

  TemporalSample sample;
  bool has_actual = true;
  if (year == d.series.years.back() + 1) {
    sample = forecast_window(d.series, ck.standardizer, t0);
    has_actual = false;
  } else {
    sample = window_for_year(windows_for(d.series, ck.standardizer, t0), year);
  }
  const Vector pred = ck.standardizer.inverse_target(ck.model.predict(sample, d.graph));
  const Vector actual = ck.standardizer.inverse_target(sample.target);
  const std::vector<double> p(pred.begin(), pred.end());
  const std::vector<double> y(actual.begin(), actual.end());
  const MaintenanceProfile profile = build_profile(
      p, has_actual ? std::optional<std::span<const double>>(y) : std::nullopt, d.graph.node_ids());

  std::ostringstream prof;
  prof << "segment_id,predicted_pci,predicted_class,recommended_action,priority_rank";
  if (has_actual) prof << ",actual_pci,actual_class";
  prof << '\n';
  for (const auto& r : profile.by_priority()) {
    prof << r.segment_id << ',' << csv_number(r.predicted_pci) << ',' << r.predicted_class.label()
         << ',' << r.predicted_class.action() << ',' << r.priority_rank;
    if (has_actual) prof << ',' << csv_number(*r.actual_pci) << ',' << r.actual_class->label();
    prof << '\n';
  }
  run.write("profile.csv", prof.str());

  std::ostringstream lon;
  lon << "# thresholds: Excellent >= 85, Good >= 70, Fair >= 55, Poor >= 40, VeryPoor < 40\n";
  lon << "segment_index,predicted_pci,actual_pci\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    lon << i << ',' << csv_number(p[i]) << ',' << (has_actual ? csv_number(y[i]) : "") << '\n';
  }
  run.write("longitudinal.csv", lon.str());

  std::ostringstream top;
  top << "priority_rank,segment_id\n";
  const auto critical = top_k_critical(profile, std::min(a.k, profile.records.size()));
  for (std::size_t i = 0; i < critical.size(); ++i) top << i + 1 << ',' << critical[i] << '\n';
  run.write("top_critical.csv", top.str());

  if (has_actual) {
    const SafetyReport s = safety_report(profile);
    std::ostringstream rep;
    rep << "actual_class";
    for (int c = 1; c <= kNumSeverities; ++c) rep << ',' << severity_label(static_cast<Severity>(c));
    rep << '\n';
    for (int r = 0; r < kNumSeverities; ++r) {
      rep << severity_label(static_cast<Severity>(r + 1));
      for (long v : s.confusion[r]) rep << ',' << v;
      rep << '\n';
    }
    rep << "# total=" << s.total << '\n'
        << "# exact_match=" << csv_number(s.exact_match) << '\n'
        << "# adjacent_match=" << csv_number(s.adjacent_match) << '\n'
        << "# critical_misclassification=" << csv_number(s.critical_misclassification) << '\n';
    run.write("safety_report.csv", rep.str());
    out << "exact " << csv_number(s.exact_match) << ", adjacent " << csv_number(s.adjacent_match)
        << '\n';
  }
  run.finish(out);
  return kExitOk;
}

// ---- explain ----

struct ExplainArgs {
  Common common;
  DataArgs data;
  std::string checkpoint;
  std::string node;
  bool global = false;
  int repeats = 10;
  std::optional<int> year;
};

std::string importance_csv(const FeatureImportance& fi, bool with_raw) {
  std::ostringstream os;
  os << (with_raw ? "feature,score,raw\n" : "feature,score\n");
  for (std::size_t f : fi.ranking()) {
    os << fi.names[f] << ',' << csv_number(fi.normalized[f]);
    if (with_raw) os << ',' << csv_number(fi.raw[f]);
    os << '\n';
  }
  return os.str();
}

int cmd_explain(const ExplainArgs& a, std::ostream& out) {
  if (a.global == !a.node.empty()) throw UsageError("give exactly one of --node or --global");
  ExplainConfig ec;
  apply_config(a.common.config, ec);
  if (a.common.seed) ec.seed = *a.common.seed;
  ec.validate();
  if (a.repeats < 1) throw UsageError("--repeats must be at least 1");

  Run run("explain", a.common);
  run.input(a.checkpoint);
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  run.seed(ec.seed);
  run.config(to_config_text(ec));
  const Dataset d = load(a.data, run);
  const auto windows = windows_for(d.series, ck.standardizer, ck.model.config().window);
  const int year = a.year.value_or(windows.back().target_year);
  const TemporalSample& sample = window_for_year(windows, year);
  const auto names = default_feature_names(sample.num_features());

  if (a.global) {
    run.config("explain.repeats = " + std::to_string(a.repeats) + "\n");
    const FeatureImportance fi =
        permutation_importance(ck.model, sample, d.graph, sample.target, ec.seed, a.repeats);
    run.write("global_importance.csv", importance_csv(fi, true));
    out << "top feature: " << fi.names[fi.ranking().front()] << '\n';
  } else {
    const auto index = d.graph.index_of(a.node);
    if (!index) throw UsageError("unknown segment '" + a.node + "'");
    const ExplanationMasks m = explain_node(ck.model, sample, d.graph, *index, ec);
    const FeatureImportance fi = local_importance(m, names);
    run.write("local_importance_" + a.node + ".csv", importance_csv(fi, false));
    std::ostringstream edges;
    edges << "src_segment_id,dst_segment_id,score\n";
    for (std::size_t e = 0; e < d.graph.num_edges(); ++e) {
      const auto [i, j] = d.graph.edges()[e];
      if (i != *index && j != *index) continue;
      edges << d.graph.node_ids()[i] << ',' << d.graph.node_ids()[j] << ','
            << csv_number(m.edge_mask(static_cast<Eigen::Index>(e))) << '\n';
    }
    run.write("edge_mask_" + a.node + ".csv", edges.str());
    out << "top feature for " << a.node << ": " << fi.names[fi.ranking().front()] << '\n';
  }
  run.finish(out);
  return kExitOk;
}

// ---- ablate ----

struct AblateArgs {
  Common common;
  DataArgs data;
  std::string grid;
  std::vector<std::string> axes;
  std::optional<int> epochs;
};

const std::map<std::string, std::vector<std::string>>& feature_groups() {
  static const std::map<std::string, std::vector<std::string>> groups = {
      {"structural",
       {"material", "agg_type", "age_yrs", "ept_mm", "base_modulus", "crack_area_pct", "iri"}},
      {"traffic", {"traffic_aadt", "truck_factor"}},
      {"condition", {"crack_area_pct", "iri"}},
  };
  return groups;
}

const std::map<std::string, std::vector<std::string>>& default_grid() {
  static const std::map<std::string, std::vector<std::string>> grid = {
      {"variant", {"full", "resgat", "st_gat", "vanilla", "mlp"}},
      {"drop", {"structural", "traffic", "condition"}},
  };
  return grid;
}

void check_axis_value(const std::string& axis, const std::string& value) {
  auto one_of = [&](std::initializer_list<const char*> allowed) {
    for (const char* v : allowed) {
      if (value == v) return;
    }
    throw UsageError("axis " + axis + " does not accept '" + value + "'");
  };
  if (axis == "variant") {
    parse_variant_or_usage(value);
  } else if (axis == "t0") {
    one_of({"1", "2"});
  } else if (axis == "heads") {
    one_of({"1", "2", "4", "8"});
  } else if (axis == "gat_hidden") {
    one_of({"32", "64", "128", "256"});
  } else if (axis == "gru_hidden") {
    one_of({"32", "64", "128", "256", "512", "1024"});
  } else if (axis == "dropout") {
    one_of({"0", "0.1", "0.2", "0.3"});
  } else if (axis == "lr" || axis == "weight_decay") {
    double v = 0.0;
    try {
      v = parse_double(value, axis);
    } catch (const DataError&) {
      throw UsageError("axis " + axis + " needs a number, got '" + value + "'");
    }
    if (!(v >= 0.0) || (axis == "lr" && v == 0.0)) throw UsageError("axis " + axis + " out of range");
  } else if (axis == "drop") {
    if (!feature_groups().count(value)) throw UsageError("unknown feature group '" + value + "'");
  } else {
    throw UsageError("unknown ablation axis '" + axis + "'");
  }
}

std::map<std::string, std::vector<std::string>> read_grid(const std::string& path) {
  std::map<std::string, std::vector<std::string>> grid;
  for (const auto& [axis, list] : read_config_file(path)) {
    std::vector<std::string> values;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(' '));
      item.erase(item.find_last_not_of(' ') + 1);
      if (!item.empty()) values.push_back(item);
    }
    grid[axis] = values;
  }
  return grid;
}

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  TrainConfig base_train;
  ModelConfig base_model;
  apply_config(a.common.config, base_train);
  apply_config(a.common.config, base_model);
  if (a.epochs) base_train.max_epochs = *a.epochs;
  if (a.common.seed) base_train.seed = *a.common.seed;
  reconcile_window(a.common.config, base_train, base_model);
  base_train.validate();
  base_model.validate();

  std::map<std::string, std::vector<std::string>> grid =
      a.grid.empty() ? default_grid() : read_grid(a.grid);
  if (!a.axes.empty()) {
    std::map<std::string, std::vector<std::string>> chosen;
    for (const auto& axis : a.axes) {
      const auto it = grid.find(axis);
      if (it == grid.end()) throw UsageError("axis '" + axis + "' not in the grid");
      chosen.insert(*it);
    }
    grid = chosen;
  }
  for (const auto& [axis, values] : grid) {
    if (values.empty()) throw UsageError("axis " + axis + " has no values");
    for (const auto& v : values) check_axis_value(axis, v);
  }

  Run run("ablate", a.common);
  if (!a.grid.empty()) run.input(a.grid);
  run.seed(base_train.seed);
  run.config(to_config_text(base_train));
  run.config(to_config_text(base_model));
  for (const auto& [axis, values] : grid) {
    std::string joined;
    for (const auto& v : values) joined += (joined.empty() ? "" : ",") + v;
    run.config("grid." + axis + " = " + joined + "\n");
  }
  const Dataset d = load(a.data, run);

  std::map<int, PreparedData> prepared;
  auto data_for = [&](int t0) -> const PreparedData& {
    auto it = prepared.find(t0);
    if (it == prepared.end()) it = prepared.emplace(t0, prepare_data(d.series, t0)).first;
    return it->second;
  };

  std::ostringstream table;
  table << "axis,value,mse,rmse,mae,r2\n";
  for (const auto& [axis, values] : grid) {
    for (const auto& value : values) {
      TrainConfig tc = base_train;
      ModelConfig mc = base_model;
      std::vector<std::size_t> dropped;
      if (axis == "variant") mc.variant = parse_variant_or_usage(value);
      if (axis == "t0") tc.window = mc.window = std::stoi(value);
      if (axis == "heads") mc.heads = std::stoi(value);
      if (axis == "gat_hidden") mc.head_dim = std::stoi(value);
      if (axis == "gru_hidden") mc.gru_hidden = std::stoi(value);
      if (axis == "dropout") mc.spatial_dropout = mc.head_dropout = parse_double(value, axis);
      if (axis == "lr") tc.learning_rate = parse_double(value, axis);
      if (axis == "weight_decay") tc.weight_decay = parse_double(value, axis);
      if (axis == "drop") {
        for (const auto& name : feature_groups().at(value)) dropped.push_back(*feature_index(name));
      }
      PreparedData data = data_for(tc.window);
      if (!dropped.empty()) drop_features(data, dropped);
      const ExperimentResult r = run_experiment(data, d.graph, mc, tc);
      const RegressionReport& m = r.test.report;
      table << axis << ',' << value << ',' << csv_number(m.mse) << ',' << csv_number(m.rmse) << ','
            << csv_number(m.mae) << ',' << csv_number(m.r2) << '\n';
      out << axis << '=' << value << ": r2 " << csv_number(m.r2) << '\n';
    }
  }
  run.write("ablation.csv", table.str());
  run.finish(out);
  return kExitOk;
}

void load_config(Common& c) {
  if (c.config_path.empty()) return;
  c.config = read_config_file(c.config_path);
  check_namespaces(c.config);
}

}  // namespace

std::string file_digest(const std::string& path) { return digest_bytes(slurp(path)); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pavegraph: spatio-temporal pavement condition forecasting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic road network dataset");
  add_common(s, synth.common);
  s->add_option("--segments", synth.segments, "number of segments");
  s->add_option("--arcs", synth.arcs, "directed adjacency records");
  s->add_option("--years", synth.years, "observed years");
  s->add_option("--first-year", synth.first_year, "first observed year");
  s->add_option("--gamma", synth.gamma, "contagion coefficient");
  s->add_flag("--drift", synth.drift, "hidden deterioration rate drifts over time");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(t, tr.common);
  add_data(t, tr.data);
  t->add_option("--variant", tr.variant, "full, resgat, st_gat, vanilla or mlp");
  t->add_option("--t0", tr.t0, "input window length");
  t->add_option("--epochs", tr.epochs, "maximum epochs");
  t->add_option("--lr", tr.lr, "initial learning rate");
  t->add_option("--weight-decay", tr.weight_decay, "L2 weight decay");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score a checkpoint");
  add_common(e, ev.common);
  add_data(e, ev.data);
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  e->add_option("--split", ev.split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}));

  PrioritizeArgs pr;
  auto* p = app.add_subcommand("prioritize", "maintenance profile and safety report");
  add_common(p, pr.common);
  add_data(p, pr.data);
  p->add_option("--checkpoint", pr.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  p->add_option("--year", pr.year, "target year (last observed year + 1 forecasts)");
  p->add_option("--k", pr.k, "number of critical segments to list");

  ExplainArgs ex;
  auto* x = app.add_subcommand("explain", "feature importance");
  add_common(x, ex.common);
  add_data(x, ex.data);
  x->add_option("--checkpoint", ex.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  x->add_option("--node", ex.node, "segment id for a local explanation");
  x->add_flag("--global", ex.global, "permutation importance over all segments");
  x->add_option("--repeats", ex.repeats, "permutation repeats");
  x->add_option("--year", ex.year, "target year of the explained window");

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "comparison table over an ablation grid");
  add_common(b, ab.common);
  add_data(b, ab.data);
  b->add_option("--grid", ab.grid, "grid file: axis = v1,v2,...")->check(CLI::ExistingFile);
  b->add_option("--axes", ab.axes, "restrict to these axes")->delimiter(',');
  b->add_option("--epochs", ab.epochs, "maximum epochs per cell");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& error) {
    err << "usage error: " << error.what() << '\n';
    CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  try {
    if (s->parsed()) {
      load_config(synth.common);
      return cmd_synth(synth, out);
    }
    if (t->parsed()) {
      load_config(tr.common);
      return cmd_train(tr, out);
    }
    if (e->parsed()) {
      load_config(ev.common);
      return cmd_eval(ev, out);
    }
    if (p->parsed()) {
      load_config(pr.common);
      return cmd_prioritize(pr, out);
    }
    if (x->parsed()) {
      load_config(ex.common);
      return cmd_explain(ex, out);
    }
    load_config(ab.common);
    return cmd_ablate(ab, out);
  } catch (const UsageError& error) {
    err << "usage error: " << error.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& error) {
    err << "config error: " << error.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& error) {
    err << "error: " << error.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace pavegraph::cli
