// Copyright 2026 The Antehoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// antehoc: generate datasets, train, evaluate and ablate.
//
// Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
// 4 training divergence.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"

#include "antehoc/antehoc.hpp"

namespace fs = std::filesystem;
using namespace antehoc;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

fs::path output_root() {
  if (const char* env = std::getenv("ANTEHOC_OUTPUT_ROOT"); env && *env) return env;
  return "antehoc-runs";
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first failure
/// (in index order) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::max<std::size_t>(threads, 1); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Shared configuration flags

struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> sets;
  std::size_t parallel = 1;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key=value configuration file");
    for (const std::string& key : known_config_keys()) {
      std::string flag = "--" + key;
      for (char& c : flag) c = c == '_' ? '-' : c;
      app->add_option_function<std::string>(
          flag, [this, key](const std::string& v) { overrides[key] = v; },
          "override config key " + key);
    }
    app->add_option("--set", sets, "override as key=value (repeatable)");
    app->add_option("--parallel", parallel, "run up to N seeds concurrently")->check(CLI::PositiveNumber);
  }

  RunConfig resolve() const {
    ConfigMap m;
    if (!config_file.empty()) m = load_config(config_file);
    for (const std::string& s : sets) {
      std::istringstream in(s);
      for (const auto& [k, v] : parse_config(in, "--set")) m[k] = v;
    }
    for (const auto& [k, v] : overrides) m[k] = v;
    RunConfig rc = apply_config(RunConfig{}, m);
    if (rc.dataset.empty()) throw ParameterError("no dataset given (--dataset or config key dataset)");
    if (rc.out_dir.empty()) rc.out_dir = (output_root() / rc.digest()).string();
    return rc;
  }
};

nlohmann::json manifest_of(const RunConfig& rc) {
  nlohmann::json j;
  j["config_digest"] = rc.digest();
  j["config"] = rc.canonical();
  return j;
}

fs::path seed_dir(const RunConfig& rc, Method m, std::uint64_t seed) {
  return fs::path(rc.out_dir) / method_tag(m) / ("seed-" + std::to_string(seed));
}

const char* main_metric(TaskKind t) { return t == TaskKind::kClassification ? "test_auc" : "test_mse"; }

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string kind = "planted-clique";
  std::string out;
  PlantedCliqueParams clique;
  std::string features = "normal";
  std::string input;
  std::string ground_truth;
  std::size_t noise_edges = 0;
  std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& a) {
  const fs::path out = a.out.empty() ? output_root() / "data" / a.kind : fs::path(a.out);
  nlohmann::json manifest;
  manifest["kind"] = a.kind;
  manifest["seed"] = a.seed;
  if (a.kind == "planted-clique") {
    PlantedCliqueParams p = a.clique;
    p.seed = a.seed;
    if (a.features == "uniform") p.features = FeatureKind::kUniform;
    else if (a.features == "normal") p.features = FeatureKind::kNormal;
    else throw ParameterError("--features must be uniform or normal");
    const PlantedCliqueData d = generate_planted_clique(p);
    save_jsonl(d.dataset, out / "dataset.jsonl");
    save_ground_truth(d.ground_truth, out / "ground_truth.jsonl");
    manifest["num_graphs"] = p.num_graphs;
    manifest["num_nodes"] = p.num_nodes;
    manifest["edge_prob"] = p.edge_prob;
    manifest["clique_size"] = p.clique_size;
    manifest["feature_dim"] = p.feature_dim;
    manifest["features"] = a.features;
  } else if (a.kind == "noise") {
    if (a.input.empty()) throw ParameterError("noise generation needs --input");
    const Dataset ds = load_jsonl(a.input);
    const Dataset noisy = add_noise_edges(ds, a.noise_edges, a.seed);
    save_jsonl(noisy, out / "dataset.jsonl");
    if (!a.ground_truth.empty()) {
      // Original edges survive, so the ground truth carries over unchanged.
      save_ground_truth(load_ground_truth(a.ground_truth), out / "ground_truth.jsonl");
    }
    manifest["input"] = a.input;
    manifest["noise_edges"] = a.noise_edges;
  } else {
    throw ParameterError("unknown dataset kind '" + a.kind + "' (planted-clique or noise)");
  }
  write_json(manifest, out / "manifest.json");
  std::cout << "wrote " << (out / "dataset.jsonl").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct SeedResult {
  std::uint64_t seed = 0;
  double metric = 0.0;
};

double test_metric(const Dataset& ds, const SplitIndices& s, const TrainerOutput& out) {
  return task_metric(ds.task, predict(ds, s.test, &out.phi, out.theta), labels_of(ds, s.test));
}

void save_run(const Dataset& ds, const SplitIndices& s, const TrainerOutput& out, const fs::path& dir) {
  save_params(out.phi, dir / "phi.params");
  save_params(out.theta, dir / "theta.params");
  save_training_log(out.log, dir / "train_log.csv");
  save_explanations(ds, s.test, influence_values(ds, s.test, out.phi), dir / "explanations.jsonl");
}

int cmd_train(const ConfigFlags& flags, bool verbose) {
  const RunConfig rc = flags.resolve();
  const Dataset ds = load_jsonl(rc.dataset);
  const SplitIndices s = split(ds, rc.split_seed);
  std::vector<SeedResult> results(rc.seeds.size());
  std::mutex io;
  parallel_for(rc.seeds.size(), flags.parallel, [&](std::size_t i) {
    TrainConfig c = rc.train;
    c.seed = rc.seeds[i];
    ProgressFn progress;
    if (verbose) {
      progress = [&, seed = c.seed](const LogRow& r, const ModelParams&) {
        std::lock_guard lock(io);
        std::cerr << "seed " << seed << " step " << r.outer_step << " support " << r.support_loss
                  << " val " << r.val_metric << '\n';
      };
    }
    const TrainerOutput out = run_method(ds, s, c, rc.method, progress);
    save_run(ds, s, out, seed_dir(rc, rc.method, c.seed));
    results[i] = {c.seed, test_metric(ds, s, out)};
    std::lock_guard lock(io);
    std::cout << method_tag(rc.method) << " seed " << c.seed << ' ' << main_metric(ds.task) << ' '
              << results[i].metric << " (best step " << out.best_step << ", stopped "
              << out.stop_step << ")\n";
  });
  std::vector<MetricReport> rows;
  for (const SeedResult& r : results) {
    rows.push_back({ds.name, method_tag(rc.method), std::to_string(r.seed), main_metric(ds.task),
                    r.metric, rc.digest()});
  }
  const fs::path base = fs::path(rc.out_dir) / method_tag(rc.method);
  write_metric_csv(with_aggregates(rows), base / "metrics.csv");
  write_json(manifest_of(rc), base / "manifest.json");
  std::cout << "wrote " << (base / "metrics.csv").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string noisy;
  double repro_fraction = 0.2;
  std::size_t faith_k = 28;
  bool skip_reproducibility = false;
};

ModelParams load_checkpoint(const fs::path& p) {
  if (!fs::exists(p)) throw IoError("missing artifact " + p.string());
  return load_params(p);
}

int cmd_evaluate(const ConfigFlags& flags, const EvaluateArgs& a) {
  const RunConfig rc = flags.resolve();
  const Dataset ds = load_jsonl(rc.dataset);
  const SplitIndices s = split(ds, rc.split_seed);
  std::optional<GroundTruth> truth;
  if (!rc.ground_truth.empty()) {
    truth = load_ground_truth(rc.ground_truth);
    truth->validate(ds);
  }
  std::optional<Dataset> noisy;
  if (!a.noisy.empty()) noisy = load_jsonl(a.noisy);
  const bool cls = ds.task == TaskKind::kClassification;

  std::vector<std::vector<MetricReport>> per_seed(rc.seeds.size());
  parallel_for(rc.seeds.size(), flags.parallel, [&](std::size_t i) {
    const std::uint64_t seed = rc.seeds[i];
    const fs::path dir = seed_dir(rc, rc.method, seed);
    const ModelParams phi = load_checkpoint(dir / "phi.params");
    const ModelParams theta = load_checkpoint(dir / "theta.params");
    auto add = [&](const std::string& name, double v) {
      per_seed[i].push_back({ds.name, method_tag(rc.method), std::to_string(seed), name, v, rc.digest()});
    };
    const std::vector<double> pred = predict(ds, s.test, &phi, theta);
    const std::vector<double> y = labels_of(ds, s.test);
    if (cls) {
      add("test_auc", auc(pred, y));
      add("test_ap", average_precision(pred, y));
      add("faithfulness_k" + std::to_string(a.faith_k), faithfulness_pos(ds, s.test, phi, theta, a.faith_k));
    } else {
      add("test_mse", mean_squared_error(pred, y));
      add("test_r2", r2_score(pred, y));
    }
    if (truth) {
      add("precision_at_k", explanation_overlap(ds, s.test, influence_values(ds, s.test, phi).values, *truth));
    }
    if (!a.skip_reproducibility) {
      TrainConfig c = rc.train;
      c.seed = seed;
      add("reproducibility_p" + detail::fmt_double(a.repro_fraction),
          reproducibility(ds, s, phi, a.repro_fraction, c));
    }
    if (noisy) {
      if (noisy->size() != ds.size()) throw SchemaError("noisy dataset is not parallel to the dataset");
      std::vector<std::vector<std::size_t>> maps;
      for (std::size_t g : s.test) maps.push_back(align_edges(ds.graphs[g], noisy->graphs[g]));
      const StabilityResult st = stability(influence_values(ds, s.test, phi).values,
                                           influence_values(*noisy, s.test, phi).values, maps);
      add("stability_cosine_distance", st.cosine_distance);
      add("stability_pearson", st.pearson);
    }
  });
  std::vector<MetricReport> rows;
  for (auto& v : per_seed) rows.insert(rows.end(), v.begin(), v.end());
  const fs::path path = fs::path(rc.out_dir) / method_tag(rc.method) / "evaluation.csv";
  write_metric_csv(with_aggregates(rows), path);
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// ablate

int cmd_ablate(const ConfigFlags& flags) {
  const RunConfig rc = flags.resolve();
  const Dataset ds = load_jsonl(rc.dataset);
  const SplitIndices s = split(ds, rc.split_seed);
  const Method methods[] = {Method::kRage, Method::kSingle, Method::kKeep};
  const std::size_t n = rc.seeds.size();
  std::vector<double> value(3 * n);
  std::mutex io;
  parallel_for(3 * n, flags.parallel, [&](std::size_t job) {
    TrainConfig c = rc.train;
    c.seed = rc.seeds[job / 3];
    const Method m = methods[job % 3];
    const TrainerOutput out = run_method(ds, s, c, m);
    save_run(ds, s, out, seed_dir(rc, m, c.seed));
    value[job] = test_metric(ds, s, out);
    std::lock_guard lock(io);
    std::cout << method_tag(m) << " seed " << c.seed << ' ' << main_metric(ds.task) << ' ' << value[job] << '\n';
  });
  const fs::path base(rc.out_dir);
  fs::create_directories(base);
  std::ofstream cmp(base / "ablation.csv", std::ios::binary | std::ios::trunc);
  if (!cmp) throw IoError("cannot open " + (base / "ablation.csv").string() + " for writing");
  cmp << "seed,split_seed,metric,rage,rage-single,rage-keep,rage_minus_single,rage_minus_keep,config_digest\r\n";
  std::vector<MetricReport> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double full = value[3 * i], single = value[3 * i + 1], keep = value[3 * i + 2];
    cmp << rc.seeds[i] << ',' << rc.split_seed << ',' << main_metric(ds.task) << ','
        << detail::format_double(full) << ',' << detail::format_double(single) << ','
        << detail::format_double(keep) << ',' << detail::format_double(full - single) << ','
        << detail::format_double(full - keep) << ',' << rc.digest() << "\r\n";
    for (std::size_t k = 0; k < 3; ++k) {
      rows.push_back({ds.name, method_tag(methods[k]), std::to_string(rc.seeds[i]), main_metric(ds.task),
                      value[3 * i + k], rc.digest()});
    }
  }
  if (!cmp) throw IoError("write failed for " + (base / "ablation.csv").string());
  write_metric_csv(with_aggregates(rows), base / "ablation_metrics.csv");
  write_json(manifest_of(rc), base / "manifest.json");
  std::cout << "wrote " << (base / "ablation.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilevel training of GNNs with an ante-hoc edge-influence explainer"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a synthetic or noise-augmented dataset");
  g->add_option("kind", gen.kind, "planted-clique or noise")->required();
  g->add_option("--out", gen.out, "output directory");
  g->add_option("--seed", gen.seed, "generator seed");
  g->add_option("--num-graphs", gen.clique.num_graphs, "number of graphs");
  g->add_option("--nodes", gen.clique.num_nodes, "nodes per graph");
  g->add_option("--p", gen.clique.edge_prob, "edge probability");
  g->add_option("--k", gen.clique.clique_size, "clique size");
  g->add_option("--dim", gen.clique.feature_dim, "feature dimension");
  g->add_option("--features", gen.features, "normal (default) or uniform");
  g->add_option("--input", gen.input, "dataset to add noise edges to");
  g->add_option("--ground-truth", gen.ground_truth, "ground truth to carry over");
  g->add_option("--x", gen.noise_edges, "noise edges added per graph");

  ConfigFlags train_flags;
  bool verbose = false;
  auto* t = app.add_subcommand("train", "train one method over the configured seeds");
  train_flags.attach(t);
  t->add_flag("-v,--verbose", verbose, "print every outer step");

  ConfigFlags eval_flags;
  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "metric battery over trained checkpoints");
  eval_flags.attach(e);
  e->add_option("--noisy", ev.noisy, "noise-augmented dataset for stability");
  e->add_option("--repro-fraction", ev.repro_fraction, "edge fraction kept for reproducibility");
  e->add_option("--faith-k", ev.faith_k, "edges kept for faithfulness");
  e->add_flag("--skip-reproducibility", ev.skip_reproducibility, "do not retrain on explanations");

  ConfigFlags ablate_flags;
  auto* a = app.add_subcommand("ablate", "paired rage / rage-single / rage-keep runs");
  ablate_flags.attach(a);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(train_flags, verbose);
    if (e->parsed()) return cmd_evaluate(eval_flags, ev);
    if (a->parsed()) return cmd_ablate(ablate_flags);
  } catch (const DivergenceError& err) {
    std::cerr << "error: training diverged: " << err.what() << '\n';
    return kExitDivergence;
  } catch (const ParameterError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  } catch (const ParseError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  } catch (const SchemaError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
