#pragma once

// Turns a parsed RunFile into an executed training run: loads or generates
// the dataset, builds the scaled model, trains it, and writes
//   <output>/metrics.csv      per-epoch loss / accuracy / learning rate
//   <output>/summary.json     final metrics plus the resolved settings
//   <output>/config.runfile   canonical snapshot of every setting
// under the run's output directory.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "fsdlab/analyzer.hpp"
#include "fsdlab/cifar.hpp"
#include "fsdlab/model.hpp"
#include "fsdlab/runfile.hpp"

namespace fsdlab {

// Environment override for the dataset directory, so runfiles stay portable.
inline std::string dataset_root_from_env() {
  const char* env = std::getenv("FSDLAB_DATA_DIR");
  return env ? std::string(env) : std::string();
}

inline Dataset load_run_dataset(const RunFile& rf) {
  if (rf.synthetic)
    return synthetic_dataset(rf.train_count(), rf.test_count(), rf.config.seed);
  std::string dir = rf.dataset_dir;
  const std::string env_dir = dataset_root_from_env();
  if (!env_dir.empty()) dir = env_dir;
  if (dir.empty())
    throw ValueError("no dataset directory configured; set 'dataset:' in the runfile, "
                     "export FSDLAB_DATA_DIR, or use 'synthetic: true'");
  return load_cifar_dir(dir, rf.train_count(), rf.test_count());
}

struct RunResult {
  MetricsLog log;
  double final_test_acc = 0.0;
  double best_test_acc = 0.0;
  long long param_count = 0;
  std::string output_dir;
};

inline RunResult run_training(const RunFile& rf, const EpochCallback& on_epoch = {}) {
  set_deterministic(rf.deterministic);
  NetSpec spec = apply_scale(rf.load_spec(), rf.scale);
  spec.validate();

  Dataset data = load_run_dataset(rf);

  TrainConfig cfg = rf.config;
  const long steps_per_epoch =
      static_cast<long>(data.train.size()) / std::max(1, cfg.batch_size);
  cfg.policy = rf.make_policy(steps_per_epoch);

  BuildOptions opts;
  opts.batchnorm = cfg.bn_enabled;
  opts.dropout = cfg.dropout_enabled;
  Rng init_rng = Rng::derive(cfg.seed, "init");
  Model model = build_model(spec, init_rng, opts);

  RunResult result;
  result.param_count = model.param_count();
  result.log = train(model, data, cfg, on_epoch);
  if (!result.log.epochs.empty()) {
    result.final_test_acc = result.log.epochs.back().test_acc;
    for (const auto& e : result.log.epochs)
      result.best_test_acc = std::max(result.best_test_acc, e.test_acc);
  }

  if (!rf.output_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(rf.output_dir);
    result.output_dir = rf.output_dir;
    {
      std::ofstream csv(fs::path(rf.output_dir) / "metrics.csv", std::ios::binary);
      csv << result.log.to_csv();
    }
    {
      std::ofstream snap(fs::path(rf.output_dir) / "config.runfile", std::ios::binary);
      snap << render_runfile(rf);
    }
    {
      nlohmann::json j = result.log.summary_json();
      j["design"] = rf.design.empty() ? rf.spec_path : rf.design;
      j["scale"] = scale_name(rf.scale);
      j["seed"] = rf.config.seed;
      j["synthetic"] = rf.synthetic;
      j["param_count"] = result.param_count;
      j["final_test_acc"] = result.final_test_acc;
      j["best_test_acc"] = result.best_test_acc;
      std::ofstream js(fs::path(rf.output_dir) / "summary.json", std::ios::binary);
      js << j.dump(2) << "\n";
    }
  }
  return result;
}

}  // namespace fsdlab
