// Named comparison suites: each suite trains a fixed set of design variants
// across seeds, aggregates mean/std test accuracy, and renders a table with
// the published full-scale numbers displayed alongside for orientation.
// Published numbers are never asserted against — at reduced scale only the
// *direction* of a comparison is expected to carry over.
//
// Results are cached per (scale, variant, seed) under
//   <cache_root>/<scale>/<variant>_s<seed>/summary.json
// and reused on rerun, so a long suite can be resumed after interruption and
// individual comparisons can be run one at a time.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsdlab/analyzer.hpp"
#include "fsdlab/driver.hpp"
#include "fsdlab/runfile.hpp"

namespace fsdlab {

struct AblationVariantSpec {
  std::string model;       // builtin design name to train
  std::string variant;     // row label within the table
  std::string cache_name;  // directory stem for cached runs
  bool dropout = true;
  bool batchnorm = true;
  std::string lr_policy = "poly";
  double ref_acc = 0.0;    // published full-scale accuracy (display only)
  long ref_params_k = 0;   // published full-scale parameter count (display only)
};

struct AblationDef {
  std::string name;   // CLI handle
  std::string title;  // human heading
  std::vector<AblationVariantSpec> variants;
};

inline const std::vector<AblationDef>& ablation_catalog() {
  static const std::vector<AblationDef> defs = {
      {"designs",
       "Main designs",
       {
           {"design1", "design1", "design1", true, true, "poly", 89.4, 20173},
           {"design2", "design2", "design2", true, true, "poly", 86.8, 20173},
           {"design3", "design3", "design3", true, true, "poly", 87.9, 20025},
       }},
      {"conv_vs_pool",
       "Learned strided conv vs max pooling",
       {
           {"design1_conv", "strided_conv", "design1_conv", true, true, "poly", 91.7, 20948},
           {"design1", "max_pooling", "design1", true, true, "poly", 89.4, 20173},
       }},
      {"regularization",
       "Explicit regularization toggles",
       {
           // These published tables carry no parameter column; 0 renders as "-".
           {"design1_conv", "dropout=yes batchnorm=yes", "design1_conv", true, true, "poly", 91.7,
            0},
           {"design1_conv", "dropout=yes batchnorm=no", "design1_conv_nobn", true, false, "poly",
            88.2, 0},
           {"design1_conv", "dropout=no batchnorm=yes", "design1_conv_nodrop", false, true, "poly",
            90.1, 0},
       }},
      {"lr_policy",
       "Learning-rate decay policy",
       {
           {"design1_conv", "polynomial", "design1_conv", true, true, "poly", 91.7, 0},
           {"design1_conv", "step", "design1_conv_step", true, true, "step", 90.1, 0},
       }},
      {"reduction_rate",
       "Immediate vs deferred first reduction",
       {
           {"design1_conv", "first_layer_stride=no", "design1_conv", true, true, "poly", 91.7, 0},
           {"design1_conv_stride", "first_layer_stride=yes", "design1_conv_stride", true, true,
            "poly", 89.4, 0},
       }},
      {"depth",
       "Deeper residual variant",
       {
           {"design1_conv", "design1_conv", "design1_conv", true, true, "poly", 91.7, 20948},
           {"design4", "design4", "design4", true, true, "poly", 89.3, 21573},
       }},
  };
  return defs;
}

inline const AblationDef& find_ablation(const std::string& name) {
  for (const auto& def : ablation_catalog())
    if (def.name == name) return def;
  std::string valid;
  for (const auto& def : ablation_catalog()) valid += (valid.empty() ? "" : ", ") + def.name;
  throw ValueError("unknown ablation '" + name + "' (valid: " + valid + ")");
}

struct AblationRow {
  std::string model;
  std::string variant;
  long params_k = 0;  // counted on the spec actually trained at this scale
  double mean_test_acc = 0.0;
  double std_test_acc = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> seed_accs;
  double ref_acc = 0.0;
  long ref_params_k = 0;
  bool failed = false;
  std::string error;
};

struct AblationResult {
  std::string name;
  std::string title;
  Scale scale = Scale::Tiny;
  std::vector<AblationRow> rows;
};

struct AblateOptions {
  Scale scale = Scale::Tiny;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  bool synthetic = true;
  std::string data_dir;           // CIFAR directory when not synthetic
  std::string cache_root = "runs";
  int parallel_seeds = 1;         // seed replicas trained concurrently
  int epochs = 0;                 // 0 = per-scale default
  bool deterministic = true;
  std::function<void(const std::string&)> progress;  // one line per event
};

inline int default_epochs(Scale scale) {
  switch (scale) {
    case Scale::Full: return 164;  // ~64k steps at batch 128 over 50k images
    case Scale::Small: return 20;
    case Scale::Tiny: return 2;
  }
  return 20;
}

namespace detail {

inline RunFile variant_runfile(const AblationVariantSpec& v, const AblateOptions& opt,
                               std::uint64_t seed, const std::string& out_dir) {
  RunFile rf;
  rf.design = v.model;
  rf.scale = opt.scale;
  rf.synthetic = opt.synthetic;
  rf.dataset_dir = opt.data_dir;
  rf.output_dir = out_dir;
  rf.deterministic = opt.deterministic;
  rf.config.epochs = opt.epochs > 0 ? opt.epochs : default_epochs(opt.scale);
  rf.config.batch_size = 128;
  rf.config.seed = seed;
  rf.config.dropout_enabled = v.dropout;
  rf.config.bn_enabled = v.batchnorm;
  rf.lr_policy = v.lr_policy;
  // Without normalization this depth is unstable at the shared 0.08 base rate,
  // so the batch-norm-off arm trains at the highest rate it handles.
  rf.lr_lambda0 = v.batchnorm ? 0.08 : 0.05;
  rf.lr_c = 1.0;
  if (v.lr_policy == "step") {
    rf.lr_gamma = 0.1;
    rf.lr_step = 500;
  }
  return rf;
}

// Returns the cached final accuracy if the summary on disk matches this exact
// (design, scale, seed, synthetic) request, else NaN.
inline double cached_accuracy(const std::string& dir, const RunFile& rf) {
  namespace fs = std::filesystem;
  const fs::path p = fs::path(dir) / "summary.json";
  std::ifstream in(p);
  if (!in) return std::nan("");
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("design", "") != rf.design) return std::nan("");
    if (j.value("scale", "") != scale_name(rf.scale)) return std::nan("");
    if (j.value("seed", std::uint64_t{0}) != rf.config.seed) return std::nan("");
    if (j.value("synthetic", false) != rf.synthetic) return std::nan("");
    return j.at("final_test_acc").get<double>();
  } catch (const nlohmann::json::exception&) {
    return std::nan("");
  }
}

}  // namespace detail

inline AblationResult run_ablation(const std::string& name, const AblateOptions& opt) {
  const AblationDef& def = find_ablation(name);
  if (opt.seeds.empty()) throw ValueError("ablation: need at least one seed");
  if (opt.parallel_seeds < 1) throw ValueError("ablation: parallel_seeds must be >= 1");

  AblationResult result;
  result.name = def.name;
  result.title = def.title;
  result.scale = opt.scale;

  const auto say = [&](const std::string& line) {
    if (opt.progress) opt.progress(line);
  };

  for (const auto& v : def.variants) {
    AblationRow row;
    row.model = v.model;
    row.variant = v.variant;
    row.ref_acc = v.ref_acc;
    row.ref_params_k = v.ref_params_k;
    row.seeds = opt.seeds;

    try {
      const NetSpec scaled = apply_scale(builtin_design(v.model), opt.scale);
      row.params_k = count_params(scaled).total / 1000;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      result.rows.push_back(std::move(row));
      continue;
    }

    row.seed_accs.assign(opt.seeds.size(), std::nan(""));
    std::vector<std::string> errors(opt.seeds.size());

    // Seed replicas are independent: separate RNG streams, separate output
    // directories, no shared mutable state in the training stack.
    const auto run_seed = [&](std::size_t si) {
      const std::uint64_t seed = opt.seeds[si];
      const std::string out_dir = opt.cache_root + "/" + scale_name(opt.scale) + "/" +
                                  v.cache_name + "_s" + std::to_string(seed);
      RunFile rf = detail::variant_runfile(v, opt, seed, out_dir);
      const double cached = detail::cached_accuracy(out_dir, rf);
      if (!std::isnan(cached)) {
        row.seed_accs[si] = cached;
        say("[cached] " + v.cache_name + " seed " + std::to_string(seed));
        return;
      }
      try {
        say("[train] " + v.cache_name + " seed " + std::to_string(seed));
        row.seed_accs[si] = run_training(rf).final_test_acc;
      } catch (const std::exception& e) {
        errors[si] = e.what();
      }
    };

    std::size_t next = 0;
    const std::size_t width =
        std::min<std::size_t>(static_cast<std::size_t>(opt.parallel_seeds), opt.seeds.size());
    while (next < opt.seeds.size()) {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < width && next < opt.seeds.size(); ++k, ++next)
        pool.emplace_back(run_seed, next);
      for (auto& t : pool) t.join();
    }

    std::vector<double> ok;
    for (std::size_t si = 0; si < opt.seeds.size(); ++si) {
      if (std::isnan(row.seed_accs[si])) {
        row.failed = true;
        if (!row.error.empty()) row.error += "; ";
        row.error += "seed " + std::to_string(opt.seeds[si]) + ": " +
                     (errors[si].empty() ? "no result" : errors[si]);
      } else {
        ok.push_back(row.seed_accs[si]);
      }
    }
    if (!ok.empty()) {
      double mean = 0.0;
      for (double a : ok) mean += a;
      mean /= static_cast<double>(ok.size());
      double var = 0.0;
      for (double a : ok) var += (a - mean) * (a - mean);
      var /= static_cast<double>(ok.size());
      row.mean_test_acc = mean;
      row.std_test_acc = std::sqrt(var);
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

// --- rendering --------------------------------------------------------------

inline nlohmann::json ablation_json(const AblationResult& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["title"] = r.title;
  j["scale"] = scale_name(r.scale);
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json o;
    o["model"] = row.model;
    o["variant"] = row.variant;
    o["params_K"] = row.params_k;
    o["mean_test_acc"] = row.mean_test_acc;
    o["std_test_acc"] = row.std_test_acc;
    o["seeds"] = row.seeds;
    nlohmann::json accs = nlohmann::json::array();
    for (double a : row.seed_accs) {
      if (std::isnan(a))
        accs.push_back(nullptr);
      else
        accs.push_back(a);
    }
    o["seed_accs"] = accs;
    o["reference_acc"] = row.ref_acc;
    o["reference_params_K"] = row.ref_params_k;
    o["failed"] = row.failed;
    if (row.failed) o["error"] = row.error;
    j["rows"].push_back(std::move(o));
  }
  return j;
}

inline std::string render_ablation_table(const AblationResult& r, bool markdown = false) {
  std::ostringstream out;
  out << std::fixed;
  const char* sep = markdown ? " | " : "  ";
  if (markdown) {
    out << "### " << r.title << " (" << scale_name(r.scale) << " scale)\n\n";
    out << "| model | variant | params K | mean acc % | std | published acc % | published K |\n";
    out << "|---|---|---|---|---|---|---|\n";
  } else {
    out << r.title << " — " << scale_name(r.scale) << " scale\n";
    out << std::left << std::setw(20) << "model" << sep << std::setw(26) << "variant" << sep
        << std::setw(9) << "params K" << sep << std::setw(12) << "mean acc %" << sep
        << std::setw(7) << "std" << sep << std::setw(9) << "pub %" << sep << "pub K\n";
  }
  for (const auto& row : r.rows) {
    std::ostringstream acc, dev;
    if (row.failed && row.seed_accs.empty()) {
      acc << "FAILED";
      dev << "-";
    } else if (row.failed) {
      acc << "PARTIAL";
      dev << "-";
    } else {
      acc << std::fixed << std::setprecision(1) << 100.0 * row.mean_test_acc;
      dev << std::fixed << std::setprecision(1) << 100.0 * row.std_test_acc;
    }
    const std::string pub_k = row.ref_params_k > 0 ? std::to_string(row.ref_params_k) : "-";
    if (markdown) {
      out << "| " << row.model << " | " << row.variant << " | " << row.params_k << " | "
          << acc.str() << " | " << dev.str() << " | " << std::setprecision(1) << row.ref_acc
          << " | " << pub_k << " |\n";
    } else {
      out << std::left << std::setw(20) << row.model << sep << std::setw(26) << row.variant << sep
          << std::setw(9) << row.params_k << sep << std::setw(12) << acc.str() << sep
          << std::setw(7) << dev.str() << sep << std::setw(9) << std::setprecision(1)
          << row.ref_acc << sep << pub_k << "\n";
    }
    if (row.failed) out << (markdown ? "" : "  ") << "  ! " << row.error << "\n";
  }
  out << (markdown ? "\n*Published columns are the full-scale reference numbers; at reduced "
                     "scale only the ordering is expected to transfer.*\n"
                   : "(published columns are full-scale reference numbers, shown for "
                     "orientation only)\n");
  return out.str();
}

}  // namespace fsdlab
