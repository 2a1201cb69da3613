// Command-line front end.
//
//   fsdlab analyze <design-or-spec-file> [--json] [--strict] [--bounds]
//                  [--info] [--scale S]
//   fsdlab train   <runfile> [--synthetic] [--data DIR] [--out DIR]
//                  [--seed N] [--epochs N] [--scale S] [--deterministic B]
//   fsdlab ablate  <name> [--scale S] [--seeds 1,2,3] [--synthetic]
//                  [--data DIR] [--parallel-seeds N] [--cache DIR]
//                  [--epochs N] [--json] [--markdown]
//   fsdlab report  <results-dir> [--json] [--csv] [--markdown]
//
// The dataset directory can also come from the FSDLAB_DATA_DIR environment
// variable. Exit codes: 0 ok, 1 user/lint error, 2 bad invocation, 3 aborted
// training run.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/program_options.hpp>
#include <nlohmann/json.hpp>

#include "fsdlab/ablation.hpp"
#include "fsdlab/analyzer.hpp"
#include "fsdlab/driver.hpp"
#include "fsdlab/infoloss.hpp"
#include "fsdlab/runfile.hpp"

namespace po = boost::program_options;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kUsage =
    "usage: fsdlab <analyze|train|ablate|report> [args] [flags]\n"
    "  analyze <design|spec-file>   static structure report\n"
    "  train <runfile>              run one training job\n"
    "  ablate <name>                run a named comparison suite\n"
    "  report <results-dir>         summarize completed runs\n"
    "run 'fsdlab <verb> --help' for the verb's flags\n";

// Loads a built-in design by name or parses a spec file from disk.
fsdlab::NetSpec load_design(const std::string& arg) {
  const auto& names = fsdlab::builtin_design_names();
  if (std::find(names.begin(), names.end(), arg) != names.end())
    return fsdlab::builtin_design(arg);
  std::ifstream in(arg);
  if (!in) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw fsdlab::IoError("'" + arg + "' is neither a built-in design (" + known +
                          ") nor a readable file");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return fsdlab::parse_spec(buf.str());
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const unsigned long long v = std::stoull(item, &used);
    if (used != item.size()) throw fsdlab::ValueError("bad seed '" + item + "'");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw fsdlab::ValueError("seed list '" + text + "' is empty");
  return seeds;
}

int cmd_analyze(const std::vector<std::string>& args) {
  po::options_description desc("analyze flags");
  desc.add_options()                                                        //
      ("help", "show this help")                                            //
      ("spec", po::value<std::string>(), "design name or spec file")        //
      ("json", "emit machine-readable JSON")                                //
      ("strict", "exit 1 when any error lint fires")                        //
      ("bounds", "include capacity expressions")                            //
      ("info", "append information-flow report (random init, synthetic batch)")  //
      ("scale", po::value<std::string>()->default_value("full"),
       "channel scale: full|small|tiny");
  po::positional_options_description pos;
  pos.add("spec", 1);
  po::variables_map vm;
  po::store(po::command_line_parser(args).options(desc).positional(pos).run(), vm);
  po::notify(vm);
  if (vm.count("help") || !vm.count("spec")) {
    std::cout << desc << "\n";
    return vm.count("help") ? 0 : 2;
  }

  fsdlab::NetSpec spec = load_design(vm["spec"].as<std::string>());
  const fsdlab::Scale scale = fsdlab::scale_from(vm["scale"].as<std::string>());
  spec = fsdlab::apply_scale(std::move(spec), scale);
  spec.validate();
  fsdlab::AnalysisReport report = fsdlab::analyze(spec, vm.count("bounds") > 0);

  std::optional<fsdlab::InfoReport> info;
  if (vm.count("info")) {
    fsdlab::Rng init(1);
    auto model = fsdlab::build_model(spec, init);
    const int n = 48;
    fsdlab::Tensor batch({n, spec.input.h, spec.input.w, spec.input.c});
    fsdlab::Rng data(7);
    for (auto& v : batch.data) v = static_cast<float>(data.uniform(-1.0, 1.0));
    info = fsdlab::layer_info_report(model, batch, 24);
  }

  if (vm.count("json")) {
    json j = fsdlab::analysis_to_json(report);
    j["scale"] = fsdlab::scale_name(scale);
    if (info) j["info"] = fsdlab::info_to_json(*info);
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << fsdlab::analysis_to_text(report);
    if (info) std::cout << "\n" << fsdlab::info_to_text(*info);
  }
  if (vm.count("strict") && report.has_error_lints()) return 1;
  return 0;
}

int cmd_train(const std::vector<std::string>& args) {
  po::options_description desc("train flags");
  desc.add_options()                                                 //
      ("help", "show this help")                                     //
      ("runfile", po::value<std::string>(), "run description file")  //
      ("synthetic", "use the generated dataset regardless of the runfile")  //
      ("data", po::value<std::string>(), "dataset directory override")      //
      ("out", po::value<std::string>(), "output directory override")        //
      ("seed", po::value<std::uint64_t>(), "seed override")                 //
      ("epochs", po::value<int>(), "epoch count override")                  //
      ("scale", po::value<std::string>(), "scale override: full|small|tiny")  //
      ("deterministic", po::value<bool>(), "reproducible kernels (default on)")  //
      ("quiet", "suppress per-epoch progress lines");
  po::positional_options_description pos;
  pos.add("runfile", 1);
  po::variables_map vm;
  po::store(po::command_line_parser(args).options(desc).positional(pos).run(), vm);
  po::notify(vm);
  if (vm.count("help") || !vm.count("runfile")) {
    std::cout << desc << "\n";
    return vm.count("help") ? 0 : 2;
  }

  fsdlab::RunFile rf = fsdlab::load_runfile(vm["runfile"].as<std::string>());
  if (vm.count("synthetic")) rf.synthetic = true;
  if (vm.count("data")) rf.dataset_dir = vm["data"].as<std::string>();
  if (vm.count("out")) rf.output_dir = vm["out"].as<std::string>();
  if (vm.count("seed")) rf.config.seed = vm["seed"].as<std::uint64_t>();
  if (vm.count("epochs")) rf.config.epochs = vm["epochs"].as<int>();
  if (vm.count("scale")) rf.scale = fsdlab::scale_from(vm["scale"].as<std::string>());
  if (vm.count("deterministic")) rf.deterministic = vm["deterministic"].as<bool>();

  const bool quiet = vm.count("quiet") > 0;
  try {
    auto result = fsdlab::run_training(rf, [&](const fsdlab::EpochMetrics& m) {
      if (quiet) return;
      std::cout << "epoch " << m.epoch << "  loss " << std::fixed << std::setprecision(4)
                << m.train_loss << "  train " << m.train_acc << "  test " << m.test_acc << "  lr "
                << std::setprecision(5) << m.lr << "\n"
                << std::flush;
    });
    std::cout << "final test accuracy " << std::fixed << std::setprecision(4)
              << result.final_test_acc << " (best " << result.best_test_acc << "), "
              << result.param_count << " params";
    if (!result.output_dir.empty()) std::cout << " -> " << result.output_dir;
    std::cout << "\n";
    return 0;
  } catch (const fsdlab::TrainAbort& e) {
    std::cerr << "training aborted: " << e.what() << " (iteration " << e.iter << ", rate " << e.lr
              << ", gradient norm " << e.grad_norm << ")\n";
    return 3;
  }
}

int cmd_ablate(const std::vector<std::string>& args) {
  po::options_description desc("ablate flags");
  desc.add_options()                                                          //
      ("help", "show this help")                                              //
      ("name", po::value<std::string>(), "which comparison suite")            //
      ("scale", po::value<std::string>()->default_value("tiny"),
       "channel scale: full|small|tiny")                                      //
      ("seeds", po::value<std::string>()->default_value("1,2,3"),
       "comma-separated seed list")                                           //
      ("synthetic", "use the generated dataset")                              //
      ("data", po::value<std::string>(), "dataset directory")                 //
      ("parallel-seeds", po::value<int>()->default_value(1),
       "seed replicas trained concurrently")                                  //
      ("cache", po::value<std::string>()->default_value("runs"),
       "root directory for per-run caching")                                  //
      ("epochs", po::value<int>()->default_value(0), "override (0 = scale default)")  //
      ("json", "emit machine-readable JSON")                                  //
      ("markdown", "emit a markdown table");
  po::positional_options_description pos;
  pos.add("name", 1);
  po::variables_map vm;
  po::store(po::command_line_parser(args).options(desc).positional(pos).run(), vm);
  po::notify(vm);
  if (vm.count("help") || !vm.count("name")) {
    std::cout << desc << "\n";
    std::cout << "suites:";
    for (const auto& d : fsdlab::ablation_catalog()) std::cout << " " << d.name;
    std::cout << "\n";
    return vm.count("help") ? 0 : 2;
  }

  fsdlab::AblateOptions opt;
  opt.scale = fsdlab::scale_from(vm["scale"].as<std::string>());
  opt.seeds = parse_seed_list(vm["seeds"].as<std::string>());
  opt.synthetic = vm.count("synthetic") > 0;
  if (vm.count("data")) opt.data_dir = vm["data"].as<std::string>();
  opt.parallel_seeds = vm["parallel-seeds"].as<int>();
  opt.cache_root = vm["cache"].as<std::string>();
  opt.epochs = vm["epochs"].as<int>();
  if (!vm.count("json"))
    opt.progress = [](const std::string& line) { std::cerr << line << "\n"; };

  auto result = fsdlab::run_ablation(vm["name"].as<std::string>(), opt);
  if (vm.count("json"))
    std::cout << fsdlab::ablation_json(result).dump(2) << "\n";
  else
    std::cout << fsdlab::render_ablation_table(result, vm.count("markdown") > 0);
  for (const auto& row : result.rows)
    if (row.failed) return 1;
  return 0;
}

struct RunSummary {
  std::string dir;
  json data;
};

int cmd_report(const std::vector<std::string>& args) {
  po::options_description desc("report flags");
  desc.add_options()                                            //
      ("help", "show this help")                                //
      ("dir", po::value<std::string>(), "directory of run outputs")  //
      ("json", "emit machine-readable JSON")                    //
      ("csv", "emit CSV")                                       //
      ("markdown", "emit a markdown table");
  po::positional_options_description pos;
  pos.add("dir", 1);
  po::variables_map vm;
  po::store(po::command_line_parser(args).options(desc).positional(pos).run(), vm);
  po::notify(vm);
  if (vm.count("help") || !vm.count("dir")) {
    std::cout << desc << "\n";
    return vm.count("help") ? 0 : 2;
  }

  const fs::path root = vm["dir"].as<std::string>();
  if (!fs::exists(root)) {
    std::cerr << "report: directory '" << root.string() << "' does not exist\n";
    return 1;
  }

  std::vector<RunSummary> runs;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator();
       ++it) {
    if (!it->is_regular_file() || it->path().filename() != "summary.json") continue;
    std::ifstream in(it->path());
    try {
      RunSummary rs;
      rs.data = json::parse(in);
      rs.dir = fs::relative(it->path().parent_path(), root).string();
      runs.push_back(std::move(rs));
    } catch (const json::exception& e) {
      std::cerr << "report: skipping unreadable " << it->path().string() << ": " << e.what()
                << "\n";
    }
  }
  std::sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) {
    const std::string da = a.data.value("design", ""), db = b.data.value("design", "");
    return da != db ? da < db : a.dir < b.dir;
  });

  const auto cell = [](const json& j, const char* key) -> std::string {
    if (!j.contains(key)) return "-";
    if (j[key].is_number_float()) {
      std::ostringstream o;
      o << std::fixed << std::setprecision(4) << j[key].get<double>();
      return o.str();
    }
    if (j[key].is_string()) return j[key].get<std::string>();
    return j[key].dump();
  };

  if (vm.count("json")) {
    json out = json::array();
    for (const auto& r : runs) {
      json o = r.data;
      o["run"] = r.dir;
      out.push_back(std::move(o));
    }
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  const bool md = vm.count("markdown") > 0;
  const bool csv = vm.count("csv") > 0;
  if (csv) {
    std::cout << "run,design,scale,seed,params,epochs,final_test_acc,best_test_acc\n";
  } else if (md) {
    std::cout << "| run | design | scale | seed | params | epochs | final acc | best acc |\n";
    std::cout << "|---|---|---|---|---|---|---|---|\n";
  } else {
    std::cout << std::left << std::setw(30) << "run" << std::setw(20) << "design" << std::setw(7)
              << "scale" << std::setw(6) << "seed" << std::setw(10) << "params" << std::setw(8)
              << "epochs" << std::setw(11) << "final acc" << "best acc\n";
  }
  for (const auto& r : runs) {
    const std::string fields[8] = {r.dir,
                                   cell(r.data, "design"),
                                   cell(r.data, "scale"),
                                   cell(r.data, "seed"),
                                   cell(r.data, "param_count"),
                                   cell(r.data, "epochs"),
                                   cell(r.data, "final_test_acc"),
                                   cell(r.data, "best_test_acc")};
    if (csv) {
      for (int i = 0; i < 8; ++i) std::cout << (i ? "," : "") << fields[i];
      std::cout << "\n";
    } else if (md) {
      std::cout << "|";
      for (const auto& f : fields) std::cout << " " << f << " |";
      std::cout << "\n";
    } else {
      std::cout << std::left << std::setw(30) << fields[0] << std::setw(20) << fields[1]
                << std::setw(7) << fields[2] << std::setw(6) << fields[3] << std::setw(10)
                << fields[4] << std::setw(8) << fields[5] << std::setw(11) << fields[6]
                << fields[7] << "\n";
    }
  }
  if (!csv && !md) std::cout << runs.size() << " run(s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return 2;
  }
  const std::string verb = argv[1];
  std::vector<std::string> rest(argv + 2, argv + argc);
  try {
    if (verb == "analyze") return cmd_analyze(rest);
    if (verb == "train") return cmd_train(rest);
    if (verb == "ablate") return cmd_ablate(rest);
    if (verb == "report") return cmd_report(rest);
    if (verb == "--help" || verb == "-h" || verb == "help") {
      std::cout << kUsage;
      return 0;
    }
    std::cerr << "unknown verb '" << verb << "'\n" << kUsage;
    return 2;
  } catch (const po::error& e) {
    std::cerr << "fsdlab " << verb << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fsdlab " << verb << ": " << e.what() << "\n";
    return 1;
  }
}
