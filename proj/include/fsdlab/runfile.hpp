#pragma once

// Declarative run descriptions: one "key: value" pair per line, '#' comments.
//
//   design: design1_conv        # or  spec: path/to/file.netspec
//   scale: small                # full | small | tiny
//   dataset: /data/cifar10      # directory of *.bin batches
//   synthetic: false            # true: generated dataset, no files needed
//   output: runs/my_run
//   epochs: 20
//   batch: 128
//   seed: 1
//   lr_policy: poly             # fixed | exponential | step | inverse | poly | sigmoid
//   lr_lambda0: 0.05
//   lr_gamma: 0.1               # exponential / step / inverse / sigmoid
//   lr_c: 1.0                   # fixed (the rate) / inverse / poly
//   lr_step: 100                # step / sigmoid
//   l1: 0.0
//   l2: 0.0
//   dropout: on
//   batchnorm: on
//   augment: on
//   balancing: none             # none | uniform | stratified
//   deterministic: true
//   train_limit: 0              # optional sample-count overrides (0 = scale default)
//   test_limit: 0
//
// Scales resize both the model and the data:
//   full   divisor 1, 50000 train / 10000 test
//   small  divisor 4, 10000 train /  2000 test
//   tiny   divisor 8,   512 train /   128 test
// The divisor divides every conv block's channel count except the final
// class block; it must divide each of them exactly.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fsdlab/netspec.hpp"
#include "fsdlab/optim.hpp"

namespace fsdlab {

enum class Scale { Full, Small, Tiny };

inline Scale scale_from(const std::string& s) {
  if (s == "full") return Scale::Full;
  if (s == "small") return Scale::Small;
  if (s == "tiny") return Scale::Tiny;
  throw ValueError("unknown scale '" + s + "' (valid: full, small, tiny)");
}

inline const char* scale_name(Scale s) {
  switch (s) {
    case Scale::Full: return "full";
    case Scale::Small: return "small";
    case Scale::Tiny: return "tiny";
  }
  return "?";
}

inline int scale_divisor(Scale s) {
  switch (s) {
    case Scale::Full: return 1;
    case Scale::Small: return 4;
    case Scale::Tiny: return 8;
  }
  return 1;
}

inline int scale_train_count(Scale s) {
  switch (s) {
    case Scale::Full: return 50000;
    case Scale::Small: return 10000;
    case Scale::Tiny: return 512;
  }
  return 0;
}

inline int scale_test_count(Scale s) {
  switch (s) {
    case Scale::Full: return 10000;
    case Scale::Small: return 2000;
    case Scale::Tiny: return 128;
  }
  return 0;
}

// Divides channel widths by the scale divisor, leaving the class block (the
// network output) untouched.
inline NetSpec apply_scale(NetSpec spec, Scale scale) {
  const int div = scale_divisor(scale);
  if (div == 1) return spec;
  const std::string sink = spec.output_block().name;
  for (auto& b : spec.blocks) {
    if (!b.is_conv() || b.name == sink) continue;
    if (b.out_channels % div != 0)
      throw ValueError("scale " + std::string(scale_name(scale)) + ": block '" + b.name +
                       "' channels " + std::to_string(b.out_channels) + " not divisible by " +
                       std::to_string(div));
    b.out_channels /= div;
  }
  return spec;
}

struct RunFile {
  std::string design;     // builtin name; empty when spec_path is used
  std::string spec_path;  // path to a parseable network file
  Scale scale = Scale::Small;
  std::string dataset_dir;
  bool synthetic = false;
  std::string output_dir = "runs/out";
  TrainConfig config;
  bool deterministic = true;
  int train_limit = 0;
  int test_limit = 0;
  // Schedule fields are collected raw and assembled once epochs/steps are
  // known (poly's max_iter depends on the step count).
  std::string lr_policy = "poly";
  double lr_lambda0 = 0.05;
  double lr_gamma = 0.1;
  double lr_c = 1.0;
  long lr_step = 100;

  NetSpec load_spec() const {
    if (!design.empty()) return builtin_design(design);
    std::ifstream in(spec_path);
    if (!in) throw IoError("cannot open spec '" + spec_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_spec(buf.str());
  }

  int train_count() const { return train_limit > 0 ? train_limit : scale_train_count(scale); }
  int test_count() const { return test_limit > 0 ? test_limit : scale_test_count(scale); }

  DecayPolicy make_policy(long steps_per_epoch) const {
    const DecayKind kind = decay_kind_from(lr_policy);
    switch (kind) {
      case DecayKind::Fixed:
        return DecayPolicy::fixed(lr_c > 0 ? lr_c : lr_lambda0);
      case DecayKind::Exponential:
        return DecayPolicy::exponential(lr_lambda0, lr_gamma);
      case DecayKind::Step:
        return DecayPolicy::staircase(lr_lambda0, lr_gamma, lr_step);
      case DecayKind::Inverse:
        return DecayPolicy::inverse(lr_lambda0, lr_gamma, lr_c);
      case DecayKind::Poly:
        return DecayPolicy::poly(lr_lambda0, lr_c,
                                 std::max<long>(1, steps_per_epoch * config.epochs));
      case DecayKind::Sigmoid:
        return DecayPolicy::sigmoid(lr_lambda0, lr_gamma, lr_step);
    }
    throw ValueError("unreachable policy kind");
  }
};

namespace detail {

inline bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw ParseError("expected a boolean, got '" + v + "'", line);
}

inline double parse_double(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError("expected a number, got '" + v + "'", line);
  }
}

}  // namespace detail

inline RunFile parse_runfile(const std::string& text) {
  RunFile rf;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::string line = detail::trim(raw);
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) throw ParseError("expected 'key: value'", line_no);
    const std::string key = detail::trim(line.substr(0, colon));
    const std::string val = detail::trim(line.substr(colon + 1));
    if (val.empty()) throw ParseError("missing value for '" + key + "'", line_no);

    if (key == "design") rf.design = val;
    else if (key == "spec") rf.spec_path = val;
    else if (key == "scale") rf.scale = scale_from(val);
    else if (key == "dataset") rf.dataset_dir = val;
    else if (key == "synthetic") rf.synthetic = detail::parse_bool(val, line_no);
    else if (key == "output") rf.output_dir = val;
    else if (key == "epochs") rf.config.epochs = detail::parse_int(val, "epochs", line_no);
    else if (key == "batch") rf.config.batch_size = detail::parse_int(val, "batch", line_no);
    else if (key == "seed") rf.config.seed = static_cast<std::uint64_t>(detail::parse_int(val, "seed", line_no));
    else if (key == "lr_policy") rf.lr_policy = val;
    else if (key == "lr_lambda0") rf.lr_lambda0 = detail::parse_double(val, line_no);
    else if (key == "lr_gamma") rf.lr_gamma = detail::parse_double(val, line_no);
    else if (key == "lr_c") rf.lr_c = detail::parse_double(val, line_no);
    else if (key == "lr_step") rf.lr_step = detail::parse_int(val, "lr_step", line_no);
    else if (key == "l1") rf.config.l1_coeff = detail::parse_double(val, line_no);
    else if (key == "l2") rf.config.l2_coeff = detail::parse_double(val, line_no);
    else if (key == "dropout") rf.config.dropout_enabled = detail::parse_bool(val, line_no);
    else if (key == "batchnorm") rf.config.bn_enabled = detail::parse_bool(val, line_no);
    else if (key == "augment") rf.config.augment_enabled = detail::parse_bool(val, line_no);
    else if (key == "balancing") rf.config.balancing = balancing_from(val);
    else if (key == "deterministic") rf.deterministic = detail::parse_bool(val, line_no);
    else if (key == "train_limit") rf.train_limit = detail::parse_int(val, "train_limit", line_no);
    else if (key == "test_limit") rf.test_limit = detail::parse_int(val, "test_limit", line_no);
    else throw ParseError("unknown runfile key '" + key + "'", line_no);
  }
  if (rf.design.empty() && rf.spec_path.empty())
    throw ParseError("runfile needs a 'design:' or 'spec:' entry", line_no);
  if (!rf.design.empty() && !rf.spec_path.empty())
    throw ParseError("'design:' and 'spec:' are mutually exclusive", line_no);
  return rf;
}

inline RunFile load_runfile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open runfile '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_runfile(buf.str());
}

// Canonical snapshot of every resolved setting, written next to run outputs.
inline std::string render_runfile(const RunFile& rf) {
  std::ostringstream out;
  if (!rf.design.empty()) out << "design: " << rf.design << "\n";
  if (!rf.spec_path.empty()) out << "spec: " << rf.spec_path << "\n";
  out << "scale: " << scale_name(rf.scale) << "\n";
  if (!rf.dataset_dir.empty()) out << "dataset: " << rf.dataset_dir << "\n";
  out << "synthetic: " << (rf.synthetic ? "true" : "false") << "\n";
  out << "output: " << rf.output_dir << "\n";
  out << "epochs: " << rf.config.epochs << "\n";
  out << "batch: " << rf.config.batch_size << "\n";
  out << "seed: " << rf.config.seed << "\n";
  out << "lr_policy: " << rf.lr_policy << "\n";
  out << "lr_lambda0: " << rf.lr_lambda0 << "\n";
  out << "lr_gamma: " << rf.lr_gamma << "\n";
  out << "lr_c: " << rf.lr_c << "\n";
  out << "lr_step: " << rf.lr_step << "\n";
  out << "l1: " << rf.config.l1_coeff << "\n";
  out << "l2: " << rf.config.l2_coeff << "\n";
  out << "dropout: " << (rf.config.dropout_enabled ? "on" : "off") << "\n";
  out << "batchnorm: " << (rf.config.bn_enabled ? "on" : "off") << "\n";
  out << "augment: " << (rf.config.augment_enabled ? "on" : "off") << "\n";
  out << "balancing: " << balancing_name(rf.config.balancing) << "\n";
  out << "deterministic: " << (rf.deterministic ? "true" : "false") << "\n";
  out << "train_limit: " << rf.train_limit << "\n";
  out << "test_limit: " << rf.test_limit << "\n";
  return out.str();
}

}  // namespace fsdlab
