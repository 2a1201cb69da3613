#pragma once

// Static analysis over a NetSpec: parameter counting, shape tracing,
// effective receptive fields, downsampling lints, and two closed-form
// capacity expressions.  Everything here is pure and needs no built model.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsdlab/common.hpp"
#include "fsdlab/netspec.hpp"

namespace fsdlab {

struct BlockShape {
  int h = 0, w = 0, c = 0;
};

struct ReceptiveField {
  std::int64_t r = 1;  // input extent influencing one output unit (1-D)
  std::int64_t j = 1;  // stride accumulated between adjacent output units
};

struct Lint {
  std::string rule;   // RULE-MIN-CONV | RULE-MAX-COMP | RULE-POOL-INFO
  std::string block;
  std::string message;
  bool error = false;  // informational lints keep this false
};

struct BlockAnalysis {
  std::string name;
  std::string kind;
  std::int64_t params = 0;
  int stride = 1;             // stride of the block's first convolution
  bool reduces = false;       // shrinks the spatial grid (pool or strided conv)
  BlockShape out_shape;
  ReceptiveField rf;          // raw recurrence value
  std::int64_t rf_clipped = 0;  // min(r, input extent)
};

struct AnalysisBounds {
  double vc_value = 0.0;
  double fat_value = 0.0;
};

struct AnalysisReport {
  std::string design;
  std::vector<BlockAnalysis> per_block;
  std::int64_t total_params = 0;
  std::vector<Lint> lints;
  double reduction_rate = 0.0;  // downsamplings per stride-1 convolution
  std::optional<AnalysisBounds> bounds;

  std::int64_t total_params_k() const {
    return static_cast<std::int64_t>(std::llround(static_cast<double>(total_params) / 1000.0));
  }
  bool has_error_lints() const {
    for (const auto& l : lints)
      if (l.error) return true;
    return false;
  }
};

// ---------------------------------------------------------------------------
// Parameter counting
//
// Convention: a convolution holds kh*kw*in*out weights and no bias; when the
// block carries batch norm, each conv adds 2*out affine parameters (gamma,
// beta — running statistics are not trainable and are not counted).

inline std::int64_t count_block_params(const NetSpec& spec, const Block& b) {
  if (!b.is_conv()) return 0;
  std::int64_t in_ch = spec.in_channels(b);
  std::int64_t total = 0;
  for (int i = 0; i < b.repeat; ++i) {
    total += static_cast<std::int64_t>(b.kernel) * b.kernel * in_ch * b.out_channels;
    if (b.with_bn_relu) total += 2 * b.out_channels;
    in_ch = b.out_channels;
  }
  return total;
}

struct ParamCount {
  std::vector<std::pair<std::string, std::int64_t>> per_block;
  std::int64_t total = 0;
};

inline ParamCount count_params(const NetSpec& spec) {
  if (!spec.blocks.empty()) spec.validate();  // an empty spec is the identity network
  ParamCount out;
  for (const Block* b : topo_order(spec)) {
    const std::int64_t p = count_block_params(spec, *b);
    out.per_block.emplace_back(b->name, p);
    out.total += p;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape tracing (same-padded convs, 2x2/2 pools with floor semantics)

inline std::map<std::string, BlockShape> trace_shapes(const NetSpec& spec) {
  if (!spec.blocks.empty()) spec.validate();
  std::map<std::string, BlockShape> shapes;
  shapes[""] = {spec.input.h, spec.input.w, spec.input.c};
  // Same padding: output extent is ceil(in / stride) regardless of kernel.
  auto extent_after_conv = [](int in, int s) { return (in + s - 1) / s; };
  for (const Block* bp : topo_order(spec)) {
    const Block& b = *bp;
    BlockShape s = shapes.at(b.inputs[0]);
    switch (b.kind) {
      case BlockKind::ConvComposition:
        s.h = extent_after_conv(s.h, b.stride);
        s.w = extent_after_conv(s.w, b.stride);
        s.c = b.out_channels;
        break;
      case BlockKind::MaxPool:
        if (s.h < 2 || s.w < 2)
          throw AnalysisError("block '" + b.name + "': cannot pool a " + std::to_string(s.h) +
                              "x" + std::to_string(s.w) + " activation");
        s.h = (s.h - 2) / 2 + 1;
        s.w = (s.w - 2) / 2 + 1;
        break;
      case BlockKind::Dropout:
        break;
      case BlockKind::ResidualAdd: {
        const BlockShape o = shapes.at(b.inputs[1]);
        if (s.h != o.h || s.w != o.w || s.c != o.c)
          throw AnalysisError("residual '" + b.name + "' joins mismatched shapes from '" +
                              b.inputs[0] + "' and '" + b.inputs[1] + "'");
        break;
      }
    }
    shapes[b.name] = s;
  }
  return shapes;
}

// ---------------------------------------------------------------------------
// Receptive fields
//
// One elementary layer with kernel k and stride s transforms the field as
//   j_out = j_in * s,   r_out = r_in + (k - 1) * j_in,
// starting from r = j = 1 at the input.  Compositions apply their stride on
// the first conv; pools behave like k = 2, s = 2; residual joins take the
// wider branch.

inline ReceptiveField rf_after_layer(ReceptiveField in, int k, int s) {
  ReceptiveField out;
  out.r = in.r + static_cast<std::int64_t>(k - 1) * in.j;
  out.j = in.j * s;
  return out;
}

inline std::map<std::string, ReceptiveField> receptive_field(const NetSpec& spec) {
  if (!spec.blocks.empty()) spec.validate();
  std::map<std::string, ReceptiveField> fields;
  fields[""] = {1, 1};
  for (const Block* bp : topo_order(spec)) {
    const Block& b = *bp;
    ReceptiveField f = fields.at(b.inputs[0]);
    switch (b.kind) {
      case BlockKind::ConvComposition:
        for (int i = 0; i < b.repeat; ++i)
          f = rf_after_layer(f, b.kernel, i == 0 ? b.stride : 1);
        break;
      case BlockKind::MaxPool:
        f = rf_after_layer(f, 2, 2);
        break;
      case BlockKind::Dropout:
        break;
      case BlockKind::ResidualAdd: {
        const ReceptiveField o = fields.at(b.inputs[1]);
        f.r = std::max(f.r, o.r);
        f.j = std::max(f.j, o.j);
        break;
      }
    }
    fields[b.name] = f;
  }
  return fields;
}

// ---------------------------------------------------------------------------
// Downsampling lints
//
// RULE-MIN-CONV  (error): a spatial reduction (pool or strided conv) happens
//                with no stride-1 convolution since the previous reduction on
//                its input path — at least one is needed to distill the
//                feature map before information is discarded.
// RULE-MAX-COMP  (error): a composition stacks more than four convolutions
//                without a residual join feeding it; gradients degrade past
//                that depth unless a shortcut is present.
// RULE-POOL-INFO (info):  a max pool discards activations by rank only; a
//                strided convolution in its place is learnable.

inline std::vector<Lint> audit_reduction(const NetSpec& spec) {
  if (!spec.blocks.empty()) spec.validate();
  std::vector<Lint> lints;
  // Stride-1 convs seen since the latest reduction, per block output.
  std::map<std::string, int> convs_since;
  convs_since[""] = 0;
  for (const Block* bp : topo_order(spec)) {
    const Block& b = *bp;
    int upstream = 0;
    if (b.kind == BlockKind::ResidualAdd)
      upstream = std::max(convs_since.at(b.inputs[0]), convs_since.at(b.inputs[1]));
    else
      upstream = convs_since.at(b.inputs[0]);

    switch (b.kind) {
      case BlockKind::ConvComposition:
        if (b.stride > 1) {
          if (upstream == 0)
            lints.push_back({"RULE-MIN-CONV", b.name,
                             "strided conv '" + b.name +
                                 "' reduces the feature map with no stride-1 conv since the "
                                 "previous reduction",
                             true});
          convs_since[b.name] = b.repeat - 1;  // convs after the strided one
        } else {
          convs_since[b.name] = upstream + b.repeat;
        }
        if (b.repeat > 4) {
          const Block* src = spec.find(b.inputs[0]);
          const bool shielded = src && src->kind == BlockKind::ResidualAdd;
          if (!shielded)
            lints.push_back({"RULE-MAX-COMP", b.name,
                             "composition '" + b.name + "' stacks " + std::to_string(b.repeat) +
                                 " convs (> 4) without a residual connection",
                             true});
        }
        break;
      case BlockKind::MaxPool:
        if (upstream == 0)
          lints.push_back({"RULE-MIN-CONV", b.name,
                           "pool '" + b.name +
                               "' reduces the feature map with no stride-1 conv since the "
                               "previous reduction",
                           true});
        lints.push_back({"RULE-POOL-INFO", b.name,
                         "max pool '" + b.name +
                             "' discards by rank; a strided conv here would be learnable",
                         false});
        convs_since[b.name] = 0;
        break;
      case BlockKind::Dropout:
      case BlockKind::ResidualAdd:
        convs_since[b.name] = upstream;
        break;
    }
  }
  return lints;
}

inline double reduction_rate(const NetSpec& spec) {
  int reductions = 0, s1_convs = 0;
  for (const auto& b : spec.blocks) {
    if (b.kind == BlockKind::MaxPool) ++reductions;
    if (b.is_conv()) {
      if (b.stride > 1) {
        ++reductions;
        s1_convs += b.repeat - 1;
      } else {
        s1_convs += b.repeat;
      }
    }
  }
  return s1_convs == 0 ? 0.0 : static_cast<double>(reductions) / s1_convs;
}

// ---------------------------------------------------------------------------
// Capacity expressions (values of the asymptotic expressions with their
// constants set to 1; reported for relative comparison, not as bounds)

// w*l*ln(w) + w*l^2 for a ReLU network with w weights and l layers.
inline double vc_bound(double w, double l) {
  if (w < 0 || l < 0) throw ValueError("vc_bound: w and l must be non-negative");
  if (w == 0) return 0.0;
  return w * l * std::log(w) + w * l * l;
}

struct FatParams {
  double B = 1.0;      // sup-norm bound on inputs
  double A = 1.0;      // per-layer L1 weight bound
  double c = 1.0;      // constant
  double l = 1.0;      // layer count
  double lambda = 1.0; // shattering margin
};

// B^2 * (c*A)^(l*(l+1)) / lambda^(2*(l-1))
inline double fat_shattering_bound(const FatParams& p) {
  if (p.lambda <= 0) throw ValueError("fat_shattering_bound: lambda must be > 0");
  if (p.B <= 0 || p.A <= 0 || p.c <= 0 || p.l <= 0)
    throw ValueError("fat_shattering_bound: parameters must be positive");
  return p.B * p.B * std::pow(p.c * p.A, p.l * (p.l + 1)) / std::pow(p.lambda, 2.0 * (p.l - 1));
}

// ---------------------------------------------------------------------------
// Full report

inline int conv_layer_count(const NetSpec& spec) {
  int n = 0;
  for (const auto& b : spec.blocks)
    if (b.is_conv()) n += b.repeat;
  return n;
}

inline AnalysisReport analyze(const NetSpec& spec, bool with_bounds = false) {
  AnalysisReport report;
  report.design = spec.name;
  auto params = count_params(spec);
  auto shapes = trace_shapes(spec);
  auto fields = receptive_field(spec);
  const std::int64_t input_extent = std::max(spec.input.h, spec.input.w);

  std::size_t i = 0;
  for (const Block* b : topo_order(spec)) {
    BlockAnalysis ba;
    ba.name = b->name;
    ba.kind = block_kind_name(b->kind);
    ba.params = params.per_block[i++].second;
    ba.stride = b->stride;
    ba.reduces = b->reduces();
    ba.out_shape = shapes.at(b->name);
    ba.rf = fields.at(b->name);
    ba.rf_clipped = std::min(ba.rf.r, input_extent);
    report.per_block.push_back(std::move(ba));
  }
  report.total_params = params.total;
  report.lints = audit_reduction(spec);
  report.reduction_rate = reduction_rate(spec);
  if (with_bounds) {
    AnalysisBounds bounds;
    bounds.vc_value =
        vc_bound(static_cast<double>(params.total), static_cast<double>(conv_layer_count(spec)));
    FatParams fp;
    fp.l = static_cast<double>(conv_layer_count(spec));
    bounds.fat_value = fat_shattering_bound(fp);
    report.bounds = bounds;
  }
  return report;
}

inline nlohmann::json analysis_to_json(const AnalysisReport& r) {
  nlohmann::json j;
  j["design"] = r.design;
  j["total_params"] = r.total_params;
  j["total_params_k"] = r.total_params_k();
  j["reduction_rate"] = r.reduction_rate;
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : r.per_block) {
    j["blocks"].push_back({{"name", b.name},
                           {"kind", b.kind},
                           {"params", b.params},
                           {"stride", b.stride},
                           {"reduces", b.reduces},
                           {"out_shape", {b.out_shape.h, b.out_shape.w, b.out_shape.c}},
                           {"receptive_field", b.rf.r},
                           {"receptive_field_clipped", b.rf_clipped},
                           {"jump", b.rf.j}});
  }
  j["lints"] = nlohmann::json::array();
  for (const auto& l : r.lints)
    j["lints"].push_back(
        {{"rule", l.rule}, {"block", l.block}, {"message", l.message}, {"error", l.error}});
  if (r.bounds) {
    j["bounds"] = {{"vc_value", r.bounds->vc_value}, {"fat_value", r.bounds->fat_value}};
  }
  return j;
}

inline std::string analysis_to_text(const AnalysisReport& r) {
  std::ostringstream out;
  out << "design: " << r.design << "\n";
  out << std::left << std::setw(12) << "block" << std::setw(18) << "kind" << std::right
      << std::setw(12) << "params" << std::setw(14) << "out shape" << std::setw(8) << "rf"
      << std::setw(6) << "jump" << "\n";
  for (const auto& b : r.per_block) {
    std::string shape = std::to_string(b.out_shape.h) + "x" + std::to_string(b.out_shape.w) + "x" +
                        std::to_string(b.out_shape.c);
    out << std::left << std::setw(12) << b.name << std::setw(18) << b.kind << std::right
        << std::setw(12) << b.params << std::setw(14) << shape << std::setw(8) << b.rf_clipped
        << std::setw(6) << b.rf.j << "\n";
  }
  out << "total params: " << r.total_params << " (" << r.total_params_k() << "K)\n";
  out << "reduction rate: " << std::fixed << std::setprecision(3) << r.reduction_rate << "\n";
  if (r.bounds) {
    out << "capacity expression (vc): " << std::scientific << std::setprecision(4)
        << r.bounds->vc_value << "\n";
    out << "capacity expression (fat): " << r.bounds->fat_value << "\n";
  }
  for (const auto& l : r.lints)
    out << (l.error ? "[lint] " : "[note] ") << l.rule << " @ " << l.block << ": " << l.message
        << "\n";
  return out.str();
}

}  // namespace fsdlab
