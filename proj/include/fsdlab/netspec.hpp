#pragma once

// Declarative network descriptions: a small line-oriented text format, the
// parser/renderer pair, and the built-in design catalogue.
//
// Grammar (one block per line, '#' starts a comment):
//
//   design: <name>
//   input: <h> x <w> x <c>
//   <block>: [<repeat> x ]conv<k>x<k>, <stride>, <channels> [<- <input>]
//   <block>: conv<k>x<k>, <channels>            (repeat 1, stride 1)
//   <block>: max_pool [<- <input>]
//   <block>: dropout [<rate>] [<- <input>]
//   <block>: <a> + <b>                          (elementwise residual sum)
//
// A block's input defaults to the previous block (the network input for the
// first block); "<- name" overrides it.  Wiring must form a DAG with exactly
// one sink, which is the network output.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fsdlab/common.hpp"

namespace fsdlab {

enum class BlockKind { ConvComposition, MaxPool, Dropout, ResidualAdd };

inline const char* block_kind_name(BlockKind k) {
  switch (k) {
    case BlockKind::ConvComposition: return "conv_composition";
    case BlockKind::MaxPool: return "max_pool";
    case BlockKind::Dropout: return "dropout";
    case BlockKind::ResidualAdd: return "residual_add";
  }
  return "?";
}

struct Block {
  std::string name;
  BlockKind kind = BlockKind::ConvComposition;
  int repeat = 1;        // number of convolutions in a composition
  int kernel = 3;        // square kernel extent
  int stride = 1;        // applied by the first convolution of the composition
  int out_channels = 0;
  bool with_bn_relu = true;  // each conv is followed by batch norm + ReLU
  double rate = 0.5;         // dropout keep-probability complement
  std::vector<std::string> inputs;  // predecessor block names ("" = network input)

  bool is_conv() const { return kind == BlockKind::ConvComposition; }
  bool reduces() const {
    return kind == BlockKind::MaxPool || (is_conv() && stride > 1);
  }
};

struct InputShape {
  int h = 28, w = 28, c = 3;
};

struct NetSpec {
  std::string name;
  InputShape input;
  std::vector<Block> blocks;  // file order; wiring given by Block::inputs

  const Block* find(const std::string& block_name) const {
    for (const auto& b : blocks)
      if (b.name == block_name) return &b;
    return nullptr;
  }

  // Channel count entering `b` (output channels of its first input).
  int in_channels(const Block& b) const {
    if (b.inputs.empty() || b.inputs[0].empty()) return input.c;
    const Block* src = find(b.inputs[0]);
    if (!src) throw ValueError("unknown input block '" + b.inputs[0] + "'");
    return out_channels_of(*src);
  }

  int out_channels_of(const Block& b) const {
    if (b.is_conv()) return b.out_channels;
    if (b.inputs.empty() || b.inputs[0].empty()) return input.c;
    const Block* src = find(b.inputs[0]);
    if (!src) throw ValueError("unknown input block '" + b.inputs[0] + "'");
    return out_channels_of(*src);
  }

  // The single block that no other block consumes.
  const Block& output_block() const {
    std::set<std::string> consumed;
    for (const auto& b : blocks)
      for (const auto& in : b.inputs)
        if (!in.empty()) consumed.insert(in);
    const Block* sink = nullptr;
    for (const auto& b : blocks) {
      if (consumed.count(b.name)) continue;
      if (sink) throw ValueError("network has multiple output blocks: '" + sink->name + "' and '" + b.name + "'");
      sink = &b;
    }
    if (!sink) throw ValueError("network has no output block");
    return *sink;
  }

  void validate() const;
};

namespace detail {

inline std::string trim(std::string s) {
  auto notspace = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

inline int parse_int(const std::string& tok, const char* what, int line) {
  try {
    std::size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("expected an integer for ") + what + ", got '" + tok + "'", line);
  }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

}  // namespace detail

inline void NetSpec::validate() const {
  if (name.empty()) throw ValueError("network has no name");
  if (blocks.empty()) throw ValueError("network has an empty block list");
  if (input.h < 1 || input.w < 1 || input.c < 1)
    throw ValueError("input shape extents must be positive");

  std::map<std::string, const Block*> by_name;
  for (const auto& b : blocks) {
    if (b.name.empty()) throw ValueError("unnamed block");
    if (!by_name.emplace(b.name, &b).second)
      throw ValueError("duplicate block name '" + b.name + "'");
  }
  for (const auto& b : blocks) {
    if (b.kind == BlockKind::ResidualAdd) {
      if (b.inputs.size() != 2)
        throw ValueError("residual block '" + b.name + "' needs exactly two inputs");
    } else if (b.inputs.size() != 1) {
      throw ValueError("block '" + b.name + "' needs exactly one input");
    }
    if (b.is_conv()) {
      if (b.repeat < 1) throw ValueError("block '" + b.name + "': repeat must be >= 1");
      if (b.kernel < 1) throw ValueError("block '" + b.name + "': kernel must be >= 1");
      if (b.stride != 1 && b.stride != 2)
        throw ValueError("block '" + b.name + "': stride must be 1 or 2");
      if (b.out_channels < 1) throw ValueError("block '" + b.name + "': channels must be >= 1");
    }
    if (b.kind == BlockKind::Dropout && (b.rate < 0.0 || b.rate >= 1.0))
      throw ValueError("block '" + b.name + "': dropout rate must be in [0, 1)");
    for (const auto& in : b.inputs)
      if (!in.empty() && !by_name.count(in))
        throw ValueError("block '" + b.name + "' references unknown block '" + in + "'");
  }

  // Cycle check: every block must be reachable in an order where all its
  // inputs come earlier.
  std::set<std::string> placed;
  std::size_t placed_count = 0;
  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& b : blocks) {
      if (placed.count(b.name)) continue;
      bool ready = true;
      for (const auto& in : b.inputs)
        if (!in.empty() && !placed.count(in)) ready = false;
      if (ready) {
        placed.insert(b.name);
        ++placed_count;
        progress = true;
      }
    }
  }
  if (placed_count != blocks.size()) {
    for (const auto& b : blocks)
      if (!placed.count(b.name))
        throw ValueError("wiring contains a cycle through block '" + b.name + "'");
  }

  output_block();  // throws unless there is exactly one sink
}

// Blocks sorted so that every block appears after all of its inputs.
inline std::vector<const Block*> topo_order(const NetSpec& spec) {
  std::vector<const Block*> order;
  std::set<std::string> placed;
  while (order.size() < spec.blocks.size()) {
    bool progress = false;
    for (const auto& b : spec.blocks) {
      if (placed.count(b.name)) continue;
      bool ready = true;
      for (const auto& in : b.inputs)
        if (!in.empty() && !placed.count(in)) ready = false;
      if (ready) {
        order.push_back(&b);
        placed.insert(b.name);
        progress = true;
      }
    }
    if (!progress) throw ValueError("wiring contains a cycle");
  }
  return order;
}

// ---------------------------------------------------------------------------
// Parsing

inline NetSpec parse_spec(const std::string& text) {
  NetSpec spec;
  bool have_input = false;
  std::string prev_block;  // default wiring target; "" = network input

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
    if (colon == std::string::npos)
      throw ParseError("expected '<name>: <definition>'", line_no);
    std::string key = detail::trim(line.substr(0, colon));
    std::string body = detail::trim(line.substr(colon + 1));
    if (key.empty()) throw ParseError("missing name before ':'", line_no);
    if (body.empty()) throw ParseError("missing definition after ':'", line_no);

    if (key == "design") {
      spec.name = body;
      continue;
    }
    if (key == "input") {
      auto dims = detail::split(body, 'x');
      if (dims.size() != 3)
        throw ParseError("input shape must be '<h> x <w> x <c>'", line_no);
      spec.input.h = detail::parse_int(dims[0], "input height", line_no);
      spec.input.w = detail::parse_int(dims[1], "input width", line_no);
      spec.input.c = detail::parse_int(dims[2], "input channels", line_no);
      have_input = true;
      continue;
    }

    if (spec.name.empty())
      throw ParseError("missing 'design: <name>' before the first block", line_no);
    if (!have_input)
      throw ParseError("missing 'input: <h> x <w> x <c>' before the first block", line_no);

    Block b;
    b.name = key;

    // Optional explicit wiring suffix.
    std::optional<std::string> wired;
    auto arrow = body.find("<-");
    if (arrow != std::string::npos) {
      wired = detail::trim(body.substr(arrow + 2));
      if (wired->empty()) throw ParseError("missing block name after '<-'", line_no);
      body = detail::trim(body.substr(0, arrow));
    }

    if (body == "max_pool") {
      b.kind = BlockKind::MaxPool;
    } else if (body == "dropout" || body.rfind("dropout ", 0) == 0) {
      b.kind = BlockKind::Dropout;
      std::string arg = detail::trim(body.substr(std::string("dropout").size()));
      if (!arg.empty()) {
        try {
          std::size_t used = 0;
          b.rate = std::stod(arg, &used);
          if (used != arg.size()) throw std::invalid_argument(arg);
        } catch (const std::exception&) {
          throw ParseError("expected a dropout rate, got '" + arg + "'", line_no);
        }
      }
    } else if (body.find("conv") != std::string::npos) {
      b.kind = BlockKind::ConvComposition;
      auto conv_at = body.find("conv");
      std::string head = detail::trim(body.substr(0, conv_at));
      if (!head.empty()) {
        // "<repeat> x conv..."
        if (head.size() < 2 || head.back() != 'x')
          throw ParseError("expected '<repeat> x conv...', got '" + body + "'", line_no);
        b.repeat = detail::parse_int(detail::trim(head.substr(0, head.size() - 1)),
                                     "composition repeat", line_no);
        if (b.repeat < 1) throw ParseError("composition repeat must be >= 1", line_no);
      }
      std::string rest = detail::trim(body.substr(conv_at + 4));  // "KxK, s, c"
      auto comma = rest.find(',');
      std::string kdesc = detail::trim(comma == std::string::npos ? rest : rest.substr(0, comma));
      auto kx = kdesc.find('x');
      if (kx == std::string::npos)
        throw ParseError("expected a kernel like '3x3' after 'conv'", line_no);
      int k1 = detail::parse_int(detail::trim(kdesc.substr(0, kx)), "kernel height", line_no);
      int k2 = detail::parse_int(detail::trim(kdesc.substr(kx + 1)), "kernel width", line_no);
      if (k1 != k2) throw ParseError("only square kernels are supported", line_no);
      b.kernel = k1;
      if (comma == std::string::npos)
        throw ParseError("expected ', <stride>, <channels>' or ', <channels>' after the kernel", line_no);
      auto args = detail::split(rest.substr(comma + 1), ',');
      if (args.size() == 1) {
        b.stride = 1;
        b.out_channels = detail::parse_int(args[0], "channels", line_no);
      } else if (args.size() == 2) {
        b.stride = detail::parse_int(args[0], "stride", line_no);
        b.out_channels = detail::parse_int(args[1], "channels", line_no);
      } else {
        throw ParseError("expected 'conv<k>x<k>, <stride>, <channels>'", line_no);
      }
    } else if (body.find('+') != std::string::npos) {
      b.kind = BlockKind::ResidualAdd;
      auto parts = detail::split(body, '+');
      if (parts.size() != 2 || parts[0].empty() || parts[1].empty())
        throw ParseError("residual blocks are written '<a> + <b>'", line_no);
      b.inputs = {parts[0], parts[1]};
    } else {
      throw ParseError("unknown block kind '" + body + "'", line_no);
    }

    if (b.kind != BlockKind::ResidualAdd) {
      b.inputs = {wired ? *wired : prev_block};
    } else if (wired) {
      throw ParseError("residual blocks name their inputs with '+', not '<-'", line_no);
    }
    spec.blocks.push_back(std::move(b));
    prev_block = key;
  }

  if (spec.name.empty()) throw ParseError("missing 'design: <name>' line", line_no);
  if (spec.blocks.empty()) throw ParseError("network has an empty block list", line_no);

  try {
    spec.validate();
  } catch (const ValueError& e) {
    throw ParseError(e.what(), line_no);
  }

  // The output block emits raw logits: no batch norm / ReLU after its convs.
  const std::string sink = spec.output_block().name;
  for (auto& b : spec.blocks)
    if (b.name == sink && b.is_conv()) b.with_bn_relu = false;
  return spec;
}

// Canonical rendering; parse(render(spec)) describes the same network.
inline std::string render(const NetSpec& spec) {
  std::ostringstream out;
  out << "design: " << spec.name << "\n";
  out << "input: " << spec.input.h << " x " << spec.input.w << " x " << spec.input.c << "\n";
  std::string prev;
  for (const auto& b : spec.blocks) {
    out << b.name << ": ";
    switch (b.kind) {
      case BlockKind::ConvComposition:
        out << b.repeat << " x conv" << b.kernel << "x" << b.kernel << ", " << b.stride << ", "
            << b.out_channels;
        if (b.inputs[0] != prev) out << " <- " << (b.inputs[0].empty() ? "input" : b.inputs[0]);
        break;
      case BlockKind::MaxPool:
        out << "max_pool";
        if (b.inputs[0] != prev) out << " <- " << b.inputs[0];
        break;
      case BlockKind::Dropout:
        out << "dropout " << b.rate;
        if (b.inputs[0] != prev) out << " <- " << b.inputs[0];
        break;
      case BlockKind::ResidualAdd:
        out << b.inputs[0] << " + " << b.inputs[1];
        break;
    }
    out << "\n";
    prev = b.name;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Built-in designs

namespace detail {

struct SpecBuilder {
  NetSpec spec;
  std::string prev;

  explicit SpecBuilder(std::string name) { spec.name = std::move(name); }

  SpecBuilder& conv(const std::string& name, int repeat, int kernel, int stride, int channels,
                    std::string from = "") {
    Block b;
    b.name = name;
    b.kind = BlockKind::ConvComposition;
    b.repeat = repeat;
    b.kernel = kernel;
    b.stride = stride;
    b.out_channels = channels;
    b.inputs = {from.empty() ? prev : from};
    spec.blocks.push_back(std::move(b));
    prev = name;
    return *this;
  }
  SpecBuilder& pool(const std::string& name) {
    Block b;
    b.name = name;
    b.kind = BlockKind::MaxPool;
    b.inputs = {prev};
    spec.blocks.push_back(std::move(b));
    prev = name;
    return *this;
  }
  SpecBuilder& drop(const std::string& name) {
    Block b;
    b.name = name;
    b.kind = BlockKind::Dropout;
    b.inputs = {prev};
    spec.blocks.push_back(std::move(b));
    prev = name;
    return *this;
  }
  SpecBuilder& add(const std::string& name, const std::string& a, const std::string& b2) {
    Block b;
    b.name = name;
    b.kind = BlockKind::ResidualAdd;
    b.inputs = {a, b2};
    spec.blocks.push_back(std::move(b));
    prev = name;
    return *this;
  }
  SpecBuilder& head() {
    conv("block7", 1, 1, 1, 4096);
    drop("block7_1");
    conv("block8", 1, 1, 1, 4096);
    drop("block8_1");
    conv("block9", 1, 1, 1, 10);
    spec.blocks.back().with_bn_relu = false;  // raw logits
    return *this;
  }
  NetSpec finish() {
    spec.validate();
    return std::move(spec);
  }
};

}  // namespace detail

inline std::vector<std::string> builtin_design_names() {
  return {"design1", "design1_conv", "design1_conv_stride", "design2", "design3", "design4"};
}

inline NetSpec builtin_design(const std::string& name) {
  using detail::SpecBuilder;
  if (name == "design1") {
    SpecBuilder b("design1");
    b.conv("block1", 1, 3, 1, 64)
        .pool("block2")
        .conv("block3", 2, 3, 1, 128)
        .pool("block4")
        .conv("block5", 4, 3, 1, 256)
        .pool("block6")
        .head();
    return b.finish();
  }
  if (name == "design1_conv") {
    SpecBuilder b("design1_conv");
    b.conv("block1", 1, 3, 1, 64)
        .conv("block2", 1, 3, 2, 64)
        .conv("block3", 2, 3, 1, 128)
        .conv("block4", 1, 3, 2, 128)
        .conv("block5", 4, 3, 1, 256)
        .conv("block6", 1, 3, 2, 256)
        .head();
    return b.finish();
  }
  if (name == "design1_conv_stride") {
    // design1_conv with the stride moved onto the first layer.
    SpecBuilder b("design1_conv_stride");
    b.conv("block1", 1, 3, 2, 64)
        .conv("block2", 1, 3, 1, 64)
        .conv("block3", 2, 3, 1, 128)
        .conv("block4", 1, 3, 2, 128)
        .conv("block5", 4, 3, 1, 256)
        .conv("block6", 1, 3, 2, 256)
        .head();
    return b.finish();
  }
  if (name == "design2") {
    SpecBuilder b("design2");
    b.conv("block1", 1, 3, 1, 64)
        .pool("block2")
        .conv("block3", 1, 3, 1, 128)
        .pool("block3_1")
        .conv("block3_2", 1, 3, 1, 128)
        .pool("block4")
        .conv("block5", 4, 3, 1, 256)
        .pool("block6")
        .head();
    return b.finish();
  }
  if (name == "design3") {
    SpecBuilder b("design3");
    b.conv("block1", 1, 3, 1, 64)
        .pool("block2")
        .conv("block3", 1, 3, 1, 128)
        .pool("block4")
        .conv("block5", 4, 3, 1, 256)
        .pool("block6")
        .head();
    return b.finish();
  }
  if (name == "design4") {
    SpecBuilder b("design4");
    b.conv("block1", 2, 3, 1, 64)
        .conv("block2", 1, 3, 2, 64)
        .conv("block2_1", 1, 1, 2, 128, "block1")  // projection branch
        .conv("block3", 3, 3, 1, 128, "block2")
        .add("block3_1", "block2_1", "block3")
        .conv("block3_2", 3, 3, 1, 128)
        .conv("block4", 1, 3, 2, 128)
        .conv("block5", 4, 3, 1, 256)
        .conv("block6", 1, 3, 2, 256)
        .head();
    return b.finish();
  }
  std::string known;
  for (const auto& n : builtin_design_names()) known += (known.empty() ? "" : ", ") + n;
  throw ValueError("unknown design '" + name + "' (valid: " + known + ")");
}

}  // namespace fsdlab
