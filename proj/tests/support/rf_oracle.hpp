#pragma once

// Brute-force receptive-field oracle: simulates, as explicit index sets, which
// input positions feed one output unit of a 1-D layer chain.  Output index o
// of a layer with kernel k and stride s reads input indices [o*s, o*s + k);
// padding shifts the window but never changes the extent, so the set extent
// equals the receptive field and the set offset between adjacent outputs
// equals the jump.

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

namespace rforacle {

struct LayerDesc {
  int kernel;
  int stride;
};

inline std::set<std::int64_t> input_support(const std::vector<LayerDesc>& chain,
                                            std::int64_t output_index) {
  std::set<std::int64_t> support = {output_index};
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    std::set<std::int64_t> prev;
    for (std::int64_t o : support)
      for (int d = 0; d < it->kernel; ++d) prev.insert(o * it->stride + d);
    support = std::move(prev);
  }
  return support;
}

struct FieldMeasure {
  std::int64_t r;  // extent of the support of one output unit
  std::int64_t j;  // input-index shift between adjacent output units
};

inline FieldMeasure measure(const std::vector<LayerDesc>& chain) {
  auto s0 = input_support(chain, 0);
  auto s1 = input_support(chain, 1);
  FieldMeasure out;
  out.r = *s0.rbegin() - *s0.begin() + 1;
  out.j = *s1.begin() - *s0.begin();
  return out;
}

}  // namespace rforacle
