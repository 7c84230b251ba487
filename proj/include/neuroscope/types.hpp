#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>

namespace neuroscope {

/// Identifies one neuron as (layer, index within layer). `flat` orders neurons
/// across layers as layer * layer_width + index.
struct NeuronId {
  int layer = 0;
  int index = 0;
  int flat = 0;

  static NeuronId from_layer_index(int layer, int index, int layer_width);
  static NeuronId from_flat(int flat, int layer_width);

  friend bool operator==(const NeuronId& a, const NeuronId& b) { return a.flat == b.flat; }
  friend auto operator<=>(const NeuronId& a, const NeuronId& b) { return a.flat <=> b.flat; }
};

enum class Precision { f16, f32, f64 };

std::string_view to_string(Precision precision);
Precision parse_precision(std::string_view text);

/// Bytes per stored value.
std::size_t byte_width(Precision precision);

}  // namespace neuroscope
