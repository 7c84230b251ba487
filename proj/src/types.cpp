#include "neuroscope/types.hpp"

#include "neuroscope/error.hpp"

namespace neuroscope {

NeuronId NeuronId::from_layer_index(int layer, int index, int layer_width) {
  if (layer_width <= 0 || layer < 0 || index < 0 || index >= layer_width) {
    throw Error(ErrorKind::OutOfRangeNeuron,
                "neuron (" + std::to_string(layer) + ", " + std::to_string(index) +
                    ") invalid for layer width " + std::to_string(layer_width));
  }
  return NeuronId{layer, index, layer * layer_width + index};
}

NeuronId NeuronId::from_flat(int flat, int layer_width) {
  if (layer_width <= 0 || flat < 0) {
    throw Error(ErrorKind::OutOfRangeNeuron, "flat neuron id " + std::to_string(flat) + " invalid");
  }
  return NeuronId{flat / layer_width, flat % layer_width, flat};
}

std::string_view to_string(Precision precision) {
  switch (precision) {
    case Precision::f16: return "f16";
    case Precision::f32: return "f32";
    case Precision::f64: return "f64";
  }
  return "f32";
}

Precision parse_precision(std::string_view text) {
  if (text == "f16" || text == "float16") return Precision::f16;
  if (text == "f32" || text == "float32") return Precision::f32;
  if (text == "f64" || text == "float64") return Precision::f64;
  throw Error(ErrorKind::InvalidArgument, "unknown precision '" + std::string(text) + "'");
}

std::size_t byte_width(Precision precision) {
  switch (precision) {
    case Precision::f16: return 2;
    case Precision::f32: return 4;
    case Precision::f64: return 8;
  }
  return 4;
}

}  // namespace neuroscope
