#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "neuroscope/error.hpp"
#include "neuroscope/types.hpp"

namespace neuroscope {

/// Activations of one sentence. `values` is laid out layer-major:
/// value(layer, token, neuron) = values[(layer * token_count + token) * layer_width + neuron].
struct SentenceActivations {
  std::size_t sentence_index = 0;
  std::vector<std::string> tokens;
  std::size_t layer_count = 0;
  std::size_t layer_width = 0;
  std::vector<float> values;

  std::size_t token_count() const noexcept { return tokens.size(); }

  float at(std::size_t layer, std::size_t token, std::size_t neuron) const {
    return values[(layer * token_count() + token) * layer_width + neuron];
  }
  float& at(std::size_t layer, std::size_t token, std::size_t neuron) {
    return values[(layer * token_count() + token) * layer_width + neuron];
  }

  /// The layer_width activations of one token in one layer.
  std::span<const float> vector(std::size_t layer, std::size_t token) const {
    return {values.data() + (layer * token_count() + token) * layer_width, layer_width};
  }
  std::span<float> vector(std::size_t layer, std::size_t token) {
    return {values.data() + (layer * token_count() + token) * layer_width, layer_width};
  }

  friend bool operator==(const SentenceActivations&, const SentenceActivations&) = default;
};

struct ActivationSet {
  std::vector<SentenceActivations> sentences;
  std::size_t layer_count = 0;
  std::size_t layer_width = 0;
  Precision precision = Precision::f32;

  std::size_t neuron_count() const noexcept { return layer_count * layer_width; }
  std::size_t token_total() const noexcept;

  friend bool operator==(const ActivationSet&, const ActivationSet&) = default;
};

enum class FileFormat { json, hdf5, automatic };

std::string_view to_string(FileFormat format);
FileFormat parse_format(std::string_view text);

/// Maps .json/.jsonl to json and .hdf5/.h5 to hdf5; anything else is MalformedFile.
FileFormat infer_format(const std::filesystem::path& path);

/// Loads a dump. Throws MalformedFile, InconsistentShape or NonFiniteValue on
/// the first violation found, IoFailure when the file cannot be opened.
ActivationSet read_activations(const std::filesystem::path& path,
                               FileFormat format = FileFormat::automatic);

/// Writes a dump at f16 or f32. f16 refuses values whose magnitude exceeds the
/// half range with PrecisionOverflow instead of saturating.
void write_activations(const ActivationSet& acts, const std::filesystem::path& path,
                       FileFormat format, Precision precision);

void convert(const std::filesystem::path& in_path, const std::filesystem::path& out_path,
             FileFormat out_format, Precision precision);

struct Violation {
  ErrorKind kind;
  std::string locator;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

/// Same checks as read_activations, but collects every violation instead of
/// throwing. Never throws for bad data.
ValidationReport validate(const std::filesystem::path& path,
                          FileFormat format = FileFormat::automatic);

/// Throws the first violation of the in-memory invariants (shape, finiteness).
void check_activation_set(const ActivationSet& acts);

}  // namespace neuroscope
