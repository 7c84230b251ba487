#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "neuroscope/activation_store.hpp"
#include "neuroscope/annotate.hpp"
#include "neuroscope/types.hpp"

namespace neuroscope {

enum class Split : std::uint8_t { train, dev, test };

std::string_view to_string(Split split);

struct SplitRatios {
  double train = 0.7;
  double dev = 0.1;
  double test = 0.2;
};

/// Smallest standard deviation used when standardizing; constant neurons
/// therefore standardize to all-zero columns.
inline constexpr double kSigmaFloor = 1e-8;

/// Per-neuron statistics of the raw train-split activations.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // floored at kSigmaFloor

  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& standardized) const;
};

/// Where a sample came from in the word-level corpus.
struct SampleOrigin {
  std::uint32_t sentence = 0;
  std::uint32_t word = 0;
};

/// Flattened (sample x neuron) probing data. Immutable once built; methods
/// take it by const reference and may run concurrently on one instance.
struct ProbeDataset {
  Eigen::MatrixXd X;  // standardized with `standardizer`
  std::vector<int> y;
  std::vector<Split> split;
  std::vector<NeuronId> neuron_ids;
  Standardizer standardizer;
  LabelVocab vocab;
  std::vector<SampleOrigin> origin;
  std::size_t layer_width = 0;

  std::size_t n_samples() const noexcept { return y.size(); }
  std::size_t n_neurons() const noexcept { return neuron_ids.size(); }
  std::size_t n_classes() const noexcept { return vocab.size(); }

  /// Row indices belonging to one split, ascending.
  std::vector<std::size_t> rows(Split which) const;

  /// Column position of a flat neuron id, or -1.
  int column_of(int flat) const;

  /// Dataset restricted to the given columns, in the given order.
  ProbeDataset select_columns(std::span<const std::size_t> columns) const;

  /// Dataset restricted to the given flat neuron ids (MismatchedNeuronSets if absent).
  ProbeDataset select_neurons(std::span<const int> flat_ids) const;

  /// Same samples and splits with the labels replaced.
  ProbeDataset with_labels(std::vector<int> labels, LabelVocab vocab) const;
};

struct DatasetOptions {
  std::vector<int> layers;  // empty selects every layer
  SplitRatios ratios;
  bool balance = false;
  std::uint64_t seed = 42;
};

/// One sample per word token. Columns are the selected layers' neurons in
/// (layer, index) order. Sentences, not tokens, are assigned to splits.
/// Standardization statistics come from the train split only.
ProbeDataset build_dataset(const ActivationSet& acts, const LabeledCorpus& labels, const DatasetOptions& options);

/// Builds directly from a raw (sample x neuron) matrix; used by tests and the
/// Python bindings. `sentence_of` gives each row's sentence (split unit).
ProbeDataset build_dataset_from_matrix(const Eigen::MatrixXd& raw, std::vector<int> y, LabelVocab vocab,
                                       std::span<const std::uint32_t> sentence_of, const DatasetOptions& options,
                                       std::size_t layer_width = 0);

/// One-vs-rest view: concept -> 1, everything else -> 0.
ProbeDataset select_binary_view(const ProbeDataset& dataset, std::string_view target_label);

}  // namespace neuroscope
