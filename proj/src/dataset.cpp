#include "neuroscope/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "neuroscope/error.hpp"

namespace neuroscope {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& raw) const {
  Eigen::MatrixXd out = (raw.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (stddev(c) <= kSigmaFloor) out.col(c).setZero();
  }
  return out;
}

Eigen::MatrixXd Standardizer::invert(const Eigen::MatrixXd& standardized) const {
  return (standardized.array().rowwise() * stddev.transpose().array()).matrix().rowwise() + mean.transpose();
}

std::vector<std::size_t> ProbeDataset::rows(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == which) out.push_back(i);
  }
  return out;
}

int ProbeDataset::column_of(int flat) const {
  for (std::size_t c = 0; c < neuron_ids.size(); ++c) {
    if (neuron_ids[c].flat == flat) return static_cast<int>(c);
  }
  return -1;
}

ProbeDataset ProbeDataset::select_columns(std::span<const std::size_t> columns) const {
  ProbeDataset out;
  out.X.resize(X.rows(), static_cast<Eigen::Index>(columns.size()));
  out.standardizer.mean.resize(static_cast<Eigen::Index>(columns.size()));
  out.standardizer.stddev.resize(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(columns[j]);
    if (columns[j] >= neuron_ids.size()) {
      throw Error(ErrorKind::OutOfRangeNeuron, "column " + std::to_string(columns[j]) + " out of range");
    }
    out.X.col(static_cast<Eigen::Index>(j)) = X.col(c);
    out.standardizer.mean(static_cast<Eigen::Index>(j)) = standardizer.mean(c);
    out.standardizer.stddev(static_cast<Eigen::Index>(j)) = standardizer.stddev(c);
    out.neuron_ids.push_back(neuron_ids[columns[j]]);
  }
  out.y = y;
  out.split = split;
  out.vocab = vocab;
  out.origin = origin;
  out.layer_width = layer_width;
  return out;
}

ProbeDataset ProbeDataset::select_neurons(std::span<const int> flat_ids) const {
  std::vector<std::size_t> cols;
  cols.reserve(flat_ids.size());
  for (int id : flat_ids) {
    const int c = column_of(id);
    if (c < 0) throw Error(ErrorKind::MismatchedNeuronSets, "neuron " + std::to_string(id) + " not in dataset");
    cols.push_back(static_cast<std::size_t>(c));
  }
  return select_columns(cols);
}

ProbeDataset ProbeDataset::with_labels(std::vector<int> labels, LabelVocab new_vocab) const {
  if (labels.size() != y.size()) {
    throw Error(ErrorKind::StructureMismatch, "label count differs from sample count");
  }
  ProbeDataset out = *this;
  out.y = std::move(labels);
  out.vocab = std::move(new_vocab);
  return out;
}

namespace {

void check_ratios(const SplitRatios& r) {
  if (r.train < 0 || r.dev < 0 || r.test < 0 || std::fabs(r.train + r.dev + r.test - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "split ratios must be non-negative and sum to 1");
  }
}

/// Assigns whole sentences to splits after a seeded shuffle.
std::unordered_map<std::uint32_t, Split> assign_sentences(std::span<const std::uint32_t> sentence_of,
                                                          const SplitRatios& ratios, std::mt19937_64& engine) {
  const std::set<std::uint32_t> unique(sentence_of.begin(), sentence_of.end());
  std::vector<std::uint32_t> sentences(unique.begin(), unique.end());
  std::shuffle(sentences.begin(), sentences.end(), engine);
  const double n = static_cast<double>(sentences.size());
  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * n));
  const auto n_dev = std::min(sentences.size() - n_train, static_cast<std::size_t>(std::llround(ratios.dev * n)));
  std::unordered_map<std::uint32_t, Split> out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    out[sentences[i]] = i < n_train ? Split::train : (i < n_train + n_dev ? Split::dev : Split::test);
  }
  return out;
}

ProbeDataset finish(Eigen::MatrixXd raw, std::vector<int> y, std::vector<SampleOrigin> origin, LabelVocab vocab,
                    std::vector<NeuronId> ids, std::size_t layer_width, const DatasetOptions& options) {
  check_ratios(options.ratios);
  std::mt19937_64 engine(options.seed);

  std::vector<std::uint32_t> sentence_of(origin.size());
  std::transform(origin.begin(), origin.end(), sentence_of.begin(), [](const SampleOrigin& o) { return o.sentence; });
  const auto assignment = assign_sentences(sentence_of, options.ratios, engine);
  std::vector<Split> split(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) split[i] = assignment.at(sentence_of[i]);

  const std::size_t n_classes = vocab.size();
  std::vector<std::vector<std::size_t>> train_by_class(n_classes);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= n_classes) {
      throw Error(ErrorKind::StructureMismatch, "label id out of vocabulary range", "sample " + std::to_string(i));
    }
    if (split[i] == Split::train) train_by_class[static_cast<std::size_t>(y[i])].push_back(i);
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (train_by_class[c].size() < 2) {
      throw Error(ErrorKind::ClassTooSmall,
                  "class '" + vocab.label(static_cast<int>(c)) + "' has " + std::to_string(train_by_class[c].size()) +
                      " train samples; at least 2 are required");
    }
  }

  std::vector<bool> keep(y.size(), true);
  if (options.balance) {
    std::size_t minority = y.size();
    for (const auto& rows : train_by_class) minority = std::min(minority, rows.size());
    for (auto& rows : train_by_class) {
      std::shuffle(rows.begin(), rows.end(), engine);
      for (std::size_t k = minority; k < rows.size(); ++k) keep[rows[k]] = false;
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) kept.push_back(i);
  }

  ProbeDataset ds;
  ds.neuron_ids = std::move(ids);
  ds.vocab = std::move(vocab);
  ds.layer_width = layer_width;
  ds.y.reserve(kept.size());
  ds.split.reserve(kept.size());
  ds.origin.reserve(kept.size());
  Eigen::MatrixXd kept_raw(static_cast<Eigen::Index>(kept.size()), raw.cols());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    kept_raw.row(static_cast<Eigen::Index>(r)) = raw.row(static_cast<Eigen::Index>(kept[r]));
    ds.y.push_back(y[kept[r]]);
    ds.split.push_back(split[kept[r]]);
    ds.origin.push_back(origin[kept[r]]);
  }

  const auto train_rows = ds.rows(Split::train);
  const auto n_train = static_cast<double>(train_rows.size());
  ds.standardizer.mean = Eigen::VectorXd::Zero(raw.cols());
  ds.standardizer.stddev = Eigen::VectorXd::Zero(raw.cols());
  for (std::size_t r : train_rows) ds.standardizer.mean += kept_raw.row(static_cast<Eigen::Index>(r)).transpose();
  ds.standardizer.mean /= n_train;
  for (std::size_t r : train_rows) {
    ds.standardizer.stddev +=
        (kept_raw.row(static_cast<Eigen::Index>(r)).transpose() - ds.standardizer.mean).array().square().matrix();
  }
  ds.standardizer.stddev = (ds.standardizer.stddev / n_train).array().sqrt().max(kSigmaFloor).matrix();
  ds.X = ds.standardizer.apply(kept_raw);
  return ds;
}

}  // namespace

ProbeDataset build_dataset(const ActivationSet& acts, const LabeledCorpus& labels, const DatasetOptions& options) {
  if (acts.sentences.size() != labels.sentences.size()) {
    throw Error(ErrorKind::StructureMismatch,
                "activations have " + std::to_string(acts.sentences.size()) + " sentences, labels have " +
                    std::to_string(labels.sentences.size()));
  }
  std::vector<int> layers = options.layers;
  if (layers.empty()) {
    layers.resize(acts.layer_count);
    std::iota(layers.begin(), layers.end(), 0);
  }
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  for (int l : layers) {
    if (l < 0 || static_cast<std::size_t>(l) >= acts.layer_count) {
      throw Error(ErrorKind::InvalidArgument,
                  "layer " + std::to_string(l) + " out of range (layer count " + std::to_string(acts.layer_count) + ")");
    }
  }

  std::size_t n_samples = 0;
  for (std::size_t s = 0; s < acts.sentences.size(); ++s) {
    const auto& a = acts.sentences[s];
    const auto& ls = labels.sentences[s];
    if (a.token_count() != ls.words.size() || ls.words.size() != ls.labels.size()) {
      throw Error(ErrorKind::StructureMismatch,
                  std::to_string(a.token_count()) + " activation tokens vs " + std::to_string(ls.words.size()) +
                      " labeled words",
                  "sentence " + std::to_string(s));
    }
    n_samples += a.token_count();
  }

  const auto width = acts.layer_width;
  std::vector<NeuronId> ids;
  for (int l : layers) {
    for (std::size_t n = 0; n < width; ++n) {
      ids.push_back(NeuronId::from_layer_index(l, static_cast<int>(n), static_cast<int>(width)));
    }
  }

  Eigen::MatrixXd raw(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(ids.size()));
  std::vector<int> y;
  std::vector<SampleOrigin> origin;
  y.reserve(n_samples);
  origin.reserve(n_samples);
  Eigen::Index row = 0;
  for (std::size_t s = 0; s < acts.sentences.size(); ++s) {
    const auto& a = acts.sentences[s];
    for (std::size_t t = 0; t < a.token_count(); ++t, ++row) {
      Eigen::Index col = 0;
      for (int l : layers) {
        const auto v = a.vector(static_cast<std::size_t>(l), t);
        for (std::size_t n = 0; n < width; ++n) raw(row, col++) = v[n];
      }
      y.push_back(labels.sentences[s].labels[t]);
      origin.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(t)});
    }
  }
  return finish(std::move(raw), std::move(y), std::move(origin), labels.vocab, std::move(ids), width, options);
}

ProbeDataset build_dataset_from_matrix(const Eigen::MatrixXd& raw, std::vector<int> y, LabelVocab vocab,
                                       std::span<const std::uint32_t> sentence_of, const DatasetOptions& options,
                                       std::size_t layer_width) {
  if (static_cast<std::size_t>(raw.rows()) != y.size() || sentence_of.size() != y.size()) {
    throw Error(ErrorKind::StructureMismatch, "matrix rows, labels and sentence ids must have equal length");
  }
  const auto cols = static_cast<std::size_t>(raw.cols());
  const std::size_t width = layer_width == 0 ? cols : layer_width;
  std::vector<NeuronId> ids;
  for (std::size_t c = 0; c < cols; ++c) ids.push_back(NeuronId::from_flat(static_cast<int>(c), static_cast<int>(width)));
  std::vector<SampleOrigin> origin(y.size());
  std::unordered_map<std::uint32_t, std::uint32_t> position;
  for (std::size_t i = 0; i < y.size(); ++i) origin[i] = {sentence_of[i], position[sentence_of[i]]++};
  return finish(raw, std::move(y), std::move(origin), std::move(vocab), std::move(ids), width, options);
}

ProbeDataset select_binary_view(const ProbeDataset& dataset, std::string_view target_label) {
  const int target = dataset.vocab.id(target_label);
  std::vector<int> y(dataset.y.size());
  std::transform(dataset.y.begin(), dataset.y.end(), y.begin(), [&](int v) { return v == target ? 1 : 0; });
  const std::string name(target_label);
  LabelVocab vocab({"not:" + name, name});
  return dataset.with_labels(std::move(y), std::move(vocab));
}

}  // namespace neuroscope
