#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuroscope/dataset.hpp"
#include "neuroscope/methods.hpp"
#include "neuroscope/ranking.hpp"

namespace neuroscope {

/// Columns of the top-k neurons of `ranking`, ascending, so k = N selects the
/// dataset unchanged.
std::vector<std::size_t> top_k_columns(const ProbeDataset& data, const NeuronRanking& ranking, std::size_t k);

struct SelectedAccuracy {
  std::size_t k = 0;
  double selected = 0.0;
  double oracle = 0.0;
  double delta = 0.0;  // oracle - selected
  std::vector<int> neurons;
};

/// Linear probes on the top-k columns and on all columns, same options, test split.
SelectedAccuracy selected_accuracy(const ProbeDataset& data, const NeuronRanking& ranking, std::size_t k,
                                   const LinearOptions& options = {}, Metric metric = Metric::accuracy);

struct Selectivity {
  std::size_t k = 0;
  double task = 0.0;
  double control = 0.0;
  double selectivity = 0.0;  // task - control
};

/// `control` must hold the same samples and neurons as `task` with control labels.
Selectivity selectivity(const ProbeDataset& task, const ProbeDataset& control, const NeuronRanking& ranking,
                        std::size_t k, const LinearOptions& options = {}, Metric metric = Metric::accuracy);

enum class AblationMode { keep_top, keep_bottom, keep_random };

std::string_view to_string(AblationMode mode);
AblationMode parse_ablation_mode(std::string_view text);

struct AblationCurve {
  AblationMode mode = AblationMode::keep_top;
  std::vector<std::size_t> ks;
  std::vector<double> scores;
  std::uint64_t seed = 0;
};

/// Evaluates one trained probe on the test split with every non-kept column
/// set to its train mean (0 after standardization). keep_random keeps the
/// first k neurons of a seeded random permutation.
AblationCurve ablation_curve(const ProbeDataset& data, const LinearProbe& probe, const NeuronRanking& ranking,
                             std::span<const std::size_t> ks, AblationMode mode, std::uint64_t seed = 42,
                             Metric metric = Metric::accuracy);

/// Ks 1, 2, 4, ... below n, then n.
std::vector<std::size_t> default_ablation_ks(std::size_t n);

inline constexpr std::size_t kMaxJointNeurons = 3;

/// Plug-in estimate in bits of I(neurons; label) on the train split. Each
/// neuron is cut into `bins` quantile bins of its train values.
double mutual_information(const ProbeDataset& data, std::span<const int> neurons, std::size_t bins);

/// Sum of single-neuron estimates; any number of neurons.
double mutual_information_sum(const ProbeDataset& data, std::span<const int> neurons, std::size_t bins);

/// The same estimate with the train labels randomly permuted: the estimator's
/// bias on independent data.
double mutual_information_baseline(const ProbeDataset& data, std::span<const int> neurons, std::size_t bins,
                                   std::uint64_t seed = 42);

/// Depth used when none is given: min(100, n).
std::size_t default_depth(std::size_t n);

/// (1/d) sum over k = 1..d of |top_k(a) & top_k(b)| / k. Throws
/// MismatchedNeuronSets unless a and b order the same ids.
double average_overlap(std::span<const int> a, std::span<const int> b, std::size_t depth);
double average_overlap(const NeuronRanking& a, const NeuronRanking& b, std::size_t depth);

/// Borda consensus: rank i of N earns (N - i) / N. Ties by ascending id.
std::vector<int> borda_consensus(std::span<const std::vector<int>> orders);

/// Per ranking: AO against the consensus of all the other rankings.
std::vector<double> neuron_vote(std::span<const NeuronRanking> rankings, std::size_t depth);

struct CompatibilityReport {
  std::vector<std::string> methods;
  std::size_t depth = 0;
  std::vector<std::vector<double>> avg_overlap;
  std::vector<double> neuron_vote;
};

CompatibilityReport compatibility(std::span<const NeuronRanking> rankings, std::size_t depth);

nlohmann::json to_json(const SelectedAccuracy& result);
nlohmann::json to_json(const Selectivity& result);
nlohmann::json to_json(const AblationCurve& curve);
nlohmann::json to_json(const CompatibilityReport& report);

/// Matrix CSV: header "method,<m1>,...,neuron_vote", one row per method.
std::string to_csv(const CompatibilityReport& report);

}  // namespace neuroscope
