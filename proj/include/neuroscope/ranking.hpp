#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace neuroscope {

/// A total order over the neurons of a dataset, globally and per class.
/// Neurons are referred to by flat id throughout.
struct NeuronRanking {
  std::string method;
  nlohmann::json params = nlohmann::json::object();
  std::vector<int> neurons;       // flat ids in dataset column order
  std::vector<int> global_order;  // most important first
  std::vector<std::string> classes;
  std::vector<std::vector<double>> scores;        // [class][column]
  std::vector<std::vector<int>> per_class_order;  // [class] -> flat ids

  std::size_t size() const noexcept { return neurons.size(); }

  /// The first k entries of global_order.
  std::vector<int> top(std::size_t k) const;
  std::vector<int> bottom(std::size_t k) const;
};

/// Flat ids sorted by descending score, ties by ascending id. NaN ranks last.
std::vector<int> order_by_score(std::span<const double> scores, std::span<const int> ids);

/// Fills per_class_order from scores and global_order from `global_scores`.
NeuronRanking make_ranking(std::string method, nlohmann::json params, std::vector<int> neurons,
                           std::vector<std::string> classes, std::vector<std::vector<double>> scores,
                           std::span<const double> global_scores);

/// True when `order` contains every id of `ids` exactly once.
bool is_permutation_of(std::span<const int> order, std::span<const int> ids);

nlohmann::json to_json(const NeuronRanking& ranking);
NeuronRanking ranking_from_json(const nlohmann::json& doc);

void write_ranking(const NeuronRanking& ranking, const std::filesystem::path& path);
NeuronRanking read_ranking(const std::filesystem::path& path);

}  // namespace neuroscope
