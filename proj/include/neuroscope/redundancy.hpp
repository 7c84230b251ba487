#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "neuroscope/dataset.hpp"

namespace neuroscope {

inline constexpr double kDefaultClusterThreshold = 0.3;

/// d(i, j) = 1 - |pearson(x_i, x_j)| over the train split. Constant columns
/// correlate with nothing (d = 1), the diagonal is 0.
Eigen::MatrixXd correlation_distances(const ProbeDataset& data);

struct Merge {
  int a = 0;  // column positions of the merged clusters' smallest members
  int b = 0;
  double height = 0.0;
};

/// Full average-linkage dendrogram over a symmetric distance matrix, n - 1
/// merges in the order they happened.
std::vector<Merge> average_linkage(const Eigen::MatrixXd& distances);

/// Flat clusters of column positions joined by merges at height <= threshold.
/// Members ascending, clusters ordered by their first member.
std::vector<std::vector<int>> cut_dendrogram(const std::vector<Merge>& merges, std::size_t n, double threshold);

struct CorrelationClustering {
  double threshold = kDefaultClusterThreshold;
  std::vector<std::vector<int>> clusters;  // flat ids
  std::vector<int> representatives;        // one flat id per cluster, same order
};

/// Representative: the member with the highest raw train variance, ties by
/// ascending id.
CorrelationClustering extract_independent_neurons(const ProbeDataset& data,
                                                  double threshold = kDefaultClusterThreshold);

nlohmann::json to_json(const CorrelationClustering& clustering);
void write_clustering(const CorrelationClustering& clustering, const std::filesystem::path& path);

}  // namespace neuroscope
