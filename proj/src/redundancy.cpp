#include "neuroscope/redundancy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neuroscope/error.hpp"
#include "neuroscope/json_util.hpp"

namespace neuroscope {

namespace {

constexpr double kStableBelow = 0.1;

}  // namespace

Eigen::MatrixXd correlation_distances(const ProbeDataset& data) {
  const auto rows = data.rows(Split::train);
  if (rows.size() < 2) throw Error(ErrorKind::InvalidArgument, "correlation needs at least 2 train samples");
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  Eigen::MatrixXd z = data.X(idx, Eigen::all);
  z.rowwise() -= z.colwise().mean();
  const Eigen::VectorXd norms = z.colwise().norm();
  const Eigen::MatrixXd gram = z.transpose() * z;

  const auto n = gram.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double denom = norms(i) * norms(j);
      const double r = denom > 0.0 ? std::clamp(gram(i, j) / denom, -1.0, 1.0) : 0.0;
      double dist = 1.0 - std::fabs(r);
      if (dist < kStableBelow) {
        // 1 - |r| cancels for near-duplicates; ||u -+ v||^2 / 2 on unit columns does not.
        const Eigen::VectorXd u = z.col(i) / norms(i);
        const Eigen::VectorXd v = z.col(j) / norms(j);
        dist = 0.5 * (r >= 0.0 ? (u - v).squaredNorm() : (u + v).squaredNorm());
      }
      d(i, j) = d(j, i) = dist;
    }
  }
  return d;
}

// Nearest-neighbour chain with Lance-Williams updates. Average linkage is
// reducible, so the chain yields the same dendrogram as the naive algorithm.
std::vector<Merge> average_linkage(const Eigen::MatrixXd& distances) {
  const auto n = static_cast<int>(distances.rows());
  if (distances.cols() != n) throw Error(ErrorKind::InvalidArgument, "distance matrix must be square");
  Eigen::MatrixXd d = distances;
  std::vector<double> size(static_cast<std::size_t>(n), 1.0);
  std::vector<char> active(static_cast<std::size_t>(n), 1);
  std::vector<Merge> merges;
  std::vector<int> chain;
  int remaining = n;

  while (remaining > 1) {
    if (chain.empty()) {
      int first = 0;
      while (!active[static_cast<std::size_t>(first)]) ++first;
      chain.push_back(first);
    }
    const int a = chain.back();
    const int previous = chain.size() >= 2 ? chain[chain.size() - 2] : -1;
    int b = -1;
    double best = INFINITY;
    if (previous >= 0) {
      b = previous;
      best = d(a, previous);
    }
    for (int k = 0; k < n; ++k) {
      if (k == a || !active[static_cast<std::size_t>(k)]) continue;
      if (d(a, k) < best || (d(a, k) == best && k < b && b != previous)) {
        best = d(a, k);
        b = k;
      }
    }
    if (b == previous) {
      chain.pop_back();
      chain.pop_back();
      const int keep = std::min(a, b);
      const int drop = std::max(a, b);
      merges.push_back({keep, drop, best});
      const double sa = size[static_cast<std::size_t>(keep)];
      const double sb = size[static_cast<std::size_t>(drop)];
      for (int k = 0; k < n; ++k) {
        if (!active[static_cast<std::size_t>(k)] || k == keep || k == drop) continue;
        const double updated = (sa * d(keep, k) + sb * d(drop, k)) / (sa + sb);
        d(keep, k) = updated;
        d(k, keep) = updated;
      }
      size[static_cast<std::size_t>(keep)] = sa + sb;
      active[static_cast<std::size_t>(drop)] = 0;
      --remaining;
    } else {
      chain.push_back(b);
    }
  }
  // The chain finds merges out of height order.
  std::stable_sort(merges.begin(), merges.end(), [](const Merge& x, const Merge& y) { return x.height < y.height; });
  return merges;
}

std::vector<std::vector<int>> cut_dendrogram(const std::vector<Merge>& merges, std::size_t n, double threshold) {
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (const auto& m : merges) {
    if (m.height > threshold) continue;
    const int ra = find(m.a);
    const int rb = find(m.b);
    if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
  }
  std::vector<std::vector<int>> clusters;
  std::vector<int> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = static_cast<std::size_t>(find(static_cast<int>(i)));
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(clusters.size());
      clusters.emplace_back();
    }
    clusters[static_cast<std::size_t>(slot[root])].push_back(static_cast<int>(i));
  }
  return clusters;
}

CorrelationClustering extract_independent_neurons(const ProbeDataset& data, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorKind::InvalidArgument, "threshold must lie in [0, 1]");
  if (data.n_samples() < 2) throw Error(ErrorKind::InvalidArgument, "clustering needs at least 2 samples");
  const auto merges = average_linkage(correlation_distances(data));
  const auto by_column = cut_dendrogram(merges, data.n_neurons(), threshold);

  // Columns follow ascending flat id only when the dataset was built that way; sort explicitly.
  CorrelationClustering out;
  out.threshold = threshold;
  for (const auto& members : by_column) {
    std::vector<int> ids;
    int rep = -1;
    double rep_std = -1.0;
    for (int col : members) {
      const int id = data.neuron_ids[static_cast<std::size_t>(col)].flat;
      ids.push_back(id);
      const double s = data.standardizer.stddev(col);
      if (s > rep_std || (s == rep_std && id < rep)) {
        rep_std = s;
        rep = id;
      }
    }
    std::sort(ids.begin(), ids.end());
    out.clusters.push_back(std::move(ids));
    out.representatives.push_back(rep);
  }
  std::vector<std::size_t> order(out.clusters.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return out.clusters[x].front() < out.clusters[y].front(); });
  CorrelationClustering sorted{threshold, {}, {}};
  for (auto i : order) {
    sorted.clusters.push_back(std::move(out.clusters[i]));
    sorted.representatives.push_back(out.representatives[i]);
  }
  return sorted;
}

nlohmann::json to_json(const CorrelationClustering& clustering) {
  return {{"threshold", round_significant(clustering.threshold)},
          {"clusters", clustering.clusters},
          {"representatives", clustering.representatives}};
}

void write_clustering(const CorrelationClustering& clustering, const std::filesystem::path& path) {
  write_json_file(path, to_json(clustering));
}

}  // namespace neuroscope
