#include "neuroscope/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "neuroscope/error.hpp"
#include "neuroscope/json_util.hpp"

namespace neuroscope {

using nlohmann::json;

std::vector<std::size_t> top_k_columns(const ProbeDataset& data, const NeuronRanking& ranking, std::size_t k) {
  if (k < 1 || k > data.n_neurons()) {
    throw Error(ErrorKind::InvalidArgument,
                "k must lie in [1, " + std::to_string(data.n_neurons()) + "], got " + std::to_string(k));
  }
  if (ranking.global_order.size() != data.n_neurons()) {
    throw Error(ErrorKind::MismatchedNeuronSets, "ranking and dataset cover different neurons");
  }
  std::vector<std::size_t> cols;
  for (int id : ranking.top(k)) {
    const int c = data.column_of(id);
    if (c < 0) throw Error(ErrorKind::MismatchedNeuronSets, "neuron " + std::to_string(id) + " is not in the dataset");
    cols.push_back(static_cast<std::size_t>(c));
  }
  std::sort(cols.begin(), cols.end());
  return cols;
}

SelectedAccuracy selected_accuracy(const ProbeDataset& data, const NeuronRanking& ranking, std::size_t k,
                                   const LinearOptions& options, Metric metric) {
  const auto cols = top_k_columns(data, ranking, k);
  const auto subset = data.select_columns(cols);
  SelectedAccuracy out;
  out.k = k;
  out.selected = linear::evaluate(linear::train_probe(subset, options), subset, Split::test, metric);
  out.oracle = linear::evaluate(linear::train_probe(data, options), data, Split::test, metric);
  out.delta = out.oracle - out.selected;
  for (const auto& id : subset.neuron_ids) out.neurons.push_back(id.flat);
  return out;
}

Selectivity selectivity(const ProbeDataset& task, const ProbeDataset& control, const NeuronRanking& ranking,
                        std::size_t k, const LinearOptions& options, Metric metric) {
  if (task.n_samples() != control.n_samples() || task.split != control.split) {
    throw Error(ErrorKind::StructureMismatch, "control data must share the task's samples and splits");
  }
  if (task.n_neurons() != control.n_neurons() ||
      !std::equal(task.neuron_ids.begin(), task.neuron_ids.end(), control.neuron_ids.begin())) {
    throw Error(ErrorKind::MismatchedNeuronSets, "control data must share the task's neurons");
  }
  const auto cols = top_k_columns(task, ranking, k);
  const auto t = task.select_columns(cols);
  const auto c = control.select_columns(cols);
  Selectivity out;
  out.k = k;
  out.task = linear::evaluate(linear::train_probe(t, options), t, Split::test, metric);
  out.control = linear::evaluate(linear::train_probe(c, options), c, Split::test, metric);
  out.selectivity = out.task - out.control;
  return out;
}

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::keep_top: return "keep_top";
    case AblationMode::keep_bottom: return "keep_bottom";
    case AblationMode::keep_random: return "keep_random";
  }
  return "keep_top";
}

AblationMode parse_ablation_mode(std::string_view text) {
  if (text == "keep_top" || text == "top") return AblationMode::keep_top;
  if (text == "keep_bottom" || text == "bottom") return AblationMode::keep_bottom;
  if (text == "keep_random" || text == "random") return AblationMode::keep_random;
  throw Error(ErrorKind::InvalidArgument, "unknown ablation mode '" + std::string(text) + "'");
}

AblationCurve ablation_curve(const ProbeDataset& data, const LinearProbe& probe, const NeuronRanking& ranking,
                             std::span<const std::size_t> ks, AblationMode mode, std::uint64_t seed, Metric metric) {
  const std::size_t n = data.n_neurons();
  if (probe.neurons.size() != n || ranking.global_order.size() != n) {
    throw Error(ErrorKind::MismatchedNeuronSets, "probe, ranking and dataset cover different neurons");
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1 || ks[i] > n || (i > 0 && ks[i] <= ks[i - 1])) {
      throw Error(ErrorKind::InvalidArgument, "ks must be strictly increasing within [1, " + std::to_string(n) + "]");
    }
  }

  std::vector<int> order;
  switch (mode) {
    case AblationMode::keep_top: order = ranking.global_order; break;
    case AblationMode::keep_bottom: order.assign(ranking.global_order.rbegin(), ranking.global_order.rend()); break;
    case AblationMode::keep_random: {
      order = ranking.neurons;
      std::sort(order.begin(), order.end());
      std::mt19937_64 engine(seed);
      std::shuffle(order.begin(), order.end(), engine);
      break;
    }
  }

  const auto rows = data.rows(Split::test);
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  const Eigen::MatrixXd x = data.X(idx, Eigen::all);
  std::vector<int> truth;
  for (auto r : rows) truth.push_back(data.y[r]);

  AblationCurve curve;
  curve.mode = mode;
  curve.seed = seed;
  curve.ks.assign(ks.begin(), ks.end());
  for (std::size_t k : ks) {
    Eigen::MatrixXd kept = Eigen::MatrixXd::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < k; ++i) {
      const int c = data.column_of(order[i]);
      if (c < 0) throw Error(ErrorKind::MismatchedNeuronSets, "neuron " + std::to_string(order[i]) + " is not in the dataset");
      kept.col(c) = x.col(c);
    }
    curve.scores.push_back(score_predictions(truth, probe.predict(kept), data.n_classes(), metric));
  }
  return curve;
}

std::vector<std::size_t> default_ablation_ks(std::size_t n) {
  std::vector<std::size_t> ks;
  for (std::size_t k = 1; k < n; k *= 2) ks.push_back(k);
  if (n > 0) ks.push_back(n);
  return ks;
}

namespace {

std::vector<std::size_t> bin_column(const ProbeDataset& data, const std::vector<std::size_t>& rows, int id,
                                    std::size_t bins) {
  const int col = data.column_of(id);
  if (col < 0) throw Error(ErrorKind::OutOfRangeNeuron, "neuron " + std::to_string(id) + " is not in the dataset");
  std::vector<double> values(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) values[i] = data.X(static_cast<Eigen::Index>(rows[i]), col);
  std::vector<double> edges;
  for (std::size_t j = 1; j < bins; ++j) {
    edges.push_back(iou::quantile(values, static_cast<double>(j) / static_cast<double>(bins)));
  }
  std::vector<std::size_t> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[i] = static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), values[i]) - edges.begin());
  }
  return out;
}

double plug_in_bits(const ProbeDataset& data, std::span<const int> neurons, std::size_t bins,
                    const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  if (neurons.empty()) throw Error(ErrorKind::InvalidArgument, "mutual information needs at least one neuron");
  if (neurons.size() > kMaxJointNeurons) {
    throw Error(ErrorKind::InvalidArgument, "joint estimation is limited to " + std::to_string(kMaxJointNeurons) +
                                                " neurons; use the per-neuron sum");
  }
  if (bins < 2) throw Error(ErrorKind::InvalidArgument, "bins must be >= 2");
  if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "train split is empty");

  std::vector<std::uint64_t> cell(rows.size(), 0);
  for (int id : neurons) {
    const auto b = bin_column(data, rows, id, bins);
    for (std::size_t i = 0; i < rows.size(); ++i) cell[i] = cell[i] * bins + b[i];
  }
  std::map<std::pair<std::uint64_t, int>, double> joint;
  std::map<std::uint64_t, double> px;
  std::map<int, double> py;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    joint[{cell[i], labels[i]}] += 1.0;
    px[cell[i]] += 1.0;
    py[labels[i]] += 1.0;
  }
  const double n = static_cast<double>(rows.size());
  double bits = 0.0;
  for (const auto& [key, count] : joint) {
    bits += count / n * std::log2(count * n / (px[key.first] * py[key.second]));
  }
  return std::max(0.0, bits);
}

std::vector<int> train_labels(const ProbeDataset& data, const std::vector<std::size_t>& rows) {
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (auto r : rows) labels.push_back(data.y[r]);
  return labels;
}

}  // namespace

double mutual_information(const ProbeDataset& data, std::span<const int> neurons, std::size_t bins) {
  const auto rows = data.rows(Split::train);
  return plug_in_bits(data, neurons, bins, train_labels(data, rows), rows);
}

double mutual_information_sum(const ProbeDataset& data, std::span<const int> neurons, std::size_t bins) {
  double total = 0.0;
  for (int id : neurons) total += mutual_information(data, std::span<const int>(&id, 1), bins);
  return total;
}

double mutual_information_baseline(const ProbeDataset& data, std::span<const int> neurons, std::size_t bins,
                                   std::uint64_t seed) {
  const auto rows = data.rows(Split::train);
  auto labels = train_labels(data, rows);
  std::mt19937_64 engine(seed);
  std::shuffle(labels.begin(), labels.end(), engine);
  return plug_in_bits(data, neurons, bins, labels, rows);
}

std::size_t default_depth(std::size_t n) { return std::min<std::size_t>(100, n); }

double average_overlap(std::span<const int> a, std::span<const int> b, std::size_t depth) {
  if (a.size() != b.size() || !is_permutation_of(a, b)) {
    throw Error(ErrorKind::MismatchedNeuronSets, "rankings order different neuron sets");
  }
  if (depth < 1 || depth > a.size()) {
    throw Error(ErrorKind::InvalidArgument, "depth must lie in [1, " + std::to_string(a.size()) + "]");
  }
  std::unordered_map<int, std::size_t> pos_a;
  std::unordered_map<int, std::size_t> pos_b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pos_a.emplace(a[i], i);
    pos_b.emplace(b[i], i);
  }
  std::size_t shared = 0;
  long double total = 0.0L;
  for (std::size_t k = 0; k < depth; ++k) {
    // Both prefixes grow by one element; count each newly shared id once.
    if (a[k] == b[k]) {
      ++shared;
    } else {
      shared += pos_b.at(a[k]) < k;
      shared += pos_a.at(b[k]) < k;
    }
    total += static_cast<long double>(shared) / static_cast<long double>(k + 1);
  }
  return static_cast<double>(total / static_cast<long double>(depth));
}

double average_overlap(const NeuronRanking& a, const NeuronRanking& b, std::size_t depth) {
  return average_overlap(a.global_order, b.global_order, depth);
}

std::vector<int> borda_consensus(std::span<const std::vector<int>> orders) {
  if (orders.empty()) throw Error(ErrorKind::InvalidArgument, "consensus needs at least one ranking");
  const auto n = orders.front().size();
  std::map<int, double> votes;
  for (const auto& order : orders) {
    if (order.size() != n || !is_permutation_of(order, orders.front())) {
      throw Error(ErrorKind::MismatchedNeuronSets, "rankings order different neuron sets");
    }
    for (std::size_t i = 0; i < n; ++i) {
      votes[order[i]] += static_cast<double>(n - i) / static_cast<double>(n);
    }
  }
  std::vector<int> ids;
  std::vector<double> scores;
  for (const auto& [id, v] : votes) {
    ids.push_back(id);
    scores.push_back(v);
  }
  return order_by_score(scores, ids);
}

std::vector<double> neuron_vote(std::span<const NeuronRanking> rankings, std::size_t depth) {
  if (rankings.size() < 2) throw Error(ErrorKind::InvalidArgument, "NeuronVote needs at least 2 rankings");
  std::vector<double> out;
  for (std::size_t m = 0; m < rankings.size(); ++m) {
    std::vector<std::vector<int>> others;
    for (std::size_t o = 0; o < rankings.size(); ++o) {
      if (o != m) others.push_back(rankings[o].global_order);
    }
    out.push_back(average_overlap(rankings[m].global_order, borda_consensus(others), depth));
  }
  return out;
}

CompatibilityReport compatibility(std::span<const NeuronRanking> rankings, std::size_t depth) {
  CompatibilityReport report;
  report.depth = depth;
  const auto m = rankings.size();
  report.avg_overlap.assign(m, std::vector<double>(m, 1.0));
  for (const auto& r : rankings) report.methods.push_back(r.method);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double ao = average_overlap(rankings[i], rankings[j], depth);
      report.avg_overlap[i][j] = ao;
      report.avg_overlap[j][i] = ao;
    }
  }
  report.neuron_vote = neuron_vote(rankings, depth);
  return report;
}

json to_json(const SelectedAccuracy& result) {
  return {{"k", result.k},
          {"selected", round_significant(result.selected)},
          {"oracle", round_significant(result.oracle)},
          {"delta", round_significant(result.delta)},
          {"neurons", result.neurons}};
}

json to_json(const Selectivity& result) {
  return {{"k", result.k},
          {"task", round_significant(result.task)},
          {"control", round_significant(result.control)},
          {"selectivity", round_significant(result.selectivity)}};
}

json to_json(const AblationCurve& curve) {
  return {{"mode", std::string(to_string(curve.mode))},
          {"ks", curve.ks},
          {"scores", rounded(curve.scores)},
          {"seed", curve.seed}};
}

json to_json(const CompatibilityReport& report) {
  json matrix = json::array();
  for (const auto& row : report.avg_overlap) matrix.push_back(rounded(row));
  return {{"methods", report.methods},
          {"depth", report.depth},
          {"avg_overlap", matrix},
          {"neuron_vote", rounded(report.neuron_vote)}};
}

std::string to_csv(const CompatibilityReport& report) {
  std::ostringstream out;
  out.precision(kReportDigits);
  out << "method";
  for (const auto& m : report.methods) out << ',' << m;
  out << ",neuron_vote\n";
  for (std::size_t i = 0; i < report.methods.size(); ++i) {
    out << report.methods[i];
    for (double v : report.avg_overlap[i]) out << ',' << v;
    out << ',' << report.neuron_vote[i] << '\n';
  }
  return out.str();
}

}  // namespace neuroscope
