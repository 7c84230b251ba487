#include <algorithm>
#include <cmath>

#include "neuroscope/error.hpp"
#include "neuroscope/methods.hpp"
#include "neuroscope/parallel.hpp"

namespace neuroscope::iou {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "quantile of an empty sample");
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(values.size() - 1, lo + 1);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double v_lo = values[lo];
  double v_hi = v_lo;
  if (hi != lo) v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return v_lo + (pos - static_cast<double>(lo)) * (v_hi - v_lo);
}

NeuronMasks compute(const ProbeDataset& data, std::string_view target_label, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::InvalidArgument, "delta must lie in (0, 1)");
  const int target = data.vocab.id(target_label);
  const auto rows = data.rows(Split::train);
  std::vector<char> in_concept(rows.size());
  std::size_t concept_count = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    in_concept[i] = data.y[rows[i]] == target;
    concept_count += in_concept[i];
  }
  if (concept_count == 0) {
    throw Error(ErrorKind::DegenerateConcept, "concept '" + std::string(target_label) + "' has no train tokens");
  }

  const std::size_t n = data.n_neurons();
  NeuronMasks out;
  out.thresholds.assign(n, 0.0);
  out.scores.assign(n, 0.0);
  parallel_for(n, [&](std::size_t j) {
    const auto col = data.X.col(static_cast<Eigen::Index>(j));
    std::vector<double> values(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) values[i] = col(static_cast<Eigen::Index>(rows[i]));
    const double theta = quantile(values, 1.0 - delta);
    std::size_t both = 0;
    std::size_t either = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const bool fires = values[i] > theta;
      both += fires && in_concept[i];
      either += fires || in_concept[i];
    }
    out.thresholds[j] = theta;
    out.scores[j] = either ? static_cast<double>(both) / static_cast<double>(either) : 0.0;
  });
  return out;
}

NeuronRanking rank(const ProbeDataset& data, std::string_view target_label, double delta) {
  auto masks = compute(data, target_label, delta);
  std::vector<int> ids;
  for (const auto& id : data.neuron_ids) ids.push_back(id.flat);
  const std::vector<double> global = masks.scores;
  return make_ranking("iou", {{"concept", std::string(target_label)}, {"delta", delta}}, std::move(ids),
                      {std::string(target_label)}, {std::move(masks.scores)}, global);
}

}  // namespace neuroscope::iou
