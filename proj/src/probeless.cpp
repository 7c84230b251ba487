#include <cmath>

#include "neuroscope/error.hpp"
#include "neuroscope/methods.hpp"

namespace neuroscope::probeless {

Eigen::MatrixXd class_means(const ProbeDataset& data) {
  const auto n_classes = static_cast<Eigen::Index>(data.n_classes());
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n_classes, data.X.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_classes);
  for (std::size_t r : data.rows(Split::train)) {
    const auto c = data.y[r];
    sums.row(c) += data.X.row(static_cast<Eigen::Index>(r));
    counts(c) += 1.0;
  }
  for (Eigen::Index c = 0; c < n_classes; ++c) {
    if (counts(c) == 0) {
      throw Error(ErrorKind::ClassTooSmall, "class '" + data.vocab.label(static_cast<int>(c)) + "' has no train samples");
    }
    sums.row(c) /= counts(c);
  }
  return sums;
}

NeuronRanking rank(const ProbeDataset& data) {
  if (data.n_classes() < 2) throw Error(ErrorKind::InvalidArgument, "probeless ranking needs at least 2 classes");
  const Eigen::MatrixXd mu = class_means(data);
  const auto n_classes = static_cast<std::size_t>(mu.rows());
  const auto n = static_cast<std::size_t>(mu.cols());

  std::vector<std::vector<double>> class_scores(n_classes, std::vector<double>(n, 0.0));
  std::vector<double> total(n, 0.0);
  for (std::size_t a = 0; a < n_classes; ++a) {
    for (std::size_t b = a + 1; b < n_classes; ++b) {
      for (std::size_t j = 0; j < n; ++j) {
        const double d = std::fabs(mu(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) -
                                   mu(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)));
        class_scores[a][j] += d;
        class_scores[b][j] += d;
        total[j] += d;
      }
    }
  }
  std::vector<int> ids;
  for (const auto& id : data.neuron_ids) ids.push_back(id.flat);
  return make_ranking("probeless", nlohmann::json::object(), std::move(ids), data.vocab.labels(),
                      std::move(class_scores), total);
}

}  // namespace neuroscope::probeless
