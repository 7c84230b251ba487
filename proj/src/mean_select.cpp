#include <algorithm>
#include <cmath>

#include "neuroscope/error.hpp"
#include "neuroscope/methods.hpp"

namespace neuroscope::meanselect {

NeuronRanking rank(const ProbeDataset& data) {
  if (data.n_classes() < 2) throw Error(ErrorKind::InvalidArgument, "mean-select ranking needs at least 2 classes");
  const auto rows = data.rows(Split::train);
  if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "train split is empty");
  const auto n = data.X.cols();

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
  for (std::size_t r : rows) mu += data.X.row(static_cast<Eigen::Index>(r)).transpose();
  mu /= static_cast<double>(rows.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(n);
  for (std::size_t r : rows) var += (data.X.row(static_cast<Eigen::Index>(r)).transpose() - mu).array().square().matrix();
  const Eigen::VectorXd sigma = (var / static_cast<double>(rows.size())).array().sqrt().max(kSigmaFloor).matrix();

  const Eigen::MatrixXd class_mu = probeless::class_means(data);
  std::vector<std::vector<double>> scores(data.n_classes(), std::vector<double>(static_cast<std::size_t>(n)));
  std::vector<double> global(static_cast<std::size_t>(n), 0.0);
  for (std::size_t c = 0; c < data.n_classes(); ++c) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double z = std::fabs(class_mu(static_cast<Eigen::Index>(c), j) - mu(j)) / sigma(j);
      scores[c][static_cast<std::size_t>(j)] = z;
      global[static_cast<std::size_t>(j)] = std::max(global[static_cast<std::size_t>(j)], z);
    }
  }
  std::vector<int> ids;
  for (const auto& id : data.neuron_ids) ids.push_back(id.flat);
  return make_ranking("meanselect", nlohmann::json::object(), std::move(ids), data.vocab.labels(), std::move(scores),
                      global);
}

}  // namespace neuroscope::meanselect
