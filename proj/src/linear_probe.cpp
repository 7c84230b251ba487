#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "neuroscope/error.hpp"
#include "neuroscope/methods.hpp"

namespace neuroscope {

std::string_view to_string(Metric metric) {
  return metric == Metric::accuracy ? "accuracy" : "macro_f1";
}

Metric parse_metric(std::string_view text) {
  if (text == "accuracy") return Metric::accuracy;
  if (text == "macro_f1" || text == "f1") return Metric::macro_f1;
  throw Error(ErrorKind::InvalidArgument, "unknown metric '" + std::string(text) + "'");
}

double score_predictions(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes,
                         Metric metric) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorKind::StructureMismatch, "prediction count differs from label count");
  }
  if (truth.empty()) return 0.0;
  if (metric == Metric::accuracy) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == predicted[i];
    return static_cast<double>(correct) / static_cast<double>(truth.size());
  }
  std::vector<double> tp(n_classes), fp(n_classes), fn(n_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (t == p) {
      tp[t] += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (tp[c] + fn[c] == 0) continue;  // class absent from the truth
    ++present;
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    sum += denom > 0 ? 2 * tp[c] / denom : 0.0;
  }
  return present ? sum / static_cast<double>(present) : 0.0;
}

namespace {

std::vector<int> argmax_rows(const Eigen::MatrixXd& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> flat_ids(const ProbeDataset& data) {
  std::vector<int> ids;
  ids.reserve(data.n_neurons());
  for (const auto& n : data.neuron_ids) ids.push_back(n.flat);
  return ids;
}

}  // namespace

Eigen::MatrixXd LinearProbe::logits(const Eigen::MatrixXd& X) const {
  return (X * W.transpose()).rowwise() + b.transpose();
}

std::vector<int> LinearProbe::predict(const Eigen::MatrixXd& X) const { return argmax_rows(logits(X)); }

namespace linear {

Objective objective(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, const Eigen::MatrixXd& X,
                    std::span<const int> y, double l1, double l2) {
  const auto n = X.rows();
  Eigen::MatrixXd z = (X * W.transpose()).rowwise() + b.transpose();
  const Eigen::VectorXd row_max = z.rowwise().maxCoeff();
  z.colwise() -= row_max;
  Eigen::MatrixXd p = z.array().exp();
  const Eigen::VectorXd norm = p.rowwise().sum();
  double ce = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto yi = y[static_cast<std::size_t>(i)];
    ce -= z(i, yi) - std::log(norm(i));
    p.row(i) /= norm(i);
    p(i, yi) -= 1.0;
  }
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  p *= inv_n;

  Objective out;
  out.loss = ce * inv_n + l1 * W.cwiseAbs().sum() + l2 * W.squaredNorm();
  out.grad_W = p.transpose() * X + l1 * W.unaryExpr([](double w) { return double((w > 0) - (w < 0)); }) +
               2.0 * l2 * W;
  out.grad_b = p.colwise().sum().transpose();
  return out;
}

LinearProbe train_probe(const ProbeDataset& data, const LinearOptions& options) {
  if (options.l1 < 0 || options.l2 < 0) throw Error(ErrorKind::InvalidArgument, "regularization must be >= 0");
  if (options.epochs < 1 || options.batch_size == 0 || !(options.learning_rate > 0)) {
    throw Error(ErrorKind::InvalidArgument, "epochs, batch size and learning rate must be positive");
  }
  auto rows = data.rows(Split::train);
  if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "train split is empty");

  const auto n_classes = static_cast<Eigen::Index>(data.n_classes());
  const auto n_neurons = static_cast<Eigen::Index>(data.n_neurons());
  LinearProbe probe;
  probe.W = Eigen::MatrixXd::Zero(n_classes, n_neurons);
  probe.b = Eigen::VectorXd::Zero(n_classes);
  probe.l1 = options.l1;
  probe.l2 = options.l2;
  probe.neurons = flat_ids(data);
  probe.classes = data.vocab.labels();

  std::mt19937_64 engine(options.seed);
  std::vector<int> batch_y;
  std::vector<Eigen::Index> batch_rows;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(rows.begin(), rows.end(), engine);
    double total = 0.0;
    for (std::size_t start = 0; start < rows.size(); start += options.batch_size) {
      const std::size_t end = std::min(rows.size(), start + options.batch_size);
      batch_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(start),
                        rows.begin() + static_cast<std::ptrdiff_t>(end));
      batch_y.clear();
      for (auto r : batch_rows) batch_y.push_back(data.y[static_cast<std::size_t>(r)]);
      const Eigen::MatrixXd xb = data.X(batch_rows, Eigen::all);
      const auto obj = objective(probe.W, probe.b, xb, batch_y, options.l1, options.l2);
      if (!std::isfinite(obj.loss)) {
        throw Error(ErrorKind::Diverged, "non-finite loss", "epoch " + std::to_string(epoch));
      }
      total += obj.loss * static_cast<double>(end - start);
      probe.W -= options.learning_rate * obj.grad_W;
      probe.b -= options.learning_rate * obj.grad_b;
    }
    probe.epoch_loss.push_back(total / static_cast<double>(rows.size()));
  }
  if (!probe.W.allFinite() || !probe.b.allFinite()) throw Error(ErrorKind::Diverged, "non-finite weights");
  return probe;
}

double evaluate(const LinearProbe& probe, const ProbeDataset& data, Split split, Metric metric) {
  const auto rows = data.rows(split);
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  std::vector<int> truth;
  for (auto r : rows) truth.push_back(data.y[r]);
  const Eigen::MatrixXd x = data.X(idx, Eigen::all);
  return score_predictions(truth, probe.predict(x), data.n_classes(), metric);
}

NeuronRanking get_neuron_ordering(const LinearProbe& probe, double tau_percent) {
  if (!(tau_percent > 0) || tau_percent > 100) {
    throw Error(ErrorKind::InvalidArgument, "tau must be in (0, 100]");
  }
  const auto n_classes = static_cast<std::size_t>(probe.W.rows());
  const auto n = static_cast<std::size_t>(probe.W.cols());

  std::vector<std::vector<double>> scores(n_classes, std::vector<double>(n, 0.0));
  std::vector<double> best(n, 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double max_abs = probe.W.row(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff();
    for (std::size_t j = 0; j < n; ++j) {
      scores[c][j] = max_abs > 0 ? std::fabs(probe.W(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j))) / max_abs
                                 : 0.0;
      best[j] = std::max(best[j], scores[c][j]);
    }
  }

  nlohmann::json params = {{"l1", probe.l1}, {"l2", probe.l2}, {"tau", tau_percent}};
  auto ranking = make_ranking("linear", std::move(params), probe.neurons, probe.classes, std::move(scores), best);

  std::unordered_map<int, std::size_t> column;
  for (std::size_t j = 0; j < n; ++j) column.emplace(probe.neurons[j], j);
  std::unordered_set<int> seen;
  std::vector<int> order;
  order.reserve(n);
  std::vector<double> new_scores;
  std::vector<int> new_ids;
  const auto steps = static_cast<std::size_t>(std::ceil(100.0 / tau_percent - 1e-9));
  for (std::size_t s = 1; s <= steps && order.size() < n; ++s) {
    const double p = std::min(100.0, static_cast<double>(s) * tau_percent);
    const auto k = std::min(n, static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) / 100.0 - 1e-9)));
    new_ids.clear();
    new_scores.clear();
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t i = 0; i < k; ++i) {
        const int id = ranking.per_class_order[c][i];
        if (seen.insert(id).second) new_ids.push_back(id);
      }
    }
    for (int id : new_ids) new_scores.push_back(best[column.at(id)]);
    for (int id : order_by_score(new_scores, new_ids)) order.push_back(id);
  }
  ranking.global_order = std::move(order);
  return ranking;
}

}  // namespace linear
}  // namespace neuroscope
