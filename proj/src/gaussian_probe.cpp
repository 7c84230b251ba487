#include <algorithm>
#include <cmath>
#include <numbers>

#include "neuroscope/error.hpp"
#include "neuroscope/methods.hpp"
#include "neuroscope/parallel.hpp"

namespace neuroscope {

std::string_view to_string(Covariance covariance) {
  return covariance == Covariance::diagonal ? "diagonal" : "full";
}

Covariance parse_covariance(std::string_view text) {
  if (text == "diagonal" || text == "diag") return Covariance::diagonal;
  if (text == "full") return Covariance::full;
  throw Error(ErrorKind::InvalidArgument, "unknown covariance '" + std::string(text) + "'");
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

double log_sum_exp(const double* v, std::size_t n) {
  double m = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, v[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

std::vector<std::size_t> evaluation_rows(const ProbeDataset& data) {
  auto rows = data.rows(Split::dev);
  return rows.empty() ? data.rows(Split::train) : rows;
}

/// Per-sample, per-class diagonal log densities of single neurons on a fixed row set.
struct SingleNeuronTerms {
  std::vector<Eigen::MatrixXd> per_class;  // [class] rows x neurons
};

SingleNeuronTerms single_neuron_terms(const GaussianProbe& probe, const ProbeDataset& data,
                                      const std::vector<std::size_t>& rows) {
  SingleNeuronTerms t;
  const auto n_classes = probe.means.rows();
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  const Eigen::MatrixXd x = data.X(idx, Eigen::all);
  for (Eigen::Index c = 0; c < n_classes; ++c) {
    const Eigen::ArrayXd mu = probe.means.row(c).transpose().array();
    const Eigen::ArrayXd var = probe.variances.row(c).transpose().array();
    Eigen::MatrixXd terms(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      terms.col(j) = -0.5 * (kLog2Pi + std::log(var(j)) + (x.col(j).array() - mu(j)).square() / var(j));
    }
    t.per_class.push_back(std::move(terms));
  }
  return t;
}

/// Sum over rows of log p(y | selected + candidate) given accumulated joint terms.
double conditional_log_likelihood(const Eigen::MatrixXd& accumulated, const SingleNeuronTerms& terms,
                                  Eigen::Index candidate, std::span<const int> y) {
  const auto n_classes = accumulated.cols();
  std::vector<double> joint(static_cast<std::size_t>(n_classes));
  double total = 0.0;
  for (Eigen::Index i = 0; i < accumulated.rows(); ++i) {
    for (Eigen::Index c = 0; c < n_classes; ++c) {
      joint[static_cast<std::size_t>(c)] =
          accumulated(i, c) + (candidate >= 0 ? terms.per_class[static_cast<std::size_t>(c)](i, candidate) : 0.0);
    }
    total += joint[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] - log_sum_exp(joint.data(), joint.size());
  }
  return total;
}

}  // namespace

Eigen::MatrixXd GaussianProbe::log_joint(const Eigen::MatrixXd& X) const {
  const auto n_classes = means.rows();
  Eigen::MatrixXd out(X.rows(), n_classes);
  for (Eigen::Index c = 0; c < n_classes; ++c) {
    const Eigen::RowVectorXd mu = means.row(c);
    if (covariance == Covariance::diagonal) {
      const Eigen::RowVectorXd var = variances.row(c);
      const double log_norm = -0.5 * (static_cast<double>(X.cols()) * kLog2Pi + var.array().log().sum());
      out.col(c) = ((X.rowwise() - mu).array().square().rowwise() / var.array()).rowwise().sum() * -0.5 + log_norm;
    } else {
      const Eigen::MatrixXd centered = (X.rowwise() - mu).transpose();
      const Eigen::MatrixXd z = chol[static_cast<std::size_t>(c)].triangularView<Eigen::Lower>().solve(centered);
      const double log_norm = -0.5 * (static_cast<double>(X.cols()) * kLog2Pi + log_det(c));
      out.col(c) = (z.colwise().squaredNorm().transpose().array() * -0.5 + log_norm).matrix();
    }
    out.col(c).array() += log_prior(c);
  }
  return out;
}

std::vector<int> GaussianProbe::predict(const Eigen::MatrixXd& X) const {
  const Eigen::MatrixXd scores = log_joint(X);
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

namespace gaussian {

GaussianProbe train_probe(const ProbeDataset& data, Covariance covariance, double ridge) {
  if (!(ridge >= 0)) throw Error(ErrorKind::InvalidArgument, "ridge must be >= 0");
  const auto n_classes = static_cast<Eigen::Index>(data.n_classes());
  const auto d = data.X.cols();
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(n_classes));
  const auto train = data.rows(Split::train);
  for (std::size_t r : train) members[static_cast<std::size_t>(data.y[r])].push_back(static_cast<Eigen::Index>(r));

  GaussianProbe probe;
  probe.covariance = covariance;
  probe.ridge = ridge;
  probe.log_prior.resize(n_classes);
  probe.means.resize(n_classes, d);
  probe.variances.resize(n_classes, d);
  probe.log_det = Eigen::VectorXd::Zero(n_classes);
  for (const auto& id : data.neuron_ids) probe.neurons.push_back(id.flat);
  probe.classes = data.vocab.labels();

  for (Eigen::Index c = 0; c < n_classes; ++c) {
    const auto& rows = members[static_cast<std::size_t>(c)];
    if (rows.size() < 2) {
      throw Error(ErrorKind::ClassTooSmall, "class '" + data.vocab.label(static_cast<int>(c)) + "' has " +
                                                std::to_string(rows.size()) +
                                                " train samples; a variance needs at least 2");
    }
    const Eigen::MatrixXd x = data.X(rows, Eigen::all);
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mu;
    const double denom = static_cast<double>(rows.size() - 1);
    probe.means.row(c) = mu;
    probe.variances.row(c) = (centered.array().square().colwise().sum() / denom).matrix().array() + ridge;
    probe.log_prior(c) = std::log(static_cast<double>(rows.size()) / static_cast<double>(train.size()));
    if (covariance == Covariance::full) {
      Eigen::MatrixXd cov = centered.transpose() * centered / denom;
      cov.diagonal().array() += ridge;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::SingularCovariance,
                    "covariance of class '" + data.vocab.label(static_cast<int>(c)) +
                        "' is not positive definite; increase the ridge");
      }
      Eigen::MatrixXd l = llt.matrixL();
      probe.log_det(c) = 2.0 * l.diagonal().array().log().sum();
      probe.chol.push_back(std::move(l));
    }
  }
  return probe;
}

double evaluate(const GaussianProbe& probe, const ProbeDataset& data, Split split, Metric metric) {
  const auto rows = data.rows(split);
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  std::vector<int> truth;
  for (auto r : rows) truth.push_back(data.y[r]);
  const Eigen::MatrixXd x = data.X(idx, Eigen::all);
  return score_predictions(truth, probe.predict(x), data.n_classes(), metric);
}

namespace {

struct SelectionContext {
  std::vector<std::size_t> rows;
  std::vector<int> y;
  SingleNeuronTerms terms;
  Eigen::MatrixXd prior;  // rows x classes, log prior broadcast
};

SelectionContext make_context(const GaussianProbe& probe, const ProbeDataset& data) {
  SelectionContext ctx;
  ctx.rows = evaluation_rows(data);
  for (auto r : ctx.rows) ctx.y.push_back(data.y[r]);
  ctx.terms = single_neuron_terms(probe, data, ctx.rows);
  ctx.prior = Eigen::MatrixXd(static_cast<Eigen::Index>(ctx.rows.size()), probe.log_prior.size());
  ctx.prior.rowwise() = probe.log_prior.transpose();
  return ctx;
}

std::vector<double> standalone_scores(const SelectionContext& ctx, std::size_t n) {
  std::vector<double> ll(n);
  parallel_for(n, [&](std::size_t j) {
    ll[j] = conditional_log_likelihood(ctx.prior, ctx.terms, static_cast<Eigen::Index>(j), ctx.y);
  });
  return ll;
}

std::vector<SelectionStep> greedy(const GaussianProbe& probe, const SelectionContext& ctx, std::size_t k_max) {
  const std::size_t n = probe.neurons.size();
  k_max = std::min(k_max, n);
  Eigen::MatrixXd accumulated = ctx.prior;
  std::vector<bool> chosen(n, false);
  std::vector<double> candidate_ll(n);
  std::vector<SelectionStep> steps;
  for (std::size_t step = 0; step < k_max; ++step) {
    parallel_for(n, [&](std::size_t j) {
      candidate_ll[j] = chosen[j] ? -INFINITY
                                  : conditional_log_likelihood(accumulated, ctx.terms, static_cast<Eigen::Index>(j), ctx.y);
    });
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (chosen[j]) continue;
      if (best == n || candidate_ll[j] > candidate_ll[best] ||
          (candidate_ll[j] == candidate_ll[best] && probe.neurons[j] < probe.neurons[best])) {
        best = j;
      }
    }
    chosen[best] = true;
    for (Eigen::Index c = 0; c < accumulated.cols(); ++c) {
      accumulated.col(c) += ctx.terms.per_class[static_cast<std::size_t>(c)].col(static_cast<Eigen::Index>(best));
    }
    steps.push_back({probe.neurons[best], candidate_ll[best]});
  }
  return steps;
}

}  // namespace

std::vector<SelectionStep> greedy_selection(const GaussianProbe& probe, const ProbeDataset& data, std::size_t k_max) {
  return greedy(probe, make_context(probe, data), k_max);
}

NeuronRanking get_neuron_ordering(const GaussianProbe& probe, const ProbeDataset& data, std::size_t k_max) {
  const auto ctx = make_context(probe, data);
  const std::size_t n = probe.neurons.size();
  const std::size_t n_classes = probe.classes.size();

  const auto standalone = standalone_scores(ctx, n);

  // Class scores: average gain of log p(c | x_n) over log prior(c) on class-c rows.
  std::vector<std::vector<double>> class_scores(n_classes, std::vector<double>(n, 0.0));
  std::vector<double> class_rows(n_classes, 0.0);
  for (int label : ctx.y) class_rows[static_cast<std::size_t>(label)] += 1.0;
  parallel_for(n, [&](std::size_t j) {
    std::vector<double> joint(n_classes);
    std::vector<double> gain(n_classes, 0.0);
    for (std::size_t i = 0; i < ctx.rows.size(); ++i) {
      for (std::size_t c = 0; c < n_classes; ++c) {
        joint[c] = probe.log_prior(static_cast<Eigen::Index>(c)) +
                   ctx.terms.per_class[c](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      const auto label = static_cast<std::size_t>(ctx.y[i]);
      gain[label] += joint[label] - log_sum_exp(joint.data(), n_classes) - probe.log_prior(static_cast<Eigen::Index>(label));
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      class_scores[c][j] = class_rows[c] > 0 ? gain[c] / class_rows[c] : 0.0;
    }
  });

  auto ranking = make_ranking("gaussian",
                              {{"covariance", std::string(to_string(probe.covariance))},
                               {"ridge", probe.ridge},
                               {"k_max", k_max}},
                              probe.neurons, probe.classes, std::move(class_scores), standalone);

  const auto steps = greedy(probe, ctx, k_max);
  std::vector<int> order;
  std::vector<bool> placed(n, false);
  for (const auto& s : steps) {
    order.push_back(s.neuron);
    const auto col = static_cast<std::size_t>(std::find(probe.neurons.begin(), probe.neurons.end(), s.neuron) -
                                              probe.neurons.begin());
    placed[col] = true;
  }
  for (int id : ranking.global_order) {
    const auto col =
        static_cast<std::size_t>(std::find(probe.neurons.begin(), probe.neurons.end(), id) - probe.neurons.begin());
    if (!placed[col]) order.push_back(id);
  }
  ranking.global_order = std::move(order);
  return ranking;
}

}  // namespace gaussian
}  // namespace neuroscope
