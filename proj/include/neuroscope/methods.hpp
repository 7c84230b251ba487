#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "neuroscope/dataset.hpp"
#include "neuroscope/ranking.hpp"

namespace neuroscope {

/// What an interpretation method supports.
struct Capabilities {
  bool multiclass = false;      // probes several concepts at once
  bool needs_training = false;  // fits a classifier before ranking
  bool layerwise = false;       // can probe a whole layer as a representation
};

enum class Metric { accuracy, macro_f1 };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view text);

double score_predictions(std::span<const int> truth, std::span<const int> predicted, std::size_t n_classes,
                         Metric metric);

// ---------------------------------------------------------------------------
// Linear probe: softmax regression with an elastic-net penalty.

struct LinearOptions {
  double l1 = 1e-5;
  double l2 = 1e-5;
  int epochs = 10;
  double learning_rate = 1e-2;
  std::size_t batch_size = 128;
  std::uint64_t seed = 42;
};

struct LinearProbe {
  Eigen::MatrixXd W;  // n_classes x n_neurons
  Eigen::VectorXd b;
  double l1 = 0.0;
  double l2 = 0.0;
  std::vector<double> epoch_loss;  // mean regularized mini-batch loss per epoch
  std::vector<int> neurons;
  std::vector<std::string> classes;

  Eigen::MatrixXd logits(const Eigen::MatrixXd& X) const;
  std::vector<int> predict(const Eigen::MatrixXd& X) const;
};

namespace linear {

struct Objective {
  double loss = 0.0;
  Eigen::MatrixXd grad_W;
  Eigen::VectorXd grad_b;
};

/// Mean cross-entropy over the rows of X plus l1*sum|W| + l2*sum W^2, and its
/// gradient. The L1 subgradient at exactly zero is zero.
Objective objective(const Eigen::MatrixXd& W, const Eigen::VectorXd& b, const Eigen::MatrixXd& X,
                    std::span<const int> y, double l1, double l2);

/// Mini-batch SGD on the train split from zero-initialized weights. Throws
/// Diverged when the loss becomes non-finite.
LinearProbe train_probe(const ProbeDataset& data, const LinearOptions& options);

double evaluate(const LinearProbe& probe, const ProbeDataset& data, Split split, Metric metric);

/// Per-class score |W[c,n]| / max_n |W[c,n]|. The global order sweeps
/// p = tau, 2 tau, ..., 100 percent, appending each class's not yet seen
/// top-p% neurons in descending score order.
NeuronRanking get_neuron_ordering(const LinearProbe& probe, double tau_percent = 0.5);

}  // namespace linear

// ---------------------------------------------------------------------------
// Probeless: accumulated pairwise differences of class means.

namespace probeless {

/// Class means over the train split, n_classes x n_neurons.
Eigen::MatrixXd class_means(const ProbeDataset& data);

/// Global score sum over class pairs |mu_c - mu_c'|; class score sum over c' != c.
NeuronRanking rank(const ProbeDataset& data);

}  // namespace probeless

// ---------------------------------------------------------------------------
// IoU probe: overlap of a neuron's high-activation mask with the concept mask.

namespace iou {

inline constexpr double kDefaultDelta = 0.05;

/// Linear-interpolation quantile (numpy's default) of `values`, q in [0,1].
double quantile(std::vector<double> values, double q);

struct NeuronMasks {
  std::vector<double> thresholds;  // per neuron, (1 - delta)-quantile over train
  std::vector<double> scores;      // per neuron IoU in [0, 1]
};

/// Thresholds and IoU scores on the train split. Throws DegenerateConcept
/// when the concept has no train tokens.
NeuronMasks compute(const ProbeDataset& data, std::string_view target_label, double delta);

NeuronRanking rank(const ProbeDataset& data, std::string_view target_label, double delta = kDefaultDelta);

}  // namespace iou

// ---------------------------------------------------------------------------
// Gaussian probe: class-conditional Gaussians with a greedy neuron search.

enum class Covariance { diagonal, full };

std::string_view to_string(Covariance covariance);
Covariance parse_covariance(std::string_view text);

struct GaussianOptions {
  Covariance covariance = Covariance::diagonal;
  double ridge = 1e-3;
  std::size_t k_max = 50;
};

struct GaussianProbe {
  Covariance covariance = Covariance::diagonal;
  double ridge = 0.0;
  Eigen::VectorXd log_prior;           // n_classes
  Eigen::MatrixXd means;               // n_classes x n_neurons
  Eigen::MatrixXd variances;           // n_classes x n_neurons, ridge included
  std::vector<Eigen::MatrixXd> chol;   // full only: lower Cholesky factor per class
  Eigen::VectorXd log_det;             // full only
  std::vector<int> neurons;
  std::vector<std::string> classes;

  /// n x n_classes matrix of log prior + log density.
  Eigen::MatrixXd log_joint(const Eigen::MatrixXd& X) const;
  std::vector<int> predict(const Eigen::MatrixXd& X) const;
};

namespace gaussian {

/// Throws ClassTooSmall when a class has fewer than 2 train samples and
/// SingularCovariance when a full covariance is not positive definite after the ridge.
GaussianProbe train_probe(const ProbeDataset& data, Covariance covariance, double ridge);

double evaluate(const GaussianProbe& probe, const ProbeDataset& data, Split split, Metric metric);

struct SelectionStep {
  int neuron = 0;                   // flat id added at this step
  double dev_log_likelihood = 0.0;  // sum over dev of log p(y | selected) after adding it
};

/// Greedy forward selection on the dev split (train when dev is empty) with
/// diagonal covariances.
std::vector<SelectionStep> greedy_selection(const GaussianProbe& probe, const ProbeDataset& data,
                                            std::size_t k_max);

/// Greedy order for the first k_max neurons, the rest by standalone dev
/// log-likelihood. Class scores: mean log p(c | x_n) - log prior(c) over the
/// dev samples of class c.
NeuronRanking get_neuron_ordering(const GaussianProbe& probe, const ProbeDataset& data, std::size_t k_max);

}  // namespace gaussian

// ---------------------------------------------------------------------------
// Mean select: standardized distance of concept means from the corpus mean.

namespace meanselect {

/// Class score |mu_C - mu| / sigma over the train split; global = max over classes.
NeuronRanking rank(const ProbeDataset& data);

}  // namespace meanselect

// ---------------------------------------------------------------------------
// Uniform probe API.

class Probe {
 public:
  virtual ~Probe() = default;
  virtual std::string_view method() const = 0;
  virtual Capabilities capabilities() const = 0;
  virtual double evaluate_probe(const ProbeDataset& data, Split split = Split::test,
                                Metric metric = Metric::accuracy) const = 0;
  virtual NeuronRanking get_neuron_ordering() const = 0;
};

class Method {
 public:
  virtual ~Method() = default;
  virtual std::string_view name() const = 0;
  virtual Capabilities capabilities() const = 0;
  /// Methods that need no training record what they need for ranking here.
  virtual std::unique_ptr<Probe> train_probe(const ProbeDataset& data) const = 0;
  virtual nlohmann::json params() const = 0;
};

/// Known names: linear, probeless, iou, gaussian, meanselect. Unknown
/// names throw InvalidArgument listing the valid ones.
std::unique_ptr<Method> make_method(std::string_view name, const nlohmann::json& params = nlohmann::json::object());

const std::vector<std::string>& method_names();

}  // namespace neuroscope
