#include <algorithm>
#include <set>

#include "neuroscope/error.hpp"
#include "neuroscope/methods.hpp"

namespace neuroscope {

namespace {

using nlohmann::json;

void reject_unknown_keys(std::string_view method, const json& params, const std::set<std::string>& known) {
  if (!params.is_object()) throw Error(ErrorKind::InvalidArgument, "method parameters must be a JSON object");
  for (const auto& [key, value] : params.items()) {
    if (!known.contains(key)) {
      std::string valid;
      for (const auto& k : known) valid += (valid.empty() ? "" : ", ") + k;
      throw Error(ErrorKind::InvalidArgument,
                  "unknown parameter '" + key + "' for " + std::string(method) + " (valid: " + valid + ")");
    }
  }
}

template <typename T>
T param_or(const json& params, const char* key, T fallback) {
  if (!params.contains(key)) return fallback;
  try {
    return params.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::InvalidArgument, std::string("parameter '") + key + "' has the wrong type");
  }
}

std::vector<int> rows_truth(const ProbeDataset& data, const std::vector<std::size_t>& rows) {
  std::vector<int> truth;
  truth.reserve(rows.size());
  for (auto r : rows) truth.push_back(data.y[r]);
  return truth;
}

Eigen::MatrixXd rows_of(const ProbeDataset& data, const std::vector<std::size_t>& rows) {
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  return data.X(idx, Eigen::all);
}

void require_same_neurons(const ProbeDataset& data, const std::vector<int>& neurons) {
  bool same = data.n_neurons() == neurons.size();
  for (std::size_t j = 0; same && j < neurons.size(); ++j) same = data.neuron_ids[j].flat == neurons[j];
  if (!same) throw Error(ErrorKind::MismatchedNeuronSets, "dataset columns differ from the ones the probe was built on");
}

/// Nearest class mean in standardized space; used by the corpus statistics methods.
double nearest_mean_score(const Eigen::MatrixXd& means, const ProbeDataset& data, Split split, Metric metric) {
  const auto rows = data.rows(split);
  const Eigen::MatrixXd x = rows_of(data, rows);
  std::vector<int> predicted(rows.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    (means.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
    predicted[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return score_predictions(rows_truth(data, rows), predicted, data.n_classes(), metric);
}

// ---------------------------------------------------------------------------

class LinearProbeHandle final : public Probe {
 public:
  LinearProbeHandle(LinearProbe probe, double tau) : probe_(std::move(probe)), tau_(tau) {}
  std::string_view method() const override { return "linear"; }
  Capabilities capabilities() const override { return {true, true, true}; }
  double evaluate_probe(const ProbeDataset& data, Split split, Metric metric) const override {
    require_same_neurons(data, probe_.neurons);
    return linear::evaluate(probe_, data, split, metric);
  }
  NeuronRanking get_neuron_ordering() const override { return linear::get_neuron_ordering(probe_, tau_); }

 private:
  LinearProbe probe_;
  double tau_;
};

class LinearMethod final : public Method {
 public:
  explicit LinearMethod(const json& params) {
    reject_unknown_keys("linear", params, {"l1", "l2", "epochs", "learning_rate", "batch_size", "seed", "tau"});
    options_.l1 = param_or(params, "l1", options_.l1);
    options_.l2 = param_or(params, "l2", options_.l2);
    options_.epochs = param_or(params, "epochs", options_.epochs);
    options_.learning_rate = param_or(params, "learning_rate", options_.learning_rate);
    options_.batch_size = param_or(params, "batch_size", options_.batch_size);
    options_.seed = param_or(params, "seed", options_.seed);
    tau_ = param_or(params, "tau", tau_);
  }
  std::string_view name() const override { return "linear"; }
  Capabilities capabilities() const override { return {true, true, true}; }
  std::unique_ptr<Probe> train_probe(const ProbeDataset& data) const override {
    return std::make_unique<LinearProbeHandle>(linear::train_probe(data, options_), tau_);
  }
  json params() const override {
    return {{"l1", options_.l1},         {"l2", options_.l2},
            {"epochs", options_.epochs}, {"learning_rate", options_.learning_rate},
            {"batch_size", options_.batch_size}, {"seed", options_.seed},
            {"tau", tau_}};
  }

 private:
  LinearOptions options_;
  double tau_ = 0.5;
};

// ---------------------------------------------------------------------------

class StoredDataProbe : public Probe {
 public:
  explicit StoredDataProbe(ProbeDataset data) : data_(std::move(data)) {}

 protected:
  std::vector<int> neuron_flat_ids() const {
    std::vector<int> ids;
    for (const auto& id : data_.neuron_ids) ids.push_back(id.flat);
    return ids;
  }
  ProbeDataset data_;
};

class ProbelessProbe final : public StoredDataProbe {
 public:
  using StoredDataProbe::StoredDataProbe;
  std::string_view method() const override { return "probeless"; }
  Capabilities capabilities() const override { return {true, false, false}; }
  double evaluate_probe(const ProbeDataset& data, Split split, Metric metric) const override {
    require_same_neurons(data, neuron_flat_ids());
    return nearest_mean_score(probeless::class_means(data_), data, split, metric);
  }
  NeuronRanking get_neuron_ordering() const override { return probeless::rank(data_); }
};

class MeanSelectProbe final : public StoredDataProbe {
 public:
  using StoredDataProbe::StoredDataProbe;
  std::string_view method() const override { return "meanselect"; }
  Capabilities capabilities() const override { return {true, false, false}; }
  double evaluate_probe(const ProbeDataset& data, Split split, Metric metric) const override {
    require_same_neurons(data, neuron_flat_ids());
    return nearest_mean_score(probeless::class_means(data_), data, split, metric);
  }
  NeuronRanking get_neuron_ordering() const override { return meanselect::rank(data_); }
};

class NoTrainingMethod final : public Method {
 public:
  explicit NoTrainingMethod(std::string name, const json& params) : name_(std::move(name)) {
    reject_unknown_keys(name_, params, {});
  }
  std::string_view name() const override { return name_; }
  Capabilities capabilities() const override { return {true, false, false}; }
  std::unique_ptr<Probe> train_probe(const ProbeDataset& data) const override {
    if (data.n_classes() < 2) throw Error(ErrorKind::InvalidArgument, name_ + " needs at least 2 classes");
    if (name_ == "probeless") return std::make_unique<ProbelessProbe>(data);
    return std::make_unique<MeanSelectProbe>(data);
  }
  json params() const override { return json::object(); }

 private:
  std::string name_;
};

// ---------------------------------------------------------------------------

class IouProbe final : public StoredDataProbe {
 public:
  IouProbe(ProbeDataset view, std::string target_label, double delta)
      : StoredDataProbe(std::move(view)), concept_(std::move(target_label)), delta_(delta) {
    masks_ = iou::compute(data_, concept_, delta_);
  }
  std::string_view method() const override { return "iou"; }
  Capabilities capabilities() const override { return {false, false, false}; }
  /// Predicts the concept wherever the best-scoring neuron's mask fires.
  double evaluate_probe(const ProbeDataset& data, Split split, Metric metric) const override {
    require_same_neurons(data, neuron_flat_ids());
    const auto view = select_binary_view(data, concept_);
    const auto ranking = get_neuron_ordering();
    const auto top = static_cast<Eigen::Index>(data_.column_of(ranking.global_order.front()));
    const auto rows = view.rows(split);
    std::vector<int> predicted;
    predicted.reserve(rows.size());
    for (auto r : rows) {
      predicted.push_back(view.X(static_cast<Eigen::Index>(r), top) > masks_.thresholds[static_cast<std::size_t>(top)]);
    }
    return score_predictions(rows_truth(view, rows), predicted, 2, metric);
  }
  NeuronRanking get_neuron_ordering() const override { return iou::rank(data_, concept_, delta_); }

 private:
  std::string concept_;
  double delta_;
  iou::NeuronMasks masks_;
};

class IouMethod final : public Method {
 public:
  explicit IouMethod(const json& params) {
    reject_unknown_keys("iou", params, {"concept", "delta"});
    concept_ = param_or<std::string>(params, "concept", "");
    delta_ = param_or(params, "delta", delta_);
    if (!(delta_ > 0.0 && delta_ < 1.0)) throw Error(ErrorKind::InvalidArgument, "delta must lie in (0, 1)");
  }
  std::string_view name() const override { return "iou"; }
  Capabilities capabilities() const override { return {false, false, false}; }
  std::unique_ptr<Probe> train_probe(const ProbeDataset& data) const override {
    std::string target_label = concept_;
    if (target_label.empty()) {
      if (data.n_classes() != 2) {
        throw Error(ErrorKind::InvalidArgument, "iou probes one concept at a time; pass a concept for multi-class labels");
      }
      target_label = data.vocab.label(1);
    }
    return std::make_unique<IouProbe>(select_binary_view(data, target_label), target_label, delta_);
  }
  json params() const override { return {{"concept", concept_}, {"delta", delta_}}; }

 private:
  std::string concept_;
  double delta_ = iou::kDefaultDelta;
};

// ---------------------------------------------------------------------------

class GaussianProbeHandle final : public StoredDataProbe {
 public:
  GaussianProbeHandle(ProbeDataset data, GaussianProbe probe, std::size_t k_max)
      : StoredDataProbe(std::move(data)), probe_(std::move(probe)), k_max_(k_max) {}
  std::string_view method() const override { return "gaussian"; }
  Capabilities capabilities() const override { return {true, true, true}; }
  double evaluate_probe(const ProbeDataset& data, Split split, Metric metric) const override {
    require_same_neurons(data, probe_.neurons);
    return gaussian::evaluate(probe_, data, split, metric);
  }
  NeuronRanking get_neuron_ordering() const override {
    return gaussian::get_neuron_ordering(probe_, data_, k_max_);
  }

 private:
  GaussianProbe probe_;
  std::size_t k_max_;
};

class GaussianMethod final : public Method {
 public:
  explicit GaussianMethod(const json& params) {
    reject_unknown_keys("gaussian", params, {"covariance", "ridge", "k_max"});
    options_.covariance = parse_covariance(param_or<std::string>(params, "covariance", "diagonal"));
    options_.ridge = param_or(params, "ridge", options_.ridge);
    options_.k_max = param_or(params, "k_max", options_.k_max);
  }
  std::string_view name() const override { return "gaussian"; }
  Capabilities capabilities() const override { return {true, true, true}; }
  std::unique_ptr<Probe> train_probe(const ProbeDataset& data) const override {
    auto probe = gaussian::train_probe(data, options_.covariance, options_.ridge);
    return std::make_unique<GaussianProbeHandle>(data, std::move(probe), options_.k_max);
  }
  json params() const override {
    return {{"covariance", std::string(to_string(options_.covariance))},
            {"ridge", options_.ridge},
            {"k_max", options_.k_max}};
  }

 private:
  GaussianOptions options_;
};

}  // namespace

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"linear", "probeless", "iou", "gaussian", "meanselect"};
  return names;
}

std::unique_ptr<Method> make_method(std::string_view name, const nlohmann::json& params) {
  if (name == "linear") return std::make_unique<LinearMethod>(params);
  if (name == "probeless" || name == "meanselect") return std::make_unique<NoTrainingMethod>(std::string(name), params);
  if (name == "iou") return std::make_unique<IouMethod>(params);
  if (name == "gaussian") return std::make_unique<GaussianMethod>(params);
  std::string valid;
  for (const auto& n : method_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + std::string(name) + "' (valid: " + valid + ")");
}

}  // namespace neuroscope
