#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "neuroscope/error.hpp"
#include "neuroscope/methods.hpp"

using namespace neuroscope;

namespace {

std::vector<std::uint32_t> one_per_sentence(std::size_t n) {
  std::vector<std::uint32_t> s(n);
  std::iota(s.begin(), s.end(), 0u);
  return s;
}

ProbeDataset train_only(const Eigen::MatrixXd& raw, std::vector<int> y, std::vector<std::string> labels) {
  DatasetOptions options;
  options.ratios = {1.0, 0.0, 0.0};
  const auto sentences = one_per_sentence(y.size());
  return build_dataset_from_matrix(raw, std::move(y), LabelVocab(std::move(labels)), sentences, options);
}

// Label = sign of `informative`, the other columns pure noise.
ProbeDataset planted_binary(std::size_t n, std::size_t neurons, std::size_t informative, double noise,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd raw = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(neurons),
                                                     [&] { return normal(rng); });
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(informative)) + noise * normal(rng) > 0;
  }
  DatasetOptions options;
  const auto sentences = one_per_sentence(n);
  return build_dataset_from_matrix(raw, y, LabelVocab({"neg", "pos"}), sentences, options);
}

std::size_t rank_of(const NeuronRanking& r, int id) {
  return static_cast<std::size_t>(std::find(r.global_order.begin(), r.global_order.end(), id) - r.global_order.begin());
}

}  // namespace

TEST_CASE("capabilities") {
  struct Row {
    const char* name;
    Capabilities caps;
  };
  const Row rows[] = {{"linear", {true, true, true}},
                      {"probeless", {true, false, false}},
                      {"iou", {false, false, false}},
                      {"gaussian", {true, true, true}},
                      {"meanselect", {true, false, false}}};
  for (const auto& row : rows) {
    const auto caps = make_method(row.name)->capabilities();
    CHECK(caps.multiclass == row.caps.multiclass);
    CHECK(caps.needs_training == row.caps.needs_training);
    CHECK(caps.layerwise == row.caps.layerwise);
  }
  CHECK(method_names().size() == 5);
}

TEST_CASE("method construction errors") {
  try {
    make_method("lasso");
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidArgument);
    CHECK(std::string(e.what()).find("probeless") != std::string::npos);
  }
  CHECK_THROWS_AS(make_method("linear", {{"lambda", 1}}), Error);
  CHECK_THROWS_AS(make_method("linear", {{"l1", "big"}}), Error);
  CHECK_THROWS_AS(make_method("iou", {{"delta", 1.5}}), Error);
  CHECK_THROWS_AS(make_method("gaussian", {{"covariance", "banded"}}), Error);
  CHECK(make_method("gaussian", {{"covariance", "full"}})->params()["covariance"] == "full");
}

TEST_CASE("metrics") {
  const std::vector<int> truth = {0, 0, 1, 1, 2};
  const std::vector<int> pred = {0, 1, 1, 1, 0};
  CHECK(score_predictions(truth, pred, 3, Metric::accuracy) == doctest::Approx(0.6));
  // Per-class F1: 0.5, 0.8, 0.
  CHECK(score_predictions(truth, pred, 3, Metric::macro_f1) == doctest::Approx((0.5 + 0.8) / 3));
  CHECK(parse_metric("f1") == Metric::macro_f1);
}

// ---------------------------------------------------------------------------

TEST_CASE("linear gradient matches finite differences") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::MatrixXd X = Eigen::MatrixXd::NullaryExpr(12, 4, [&] { return normal(rng); });
  const Eigen::MatrixXd W = Eigen::MatrixXd::NullaryExpr(3, 4, [&] { return normal(rng); });
  const Eigen::VectorXd b = Eigen::VectorXd::NullaryExpr(3, [&] { return normal(rng); });
  std::vector<int> y(12);
  for (auto& v : y) v = static_cast<int>(rng() % 3);
  const auto analytic = linear::objective(W, b, X, y, 0.05, 0.1);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      Eigen::MatrixXd wp = W, wm = W;
      wp(i, j) += h;
      wm(i, j) -= h;
      const double numeric =
          (linear::objective(wp, b, X, y, 0.05, 0.1).loss - linear::objective(wm, b, X, y, 0.05, 0.1).loss) / (2 * h);
      CHECK(numeric == doctest::Approx(analytic.grad_W(i, j)).epsilon(1e-5));
    }
  }
}

TEST_CASE("linear probe on separable data") {
  const auto data = planted_binary(10000, 10, 4, 0.0, 1);
  LinearOptions options;
  options.l1 = 0;
  options.l2 = 0;
  const auto probe = linear::train_probe(data, options);
  CHECK(linear::evaluate(probe, data, Split::train, Metric::accuracy) >= 0.99);
  CHECK(probe.epoch_loss.size() == 10);
  CHECK(probe.epoch_loss.back() < probe.epoch_loss.front());
  CHECK(linear::get_neuron_ordering(probe).global_order.front() == 4);
}

TEST_CASE("L1 shrinks the weights of noise neurons") {
  const auto data = planted_binary(2000, 10, 4, 0.3, 2);
  LinearOptions plain;
  plain.l1 = 0;
  plain.l2 = 0;
  LinearOptions sparse = plain;
  sparse.l1 = 1e-3;
  auto noise_mass = [](const LinearProbe& p) {
    double total = 0;
    for (Eigen::Index j = 0; j < p.W.cols(); ++j) {
      if (j != 4) total += p.W.col(j).cwiseAbs().sum();
    }
    return total;
  };
  CHECK(noise_mass(linear::train_probe(data, sparse)) < noise_mass(linear::train_probe(data, plain)));
}

TEST_CASE("constant inputs give the majority rate") {
  const std::size_t n = 1000;
  Eigen::MatrixXd raw = Eigen::MatrixXd::Constant(n, 3, 2.5);
  std::vector<int> y(n, 0);
  for (std::size_t i = 0; i < n; i += 4) y[i] = 1;
  const auto sentences = one_per_sentence(n);
  const auto data = build_dataset_from_matrix(raw, y, LabelVocab({"a", "b"}), sentences, {});
  const auto probe = linear::train_probe(data, {});
  CHECK(probe.W.cwiseAbs().maxCoeff() < 1e-6);
  std::size_t majority = 0;
  const auto test = data.rows(Split::test);
  for (auto r : test) majority += data.y[r] == 0;
  CHECK(linear::evaluate(probe, data, Split::test, Metric::accuracy) ==
        doctest::Approx(static_cast<double>(majority) / static_cast<double>(test.size())).epsilon(0.02));
}

TEST_CASE("linear ordering from weights") {
  LinearProbe probe;
  probe.W = Eigen::MatrixXd{{0.0, 5.0, 0.0}};
  probe.b = Eigen::VectorXd::Zero(1);
  probe.neurons = {0, 1, 2};
  probe.classes = {"c"};
  const auto one = linear::get_neuron_ordering(probe);
  CHECK(one.per_class_order[0] == std::vector<int>{1, 0, 2});
  CHECK(one.global_order == std::vector<int>{1, 0, 2});

  // Disjoint top neurons are both taken before anything second-tier.
  probe.W = Eigen::MatrixXd::Zero(2, 8);
  probe.W(0, 0) = 4.0;
  probe.W(0, 3) = 1.0;
  probe.W(1, 7) = -2.0;
  probe.W(1, 5) = 1.5;
  probe.b = Eigen::VectorXd::Zero(2);
  probe.neurons = {0, 1, 2, 3, 4, 5, 6, 7};
  probe.classes = {"a", "b"};
  const auto two = linear::get_neuron_ordering(probe, 10.0);
  CHECK(std::set<int>(two.global_order.begin(), two.global_order.begin() + 2) == std::set<int>{0, 7});
  CHECK(is_permutation_of(two.global_order, probe.neurons));
  CHECK_THROWS_AS(linear::get_neuron_ordering(probe, 0.0), Error);
}

TEST_CASE("linear ordering finds two planted neurons of fifty") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 4000;
  Eigen::MatrixXd raw = Eigen::MatrixXd::NullaryExpr(n, 50, [&] { return normal(rng); });
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = raw(static_cast<Eigen::Index>(i), 13) - raw(static_cast<Eigen::Index>(i), 31) + 0.3 * normal(rng) > 0;
  }
  const auto sentences = one_per_sentence(n);
  const auto data = build_dataset_from_matrix(raw, y, LabelVocab({"a", "b"}), sentences, {});
  const auto ranking = make_method("linear")->train_probe(data)->get_neuron_ordering();
  CHECK(rank_of(ranking, 13) < 5);
  CHECK(rank_of(ranking, 31) < 5);
}

// ---------------------------------------------------------------------------

TEST_CASE("probeless scores") {
  Eigen::MatrixXd raw(4, 2);
  raw << 1, 0, 1, 0, 0, 0, 0, 0;
  raw.col(1) << 0.5, -0.5, 0.5, -0.5;  // same mean in both classes
  const auto data = train_only(raw, {1, 1, 0, 0}, {"neg", "pos"});
  const auto r = probeless::rank(data);
  CHECK(r.global_order == std::vector<int>{0, 1});
  CHECK(r.scores[0][1] == doctest::Approx(0.0));
  CHECK(r.scores[1][0] == doctest::Approx(1.0 / data.standardizer.stddev(0)));

  Eigen::MatrixXd three(6, 1);
  three << 0, 0, 1, 1, 2, 2;
  const auto d3 = train_only(three, {0, 0, 1, 1, 2, 2}, {"a", "b", "c"});
  const auto r3 = probeless::rank(d3);
  const double sigma = d3.standardizer.stddev(0);
  CHECK(r3.scores[0][0] == doctest::Approx(3.0 / sigma));
  CHECK(r3.scores[1][0] == doctest::Approx(2.0 / sigma));
  CHECK(r3.scores[0][0] + r3.scores[1][0] + r3.scores[2][0] == doctest::Approx(2 * 4.0 / sigma));
}

TEST_CASE("probeless picks a symmetric mean shift") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 2000;
  Eigen::MatrixXd raw = Eigen::MatrixXd::NullaryExpr(n, 6, [&] { return normal(rng); });
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    raw(static_cast<Eigen::Index>(i), 0) += y[i] ? 1.0 : -1.0;
  }
  const auto data = train_only(raw, y, {"a", "b"});
  CHECK(probeless::rank(data).global_order.front() == 0);
  // Label-independent neurons stay within three standard errors of zero.
  const auto r = probeless::rank(data);
  const double stderr_diff = std::sqrt(2.0 / (n / 2.0));
  for (int j = 1; j < 6; ++j) CHECK(r.scores[0][static_cast<std::size_t>(j)] < 3 * stderr_diff * 1.2);
}

// ---------------------------------------------------------------------------

TEST_CASE("IoU set arithmetic") {
  const std::size_t n = 200;
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(n, 3);
  std::vector<int> y(n, 0);
  for (std::size_t i = 0; i < 10; ++i) raw(static_cast<Eigen::Index>(i), 0) = 1.0;  // rows 0..9
  for (std::size_t i = 5; i < 15; ++i) y[i] = 1;                                     // rows 5..14
  for (std::size_t i = 5; i < 15; ++i) raw(static_cast<Eigen::Index>(i), 1) = 2.0;  // exactly the concept
  for (std::size_t i = 100; i < 110; ++i) raw(static_cast<Eigen::Index>(i), 2) = 1.0;  // disjoint
  const auto data = train_only(raw, y, {"other", "C"});
  const auto masks = iou::compute(data, "C", 10.0 / 200.0);
  CHECK(masks.scores[0] == doctest::Approx(1.0 / 3.0));
  CHECK(masks.scores[1] == doctest::Approx(1.0));
  CHECK(masks.scores[2] == doctest::Approx(0.0));
  CHECK(iou::rank(data, "C", 0.05).global_order == std::vector<int>{1, 0, 2});
}

TEST_CASE("IoU quantile interpolates") {
  CHECK(iou::quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(iou::quantile({5, 1, 3}, 1.0) == 5);
  CHECK(iou::quantile({5, 1, 3}, 0.0) == 1);
}

TEST_CASE("IoU needs a concept with train tokens") {
  Eigen::MatrixXd raw = Eigen::MatrixXd::Random(10, 2);
  const auto data = train_only(raw, {0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, {"x", "y"});
  try {
    iou::compute(select_binary_view(data, "x").with_labels(std::vector<int>(10, 0), LabelVocab({"a", "b"})), "b",
                 0.05);
    FAIL("expected DegenerateConcept");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateConcept);
  }
  const Eigen::MatrixXd r3 = Eigen::MatrixXd::Random(9, 2);
  const auto multi = train_only(r3, {0, 0, 0, 1, 1, 1, 2, 2, 2}, {"a", "b", "c"});
  CHECK_THROWS_AS(make_method("iou")->train_probe(multi), Error);
  CHECK(make_method("iou", {{"concept", "b"}})->train_probe(multi)->get_neuron_ordering().size() == 2);
}

// ---------------------------------------------------------------------------

TEST_CASE("gaussian probe separates shifted classes") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 1000;
  Eigen::MatrixXd raw(n, 1);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    raw(static_cast<Eigen::Index>(i), 0) = normal(rng) + 5.0 * y[i];
  }
  const auto sentences = one_per_sentence(n);
  const auto data = build_dataset_from_matrix(raw, y, LabelVocab({"a", "b"}), sentences, {});
  for (auto cov : {Covariance::diagonal, Covariance::full}) {
    const auto probe = gaussian::train_probe(data, cov, 1e-3);
    CHECK(gaussian::evaluate(probe, data, Split::test, Metric::accuracy) >= 0.98);
  }
}

TEST_CASE("gaussian probe on indistinguishable classes") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 2000;
  Eigen::MatrixXd raw = Eigen::MatrixXd::NullaryExpr(n, 2, [&] { return normal(rng); });
  std::vector<int> y(n, 0);
  for (std::size_t i = 0; i < n; i += 3) y[i] = 1;
  const auto sentences = one_per_sentence(n);
  const auto data = build_dataset_from_matrix(raw, y, LabelVocab({"a", "b"}), sentences, {});
  const auto probe = gaussian::train_probe(data, Covariance::diagonal, 1e-3);
  std::size_t majority = 0;
  const auto test = data.rows(Split::test);
  for (auto r : test) majority += data.y[r] == 0;
  CHECK(std::fabs(gaussian::evaluate(probe, data, Split::test, Metric::accuracy) -
                  static_cast<double>(majority) / static_cast<double>(test.size())) <= 0.05);
}

TEST_CASE("gaussian selection") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 3000;
  Eigen::MatrixXd raw = Eigen::MatrixXd::NullaryExpr(n, 10, [&] { return normal(rng); });
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    raw(static_cast<Eigen::Index>(i), 6) += 2.0 * y[i];
  }
  const auto sentences = one_per_sentence(n);
  const auto data = build_dataset_from_matrix(raw, y, LabelVocab({"a", "b"}), sentences, {});
  const auto probe = gaussian::train_probe(data, Covariance::diagonal, 1e-3);
  CHECK(gaussian::get_neuron_ordering(probe, data, 5).global_order.front() == 6);

  // k_max = 0 leaves the standalone order, which agrees with the first greedy step.
  const auto standalone = gaussian::get_neuron_ordering(probe, data, 0);
  CHECK(standalone.global_order.front() == 6);
  CHECK(is_permutation_of(standalone.global_order, standalone.neurons));

  // A duplicated informative column adds nothing once its twin is selected.
  Eigen::MatrixXd twin(n, 11);
  twin << raw, raw.col(6);
  const auto twin_data = build_dataset_from_matrix(twin, y, LabelVocab({"a", "b"}), sentences, {});
  const auto twin_probe = gaussian::train_probe(twin_data, Covariance::diagonal, 1e-3);
  const auto steps = gaussian::greedy_selection(twin_probe, twin_data, 3);
  REQUIRE(steps.size() == 3);
  CHECK((steps[0].neuron == 6 || steps[0].neuron == 10));
  CHECK(steps[1].neuron != 6);
  CHECK(steps[1].neuron != 10);
}

TEST_CASE("gaussian full covariance needs a positive definite estimate") {
  Eigen::MatrixXd raw = Eigen::MatrixXd::Random(40, 2);
  raw.col(1) = raw.col(0);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = static_cast<int>(i % 2);
  const auto data = train_only(raw, y, {"a", "b"});
  try {
    gaussian::train_probe(data, Covariance::full, 0.0);
    FAIL("expected SingularCovariance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularCovariance);
  }
  CHECK_NOTHROW(gaussian::train_probe(data, Covariance::full, 1e-3));
}

// ---------------------------------------------------------------------------

TEST_CASE("mean select scores") {
  Eigen::MatrixXd raw(4, 2);
  raw << 2, 1, 2, -1, -2, 1, -2, -1;
  const auto data = train_only(raw, {1, 1, 0, 0}, {"rest", "C"});
  // Already mean 0 and unit variance, so standardization is the identity.
  const auto r = meanselect::rank(data);
  CHECK(r.scores[1][0] == doctest::Approx(1.0));
  CHECK(r.scores[1][1] == doctest::Approx(0.0));
  CHECK(r.global_order == std::vector<int>{0, 1});
}

TEST_CASE("rankings are invariant to positive rescaling of raw neurons") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 1500;
  Eigen::MatrixXd raw = Eigen::MatrixXd::NullaryExpr(n, 8, [&] { return normal(rng); });
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 3);
    raw(static_cast<Eigen::Index>(i), 2) += 0.8 * y[i];
    raw(static_cast<Eigen::Index>(i), 5) -= 0.5 * (y[i] == 1);
  }
  Eigen::MatrixXd scaled = raw;
  for (Eigen::Index j = 0; j < 8; ++j) scaled.col(j) = scaled.col(j) * (0.5 + static_cast<double>(j)) + Eigen::VectorXd::Constant(n, 3.0 * j);
  const auto sentences = one_per_sentence(n);
  const auto a = build_dataset_from_matrix(raw, y, LabelVocab({"x", "y", "z"}), sentences, {});
  const auto b = build_dataset_from_matrix(scaled, y, LabelVocab({"x", "y", "z"}), sentences, {});
  for (const auto& name : {"probeless", "meanselect", "gaussian", "linear"}) {
    const auto ra = make_method(name)->train_probe(a)->get_neuron_ordering();
    const auto rb = make_method(name)->train_probe(b)->get_neuron_ordering();
    CHECK_MESSAGE(std::equal(ra.global_order.begin(), ra.global_order.begin() + 3, rb.global_order.begin()), name);
  }
  const auto ia = make_method("iou", {{"concept", "y"}})->train_probe(a)->get_neuron_ordering();
  const auto ib = make_method("iou", {{"concept", "y"}})->train_probe(b)->get_neuron_ordering();
  CHECK(ia.global_order == ib.global_order);
}

TEST_CASE("uniform probe interface") {
  const auto data = planted_binary(1500, 6, 2, 0.2, 11);
  for (const auto& name : method_names()) {
    const auto probe = make_method(name)->train_probe(data);
    CHECK(probe->method() == name);
    const auto ranking = probe->get_neuron_ordering();
    CHECK(ranking.method == name);
    CHECK(ranking.global_order.front() == 2);
    CHECK(is_permutation_of(ranking.global_order, ranking.neurons));
    // The IoU probe predicts from a single top-5% mask, so its accuracy is not comparable.
    const double acc = probe->evaluate_probe(data);
    if (name == "iou") CHECK(acc > 0.5);
    else CHECK_MESSAGE(acc > 0.75, name);
    const std::vector<int> fewer = {0, 1, 2};
    CHECK_THROWS_AS(probe->evaluate_probe(data.select_neurons(fewer)), Error);
  }
}
