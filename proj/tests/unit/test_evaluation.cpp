#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "neuroscope/evaluation.hpp"
#include "oracles.hpp"

using namespace neuroscope;

namespace {

NeuronRanking from_order(std::string method, std::vector<int> order) {
  NeuronRanking r;
  r.method = std::move(method);
  r.neurons = order;
  std::sort(r.neurons.begin(), r.neurons.end());
  r.global_order = std::move(order);
  return r;
}

struct Planted {
  ProbeDataset task;
  ProbeDataset control;
};

// Label = sign of neuron 0 + neuron 1, six noise neurons.
Planted small_planted(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 3000;
  Eigen::MatrixXd raw = Eigen::MatrixXd::NullaryExpr(n, 8, [&] { return normal(rng); });
  std::vector<int> y(n), control(n);
  std::vector<std::uint32_t> sentence_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = raw(static_cast<Eigen::Index>(i), 0) + raw(static_cast<Eigen::Index>(i), 1) > 0;
    control[i] = static_cast<int>(rng() % 2);
    sentence_of[i] = static_cast<std::uint32_t>(i / 5);
  }
  auto task = build_dataset_from_matrix(raw, y, LabelVocab({"a", "b"}), sentence_of, {});
  auto ctrl = task.with_labels(control, LabelVocab({"a", "b"}));
  return {std::move(task), std::move(ctrl)};
}

}  // namespace

TEST_CASE("average overlap") {
  const std::vector<int> a = {1, 2, 3, 4};
  const std::vector<int> b = {3, 4, 1, 2};
  CHECK(average_overlap(a, b, 4) == 5.0 / 12.0);
  CHECK(average_overlap(a, a, 4) == 1.0);
  const std::vector<int> c = {1, 2, 3, 4, 5, 6};
  const std::vector<int> d = {4, 5, 6, 1, 2, 3};
  CHECK(average_overlap(c, d, 3) == 0.0);
  const std::vector<int> e = {1, 2, 9};
  CHECK_THROWS_AS(average_overlap(a, e, 3), Error);
  CHECK_THROWS_AS(average_overlap(a, b, 5), Error);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> p(25), q(25);
    std::iota(p.begin(), p.end(), 100);
    std::iota(q.begin(), q.end(), 100);
    std::shuffle(p.begin(), p.end(), rng);
    std::shuffle(q.begin(), q.end(), rng);
    const std::size_t depth = 1 + rng() % 25;
    CHECK(average_overlap(p, q, depth) == doctest::Approx(oracle::average_overlap(p, q, depth)).epsilon(1e-12));
  }
  CHECK(default_depth(30) == 30);
  CHECK(default_depth(3000) == 100);
}

TEST_CASE("borda consensus") {
  const std::vector<std::vector<int>> orders = {{0, 1, 2}, {1, 0, 2}, {0, 2, 1}};
  CHECK(borda_consensus(orders) == std::vector<int>{0, 1, 2});
  const std::vector<std::vector<int>> tied = {{2, 1}, {1, 2}};
  CHECK(borda_consensus(tied) == std::vector<int>{1, 2});
}

TEST_CASE("neuron vote") {
  std::vector<int> order(10);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> reversed(order.rbegin(), order.rend());
  const std::vector<NeuronRanking> three = {from_order("a", order), from_order("b", order),
                                            from_order("c", reversed)};
  const auto votes = neuron_vote(three, 5);
  CHECK(votes[0] > votes[2]);
  CHECK(votes[1] > votes[2]);

  std::vector<int> shuffled = order;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
  const std::vector<NeuronRanking> two = {from_order("a", order), from_order("b", shuffled)};
  const auto pair = neuron_vote(two, 6);
  CHECK(pair[0] == doctest::Approx(average_overlap(order, shuffled, 6)));
  CHECK(pair[1] == doctest::Approx(average_overlap(shuffled, order, 6)));

  const std::vector<NeuronRanking> same = {from_order("a", order), from_order("b", order), from_order("c", order)};
  const auto report = compatibility(same, 10);
  for (double v : report.neuron_vote) CHECK(v == 1.0);
  CHECK(to_csv(report).rfind("method,a,b,c,neuron_vote\n", 0) == 0);
  CHECK(to_json(report)["depth"] == 10);
}

TEST_CASE("selected accuracy") {
  const auto data = small_planted(1);
  std::vector<int> good = {0, 1, 2, 3, 4, 5, 6, 7};
  const auto ranking = from_order("good", good);
  const auto all = selected_accuracy(data.task, ranking, 8);
  CHECK(all.delta == 0.0);
  CHECK(all.selected == all.oracle);
  const auto top = selected_accuracy(data.task, ranking, 2);
  CHECK(top.delta <= 0.02);
  CHECK(top.neurons == std::vector<int>{0, 1});
  std::vector<int> bad(good.rbegin(), good.rend());
  const auto bottom = selected_accuracy(data.task, from_order("bad", bad), 2);
  CHECK(bottom.selected < 0.6);
  CHECK_THROWS_AS(selected_accuracy(data.task, ranking, 0), Error);
  CHECK_THROWS_AS(selected_accuracy(data.task, ranking, 9), Error);
}

TEST_CASE("selectivity") {
  const auto data = small_planted(2);
  const auto ranking = from_order("r", {0, 1, 2, 3, 4, 5, 6, 7});
  const auto s = selectivity(data.task, data.control, ranking, 2);
  CHECK(s.selectivity > 0.2);
  CHECK(s.selectivity == doctest::Approx(s.task - s.control));
  CHECK(selectivity(data.task, data.task, ranking, 2).selectivity == 0.0);
}

TEST_CASE("ablation") {
  const auto data = small_planted(3);
  const auto ranking = from_order("r", {0, 1, 2, 3, 4, 5, 6, 7});
  const auto probe = linear::train_probe(data.task, {});
  const std::vector<std::size_t> ks = {2, 8};
  const auto top = ablation_curve(data.task, probe, ranking, ks, AblationMode::keep_top);
  CHECK(top.scores[1] == doctest::Approx(linear::evaluate(probe, data.task, Split::test, Metric::accuracy)));
  CHECK(top.scores[0] >= top.scores[1] - 0.03);
  const std::vector<std::size_t> six = {6};
  const auto bottom = ablation_curve(data.task, probe, ranking, six, AblationMode::keep_bottom);
  CHECK(bottom.scores[0] < 0.6);
  const auto r1 = ablation_curve(data.task, probe, ranking, ks, AblationMode::keep_random, 5);
  const auto r2 = ablation_curve(data.task, probe, ranking, ks, AblationMode::keep_random, 5);
  CHECK(r1.scores == r2.scores);
  CHECK(default_ablation_ks(10) == std::vector<std::size_t>{1, 2, 4, 8, 10});
  CHECK(default_ablation_ks(8) == std::vector<std::size_t>{1, 2, 4, 8});
  CHECK(parse_ablation_mode("keep_bottom") == AblationMode::keep_bottom);
}

TEST_CASE("mutual information") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 10000;
  Eigen::MatrixXd raw = Eigen::MatrixXd::NullaryExpr(n, 3, [&] { return normal(rng); });
  raw.col(2) = raw.col(0);
  std::vector<double> col(raw.col(0).data(), raw.col(0).data() + n);
  const double median = oracle::quantile(col, 0.5);
  std::vector<int> y(n);
  std::vector<std::uint32_t> sentence_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = raw(static_cast<Eigen::Index>(i), 0) > median;
    sentence_of[i] = static_cast<std::uint32_t>(i);
  }
  DatasetOptions options;
  options.ratios = {1.0, 0.0, 0.0};
  const auto data = build_dataset_from_matrix(raw, y, LabelVocab({"lo", "hi"}), sentence_of, options);
  const std::vector<int> informative = {0};
  const std::vector<int> noise = {1};
  const std::vector<int> with_twin = {0, 2};
  const double one = mutual_information(data, informative, 2);
  CHECK(one >= 0.95);
  CHECK(one <= 1.0);
  CHECK(mutual_information(data, noise, 16) <= 0.02);
  CHECK(mutual_information_baseline(data, informative, 16) <= 0.02);
  CHECK(mutual_information(data, with_twin, 2) == doctest::Approx(one).epsilon(1e-6));
  CHECK(mutual_information_sum(data, with_twin, 2) == doctest::Approx(2 * one));
  const std::vector<int> too_many = {0, 1, 2, 0};
  CHECK_THROWS_AS(mutual_information(data, too_many, 2), Error);
}
