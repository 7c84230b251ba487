#include "neuroscope/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "neuroscope/error.hpp"
#include "neuroscope/json_util.hpp"

namespace neuroscope {

using nlohmann::json;

std::vector<int> NeuronRanking::top(std::size_t k) const {
  k = std::min(k, global_order.size());
  return {global_order.begin(), global_order.begin() + static_cast<std::ptrdiff_t>(k)};
}

std::vector<int> NeuronRanking::bottom(std::size_t k) const {
  k = std::min(k, global_order.size());
  return {global_order.end() - static_cast<std::ptrdiff_t>(k), global_order.end()};
}

std::vector<int> order_by_score(std::span<const double> scores, std::span<const int> ids) {
  std::vector<std::size_t> idx(ids.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double sa = std::isnan(scores[a]) ? -INFINITY : scores[a];
    const double sb = std::isnan(scores[b]) ? -INFINITY : scores[b];
    if (sa != sb) return sa > sb;
    return ids[a] < ids[b];
  });
  std::vector<int> out(ids.size());
  std::transform(idx.begin(), idx.end(), out.begin(), [&](std::size_t i) { return ids[i]; });
  return out;
}

NeuronRanking make_ranking(std::string method, json params, std::vector<int> neurons,
                           std::vector<std::string> classes, std::vector<std::vector<double>> scores,
                           std::span<const double> global_scores) {
  NeuronRanking r;
  r.method = std::move(method);
  r.params = std::move(params);
  r.neurons = std::move(neurons);
  r.classes = std::move(classes);
  r.scores = std::move(scores);
  for (const auto& s : r.scores) r.per_class_order.push_back(order_by_score(s, r.neurons));
  r.global_order = order_by_score(global_scores, r.neurons);
  return r;
}

bool is_permutation_of(std::span<const int> order, std::span<const int> ids) {
  if (order.size() != ids.size()) return false;
  std::unordered_set<int> expected(ids.begin(), ids.end());
  std::unordered_set<int> seen;
  for (int id : order) {
    if (!expected.contains(id) || !seen.insert(id).second) return false;
  }
  return true;
}

json to_json(const NeuronRanking& ranking) {
  json doc;
  doc["method"] = ranking.method;
  doc["params"] = ranking.params;
  doc["neurons"] = ranking.neurons;
  doc["global"] = ranking.global_order;
  doc["classes"] = ranking.classes;
  json per_class = json::object();
  json scores = json::object();
  for (std::size_t c = 0; c < ranking.classes.size(); ++c) {
    per_class[ranking.classes[c]] = ranking.per_class_order[c];
    scores[ranking.classes[c]] = rounded(ranking.scores[c]);
  }
  doc["per_class"] = std::move(per_class);
  doc["scores"] = std::move(scores);
  return doc;
}

NeuronRanking ranking_from_json(const json& doc) {
  try {
    NeuronRanking r;
    r.method = doc.at("method").get<std::string>();
    r.params = doc.value("params", json::object());
    r.global_order = doc.at("global").get<std::vector<int>>();
    r.neurons = doc.contains("neurons") ? doc.at("neurons").get<std::vector<int>>() : r.global_order;
    if (doc.contains("classes")) {
      r.classes = doc.at("classes").get<std::vector<std::string>>();
    } else {
      for (const auto& [label, _] : doc.at("per_class").items()) r.classes.push_back(label);
    }
    for (const auto& label : r.classes) {
      r.per_class_order.push_back(doc.at("per_class").at(label).get<std::vector<int>>());
      std::vector<double> s;
      for (const auto& v : doc.at("scores").at(label)) s.push_back(v.is_null() ? NAN : v.get<double>());
      r.scores.push_back(std::move(s));
    }
    if (!is_permutation_of(r.global_order, r.neurons)) {
      throw Error(ErrorKind::MalformedFile, "global order is not a permutation of the neuron set");
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedFile, std::string("ranking file: ") + e.what());
  }
}

void write_ranking(const NeuronRanking& ranking, const std::filesystem::path& path) {
  write_json_file(path, to_json(ranking));
}

NeuronRanking read_ranking(const std::filesystem::path& path) {
  try {
    return ranking_from_json(read_json_file(path));
  } catch (const Error& e) {
    if (e.locator().empty()) throw Error(e.kind(), e.message(), path.string());
    throw;
  }
}

}  // namespace neuroscope
