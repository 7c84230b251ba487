#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "neuroscope/activation_store.hpp"
#include "neuroscope/analysis.hpp"
#include "neuroscope/annotate.hpp"
#include "neuroscope/corpus_align.hpp"
#include "neuroscope/dataset.hpp"
#include "neuroscope/error.hpp"
#include "neuroscope/evaluation.hpp"
#include "neuroscope/half.hpp"
#include "neuroscope/methods.hpp"
#include "neuroscope/parallel.hpp"
#include "neuroscope/ranking.hpp"
#include "neuroscope/redundancy.hpp"

namespace py = pybind11;
namespace ns = neuroscope;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

ns::ActivationSet to_activation_set(const std::vector<std::pair<std::vector<std::string>, FloatArray>>& sentences,
                                    ns::Precision precision) {
  ns::ActivationSet acts;
  acts.precision = precision;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& [tokens, values] = sentences[s];
    if (values.ndim() != 3) throw ns::Error(ns::ErrorKind::InconsistentShape, "expected (layers, tokens, width)");
    ns::SentenceActivations sa;
    sa.sentence_index = s;
    sa.tokens = tokens;
    sa.layer_count = static_cast<std::size_t>(values.shape(0));
    sa.layer_width = static_cast<std::size_t>(values.shape(2));
    if (static_cast<std::size_t>(values.shape(1)) != tokens.size()) {
      throw ns::Error(ns::ErrorKind::InconsistentShape, "token count differs from the array's second axis",
                      "sentence " + std::to_string(s));
    }
    sa.values.assign(values.data(), values.data() + values.size());
    acts.layer_count = sa.layer_count;
    acts.layer_width = sa.layer_width;
    acts.sentences.push_back(std::move(sa));
  }
  ns::check_activation_set(acts);
  return acts;
}

py::list from_activation_set(const ns::ActivationSet& acts) {
  py::list out;
  for (const auto& s : acts.sentences) {
    FloatArray values({s.layer_count, s.token_count(), s.layer_width});
    std::copy(s.values.begin(), s.values.end(), values.mutable_data());
    out.append(py::make_tuple(s.tokens, values));
  }
  return out;
}

ns::ProbeDataset make_dataset(const Eigen::MatrixXd& X, std::vector<int> y, const std::vector<std::string>& labels,
                              std::optional<std::vector<std::uint32_t>> sentence_of, std::vector<double> split,
                              bool balance, std::uint64_t seed, std::size_t layer_width) {
  if (split.size() != 3) throw ns::Error(ns::ErrorKind::InvalidArgument, "split needs three ratios");
  std::vector<std::uint32_t> sentences;
  if (sentence_of) {
    sentences = *sentence_of;
  } else {
    sentences.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) sentences[i] = static_cast<std::uint32_t>(i);
  }
  ns::DatasetOptions options;
  options.ratios = {split[0], split[1], split[2]};
  options.balance = balance;
  options.seed = seed;
  return ns::build_dataset_from_matrix(X, std::move(y), ns::LabelVocab(labels), sentences, options, layer_width);
}

std::string ranking_text(const ns::NeuronRanking& ranking) { return ns::to_json(ranking).dump(); }

std::vector<ns::NeuronRanking> rankings_from_orders(const std::vector<std::vector<int>>& orders) {
  std::vector<ns::NeuronRanking> out;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    ns::NeuronRanking r;
    r.method = "ranking" + std::to_string(i);
    r.neurons = orders[i];
    r.global_order = orders[i];
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_neuroscope, m) {
  m.doc() = "Neuron interpretation toolkit core";

  py::register_exception<ns::Error>(m, "NeuroscopeError", PyExc_RuntimeError);

  m.def("error_kinds", [] {
    std::vector<std::string> kinds;
    for (int k = 0; k <= static_cast<int>(ns::ErrorKind::InvalidArgument); ++k) {
      kinds.emplace_back(ns::to_string(static_cast<ns::ErrorKind>(k)));
    }
    return kinds;
  });

  m.def("set_jobs", &ns::set_default_jobs, py::arg("jobs"));

  // Activation files
  m.def(
      "read_activations",
      [](const std::filesystem::path& path) {
        ns::ActivationSet acts;
        {
          py::gil_scoped_release release;
          acts = ns::read_activations(path);
        }
        return py::make_tuple(from_activation_set(acts), std::string(ns::to_string(acts.precision)));
      },
      py::arg("path"), "Returns ([(tokens, float32 array (layers, tokens, width))], precision).");
  m.def(
      "write_activations",
      [](const std::vector<std::pair<std::vector<std::string>, FloatArray>>& sentences,
         const std::filesystem::path& path, const std::string& precision) {
        const auto p = ns::parse_precision(precision);
        const auto acts = to_activation_set(sentences, p);
        py::gil_scoped_release release;
        ns::write_activations(acts, path, ns::infer_format(path), p);
      },
      py::arg("sentences"), py::arg("path"), py::arg("precision") = "f32");
  m.def(
      "validate",
      [](const std::filesystem::path& path) {
        std::vector<std::tuple<std::string, std::string, std::string>> out;
        for (const auto& v : ns::validate(path).violations) {
          out.emplace_back(std::string(ns::to_string(v.kind)), v.locator, v.message);
        }
        return out;
      },
      py::arg("path"), "List of (kind, locator, message); empty when the file is valid.");
  m.def(
      "round_to_half",
      [](const FloatArray& values) {
        FloatArray out(values.request().shape);
        for (py::ssize_t i = 0; i < values.size(); ++i) out.mutable_data()[i] = ns::round_to_half(values.data()[i]);
        return out;
      },
      py::arg("values"));

  // Alignment
  m.def(
      "build_subword_map",
      [](const std::vector<std::string>& words, const std::vector<std::string>& subwords, const std::string& scheme) {
        const auto map = ns::build_subword_map(words, subwords, ns::parse_scheme(scheme));
        return py::make_tuple(map.word_index, std::vector<bool>(map.special.begin(), map.special.end()));
      },
      py::arg("words"), py::arg("subwords"), py::arg("scheme") = "generic",
      "Returns (word_index, special) per subword; specials have word index -1.");

  // Annotation
  m.def(
      "annotate",
      [](const std::vector<std::vector<std::string>>& corpus, const std::string& rule) {
        const auto labeled = ns::annotate_data(corpus, ns::parse_rule(rule));
        std::vector<std::vector<std::string>> out;
        for (const auto& s : labeled.sentences) {
          std::vector<std::string> row;
          for (int l : s.labels) row.push_back(labeled.vocab.label(l));
          out.push_back(std::move(row));
        }
        return out;
      },
      py::arg("corpus"), py::arg("rule"));

  // Datasets and methods
  py::class_<ns::ProbeDataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("X"), py::arg("y"), py::arg("labels"), py::arg("sentence_of") = py::none(),
           py::arg("split") = std::vector<double>{0.7, 0.1, 0.2}, py::arg("balance") = false, py::arg("seed") = 42,
           py::arg("layer_width") = 0)
      .def_property_readonly("X", [](const ns::ProbeDataset& d) { return d.X; })
      .def_property_readonly("y", [](const ns::ProbeDataset& d) { return d.y; })
      .def_property_readonly("labels", [](const ns::ProbeDataset& d) { return d.vocab.labels(); })
      .def_property_readonly("neurons",
                             [](const ns::ProbeDataset& d) {
                               std::vector<int> ids;
                               for (const auto& n : d.neuron_ids) ids.push_back(n.flat);
                               return ids;
                             })
      .def("rows", [](const ns::ProbeDataset& d, const std::string& split) {
        if (split == "train") return d.rows(ns::Split::train);
        if (split == "dev") return d.rows(ns::Split::dev);
        if (split == "test") return d.rows(ns::Split::test);
        throw ns::Error(ns::ErrorKind::InvalidArgument, "split must be train, dev or test");
      });

  m.def("method_names", &ns::method_names);
  m.def(
      "capabilities",
      [](const std::string& method) {
        const auto c = ns::make_method(method)->capabilities();
        return py::dict(py::arg("multiclass") = c.multiclass, py::arg("needs_training") = c.needs_training,
                        py::arg("layerwise") = c.layerwise);
      },
      py::arg("method"));
  m.def(
      "rank",
      [](const ns::ProbeDataset& data, const std::string& method, const std::string& params) {
        const auto m = ns::make_method(method, nlohmann::json::parse(params));
        py::gil_scoped_release release;
        return ranking_text(m->train_probe(data)->get_neuron_ordering());
      },
      py::arg("dataset"), py::arg("method"), py::arg("params") = "{}", "Ranking as a JSON document.");
  m.def(
      "evaluate",
      [](const ns::ProbeDataset& data, const std::string& method, const std::string& params, const std::string& split,
         const std::string& metric) {
        const auto m = ns::make_method(method, nlohmann::json::parse(params));
        const ns::Split s = split == "train" ? ns::Split::train : split == "dev" ? ns::Split::dev : ns::Split::test;
        py::gil_scoped_release release;
        return m->train_probe(data)->evaluate_probe(data, s, ns::parse_metric(metric));
      },
      py::arg("dataset"), py::arg("method"), py::arg("params") = "{}", py::arg("split") = "test",
      py::arg("metric") = "accuracy");

  // Redundancy and evaluation
  m.def(
      "extract_independent_neurons",
      [](const ns::ProbeDataset& data, double threshold) {
        py::gil_scoped_release release;
        return ns::to_json(ns::extract_independent_neurons(data, threshold)).dump();
      },
      py::arg("dataset"), py::arg("threshold") = ns::kDefaultClusterThreshold);
  m.def("correlation_distances", &ns::correlation_distances, py::arg("dataset"));
  m.def(
      "mutual_information",
      [](const ns::ProbeDataset& data, const std::vector<int>& neurons, std::size_t bins) {
        return ns::mutual_information(data, neurons, bins);
      },
      py::arg("dataset"), py::arg("neurons"), py::arg("bins") = 16);
  m.def(
      "average_overlap",
      [](const std::vector<int>& a, const std::vector<int>& b, std::size_t depth) {
        return ns::average_overlap(a, b, depth);
      },
      py::arg("a"), py::arg("b"), py::arg("depth"));
  m.def(
      "neuron_vote",
      [](const std::vector<std::vector<int>>& orders, std::size_t depth) {
        return ns::neuron_vote(rankings_from_orders(orders), depth);
      },
      py::arg("orders"), py::arg("depth"));

  // Analysis
  m.def(
      "top_words",
      [](const std::filesystem::path& path, int neuron, std::size_t n, std::size_t min_count) {
        const auto report = ns::top_words(ns::read_activations(path), {}, neuron, n, min_count);
        std::vector<std::tuple<std::string, double, std::size_t>> out;
        for (const auto& e : report.entries) out.emplace_back(e.word, e.activation, e.count);
        return out;
      },
      py::arg("path"), py::arg("neuron"), py::arg("n") = 10, py::arg("min_count") = 1);
  m.def(
      "render_heatmap",
      [](const std::filesystem::path& path, int neuron, const std::string& format) {
        const auto doc = ns::make_heatmap(ns::read_activations(path), {}, neuron);
        return ns::parse_heatmap_format(format) == ns::HeatmapFormat::html ? ns::render_html(doc)
                                                                            : ns::render_ansi(doc);
      },
      py::arg("path"), py::arg("neuron"), py::arg("format") = "html");
}
