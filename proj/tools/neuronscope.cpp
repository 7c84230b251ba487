#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "neuroscope/activation_store.hpp"
#include "neuroscope/analysis.hpp"
#include "neuroscope/annotate.hpp"
#include "neuroscope/corpus_align.hpp"
#include "neuroscope/dataset.hpp"
#include "neuroscope/error.hpp"
#include "neuroscope/evaluation.hpp"
#include "neuroscope/json_util.hpp"
#include "neuroscope/methods.hpp"
#include "neuroscope/parallel.hpp"
#include "neuroscope/ranking.hpp"
#include "neuroscope/redundancy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace neuroscope;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Common {
  std::uint64_t seed = 42;
  std::size_t jobs = 0;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--seed", common.seed, "Seed for every random choice")->capture_default_str();
  cmd->add_option("--jobs", common.jobs, "Worker threads (0 = all cores)")->capture_default_str();
}

struct DataArgs {
  std::string activations;
  std::string words;
  std::string labels;
  std::string sidecar;
  std::string format = "auto";
  std::string aggregation = "average";
  std::vector<int> layers;
  std::vector<double> ratios = {0.7, 0.1, 0.2};
  bool balance = false;
};

void add_activation_options(CLI::App* cmd, DataArgs& args) {
  cmd->add_option("--activations", args.activations, "Activation file (.json/.jsonl or .hdf5/.h5)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--activation-format", args.format, "json, hdf5 or auto")->capture_default_str();
  cmd->add_option("--sidecar", args.sidecar,
                  "Subword map for subword-level dumps (default: <activations>.map.json when present)");
  cmd->add_option("--aggregation", args.aggregation, "Subword aggregation: first, last or average")
      ->capture_default_str();
}

void add_data_options(CLI::App* cmd, DataArgs& args, bool labels_required) {
  add_activation_options(cmd, args);
  cmd->add_option("--words", args.words, "Word corpus, one sentence per line")->required()->check(CLI::ExistingFile);
  auto* labels = cmd->add_option("--labels", args.labels, "Labels, one line per sentence, one label per word");
  labels->check(CLI::ExistingFile);
  if (labels_required) labels->required();
  cmd->add_option("--layers", args.layers, "Layers to use, comma separated (default: all)")->delimiter(',');
  cmd->add_option("--split", args.ratios, "Train, dev and test ratios")->delimiter(',')->expected(3);
  cmd->add_flag("--balance", args.balance, "Subsample train classes to the minority count");
}

FileFormat file_format(const std::string& text) {
  return text == "auto" ? FileFormat::automatic : parse_format(text);
}

std::string sidecar_path(const DataArgs& args) {
  if (!args.sidecar.empty()) return args.sidecar;
  const std::string guess = args.activations + ".map.json";
  if (fs::exists(guess)) {
    spdlog::info("using subword map {}", guess);
    return guess;
  }
  return {};
}

/// Word-level activations; subword dumps are collapsed through their sidecar map.
ActivationSet load_word_activations(const DataArgs& args, const std::vector<std::vector<std::string>>& words) {
  auto acts = read_activations(args.activations, file_format(args.format));
  spdlog::info("loaded {} sentences, {} layers x {} neurons ({})", acts.sentences.size(), acts.layer_count,
               acts.layer_width, to_string(acts.precision));
  const auto sidecar = sidecar_path(args);
  if (sidecar.empty()) return acts;
  const auto map = read_sidecar(sidecar);
  if (map.maps.size() != acts.sentences.size()) {
    throw Error(ErrorKind::StructureMismatch,
                std::to_string(map.maps.size()) + " subword maps for " + std::to_string(acts.sentences.size()) +
                    " activation sentences",
                sidecar);
  }
  return aggregate(acts, map.maps, parse_aggregation(args.aggregation), words);
}

struct LoadedData {
  ActivationSet acts;
  LabeledCorpus corpus;
  ProbeDataset dataset;
};

LoadedData load_dataset(const DataArgs& args, const Common& common) {
  LoadedData out;
  out.corpus = load_annotations(args.words, args.labels);
  std::vector<std::vector<std::string>> words;
  for (const auto& s : out.corpus.sentences) words.push_back(s.words);
  out.acts = load_word_activations(args, words);
  DatasetOptions options;
  options.layers = args.layers;
  options.ratios = {args.ratios[0], args.ratios[1], args.ratios[2]};
  options.balance = args.balance;
  options.seed = common.seed;
  out.dataset = build_dataset(out.acts, out.corpus, options);
  spdlog::info("dataset: {} samples, {} neurons, {} classes", out.dataset.n_samples(), out.dataset.n_neurons(),
               out.dataset.n_classes());
  return out;
}

json data_manifest(const DataArgs& args) {
  return {{"activations", args.activations}, {"activation_format", args.format}, {"words", args.words},
          {"labels", args.labels},           {"sidecar", args.sidecar},         {"aggregation", args.aggregation},
          {"layers", args.layers},           {"split", args.ratios},            {"balance", args.balance}};
}

/// For commands without randomness.
void write_manifest(const std::string& out, const std::string& subcommand, json config) {
  config["subcommand"] = subcommand;
  config["output"] = out;
  write_json_file(out + ".manifest.json", config);
}

void write_manifest(const std::string& out, const std::string& subcommand, const Common& common, json config) {
  config["seed"] = common.seed;
  write_manifest(out, subcommand, std::move(config));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorKind::IoFailure, "cannot open for writing", path.string());
  file << text;
  if (!file.flush()) throw Error(ErrorKind::IoFailure, "write failed", path.string());
}

/// key=value with the value read as JSON when it parses, as a string otherwise.
json parse_params(const std::vector<std::string>& pairs) {
  json params = json::object();
  for (const auto& pair : pairs) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::InvalidArgument, "parameter '" + pair + "' is not key=value");
    }
    const std::string key = pair.substr(0, eq);
    const std::string value = pair.substr(eq + 1);
    const json parsed = json::parse(value, nullptr, false);
    params[key] = parsed.is_discarded() ? json(value) : parsed;
  }
  return params;
}

std::vector<int> read_neuron_list(const std::string& path) {
  const auto doc = read_json_file(path);
  try {
    if (doc.is_array()) return doc.get<std::vector<int>>();
    if (doc.contains("representatives")) return doc.at("representatives").get<std::vector<int>>();
    if (doc.contains("global")) return doc.at("global").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedFile, e.what(), path);
  }
  throw Error(ErrorKind::MalformedFile, "expected a list of neuron ids or a clustering report", path);
}

void print_top(const NeuronRanking& ranking, std::size_t layer_width, std::size_t count = 10) {
  std::cout << ranking.method << " ranking over " << ranking.size() << " neurons; top " << std::min(count, ranking.size())
            << ":\n";
  for (int id : ranking.top(count)) {
    const auto n = NeuronId::from_flat(id, static_cast<int>(std::max<std::size_t>(layer_width, 1)));
    std::cout << "  " << id << "  (layer " << n.layer << ", index " << n.index << ")\n";
  }
}

LinearOptions linear_options(const json& params, std::uint64_t seed) {
  LinearOptions o;
  o.seed = seed;
  o.l1 = params.value("l1", o.l1);
  o.l2 = params.value("l2", o.l2);
  o.epochs = params.value("epochs", o.epochs);
  o.learning_rate = params.value("learning_rate", o.learning_rate);
  o.batch_size = params.value("batch_size", o.batch_size);
  return o;
}

json to_json(const LinearOptions& o) {
  return {{"l1", o.l1}, {"l2", o.l2}, {"epochs", o.epochs}, {"learning_rate", o.learning_rate},
          {"batch_size", o.batch_size}, {"seed", o.seed}};
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("neuronscope");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("NEUROSCOPE_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else {
    spdlog::set_level(spdlog::level::err);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Neuron interpretation toolkit: rank, evaluate and visualize the neurons of a neural model."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "neuronscope 0.1.0");

  // validate
  Common validate_common;
  std::string validate_path;
  std::string validate_format = "auto";
  std::string validate_out;
  auto* validate_cmd = app.add_subcommand("validate", "Check an activation file and list every violation");
  validate_cmd->add_option("--activations", validate_path, "Activation file")->required();
  validate_cmd->add_option("--activation-format", validate_format, "json, hdf5 or auto")->capture_default_str();
  validate_cmd->add_option("--out", validate_out, "Write the report as JSON");

  // convert
  std::string convert_in;
  std::string convert_out;
  std::string convert_precision = "f32";
  std::string convert_format = "auto";
  auto* convert_cmd = app.add_subcommand("convert", "Convert between json and hdf5, f32 and f16");
  convert_cmd->add_option("--input", convert_in, "Source activation file")->required()->check(CLI::ExistingFile);
  convert_cmd->add_option("--output", convert_out, "Destination file; format from its extension")->required();
  convert_cmd->add_option("--precision", convert_precision, "f16 or f32")->capture_default_str();
  convert_cmd->add_option("--format", convert_format, "json, hdf5 or auto")->capture_default_str();

  // annotate
  Common annotate_common;
  std::string annotate_words;
  std::string annotate_rule;
  std::string annotate_labels;
  std::string annotate_out;
  std::string annotate_positive = "positive";
  std::string annotate_negative = "negative";
  bool annotate_control = false;
  auto* annotate_cmd = app.add_subcommand("annotate", "Label words by rule, or derive control-task labels");
  add_common(annotate_cmd, annotate_common);
  annotate_cmd->add_option("--words", annotate_words, "Word corpus")->required()->check(CLI::ExistingFile);
  annotate_cmd->add_option("--rule", annotate_rule,
                           "regex:PATTERN, vocab:FILE, ends-with:SUFFIX, starts-with:PREFIX or length>=N");
  annotate_cmd->add_option("--labels", annotate_labels, "Existing labels (with --control)")
      ->check(CLI::ExistingFile);
  annotate_cmd->add_flag("--control", annotate_control, "Write type-consistent random control labels");
  annotate_cmd->add_option("--positive-label", annotate_positive)->capture_default_str();
  annotate_cmd->add_option("--negative-label", annotate_negative)->capture_default_str();
  annotate_cmd->add_option("--out", annotate_out, "Labels file to write")->required();

  // rank
  Common rank_common;
  DataArgs rank_data;
  std::string rank_method;
  std::vector<std::string> rank_params;
  std::string rank_concept;
  std::string rank_neurons;
  std::string rank_out;
  auto* rank_cmd = app.add_subcommand("rank", "Rank neurons with one interpretation method");
  add_common(rank_cmd, rank_common);
  add_data_options(rank_cmd, rank_data, true);
  rank_cmd->add_option("--method", rank_method, "linear, probeless, iou, gaussian or meanselect")->required();
  rank_cmd->add_option("--param", rank_params, "Method parameter key=value (repeatable)");
  rank_cmd->add_option("--concept", rank_concept, "Probe one label against the rest");
  rank_cmd->add_option("--neurons", rank_neurons, "Restrict to these neurons (JSON list or clustering report)")
      ->check(CLI::ExistingFile);
  rank_cmd->add_option("--out", rank_out, "Ranking JSON to write")->required();

  // reduce
  Common reduce_common;
  DataArgs reduce_data;
  double reduce_threshold = kDefaultClusterThreshold;
  std::string reduce_out;
  auto* reduce_cmd = app.add_subcommand("reduce", "Cluster correlated neurons and keep one per cluster");
  add_common(reduce_cmd, reduce_common);
  add_data_options(reduce_cmd, reduce_data, true);
  reduce_cmd->add_option("--threshold", reduce_threshold, "Distance cut, 1 - |correlation|")->capture_default_str();
  reduce_cmd->add_option("--out", reduce_out, "Clustering JSON to write")->required();

  // evaluate
  Common eval_common;
  DataArgs eval_data;
  std::string eval_kind;
  std::string eval_ranking;
  std::vector<std::size_t> eval_ks;
  std::vector<int> eval_neurons;
  std::string eval_mode = "all";
  std::size_t eval_random = 5;
  std::size_t eval_bins = 16;
  std::string eval_metric = "accuracy";
  std::vector<std::string> eval_params;
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy delta, selectivity, ablation or mutual information");
  add_common(eval_cmd, eval_common);
  add_data_options(eval_cmd, eval_data, true);
  eval_cmd->add_option("--kind", eval_kind, "accuracy, selectivity, ablation or mi")
      ->required()
      ->check(CLI::IsMember({"accuracy", "selectivity", "ablation", "mi"}));
  eval_cmd->add_option("--ranking", eval_ranking, "Ranking JSON")->check(CLI::ExistingFile);
  eval_cmd->add_option("--k", eval_ks, "Neuron counts, comma separated")->delimiter(',');
  eval_cmd->add_option("--neurons", eval_neurons, "Neurons for mi, comma separated")->delimiter(',');
  eval_cmd->add_option("--mode", eval_mode, "Ablation: keep_top, keep_bottom, keep_random or all")
      ->capture_default_str();
  eval_cmd->add_option("--random-runs", eval_random, "Seeds averaged for keep_random")->capture_default_str();
  eval_cmd->add_option("--bins", eval_bins, "Quantile bins per neuron for mi")->capture_default_str();
  eval_cmd->add_option("--metric", eval_metric, "accuracy or macro_f1")->capture_default_str();
  eval_cmd->add_option("--param", eval_params, "Linear probe parameter key=value (l1, l2, epochs, ...)");
  eval_cmd->add_option("--out", eval_out, "Report JSON to write")->required();

  // compat
  std::vector<std::string> compat_rankings;
  std::size_t compat_depth = 0;
  std::string compat_out;
  std::string compat_csv;
  auto* compat_cmd = app.add_subcommand("compat", "Average Overlap and NeuronVote across rankings");
  compat_cmd->add_option("--rankings", compat_rankings, "Two or more ranking files")
      ->required()
      ->expected(2, -1)
      ->check(CLI::ExistingFile);
  compat_cmd->add_option("--depth", compat_depth, "Prefix depth (default: min(100, N))");
  compat_cmd->add_option("--out", compat_out, "Report JSON to write")->required();
  compat_cmd->add_option("--csv", compat_csv, "Also write the matrix as CSV");

  // topwords
  DataArgs top_data;
  int top_neuron = -1;
  std::size_t top_n = 10;
  std::size_t top_min_count = 1;
  std::string top_out;
  std::string top_format = "json";
  auto* top_cmd = app.add_subcommand("topwords", "Words that activate a neuron most");
  add_activation_options(top_cmd, top_data);
  top_cmd->add_option("--words", top_data.words, "Word corpus (default: activation tokens)")
      ->check(CLI::ExistingFile);
  top_cmd->add_option("--neuron", top_neuron, "Flat neuron id")->required();
  top_cmd->add_option("--n", top_n, "Entries to report")->capture_default_str();
  top_cmd->add_option("--min-count", top_min_count, "Minimum occurrences of a word")->capture_default_str();
  top_cmd->add_option("--format", top_format, "json or tsv")->capture_default_str()->check(CLI::IsMember({"json", "tsv"}));
  top_cmd->add_option("--out", top_out, "Report to write (default: stdout)");

  // visualize
  DataArgs viz_data;
  int viz_neuron = -1;
  std::string viz_format = "html";
  std::vector<std::size_t> viz_sentences;
  std::string viz_out;
  auto* viz_cmd = app.add_subcommand("visualize", "Colour sentences by one neuron's activations");
  add_activation_options(viz_cmd, viz_data);
  viz_cmd->add_option("--words", viz_data.words, "Word corpus (default: activation tokens)")
      ->check(CLI::ExistingFile);
  viz_cmd->add_option("--neuron", viz_neuron, "Flat neuron id")->required();
  viz_cmd->add_option("--format", viz_format, "html or ansi")->capture_default_str()->check(CLI::IsMember({"html", "ansi"}));
  viz_cmd->add_option("--sentences", viz_sentences, "Sentence positions, comma separated (default: all)")
      ->delimiter(',');
  viz_cmd->add_option("--out", viz_out, "File to write (ansi defaults to stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto load_words_only = [](const DataArgs& args) {
    std::vector<std::vector<std::string>> words;
    if (!args.words.empty()) words = read_tokenized_lines(args.words);
    return words;
  };

  try {
    if (*validate_cmd) {
      const auto report = validate(validate_path, file_format(validate_format));
      json doc = {{"file", validate_path}, {"ok", report.ok()}, {"violations", json::array()}};
      for (const auto& v : report.violations) {
        doc["violations"].push_back(
            {{"kind", std::string(to_string(v.kind))}, {"locator", v.locator}, {"message", v.message}});
        std::cout << to_string(v.kind) << (v.locator.empty() ? "" : " at " + v.locator) << ": " << v.message
                  << '\n';
      }
      if (!validate_out.empty()) {
        write_json_file(validate_out, doc);
        write_manifest(validate_out, "validate", {{"activations", validate_path}, {"activation_format", validate_format}});
      }
      std::cout << validate_path << ": " << (report.ok() ? "ok" : std::to_string(report.violations.size()) + " violation(s)")
                << '\n';
      return report.ok() ? kExitOk : kExitData;
    }

    if (*convert_cmd) {
      const auto out_format = convert_format == "auto" ? infer_format(convert_out) : parse_format(convert_format);
      convert(convert_in, convert_out, out_format, parse_precision(convert_precision));
      write_manifest(convert_out, "convert",
                     {{"input", convert_in}, {"precision", convert_precision}, {"format", std::string(to_string(out_format))}});
      std::cout << "wrote " << convert_out << " (" << to_string(out_format) << ", " << convert_precision << ")\n";
      return kExitOk;
    }

    if (*annotate_cmd) {
      LabeledCorpus labeled;
      if (annotate_control) {
        if (annotate_labels.empty()) throw Error(ErrorKind::InvalidArgument, "--control needs --labels");
        labeled = make_control_task(load_annotations(annotate_words, annotate_labels), annotate_common.seed);
      } else {
        if (annotate_rule.empty()) throw Error(ErrorKind::InvalidArgument, "give --rule or --control");
        auto rule = parse_rule(annotate_rule);
        rule.positive_label = annotate_positive;
        rule.negative_label = annotate_negative;
        labeled = annotate_data(read_tokenized_lines(annotate_words), rule);
      }
      write_labels(labeled, annotate_out);
      write_manifest(annotate_out, "annotate", annotate_common,
                     {{"words", annotate_words},
                      {"rule", annotate_rule},
                      {"labels", annotate_labels},
                      {"control", annotate_control},
                      {"positive_label", annotate_positive},
                      {"negative_label", annotate_negative}});
      std::size_t positives = 0;
      for (const auto& s : labeled.sentences) {
        for (int l : s.labels) positives += l == 1;
      }
      std::cout << "labeled " << labeled.token_total() << " tokens in " << labeled.sentences.size()
                << " sentences; " << labeled.vocab.size() << " labels";
      if (!annotate_control) std::cout << ", " << positives << " " << annotate_positive;
      std::cout << '\n';
      return kExitOk;
    }

    if (*rank_cmd) {
      set_default_jobs(rank_common.jobs);
      auto params = parse_params(rank_params);
      const bool binary_only = !make_method(rank_method, params)->capabilities().multiclass;
      if (!rank_concept.empty() && binary_only) params["concept"] = rank_concept;
      if (rank_method == "linear" && !params.contains("seed")) params["seed"] = rank_common.seed;
      const auto method = make_method(rank_method, params);  // unknown names fail before any loading
      auto data = load_dataset(rank_data, rank_common);
      ProbeDataset dataset = std::move(data.dataset);
      if (!rank_neurons.empty()) dataset = dataset.select_neurons(read_neuron_list(rank_neurons));
      if (!rank_concept.empty() && !binary_only) dataset = select_binary_view(dataset, rank_concept);
      const auto probe = method->train_probe(dataset);
      const auto ranking = probe->get_neuron_ordering();
      write_ranking(ranking, rank_out);
      write_manifest(rank_out, "rank", rank_common,
                     {{"data", data_manifest(rank_data)},
                      {"method", rank_method},
                      {"params", method->params()},
                      {"concept", rank_concept},
                      {"neurons", rank_neurons}});
      print_top(ranking, dataset.layer_width);
      return kExitOk;
    }

    if (*reduce_cmd) {
      set_default_jobs(reduce_common.jobs);
      const auto data = load_dataset(reduce_data, reduce_common);
      const auto clustering = extract_independent_neurons(data.dataset, reduce_threshold);
      write_clustering(clustering, reduce_out);
      write_manifest(reduce_out, "reduce", reduce_common,
                     {{"data", data_manifest(reduce_data)}, {"threshold", reduce_threshold}});
      std::cout << clustering.representatives.size() << " independent neurons out of " << data.dataset.n_neurons()
                << " at threshold " << reduce_threshold << '\n';
      return kExitOk;
    }

    if (*eval_cmd) {
      set_default_jobs(eval_common.jobs);
      const Metric metric = parse_metric(eval_metric);
      const auto params = parse_params(eval_params);
      const auto options = linear_options(params, eval_common.seed);
      std::optional<NeuronRanking> ranking;
      if (!eval_ranking.empty()) ranking = read_ranking(eval_ranking);
      if (!ranking && eval_kind != "mi") throw Error(ErrorKind::InvalidArgument, "--kind " + eval_kind + " needs --ranking");
      auto data = load_dataset(eval_data, eval_common);
      const ProbeDataset& dataset = data.dataset;

      json report = {{"kind", eval_kind}, {"metric", std::string(to_string(metric))}, {"seed", eval_common.seed}};
      if (ranking) report["ranking"] = {{"method", ranking->method}, {"params", ranking->params}};

      auto default_ks = [&] {
        if (!eval_ks.empty()) return eval_ks;
        return std::vector<std::size_t>{std::min<std::size_t>(10, dataset.n_neurons())};
      };

      if (eval_kind == "accuracy") {
        report["linear"] = to_json(options);
        json results = json::array();
        for (auto k : default_ks()) {
          const auto r = selected_accuracy(dataset, *ranking, k, options, metric);
          results.push_back(to_json(r));
          std::cout << "k=" << k << "  selected " << r.selected << "  oracle " << r.oracle << "  delta " << r.delta
                    << '\n';
        }
        report["results"] = results;
      } else if (eval_kind == "selectivity") {
        report["linear"] = to_json(options);
        const auto control_corpus = make_control_task(data.corpus, eval_common.seed);
        DatasetOptions dopts;
        dopts.layers = eval_data.layers;
        dopts.ratios = {eval_data.ratios[0], eval_data.ratios[1], eval_data.ratios[2]};
        dopts.balance = eval_data.balance;
        dopts.seed = eval_common.seed;
        const auto control = build_dataset(data.acts, control_corpus, dopts);
        json results = json::array();
        for (auto k : default_ks()) {
          const auto r = selectivity(dataset, control, *ranking, k, options, metric);
          results.push_back(to_json(r));
          std::cout << "k=" << k << "  task " << r.task << "  control " << r.control << "  selectivity "
                    << r.selectivity << '\n';
        }
        report["results"] = results;
      } else if (eval_kind == "ablation") {
        report["linear"] = to_json(options);
        const auto ks = eval_ks.empty() ? default_ablation_ks(dataset.n_neurons()) : eval_ks;
        const auto probe = linear::train_probe(dataset, options);
        std::vector<AblationMode> modes;
        if (eval_mode == "all") {
          modes = {AblationMode::keep_top, AblationMode::keep_bottom, AblationMode::keep_random};
        } else {
          modes = {parse_ablation_mode(eval_mode)};
        }
        json curves = json::array();
        for (auto mode : modes) {
          if (mode != AblationMode::keep_random) {
            curves.push_back(to_json(ablation_curve(dataset, probe, *ranking, ks, mode, eval_common.seed, metric)));
            continue;
          }
          if (eval_random < 1) throw Error(ErrorKind::InvalidArgument, "--random-runs must be >= 1");
          std::vector<double> mean(ks.size(), 0.0);
          json runs = json::array();
          for (std::size_t r = 0; r < eval_random; ++r) {
            const auto curve = ablation_curve(dataset, probe, *ranking, ks, mode, eval_common.seed + r, metric);
            for (std::size_t i = 0; i < ks.size(); ++i) mean[i] += curve.scores[i] / static_cast<double>(eval_random);
            runs.push_back(to_json(curve));
          }
          curves.push_back({{"mode", "keep_random"}, {"ks", ks}, {"scores", rounded(mean)}, {"runs", runs}});
        }
        report["curves"] = curves;
        for (const auto& c : curves) {
          std::cout << c["mode"].get<std::string>() << ':';
          for (std::size_t i = 0; i < ks.size(); ++i) std::cout << "  k=" << ks[i] << ' ' << c["scores"][i].get<double>();
          std::cout << '\n';
        }
      } else {
        std::vector<int> neurons(eval_neurons.begin(), eval_neurons.end());
        if (neurons.empty()) {
          if (!ranking) throw Error(ErrorKind::InvalidArgument, "mi needs --neurons or --ranking");
          neurons = ranking->top(eval_ks.empty() ? 1 : eval_ks.front());
        }
        report["bins"] = eval_bins;
        report["neurons"] = neurons;
        json results = {{"per_neuron_sum", round_significant(mutual_information_sum(dataset, neurons, eval_bins))},
                        {"permutation_baseline",
                         round_significant(neurons.size() <= kMaxJointNeurons
                                               ? mutual_information_baseline(dataset, neurons, eval_bins, eval_common.seed)
                                               : 0.0)}};
        if (neurons.size() <= kMaxJointNeurons) {
          results["joint"] = round_significant(mutual_information(dataset, neurons, eval_bins));
          std::cout << "joint I = " << results["joint"].get<double>() << " bits\n";
        }
        std::cout << "sum of per-neuron I = " << results["per_neuron_sum"].get<double>() << " bits\n";
        report["results"] = results;
      }
      write_json_file(eval_out, report);
      write_manifest(eval_out, "evaluate", eval_common,
                     {{"data", data_manifest(eval_data)},
                      {"kind", eval_kind},
                      {"ranking", eval_ranking},
                      {"k", eval_ks},
                      {"neurons", eval_neurons},
                      {"mode", eval_mode},
                      {"random_runs", eval_random},
                      {"bins", eval_bins},
                      {"metric", eval_metric},
                      {"linear", to_json(options)}});
      return kExitOk;
    }

    if (*compat_cmd) {
      std::vector<NeuronRanking> rankings;
      for (const auto& path : compat_rankings) rankings.push_back(read_ranking(path));
      const std::size_t depth = compat_depth ? compat_depth : default_depth(rankings.front().size());
      const auto report = compatibility(rankings, depth);
      write_json_file(compat_out, to_json(report));
      if (!compat_csv.empty()) write_text(compat_csv, to_csv(report));
      write_manifest(compat_out, "compat", {{"rankings", compat_rankings}, {"depth", depth}, {"csv", compat_csv}});
      std::cout << to_csv(report);
      return kExitOk;
    }

    if (*top_cmd) {
      const auto words = load_words_only(top_data);
      const auto acts = load_word_activations(top_data, words);
      const auto report = top_words(acts, words, top_neuron, top_n, top_min_count);
      const std::string text = top_format == "json" ? to_json(report).dump(2) + "\n" : to_tsv(report);
      if (top_out.empty()) {
        std::cout << text;
      } else {
        write_text(top_out, text);
        write_manifest(top_out, "topwords",
                       {{"activations", top_data.activations}, {"words", top_data.words}, {"neuron", top_neuron},
                        {"n", top_n}, {"min_count", top_min_count}, {"format", top_format}});
        std::cout << report.entries.size() << " words for neuron " << top_neuron << " written to " << top_out << '\n';
      }
      return kExitOk;
    }

    if (*viz_cmd) {
      const auto words = load_words_only(viz_data);
      const auto acts = load_word_activations(viz_data, words);
      const auto format = parse_heatmap_format(viz_format);
      if (viz_out.empty()) {
        if (format == HeatmapFormat::html) throw Error(ErrorKind::InvalidArgument, "html output needs --out");
        std::cout << render_ansi(make_heatmap(acts, words, viz_neuron, viz_sentences));
        return kExitOk;
      }
      render_heatmap(acts, words, viz_neuron, viz_out, format, viz_sentences);
      write_manifest(viz_out, "visualize",
                     {{"activations", viz_data.activations}, {"words", viz_data.words}, {"neuron", viz_neuron},
                      {"format", viz_format}, {"sentences", viz_sentences}});
      std::cout << "wrote " << viz_out << '\n';
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.kind() == ErrorKind::InvalidArgument) return kExitUsage;
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
