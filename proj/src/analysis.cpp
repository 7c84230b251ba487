#include "neuroscope/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "neuroscope/error.hpp"
#include "neuroscope/json_util.hpp"

namespace neuroscope {

namespace {

NeuronId checked_neuron(const ActivationSet& acts, int neuron) {
  if (neuron < 0 || static_cast<std::size_t>(neuron) >= acts.neuron_count()) {
    throw Error(ErrorKind::OutOfRangeNeuron, "neuron " + std::to_string(neuron) + " outside [0, " +
                                                 std::to_string(acts.neuron_count()) + ")");
  }
  return NeuronId::from_flat(neuron, static_cast<int>(acts.layer_width));
}

const std::vector<std::string>& words_of(const ActivationSet& acts, const WordCorpus& words, std::size_t s) {
  const auto& sentence = acts.sentences[s];
  if (words.empty()) return sentence.tokens;
  if (words[s].size() != sentence.token_count()) {
    throw Error(ErrorKind::StructureMismatch,
                std::to_string(words[s].size()) + " words against " + std::to_string(sentence.token_count()) +
                    " activation tokens",
                "sentence " + std::to_string(s));
  }
  return words[s];
}

void check_sentence_count(const ActivationSet& acts, const WordCorpus& words) {
  if (!words.empty() && words.size() != acts.sentences.size()) {
    throw Error(ErrorKind::StructureMismatch, std::to_string(words.size()) + " sentences of words against " +
                                                  std::to_string(acts.sentences.size()) + " of activations");
  }
}

std::string html_escape(std::string_view text) {
  std::string out;
  for (char ch : text) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Rgb {
  int r, g, b;
};

// White at zero, saturating towards red for positive and blue for negative.
Rgb colour(double intensity) {
  const double a = std::min(1.0, std::fabs(intensity));
  const int fade = static_cast<int>(std::lround(255.0 * (1.0 - a)));
  return intensity >= 0 ? Rgb{255, fade, fade} : Rgb{fade, fade, 255};
}

}  // namespace

TopWordsReport top_words(const ActivationSet& acts, const WordCorpus& words, int neuron, std::size_t n,
                         std::size_t min_count) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
  const NeuronId id = checked_neuron(acts, neuron);
  check_sentence_count(acts, words);

  std::map<std::string, std::pair<double, std::size_t>> totals;
  for (std::size_t s = 0; s < acts.sentences.size(); ++s) {
    const auto& sentence = acts.sentences[s];
    const auto& ws = words_of(acts, words, s);
    for (std::size_t t = 0; t < ws.size(); ++t) {
      auto& [sum, count] = totals[ws[t]];
      sum += sentence.at(static_cast<std::size_t>(id.layer), t, static_cast<std::size_t>(id.index));
      ++count;
    }
  }
  TopWordsReport report;
  report.neuron = id;
  for (const auto& [word, total] : totals) {
    if (total.second < std::max<std::size_t>(min_count, 1)) continue;
    report.entries.push_back({word, total.first / static_cast<double>(total.second), total.second});
  }
  std::sort(report.entries.begin(), report.entries.end(), [](const TopWordEntry& a, const TopWordEntry& b) {
    if (a.activation != b.activation) return a.activation > b.activation;
    if (a.count != b.count) return a.count > b.count;
    return a.word < b.word;
  });
  if (report.entries.size() > n) report.entries.resize(n);
  return report;
}

nlohmann::json to_json(const TopWordsReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"word", e.word}, {"activation", round_significant(e.activation)}, {"count", e.count}});
  }
  return {{"neuron", {{"layer", report.neuron.layer}, {"index", report.neuron.index}, {"flat", report.neuron.flat}}},
          {"entries", entries}};
}

std::string to_tsv(const TopWordsReport& report) {
  std::ostringstream out;
  out.precision(kReportDigits);
  out << "word\tactivation\tcount\n";
  for (const auto& e : report.entries) out << e.word << '\t' << e.activation << '\t' << e.count << '\n';
  return out.str();
}

HeatmapFormat parse_heatmap_format(std::string_view text) {
  if (text == "html") return HeatmapFormat::html;
  if (text == "ansi") return HeatmapFormat::ansi;
  throw Error(ErrorKind::InvalidArgument, "unknown heatmap format '" + std::string(text) + "'");
}

int intensity_class(double intensity) {
  const double c = std::clamp(intensity, -1.0, 1.0) * kIntensityLevels;
  return static_cast<int>(std::lround(c));
}

HeatmapDoc make_heatmap(const ActivationSet& acts, const WordCorpus& words, int neuron,
                        std::span<const std::size_t> sentences) {
  const NeuronId id = checked_neuron(acts, neuron);
  check_sentence_count(acts, words);
  std::vector<std::size_t> chosen(sentences.begin(), sentences.end());
  if (chosen.empty()) {
    for (std::size_t s = 0; s < acts.sentences.size(); ++s) chosen.push_back(s);
  }

  HeatmapDoc doc;
  doc.neuron = id;
  double max_abs = 0.0;
  for (std::size_t s : chosen) {
    if (s >= acts.sentences.size()) {
      throw Error(ErrorKind::InvalidArgument, "sentence " + std::to_string(s) + " out of range");
    }
    const auto& ws = words_of(acts, words, s);
    std::vector<double> values;
    for (std::size_t t = 0; t < ws.size(); ++t) {
      const double v = acts.sentences[s].at(static_cast<std::size_t>(id.layer), t, static_cast<std::size_t>(id.index));
      max_abs = std::max(max_abs, std::fabs(v));
      values.push_back(v);
    }
    doc.tokens.push_back(ws);
    doc.intensity.push_back(std::move(values));
  }
  for (auto& row : doc.intensity) {
    for (double& v : row) v = max_abs > 0 ? v / max_abs : 0.0;
  }
  return doc;
}

std::string render_html(const HeatmapDoc& doc) {
  std::ostringstream out;
  const std::string title = "Neuron " + std::to_string(doc.neuron.flat) + " (layer " +
                            std::to_string(doc.neuron.layer) + ", index " + std::to_string(doc.neuron.index) + ")";
  out << "<!DOCTYPE html>\n"
      << "<html xmlns=\"http://www.w3.org/1999/xhtml\">\n<head>\n<meta charset=\"utf-8\"/>\n<title>" << title
      << "</title>\n</head>\n"
      << "<body style=\"font-family: sans-serif; line-height: 2.2;\">\n<h1 style=\"font-size: 1.2em;\">" << title
      << "</h1>\n";
  for (std::size_t s = 0; s < doc.tokens.size(); ++s) {
    out << "<p>";
    for (std::size_t t = 0; t < doc.tokens[s].size(); ++t) {
      const double v = doc.intensity[s][t];
      const int level = intensity_class(v);
      const auto c = colour(static_cast<double>(level) / kIntensityLevels);
      char value[32];
      std::snprintf(value, sizeof value, "%.4f", v);
      out << (t ? " " : "") << "<span class=\"i" << (level < 0 ? "n" : "p") << std::abs(level)
          << "\" data-intensity=\"" << value << "\" style=\"background-color: rgb(" << c.r << ", " << c.g << ", "
          << c.b << "); padding: 2px 3px; border-radius: 3px;\">" << html_escape(doc.tokens[s][t]) << "</span>";
    }
    out << "</p>\n";
  }
  out << "</body>\n</html>\n";
  return out.str();
}

std::string render_ansi(const HeatmapDoc& doc) {
  std::ostringstream out;
  for (std::size_t s = 0; s < doc.tokens.size(); ++s) {
    for (std::size_t t = 0; t < doc.tokens[s].size(); ++t) {
      const auto c = colour(static_cast<double>(intensity_class(doc.intensity[s][t])) / kIntensityLevels);
      out << (t ? " " : "") << "\x1b[48;2;" << c.r << ';' << c.g << ';' << c.b << "m\x1b[38;2;0;0;0m"
          << doc.tokens[s][t] << "\x1b[0m";
    }
    out << '\n';
  }
  return out.str();
}

void render_heatmap(const ActivationSet& acts, const WordCorpus& words, int neuron,
                    const std::filesystem::path& out_path, HeatmapFormat format,
                    std::span<const std::size_t> sentences) {
  const auto doc = make_heatmap(acts, words, neuron, sentences);
  const std::string text = format == HeatmapFormat::html ? render_html(doc) : render_ansi(doc);
  std::ofstream file(out_path, std::ios::binary);
  if (!file) throw Error(ErrorKind::IoFailure, "cannot open for writing", out_path.string());
  file << text;
  if (!file.flush()) throw Error(ErrorKind::IoFailure, "write failed", out_path.string());
}

}  // namespace neuroscope
