#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuroscope/activation_store.hpp"
#include "neuroscope/types.hpp"

namespace neuroscope {

/// Word lists per sentence; empty means "use the activation tokens".
using WordCorpus = std::vector<std::vector<std::string>>;

struct TopWordEntry {
  std::string word;
  double activation = 0.0;  // mean over occurrences
  std::size_t count = 0;
};

struct TopWordsReport {
  NeuronId neuron;
  std::vector<TopWordEntry> entries;  // descending activation, then count, then word
};

/// Word types with at least `min_count` occurrences ranked by mean raw
/// activation. Throws OutOfRangeNeuron and StructureMismatch.
TopWordsReport top_words(const ActivationSet& acts, const WordCorpus& words, int neuron, std::size_t n,
                         std::size_t min_count = 1);

nlohmann::json to_json(const TopWordsReport& report);
std::string to_tsv(const TopWordsReport& report);

enum class HeatmapFormat { html, ansi };

HeatmapFormat parse_heatmap_format(std::string_view text);

struct HeatmapDoc {
  NeuronId neuron;
  std::vector<std::vector<std::string>> tokens;
  std::vector<std::vector<double>> intensity;  // in [-1, 1], scaled by the document's max |activation|
};

/// Number of intensity classes on each side of zero.
inline constexpr int kIntensityLevels = 10;

/// Signed class in [-kIntensityLevels, kIntensityLevels].
int intensity_class(double intensity);

/// `sentences` selects sentence positions; empty selects all.
HeatmapDoc make_heatmap(const ActivationSet& acts, const WordCorpus& words, int neuron,
                        std::span<const std::size_t> sentences = {});

/// Self-contained XHTML with inline styles.
std::string render_html(const HeatmapDoc& doc);
/// 24-bit ANSI background colours, one sentence per line.
std::string render_ansi(const HeatmapDoc& doc);

/// Writes the rendering to `out_path`; IoFailure when it cannot be written.
void render_heatmap(const ActivationSet& acts, const WordCorpus& words, int neuron,
                    const std::filesystem::path& out_path, HeatmapFormat format,
                    std::span<const std::size_t> sentences = {});

}  // namespace neuroscope
