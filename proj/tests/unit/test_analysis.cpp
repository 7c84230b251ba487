#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "neuroscope/analysis.hpp"
#include "tempdir.hpp"

using namespace neuroscope;

namespace {

// One layer, width 2. Neuron 0 is the "-ing" indicator, neuron 1 a word-length signal.
ActivationSet word_set(const std::vector<std::vector<std::string>>& sentences) {
  ActivationSet acts;
  acts.layer_count = 1;
  acts.layer_width = 2;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    SentenceActivations sa;
    sa.sentence_index = s;
    sa.layer_count = 1;
    sa.layer_width = 2;
    sa.tokens = sentences[s];
    for (const auto& w : sa.tokens) {
      sa.values.push_back(w.ends_with("ing") ? 1.0f : 0.0f);
      sa.values.push_back(static_cast<float>(w.size()) - 3.0f);
    }
    acts.sentences.push_back(std::move(sa));
  }
  return acts;
}

}  // namespace

TEST_CASE("top words of an indicator neuron") {
  const auto acts = word_set({{"running", "dog", "sing", "cat"}, {"running", "the", "bring"}});
  const auto report = top_words(acts, {}, 0, 3);
  REQUIRE(report.entries.size() == 3);
  CHECK(report.entries[0].word == "running");
  CHECK(report.entries[0].count == 2);
  CHECK(report.entries[1].word == "bring");
  CHECK(report.entries[2].word == "sing");
  for (const auto& e : report.entries) CHECK(e.activation == 1.0);
}

TEST_CASE("top words filters and limits") {
  const auto acts = word_set({{"a", "bb", "bb", "ccc"}, {"dddd", "a"}});
  const auto filtered = top_words(acts, {}, 1, 10, 2);
  REQUIRE(filtered.entries.size() == 2);
  CHECK(filtered.entries[0].word == "bb");
  CHECK(filtered.entries[1].word == "a");
  for (const auto& e : filtered.entries) CHECK(e.count >= 2);
  CHECK(top_words(acts, {}, 1, 100).entries.size() == 4);
}

TEST_CASE("top words with a separate corpus and bad neurons") {
  const auto acts = word_set({{"x", "y"}});
  const WordCorpus words = {{"left", "right"}};
  CHECK(top_words(acts, words, 1, 1).entries[0].word == "left");
  try {
    top_words(acts, {}, 2, 1);
    FAIL("expected OutOfRangeNeuron");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OutOfRangeNeuron);
  }
  try {
    top_words(acts, {{"only"}}, 0, 1);
    FAIL("expected StructureMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StructureMismatch);
  }
  const auto tsv = to_tsv(top_words(acts, {}, 1, 2));
  CHECK(tsv.find('\t') != std::string::npos);
  CHECK(to_json(top_words(acts, {}, 1, 2))["entries"].size() == 2);
}

TEST_CASE("heatmap intensities") {
  const auto acts = word_set({{"a", "bb", "ccccc"}, {"dddd"}});
  const auto doc = make_heatmap(acts, {}, 1);
  CHECK(doc.intensity[0][0] == doctest::Approx(-1.0));
  CHECK(doc.intensity[0][2] == doctest::Approx(1.0));
  CHECK(doc.intensity[1][0] == doctest::Approx(0.5));
  CHECK(intensity_class(1.0) == kIntensityLevels);
  CHECK(intensity_class(-1.0) == -kIntensityLevels);
  CHECK(intensity_class(0.0) == 0);

  const std::vector<std::size_t> second = {1};
  CHECK(make_heatmap(acts, {}, 1, second).tokens == std::vector<std::vector<std::string>>{{"dddd"}});

  const auto zero = make_heatmap(word_set({{"x", "y"}}), {}, 0);
  for (double v : zero.intensity[0]) CHECK(v == 0.0);
  const auto html = render_html(zero);
  CHECK(html.find("ip1") == std::string::npos);
  CHECK(html.find("in1") == std::string::npos);
}

TEST_CASE("html escaping and structure") {
  const auto acts = word_set({{"<b>", "R&D", "\"q\"", "it's"}});
  const auto html = render_html(make_heatmap(acts, {}, 1));
  CHECK(html.rfind("<!DOCTYPE html>", 0) == 0);
  CHECK(html.find("&lt;b&gt;") != std::string::npos);
  CHECK(html.find("R&amp;D") != std::string::npos);
  CHECK(html.find("&quot;q&quot;") != std::string::npos);
  CHECK(html.find("<b>") == std::string::npos);
  CHECK(html.find("R&D") == std::string::npos);
  CHECK(html.find("data-intensity=") != std::string::npos);
}

TEST_CASE("ansi and file output") {
  const auto acts = word_set({{"hello", "there"}, {"a"}});
  const auto ansi = render_ansi(make_heatmap(acts, {}, 1));
  CHECK(ansi.find("\x1b[48;2;") != std::string::npos);
  CHECK(std::count(ansi.begin(), ansi.end(), '\n') == 2);

  TempDir dir;
  render_heatmap(acts, {}, 1, dir / "h.html", HeatmapFormat::html);
  std::ifstream in(dir / "h.html");
  std::stringstream text;
  text << in.rdbuf();
  CHECK(text.str() == render_html(make_heatmap(acts, {}, 1)));
  CHECK_THROWS_AS(render_heatmap(acts, {}, 1, dir / "missing" / "h.html", HeatmapFormat::html), Error);
  CHECK(parse_heatmap_format("ansi") == HeatmapFormat::ansi);
  CHECK_THROWS_AS(parse_heatmap_format("svg"), Error);
}
