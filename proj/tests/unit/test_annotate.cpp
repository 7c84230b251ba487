#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "doctest.h"
#include "neuroscope/annotate.hpp"
#include "neuroscope/error.hpp"
#include "tempdir.hpp"

using namespace neuroscope;

namespace {

std::vector<std::string> label_names(const LabeledCorpus& corpus, std::size_t sentence) {
  std::vector<std::string> out;
  for (int l : corpus.sentences[sentence].labels) out.push_back(corpus.vocab.label(l));
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("digit regex") {
  const auto labeled = annotate_data({{"In", "1918", "it", "rained"}}, AnnotationRule::regex(R"(^\d+$)"));
  CHECK(label_names(labeled, 0) == std::vector<std::string>{"negative", "positive", "negative", "negative"});
  CHECK(labeled.vocab.label(0) == "negative");
  CHECK(labeled.vocab.label(1) == "positive");
}

TEST_CASE("regex must match the whole token") {
  const auto labeled = annotate_data({{"a1", "11", "1a"}}, AnnotationRule::regex(R"(\d+)"));
  CHECK(labeled.sentences[0].labels == std::vector<int>{0, 1, 0});
}

TEST_CASE("regex rule agrees with std::regex_match on random tokens") {
  std::mt19937_64 rng(3);
  const std::string alphabet = "ab1-";
  std::vector<std::vector<std::string>> corpus(20);
  for (auto& sentence : corpus) {
    for (int t = 0; t < 8; ++t) {
      std::string token;
      for (std::size_t len = 1 + rng() % 4; token.size() < len;) token.push_back(alphabet[rng() % alphabet.size()]);
      sentence.push_back(token);
    }
  }
  const std::string pattern = "a[b1]*-?";
  const auto labeled = annotate_data(corpus, AnnotationRule::regex(pattern));
  const std::regex re(pattern, std::regex::ECMAScript);
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    for (std::size_t t = 0; t < corpus[s].size(); ++t) {
      CHECK(labeled.sentences[s].labels[t] == (std::regex_match(corpus[s][t], re) ? 1 : 0));
    }
  }
}

TEST_CASE("predicate and vocabulary rules") {
  const auto ing = annotate_data({{"running", "ring", "rings"}},
                                 AnnotationRule::predicate([](std::string_view w) { return w.ends_with("ing"); }));
  CHECK(ing.sentences[0].labels == std::vector<int>{1, 1, 0});
  const auto the = annotate_data({{"the", "The"}}, AnnotationRule::vocabulary({"the"}));
  CHECK(the.sentences[0].labels == std::vector<int>{1, 0});
}

TEST_CASE("rule syntax") {
  const std::vector<std::vector<std::string>> corpus = {{"walking", "ran", "2021", "preheat"}};
  CHECK(annotate_data(corpus, parse_rule("ends-with:ing")).sentences[0].labels == std::vector<int>{1, 0, 0, 0});
  CHECK(annotate_data(corpus, parse_rule("starts-with:pre")).sentences[0].labels == std::vector<int>{0, 0, 0, 1});
  CHECK(annotate_data(corpus, parse_rule("length>=4")).sentences[0].labels == std::vector<int>{1, 0, 1, 1});
  CHECK(annotate_data(corpus, parse_rule("regex:[0-9]+")).sentences[0].labels == std::vector<int>{0, 0, 1, 0});

  TempDir dir;
  write_text(dir / "vocab.txt", "ran\nwalking\n");
  CHECK(annotate_data(corpus, parse_rule("vocab:" + (dir / "vocab.txt").string())).sentences[0].labels ==
        std::vector<int>{1, 1, 0, 0});
}

TEST_CASE("bad rules") {
  try {
    annotate_data({{"x"}}, AnnotationRule::regex("(unclosed"));
    FAIL("expected InvalidPattern");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidPattern);
  }
  CHECK_THROWS_AS(parse_rule("soundex:abc"), Error);
}

TEST_CASE("loading parallel files") {
  TempDir dir;
  write_text(dir / "w.txt", "dogs bark\n");
  write_text(dir / "l.txt", "NNS VBP\n");
  const auto corpus = load_annotations(dir / "w.txt", dir / "l.txt");
  REQUIRE(corpus.sentences.size() == 1);
  CHECK(corpus.vocab.labels() == std::vector<std::string>{"NNS", "VBP"});
  CHECK(corpus.sentences[0].labels == std::vector<int>{0, 1});

  std::string words, labels;
  for (int i = 1; i <= 8; ++i) {
    words += "a b\n";
    labels += i == 7 ? "X\n" : "X Y\n";
  }
  write_text(dir / "w2.txt", words);
  write_text(dir / "l2.txt", labels);
  try {
    load_annotations(dir / "w2.txt", dir / "l2.txt");
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LengthMismatch);
    CHECK(e.locator() == "line 7");
  }

  write_text(dir / "e1.txt", "");
  write_text(dir / "e2.txt", "");
  try {
    load_annotations(dir / "e1.txt", dir / "e2.txt");
    FAIL("expected EmptyCorpus");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyCorpus);
  }
}

TEST_CASE("labels round trip through a file") {
  TempDir dir;
  const auto labeled = annotate_data({{"a", "bb"}, {"ccc"}}, parse_rule("length>=2"));
  write_labels(labeled, dir / "labels.txt");
  write_text(dir / "words.txt", "a bb\nccc\n");
  const auto back = load_annotations(dir / "words.txt", dir / "labels.txt");
  for (std::size_t s = 0; s < 2; ++s) CHECK(label_names(back, s) == label_names(labeled, s));
}

TEST_CASE("control task") {
  LabeledCorpus corpus;
  corpus.vocab = LabelVocab({"A", "B", "C"});
  std::mt19937_64 rng(4);
  for (int s = 0; s < 200; ++s) {
    LabeledSentence sentence;
    for (int t = 0; t < 10; ++t) {
      sentence.words.push_back(t == 0 ? "bank" : "w" + std::to_string(rng() % 500));
      sentence.labels.push_back(static_cast<int>(rng() % 3 == 0 ? 0 : 1 + rng() % 2));
    }
    corpus.sentences.push_back(sentence);
  }
  const auto control = make_control_task(corpus, 11);
  CHECK(control == make_control_task(corpus, 11));
  CHECK_FALSE(control == make_control_task(corpus, 12));
  CHECK(control.vocab == corpus.vocab);

  std::map<std::string, int> seen;
  for (const auto& sentence : control.sentences) {
    for (std::size_t t = 0; t < sentence.words.size(); ++t) {
      auto [it, fresh] = seen.emplace(sentence.words[t], sentence.labels[t]);
      REQUIRE(it->second == sentence.labels[t]);
    }
  }
  CHECK(control.sentences.size() == corpus.sentences.size());
}
