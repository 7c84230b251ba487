#include "neuroscope/annotate.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "neuroscope/error.hpp"

namespace neuroscope {

LabelVocab::LabelVocab(std::vector<std::string> labels) {
  for (auto& l : labels) add(l);
}

int LabelVocab::add(const std::string& label) {
  if (auto it = ids_.find(label); it != ids_.end()) return it->second;
  const int id = static_cast<int>(labels_.size());
  labels_.push_back(label);
  ids_.emplace(label, id);
  return id;
}

int LabelVocab::id(std::string_view label) const {
  auto it = ids_.find(std::string(label));
  if (it == ids_.end()) throw Error(ErrorKind::UnknownLabel, "label '" + std::string(label) + "' not in vocabulary");
  return it->second;
}

bool LabelVocab::contains(std::string_view label) const { return ids_.contains(std::string(label)); }

std::size_t LabeledCorpus::token_total() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.words.size();
  return n;
}

AnnotationRule AnnotationRule::vocabulary(std::unordered_set<std::string> words) {
  AnnotationRule r;
  r.payload = std::move(words);
  return r;
}

AnnotationRule AnnotationRule::regex(std::string pattern) {
  AnnotationRule r;
  r.payload = Regex{std::move(pattern)};
  return r;
}

AnnotationRule AnnotationRule::predicate(TokenPredicate fn) {
  AnnotationRule r;
  r.payload = std::move(fn);
  return r;
}

LabeledCorpus annotate_data(const std::vector<std::vector<std::string>>& corpus, const AnnotationRule& rule) {
  TokenPredicate matches;
  if (const auto* vocab = std::get_if<std::unordered_set<std::string>>(&rule.payload)) {
    matches = [vocab](std::string_view tok) { return vocab->contains(std::string(tok)); };
  } else if (const auto* rx = std::get_if<AnnotationRule::Regex>(&rule.payload)) {
    std::shared_ptr<const std::regex> compiled;
    try {
      compiled = std::make_shared<const std::regex>(rx->pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw Error(ErrorKind::InvalidPattern, "cannot compile '" + rx->pattern + "': " + e.what());
    }
    matches = [compiled](std::string_view tok) { return std::regex_match(tok.begin(), tok.end(), *compiled); };
  } else {
    matches = std::get<TokenPredicate>(rule.payload);
    if (!matches) throw Error(ErrorKind::InvalidArgument, "empty predicate");
  }

  LabeledCorpus out;
  const int neg = out.vocab.add(rule.negative_label);
  const int pos = out.vocab.add(rule.positive_label);
  out.sentences.reserve(corpus.size());
  for (const auto& words : corpus) {
    LabeledSentence s;
    s.words = words;
    s.labels.reserve(words.size());
    for (const auto& w : words) s.labels.push_back(matches(w) ? pos : neg);
    out.sentences.push_back(std::move(s));
  }
  return out;
}

AnnotationRule parse_rule(std::string_view text) {
  auto after = [&](std::string_view prefix) { return std::string(text.substr(prefix.size())); };
  if (text.starts_with("regex:")) return AnnotationRule::regex(after("regex:"));
  if (text.starts_with("vocab:")) {
    const std::string path = after("vocab:");
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open vocabulary file", path);
    std::unordered_set<std::string> words;
    std::string w;
    while (in >> w) words.insert(w);
    return AnnotationRule::vocabulary(std::move(words));
  }
  if (text.starts_with("ends-with:")) {
    return AnnotationRule::predicate([s = after("ends-with:")](std::string_view t) { return t.ends_with(s); });
  }
  if (text.starts_with("starts-with:")) {
    return AnnotationRule::predicate([s = after("starts-with:")](std::string_view t) { return t.starts_with(s); });
  }
  if (text.starts_with("length>=")) {
    const std::string digits = after("length>=");
    std::size_t n = 0;
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (res.ec != std::errc() || res.ptr != digits.data() + digits.size()) {
      throw Error(ErrorKind::InvalidArgument, "bad length in rule '" + std::string(text) + "'");
    }
    return AnnotationRule::predicate([n](std::string_view t) { return t.size() >= n; });
  }
  throw Error(ErrorKind::InvalidArgument,
              "unknown rule '" + std::string(text) +
                  "' (expected regex:, vocab:, ends-with:, starts-with: or length>=)");
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(std::move(tok));
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open file", path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(std::move(line));
  while (!lines.empty() && lines.back().find_first_not_of(" \t\r") == std::string::npos) lines.pop_back();
  return lines;
}

}  // namespace

std::vector<std::vector<std::string>> read_tokenized_lines(const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    auto words = split_ws(line);
    if (words.empty()) {
      throw Error(ErrorKind::MalformedFile, "empty sentence", path.string() + ":" + std::to_string(line_no));
    }
    out.push_back(std::move(words));
  }
  return out;
}

LabeledCorpus load_annotations(const std::filesystem::path& words_path, const std::filesystem::path& labels_path) {
  const auto word_lines = read_lines(words_path);
  const auto label_lines = read_lines(labels_path);
  if (word_lines.empty() && label_lines.empty()) {
    throw Error(ErrorKind::EmptyCorpus, "no sentences in " + words_path.string());
  }
  if (word_lines.size() != label_lines.size()) {
    const std::size_t line = std::min(word_lines.size(), label_lines.size()) + 1;
    throw Error(ErrorKind::LengthMismatch,
                "words file has " + std::to_string(word_lines.size()) + " lines, labels file has " +
                    std::to_string(label_lines.size()),
                "line " + std::to_string(line));
  }
  LabeledCorpus corpus;
  for (std::size_t i = 0; i < word_lines.size(); ++i) {
    auto words = split_ws(word_lines[i]);
    auto labels = split_ws(label_lines[i]);
    if (words.size() != labels.size() || words.empty()) {
      throw Error(ErrorKind::LengthMismatch,
                  std::to_string(words.size()) + " words vs " + std::to_string(labels.size()) + " labels",
                  "line " + std::to_string(i + 1));
    }
    LabeledSentence s;
    s.words = std::move(words);
    s.labels.reserve(labels.size());
    for (const auto& l : labels) s.labels.push_back(corpus.vocab.add(l));
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

void write_labels(const LabeledCorpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write labels", path.string());
  for (const auto& s : corpus.sentences) {
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      if (i) out << ' ';
      out << corpus.vocab.label(s.labels[i]);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoFailure, "write failed", path.string());
}

LabeledCorpus make_control_task(const LabeledCorpus& corpus, std::uint64_t seed) {
  std::vector<double> weights(corpus.vocab.size(), 0.0);
  for (const auto& s : corpus.sentences) {
    for (int l : s.labels) weights[static_cast<std::size_t>(l)] += 1.0;
  }

  LabeledCorpus out;
  out.vocab = corpus.vocab;
  if (corpus.token_total() == 0) {
    out.sentences = corpus.sentences;
    return out;
  }

  std::mt19937_64 engine(seed);
  std::discrete_distribution<int> draw(weights.begin(), weights.end());
  // Types are visited in first-appearance order so the draw sequence is stable.
  std::unordered_map<std::string, int> control;
  out.sentences.reserve(corpus.sentences.size());
  for (const auto& s : corpus.sentences) {
    LabeledSentence c;
    c.words = s.words;
    c.labels.reserve(s.words.size());
    for (const auto& w : s.words) {
      auto [it, inserted] = control.try_emplace(w, 0);
      if (inserted) it->second = draw(engine);
      c.labels.push_back(it->second);
    }
    out.sentences.push_back(std::move(c));
  }
  return out;
}

}  // namespace neuroscope
