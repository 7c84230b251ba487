#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

namespace neuroscope {

/// Bidirectional label string <-> id map; ids are assigned in insertion order.
class LabelVocab {
 public:
  LabelVocab() = default;
  explicit LabelVocab(std::vector<std::string> labels);

  int add(const std::string& label);
  int id(std::string_view label) const;  // throws UnknownLabel
  bool contains(std::string_view label) const;
  const std::string& label(int id) const { return labels_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }

  friend bool operator==(const LabelVocab& a, const LabelVocab& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> ids_;
};

struct LabeledSentence {
  std::vector<std::string> words;
  std::vector<int> labels;

  friend bool operator==(const LabeledSentence&, const LabeledSentence&) = default;
};

struct LabeledCorpus {
  std::vector<LabeledSentence> sentences;
  LabelVocab vocab;

  std::size_t token_total() const noexcept;
  friend bool operator==(const LabeledCorpus&, const LabeledCorpus&) = default;
};

using TokenPredicate = std::function<bool(std::string_view)>;

struct AnnotationRule {
  struct Regex {
    std::string pattern;
  };
  std::variant<std::unordered_set<std::string>, Regex, TokenPredicate> payload;
  std::string positive_label = "positive";
  std::string negative_label = "negative";

  static AnnotationRule vocabulary(std::unordered_set<std::string> words);
  static AnnotationRule regex(std::string pattern);
  static AnnotationRule predicate(TokenPredicate fn);
};

/// Labels each token positive iff the rule matches the whole token. Regex
/// rules are ECMAScript patterns matched against the full token; a bad
/// pattern throws InvalidPattern. Vocab ids: negative = 0, positive = 1.
LabeledCorpus annotate_data(const std::vector<std::vector<std::string>>& corpus, const AnnotationRule& rule);

/// Parses the command-line rule syntax:
///   regex:PATTERN | vocab:FILE | ends-with:SUFFIX | starts-with:PREFIX | length>=N
AnnotationRule parse_rule(std::string_view text);

/// One sentence per line, whitespace tokenized. Trailing blank lines are ignored.
std::vector<std::vector<std::string>> read_tokenized_lines(const std::filesystem::path& path);

/// Parallel words/labels files. Throws LengthMismatch (1-based line number in
/// the locator) or EmptyCorpus.
LabeledCorpus load_annotations(const std::filesystem::path& words_path, const std::filesystem::path& labels_path);

void write_labels(const LabeledCorpus& corpus, const std::filesystem::path& path);

/// Control task: every word type receives one label drawn from the corpus'
/// empirical label distribution; all occurrences of the type share it.
LabeledCorpus make_control_task(const LabeledCorpus& corpus, std::uint64_t seed);

}  // namespace neuroscope
