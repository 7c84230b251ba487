#include "neuroscope/corpus_align.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include <nlohmann/json.hpp>

#include "neuroscope/error.hpp"

namespace neuroscope {

using nlohmann::json;

std::string_view to_string(TokenizerScheme scheme) {
  switch (scheme) {
    case TokenizerScheme::wordpiece: return "wordpiece";
    case TokenizerScheme::bpe_gpt2: return "bpe-gpt2";
    case TokenizerScheme::bpe_endmarker: return "bpe-endmarker";
    case TokenizerScheme::generic: return "generic";
  }
  return "generic";
}

TokenizerScheme parse_scheme(std::string_view text) {
  if (text == "wordpiece") return TokenizerScheme::wordpiece;
  if (text == "bpe-gpt2" || text == "bpe_gpt2") return TokenizerScheme::bpe_gpt2;
  if (text == "bpe-endmarker" || text == "bpe_endmarker") return TokenizerScheme::bpe_endmarker;
  if (text == "generic") return TokenizerScheme::generic;
  throw Error(ErrorKind::InvalidArgument, "unknown tokenizer scheme '" + std::string(text) + "'");
}

std::string_view to_string(Aggregation mode) {
  switch (mode) {
    case Aggregation::first: return "first";
    case Aggregation::last: return "last";
    case Aggregation::average: return "average";
  }
  return "average";
}

Aggregation parse_aggregation(std::string_view text) {
  if (text == "first") return Aggregation::first;
  if (text == "last") return Aggregation::last;
  if (text == "average" || text == "mean") return Aggregation::average;
  throw Error(ErrorKind::InvalidArgument, "unknown aggregation '" + std::string(text) + "'");
}

namespace {

constexpr std::string_view kGptWordStart = "\xC4\xA0";    // U+0120 'Ġ'
constexpr std::string_view kSentencePiece = "\xE2\x96\x81";  // U+2581 '▁'
constexpr std::string_view kEndMarker = "</w>";

constexpr std::array<std::string_view, 10> kSpecials = {
    "[CLS]", "[SEP]", "[PAD]", "[MASK]", "<s>", "</s>", "<pad>", "<|endoftext|>", "<cls>", "<sep>"};
constexpr std::array<std::string_view, 3> kUnknown = {"[UNK]", "<unk>", "<UNK>"};

bool is_special(std::string_view token) {
  return std::find(kSpecials.begin(), kSpecials.end(), token) != kSpecials.end();
}

bool is_unknown(std::string_view piece) {
  return std::find(kUnknown.begin(), kUnknown.end(), piece) != kUnknown.end();
}

struct Piece {
  std::string_view text;
  bool continuation = false;  // "##" prefix
  bool word_start = false;    // "Ġ" or "▁" prefix
};

Piece strip_markers(std::string_view token, TokenizerScheme scheme) {
  Piece p{token};
  const bool any = scheme == TokenizerScheme::generic;
  if ((any || scheme == TokenizerScheme::wordpiece) && p.text.starts_with("##") && p.text.size() > 2) {
    p.text.remove_prefix(2);
    p.continuation = true;
  }
  if ((any || scheme == TokenizerScheme::bpe_gpt2) && p.text.starts_with(kGptWordStart)) {
    p.text.remove_prefix(kGptWordStart.size());
    p.word_start = true;
  }
  if (any && p.text.starts_with(kSentencePiece)) {
    p.text.remove_prefix(kSentencePiece.size());
    p.word_start = true;
  }
  if ((any || scheme == TokenizerScheme::bpe_endmarker) && p.text.ends_with(kEndMarker)) {
    p.text.remove_suffix(kEndMarker.size());
  }
  if (any && p.text.ends_with("@@")) {
    p.text.remove_suffix(2);
  }
  return p;
}

bool prefix_matches_folded(std::string_view text, std::string_view prefix) {
  if (prefix.size() > text.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    const auto a = static_cast<unsigned char>(text[i]);
    const auto b = static_cast<unsigned char>(prefix[i]);
    if (a != b && std::tolower(a) != std::tolower(b)) return false;
  }
  return true;
}

[[noreturn]] void alignment_failure(std::size_t word, const std::string& why) {
  throw Error(ErrorKind::AlignmentFailure, why, "word " + std::to_string(word));
}

}  // namespace

SubwordMap build_subword_map(std::span<const std::string> words, std::span<const std::string> subwords,
                             TokenizerScheme scheme) {
  SubwordMap map;
  map.word_index.assign(subwords.size(), -1);
  map.special.assign(subwords.size(), false);
  map.word_count = words.size();

  std::size_t word = 0;
  std::size_t pos = 0;  // bytes of words[word] consumed so far
  for (std::size_t i = 0; i < subwords.size(); ++i) {
    const std::string& token = subwords[i];
    if (is_special(token)) {
      map.special[i] = true;
      continue;
    }
    if (word >= words.size()) {
      alignment_failure(words.size(), "subword '" + token + "' left over after the last word");
    }
    const Piece piece = strip_markers(token, scheme);
    const std::string& target = words[word];

    if (piece.text.empty()) {
      // A bare marker (split-off 'Ġ' or '</w>'): attach to the word it borders.
      const bool trails_previous = pos == 0 && word > 0 && scheme == TokenizerScheme::bpe_endmarker;
      map.word_index[i] = static_cast<int>(trails_previous ? word - 1 : word);
      continue;
    }
    if (piece.continuation && pos == 0 && scheme == TokenizerScheme::wordpiece) {
      alignment_failure(word, "continuation piece '" + token + "' cannot start a word");
    }
    if (piece.word_start && pos > 0 && scheme == TokenizerScheme::bpe_gpt2) {
      alignment_failure(word, "word-start piece '" + token + "' inside word '" + target + "'");
    }

    if (is_unknown(piece.text)) {
      pos = target.size();
    } else if (prefix_matches_folded(std::string_view(target).substr(pos), piece.text)) {
      pos += piece.text.size();
    } else {
      alignment_failure(word, "piece '" + token + "' does not continue word '" + target + "'");
    }
    map.word_index[i] = static_cast<int>(word);
    if (pos == target.size()) {
      ++word;
      pos = 0;
    }
  }
  if (word < words.size()) {
    alignment_failure(word, "word '" + words[word] + "' is not covered by the subwords");
  }
  return map;
}

SentenceActivations aggregate(const SentenceActivations& acts, const SubwordMap& map, Aggregation mode,
                              std::span<const std::string> words) {
  if (map.size() != acts.token_count()) {
    throw Error(ErrorKind::LengthMismatch,
                "subword map covers " + std::to_string(map.size()) + " tokens, sentence has " +
                    std::to_string(acts.token_count()),
                "sentence " + std::to_string(acts.sentence_index));
  }
  if (!words.empty() && words.size() != map.word_count) {
    throw Error(ErrorKind::LengthMismatch, "word list length differs from map word count",
                "sentence " + std::to_string(acts.sentence_index));
  }

  // [begin, end) subword range per word
  std::vector<std::vector<std::size_t>> members(map.word_count);
  int previous = -1;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const int w = map.word_index[i];
    if (map.special[i] || w < 0) continue;
    if (w < previous || static_cast<std::size_t>(w) >= map.word_count) {
      throw Error(ErrorKind::LengthMismatch, "word indices must be non-decreasing and < word count",
                  "sentence " + std::to_string(acts.sentence_index) + ", token " + std::to_string(i));
    }
    previous = w;
    members[static_cast<std::size_t>(w)].push_back(i);
  }

  SentenceActivations out;
  out.sentence_index = acts.sentence_index;
  out.layer_count = acts.layer_count;
  out.layer_width = acts.layer_width;
  out.tokens.resize(map.word_count);
  for (std::size_t w = 0; w < map.word_count; ++w) {
    if (members[w].empty()) {
      throw Error(ErrorKind::LengthMismatch, "word has no subwords",
                  "sentence " + std::to_string(acts.sentence_index) + ", word " + std::to_string(w));
    }
    if (!words.empty()) {
      out.tokens[w] = words[w];
    } else {
      for (std::size_t i : members[w]) out.tokens[w] += acts.tokens[i];
    }
  }
  out.values.assign(out.layer_count * map.word_count * out.layer_width, 0.0f);

  std::vector<double> sum(acts.layer_width);
  for (std::size_t l = 0; l < acts.layer_count; ++l) {
    for (std::size_t w = 0; w < map.word_count; ++w) {
      auto dst = out.vector(l, w);
      const auto& m = members[w];
      switch (mode) {
        case Aggregation::first: {
          const auto src = acts.vector(l, m.front());
          std::copy(src.begin(), src.end(), dst.begin());
          break;
        }
        case Aggregation::last: {
          const auto src = acts.vector(l, m.back());
          std::copy(src.begin(), src.end(), dst.begin());
          break;
        }
        case Aggregation::average: {
          std::fill(sum.begin(), sum.end(), 0.0);
          for (std::size_t i : m) {
            const auto src = acts.vector(l, i);
            for (std::size_t n = 0; n < src.size(); ++n) sum[n] += src[n];
          }
          for (std::size_t n = 0; n < sum.size(); ++n) {
            dst[n] = static_cast<float>(sum[n] / static_cast<double>(m.size()));
          }
          break;
        }
      }
    }
  }
  return out;
}

ActivationSet aggregate(const ActivationSet& acts, std::span<const SubwordMap> maps, Aggregation mode,
                        std::span<const std::vector<std::string>> words) {
  if (maps.size() != acts.sentences.size()) {
    throw Error(ErrorKind::LengthMismatch, "subword maps given for " + std::to_string(maps.size()) +
                                               " sentences, activations have " +
                                               std::to_string(acts.sentences.size()));
  }
  if (!words.empty() && words.size() != acts.sentences.size()) {
    throw Error(ErrorKind::LengthMismatch, "word lists do not match sentence count");
  }
  ActivationSet out;
  out.layer_count = acts.layer_count;
  out.layer_width = acts.layer_width;
  out.precision = acts.precision;
  out.sentences.reserve(acts.sentences.size());
  for (std::size_t s = 0; s < acts.sentences.size(); ++s) {
    out.sentences.push_back(aggregate(acts.sentences[s], maps[s], mode,
                                      words.empty() ? std::span<const std::string>{} : std::span(words[s])));
  }
  return out;
}

SubwordSidecar read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open subword map", path.string());
  json doc = json::parse(in, nullptr, false);
  if (!doc.is_object() || !doc.contains("sentences") || !doc.at("sentences").is_array()) {
    throw Error(ErrorKind::MalformedFile, "subword map needs a 'sentences' array", path.string());
  }
  SubwordSidecar sidecar;
  if (doc.contains("scheme")) sidecar.scheme = parse_scheme(doc.at("scheme").get<std::string>());
  std::size_t idx = 0;
  for (const auto& entry : doc.at("sentences")) {
    const std::string loc = path.string() + ", sentence " + std::to_string(idx++);
    try {
      auto subwords = entry.at("subwords").get<std::vector<std::string>>();
      SubwordMap map;
      map.word_index = entry.at("word_index").get<std::vector<int>>();
      map.special = entry.contains("special") ? entry.at("special").get<std::vector<bool>>()
                                              : std::vector<bool>(map.word_index.size(), false);
      if (map.word_index.size() != subwords.size() || map.special.size() != subwords.size()) {
        throw Error(ErrorKind::MalformedFile, "subwords, word_index and special must have equal length", loc);
      }
      int max_word = -1;
      for (std::size_t i = 0; i < map.word_index.size(); ++i) {
        if (map.word_index[i] < 0) map.special[i] = true;
        max_word = std::max(max_word, map.word_index[i]);
      }
      map.word_count = static_cast<std::size_t>(max_word + 1);
      sidecar.subwords.push_back(std::move(subwords));
      sidecar.maps.push_back(std::move(map));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedFile, e.what(), loc);
    }
  }
  return sidecar;
}

void write_sidecar(const SubwordSidecar& sidecar, const std::filesystem::path& path) {
  json doc;
  doc["scheme"] = std::string(to_string(sidecar.scheme));
  json sentences = json::array();
  for (std::size_t s = 0; s < sidecar.maps.size(); ++s) {
    json entry;
    entry["subwords"] = s < sidecar.subwords.size() ? sidecar.subwords[s] : std::vector<std::string>{};
    entry["word_index"] = sidecar.maps[s].word_index;
    entry["special"] = std::vector<bool>(sidecar.maps[s].special.begin(), sidecar.maps[s].special.end());
    sentences.push_back(std::move(entry));
  }
  doc["sentences"] = std::move(sentences);
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write subword map", path.string());
  out << doc.dump() << '\n';
}

}  // namespace neuroscope
