#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neuroscope/activation_store.hpp"

namespace neuroscope {

/// Subword marker conventions.
///   wordpiece      continuation prefix "##", specials [CLS] [SEP] [PAD] [MASK]
///   bpe_gpt2       word-start prefix "Ġ" (U+0120), special <|endoftext|>
///   bpe_endmarker  word-end suffix "</w>", specials <s> </s> <pad>
///   generic        strips any of the above plus "▁" and "@@", no marker checks
enum class TokenizerScheme { wordpiece, bpe_gpt2, bpe_endmarker, generic };

std::string_view to_string(TokenizerScheme scheme);
TokenizerScheme parse_scheme(std::string_view text);

/// Subword -> word assignment for one sentence. Special tokens carry
/// word index -1 and are masked.
struct SubwordMap {
  std::vector<int> word_index;
  std::vector<bool> special;
  std::size_t word_count = 0;

  std::size_t size() const noexcept { return word_index.size(); }
  friend bool operator==(const SubwordMap&, const SubwordMap&) = default;
};

/// Aligns tokenizer output to whitespace-separated words by consuming the
/// characters of each word with marker-stripped subwords, matching
/// case-insensitively (uncased vocabularies lowercase their pieces). An
/// [UNK] piece consumes the rest of the current word. Throws
/// AlignmentFailure naming the first word that cannot be reconstructed.
SubwordMap build_subword_map(std::span<const std::string> words, std::span<const std::string> subwords,
                             TokenizerScheme scheme);

enum class Aggregation { first, last, average };

std::string_view to_string(Aggregation mode);
Aggregation parse_aggregation(std::string_view text);

/// Collapses subword activations to one vector per word. Special tokens are
/// dropped under every mode. Throws LengthMismatch when the map does not
/// cover the sentence's tokens.
SentenceActivations aggregate(const SentenceActivations& acts, const SubwordMap& map, Aggregation mode,
                              std::span<const std::string> words = {});

/// Sentence-by-sentence aggregate over a whole set.
ActivationSet aggregate(const ActivationSet& acts, std::span<const SubwordMap> maps, Aggregation mode,
                        std::span<const std::vector<std::string>> words = {});

/// Sidecar written next to raw subword dumps (`<activations>.map.json`).
struct SubwordSidecar {
  TokenizerScheme scheme = TokenizerScheme::generic;
  std::vector<std::vector<std::string>> subwords;
  std::vector<SubwordMap> maps;
};

SubwordSidecar read_sidecar(const std::filesystem::path& path);
void write_sidecar(const SubwordSidecar& sidecar, const std::filesystem::path& path);

}  // namespace neuroscope
