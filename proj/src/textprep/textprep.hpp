// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace asr::textprep {

using TokenId = std::int32_t;

/// Lowercased word tokens split on every non-alphanumeric code point.
std::vector<std::string> tokenize_words(std::string_view text);

/// Lowercased pre-tokens for sub-word encoding: whitespace separates words,
/// every other non-alphanumeric code point is a word of its own.
std::vector<std::string> pretokenize(std::string_view text);

/// Code point boundaries of a UTF-8 string (byte offsets, plus the end).
std::vector<std::size_t> utf8_boundaries(std::string_view s);

class SubwordVocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kCls = 2;
    static constexpr TokenId kSep = 3;

    SubwordVocabulary();
    /// First four entries must be [PAD], [UNK], [CLS], [SEP]; entries unique.
    explicit SubwordVocabulary(std::vector<std::string> entries);

    static SubwordVocabulary load(const std::string& path);
    static SubwordVocabulary parse(std::string_view content);
    std::string format() const;
    void save(const std::string& path) const;

    /// Frequency-based builder: specials, every character seen (bare and
    /// "##"-continued), then the most frequent whole words up to max_size.
    static SubwordVocabulary build(std::span<const std::string> texts, std::size_t max_size);

    std::size_t size() const { return entries_.size(); }
    const std::string& piece(TokenId id) const { return entries_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& entries() const { return entries_; }
    /// -1 when absent.
    TokenId find(std::string_view piece) const;

private:
    std::vector<std::string> entries_;
    std::unordered_map<std::string, TokenId> index_;
};

/// Greedy longest-match-first decomposition. Characters with no matching
/// piece become [UNK]. No [CLS]/[SEP] inserted.
std::vector<TokenId> subword_encode(std::string_view text, const SubwordVocabulary& vocab);

/// Joins pieces with spaces, gluing "##" continuations to their predecessor.
std::string subword_decode(std::span<const TokenId> ids, const SubwordVocabulary& vocab);

struct Segment {
    std::vector<TokenId> ids;
    std::size_t start = 0;
    std::size_t length = 0;
};

struct SegmentSpan {
    std::size_t start = 0;
    std::size_t length = 0;
};

inline constexpr std::size_t kDefaultWindow = 256;
inline constexpr std::size_t kDefaultOverlap = 32;

/// Windows of `window` tokens advancing by window - overlap.
std::vector<SegmentSpan> segment_spans(std::size_t n, std::size_t window = kDefaultWindow,
                                       std::size_t overlap = kDefaultOverlap);
std::vector<Segment> segment(std::span<const TokenId> ids, std::size_t window = kDefaultWindow,
                             std::size_t overlap = kDefaultOverlap);

}  // namespace asr::textprep
