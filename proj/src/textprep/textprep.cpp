// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "textprep/textprep.hpp"

#include <algorithm>
#include <clocale>
#include <cwctype>
#include <locale.h>
#include <map>
#include <set>
#include <wctype.h>

#include "common/error.hpp"
#include "common/tensor_file.hpp"

namespace asr::textprep {
namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes one code point starting at s[i]; advances i. Invalid bytes decode
// to U+FFFD one byte at a time.
char32_t decode_one(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return kReplacement;
    }
    for (int k = 1; k < len; ++k) {
        const int c = cont(static_cast<std::size_t>(k));
        if (c < 0) {
            ++i;
            return kReplacement;
        }
        cp = (cp << 6) | static_cast<char32_t>(c);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

void encode_one(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Unicode character classes come from the C.UTF-8 locale; it is created once
// and only ever used through the *_l functions, so the global locale is
// untouched.
locale_t utf8_locale() {
    static const locale_t loc = [] {
        locale_t l = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(nullptr));
        if (l == static_cast<locale_t>(nullptr)) l = newlocale(LC_CTYPE_MASK, "en_US.UTF-8", static_cast<locale_t>(nullptr));
        return l;
    }();
    return loc;
}

bool is_alnum(char32_t cp) {
    if (cp < 0x80) return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    const locale_t loc = utf8_locale();
    if (loc == static_cast<locale_t>(nullptr)) return false;
    return iswalnum_l(static_cast<wint_t>(cp), loc) != 0;
}

bool is_space(char32_t cp) {
    if (cp < 0x80) return cp == ' ' || (cp >= '\t' && cp <= '\r');
    const locale_t loc = utf8_locale();
    if (loc == static_cast<locale_t>(nullptr)) return false;
    return iswspace_l(static_cast<wint_t>(cp), loc) != 0;
}

char32_t to_lower(char32_t cp) {
    if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
    const locale_t loc = utf8_locale();
    if (loc == static_cast<locale_t>(nullptr)) return cp;
    return static_cast<char32_t>(towlower_l(static_cast<wint_t>(cp), loc));
}

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t cp = decode_one(text, i);
        if (is_alnum(cp)) {
            encode_one(to_lower(cp), cur);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> pretokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    };
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t cp = decode_one(text, i);
        if (is_space(cp)) {
            flush();
        } else if (is_alnum(cp)) {
            encode_one(to_lower(cp), cur);
        } else {
            flush();
            std::string p;
            encode_one(to_lower(cp), p);
            out.push_back(std::move(p));
        }
    }
    flush();
    return out;
}

std::vector<std::size_t> utf8_boundaries(std::string_view s) {
    std::vector<std::size_t> b;
    std::size_t i = 0;
    while (i < s.size()) {
        b.push_back(i);
        decode_one(s, i);
    }
    b.push_back(s.size());
    return b;
}

SubwordVocabulary::SubwordVocabulary() : SubwordVocabulary(std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]"}) {}

SubwordVocabulary::SubwordVocabulary(std::vector<std::string> entries) : entries_(std::move(entries)) {
    static const char* kSpecials[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
    if (entries_.size() < 4) throw validation_error("vocabulary needs the four special tokens");
    for (int i = 0; i < 4; ++i)
        if (entries_[static_cast<std::size_t>(i)] != kSpecials[i])
            throw validation_error(std::string("vocabulary line ") + std::to_string(i + 1) + " must be " + kSpecials[i]);
    index_.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].empty()) throw validation_error("vocabulary line " + std::to_string(i + 1) + " is empty");
        if (!index_.emplace(entries_[i], static_cast<TokenId>(i)).second)
            throw validation_error("duplicate vocabulary entry '" + entries_[i] + "'");
    }
}

SubwordVocabulary SubwordVocabulary::parse(std::string_view content) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string_view::npos) end = content.size();
        std::string_view line = content.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        pos = end + 1;
    }
    return SubwordVocabulary(std::move(lines));
}

SubwordVocabulary SubwordVocabulary::load(const std::string& path) { return parse(read_file(path)); }

std::string SubwordVocabulary::format() const {
    std::string out;
    for (const auto& e : entries_) {
        out += e;
        out += '\n';
    }
    return out;
}

void SubwordVocabulary::save(const std::string& path) const { write_file_atomic(path, format()); }

TokenId SubwordVocabulary::find(std::string_view piece) const {
    auto it = index_.find(std::string(piece));
    return it == index_.end() ? -1 : it->second;
}

SubwordVocabulary SubwordVocabulary::build(std::span<const std::string> texts, std::size_t max_size) {
    std::map<std::string, std::size_t> word_freq;
    std::set<std::string> chars;
    for (const auto& t : texts) {
        for (auto& w : pretokenize(t)) {
            const auto b = utf8_boundaries(w);
            for (std::size_t k = 0; k + 1 < b.size(); ++k) chars.insert(w.substr(b[k], b[k + 1] - b[k]));
            ++word_freq[std::move(w)];
        }
    }
    std::vector<std::string> entries{"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
    std::set<std::string> taken(entries.begin(), entries.end());
    auto add = [&](const std::string& p) {
        if (entries.size() < max_size && taken.insert(p).second) entries.push_back(p);
    };
    for (const auto& c : chars) add(c);
    for (const auto& c : chars) add("##" + c);

    std::vector<std::pair<std::string, std::size_t>> words(word_freq.begin(), word_freq.end());
    std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [w, _] : words) add(w);
    return SubwordVocabulary(std::move(entries));
}

std::vector<TokenId> subword_encode(std::string_view text, const SubwordVocabulary& vocab) {
    std::vector<TokenId> out;
    std::string candidate;
    for (const auto& word : pretokenize(text)) {
        const auto b = utf8_boundaries(word);
        const std::size_t n = b.size() - 1;  // code points
        std::size_t start = 0;
        while (start < n) {
            TokenId match = -1;
            std::size_t end = n;
            for (; end > start; --end) {
                candidate.clear();
                if (start > 0) candidate = "##";
                candidate.append(word, b[start], b[end] - b[start]);
                match = vocab.find(candidate);
                if (match >= 0) break;
            }
            if (match < 0) {
                out.push_back(SubwordVocabulary::kUnk);
                ++start;
            } else {
                out.push_back(match);
                start = end;
            }
        }
    }
    return out;
}

std::string subword_decode(std::span<const TokenId> ids, const SubwordVocabulary& vocab) {
    std::string out;
    for (TokenId id : ids) {
        if (id == SubwordVocabulary::kPad) continue;
        const std::string& p = vocab.piece(id);
        if (p.size() > 2 && p.compare(0, 2, "##") == 0 && !out.empty()) {
            out.append(p, 2, std::string::npos);
        } else {
            if (!out.empty()) out += ' ';
            out += p;
        }
    }
    return out;
}

std::vector<SegmentSpan> segment_spans(std::size_t n, std::size_t window, std::size_t overlap) {
    if (window == 0) throw invalid_argument("segment window must be positive");
    if (overlap >= window) throw invalid_argument("segment overlap must be smaller than the window");
    const std::size_t stride = window - overlap;
    std::vector<SegmentSpan> out;
    for (std::size_t start = 0; start < n; start += stride) {
        out.push_back({start, std::min(start + window, n) - start});
        if (start + window >= n) break;
    }
    return out;
}

std::vector<Segment> segment(std::span<const TokenId> ids, std::size_t window, std::size_t overlap) {
    std::vector<Segment> out;
    for (const auto& s : segment_spans(ids.size(), window, overlap)) {
        Segment seg;
        seg.start = s.start;
        seg.length = s.length;
        seg.ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(s.start),
                       ids.begin() + static_cast<std::ptrdiff_t>(s.start + s.length));
        out.push_back(std::move(seg));
    }
    return out;
}

}  // namespace asr::textprep
