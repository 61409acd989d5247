#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lexbias {

struct TokenizerOptions {
    bool lowercase = true;
    bool strip_punctuation = true;
};

namespace detail {

struct CodePoint {
    char32_t value;
    std::size_t length;  // bytes consumed
    bool valid;
};

inline CodePoint decode_utf8(std::string_view s, std::size_t pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) return {b0, 1, true};
    std::size_t len = 0;
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
        return {b0, 1, false};
    }
    if (pos + len > s.size()) return {b0, 1, false};
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[pos + k]);
        if ((b & 0xC0) != 0x80) return {b0, 1, false};
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len, true};
}

inline void encode_utf8(char32_t cp, std::string& out) {
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

inline bool is_space(char32_t c) {
    return c == ' ' || (c >= 0x09 && c <= 0x0D) || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
           c == 0x205F || c == 0x3000;
}

// ASCII punctuation plus the common punctuation blocks: Latin-1 marks,
// General Punctuation, CJK Symbols and Punctuation, fullwidth ASCII forms.
inline bool is_punct(char32_t c) {
    if (c < 0x80) {
        return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
               (c >= 0x7B && c <= 0x7E);
    }
    switch (c) {
        case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
            return true;
        default:
            break;
    }
    return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
           (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
           (c >= 0x3014 && c <= 0x301F) || (c >= 0xFF01 && c <= 0xFF0F) ||
           (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
           (c >= 0xFF5B && c <= 0xFF65);
}

inline char32_t to_lower(char32_t c) {
    if (c >= 'A' && c <= 'Z') return c + 0x20;
    if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
    return c;
}

} // namespace detail

/// Token stream in text order, duplicates kept. Bigrams are built from this.
inline std::vector<std::string> tokenize_stream(std::string_view text,
                                                const TokenizerOptions& opts = {}) {
    std::vector<std::string> tokens;
    std::string cur;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto cp = detail::decode_utf8(text, pos);
        if (!cp.valid) {
            cur += text[pos];
            pos += 1;
            continue;
        }
        const std::size_t start = pos;
        pos += cp.length;
        if (detail::is_space(cp.value)) {
            if (!cur.empty()) tokens.push_back(std::move(cur));
            cur.clear();
            continue;
        }
        if (opts.strip_punctuation && detail::is_punct(cp.value)) continue;
        if (opts.lowercase) {
            const char32_t lowered = detail::to_lower(cp.value);
            if (lowered != cp.value) {
                detail::encode_utf8(lowered, cur);
                continue;
            }
        }
        cur.append(text.substr(start, cp.length));
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

/// Presence semantics: the distinct tokens of text, sorted.
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& opts = {}) {
    auto tokens = tokenize_stream(text, opts);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

} // namespace lexbias
