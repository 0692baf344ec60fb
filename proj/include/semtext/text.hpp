#pragma once

// UTF-8 helpers shared by the tokenizers. Malformed sequences decode byte-wise as
// U+FFFD replacement characters of length one so that offsets always advance.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace semtext::text {

struct CodePoint {
    char32_t value;
    std::size_t length; // bytes consumed
};

inline CodePoint decode_utf8(std::string_view s, std::size_t pos) noexcept {
    const auto byte = [&](std::size_t i) { return static_cast<std::uint8_t>(s[i]); };
    const std::uint8_t b0 = byte(pos);
    if (b0 < 0x80) {
        return {b0, 1};
    }
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
        return {0xFFFD, 1};
    }
    if (pos + len > s.size()) {
        return {0xFFFD, 1};
    }
    for (std::size_t i = 1; i < len; ++i) {
        const std::uint8_t b = byte(pos + i);
        if ((b & 0xC0) != 0x80) {
            return {0xFFFD, 1};
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len};
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

constexpr bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

/// Letters and digits. Outside ASCII, everything not in a punctuation, symbol or
/// space block counts as a word character (covers CJK, Cyrillic, Greek, accents).
constexpr bool is_alnum(char32_t cp) noexcept {
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    }
    if (cp <= 0xBF) return cp == 0xAA || cp == 0xB2 || cp == 0xB3 || cp == 0xB5 || cp == 0xB9 || cp == 0xBA ||
                           (cp >= 0xBC && cp <= 0xBE);
    if (cp == 0xD7 || cp == 0xF7) return false;
    if (cp == 0xFFFD) return false;
    if (cp >= 0x2000 && cp <= 0x2BFF) return false;   // punctuation, symbols, arrows, box drawing
    if (cp >= 0x3000 && cp <= 0x3003) return false;   // ideographic space and punctuation
    if (cp >= 0x3008 && cp <= 0x3020) return false;   // CJK brackets
    if (cp >= 0xFE30 && cp <= 0xFE4F) return false;   // CJK compatibility forms
    if (cp >= 0xFF00 && cp <= 0xFF0F) return false;   // fullwidth punctuation
    if (cp >= 0xFF1A && cp <= 0xFF20) return false;
    if (cp >= 0xFF3B && cp <= 0xFF40) return false;
    if (cp >= 0xFF5B && cp <= 0xFF65) return false;
    if (cp >= 0x1F000 && cp <= 0x1FAFF) return false; // emoji and pictographs
    return true;
}

/// Simple case folding that never changes the UTF-8 byte length.
constexpr char32_t to_lower(char32_t cp) noexcept {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp < 0x80) return cp;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    if (cp >= 0x100 && cp <= 0x17F) {
        // Latin Extended-A alternates upper/lower, with a shifted run in the middle.
        if ((cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E)) {
            return (cp % 2 == 1) ? cp + 1 : cp;
        }
        if (cp == 0x130 || cp == 0x131 || cp == 0x138 || cp == 0x149 || cp == 0x178 || cp == 0x17F) {
            return cp;
        }
        return (cp % 2 == 0) ? cp + 1 : cp;
    }
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20; // Greek
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;                // Cyrillic
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

inline std::string to_lower_utf8(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t pos = 0; pos < s.size();) {
        const CodePoint cp = decode_utf8(s, pos);
        if (cp.value == 0xFFFD && cp.length == 1) {
            out.push_back(s[pos]); // keep malformed bytes verbatim
        } else {
            append_utf8(out, to_lower(cp.value));
        }
        pos += cp.length;
    }
    return out;
}

inline std::size_t count_code_points(std::string_view s) noexcept {
    std::size_t n = 0;
    for (std::size_t pos = 0; pos < s.size(); ++n) {
        pos += decode_utf8(s, pos).length;
    }
    return n;
}

inline std::string_view trim(std::string_view s) noexcept {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

inline bool is_blank(std::string_view s) noexcept { return trim(s).empty(); }

struct Span {
    std::size_t begin;
    std::size_t end; // exclusive, bytes

    std::size_t size() const noexcept { return end - begin; }
};

/// Byte spans of whitespace-delimited words.
inline std::vector<Span> word_spans(std::string_view s) {
    std::vector<Span> spans;
    std::size_t pos = 0;
    while (pos < s.size()) {
        while (pos < s.size() && is_space(s[pos])) ++pos;
        if (pos >= s.size()) break;
        const std::size_t start = pos;
        while (pos < s.size() && !is_space(s[pos])) ++pos;
        spans.push_back({start, pos});
    }
    return spans;
}

/// Byte spans of maximal letter/digit runs.
inline std::vector<Span> alnum_spans(std::string_view s) {
    std::vector<Span> spans;
    std::size_t pos = 0;
    std::size_t start = 0;
    bool in_run = false;
    while (pos < s.size()) {
        const CodePoint cp = decode_utf8(s, pos);
        const bool word = is_alnum(cp.value);
        if (word && !in_run) {
            start = pos;
            in_run = true;
        } else if (!word && in_run) {
            spans.push_back({start, pos});
            in_run = false;
        }
        pos += cp.length;
    }
    if (in_run) spans.push_back({start, s.size()});
    return spans;
}

/// Lowercased maximal letter/digit runs.
inline std::vector<std::string> alnum_tokens(std::string_view s) {
    const std::string lower = to_lower_utf8(s);
    std::vector<std::string> tokens;
    for (const Span& sp : alnum_spans(lower)) {
        tokens.emplace_back(lower.substr(sp.begin, sp.size()));
    }
    return tokens;
}

} // namespace semtext::text
