#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "semtext/error.hpp"
#include "semtext/text.hpp"

namespace semtext {

/// Approximate token count: every whitespace-delimited word costs ceil(code points / 4).
inline std::size_t count_tokens(std::string_view s) {
    std::size_t tokens = 0;
    for (const text::Span& w : text::word_spans(s)) {
        const std::size_t chars = text::count_code_points(s.substr(w.begin, w.size()));
        tokens += (chars + 3) / 4;
    }
    return tokens;
}

/// A line-level noise filter. A line is dropped when the predicate (or, for
/// pattern rules, a full regex match) says so; surviving lines are kept byte for
/// byte, which makes stripping idempotent.
struct NoiseRule {
    std::string name;
    std::function<bool(std::string_view line)> matches;

    static NoiseRule pattern(std::string name, const std::string& regex) {
        std::regex re;
        try {
            re = std::regex(regex, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
            fail(ErrorCode::InvalidArgument, "bad noise pattern '" + regex + "': " + e.what());
        }
        return {std::move(name), [re](std::string_view line) {
                    return std::regex_match(line.begin(), line.end(), re);
                }};
    }
};

/// Header lines: at least four letters and >= 80% of them uppercase.
inline bool is_caps_header(std::string_view line) {
    std::size_t letters = 0;
    std::size_t upper = 0;
    for (char c : line) {
        if (c >= 'A' && c <= 'Z') {
            ++letters;
            ++upper;
        } else if (c >= 'a' && c <= 'z') {
            ++letters;
        }
    }
    return letters >= 4 && upper * 5 >= letters * 4;
}

inline std::vector<NoiseRule> default_noise_rules() {
    return {
        {"caps-header", is_caps_header},
        NoiseRule::pattern("timestamp", R"(\s*\d{4}-\d{2}-\d{2}([ T]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)?\s*)"),
        NoiseRule::pattern("routing", R"(\s*Routing:.*)"),
        NoiseRule::pattern("page-number", R"(\s*[Pp]age\s+\d+\s+of\s+\d+\s*)"),
    };
}

/// Removes every line matched by any rule, in rule order.
inline std::string strip_noise(std::string_view input, const std::vector<NoiseRule>& rules) {
    std::string out;
    out.reserve(input.size());
    bool first = true;
    std::size_t pos = 0;
    while (pos <= input.size()) {
        std::size_t nl = input.find('\n', pos);
        const bool last = nl == std::string_view::npos;
        if (last) nl = input.size();
        std::string_view line = input.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        bool drop = false;
        for (const NoiseRule& r : rules) {
            if (r.matches(line)) {
                drop = true;
                break;
            }
        }
        if (!drop) {
            if (!first) out.push_back('\n');
            out.append(input.substr(pos, nl - pos));
            first = false;
        }
        if (last) break;
        pos = nl + 1;
    }
    return out;
}

inline std::string strip_noise(std::string_view input) { return strip_noise(input, default_noise_rules()); }

enum class ChunkStrategy { Recursive, Sliding };

struct ChunkPolicy {
    ChunkStrategy strategy = ChunkStrategy::Recursive;
    std::size_t max_tokens = 256;
    std::size_t overlap_tokens = 32;
    std::vector<std::string> separators{"\n\n", ". ", "\n", " "};

    void validate() const {
        if (max_tokens == 0) fail(ErrorCode::InvalidArgument, "max_tokens must be positive");
        if (overlap_tokens >= max_tokens) fail(ErrorCode::InvalidArgument, "overlap_tokens must be below max_tokens");
        for (const auto& s : separators) {
            if (s.empty()) fail(ErrorCode::InvalidArgument, "separators must be nonempty");
        }
    }
};

/// A slice of the cleaned source text. Offsets are byte offsets, end exclusive.
struct Chunk {
    std::string chunk_id;
    std::string source_id;
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    std::size_t token_count = 0;
    std::map<std::string, std::string> metadata;

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

inline std::string make_chunk_id(std::string_view source_id, std::size_t ordinal) {
    return std::string(source_id) + "#" + std::to_string(ordinal);
}

namespace detail {

inline Chunk make_chunk(std::string_view source_id, std::string_view src, text::Span span, std::size_t ordinal) {
    Chunk c;
    c.chunk_id = make_chunk_id(source_id, ordinal);
    c.source_id = std::string(source_id);
    c.text = std::string(src.substr(span.begin, span.size()));
    c.char_start = span.begin;
    c.char_end = span.end;
    c.token_count = count_tokens(c.text);
    return c;
}

/// Longest prefixes (at code point boundaries) that fit the budget.
inline void split_by_characters(std::string_view src, text::Span span, std::size_t max_tokens,
                                std::vector<text::Span>& out) {
    std::size_t start = span.begin;
    while (start < span.end) {
        std::size_t done_tokens = 0; // tokens of completed words in the current piece
        std::size_t word_chars = 0;  // code points of the word in progress
        std::size_t pos = start;
        while (pos < span.end) {
            const auto cp = text::decode_utf8(src, pos);
            std::size_t next_done = done_tokens;
            std::size_t next_word = word_chars;
            if (text::is_space(src[pos])) {
                next_done += (word_chars + 3) / 4;
                next_word = 0;
            } else {
                ++next_word;
            }
            if (next_done + (next_word + 3) / 4 > max_tokens) break;
            done_tokens = next_done;
            word_chars = next_word;
            pos += cp.length;
        }
        if (pos == start) {
            pos += text::decode_utf8(src, pos).length; // a single code point always fits max_tokens >= 1
        }
        out.push_back({start, pos});
        start = pos;
    }
}

inline void split_recursive_span(std::string_view src, text::Span span, const ChunkPolicy& policy,
                                 std::size_t level, std::vector<text::Span>& out) {
    const auto tokens_of = [&](text::Span s) { return count_tokens(src.substr(s.begin, s.size())); };
    if (tokens_of(span) <= policy.max_tokens) {
        out.push_back(span);
        return;
    }
    if (level >= policy.separators.size()) {
        split_by_characters(src, span, policy.max_tokens, out);
        return;
    }
    // Pieces end right after each separator occurrence, so they tile the span.
    const std::string& sep = policy.separators[level];
    std::vector<text::Span> pieces;
    std::size_t start = span.begin;
    const std::string_view view = src.substr(0, span.end);
    for (std::size_t hit = view.find(sep, start); hit != std::string_view::npos; hit = view.find(sep, start)) {
        pieces.push_back({start, hit + sep.size()});
        start = hit + sep.size();
    }
    if (start < span.end) pieces.push_back({start, span.end});
    if (pieces.size() <= 1) {
        split_recursive_span(src, span, policy, level + 1, out);
        return;
    }

    text::Span current{span.begin, span.begin};
    for (const text::Span& piece : pieces) {
        const text::Span merged{current.begin, piece.end};
        if (tokens_of(merged) <= policy.max_tokens) {
            current = merged;
            continue;
        }
        if (current.size() > 0) out.push_back(current);
        if (tokens_of(piece) > policy.max_tokens) {
            split_recursive_span(src, piece, policy, level + 1, out);
            current = {piece.end, piece.end};
        } else {
            current = piece;
        }
    }
    if (current.size() > 0) out.push_back(current);
}

} // namespace detail

/// Greedy boundary-aware splitting. Pieces are packed while they fit; a piece that
/// alone exceeds the budget is split again on the next separator, and finally at
/// character boundaries. Chunks tile the text exactly.
inline std::vector<Chunk> split_recursive(std::string_view source_id, std::string_view text,
                                          const ChunkPolicy& policy) {
    policy.validate();
    std::vector<Chunk> chunks;
    if (text.empty()) return chunks;
    std::vector<text::Span> spans;
    detail::split_recursive_span(text, {0, text.size()}, policy, 0, spans);
    chunks.reserve(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        chunks.push_back(detail::make_chunk(source_id, text, spans[i], i));
    }
    return chunks;
}

/// Overlapping windows of at most `max_tokens`, aligned to word boundaries. Each
/// window after the first starts at the longest word suffix of the previous window
/// that costs no more than `overlap_tokens`.
inline std::vector<Chunk> split_sliding(std::string_view source_id, std::string_view text,
                                        const ChunkPolicy& policy) {
    policy.validate();
    std::vector<Chunk> chunks;

    // Words longer than a whole window are cut into window-sized pieces first.
    std::vector<text::Span> words;
    std::vector<std::size_t> cost;
    for (const text::Span& w : text::word_spans(text)) {
        const std::size_t t = count_tokens(text.substr(w.begin, w.size()));
        if (t <= policy.max_tokens) {
            words.push_back(w);
            cost.push_back(t);
            continue;
        }
        std::vector<text::Span> pieces;
        detail::split_by_characters(text, w, policy.max_tokens, pieces);
        for (const auto& p : pieces) {
            words.push_back(p);
            cost.push_back(count_tokens(text.substr(p.begin, p.size())));
        }
    }
    const std::size_t n = words.size();
    std::size_t start = 0;
    while (start < n) {
        std::size_t end = start;
        std::size_t used = 0;
        while (end < n && used + cost[end] <= policy.max_tokens) {
            used += cost[end];
            ++end;
        }
        chunks.push_back(detail::make_chunk(source_id, text, {words[start].begin, words[end - 1].end}, chunks.size()));
        if (end == n) break;
        std::size_t next = end;
        std::size_t shared = 0;
        while (next > start + 1 && shared + cost[next - 1] <= policy.overlap_tokens) {
            shared += cost[next - 1];
            --next;
        }
        start = next;
    }
    return chunks;
}

inline std::vector<Chunk> split(std::string_view source_id, std::string_view text, const ChunkPolicy& policy) {
    return policy.strategy == ChunkStrategy::Recursive ? split_recursive(source_id, text, policy)
                                                       : split_sliding(source_id, text, policy);
}

} // namespace semtext
