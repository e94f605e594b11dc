#include "granur/text.hpp"

#include <array>
#include <cctype>

namespace granur {
namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one code point starting at pos, advancing pos. Malformed sequences
// consume a single byte and yield kInvalid.
char32_t decode_utf8(std::string_view s, std::size_t& pos) noexcept {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) {
        ++pos;
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
        ++pos;
        return kInvalid;
    }
    if (pos + len > s.size()) {
        ++pos;
        return kInvalid;
    }
    for (int i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if ((b & 0xC0) != 0x80) {
            ++pos;
            return kInvalid;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    pos += len;
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
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

bool in(char32_t cp, char32_t lo, char32_t hi) noexcept { return cp >= lo && cp <= hi; }

bool is_alnum(char32_t cp) noexcept {
    if (cp == kInvalid) return false;
    if (cp < 0x80) return std::isalnum(static_cast<int>(cp)) != 0;
    if (in(cp, 0x80, 0xBF)) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
    if (cp == 0xD7 || cp == 0xF7) return false;
    if (in(cp, 0x2000, 0x206F) || in(cp, 0x20A0, 0x20CF)) return false;
    if (in(cp, 0x2190, 0x23FF) || in(cp, 0x2500, 0x27BF)) return false;
    if (in(cp, 0x2E00, 0x2E7F) || in(cp, 0x3000, 0x303F)) return false;
    if (in(cp, 0xE000, 0xF8FF) || in(cp, 0xFE30, 0xFE6F) || cp == 0xFEFF) return false;
    if (in(cp, 0xFF00, 0xFF0F) || in(cp, 0xFF1A, 0xFF20) || in(cp, 0xFF3B, 0xFF40) ||
        in(cp, 0xFF5B, 0xFF65))
        return false;
    if (in(cp, 0x1F000, 0x1FAFF)) return false;
    return true;
}

char32_t to_lower(char32_t cp) noexcept {
    if (in(cp, 'A', 'Z')) return cp + 0x20;
    if (cp < 0x80) return cp;
    if (in(cp, 0xC0, 0xDE) && cp != 0xD7) return cp + 0x20;
    if (in(cp, 0x100, 0x137) || in(cp, 0x14A, 0x177)) return cp | 1;
    if (in(cp, 0x139, 0x148) || in(cp, 0x179, 0x17E)) return (cp & 1) ? cp + 1 : cp;
    if (cp == 0x178) return 0xFF;
    if (in(cp, 0x391, 0x3A9) && cp != 0x3A2) return cp + 0x20;
    if (in(cp, 0x410, 0x42F)) return cp + 0x20;
    if (in(cp, 0x400, 0x40F)) return cp + 0x50;
    return cp;
}

bool is_space(char c) noexcept { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Word (whitespace-delimited) ending at byte index last, inclusive, with
// leading brackets and quotes stripped.
std::string_view word_ending_at(std::string_view text, std::size_t last, std::size_t& word_begin) {
    std::size_t b = last + 1;
    while (b > 0 && !is_space(text[b - 1])) --b;
    word_begin = b;
    std::string_view w = text.substr(b, last + 1 - b);
    while (!w.empty() && (w.front() == '(' || w.front() == '[' || w.front() == '"' || w.front() == '\''))
        w.remove_prefix(1);
    return w;
}

bool guarded_abbreviation(std::string_view text, std::size_t dot) {
    static constexpr std::array<std::string_view, 4> kSingle = {"e.g.", "i.e.", "dr.", "fig."};
    std::size_t begin = 0;
    const std::string word = ascii_lower(word_ending_at(text, dot, begin));
    for (auto abbrev : kSingle)
        if (word == abbrev) return true;
    if (word == "al." && begin > 0) {
        std::size_t prev_end = begin;
        while (prev_end > 0 && is_space(text[prev_end - 1])) --prev_end;
        if (prev_end == 0) return false;
        std::size_t prev_begin = 0;
        return ascii_lower(word_ending_at(text, prev_end - 1, prev_begin)) == "et";
    }
    return false;
}

}  // namespace

std::vector<TokenSpan> tokenize_spans(std::string_view text) {
    std::vector<TokenSpan> out;
    std::size_t pos = 0;
    TokenSpan current;
    bool open = false;
    while (pos < text.size()) {
        const std::size_t start = pos;
        const char32_t cp = decode_utf8(text, pos);
        if (is_alnum(cp)) {
            if (!open) {
                current = TokenSpan{{}, start, start};
                open = true;
            }
            append_utf8(current.token, to_lower(cp));
            current.end = pos;
        } else if (open) {
            out.push_back(std::move(current));
            open = false;
        }
    }
    if (open) out.push_back(std::move(current));
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (auto& span : tokenize_spans(text)) out.push_back(std::move(span.token));
    return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    auto emit = [&](std::size_t end) {
        auto piece = trim(text.substr(start, end - start));
        if (!piece.empty()) out.emplace_back(piece);
        start = end;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        if (i + 1 < text.size() && !is_space(text[i + 1])) continue;
        if (c == '.' && guarded_abbreviation(text, i)) continue;
        emit(i + 1);
    }
    emit(text.size());
    return out;
}

std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace granur
