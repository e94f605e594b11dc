#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace granur {

/// A token together with the byte span it came from in the source text.
struct TokenSpan {
    std::string token;  // lowercased
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Splits text into maximal runs of alphanumeric code points, lowercased.
///
/// ASCII letters and digits are alphanumeric. Non-ASCII code points count as
/// alphanumeric unless they fall in a known punctuation, symbol or space
/// block. Lowercasing covers ASCII, Latin-1, Latin Extended-A, Greek and
/// Cyrillic; other scripts pass through unchanged. Invalid UTF-8 bytes act as
/// separators.
std::vector<std::string> tokenize(std::string_view text);
std::vector<TokenSpan> tokenize_spans(std::string_view text);

/// Sentence boundaries fall after '.', '!' or '?' followed by whitespace,
/// except after a guarded abbreviation ("e.g.", "i.e.", "Dr.", "Fig.",
/// "et al."). Sentences are returned trimmed; empty input yields no sentences.
std::vector<std::string> split_sentences(std::string_view text);

std::string_view trim(std::string_view s) noexcept;

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// 64-bit FNV-1a; stable across platforms, used wherever hashes are persisted
/// or affect results.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace granur
