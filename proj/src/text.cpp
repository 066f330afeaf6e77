#include "prism/text.hpp"

#include <algorithm>
#include <array>

namespace prism::text {

namespace {

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_separator(unsigned char c) {
    if (c >= 0x80) return false;
    if (is_space(c)) return true;
    return !((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'));
}

// Sorted for binary search.
constexpr std::array<std::string_view, 64> kStopwords = {
    "a",     "about", "after", "all",   "also",  "an",    "and",   "are",
    "as",    "at",    "be",    "been",  "but",   "by",    "can",   "could",
    "for",   "from",  "had",   "has",   "have",  "he",    "her",   "his",
    "how",   "i",     "if",    "in",    "into",  "is",    "it",    "its",
    "more",  "new",   "no",    "not",   "of",    "on",    "one",   "or",
    "our",   "out",   "said",  "she",   "so",    "some",  "than",  "that",
    "the",   "their", "them",  "there", "they",  "this",  "to",    "up",
    "was",   "we",    "were",  "what",  "which", "who",   "will",  "with",
};

}  // namespace

std::string_view trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_separator(c)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
            continue;
        }
        current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

bool is_stopword(std::string_view token) {
    return std::binary_search(kStopwords.begin(), kStopwords.end(), token);
}

}  // namespace prism::text
