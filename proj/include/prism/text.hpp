#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace prism::text {

std::string_view trim(std::string_view s);

// Splits on ASCII whitespace and punctuation and lowercases ASCII letters.
// Bytes >= 0x80 are kept as token characters so UTF-8 words stay intact.
std::vector<std::string> tokenize(std::string_view s);

bool is_stopword(std::string_view token);

}  // namespace prism::text
